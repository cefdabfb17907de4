//! Sanity checks on a loaded dataset: correlation of consumption with
//! outdoor temperature and building size, and the winter mean temperature
//! used when reporting per-year results.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, Medium, WeatherSeries};

/// Pearson correlation coefficient, two-pass centered form.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewSamples {
            population: "correlation input".into(),
            n,
            floor: 3,
        });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// How `daily_mean_series` treats days on which only part of the meter
/// population reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanAlignment {
    /// Mean over whichever meters report that day.
    #[default]
    Reporters,
    /// Keep only days on which every meter of the medium reports.
    Intersection,
}

/// Mean daily total per reporting meter of one medium. Hourly meters are
/// summed to daily totals first.
pub fn daily_mean_series(
    dataset: &Dataset,
    medium: Medium,
    year: i32,
    alignment: MeanAlignment,
) -> Vec<(NaiveDate, f64)> {
    let mut per_day: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    let mut n_meters = 0usize;
    for meter in dataset.meters.values().filter(|m| m.medium == medium) {
        n_meters += 1;
        for (day, total) in meter.daily_totals(year) {
            let slot = per_day.entry(day).or_insert((0.0, 0));
            slot.0 += total;
            slot.1 += 1;
        }
    }
    per_day
        .into_iter()
        .filter(|&(_, (_, count))| match alignment {
            MeanAlignment::Reporters => true,
            MeanAlignment::Intersection => count == n_meters,
        })
        .map(|(day, (sum, count))| (day, sum / count as f64))
        .collect()
}

/// The two date spans whose union defines "winter" for a year: January 1
/// through `early_end`, and `late_start` through December 31.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinterWindow {
    pub early_end_month: u32,
    pub early_end_day: u32,
    pub late_start_month: u32,
    pub late_start_day: u32,
}

impl Default for WinterWindow {
    fn default() -> Self {
        WinterWindow {
            early_end_month: 2,
            early_end_day: 20,
            late_start_month: 11,
            late_start_day: 1,
        }
    }
}

impl WinterWindow {
    pub fn dates(&self, year: i32) -> Result<Vec<NaiveDate>> {
        let early_end = NaiveDate::from_ymd_opt(year, self.early_end_month, self.early_end_day)
            .ok_or_else(|| Error::invalid("winter_window", "bad early end date"))?;
        let late_start = NaiveDate::from_ymd_opt(year, self.late_start_month, self.late_start_day)
            .ok_or_else(|| Error::invalid("winter_window", "bad late start date"))?;
        let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        let dec31 = NaiveDate::from_ymd_opt(year, 12, 31).unwrap();
        if early_end < jan1 || late_start > dec31 || early_end >= late_start {
            return Err(Error::invalid("winter_window", "spans must be disjoint and in order"));
        }
        let mut dates: Vec<NaiveDate> = jan1.iter_days().take_while(|d| *d <= early_end).collect();
        dates.extend(late_start.iter_days().take_while(|d| *d <= dec31));
        Ok(dates)
    }
}

fn compress_spans(missing: &[NaiveDate]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < missing.len() {
        let start = missing[i];
        let mut end = start;
        while i + 1 < missing.len() && missing[i + 1] == end.succ_opt().unwrap() {
            i += 1;
            end = missing[i];
        }
        if start == end {
            parts.push(start.to_string());
        } else {
            parts.push(format!("{start}..{end}"));
        }
        i += 1;
    }
    parts.join(", ")
}

/// Mean temperature over the winter window of one year. Fails when the
/// weather series covers less than `min_coverage` of the window.
pub fn winter_mean_temp(
    weather: &WeatherSeries,
    year: i32,
    window: &WinterWindow,
    min_coverage: f64,
) -> Result<f64> {
    let wanted = window.dates(year)?;
    let by_date: BTreeMap<NaiveDate, f64> = weather.readings.iter().copied().collect();
    let mut sum = 0.0;
    let mut covered = 0usize;
    let mut missing = Vec::new();
    for d in &wanted {
        match by_date.get(d) {
            Some(&t) => {
                sum += t;
                covered += 1;
            }
            None => missing.push(*d),
        }
    }
    if covered == 0 || (covered as f64) < min_coverage * wanted.len() as f64 {
        return Err(Error::WinterCoverage {
            year,
            covered,
            required: wanted.len(),
            missing: compress_spans(&missing),
        });
    }
    Ok(sum / covered as f64)
}

/// One correlation check: which pair of series, over which year, and the
/// resulting coefficient with its sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pair: String,
    pub year: i32,
    pub r: f64,
    pub n: usize,
}

#[derive(Debug, Default, Serialize)]
pub struct ValidationOutcome {
    pub reports: Vec<CorrelationReport>,
    /// Pairs that could not be computed, with the reason.
    pub diagnostics: Vec<String>,
}

fn join_on_dates(a: &[(NaiveDate, f64)], b: &[(NaiveDate, f64)]) -> (Vec<f64>, Vec<f64>) {
    let bm: BTreeMap<NaiveDate, f64> = b.iter().copied().collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(d, v) in a {
        if let Some(&w) = bm.get(&d) {
            xs.push(v);
            ys.push(w);
        }
    }
    (xs, ys)
}

/// Correlation checks mirroring the plausibility analysis: consumption
/// against temperature, against building volume, and across media.
pub fn validation_suite(
    dataset: &Dataset,
    years: &[i32],
    min_coverage: f64,
) -> ValidationOutcome {
    let mut out = ValidationOutcome::default();
    let weather: Vec<(NaiveDate, f64)> = dataset.weather.readings.clone();

    let push = |pair: &str, year: i32, xs: &[f64], ys: &[f64], out: &mut ValidationOutcome| {
        match pearson_r(xs, ys) {
            Ok(r) => out.reports.push(CorrelationReport {
                pair: pair.to_string(),
                year,
                r,
                n: xs.len(),
            }),
            Err(e) => out.diagnostics.push(format!("{year} {pair}: {e}")),
        }
    };

    for &year in years {
        let gas_daily = daily_mean_series(dataset, Medium::GasVolume, year, MeanAlignment::Reporters);
        let hp_daily =
            daily_mean_series(dataset, Medium::HpElectricity, year, MeanAlignment::Reporters);

        let (xs, ys) = join_on_dates(&hp_daily, &weather);
        push("hp_daily_mean_vs_temp", year, &xs, &ys, &mut out);

        let (xs, ys) = join_on_dates(&gas_daily, &weather);
        push("gas_daily_mean_vs_temp", year, &xs, &ys, &mut out);

        let (xs, ys) = join_on_dates(&gas_daily, &hp_daily);
        push("gas_daily_mean_vs_hp_daily_mean", year, &xs, &ys, &mut out);

        let mut vol_gas = (Vec::new(), Vec::new());
        let mut vol_hp = (Vec::new(), Vec::new());
        for b in &dataset.buildings {
            let Some(volume) = b.volume_m3 else { continue };
            let medium = if b.heating_type == crate::ingest::HeatingType::GasFurnace {
                Medium::GasVolume
            } else if b.heating_type.is_heat_pump() {
                Medium::HpElectricity
            } else {
                continue;
            };
            let Some(annual) = dataset.building_annual(b, medium, year) else {
                continue;
            };
            if annual.coverage < min_coverage || annual.total <= 0.0 {
                continue;
            }
            let slot = if medium == Medium::GasVolume {
                &mut vol_gas
            } else {
                &mut vol_hp
            };
            slot.0.push(volume);
            slot.1.push(annual.total);
        }
        push("volume_vs_gas_annual", year, &vol_gas.0, &vol_gas.1, &mut out);
        push("volume_vs_hp_annual", year, &vol_hp.0, &vol_hp.1, &mut out);
    }
    out
}
