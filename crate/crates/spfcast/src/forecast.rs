//! Electricity demand of the gas-heated stock after a hypothetical switch
//! to heat pumps, plus the distribution of heat-pump-to-household
//! consumption ratios used to compare existing and future installations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{Dataset, HeatingType, Medium};
use crate::thermal::{gas_to_heat, validate_gamma, GasParams};

/// Where the scale factor B comes from: given directly, or backed out of
/// a mean seasonal performance factor and gamma.
#[derive(Debug, Clone, Copy)]
pub enum BFactor {
    Direct(f64),
    FromSpf { spf: f64, gamma: f64 },
}

impl BFactor {
    pub fn value(&self) -> Result<f64> {
        match *self {
            BFactor::Direct(b) => {
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::invalid("b", format!("must be positive, got {b}")));
                }
                Ok(b)
            }
            BFactor::FromSpf { spf, gamma } => {
                if !(spf > 0.0 && spf.is_finite()) {
                    return Err(Error::invalid("spf", format!("must be positive, got {spf}")));
                }
                validate_gamma(gamma)?;
                Ok(spf / (1.0 - gamma))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildingForecast {
    pub building_id: String,
    pub gas_m3: f64,
    pub heat_kwh: f64,
    pub predicted_kwh: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrofitForecast {
    pub year: i32,
    pub b: f64,
    pub total_kwh: f64,
    /// Household electricity of the same buildings, where metered.
    pub household_baseline_kwh: Option<f64>,
    /// 100 * predicted / household baseline, over buildings with both.
    pub increase_pct: Option<f64>,
    pub per_building: Vec<BuildingForecast>,
}

/// Predict per-building heat-pump electricity for every gas-furnace
/// building with enough gas coverage in `year`: heat demand from gas
/// volume, divided by B.
pub fn forecast_retrofit(
    dataset: &Dataset,
    year: i32,
    b: &BFactor,
    gas: &GasParams,
    min_coverage: f64,
) -> Result<RetrofitForecast> {
    gas.validate()?;
    let b = b.value()?;
    let mut per_building = Vec::new();
    let mut total = 0.0;
    let mut baseline = 0.0;
    let mut covered_pred = 0.0;
    let mut with_baseline = 0usize;
    for building in &dataset.buildings {
        if building.heating_type != HeatingType::GasFurnace {
            continue;
        }
        let Some(annual) = dataset.building_annual(building, Medium::GasVolume, year) else {
            continue;
        };
        if annual.coverage < min_coverage || annual.total <= 0.0 {
            continue;
        }
        let heat_kwh = gas_to_heat(annual.total, gas);
        let predicted_kwh = heat_kwh / b;
        total += predicted_kwh;
        if let Some(hh) = dataset.building_annual(building, Medium::HouseholdElectricity, year) {
            if hh.coverage >= min_coverage && hh.total > 0.0 {
                baseline += hh.total;
                covered_pred += predicted_kwh;
                with_baseline += 1;
            }
        }
        per_building.push(BuildingForecast {
            building_id: building.building_id.clone(),
            gas_m3: annual.total,
            heat_kwh,
            predicted_kwh,
        });
    }
    if per_building.is_empty() {
        return Err(Error::EmptyPopulation("gas_furnace".into()));
    }
    let (household_baseline_kwh, increase_pct) = if with_baseline > 0 {
        (Some(baseline), Some(100.0 * covered_pred / baseline))
    } else {
        (None, None)
    };
    Ok(RetrofitForecast {
        year,
        b,
        total_kwh: total,
        household_baseline_kwh,
        increase_pct,
        per_building,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    ExistingHp,
    FutureHp,
}

impl Population {
    pub fn as_str(self) -> &'static str {
        match self {
            Population::ExistingHp => "existing_hp",
            Population::FutureHp => "future_hp",
        }
    }
}

/// Five-number summary of the ratio distribution. Whiskers follow the
/// 1.5 * IQR convention; values beyond them, or above `clip_at`, count as
/// outliers but stay in the quartile computation.
#[derive(Debug, Clone, Serialize)]
pub struct RatioStats {
    pub population: Population,
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: usize,
    pub clip_at: Option<f64>,
}

/// Quartile by linear interpolation between order statistics: position
/// p * (n - 1) in the sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Summarize per-building ratios of heat-pump electricity (metered for
/// existing installations, predicted for the gas stock) to household
/// electricity. Ratios below 1 are legitimate and kept.
pub fn ratio_stats(
    dataset: &Dataset,
    year: i32,
    population: Population,
    forecast: Option<&RetrofitForecast>,
    clip_at: Option<f64>,
    min_coverage: f64,
) -> Result<(RatioStats, Vec<(String, f64)>)> {
    let mut ratios: Vec<(String, f64)> = Vec::new();
    match population {
        Population::ExistingHp => {
            for b in &dataset.buildings {
                if !b.heating_type.is_heat_pump() {
                    continue;
                }
                let Some(hp) = dataset.building_annual(b, Medium::HpElectricity, year) else {
                    continue;
                };
                let Some(hh) = dataset.building_annual(b, Medium::HouseholdElectricity, year)
                else {
                    continue;
                };
                if hp.coverage < min_coverage || hh.coverage < min_coverage || hh.total <= 0.0 {
                    continue;
                }
                ratios.push((b.building_id.clone(), hp.total / hh.total));
            }
        }
        Population::FutureHp => {
            let forecast = forecast.ok_or_else(|| {
                Error::invalid("forecast", "future_hp ratios need a retrofit forecast")
            })?;
            for bf in &forecast.per_building {
                let Some(building) = dataset
                    .buildings
                    .iter()
                    .find(|b| b.building_id == bf.building_id)
                else {
                    continue;
                };
                let Some(hh) =
                    dataset.building_annual(building, Medium::HouseholdElectricity, year)
                else {
                    continue;
                };
                if hh.coverage < min_coverage || hh.total <= 0.0 {
                    continue;
                }
                ratios.push((bf.building_id.clone(), bf.predicted_kwh / hh.total));
            }
        }
    }
    if ratios.is_empty() {
        return Err(Error::EmptyPopulation(population.as_str().into()));
    }
    let mut sorted: Vec<f64> = ratios.iter().map(|&(_, r)| r).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let whisker_low = sorted.iter().copied().find(|&v| v >= lo_fence).unwrap();
    let whisker_high = sorted.iter().rev().copied().find(|&v| v <= hi_fence).unwrap();
    let outliers = sorted
        .iter()
        .filter(|&&v| v < whisker_low || v > whisker_high || clip_at.is_some_and(|c| v > c))
        .count();
    Ok((
        RatioStats {
            population,
            n: sorted.len(),
            q1,
            median,
            q3,
            whisker_low,
            whisker_high,
            outliers,
            clip_at,
        },
        ratios,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BuildingRecord, MeterSeries, Resolution};
    use chrono::{Datelike, NaiveDate};

    fn full_year_daily(id: &str, medium: Medium, year: i32, daily: f64) -> MeterSeries {
        let mut readings = Vec::new();
        let mut d = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        while d.year() == year {
            readings.push((d.and_hms_opt(0, 0, 0).unwrap(), daily));
            d = d.succ_opt().unwrap();
        }
        MeterSeries {
            meter_id: id.into(),
            medium,
            resolution: Resolution::Daily,
            readings,
        }
    }

    fn town(gas_daily_m3: &[f64], hh_daily: &[f64]) -> Dataset {
        let mut dataset = Dataset::default();
        for (i, (&g, &h)) in gas_daily_m3.iter().zip(hh_daily).enumerate() {
            let gid = format!("b{i:02}_gas");
            let hid = format!("b{i:02}_hh");
            dataset
                .meters
                .insert(gid.clone(), full_year_daily(&gid, Medium::GasVolume, 2021, g));
            dataset.meters.insert(
                hid.clone(),
                full_year_daily(&hid, Medium::HouseholdElectricity, 2021, h),
            );
            dataset.buildings.push(BuildingRecord {
                building_id: format!("b{i:02}"),
                volume_m3: Some(400.0),
                heating_type: HeatingType::GasFurnace,
                meter_ids: vec![gid, hid],
            });
        }
        dataset
    }

    #[test]
    fn forecast_single_building_reference_point() {
        // One building whose annual heat is 3300 kWh at B = 3.3 gives
        // exactly 1000 kWh of predicted electricity.
        let p = GasParams::default();
        let daily_m3 = 3300.0 / (0.95 * 10.5 * 0.9) / 365.0;
        let dataset = town(&[daily_m3], &[5.0]);
        let f = forecast_retrofit(&dataset, 2021, &BFactor::Direct(3.3), &p, 0.9).unwrap();
        assert_eq!(f.per_building.len(), 1);
        assert!((f.per_building[0].heat_kwh - 3300.0).abs() < 1e-6);
        assert!((f.total_kwh - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn halving_b_doubles_every_prediction() {
        let dataset = town(&[2.0, 3.5, 1.25], &[5.0, 5.0, 5.0]);
        let p = GasParams::default();
        let f1 = forecast_retrofit(&dataset, 2021, &BFactor::Direct(3.0), &p, 0.9).unwrap();
        let f2 = forecast_retrofit(&dataset, 2021, &BFactor::Direct(1.5), &p, 0.9).unwrap();
        assert_eq!(f2.total_kwh, 2.0 * f1.total_kwh);
        for (a, b) in f1.per_building.iter().zip(&f2.per_building) {
            assert_eq!(b.predicted_kwh, 2.0 * a.predicted_kwh);
        }
    }

    #[test]
    fn spf_source_matches_direct_b() {
        let b = BFactor::FromSpf { spf: 2.9535, gamma: 0.105 };
        assert!((b.value().unwrap() - 3.3).abs() < 1e-12);
        assert!(BFactor::Direct(0.0).value().is_err());
        assert!(BFactor::FromSpf { spf: 2.0, gamma: 1.0 }.value().is_err());
    }

    #[test]
    fn increase_pct_uses_household_baseline() {
        let dataset = town(&[2.0, 2.0], &[5.0, 5.0]);
        let p = GasParams::default();
        let f = forecast_retrofit(&dataset, 2021, &BFactor::Direct(3.0), &p, 0.9).unwrap();
        let baseline = 2.0 * 5.0 * 365.0;
        assert!((f.household_baseline_kwh.unwrap() - baseline).abs() < 1e-9);
        let want = 100.0 * f.total_kwh / baseline;
        assert!((f.increase_pct.unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn empty_gas_population_is_an_error() {
        let dataset = Dataset::default();
        let err = forecast_retrofit(
            &dataset,
            2021,
            &BFactor::Direct(3.0),
            &GasParams::default(),
            0.9,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyPopulation(_)));
    }

    #[test]
    fn quantile_linear_interpolation() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert_eq!(quantile(&v, 0.25), 1.5);
        assert_eq!(quantile(&v, 0.75), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 3.0);
    }

    #[test]
    fn ratios_keep_small_values_and_count_clipped() {
        let dataset = town(&[1.0, 1.5, 2.0, 2.5, 40.0], &[5.0, 5.0, 5.0, 5.0, 5.0]);
        let p = GasParams::default();
        let f = forecast_retrofit(&dataset, 2021, &BFactor::Direct(3.0), &p, 0.9).unwrap();
        let (stats, ratios) =
            ratio_stats(&dataset, 2021, Population::FutureHp, Some(&f), Some(6.4), 0.9).unwrap();
        assert_eq!(stats.n, 5);
        // The small ratio stays in the data.
        assert!(ratios.iter().any(|&(_, r)| r < 1.0));
        // The extreme building exceeds both the whisker and the clip level
        // but is still one outlier, not a dropped value.
        assert_eq!(stats.outliers, 1);
        assert_eq!(stats.clip_at, Some(6.4));
        assert!(stats.whisker_high <= 6.4);
    }

    #[test]
    fn future_population_requires_forecast() {
        let dataset = town(&[2.0], &[5.0]);
        assert!(matches!(
            ratio_stats(&dataset, 2021, Population::FutureHp, None, None, 0.9),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            ratio_stats(&dataset, 2021, Population::ExistingHp, None, None, 0.9),
            Err(Error::EmptyPopulation(_))
        ));
    }
}
