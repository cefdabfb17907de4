//! Grid search for the scale factor B that best aligns the distribution of
//! scaled heat-pump electricity with the distribution of furnace heat.
//! Both inputs are unpaired annual samples in kWh; no building appears in
//! both. The backed-out mean seasonal performance factor is B * (1 - gamma).

use serde::{Deserialize, Serialize};

use crate::distribution::{histogram, jsd, make_common_edges, BinningSpec, DivergenceVariant};
use crate::error::{Error, Result};
use crate::ingest::{filter_by_coverage, Dataset, HeatingType, Medium};
use crate::thermal::{gas_to_heat, validate_gamma, GasParams};

/// Inclusive search grid over candidate B values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub b_min: f64,
    pub b_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            b_min: 1.5,
            b_max: 4.0,
            step: 0.1,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.b_min > 0.0
            && self.b_max > self.b_min
            && self.step > 0.0
            && self.b_min.is_finite()
            && self.b_max.is_finite()
            && self.step.is_finite();
        if !ok {
            return Err(Error::invalid(
                "grid",
                format!("need 0 < b_min < b_max and step > 0, got {self:?}"),
            ));
        }
        Ok(())
    }

    /// Grid points in ascending order. Both endpoints are always present;
    /// when the span is not a whole number of steps the last interval is
    /// shorter.
    pub fn points(&self) -> Vec<f64> {
        let span = self.b_max - self.b_min;
        let n = ((span / self.step) * (1.0 + 1e-12)).floor() as usize;
        let mut points: Vec<f64> = (0..=n).map(|i| self.b_min + i as f64 * self.step).collect();
        let last = *points.last().unwrap();
        if (self.b_max - last).abs() <= 1e-9 * self.step {
            *points.last_mut().unwrap() = self.b_max;
        } else {
            points.push(self.b_max);
        }
        points
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvePoint {
    pub b: f64,
    /// Divergence in nats; serialized as null when infinite.
    pub jsd: f64,
}

/// Knobs for one estimation run.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig {
    pub grid: GridSpec,
    pub binning: BinningSpec,
    pub variant: DivergenceVariant,
    pub epsilon: f64,
    pub gamma: f64,
    /// Minimum sample size per population.
    pub min_samples: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            grid: GridSpec::default(),
            binning: BinningSpec::default(),
            variant: DivergenceVariant::default(),
            epsilon: 1e-9,
            gamma: 0.105,
            min_samples: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationResult {
    pub year: i32,
    pub b_star: f64,
    pub spf_mean: f64,
    pub gamma: f64,
    pub variant: DivergenceVariant,
    pub curve: Vec<CurvePoint>,
    pub n_gas: usize,
    pub n_hp: usize,
}

/// Multiply each electricity value by the candidate B.
pub fn scale_sample(electricity_kwh: &[f64], b: f64) -> Vec<f64> {
    electricity_kwh.iter().map(|&e| e * b).collect()
}

/// Mean seasonal performance factor implied by a scale factor B.
pub fn spf_from_b(b: f64, gamma: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&gamma));
    b * (1.0 - gamma)
}

fn check_sample(name: &str, sample: &[f64], floor: usize) -> Result<()> {
    if sample.len() < floor {
        return Err(Error::TooFewSamples {
            population: name.into(),
            n: sample.len(),
            floor,
        });
    }
    if let Some(bad) = sample.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::invalid(
            "sample",
            format!("{name} sample contains non-positive value {bad}"),
        ));
    }
    Ok(())
}

/// Ties resolve to the smallest B: later points must be strictly lower to
/// displace the incumbent.
fn argmin(curve: &[CurvePoint]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in curve.iter().enumerate() {
        if p.jsd.is_finite() && best.map_or(true, |j| p.jsd < curve[j].jsd) {
            best = Some(i);
        }
    }
    best
}

/// Scan the grid: at each candidate B, rebuild common bin edges over the
/// pooled sample {Q, B*E}, histogram both sides, and evaluate the
/// divergence. Returns the argmin along with the full curve.
pub fn estimate_b(
    year: i32,
    heat_kwh: &[f64],
    electricity_kwh: &[f64],
    cfg: &EstimatorConfig,
) -> Result<EstimationResult> {
    cfg.grid.validate()?;
    validate_gamma(cfg.gamma)?;
    check_sample("gas heat", heat_kwh, cfg.min_samples)?;
    check_sample("heat pump electricity", electricity_kwh, cfg.min_samples)?;

    let mut curve = Vec::new();
    for b in cfg.grid.points() {
        let scaled = scale_sample(electricity_kwh, b);
        let edges = make_common_edges(heat_kwh, &scaled, cfg.binning)?;
        let p = histogram(heat_kwh, &edges)?;
        let q = histogram(&scaled, &edges)?;
        let d = jsd(&p, &q, cfg.epsilon, cfg.variant)?;
        curve.push(CurvePoint { b, jsd: d });
    }
    let best = argmin(&curve).ok_or(Error::DegenerateCurve)?;
    let b_star = curve[best].b;
    Ok(EstimationResult {
        year,
        b_star,
        spf_mean: spf_from_b(b_star, cfg.gamma),
        gamma: cfg.gamma,
        variant: cfg.variant,
        curve,
        n_gas: heat_kwh.len(),
        n_hp: electricity_kwh.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedYear {
    pub year: i32,
    pub reason: String,
}

#[derive(Debug, Default, Serialize)]
pub struct EstimationBatch {
    pub results: Vec<EstimationResult>,
    pub skipped: Vec<SkippedYear>,
}

/// Annual furnace-heat sample: gas-furnace buildings' gas volumes that
/// clear the coverage threshold, converted to kWh of heat.
pub fn gas_heat_sample(
    dataset: &Dataset,
    year: i32,
    gas: &GasParams,
    min_coverage: f64,
) -> Vec<f64> {
    let values: Vec<((), crate::ingest::AnnualValue)> = dataset
        .buildings
        .iter()
        .filter(|b| b.heating_type == HeatingType::GasFurnace)
        .filter_map(|b| dataset.building_annual(b, Medium::GasVolume, year))
        .map(|a| ((), a))
        .collect();
    filter_by_coverage(values, min_coverage)
        .into_iter()
        .filter(|(_, a)| a.total > 0.0)
        .map(|(_, a)| gas_to_heat(a.total, gas))
        .collect()
}

/// Annual heat-pump electricity sample over heat-pump buildings.
pub fn hp_electricity_sample(dataset: &Dataset, year: i32, min_coverage: f64) -> Vec<f64> {
    let values: Vec<((), crate::ingest::AnnualValue)> = dataset
        .buildings
        .iter()
        .filter(|b| b.heating_type.is_heat_pump())
        .filter_map(|b| dataset.building_annual(b, Medium::HpElectricity, year))
        .map(|a| ((), a))
        .collect();
    filter_by_coverage(values, min_coverage)
        .into_iter()
        .filter(|(_, a)| a.total > 0.0)
        .map(|(_, a)| a.total)
        .collect()
}

/// Run the estimator for each requested year. Years that fail their
/// preconditions are reported in `skipped` rather than aborting the batch.
pub fn estimate_all_years(
    dataset: &Dataset,
    years: &[i32],
    cfg: &EstimatorConfig,
    gas: &GasParams,
    min_coverage: f64,
) -> EstimationBatch {
    let mut batch = EstimationBatch::default();
    for &year in years {
        let q = gas_heat_sample(dataset, year, gas, min_coverage);
        let e = hp_electricity_sample(dataset, year, min_coverage);
        match estimate_b(year, &q, &e, cfg) {
            Ok(r) => batch.results.push(r),
            Err(e) => batch.skipped.push(SkippedYear {
                year,
                reason: e.to_string(),
            }),
        }
    }
    batch.results.sort_by_key(|r| r.year);
    batch
}
