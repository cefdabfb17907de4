//! Configuration file handling and the command implementations behind the
//! binary. Every command writes its outputs under one directory and drops
//! a `resolved_config.toml` there so a run can be reproduced exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{validation_suite, winter_mean_temp, WinterWindow};
use crate::distribution::{histogram, make_common_edges, BinningSpec, DivergenceVariant};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_all_years, gas_heat_sample, hp_electricity_sample, EstimatorConfig, GridSpec,
};
use crate::forecast::{forecast_retrofit, ratio_stats, BFactor, Population, RatioStats};
use crate::ingest::{load_dataset, write_dataset, Dataset, DatasetPaths};
use crate::synth::{generate_town, SynthConfig};
use crate::thermal::{validate_gamma, GasParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory holding meters.csv, buildings.csv and weather.csv.
    pub data_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meters: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buildings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weather: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            data_dir: PathBuf::from("."),
            meters: None,
            buildings: None,
            weather: None,
        }
    }
}

impl PathsConfig {
    fn dataset_paths(&self) -> DatasetPaths {
        let mut paths = DatasetPaths::in_dir(&self.data_dir);
        if let Some(p) = &self.meters {
            paths.meters = p.clone();
        }
        if let Some(p) = &self.buildings {
            paths.buildings = p.clone();
        }
        if let Some(p) = &self.weather {
            paths.weather = p.clone();
        }
        paths
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrofitConfig {
    /// Heat-demand reduction from the envelope retrofit.
    pub gamma: f64,
}

impl Default for RetrofitConfig {
    fn default() -> Self {
        RetrofitConfig { gamma: 0.105 }
    }
}

/// Either a bin count or a bin width; setting both is an error and
/// setting neither means 30 bins.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl BinningConfig {
    pub fn spec(&self) -> Result<BinningSpec> {
        match (self.bins, self.width) {
            (Some(_), Some(_)) => Err(Error::Config(
                "[binning] bins and width are mutually exclusive".into(),
            )),
            (Some(n), None) => Ok(BinningSpec::FixedCount(n)),
            (None, Some(w)) => Ok(BinningSpec::FixedWidth(w)),
            (None, None) => Ok(BinningSpec::default()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergenceConfig {
    /// "symmetric_kl" or "mixture".
    pub variant: String,
    pub epsilon: f64,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        DivergenceConfig {
            variant: "symmetric_kl".into(),
            epsilon: 1e-9,
        }
    }
}

pub fn parse_variant(s: &str) -> Result<DivergenceVariant> {
    match s {
        "symmetric_kl" | "kl" => Ok(DivergenceVariant::SymmetricKl),
        "mixture" | "mixture_jsd" => Ok(DivergenceVariant::MixtureJsd),
        other => Err(Error::Config(format!(
            "unknown divergence variant {other:?}, expected \"symmetric_kl\" or \"mixture\""
        ))),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Minimum share of the year a meter must cover to count.
    pub min_coverage: f64,
    /// Minimum buildings per population for estimation.
    pub min_samples: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_coverage: 0.9,
            min_samples: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Scale factor to apply directly. Takes precedence over `spf`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Mean SPF; combined with gamma when `b` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spf: Option<f64>,
    /// Ratios above this count as outliers in the summary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub gas: GasParams,
    pub retrofit: RetrofitConfig,
    pub grid: GridSpec,
    pub binning: BinningConfig,
    pub divergence: DivergenceConfig,
    pub filter: FilterConfig,
    pub forecast: ForecastConfig,
    pub output: OutputConfig,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig> {
        validate_gamma(self.retrofit.gamma)?;
        self.grid.validate()?;
        self.gas.validate()?;
        if !(self.divergence.epsilon >= 0.0 && self.divergence.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "[divergence] epsilon must be a non-negative number, got {}",
                self.divergence.epsilon
            )));
        }
        Ok(EstimatorConfig {
            grid: self.grid,
            binning: self.binning.spec()?,
            variant: parse_variant(&self.divergence.variant)?,
            epsilon: self.divergence.epsilon,
            gamma: self.retrofit.gamma,
            min_samples: self.filter.min_samples,
        })
    }

    fn load_data(&self) -> Result<Dataset> {
        let dataset = load_dataset(&self.paths.dataset_paths())?;
        log::info!(
            "loaded {} meters, {} buildings, {} weather days",
            dataset.meters.len(),
            dataset.buildings.len(),
            dataset.weather.readings.len()
        );
        Ok(dataset)
    }

    /// Create the output directory and drop the config echo into it.
    fn prepare_out(&self) -> Result<PathBuf> {
        let dir = self.output.dir.clone();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let echo = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config echo: {e}")))?;
        write_text(&dir.join("resolved_config.toml"), &echo)?;
        Ok(dir)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn years_or_all(dataset: &Dataset, requested: &[i32]) -> Vec<i32> {
    if requested.is_empty() {
        dataset.years()
    } else {
        let mut ys = requested.to_vec();
        ys.sort_unstable();
        ys.dedup();
        ys
    }
}

fn float_field(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<()> {
    let dataset = cfg.load_data()?;
    let out = cfg.prepare_out()?;
    let years = years_or_all(&dataset, &[]);
    if years.is_empty() {
        return Err(Error::Config("dataset has no readings".into()));
    }
    let outcome = validation_suite(&dataset, &years, cfg.filter.min_coverage);
    write_text(&out.join("validation.json"), &to_pretty_json(&outcome)?)?;

    println!("{:<28} {:>6} {:>8} {:>6}", "pair", "year", "r", "n");
    for r in &outcome.reports {
        println!("{:<28} {:>6} {:>8.3} {:>6}", r.pair, r.year, r.r, r.n);
    }
    for d in &outcome.diagnostics {
        println!("skipped: {d}");
    }
    println!("wrote {}", out.join("validation.json").display());
    Ok(())
}

pub fn cmd_estimate(cfg: &RunConfig, requested_years: &[i32]) -> Result<()> {
    let dataset = cfg.load_data()?;
    let out = cfg.prepare_out()?;
    let est_cfg = cfg.estimator_config()?;
    let years = years_or_all(&dataset, requested_years);
    if years.is_empty() {
        return Err(Error::Config("dataset has no readings".into()));
    }

    let batch = estimate_all_years(&dataset, &years, &est_cfg, &cfg.gas, cfg.filter.min_coverage);
    write_text(&out.join("estimation.json"), &to_pretty_json(&batch)?)?;

    for r in &batch.results {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["b", "jsd"])
            .map_err(|e| Error::Config(format!("curve csv: {e}")))?;
        for p in &r.curve {
            w.write_record([p.b.to_string(), float_field(p.jsd)])
                .map_err(|e| Error::Config(format!("curve csv: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Config(format!("curve csv: {e}")))?;
        let text = String::from_utf8(bytes).expect("csv output is utf-8");
        write_text(&out.join(format!("curve_{}.csv", r.year)), &text)?;
    }

    let window = WinterWindow::default();
    println!(
        "{:>6} {:>7} {:>6} {:>7} {:>6} {:>9}",
        "year", "n_gas", "n_hp", "b_star", "spf", "winter_c"
    );
    for r in &batch.results {
        let winter = match winter_mean_temp(&dataset.weather, r.year, &window, cfg.filter.min_coverage)
        {
            Ok(t) => format!("{t:.1}"),
            Err(_) => "-".into(),
        };
        println!(
            "{:>6} {:>7} {:>6} {:>7.1} {:>6.1} {:>9}",
            r.year, r.n_gas, r.n_hp, r.b_star, r.spf_mean, winter
        );
    }
    for s in &batch.skipped {
        log::warn!("year {} skipped: {}", s.year, s.reason);
    }
    println!("wrote {}", out.join("estimation.json").display());
    if batch.results.is_empty() {
        return Err(Error::Config(format!(
            "no year could be estimated: {}",
            batch
                .skipped
                .iter()
                .map(|s| format!("{}: {}", s.year, s.reason))
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    Ok(())
}

/// The per-year pieces of estimation.json that forecasting needs.
fn load_estimated_b(out_dir: &Path) -> Result<BTreeMap<i32, f64>> {
    #[derive(Deserialize)]
    struct Row {
        year: i32,
        b_star: f64,
    }
    #[derive(Deserialize)]
    struct File {
        #[serde(default)]
        results: Vec<Row>,
    }
    let path = out_dir.join("estimation.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: File = serde_json::from_str(&text)?;
    Ok(file.results.into_iter().map(|r| (r.year, r.b_star)).collect())
}

#[derive(Debug, Serialize)]
struct ForecastYearSummary {
    year: i32,
    b: f64,
    spf: f64,
    n_buildings: usize,
    total_kwh: f64,
    household_baseline_kwh: Option<f64>,
    increase_pct: Option<f64>,
    ratios_existing: Option<RatioStats>,
    ratios_future: RatioStats,
}

pub fn cmd_forecast(cfg: &RunConfig, requested_years: &[i32]) -> Result<()> {
    let dataset = cfg.load_data()?;
    let out = cfg.prepare_out()?;
    validate_gamma(cfg.retrofit.gamma)?;
    let years = years_or_all(&dataset, requested_years);
    if years.is_empty() {
        return Err(Error::Config("dataset has no readings".into()));
    }

    let estimated: Option<BTreeMap<i32, f64>> =
        if cfg.forecast.b.is_none() && cfg.forecast.spf.is_none() {
            Some(load_estimated_b(&out).map_err(|e| {
                Error::Config(format!(
                    "no scale factor: set [forecast] b or spf, or run estimate first ({e})"
                ))
            })?)
        } else {
            None
        };

    let factor_for = |year: i32| -> Result<BFactor> {
        if let Some(b) = cfg.forecast.b {
            return Ok(BFactor::Direct(b));
        }
        if let Some(spf) = cfg.forecast.spf {
            return Ok(BFactor::FromSpf {
                spf,
                gamma: cfg.retrofit.gamma,
            });
        }
        let map = estimated.as_ref().expect("resolved above");
        map.get(&year).copied().map(BFactor::Direct).ok_or_else(|| {
            Error::Config(format!(
                "estimation.json has no result for {year}; available: {:?}",
                map.keys().collect::<Vec<_>>()
            ))
        })
    };

    let mut summaries = Vec::new();
    let mut forecast_rows: Vec<[String; 5]> = Vec::new();
    let mut ratio_rows: Vec<[String; 10]> = Vec::new();
    let mut push_ratio = |year: i32, s: &RatioStats| {
        ratio_rows.push([
            year.to_string(),
            s.population.as_str().to_string(),
            s.n.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.whisker_low.to_string(),
            s.whisker_high.to_string(),
            s.outliers.to_string(),
            s.clip_at.map(|c| c.to_string()).unwrap_or_default(),
        ]);
    };

    for &year in &years {
        let factor = factor_for(year)?;
        let fc = forecast_retrofit(&dataset, year, &factor, &cfg.gas, cfg.filter.min_coverage)?;
        for b in &fc.per_building {
            forecast_rows.push([
                year.to_string(),
                b.building_id.clone(),
                b.gas_m3.to_string(),
                b.heat_kwh.to_string(),
                b.predicted_kwh.to_string(),
            ]);
        }
        let existing = match ratio_stats(
            &dataset,
            year,
            Population::ExistingHp,
            None,
            cfg.forecast.clip_ratio,
            cfg.filter.min_coverage,
        ) {
            Ok((stats, _)) => Some(stats),
            Err(e) => {
                log::warn!("{year}: no existing-stock ratios: {e}");
                None
            }
        };
        let (future, _) = ratio_stats(
            &dataset,
            year,
            Population::FutureHp,
            Some(&fc),
            cfg.forecast.clip_ratio,
            cfg.filter.min_coverage,
        )?;
        if let Some(s) = &existing {
            push_ratio(year, s);
        }
        push_ratio(year, &future);

        let b_value = factor.value()?;
        println!(
            "{year}: B={:.1} spf={:.1} buildings={} total={:.0} kWh increase={}",
            b_value,
            crate::estimator::spf_from_b(b_value, cfg.retrofit.gamma),
            fc.per_building.len(),
            fc.total_kwh,
            fc.increase_pct
                .map(|p| format!("{p:.0}%"))
                .unwrap_or_else(|| "-".into()),
        );
        summaries.push(ForecastYearSummary {
            year,
            b: b_value,
            spf: crate::estimator::spf_from_b(b_value, cfg.retrofit.gamma),
            n_buildings: fc.per_building.len(),
            total_kwh: fc.total_kwh,
            household_baseline_kwh: fc.household_baseline_kwh,
            increase_pct: fc.increase_pct,
            ratios_existing: existing,
            ratios_future: future,
        });
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["year", "building_id", "gas_m3", "heat_kwh", "predicted_kwh"])
        .map_err(|e| Error::Config(format!("forecast csv: {e}")))?;
    for row in &forecast_rows {
        w.write_record(row)
            .map_err(|e| Error::Config(format!("forecast csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("forecast csv: {e}")))?;
    write_text(
        &out.join("forecast.csv"),
        &String::from_utf8(bytes).expect("csv output is utf-8"),
    )?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "year",
        "population",
        "n",
        "q1",
        "median",
        "q3",
        "whisker_low",
        "whisker_high",
        "outliers",
        "clip_at",
    ])
    .map_err(|e| Error::Config(format!("ratios csv: {e}")))?;
    for row in &ratio_rows {
        w.write_record(row)
            .map_err(|e| Error::Config(format!("ratios csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("ratios csv: {e}")))?;
    write_text(
        &out.join("ratios.csv"),
        &String::from_utf8(bytes).expect("csv output is utf-8"),
    )?;

    write_text(
        &out.join("forecast_summary.json"),
        &to_pretty_json(&serde_json::json!({ "years": summaries }))?,
    )?;
    println!("wrote {}", out.join("forecast_summary.json").display());
    Ok(())
}

pub fn cmd_analyze(cfg: &RunConfig, requested_years: &[i32]) -> Result<()> {
    let dataset = cfg.load_data()?;
    let out = cfg.prepare_out()?;
    let binning = cfg.binning.spec()?;
    let years = years_or_all(&dataset, requested_years);
    if years.is_empty() {
        return Err(Error::Config("dataset has no readings".into()));
    }

    let window = WinterWindow::default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["year", "winter_mean_temp_c"])
        .map_err(|e| Error::Config(format!("winter csv: {e}")))?;
    for &year in &years {
        match winter_mean_temp(&dataset.weather, year, &window, cfg.filter.min_coverage) {
            Ok(t) => {
                w.write_record([year.to_string(), t.to_string()])
                    .map_err(|e| Error::Config(format!("winter csv: {e}")))?;
                println!("{year}: winter mean {t:.1} C");
            }
            Err(e) => log::warn!("{year}: no winter mean: {e}"),
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("winter csv: {e}")))?;
    write_text(
        &out.join("winter_temps.csv"),
        &String::from_utf8(bytes).expect("csv output is utf-8"),
    )?;

    for &year in &years {
        let samples = [
            ("gas", gas_heat_sample(&dataset, year, &cfg.gas, cfg.filter.min_coverage)),
            ("hp", hp_electricity_sample(&dataset, year, cfg.filter.min_coverage)),
        ];
        for (tag, sample) in samples {
            if sample.is_empty() {
                log::warn!("{year}: no {tag} sample, skipping histogram");
                continue;
            }
            let edges = make_common_edges(&sample, &sample, binning)?;
            let hist = histogram(&sample, &edges)?;
            let path = out.join(format!("hist_{tag}_{year}.csv"));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            hist.write_csv(file)?;
        }
    }
    println!("wrote {}", out.join("winter_temps.csv").display());
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let out = cfg.prepare_out()?;
    let (dataset, truth) = generate_town(&cfg.synth)?;
    write_dataset(&dataset, &DatasetPaths::in_dir(&out))?;
    write_text(&out.join("groundtruth.json"), &to_pretty_json(&truth)?)?;
    println!(
        "wrote {} buildings, {} meters, {} weather days to {}",
        dataset.buildings.len(),
        dataset.meters.len(),
        dataset.weather.readings.len(),
        out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.retrofit.gamma, 0.105);
        assert_eq!(cfg.filter.min_coverage, 0.9);
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.divergence.variant, "symmetric_kl");
        assert!(cfg.forecast.b.is_none());
    }

    #[test]
    fn config_echo_round_trips() {
        let cfg = RunConfig::default();
        let echo = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&echo).unwrap();
        assert_eq!(back.grid, cfg.grid);
        assert_eq!(back.synth.seed, cfg.synth.seed);
        assert_eq!(back.synth.years.len(), 1);
    }

    #[test]
    fn partial_tables_fill_with_defaults() {
        let cfg: RunConfig = toml::from_str("[gas]\nz = 0.9\n\n[grid]\nstep = 0.05\n").unwrap();
        assert_eq!(cfg.gas.z, 0.9);
        assert_eq!(cfg.gas.heating_value_kwh_per_m3, 10.5);
        assert_eq!(cfg.grid.step, 0.05);
        assert_eq!(cfg.grid.b_min, 1.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[grdi]\nstep = 0.05\n").is_err());
        assert!(toml::from_str::<RunConfig>("[filter]\nmin_coverge = 0.5\n").is_err());
    }

    #[test]
    fn binning_is_exclusive() {
        let cfg: RunConfig = toml::from_str("[binning]\nbins = 20\nwidth = 100.0\n").unwrap();
        assert!(cfg.binning.spec().is_err());
        let cfg: RunConfig = toml::from_str("[binning]\nwidth = 250.0\n").unwrap();
        assert_eq!(cfg.binning.spec().unwrap(), BinningSpec::FixedWidth(250.0));
        assert_eq!(
            BinningConfig::default().spec().unwrap(),
            BinningSpec::FixedCount(30)
        );
    }

    #[test]
    fn variant_tokens() {
        assert_eq!(
            parse_variant("symmetric_kl").unwrap(),
            DivergenceVariant::SymmetricKl
        );
        assert_eq!(parse_variant("mixture").unwrap(), DivergenceVariant::MixtureJsd);
        assert!(parse_variant("jeffreys").is_err());
    }

    #[test]
    fn estimation_json_b_star_survives_null_jsd() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("estimation.json"),
            r#"{"results":[{"year":2021,"b_star":3.3,"spf_mean":2.9535,"gamma":0.105,
                "variant":"symmetric_kl","curve":[{"b":1.5,"jsd":null}],
                "n_gas":4,"n_hp":4}],"skipped":[]}"#,
        )
        .unwrap();
        let map = load_estimated_b(dir.path()).unwrap();
        assert_eq!(map[&2021], 3.3);
    }
}
