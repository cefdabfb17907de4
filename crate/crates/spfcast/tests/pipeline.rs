//! End-to-end runs through the binary plus statistical checks that sit
//! above any single module: recovery on generated towns, the validation
//! correlations, and the spread of the demand ratios.

use std::fs;
use std::process::Command;

use serde_json::Value;

use spfcast::estimator::{estimate_b, gas_heat_sample, hp_electricity_sample, EstimatorConfig};
use spfcast::forecast::{forecast_retrofit, ratio_stats, BFactor, Population};
use spfcast::synth::{generate_town, SynthConfig, YearSpec};

fn run(bin: &str, args: &[&str]) {
    let out = Command::new(bin).args(args).output().expect("spawn spfcast");
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn cli_pipeline_end_to_end() {
    let bin = env!("CARGO_BIN_EXE_spfcast");
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("town.toml");
    fs::write(
        &config,
        "[synth]\nseed = 21\nn_gas = 200\nn_hp = 40\n\n\
         [[synth.years]]\nyear = 2021\nb_true = 3.2\n",
    )
    .unwrap();

    let data = root.path().join("data");
    let out = root.path().join("out");
    let cfg = config.to_str().unwrap();
    let data_s = data.to_str().unwrap();
    let out_s = out.to_str().unwrap();

    run(bin, &["synth", "--config", cfg, "--out", data_s]);
    for sub in ["validate", "estimate", "analyze", "forecast"] {
        run(bin, &[sub, "--config", cfg, "--data", data_s, "--out", out_s]);
    }

    for name in ["meters.csv", "buildings.csv", "weather.csv", "groundtruth.json"] {
        assert!(data.join(name).exists(), "synth did not write {name}");
    }
    for name in [
        "validation.json",
        "estimation.json",
        "curve_2021.csv",
        "winter_temps.csv",
        "hist_gas_2021.csv",
        "hist_hp_2021.csv",
        "forecast.csv",
        "ratios.csv",
        "forecast_summary.json",
        "resolved_config.toml",
    ] {
        assert!(out.join(name).exists(), "pipeline did not write {name}");
    }

    let est: Value =
        serde_json::from_str(&fs::read_to_string(out.join("estimation.json")).unwrap()).unwrap();
    let b_star = est["results"][0]["b_star"].as_f64().unwrap();
    assert!(
        (b_star - 3.2).abs() <= 0.3,
        "b_star {b_star} far from the generating 3.2"
    );

    let val: Value =
        serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    let reports = val["reports"].as_array().unwrap();
    let r_of = |pair: &str| -> f64 {
        reports
            .iter()
            .find(|e| e["pair"] == pair)
            .unwrap_or_else(|| panic!("missing report {pair}"))["r"]
            .as_f64()
            .unwrap()
    };
    assert!(r_of("hp_daily_mean_vs_temp") <= -0.85);
    assert!(r_of("gas_daily_mean_vs_temp") <= -0.85);
    assert!(r_of("gas_daily_mean_vs_hp_daily_mean") > 0.5);
    for pair in ["volume_vs_gas_annual", "volume_vs_hp_annual"] {
        let r = r_of(pair);
        assert!(r.is_finite() && r > 0.3, "{pair} r = {r}");
    }

    let fc: Value =
        serde_json::from_str(&fs::read_to_string(out.join("forecast_summary.json")).unwrap())
            .unwrap();
    let year = &fc["years"][0];
    assert_eq!(year["year"], 2021);
    assert!(year["total_kwh"].as_f64().unwrap() > 0.0);
    assert!(year["increase_pct"].as_f64().unwrap() > 0.0);
    assert_eq!(year["n_buildings"].as_u64().unwrap(), 200);
}

/// Annual consumption scales with building volume; the volume-vs-annual
/// correlations on default towns sit in the band the generator was tuned
/// for, on both the gas and the heat-pump side.
#[test]
fn validation_volume_correlations_in_band() {
    use spfcast::analysis::validation_suite;

    let mut gas_rs = Vec::new();
    let mut hp_rs = Vec::new();
    for seed in 0..5u64 {
        let cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let (town, _) = generate_town(&cfg).unwrap();
        let outcome = validation_suite(&town, &[2021], 0.9);
        for report in &outcome.reports {
            match report.pair.as_str() {
                "volume_vs_gas_annual" => gas_rs.push(report.r),
                "volume_vs_hp_annual" => hp_rs.push(report.r),
                _ => {}
            }
        }
    }
    gas_rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    hp_rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med_gas = gas_rs[gas_rs.len() / 2];
    let med_hp = hp_rs[hp_rs.len() / 2];
    assert!(
        (0.5..=0.75).contains(&med_gas),
        "gas volume correlation median {med_gas}"
    );
    assert!(
        (0.5..=0.75).contains(&med_hp),
        "hp volume correlation median {med_hp}"
    );
}

/// A more heterogeneous gas stock spreads the predicted ratios wider than
/// the metered ones.
#[test]
fn future_ratios_spread_wider_for_heterogeneous_gas_stock() {
    let cfg = SynthConfig {
        seed: 17,
        n_gas: 300,
        n_hp: 60,
        household_sigma_gas: 0.45,
        household_sigma_hp: 0.2,
        ..SynthConfig::default()
    };
    let (town, truth) = generate_town(&cfg).unwrap();
    let b = truth.years[0].b_true;
    let fc = forecast_retrofit(&town, 2021, &BFactor::Direct(b), &cfg.gas, 0.9).unwrap();

    let (existing, _) =
        ratio_stats(&town, 2021, Population::ExistingHp, None, None, 0.9).unwrap();
    let (future, _) =
        ratio_stats(&town, 2021, Population::FutureHp, Some(&fc), None, 0.9).unwrap();
    let iqr_existing = existing.q3 - existing.q1;
    let iqr_future = future.q3 - future.q1;
    assert!(
        iqr_future > iqr_existing,
        "future IQR {iqr_future} vs existing {iqr_existing}"
    );
    assert!(existing.q1 <= existing.median && existing.median <= existing.q3);
    assert!(future.q1 <= future.median && future.median <= future.q3);
}

/// Without SPF noise, with one pump type and no retrofit reduction, the
/// estimate lands on the generating scale exactly.
#[test]
fn noise_free_town_recovers_exactly() {
    let cfg = SynthConfig {
        seed: 3,
        n_gas: 500,
        n_hp: 73,
        spf_sigma: 0.0,
        hp_air_share: 1.0,
        gamma: 0.0,
        years: vec![YearSpec {
            year: 2021,
            b_true: 3.2,
            winter_offset_c: 0.0,
        }],
        ..SynthConfig::default()
    };
    let (town, _) = generate_town(&cfg).unwrap();
    let q = gas_heat_sample(&town, 2021, &cfg.gas, 0.9);
    let e = hp_electricity_sample(&town, 2021, 0.9);
    let est = estimate_b(2021, &q, &e, &EstimatorConfig::default()).unwrap();
    assert!(
        (est.b_star - 3.2).abs() <= 1e-9,
        "noise-free b_star {}",
        est.b_star
    );
}

/// Recovery on default towns: the median estimate over 20 seeds stays
/// within one grid step of the generating value.
#[test]
fn default_town_recovery_median_within_one_step() {
    let mut errs = Vec::new();
    for seed in 0..20u64 {
        let cfg = SynthConfig {
            seed,
            years: vec![YearSpec {
                year: 2021,
                b_true: 3.2,
                winter_offset_c: 0.0,
            }],
            ..SynthConfig::default()
        };
        let (town, _) = generate_town(&cfg).unwrap();
        let q = gas_heat_sample(&town, 2021, &cfg.gas, 0.9);
        let e = hp_electricity_sample(&town, 2021, 0.9);
        let est = estimate_b(2021, &q, &e, &EstimatorConfig::default()).unwrap();
        errs.push((est.b_star - 3.2).abs());
    }
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = 0.5 * (errs[9] + errs[10]);
    assert!(median <= 0.1 + 1e-9, "median recovery error {median}");
}
