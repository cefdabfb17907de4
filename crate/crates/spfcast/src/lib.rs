//! Estimate the seasonal performance factor of a heat-pump stock from
//! unpaired smart-meter populations and forecast the electricity demand of
//! gas-heated buildings after a heat-pump retrofit.
//!
//! The pipeline: ingest meter, building and weather tables; convert gas
//! volumes to delivered heat; scale heat-pump electricity by a candidate
//! factor and score the match against the heat distribution with a
//! smoothed divergence; pick the factor with the best match; apply it to
//! the gas stock to predict post-retrofit electricity. A deterministic
//! synthetic-town generator provides known-answer inputs for all of it.

pub mod analysis;
pub mod cli;
pub mod distribution;
pub mod error;
pub mod estimator;
pub mod forecast;
pub mod ingest;
pub mod synth;
pub mod thermal;

pub use error::{Error, Result};
