//! Shared helpers for the integration test suites.
#![allow(dead_code)] // each test binary uses a different subset

use std::path::PathBuf;

use truncount::dataset::Dataset;

/// Path to a bundled data file at the workspace root.
pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// Loads, zero-truncates and (if needed) imputes a bundled dataset, mirroring
/// the CLI's preparation pipeline.
pub fn prepared(name: &str) -> Dataset {
    let ds = Dataset::load_csv(data_path(name)).expect("bundled dataset loads");
    let ds = ds.zero_truncate();
    if ds.covariates_complete() {
        ds
    } else {
        ds.impute_missing_proportion().expect("imputation succeeds")
    }
}

/// Relative error with a unit floor on the denominator.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}
