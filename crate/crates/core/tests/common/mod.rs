//! Shared helpers for integration tests: load the shipped example configs.
#![allow(dead_code)] // each test binary uses a different subset

use std::path::PathBuf;

use jdfe_core::scenario::Scenario;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn sim1() -> Scenario {
    Scenario::from_json_file(config_path("sim1.json")).expect("sim1.json loads")
}

pub fn sim2() -> Scenario {
    Scenario::from_json_file(config_path("sim2.json")).expect("sim2.json loads")
}

/// Ground truth of sim1.json, ascending carriers.
pub const SIM1_TRUTH: [(f64, f64); 6] = [
    (1.22e9, 45.0),
    (2.77e9, 20.0),
    (4.32e9, 0.0),
    (6.54e9, -30.0),
    (7.64e9, 10.0),
    (8.48e9, -20.0),
];
