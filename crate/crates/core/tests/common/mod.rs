#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use flexlink::modal::circular_area;
use flexlink::{BeamParams, ModalBasis, QuadratureConfig, ScenarioFile, SimConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn reference_beam() -> BeamParams {
    BeamParams {
        length: 1.0,
        area: circular_area(0.01),
        density: 2700.0,
        flexural_rigidity: 34.3612,
        joint_inertia: 1.3254e-6,
        gravity: 9.81,
        mode_count: 2,
    }
}

pub fn reference_basis() -> ModalBasis {
    ModalBasis::new(reference_beam(), &QuadratureConfig::default()).unwrap()
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn reference_scenario() -> ScenarioFile {
    ScenarioFile::load(&scenario_path("paper_scenario.toml")).unwrap()
}

pub fn reference_config() -> SimConfig {
    reference_scenario().to_config().unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random state `[θ, θ̇, q, q̇, …]` in ranges that cover the operating envelope.
pub fn random_state(rng: &mut StdRng, mode_count: usize) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let theta_dot = rng.random_range(-5.0..5.0);
    let q = (0..mode_count).map(|_| rng.random_range(-0.05..0.05)).collect();
    let q_dot = (0..mode_count).map(|_| rng.random_range(-2.0..2.0)).collect();
    (theta, theta_dot, q, q_dot)
}
