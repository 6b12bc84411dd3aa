//! Shared builders for the benchmark targets.

use nalgebra::{DMatrix, DVector};

use tracklab_core::config::AppConfig;
use tracklab_core::elm::TrainingSample;
use tracklab_core::qp::QpProblem;
use tracklab_core::rng::SeededRng;
use tracklab_core::sim::Scenario;

/// An increment QP shaped like one controller tick (dense SPD Hessian with
/// box and cumulative-sum bounds).
pub fn controller_shaped_qp(control_horizon: usize, seed: u64) -> QpProblem {
    let mut rng = SeededRng::new(seed);
    let n = control_horizon;
    let m = DMatrix::from_fn(n, n, |_, _| rng.range(-1.0, 1.0));
    QpProblem {
        hessian: &m * m.transpose() + DMatrix::identity(n, n) * 1e5,
        gradient: DVector::from_fn(n, |_, _| rng.range(-40.0, 40.0)),
        step_lower: DVector::from_element(n, -0.01),
        step_upper: DVector::from_element(n, 0.01),
        cum_lower: DVector::from_element(n, -0.44),
        cum_upper: DVector::from_element(n, 0.44),
    }
}

/// Synthetic dataset with the stock feature/label shape.
pub fn synthetic_dataset(count: usize, seed: u64) -> Vec<TrainingSample> {
    let mut rng = SeededRng::new(seed);
    (0..count)
        .map(|_| {
            let mut f = [0.0; 8];
            for v in f.iter_mut() {
                *v = rng.range(-2.0, 2.0);
            }
            TrainingSample {
                features: f,
                label: (f[0] * 0.7).sin() * 0.01 + 0.002 * f[3],
            }
        })
        .collect()
}

/// Stock mismatched double-lane-change scenario, trimmed to `duration`.
pub fn stock_scenario(duration: f64) -> (Scenario, tracklab_core::MpcConfig) {
    let config = AppConfig::default();
    let mut scenario = config.scenario().expect("default scenario");
    scenario.duration = duration;
    (scenario, config.mpc.to_config())
}
