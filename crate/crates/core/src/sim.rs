//! Closed-loop execution, training-data collection and tracking metrics.
//!
//! One simulation couples the plant (high-fidelity integration of the full
//! dynamics, or the controller's own discrete model in matched mode) with
//! the receding-horizon controller and, optionally, the estimator plus
//! feedforward compensator. Longitudinal speed is held constant by
//! resetting vx at every controller tick, isolating the lateral problem.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::elm::{ElmModel, TrainingSample, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::linearize::{controller_state, discretize, jacobians};
use crate::mpc::{
    one_step_prediction_error, MpcConfig, MpcController, PositionPrediction, TrackedOutputs,
};
use crate::path::ReferencePath;
use crate::pid::{combine, pid_step, PidConfig, PidState};
use crate::qp::SolverStatus;
use crate::rng::SeededRng;
use crate::vehicle::{ControlInput, IntegrationMethod, VehicleParams, VehicleState};

/// How the plant advances between controller ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantMode {
    /// Integrate the full nonlinear dynamics in `substeps` slices per tick.
    HighFidelity {
        substeps: usize,
        method: IntegrationMethod,
    },
    /// Step the controller's discretized reduced model once per tick.
    /// With nominal parameters this makes plant and prediction coincide,
    /// nulling the predictive error; used for validation.
    Matched,
}

impl Default for PlantMode {
    fn default() -> Self {
        PlantMode::HighFidelity {
            substeps: 10,
            method: IntegrationMethod::Rk4,
        }
    }
}

/// One closed-loop experiment definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub path: ReferencePath,
    /// Held longitudinal speed \[m/s\].
    pub speed: f64,
    pub duration: f64,
    /// Nominal model the controller predicts with.
    pub controller_params: VehicleParams,
    /// Possibly perturbed truth the plant integrates.
    pub plant_params: VehicleParams,
    pub plant_mode: PlantMode,
    pub initial: VehicleState,
}

impl Scenario {
    /// Start on the reference at x = 0 with zero body rates.
    pub fn new(
        path: ReferencePath,
        speed: f64,
        duration: f64,
        controller_params: VehicleParams,
        plant_params: VehicleParams,
        plant_mode: PlantMode,
    ) -> Self {
        let (y0, heading0) = path.lookup(0.0);
        Scenario {
            path,
            speed,
            duration,
            controller_params,
            plant_params,
            plant_mode,
            initial: VehicleState {
                x: 0.0,
                y: y0,
                heading: heading0,
                vx: speed,
                vy: 0.0,
                yaw_rate: 0.0,
            },
        }
    }

    pub fn with_initial_lateral_offset(mut self, offset: f64) -> Self {
        self.initial.y += offset;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.speed.is_finite() || self.speed <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "scenario speed must be positive, got {}",
                self.speed
            )));
        }
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "scenario duration must be positive, got {}",
                self.duration
            )));
        }
        if let PlantMode::HighFidelity { substeps, .. } = self.plant_mode {
            if substeps == 0 {
                return Err(Error::InvalidInput("plant substeps must be >= 1".into()));
            }
        }
        self.controller_params.validate()?;
        self.plant_params.validate()
    }

    /// Number of controller ticks. A small guard keeps duration/dt ratios
    /// that are integral in exact arithmetic from ceiling one tick up.
    pub fn tick_count(&self, sample_time: f64) -> usize {
        ((self.duration / sample_time) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Per-tick closed-loop record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub time: f64,
    pub state: VehicleState,
    /// Controller output u_m \[rad\].
    pub mpc_command: f64,
    /// Feedforward correction u_c \[rad\]; zero in controller-only runs.
    pub compensation: f64,
    /// Applied steering u* \[rad\].
    pub applied_command: f64,
    /// Position predicted for the next tick.
    pub predicted_x: f64,
    pub predicted_y: f64,
    /// Realized error of this tick's prediction, filled on the next tick;
    /// NaN on the final record of a run.
    pub realized_error: f64,
    /// Estimator output for this tick; zero in controller-only runs.
    pub estimated_error: f64,
    pub reference_y: f64,
    pub reference_heading: f64,
    pub solver_status: SolverStatus,
}

/// Immutable result of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub sample_time: f64,
    pub speed: f64,
    pub records: Vec<LogRecord>,
    /// Diagnostic suffix when the plant diverged; the records hold the
    /// completed prefix.
    pub abort: Option<String>,
}

/// Feature vector fed to the estimator:
/// \[x, y, heading, yaw_rate, vx, vy, slip_fl, slip_fr\].
///
/// The front-wheel slip ratios are identically zero under the constant
/// speed assumption but stay in the interface.
pub fn state_features(state: &VehicleState) -> [f64; FEATURE_DIM] {
    [
        state.x,
        state.y,
        state.heading,
        state.yaw_rate,
        state.vx,
        state.vy,
        0.0,
        0.0,
    ]
}

fn advance_plant(
    scenario: &Scenario,
    matched_model: Option<&(DMatrix<f64>, DMatrix<f64>)>,
    state: &VehicleState,
    steer: f64,
    dt: f64,
) -> Result<VehicleState> {
    match scenario.plant_mode {
        PlantMode::Matched => {
            let (a_disc, b_disc) = matched_model.expect("matched model prepared at start");
            let next = a_disc * controller_state(state) + b_disc * DVector::from_element(1, steer);
            Ok(VehicleState {
                x: state.x + state.vx * dt,
                y: next[3],
                heading: next[1],
                vx: state.vx,
                vy: next[0],
                yaw_rate: next[2],
            })
        }
        PlantMode::HighFidelity { substeps, method } => {
            let sub_dt = dt / substeps as f64;
            let input = ControlInput { steer };
            let mut s = *state;
            for _ in 0..substeps {
                s = scenario.plant_params.step(&s, &input, sub_dt, method)?;
            }
            Ok(s)
        }
    }
}

/// Run the loop: measure, control, optionally estimate-and-compensate,
/// hold the command over the plant substeps, record.
///
/// Estimator and compensator must be jointly present (the proposed
/// framework) or jointly absent (controller-only baseline).
pub fn run_closed_loop(
    scenario: &Scenario,
    mpc_config: &MpcConfig,
    pid_config: Option<&PidConfig>,
    estimator: Option<&ElmModel>,
) -> Result<SimLog> {
    if pid_config.is_some() != estimator.is_some() {
        return Err(Error::InvalidInput(
            "estimator and compensator must be enabled together".into(),
        ));
    }
    scenario.validate()?;
    mpc_config.validate()?;

    let dt = mpc_config.sample_time;
    let ticks = scenario.tick_count(dt);
    let mut controller =
        MpcController::new(mpc_config.clone(), scenario.controller_params.clone())?;
    let mut pid_state = PidState::default();
    let mut state = scenario.initial;
    let mut records: Vec<LogRecord> = Vec::with_capacity(ticks);
    let mut last_prediction: Option<PositionPrediction> = None;
    let mut abort = None;

    let matched_model = match scenario.plant_mode {
        PlantMode::Matched => {
            let origin = DVector::zeros(4);
            let (a_cont, b_cont) = jacobians(&origin, 0.0, &scenario.plant_params, scenario.speed)?;
            let model = discretize(&a_cont, &b_cont, dt)?;
            Some((model.a_disc, model.b_disc))
        }
        PlantMode::HighFidelity { .. } => None,
    };

    let np = mpc_config.prediction_horizon;
    for tick in 0..ticks {
        // constant-speed condition: reset vx at the tick boundary
        state.vx = scenario.speed;

        if !state.is_finite() || state.y.abs() > 100.0 {
            abort = Some(format!(
                "plant diverged at tick {tick} (t = {:.3} s): y = {}, finite = {}",
                tick as f64 * dt,
                state.y,
                state.is_finite()
            ));
            break;
        }

        // the prediction made last tick meets its realization now
        if let (Some(prediction), Some(last)) = (last_prediction.as_ref(), records.last_mut()) {
            last.realized_error = one_step_prediction_error(prediction, &state);
        }

        let reference: Vec<TrackedOutputs> = (1..=np)
            .map(|i| {
                let ahead = state.x + i as f64 * state.vx * dt;
                let (y_ref, heading_ref) = scenario.path.lookup(ahead);
                TrackedOutputs {
                    heading: heading_ref,
                    y: y_ref,
                }
            })
            .collect();

        let out = controller.step(&state, &reference)?;

        let (compensation, estimated_error) = match (pid_config, estimator) {
            (Some(pid_cfg), Some(model)) => {
                let estimate = model.predict(&state_features(&state));
                let (u_c, next_state) = pid_step(&pid_state, estimate, dt, pid_cfg);
                pid_state = next_state;
                (u_c, estimate)
            }
            _ => (0.0, 0.0),
        };
        let applied = if pid_config.is_some() {
            combine(
                out.command,
                compensation,
                mpc_config.steer_min,
                mpc_config.steer_max,
            )
        } else {
            out.command
        };

        let (reference_y, reference_heading) = scenario.path.lookup(state.x);
        records.push(LogRecord {
            time: tick as f64 * dt,
            state,
            mpc_command: out.command,
            compensation,
            applied_command: applied,
            predicted_x: out.prediction.x,
            predicted_y: out.prediction.y,
            realized_error: f64::NAN,
            estimated_error,
            reference_y,
            reference_heading,
            solver_status: out.status,
        });
        last_prediction = Some(out.prediction);

        match advance_plant(scenario, matched_model.as_ref(), &state, applied, dt) {
            Ok(next) => state = next,
            Err(e) => {
                abort = Some(format!("plant integration failed at tick {tick}: {e}"));
                break;
            }
        }
    }

    Ok(SimLog {
        sample_time: dt,
        speed: scenario.speed,
        records,
        abort,
    })
}

/// Result of running the collection scenarios.
#[derive(Debug, Clone)]
pub struct Collection {
    pub samples: Vec<TrainingSample>,
    pub logs: Vec<SimLog>,
    pub warnings: Vec<String>,
}

/// Run every scenario controller-only and pair each tick's features with
/// the error its prediction realized one tick later. A run of N ticks
/// yields N-1 labeled samples; aborted runs contribute their prefix.
pub fn collect_training_data(scenarios: &[Scenario], mpc_config: &MpcConfig) -> Result<Collection> {
    let mut samples = Vec::new();
    let mut logs = Vec::new();
    let mut warnings = Vec::new();
    for (index, scenario) in scenarios.iter().enumerate() {
        let log = run_closed_loop(scenario, mpc_config, None, None)?;
        if let Some(reason) = &log.abort {
            warnings.push(format!(
                "scenario {index} aborted, keeping {} completed ticks: {reason}",
                log.records.len()
            ));
        }
        for record in &log.records {
            if record.realized_error.is_finite() {
                samples.push(TrainingSample {
                    features: state_features(&record.state),
                    label: record.realized_error,
                });
            }
        }
        logs.push(log);
    }
    Ok(Collection {
        samples,
        logs,
        warnings,
    })
}

/// Seeded uniform split without replacement; test indices are drawn by a
/// Fisher-Yates pass over the index vector.
pub fn split_dataset(
    dataset: &[TrainingSample],
    n_test: usize,
    seed: u64,
) -> Result<(Vec<TrainingSample>, Vec<TrainingSample>)> {
    if n_test >= dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "test size {n_test} must be smaller than the dataset ({})",
            dataset.len()
        )));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = SeededRng::new(seed);
    for i in (1..indices.len()).rev() {
        let j = rng.index(i + 1);
        indices.swap(i, j);
    }
    let mut test_idx: Vec<usize> = indices[..n_test].to_vec();
    let mut train_idx: Vec<usize> = indices[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    let test = test_idx.iter().map(|&i| dataset[i]).collect();
    let train = train_idx.iter().map(|&i| dataset[i]).collect();
    Ok((train, test))
}

/// Lateral error interpolated at a requested longitudinal position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandmarkError {
    pub x: f64,
    /// None when the trajectory never traverses `x`.
    pub lateral_error: Option<f64>,
}

/// Improvement of this log over a baseline, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reduction {
    pub peak_lateral_pct: f64,
    pub rms_lateral_pct: f64,
}

/// Tracking-quality summary of one log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub rms_lateral_error: f64,
    pub max_lateral_error: f64,
    pub rms_heading_error: f64,
    pub max_heading_error: f64,
    /// Largest applied |u*| \[rad\].
    pub max_steering: f64,
    pub landmark_errors: Vec<LandmarkError>,
    pub reduction: Option<Reduction>,
}

fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = angle % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a < -std::f64::consts::PI {
        a += two_pi;
    }
    a
}

fn lateral_error(record: &LogRecord) -> f64 {
    record.state.y - record.reference_y
}

/// RMS/max tracking errors, landmark errors and, when a baseline log is
/// supplied, the percentage reduction relative to it.
pub fn compute_metrics(
    log: &SimLog,
    baseline: Option<&SimLog>,
    landmarks: &[f64],
) -> Result<Metrics> {
    if log.records.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty log".into()));
    }
    let n = log.records.len() as f64;
    let mut sum_lat = 0.0;
    let mut max_lat: f64 = 0.0;
    let mut sum_head = 0.0;
    let mut max_head: f64 = 0.0;
    let mut max_steer: f64 = 0.0;
    for r in &log.records {
        let lat = lateral_error(r);
        let head = wrap_angle(r.state.heading - r.reference_heading);
        sum_lat += lat * lat;
        sum_head += head * head;
        max_lat = max_lat.max(lat.abs());
        max_head = max_head.max(head.abs());
        max_steer = max_steer.max(r.applied_command.abs());
    }

    let landmark_errors = landmarks
        .iter()
        .map(|&x| LandmarkError {
            x,
            lateral_error: interpolate_lateral_error(log, x),
        })
        .collect();

    let mut metrics = Metrics {
        rms_lateral_error: (sum_lat / n).sqrt(),
        max_lateral_error: max_lat,
        rms_heading_error: (sum_head / n).sqrt(),
        max_heading_error: max_head,
        max_steering: max_steer,
        landmark_errors,
        reduction: None,
    };

    if let Some(base) = baseline {
        let base_metrics = compute_metrics(base, None, &[])?;
        let pct = |base: f64, this: f64| {
            if base > 0.0 {
                (base - this) / base * 100.0
            } else {
                0.0
            }
        };
        metrics.reduction = Some(Reduction {
            peak_lateral_pct: pct(base_metrics.max_lateral_error, metrics.max_lateral_error),
            rms_lateral_pct: pct(base_metrics.rms_lateral_error, metrics.rms_lateral_error),
        });
    }
    Ok(metrics)
}

fn interpolate_lateral_error(log: &SimLog, x: f64) -> Option<f64> {
    for pair in log.records.windows(2) {
        let (x0, x1) = (pair[0].state.x, pair[1].state.x);
        if (x0 - x) * (x1 - x) <= 0.0 {
            let e0 = lateral_error(&pair[0]);
            let e1 = lateral_error(&pair[1]);
            if x1 == x0 {
                return Some(e0);
            }
            let t = (x - x0) / (x1 - x0);
            return Some(e0 + t * (e1 - e0));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::DlcShape;
    use nalgebra::DMatrix;

    fn test_mpc_config() -> MpcConfig {
        MpcConfig {
            prediction_horizon: 25,
            control_horizon: 5,
            sample_time: 0.02,
            output_weight: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[
                20.0, 100.0,
            ])),
            increment_weight: DMatrix::from_element(1, 1, 5e4),
            increment_min: -0.01,
            increment_max: 0.01,
            steer_min: -0.44,
            steer_max: 0.44,
            solver_max_iter: 20_000,
            solver_tol: 1e-8,
        }
    }

    fn matched_scenario(path: ReferencePath, duration: f64) -> Scenario {
        let nominal = VehicleParams::default();
        Scenario::new(
            path,
            20.0,
            duration,
            nominal.clone(),
            nominal,
            PlantMode::Matched,
        )
    }

    #[test]
    fn matched_straight_run_stays_on_reference() {
        let scenario = matched_scenario(ReferencePath::Straight, 10.0);
        let log = run_closed_loop(&scenario, &test_mpc_config(), None, None).unwrap();
        assert!(log.abort.is_none());
        for r in &log.records {
            assert!((r.state.y - r.reference_y).abs() <= 1e-6);
            assert_eq!(r.state.vx, 20.0);
        }
    }

    #[test]
    fn log_length_matches_tick_contract() {
        let scenario = matched_scenario(ReferencePath::Straight, 1.0);
        let cfg = test_mpc_config();
        let log = run_closed_loop(&scenario, &cfg, None, None).unwrap();
        assert_eq!(log.records.len(), 50);
        // integral ratios that round up in floating point must not gain a tick
        let scenario = matched_scenario(ReferencePath::Straight, 12.02);
        assert_eq!(scenario.tick_count(0.02), 601);
        // genuinely fractional durations still ceil
        let scenario = matched_scenario(ReferencePath::Straight, 1.01);
        assert_eq!(scenario.tick_count(0.02), 51);
    }

    #[test]
    fn matched_dlc_has_null_predictive_error() {
        let scenario = matched_scenario(
            ReferencePath::DoubleLaneChange {
                shape: DlcShape::default(),
            },
            5.0,
        );
        let log = run_closed_loop(&scenario, &test_mpc_config(), None, None).unwrap();
        assert!(log.abort.is_none());
        let labeled = log
            .records
            .iter()
            .filter(|r| r.realized_error.is_finite())
            .count();
        assert_eq!(labeled, log.records.len() - 1);
        for r in &log.records {
            if r.realized_error.is_finite() {
                assert!(
                    r.realized_error.abs() <= 1e-9,
                    "matched-mode predictive error {}",
                    r.realized_error
                );
            }
        }
    }

    #[test]
    fn mismatched_plant_produces_visible_error_and_pairing_is_consistent() {
        let nominal = VehicleParams::default();
        let plant = nominal
            .perturbed(&crate::vehicle::Perturbation {
                cg_shift: 0.15,
                mass_scale: 1.1,
                stiffness_scale: 1.0,
                tire_model: Some(crate::vehicle::TireModel::Saturating),
            })
            .unwrap();
        let scenario = Scenario::new(
            ReferencePath::DoubleLaneChange {
                shape: DlcShape::default(),
            },
            75.0 / 3.6,
            4.0,
            nominal,
            plant,
            PlantMode::default(),
        );
        let cfg = test_mpc_config();
        let log = run_closed_loop(&scenario, &cfg, None, None).unwrap();
        assert!(log.abort.is_none(), "{:?}", log.abort);

        // model mismatch must actually show up
        let peak = log
            .records
            .iter()
            .filter(|r| r.realized_error.is_finite())
            .map(|r| r.realized_error.abs())
            .fold(0.0f64, f64::max);
        assert!(peak > 1e-6, "expected visible predictive error, got {peak}");

        // label consistency: logged prediction at t vs state at t+1
        for pair in log.records.windows(2) {
            let prediction = PositionPrediction {
                x: pair[0].predicted_x,
                y: pair[0].predicted_y,
                heading: 0.0,
            };
            let recomputed = one_step_prediction_error(&prediction, &pair[1].state);
            assert!((recomputed - pair[0].realized_error).abs() < 1e-15);
        }
    }

    #[test]
    fn compensated_rerun_diverges_only_through_the_compensation() {
        let nominal = VehicleParams::default();
        let plant = nominal
            .perturbed(&crate::vehicle::Perturbation {
                cg_shift: 0.15,
                mass_scale: 1.1,
                stiffness_scale: 1.0,
                tire_model: Some(crate::vehicle::TireModel::Saturating),
            })
            .unwrap();
        let scenario = Scenario::new(
            ReferencePath::DoubleLaneChange {
                shape: DlcShape::default(),
            },
            75.0 / 3.6,
            4.0,
            nominal,
            plant,
            PlantMode::default(),
        );
        let cfg = test_mpc_config();
        let baseline = run_closed_loop(&scenario, &cfg, None, None).unwrap();

        let mut model = ElmModel::new(&crate::elm::TrainConfig::default()).unwrap();
        let data: Vec<_> = baseline
            .records
            .iter()
            .filter(|r| r.realized_error.is_finite())
            .map(|r| crate::elm::TrainingSample {
                features: state_features(&r.state),
                label: r.realized_error,
            })
            .collect();
        model.train(&data, 100.0).unwrap();
        let pid = PidConfig::default();
        let compensated = run_closed_loop(&scenario, &cfg, Some(&pid), Some(&model)).unwrap();

        assert!(baseline.abort.is_none() && compensated.abort.is_none());
        // both start from the same measurement and controller decision;
        // the compensation is the only new input
        assert_eq!(baseline.records[0].state, compensated.records[0].state);
        assert_eq!(
            baseline.records[0].mpc_command,
            compensated.records[0].mpc_command
        );
        assert_eq!(baseline.records[0].compensation, 0.0);
        assert!(compensated.records.iter().any(|r| r.compensation != 0.0));
        assert_eq!(
            compensated.records[0].applied_command,
            combine(
                compensated.records[0].mpc_command,
                compensated.records[0].compensation,
                cfg.steer_min,
                cfg.steer_max
            )
        );
    }

    #[test]
    fn paired_runs_are_bit_identical() {
        let scenario = matched_scenario(
            ReferencePath::ConstantTurn {
                radius: 150.0,
                max_heading: 1.0,
            },
            3.0,
        );
        let cfg = test_mpc_config();
        let a = run_closed_loop(&scenario, &cfg, None, None).unwrap();
        let b = run_closed_loop(&scenario, &cfg, None, None).unwrap();
        // serialize: the final record's NaN label defeats direct PartialEq
        assert_eq!(crate::io::log_to_csv(&a), crate::io::log_to_csv(&b));
    }

    #[test]
    fn estimator_and_compensator_must_come_together() {
        let scenario = matched_scenario(ReferencePath::Straight, 1.0);
        let cfg = test_mpc_config();
        let pid = PidConfig::default();
        assert!(run_closed_loop(&scenario, &cfg, Some(&pid), None).is_err());
        let model = ElmModel::new(&crate::elm::TrainConfig::default()).unwrap();
        assert!(run_closed_loop(&scenario, &cfg, None, Some(&model)).is_err());
    }

    #[test]
    fn collection_counts_one_sample_per_labeled_tick() {
        let scenarios = vec![
            matched_scenario(ReferencePath::Straight, 0.02 * 51.0),
            matched_scenario(
                ReferencePath::ConstantTurn {
                    radius: 200.0,
                    max_heading: 1.0,
                },
                0.02 * 31.0,
            ),
        ];
        let collection = collect_training_data(&scenarios, &test_mpc_config()).unwrap();
        assert_eq!(collection.samples.len(), 50 + 30);
        assert!(collection.warnings.is_empty());
        for s in &collection.samples {
            assert_eq!(s.features.len(), FEATURE_DIM);
            assert!(s.label.abs() <= 1e-9); // matched plant: all labels null
        }
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let samples: Vec<TrainingSample> = (0..100)
            .map(|i| TrainingSample {
                features: [i as f64; FEATURE_DIM],
                label: i as f64,
            })
            .collect();
        let (train_a, test_a) = split_dataset(&samples, 25, 9).unwrap();
        let (train_b, test_b) = split_dataset(&samples, 25, 9).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.len(), 75);
        assert_eq!(test_a.len(), 25);

        let mut labels: Vec<i64> = train_a
            .iter()
            .chain(test_a.iter())
            .map(|s| s.label as i64)
            .collect();
        labels.sort_unstable();
        assert_eq!(labels, (0..100).collect::<Vec<_>>());

        let (train_c, _) = split_dataset(&samples, 25, 10).unwrap();
        assert_ne!(train_a, train_c);

        assert!(split_dataset(&samples, 100, 1).is_err());
    }

    #[test]
    fn metrics_on_synthetic_log() {
        let mk_record = |x: f64, y: f64, y_ref: f64, u: f64| LogRecord {
            time: x / 20.0,
            state: VehicleState {
                x,
                y,
                heading: 0.0,
                vx: 20.0,
                vy: 0.0,
                yaw_rate: 0.0,
            },
            mpc_command: u,
            compensation: 0.0,
            applied_command: u,
            predicted_x: 0.0,
            predicted_y: 0.0,
            realized_error: f64::NAN,
            estimated_error: 0.0,
            reference_y: y_ref,
            reference_heading: 0.0,
            solver_status: SolverStatus::Converged,
        };
        let log = SimLog {
            sample_time: 0.02,
            speed: 20.0,
            records: vec![
                mk_record(0.0, 0.1, 0.0, 0.01),
                mk_record(1.0, 0.3, 0.0, -0.02),
                mk_record(2.0, -0.1, 0.0, 0.005),
            ],
            abort: None,
        };
        let metrics = compute_metrics(&log, None, &[0.5, 1.5, 10.0]).unwrap();
        let expect_rms = ((0.01f64 + 0.09 + 0.01) / 3.0).sqrt();
        assert!((metrics.rms_lateral_error - expect_rms).abs() < 1e-15);
        assert!((metrics.max_lateral_error - 0.3).abs() < 1e-15);
        assert!((metrics.max_steering - 0.02).abs() < 1e-15);
        assert!((metrics.landmark_errors[0].lateral_error.unwrap() - 0.2).abs() < 1e-12);
        assert!((metrics.landmark_errors[1].lateral_error.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(metrics.landmark_errors[2].lateral_error, None);

        // constant offset on a straight path: rms == max == offset
        let offset_log = SimLog {
            sample_time: 0.02,
            speed: 20.0,
            records: (0..10)
                .map(|i| mk_record(i as f64, 0.2, 0.0, 0.0))
                .collect(),
            abort: None,
        };
        let m = compute_metrics(&offset_log, None, &[]).unwrap();
        assert!((m.rms_lateral_error - 0.2).abs() < 1e-15);
        assert!((m.max_lateral_error - 0.2).abs() < 1e-15);

        // self-comparison reduces nothing
        let self_cmp = compute_metrics(&log, Some(&log), &[]).unwrap();
        let red = self_cmp.reduction.unwrap();
        assert_eq!(red.peak_lateral_pct, 0.0);
        assert_eq!(red.rms_lateral_pct, 0.0);

        // hand-built pair: candidate halves the offsets
        let better = SimLog {
            sample_time: 0.02,
            speed: 20.0,
            records: (0..10)
                .map(|i| mk_record(i as f64, 0.1, 0.0, 0.0))
                .collect(),
            abort: None,
        };
        let cmp = compute_metrics(&better, Some(&offset_log), &[]).unwrap();
        let red = cmp.reduction.unwrap();
        assert!((red.peak_lateral_pct - 50.0).abs() < 1e-9);
        assert!((red.rms_lateral_pct - 50.0).abs() < 1e-9);
    }

    #[test]
    fn on_reference_log_has_zero_metrics() {
        let scenario = matched_scenario(ReferencePath::Straight, 2.0);
        let log = run_closed_loop(&scenario, &test_mpc_config(), None, None).unwrap();
        let metrics = compute_metrics(&log, None, &[]).unwrap();
        assert!(metrics.rms_lateral_error <= 1e-9);
        assert!(metrics.max_heading_error <= 1e-9);
    }

    #[test]
    fn divergent_plant_aborts_with_prefix() {
        // a plant perturbation so hostile the loop cannot hold the lane
        let nominal = VehicleParams::default();
        let silly = VehicleParams {
            corner_stiffness_front: 200.0,
            corner_stiffness_rear: 150.0,
            ..nominal.clone()
        }
        .finalize()
        .unwrap();
        let scenario = Scenario::new(
            ReferencePath::DoubleLaneChange {
                shape: DlcShape::default(),
            },
            30.0,
            20.0,
            nominal,
            silly,
            PlantMode::default(),
        )
        .with_initial_lateral_offset(90.0);
        let cfg = test_mpc_config();
        let log = run_closed_loop(&scenario, &cfg, None, None).unwrap();
        assert!(log.abort.is_some());
        assert!(log.records.len() < scenario.tick_count(cfg.sample_time));
    }
}
