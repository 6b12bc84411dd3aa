//! Closed-loop path-tracking laboratory.
//!
//! A receding-horizon lateral controller drives a deliberately mismatched
//! nonlinear plant; the gap between the controller's one-step position
//! prediction and the realized position is logged, learned by a seeded
//! extreme learning machine, and fed back as a feedforward steering
//! correction. The crate covers the full workflow: vehicle dynamics,
//! linearization, the QP-based controller, the estimator, the compensator,
//! closed-loop simulation with data collection, and file formats for
//! datasets, logs and trained models.
//!
//! The stock pipeline in a few lines:
//!
//! ```
//! use tracklab_core::config::AppConfig;
//! use tracklab_core::elm::ElmModel;
//! use tracklab_core::sim::{collect_training_data, compute_metrics, run_closed_loop,
//!     split_dataset};
//!
//! let config = AppConfig::default();
//! let mpc = config.mpc.to_config();
//!
//! // drive the mismatched plant controller-only and harvest labeled samples
//! let scenarios = config.collect_scenarios().unwrap();
//! let data = collect_training_data(&scenarios, &mpc).unwrap();
//! let (train, _test) = split_dataset(&data.samples, config.collect.test_samples,
//!     config.collect.split_seed).unwrap();
//!
//! // fit the one-step predictive-error estimator
//! let mut model = ElmModel::new(&config.elm).unwrap();
//! model.train(&train, config.elm.regularization).unwrap();
//!
//! // paired evaluation: controller-only vs compensated
//! let scenario = config.scenario().unwrap();
//! let baseline = run_closed_loop(&scenario, &mpc, None, None).unwrap();
//! let compensated =
//!     run_closed_loop(&scenario, &mpc, Some(&config.pid), Some(&model)).unwrap();
//! let metrics = compute_metrics(&compensated, Some(&baseline), &[80.0]).unwrap();
//! assert!(metrics.reduction.unwrap().peak_lateral_pct > 0.0);
//! ```

pub mod config;
pub mod elm;
pub mod error;
pub mod io;
pub mod linearize;
pub mod mpc;
pub mod path;
pub mod pid;
pub mod qp;
pub mod rng;
pub mod sim;
pub mod vehicle;

pub use config::{AppConfig, PlantSelect};
pub use elm::{Activation, ElmModel, RegressionMetrics, TrainConfig, TrainingSample, FEATURE_DIM};
pub use error::{Error, Result};
pub use linearize::{AugmentedModel, LinearModel};
pub use mpc::{MpcConfig, MpcController, PositionPrediction, TrackedOutputs};
pub use path::{DlcShape, ReferencePath};
pub use pid::{PidConfig, PidState};
pub use qp::{QpProblem, QpSolution, SolverStatus};
pub use sim::{Collection, LogRecord, Metrics, PlantMode, Scenario, SimLog};
pub use vehicle::{
    ControlInput, IntegrationMethod, Perturbation, TireModel, VehicleParams, VehicleState,
};
