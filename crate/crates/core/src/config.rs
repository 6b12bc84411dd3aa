//! Structured TOML configuration for the whole pipeline.
//!
//! One file carries the vehicle, the plant perturbation, the controller
//! tuning, the compensator gains, the estimator hyperparameters, the
//! evaluation scenario and the data-collection plan. Every section is
//! optional and falls back to the stock setup. The canonical file with all
//! values written out lives at `configs/default.toml`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::elm::TrainConfig;
use crate::error::{Error, Result};
use crate::mpc::MpcConfig;
use crate::path::{DlcShape, ReferencePath};
use crate::pid::PidConfig;
use crate::sim::{PlantMode, Scenario};
use crate::vehicle::{IntegrationMethod, Perturbation, TireModel, VehicleParams};

/// \[vehicle\]: nominal parameter set (axle loads are derived, not listed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    pub mass: f64,
    pub yaw_inertia: f64,
    pub cg_to_front: f64,
    pub cg_to_rear: f64,
    pub long_stiffness_front: f64,
    pub long_stiffness_rear: f64,
    pub corner_stiffness_front: f64,
    pub corner_stiffness_rear: f64,
    pub tire_model: TireModel,
    pub friction: f64,
}

impl Default for VehicleSection {
    fn default() -> Self {
        let p = VehicleParams::default();
        VehicleSection {
            mass: p.mass,
            yaw_inertia: p.yaw_inertia,
            cg_to_front: p.cg_to_front,
            cg_to_rear: p.cg_to_rear,
            long_stiffness_front: p.long_stiffness_front,
            long_stiffness_rear: p.long_stiffness_rear,
            corner_stiffness_front: p.corner_stiffness_front,
            corner_stiffness_rear: p.corner_stiffness_rear,
            tire_model: p.tire_model,
            friction: p.friction,
        }
    }
}

impl VehicleSection {
    pub fn to_params(&self) -> Result<VehicleParams> {
        VehicleParams {
            mass: self.mass,
            yaw_inertia: self.yaw_inertia,
            cg_to_front: self.cg_to_front,
            cg_to_rear: self.cg_to_rear,
            long_stiffness_front: self.long_stiffness_front,
            long_stiffness_rear: self.long_stiffness_rear,
            corner_stiffness_front: self.corner_stiffness_front,
            corner_stiffness_rear: self.corner_stiffness_rear,
            tire_model: self.tire_model,
            friction: self.friction,
            fz_front: 0.0,
            fz_rear: 0.0,
        }
        .finalize()
    }
}

/// \[mpc\]: horizons, weights (diagonal over \[heading, y\]) and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcSection {
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    pub sample_time: f64,
    pub heading_weight: f64,
    pub lateral_weight: f64,
    pub increment_weight: f64,
    pub increment_min: f64,
    pub increment_max: f64,
    pub steer_min: f64,
    pub steer_max: f64,
    pub solver_max_iter: usize,
    pub solver_tol: f64,
}

impl Default for MpcSection {
    fn default() -> Self {
        MpcSection {
            prediction_horizon: 25,
            control_horizon: 2,
            sample_time: 0.02,
            heading_weight: 20.0,
            lateral_weight: 100.0,
            increment_weight: 5e4,
            increment_min: -0.01,
            increment_max: 0.01,
            steer_min: -0.44,
            steer_max: 0.44,
            solver_max_iter: 20_000,
            solver_tol: 1e-8,
        }
    }
}

impl MpcSection {
    pub fn to_config(&self) -> MpcConfig {
        MpcConfig {
            prediction_horizon: self.prediction_horizon,
            control_horizon: self.control_horizon,
            sample_time: self.sample_time,
            output_weight: DMatrix::from_diagonal(&DVector::from_column_slice(&[
                self.heading_weight,
                self.lateral_weight,
            ])),
            increment_weight: DMatrix::from_element(1, 1, self.increment_weight),
            increment_min: self.increment_min,
            increment_max: self.increment_max,
            steer_min: self.steer_min,
            steer_max: self.steer_max,
            solver_max_iter: self.solver_max_iter,
            solver_tol: self.solver_tol,
        }
    }
}

/// Which parameter set and stepping scheme the plant runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSelect {
    /// Nominal parameters perturbed by the \[perturbation\] section.
    Perturbed,
    /// Nominal parameters, high-fidelity integration.
    Nominal,
    /// The controller's own discrete model; nulls the predictive error.
    Matched,
}

/// \[scenario\]: the evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub path: ReferencePath,
    pub speed: f64,
    pub duration: f64,
    pub plant: PlantSelect,
    pub substeps: usize,
    pub integration: IntegrationMethod,
    pub initial_lateral_offset: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            path: ReferencePath::DoubleLaneChange {
                shape: DlcShape::default(),
            },
            speed: 75.0 / 3.6,
            duration: 10.0,
            plant: PlantSelect::Perturbed,
            substeps: 10,
            integration: IntegrationMethod::Rk4,
            initial_lateral_offset: 0.0,
        }
    }
}

/// One entry of the \[collect\] scenario list; `samples` is the number of
/// labeled training samples the run contributes (the run lasts one tick
/// longer than that, since the last tick's prediction has no realization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectScenario {
    pub path: ReferencePath,
    pub samples: usize,
    #[serde(default)]
    pub initial_lateral_offset: f64,
    #[serde(default)]
    pub speed: Option<f64>,
}

/// \[collect\]: data-collection plan and the train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSection {
    pub split_seed: u64,
    pub test_samples: usize,
    pub plant: PlantSelect,
    pub scenarios: Vec<CollectScenario>,
}

impl Default for CollectSection {
    fn default() -> Self {
        CollectSection {
            split_seed: 99,
            test_samples: 250,
            plant: PlantSelect::Perturbed,
            scenarios: vec![
                CollectScenario {
                    path: ReferencePath::DoubleLaneChange {
                        shape: DlcShape::default(),
                    },
                    samples: 600,
                    initial_lateral_offset: 0.0,
                    speed: None,
                },
                CollectScenario {
                    path: ReferencePath::ConstantTurn {
                        radius: 120.0,
                        max_heading: 1.0,
                    },
                    samples: 200,
                    initial_lateral_offset: 0.0,
                    speed: None,
                },
                CollectScenario {
                    path: ReferencePath::ConstantTurn {
                        radius: -180.0,
                        max_heading: 1.0,
                    },
                    samples: 200,
                    initial_lateral_offset: 0.0,
                    speed: None,
                },
                CollectScenario {
                    path: ReferencePath::Straight,
                    samples: 250,
                    initial_lateral_offset: 0.5,
                    speed: None,
                },
            ],
        }
    }
}

/// Whole-pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub vehicle: VehicleSection,
    pub perturbation: Perturbation,
    pub mpc: MpcSection,
    pub pid: PidConfig,
    pub elm: TrainConfig,
    pub scenario: ScenarioSection,
    pub collect: CollectSection,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            vehicle: VehicleSection::default(),
            // stock plant mismatch: rear-shifted CG, 10% extra mass,
            // saturating tire on the plant side
            perturbation: Perturbation {
                cg_shift: 0.15,
                mass_scale: 1.1,
                stiffness_scale: 1.0,
                tire_model: Some(TireModel::Saturating),
            },
            mpc: MpcSection::default(),
            pid: PidConfig::default(),
            elm: TrainConfig::default(),
            scenario: ScenarioSection::default(),
            collect: CollectSection::default(),
        }
    }
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<AppConfig> {
        toml::from_str(text).map_err(|e| Error::Io(format!("config parse: {e}")))
    }

    pub fn load(path: &Path) -> Result<AppConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// Route a single CLI seed to every seeded stage.
    pub fn override_seed(&mut self, seed: u64) {
        self.elm.seed = seed;
        self.collect.split_seed = seed.wrapping_add(1);
    }

    pub fn nominal_params(&self) -> Result<VehicleParams> {
        self.vehicle.to_params()
    }

    pub fn plant_params(&self, select: PlantSelect) -> Result<VehicleParams> {
        let nominal = self.nominal_params()?;
        match select {
            PlantSelect::Perturbed => nominal.perturbed(&self.perturbation),
            PlantSelect::Nominal | PlantSelect::Matched => Ok(nominal),
        }
    }

    fn plant_mode(&self, select: PlantSelect) -> PlantMode {
        match select {
            PlantSelect::Matched => PlantMode::Matched,
            _ => PlantMode::HighFidelity {
                substeps: self.scenario.substeps,
                method: self.scenario.integration,
            },
        }
    }

    /// Build the evaluation scenario from the \[scenario\] section.
    pub fn scenario(&self) -> Result<Scenario> {
        let nominal = self.nominal_params()?;
        let plant = self.plant_params(self.scenario.plant)?;
        Ok(Scenario::new(
            self.scenario.path,
            self.scenario.speed,
            self.scenario.duration,
            nominal,
            plant,
            self.plant_mode(self.scenario.plant),
        )
        .with_initial_lateral_offset(self.scenario.initial_lateral_offset))
    }

    /// Build the collection scenario list from the \[collect\] section.
    pub fn collect_scenarios(&self) -> Result<Vec<Scenario>> {
        let nominal = self.nominal_params()?;
        let plant = self.plant_params(self.collect.plant)?;
        let mode = self.plant_mode(self.collect.plant);
        let dt = self.mpc.sample_time;
        self.collect
            .scenarios
            .iter()
            .map(|c| {
                if c.samples == 0 {
                    return Err(Error::InvalidArgument(
                        "collect scenario must request at least one sample".into(),
                    ));
                }
                let duration = (c.samples + 1) as f64 * dt;
                Ok(Scenario::new(
                    c.path,
                    c.speed.unwrap_or(self.scenario.speed),
                    duration,
                    nominal.clone(),
                    plant.clone(),
                    mode,
                )
                .with_initial_lateral_offset(c.initial_lateral_offset))
            })
            .collect()
    }

    /// Total labeled samples the collection plan yields.
    pub fn planned_sample_count(&self) -> usize {
        self.collect.scenarios.iter().map(|c| c.samples).sum()
    }
}
