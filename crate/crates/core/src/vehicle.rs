//! Planar 3-DOF bicycle dynamics with selectable linear or saturating tire.
//!
//! The same model serves two roles: with nominal parameters and the linear
//! tire it is the controller's truth, and with perturbed parameters plus the
//! saturating tire it acts as the high-fidelity plant the controller is
//! deliberately mismatched against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity \[m/s^2\].
pub const GRAVITY: f64 = 9.81;

/// Lateral tire force law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TireModel {
    /// Force proportional to slip (valid below roughly 0.4 g lateral).
    Linear,
    /// Magic-formula-shaped curve: linear at small slip, saturating at large slip.
    Saturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axle {
    Front,
    Rear,
}

/// Time integration scheme for [`VehicleParams::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    Euler,
    Rk4,
}

/// Lumped bicycle-model parameters.
///
/// Axle normal loads are derived from mass and geometry; construct through
/// [`VehicleParams::finalize`] so they stay consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Vehicle mass \[kg\].
    pub mass: f64,
    /// Yaw moment of inertia \[kg m^2\].
    pub yaw_inertia: f64,
    /// Distance from center of gravity to front axle \[m\].
    pub cg_to_front: f64,
    /// Distance from center of gravity to rear axle \[m\].
    pub cg_to_rear: f64,
    /// Front/rear longitudinal tire stiffness \[N per unit slip\].
    pub long_stiffness_front: f64,
    pub long_stiffness_rear: f64,
    /// Front/rear cornering stiffness \[N/rad\].
    pub corner_stiffness_front: f64,
    pub corner_stiffness_rear: f64,
    /// Lateral force law used by `dynamics_rhs`.
    pub tire_model: TireModel,
    /// Road friction coefficient, used only by the saturating tire.
    pub friction: f64,
    /// Static front axle normal load \[N\], derived.
    pub fz_front: f64,
    /// Static rear axle normal load \[N\], derived.
    pub fz_rear: f64,
}

impl Default for VehicleParams {
    /// Representative mid-size sedan, linear tire.
    fn default() -> Self {
        VehicleParams {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            cg_to_front: 1.2,
            cg_to_rear: 1.4,
            long_stiffness_front: 80_000.0,
            long_stiffness_rear: 80_000.0,
            corner_stiffness_front: 70_000.0,
            corner_stiffness_rear: 70_000.0,
            tire_model: TireModel::Linear,
            friction: 0.9,
            fz_front: 0.0,
            fz_rear: 0.0,
        }
        .finalize()
        .expect("default parameters are valid")
    }
}

impl VehicleParams {
    /// Recompute the static axle loads from mass and geometry, then validate.
    pub fn finalize(mut self) -> Result<Self> {
        let wheelbase = self.cg_to_front + self.cg_to_rear;
        self.fz_front = self.mass * GRAVITY * self.cg_to_rear / wheelbase;
        self.fz_rear = self.mass * GRAVITY * self.cg_to_front / wheelbase;
        self.validate()?;
        Ok(self)
    }

    /// Check the parameter invariants.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("cg_to_front", self.cg_to_front),
            ("cg_to_rear", self.cg_to_rear),
            ("long_stiffness_front", self.long_stiffness_front),
            ("long_stiffness_rear", self.long_stiffness_rear),
            ("corner_stiffness_front", self.corner_stiffness_front),
            ("corner_stiffness_rear", self.corner_stiffness_rear),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        if !self.friction.is_finite() || self.friction <= 0.0 || self.friction > 1.5 {
            return Err(Error::InvalidInput(format!(
                "friction must lie in (0, 1.5], got {}",
                self.friction
            )));
        }
        let total = self.fz_front + self.fz_rear;
        let weight = self.mass * GRAVITY;
        if (total - weight).abs() > 1e-9 * weight {
            return Err(Error::InvalidInput(format!(
                "axle loads {total} N do not sum to vehicle weight {weight} N"
            )));
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.cg_to_front + self.cg_to_rear
    }

    fn axle_load(&self, axle: Axle) -> f64 {
        match axle {
            Axle::Front => self.fz_front,
            Axle::Rear => self.fz_rear,
        }
    }

    fn corner_stiffness(&self, axle: Axle) -> f64 {
        match axle {
            Axle::Front => self.corner_stiffness_front,
            Axle::Rear => self.corner_stiffness_rear,
        }
    }

    /// Saturating lateral tire force D*sin(Cs*atan(Bs*alpha)).
    ///
    /// D = friction * axle load caps the magnitude; Bs is chosen so the
    /// small-slip slope equals the axle's configured cornering stiffness.
    pub fn saturating_lateral_force(&self, axle: Axle, alpha: f64) -> f64 {
        let peak = self.friction * self.axle_load(axle);
        let stiffness_factor = self.corner_stiffness(axle) / (SHAPE_FACTOR * peak);
        peak * (SHAPE_FACTOR * (stiffness_factor * alpha).atan()).sin()
    }

    /// Lateral force at one axle under the configured tire model.
    pub fn lateral_force(&self, axle: Axle, alpha: f64) -> f64 {
        match self.tire_model {
            TireModel::Linear => self.corner_stiffness(axle) * alpha,
            TireModel::Saturating => self.saturating_lateral_force(axle, alpha),
        }
    }

    /// Tire slip angles and ratios at the current state.
    ///
    /// Slip ratios are identically zero: speed is held constant and no drive
    /// torque is modeled.
    pub fn slip_quantities(&self, state: &VehicleState, input: &ControlInput) -> Result<TireSlip> {
        if state.vx <= 0.0 {
            return Err(Error::Domain(format!(
                "slip angles require vx > 0, got {}",
                state.vx
            )));
        }
        Ok(TireSlip {
            alpha_front: input.steer - (state.vy + self.cg_to_front * state.yaw_rate) / state.vx,
            alpha_rear: (self.cg_to_rear * state.yaw_rate - state.vy) / state.vx,
            ratio_front: 0.0,
            ratio_rear: 0.0,
        })
    }

    /// Continuous-time state derivative of the 3-DOF bicycle model.
    ///
    /// Kinematic rows use exact trigonometry; no small-angle approximation
    /// is applied on the plant side.
    pub fn dynamics_rhs(
        &self,
        state: &VehicleState,
        input: &ControlInput,
    ) -> Result<VehicleDerivative> {
        let slip = self.slip_quantities(state, input)?;
        let f_front = self.lateral_force(Axle::Front, slip.alpha_front);
        let f_rear = self.lateral_force(Axle::Rear, slip.alpha_rear);
        let f_long_front = self.long_stiffness_front * slip.ratio_front;
        let f_long_rear = self.long_stiffness_rear * slip.ratio_rear;

        let dvy = -state.vx * state.yaw_rate + 2.0 * (f_front + f_rear) / self.mass;
        let dvx = state.vy * state.yaw_rate
            + 2.0 * (f_long_front + f_front * input.steer + f_long_rear) / self.mass;
        let dyaw_rate =
            2.0 * (self.cg_to_front * f_front - self.cg_to_rear * f_rear) / self.yaw_inertia;
        let (sin_h, cos_h) = state.heading.sin_cos();
        Ok(VehicleDerivative {
            x: state.vx * cos_h - state.vy * sin_h,
            y: state.vx * sin_h + state.vy * cos_h,
            heading: state.yaw_rate,
            vx: dvx,
            vy: dvy,
            yaw_rate: dyaw_rate,
        })
    }

    /// Advance the state by one integration step of length `dt`.
    pub fn step(
        &self,
        state: &VehicleState,
        input: &ControlInput,
        dt: f64,
        method: IntegrationMethod,
    ) -> Result<VehicleState> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::InvalidInput(format!(
                "step size must be finite and non-negative, got {dt}"
            )));
        }
        match method {
            IntegrationMethod::Euler => {
                let k = self.dynamics_rhs(state, input)?;
                Ok(state.advanced(dt, &k))
            }
            IntegrationMethod::Rk4 => {
                let k1 = self.dynamics_rhs(state, input)?;
                let k2 = self.dynamics_rhs(&state.advanced(0.5 * dt, &k1), input)?;
                let k3 = self.dynamics_rhs(&state.advanced(0.5 * dt, &k2), input)?;
                let k4 = self.dynamics_rhs(&state.advanced(dt, &k3), input)?;
                let combined = VehicleDerivative {
                    x: (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x) / 6.0,
                    y: (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y) / 6.0,
                    heading: (k1.heading + 2.0 * k2.heading + 2.0 * k3.heading + k4.heading) / 6.0,
                    vx: (k1.vx + 2.0 * k2.vx + 2.0 * k3.vx + k4.vx) / 6.0,
                    vy: (k1.vy + 2.0 * k2.vy + 2.0 * k3.vy + k4.vy) / 6.0,
                    yaw_rate: (k1.yaw_rate + 2.0 * k2.yaw_rate + 2.0 * k3.yaw_rate + k4.yaw_rate)
                        / 6.0,
                };
                Ok(state.advanced(dt, &combined))
            }
        }
    }

    /// Derive a deliberately mismatched parameter set.
    ///
    /// Shifts the center of gravity while preserving the wheelbase, scales
    /// mass and stiffnesses, optionally overrides the tire model, and
    /// recomputes axle loads.
    pub fn perturbed(&self, perturbation: &Perturbation) -> Result<VehicleParams> {
        let mut out = self.clone();
        out.cg_to_front = self.cg_to_front + perturbation.cg_shift;
        out.cg_to_rear = self.cg_to_rear - perturbation.cg_shift;
        out.mass = self.mass * perturbation.mass_scale;
        out.long_stiffness_front = self.long_stiffness_front * perturbation.stiffness_scale;
        out.long_stiffness_rear = self.long_stiffness_rear * perturbation.stiffness_scale;
        out.corner_stiffness_front = self.corner_stiffness_front * perturbation.stiffness_scale;
        out.corner_stiffness_rear = self.corner_stiffness_rear * perturbation.stiffness_scale;
        if let Some(model) = perturbation.tire_model {
            out.tire_model = model;
        }
        out.finalize()
            .map_err(|e| Error::InvalidPerturbation(e.to_string()))
    }
}

/// Magic-formula shape factor of the saturating tire.
const SHAPE_FACTOR: f64 = 1.5;

/// Pure-slip lateral or longitudinal tire force F = stiffness * slip.
pub fn linear_tire_force(stiffness: f64, slip: f64) -> Result<f64> {
    if !stiffness.is_finite() || !slip.is_finite() {
        return Err(Error::InvalidInput(format!(
            "tire force inputs must be finite, got stiffness={stiffness}, slip={slip}"
        )));
    }
    debug_assert!(stiffness > 0.0);
    Ok(stiffness * slip)
}

/// Full planar vehicle state: global pose plus body-frame velocities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Global longitudinal position \[m\].
    pub x: f64,
    /// Global lateral position \[m\].
    pub y: f64,
    /// Heading angle \[rad\].
    pub heading: f64,
    /// Body longitudinal speed \[m/s\]; must stay positive while dynamics run.
    pub vx: f64,
    /// Body lateral speed \[m/s\].
    pub vy: f64,
    /// Yaw rate \[rad/s\].
    pub yaw_rate: f64,
}

impl VehicleState {
    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.heading.is_finite()
            && self.vx.is_finite()
            && self.vy.is_finite()
            && self.yaw_rate.is_finite()
    }

    fn advanced(&self, dt: f64, d: &VehicleDerivative) -> VehicleState {
        VehicleState {
            x: self.x + dt * d.x,
            y: self.y + dt * d.y,
            heading: self.heading + dt * d.heading,
            vx: self.vx + dt * d.vx,
            vy: self.vy + dt * d.vy,
            yaw_rate: self.yaw_rate + dt * d.yaw_rate,
        }
    }
}

/// Time derivative of each [`VehicleState`] field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleDerivative {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

/// Front steering command \[rad\].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub steer: f64,
}

/// Slip angles \[rad\] and longitudinal slip ratios at both axles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireSlip {
    pub alpha_front: f64,
    pub alpha_rear: f64,
    pub ratio_front: f64,
    pub ratio_rear: f64,
}

/// Plant-vs-controller mismatch knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    /// CG displacement toward the rear \[m\]; wheelbase is preserved.
    pub cg_shift: f64,
    pub mass_scale: f64,
    pub stiffness_scale: f64,
    /// Replace the tire model when set.
    pub tire_model: Option<TireModel>,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation {
            cg_shift: 0.0,
            mass_scale: 1.0,
            stiffness_scale: 1.0,
            tire_model: None,
        }
    }
}
