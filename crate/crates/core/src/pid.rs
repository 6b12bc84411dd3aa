//! Feedforward steering compensation from the estimated predictive error.
//!
//! A PID on the estimated error, summed with the controller output. The
//! proportional-only setting reproduces the plain u_c = Kp * e correction;
//! integral and derivative terms are available behind the same config.

use serde::{Deserialize, Serialize};

/// Compensator gains and clamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidConfig {
    /// Proportional gain \[rad/m\].
    pub kp: f64,
    /// Integral gain \[rad/(m s)\].
    pub ki: f64,
    /// Derivative gain \[rad s/m\].
    pub kd: f64,
    /// Anti-windup bound on the error integral \[m s\].
    pub integral_clamp: f64,
    /// Bound on the compensation output \[rad\].
    pub output_clamp: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        PidConfig {
            kp: 1.5,
            ki: 0.0,
            kd: 0.0,
            integral_clamp: 1.0,
            output_clamp: 0.44,
        }
    }
}

/// Between-tick compensator memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    /// Trapezoid-accumulated error integral \[m s\].
    pub integral: f64,
    /// Error seen on the previous tick \[m\].
    pub previous_error: f64,
}

/// One compensator tick; pure in (state, inputs).
///
/// The integral accumulates by the trapezoid rule and is clamped for
/// anti-windup; the output is clamped to the configured bound.
pub fn pid_step(state: &PidState, error: f64, dt: f64, config: &PidConfig) -> (f64, PidState) {
    debug_assert!(dt > 0.0);
    let integral = (state.integral + 0.5 * dt * (error + state.previous_error))
        .clamp(-config.integral_clamp, config.integral_clamp);
    let derivative = (error - state.previous_error) / dt;
    let output = (config.kp * error + config.ki * integral + config.kd * derivative)
        .clamp(-config.output_clamp, config.output_clamp);
    (
        output,
        PidState {
            integral,
            previous_error: error,
        },
    )
}

/// Final applied steering: controller output plus compensation, clamped to
/// the actuator bounds.
pub fn combine(mpc_command: f64, compensation: f64, steer_min: f64, steer_max: f64) -> f64 {
    debug_assert!(steer_min < steer_max);
    (mpc_command + compensation).clamp(steer_min, steer_max)
}
