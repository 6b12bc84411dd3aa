//! Receding-horizon lateral controller.
//!
//! Each tick: linearize the reduced model at the measured state, build the
//! batch prediction maps, assemble the increment-space QP, solve it, and
//! apply only the first increment. The controller also records its one-step
//! position prediction; the gap to the realized position is the signal the
//! error estimator learns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linearize::{
    augment, controller_state, discretize, jacobians, output_matrix, AugmentedModel, CTRL_OUTPUTS,
};
use crate::qp::{solve_qp_warm, QpProblem, SolverStatus};
use crate::vehicle::{VehicleParams, VehicleState};

/// Horizons, weights and bounds of the receding-horizon problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    /// Controller sample interval \[s\].
    pub sample_time: f64,
    /// Output-error weight over \[heading, y\].
    pub output_weight: DMatrix<f64>,
    /// Increment effort weight.
    pub increment_weight: DMatrix<f64>,
    /// Per-step steering increment bounds \[rad\].
    pub increment_min: f64,
    pub increment_max: f64,
    /// Absolute steering bounds \[rad\].
    pub steer_min: f64,
    pub steer_max: f64,
    pub solver_max_iter: usize,
    pub solver_tol: f64,
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.control_horizon < 1 || self.prediction_horizon < self.control_horizon {
            return Err(Error::InvalidInput(format!(
                "horizons must satisfy Np >= Nc >= 1, got Np={}, Nc={}",
                self.prediction_horizon, self.control_horizon
            )));
        }
        if !self.sample_time.is_finite() || self.sample_time <= 0.0 {
            return Err(Error::InvalidInput("sample time must be positive".into()));
        }
        let q = &self.output_weight;
        if q.nrows() != q.ncols() {
            return Err(Error::InvalidInput("output weight must be square".into()));
        }
        if (q - q.transpose()).amax() > 1e-9 * (1.0 + q.amax()) {
            return Err(Error::InvalidInput(
                "output weight must be symmetric".into(),
            ));
        }
        let eigs = q.clone().symmetric_eigen().eigenvalues;
        if eigs.min() < -1e-9 * (1.0 + q.amax()) {
            return Err(Error::InvalidInput(
                "output weight must be positive semidefinite".into(),
            ));
        }
        let r = &self.increment_weight;
        if r.nrows() != r.ncols() {
            return Err(Error::InvalidInput(
                "increment weight must be square".into(),
            ));
        }
        if (r - r.transpose()).amax() > 1e-9 * (1.0 + r.amax()) {
            return Err(Error::InvalidInput(
                "increment weight must be symmetric".into(),
            ));
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::InvalidInput(
                "increment weight must be positive definite".into(),
            ));
        }
        if self.increment_min >= self.increment_max {
            return Err(Error::InvalidInput("empty increment bounds".into()));
        }
        if self.steer_min >= self.steer_max {
            return Err(Error::InvalidInput("empty steering bounds".into()));
        }
        if !self.solver_tol.is_finite() || self.solver_tol <= 0.0 {
            return Err(Error::InvalidInput(
                "solver tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Reference or predicted value of the tracked outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedOutputs {
    pub heading: f64,
    pub y: f64,
}

/// Batch maps from the current augmented state and the increment sequence
/// to the stacked predicted outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrices {
    /// (Np*p) x (n+m): output response to the free evolution of xi.
    pub free_response: DMatrix<f64>,
    /// (Np*p) x (Nc*m): block-lower-triangular forced response.
    pub forced_response: DMatrix<f64>,
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    pub outputs: usize,
    pub inputs: usize,
}

/// Stack C*A^i and C*A^(i-j)*B into the batch prediction form.
pub fn build_prediction(
    model: &AugmentedModel,
    prediction_horizon: usize,
    control_horizon: usize,
) -> Result<PredictionMatrices> {
    let n = model.states;
    let m = model.inputs;
    let p = model.outputs;
    if model.a.nrows() != n
        || model.a.ncols() != n
        || model.b.nrows() != n
        || model.b.ncols() != m
        || model.c.nrows() != p
        || model.c.ncols() != n
    {
        return Err(Error::InvalidInput(
            "augmented model dimensions inconsistent".into(),
        ));
    }
    if control_horizon < 1 || prediction_horizon < control_horizon {
        return Err(Error::InvalidInput(format!(
            "horizons must satisfy Np >= Nc >= 1, got Np={prediction_horizon}, Nc={control_horizon}"
        )));
    }

    let mut free = DMatrix::zeros(prediction_horizon * p, n);
    let mut forced = DMatrix::zeros(prediction_horizon * p, control_horizon * m);

    // impulse blocks C*A^j*B for j = 0..Np-1
    let mut impulse = Vec::with_capacity(prediction_horizon);
    impulse.push(&model.c * &model.b);
    let mut c_power = model.c.clone();
    for block in 0..prediction_horizon {
        c_power = &c_power * &model.a; // C*A^(block+1)
        free.view_mut((block * p, 0), (p, n)).copy_from(&c_power);
        if block + 1 < prediction_horizon {
            impulse.push(&c_power * &model.b);
        }
    }
    for i in 0..prediction_horizon {
        for j in 0..control_horizon.min(i + 1) {
            forced
                .view_mut((i * p, j * m), (p, m))
                .copy_from(&impulse[i - j]);
        }
    }
    Ok(PredictionMatrices {
        free_response: free,
        forced_response: forced,
        prediction_horizon,
        control_horizon,
        outputs: p,
        inputs: m,
    })
}

/// Assemble the dense increment QP from the prediction maps.
///
/// The decision variable is the increment sequence; the absolute input
/// bounds become cumulative-sum constraints around the previous input,
/// which rides along as the last entry of `xi`.
pub fn assemble_qp(
    prediction: &PredictionMatrices,
    xi: &DVector<f64>,
    reference_stack: &DVector<f64>,
    config: &MpcConfig,
) -> Result<QpProblem> {
    let p = prediction.outputs;
    let m = prediction.inputs;
    let np = prediction.prediction_horizon;
    let nc = prediction.control_horizon;
    if m != 1 {
        return Err(Error::InvalidInput(
            "increment QP assembly expects a single input".into(),
        ));
    }
    if xi.len() != prediction.free_response.ncols() {
        return Err(Error::InvalidInput(format!(
            "augmented state length {} does not match prediction maps ({})",
            xi.len(),
            prediction.free_response.ncols()
        )));
    }
    if reference_stack.len() != np * p {
        return Err(Error::InvalidInput(format!(
            "reference stack must hold {np} output blocks ({} values), got {}",
            np * p,
            reference_stack.len()
        )));
    }
    if config.output_weight.nrows() != p || config.increment_weight.nrows() != m {
        return Err(Error::InvalidInput(
            "weight dimensions do not match outputs".into(),
        ));
    }

    let mut q_bar = DMatrix::zeros(np * p, np * p);
    for i in 0..np {
        q_bar
            .view_mut((i * p, i * p), (p, p))
            .copy_from(&config.output_weight);
    }
    let mut r_bar = DMatrix::zeros(nc * m, nc * m);
    for i in 0..nc {
        r_bar
            .view_mut((i * m, i * m), (m, m))
            .copy_from(&config.increment_weight);
    }

    let theta = &prediction.forced_response;
    let qt = &q_bar * theta;
    let mut hessian = (theta.transpose() * &qt + &r_bar) * 2.0;
    // enforce exact symmetry against rounding in the products
    hessian = (&hessian + hessian.transpose()) * 0.5;

    let free_error = &prediction.free_response * xi - reference_stack;
    let gradient = theta.transpose() * (&q_bar * free_error) * 2.0;

    let u_prev = xi[xi.len() - 1];
    Ok(QpProblem {
        hessian,
        gradient,
        step_lower: DVector::from_element(nc, config.increment_min),
        step_upper: DVector::from_element(nc, config.increment_max),
        cum_lower: DVector::from_element(nc, config.steer_min - u_prev),
        cum_upper: DVector::from_element(nc, config.steer_max - u_prev),
    })
}

/// One-step-ahead position predicted by the controller model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionPrediction {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Signed lateral component of (actual - predicted), left-positive.
pub fn one_step_prediction_error(predicted: &PositionPrediction, actual: &VehicleState) -> f64 {
    let (sin_h, cos_h) = actual.heading.sin_cos();
    -sin_h * (actual.x - predicted.x) + cos_h * (actual.y - predicted.y)
}

/// Mutable between-tick controller memory.
#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Last applied controller output u(t-1) \[rad\].
    pub previous_command: f64,
    /// Shifted previous increment sequence, used to warm-start the QP.
    pub warm_start: Option<DVector<f64>>,
    /// Prediction made on the previous tick, if any.
    pub last_prediction: Option<PositionPrediction>,
}

impl ControllerState {
    fn new() -> Self {
        ControllerState {
            previous_command: 0.0,
            warm_start: None,
            last_prediction: None,
        }
    }
}

/// Result of one controller tick.
#[derive(Debug, Clone)]
pub struct MpcStepOutput {
    /// Controller output u(t) \[rad\], before any feedforward correction.
    pub command: f64,
    /// First optimized increment \[rad\].
    pub increment: f64,
    /// Predicted tracked outputs one step ahead.
    pub predicted_outputs: TrackedOutputs,
    /// Predicted position one step ahead (kinematic x advance).
    pub prediction: PositionPrediction,
    pub status: SolverStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Receding-horizon controller bound to one simulation loop.
#[derive(Debug, Clone)]
pub struct MpcController {
    config: MpcConfig,
    params: VehicleParams,
    state: ControllerState,
}

impl MpcController {
    /// `params` is the controller's (nominal) vehicle model; prediction
    /// always runs on the linear tire regardless of the plant setting.
    pub fn new(config: MpcConfig, params: VehicleParams) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        Ok(MpcController {
            config,
            params,
            state: ControllerState::new(),
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = ControllerState::new();
    }

    /// Run one controller tick against a reference window of length Np.
    pub fn step(
        &mut self,
        measurement: &VehicleState,
        reference: &[TrackedOutputs],
    ) -> Result<MpcStepOutput> {
        if measurement.vx <= 0.0 {
            return Err(Error::Domain(format!(
                "controller requires vx > 0, got {}",
                measurement.vx
            )));
        }
        let np = self.config.prediction_horizon;
        let nc = self.config.control_horizon;
        if reference.len() != np {
            return Err(Error::InvalidInput(format!(
                "reference window must cover {np} steps, got {}",
                reference.len()
            )));
        }

        let u_prev = self.state.previous_command;
        let reduced = controller_state(measurement);
        let (a_cont, b_cont) = jacobians(&reduced, u_prev, &self.params, measurement.vx)?;
        let model = discretize(&a_cont, &b_cont, self.config.sample_time)?;
        let aug = augment(&model.a_disc, &model.b_disc, &output_matrix())?;
        let xi = AugmentedModel::augmented_state(&reduced, u_prev);
        let prediction_maps = build_prediction(&aug, np, nc)?;

        let mut reference_stack = DVector::zeros(np * CTRL_OUTPUTS);
        for (i, r) in reference.iter().enumerate() {
            reference_stack[i * CTRL_OUTPUTS] = r.heading;
            reference_stack[i * CTRL_OUTPUTS + 1] = r.y;
        }

        let problem = assemble_qp(&prediction_maps, &xi, &reference_stack, &self.config)?;
        let solved = solve_qp_warm(
            &problem,
            self.config.solver_max_iter,
            self.config.solver_tol,
            self.state.warm_start.as_ref(),
        );

        let (increments, status, iterations, kkt_residual) = match solved {
            Ok(sol) => (sol.solution, sol.status, sol.iterations, sol.kkt_residual),
            Err(Error::Infeasible(_)) => {
                // hold the last input and flag the tick
                (DVector::zeros(nc), SolverStatus::Failed, 0, f64::NAN)
            }
            Err(e) => return Err(e),
        };

        let increment = increments[0];
        // the cumulative constraint already bounds u_prev + increment; the
        // clamp only absorbs the final addition's rounding
        let command = (u_prev + increment).clamp(self.config.steer_min, self.config.steer_max);

        let predicted_stack =
            &prediction_maps.free_response * &xi + &prediction_maps.forced_response * &increments;
        let predicted_outputs = TrackedOutputs {
            heading: predicted_stack[0],
            y: predicted_stack[1],
        };
        let prediction = PositionPrediction {
            x: measurement.x + measurement.vx * self.config.sample_time,
            y: predicted_outputs.y,
            heading: predicted_outputs.heading,
        };

        let mut warm = DVector::zeros(nc);
        for i in 0..nc - 1 {
            warm[i] = increments[i + 1];
        }
        self.state.warm_start = Some(warm);
        self.state.previous_command = command;
        self.state.last_prediction = Some(prediction);

        Ok(MpcStepOutput {
            command,
            increment,
            predicted_outputs,
            prediction,
            status,
            iterations,
            kkt_residual,
        })
    }
}
