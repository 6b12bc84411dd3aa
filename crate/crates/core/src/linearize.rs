//! Discrete-time augmented LTV model of the controller's reduced dynamics.
//!
//! The controller sees a 2-DOF lateral/yaw model with the small-angle
//! kinematic row dY/dt = vx*heading + vy, states \[vy, heading, yaw_rate, y\]
//! and the single steering input. Longitudinal speed is a frozen parameter.
//! The gap between this model and the full plant is exactly the predictive
//! error the estimator learns downstream.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::vehicle::{VehicleParams, VehicleState};

/// Controller state dimension: \[vy, heading, yaw_rate, y\].
pub const CTRL_STATES: usize = 4;
/// Single steering input.
pub const CTRL_INPUTS: usize = 1;
/// Tracked outputs: \[heading, y\].
pub const CTRL_OUTPUTS: usize = 2;

/// Project the full plant state onto the controller's reduced state.
///
/// Longitudinal position is propagated outside the prediction model.
pub fn controller_state(state: &VehicleState) -> DVector<f64> {
    DVector::from_column_slice(&[state.vy, state.heading, state.yaw_rate, state.y])
}

/// Reduced continuous dynamics used by the controller (linear tire,
/// small-angle kinematics, frozen vx). Exposed so tests can difference it.
pub fn reduced_dynamics(
    state: &DVector<f64>,
    steer: f64,
    params: &VehicleParams,
    vx: f64,
) -> Result<DVector<f64>> {
    if vx <= 0.0 {
        return Err(Error::Domain(format!(
            "reduced dynamics require vx > 0, got {vx}"
        )));
    }
    if state.len() != CTRL_STATES {
        return Err(Error::InvalidInput(format!(
            "reduced state must have length {CTRL_STATES}, got {}",
            state.len()
        )));
    }
    let (vy, heading, yaw_rate) = (state[0], state[1], state[2]);
    let cf = params.corner_stiffness_front;
    let cr = params.corner_stiffness_rear;
    let a = params.cg_to_front;
    let b = params.cg_to_rear;
    let alpha_front = steer - (vy + a * yaw_rate) / vx;
    let alpha_rear = (b * yaw_rate - vy) / vx;
    let dvy = -vx * yaw_rate + 2.0 * (cf * alpha_front + cr * alpha_rear) / params.mass;
    let dyaw_rate = 2.0 * (a * cf * alpha_front - b * cr * alpha_rear) / params.yaw_inertia;
    let dy = vx * heading + vy;
    Ok(DVector::from_column_slice(&[dvy, yaw_rate, dyaw_rate, dy]))
}

/// Analytic Jacobians of [`reduced_dynamics`] at an operating point.
///
/// Returns the state Jacobian (4x4) and input Jacobian (4x1), both per
/// second. The operating point is accepted for interface symmetry with the
/// finite-difference check; the reduced model is linear, so only `vx` and
/// the parameters enter the matrices.
pub fn jacobians(
    op_state: &DVector<f64>,
    op_steer: f64,
    params: &VehicleParams,
    vx: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if vx <= 0.0 {
        return Err(Error::Domain(format!("jacobians require vx > 0, got {vx}")));
    }
    if op_state.len() != CTRL_STATES {
        return Err(Error::InvalidInput(format!(
            "operating state must have length {CTRL_STATES}, got {}",
            op_state.len()
        )));
    }
    let _ = op_steer;
    let cf = params.corner_stiffness_front;
    let cr = params.corner_stiffness_rear;
    let a = params.cg_to_front;
    let b = params.cg_to_rear;
    let m = params.mass;
    let iz = params.yaw_inertia;

    let mut a_cont = DMatrix::zeros(CTRL_STATES, CTRL_STATES);
    // d(dvy)
    a_cont[(0, 0)] = -2.0 * (cf + cr) / (m * vx);
    a_cont[(0, 2)] = -vx - 2.0 * (a * cf - b * cr) / (m * vx);
    // d(dheading)
    a_cont[(1, 2)] = 1.0;
    // d(dyaw_rate)
    a_cont[(2, 0)] = -2.0 * (a * cf - b * cr) / (iz * vx);
    a_cont[(2, 2)] = -2.0 * (a * a * cf + b * b * cr) / (iz * vx);
    // d(dy)
    a_cont[(3, 0)] = 1.0;
    a_cont[(3, 1)] = vx;

    let mut b_cont = DMatrix::zeros(CTRL_STATES, CTRL_INPUTS);
    b_cont[(0, 0)] = 2.0 * cf / m;
    b_cont[(2, 0)] = 2.0 * a * cf / iz;

    Ok((a_cont, b_cont))
}

/// Output matrix selecting \[heading, y\] from the reduced state.
pub fn output_matrix() -> DMatrix<f64> {
    let mut c = DMatrix::zeros(CTRL_OUTPUTS, CTRL_STATES);
    c[(0, 1)] = 1.0;
    c[(1, 3)] = 1.0;
    c
}

/// Continuous pair with its forward-Euler discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a_cont: DMatrix<f64>,
    pub b_cont: DMatrix<f64>,
    pub a_disc: DMatrix<f64>,
    pub b_disc: DMatrix<f64>,
    pub dt: f64,
    pub states: usize,
    pub inputs: usize,
}

/// Forward-Euler discretization: A_d = I + dt*A, B_d = dt*B.
pub fn discretize(a_cont: &DMatrix<f64>, b_cont: &DMatrix<f64>, dt: f64) -> Result<LinearModel> {
    let n = a_cont.nrows();
    if a_cont.ncols() != n || b_cont.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "jacobian dimensions inconsistent: A is {}x{}, B is {}x{}",
            a_cont.nrows(),
            a_cont.ncols(),
            b_cont.nrows(),
            b_cont.ncols()
        )));
    }
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::InvalidInput(format!(
            "sample time must be finite and non-negative, got {dt}"
        )));
    }
    let a_disc = DMatrix::identity(n, n) + a_cont * dt;
    let b_disc = b_cont * dt;
    Ok(LinearModel {
        a_cont: a_cont.clone(),
        b_cont: b_cont.clone(),
        a_disc,
        b_disc,
        dt,
        states: n,
        inputs: b_cont.ncols(),
    })
}

/// Discrete model augmented with the previous input so the decision
/// variable becomes the input increment.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    /// (n+m)x(n+m) transition [\[A, B\], \[0, I\]].
    pub a: DMatrix<f64>,
    /// (n+m)xm increment map [\[B\], \[I\]].
    pub b: DMatrix<f64>,
    /// px(n+m) output map \[C, 0\].
    pub c: DMatrix<f64>,
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl AugmentedModel {
    /// Stack the reduced state with the previous input.
    pub fn augmented_state(x: &DVector<f64>, u_prev: f64) -> DVector<f64> {
        let mut xi = DVector::zeros(x.len() + 1);
        xi.rows_mut(0, x.len()).copy_from(x);
        xi[x.len()] = u_prev;
        xi
    }
}

/// Build the increment-form augmented model from a discrete (A, B, C).
pub fn augment(
    a_disc: &DMatrix<f64>,
    b_disc: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<AugmentedModel> {
    let n = a_disc.nrows();
    let m = b_disc.ncols();
    let p = c.nrows();
    if a_disc.ncols() != n || b_disc.nrows() != n || c.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "augment dimension mismatch: A {}x{}, B {}x{}, C {}x{}",
            a_disc.nrows(),
            a_disc.ncols(),
            b_disc.nrows(),
            b_disc.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let mut a = DMatrix::zeros(n + m, n + m);
    a.view_mut((0, 0), (n, n)).copy_from(a_disc);
    a.view_mut((0, n), (n, m)).copy_from(b_disc);
    a.view_mut((n, n), (m, m))
        .copy_from(&DMatrix::identity(m, m));

    let mut b = DMatrix::zeros(n + m, m);
    b.view_mut((0, 0), (n, m)).copy_from(b_disc);
    b.view_mut((n, 0), (m, m))
        .copy_from(&DMatrix::identity(m, m));

    let mut c_aug = DMatrix::zeros(p, n + m);
    c_aug.view_mut((0, 0), (p, n)).copy_from(c);

    Ok(AugmentedModel {
        a,
        b,
        c: c_aug,
        states: n + m,
        inputs: m,
        outputs: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn central_difference_jacobians(
        x0: &DVector<f64>,
        steer0: f64,
        params: &VehicleParams,
        vx: f64,
        h: f64,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = x0.len();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut plus = x0.clone();
            let mut minus = x0.clone();
            plus[j] += h;
            minus[j] -= h;
            let fp = reduced_dynamics(&plus, steer0, params, vx).unwrap();
            let fm = reduced_dynamics(&minus, steer0, params, vx).unwrap();
            for i in 0..n {
                a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let fp = reduced_dynamics(x0, steer0 + h, params, vx).unwrap();
        let fm = reduced_dynamics(x0, steer0 - h, params, vx).unwrap();
        let mut b = DMatrix::zeros(n, 1);
        for i in 0..n {
            b[(i, 0)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        (a, b)
    }

    #[test]
    fn controller_state_projection() {
        let zero = VehicleState {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            vx: 0.0,
            vy: 0.0,
            yaw_rate: 0.0,
        };
        assert_eq!(controller_state(&zero), DVector::zeros(4));

        let s = VehicleState {
            x: 123.0,
            y: 2.0,
            heading: 0.1,
            vx: 20.0,
            vy: 0.5,
            yaw_rate: 0.05,
        };
        let r = controller_state(&s);
        assert_eq!(r.len(), 4);
        assert_eq!(r.as_slice(), &[0.5, 0.1, 0.05, 2.0]);
    }

    #[test]
    fn jacobian_structural_entries() {
        let p = VehicleParams::default();
        let x = DVector::zeros(4);
        let (a, b) = jacobians(&x, 0.0, &p, 25.0).unwrap();
        // kinematic row: d(dy)/d(heading) = vx, dynamics independent of y
        assert_eq!(a[(3, 1)], 25.0);
        for i in 0..4 {
            assert_eq!(a[(i, 3)], 0.0);
        }
        assert_eq!(b[(1, 0)], 0.0);
        assert!(b[(0, 0)] > 0.0);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let p = VehicleParams::default();
        let mut rng = SeededRng::new(0xacc1);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let vx = rng.range(5.0, 30.0);
            let x = DVector::from_column_slice(&[
                rng.range(-2.0, 2.0),
                rng.range(-0.5, 0.5),
                rng.range(-0.5, 0.5),
                rng.range(-5.0, 5.0),
            ]);
            let steer = rng.range(-0.2, 0.2);
            let (a, b) = jacobians(&x, steer, &p, vx).unwrap();
            let (a_fd, b_fd) = central_difference_jacobians(&x, steer, &p, vx, 1e-6);
            for (got, want) in a.iter().zip(a_fd.iter()) {
                let rel = (got - want).abs() / got.abs().max(want.abs()).max(1.0);
                worst = worst.max(rel);
            }
            for (got, want) in b.iter().zip(b_fd.iter()) {
                let rel = (got - want).abs() / got.abs().max(want.abs()).max(1.0);
                worst = worst.max(rel);
            }
        }
        assert!(worst <= 1e-5, "max relative deviation {worst}");
    }

    #[test]
    fn jacobians_reject_nonpositive_speed() {
        let p = VehicleParams::default();
        let x = DVector::zeros(4);
        assert!(jacobians(&x, 0.0, &p, 0.0).is_err());
        assert!(reduced_dynamics(&x, 0.0, &p, -2.0).is_err());
    }

    #[test]
    fn discretize_formula() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let model = discretize(&a, &b, 0.05).unwrap();
        assert_eq!(
            model.a_disc,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.05, 0.0, 1.0])
        );
        assert_eq!(model.b_disc, DMatrix::from_row_slice(2, 1, &[0.0, 0.05]));

        // dt = 0 collapses to (I, 0)
        let idle = discretize(&a, &b, 0.0).unwrap();
        assert_eq!(idle.a_disc, DMatrix::identity(2, 2));
        assert_eq!(idle.b_disc, DMatrix::zeros(2, 1));

        // zero dynamics stay at identity for any dt
        let zero = DMatrix::zeros(3, 3);
        let bz = DMatrix::zeros(3, 1);
        let idm = discretize(&zero, &bz, 3.7).unwrap();
        assert_eq!(idm.a_disc, DMatrix::identity(3, 3));
    }

    #[test]
    fn discretize_holds_construction_identity() {
        let p = VehicleParams::default();
        let x = DVector::zeros(4);
        let (a, b) = jacobians(&x, 0.0, &p, 20.0).unwrap();
        let model = discretize(&a, &b, 0.02).unwrap();
        let rebuilt = DMatrix::identity(4, 4) + &model.a_cont * model.dt;
        assert_eq!(model.a_disc, rebuilt);
        assert_eq!(model.b_disc, &model.b_cont * model.dt);
    }

    #[test]
    fn augment_structure() {
        let a = DMatrix::from_row_slice(4, 4, &(0..16).map(|v| v as f64).collect::<Vec<_>>());
        let b = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let c = output_matrix();
        let aug = augment(&a, &b, &c).unwrap();
        assert_eq!(aug.a.nrows(), 5);
        for j in 0..4 {
            assert_eq!(aug.a[(4, j)], 0.0);
        }
        assert_eq!(aug.a[(4, 4)], 1.0);
        assert_eq!(aug.b[(4, 0)], 1.0);
        for j in 0..4 {
            assert_eq!(aug.b[(j, 0)], b[(j, 0)]);
        }
        assert_eq!(aug.c.ncols(), 5);
        assert_eq!(aug.c[(0, 4)], 0.0);
        assert_eq!(aug.c[(1, 4)], 0.0);

        let bad = augment(&a, &DMatrix::zeros(3, 1), &c);
        assert!(bad.is_err());
    }

    #[test]
    fn augmented_step_with_zero_increment_holds_input() {
        let p = VehicleParams::default();
        let x = DVector::zeros(4);
        let (a, b) = jacobians(&x, 0.0, &p, 20.0).unwrap();
        let model = discretize(&a, &b, 0.02).unwrap();
        let aug = augment(&model.a_disc, &model.b_disc, &output_matrix()).unwrap();
        let xi = AugmentedModel::augmented_state(
            &DVector::from_column_slice(&[0.1, 0.02, 0.01, 0.5]),
            0.03,
        );
        let next = &aug.a * &xi;
        assert!((next[4] - 0.03).abs() < 1e-15);
    }

    /// Iterating the augmented system with increments must reproduce the
    /// unaugmented pair driven by the accumulated input.
    #[test]
    fn augmentation_equivalence_brute_force() {
        let mut rng = SeededRng::new(0xa06);
        for _ in 0..20 {
            let n = 2 + rng.index(3);
            let a = DMatrix::from_fn(n, n, |_, _| rng.range(-0.5, 0.5));
            let b = DMatrix::from_fn(n, 1, |_, _| rng.range(-0.5, 0.5));
            let c = DMatrix::from_fn(2, n, |_, _| rng.range(-1.0, 1.0));
            let aug = augment(&a, &b, &c).unwrap();

            let x0 = DVector::from_fn(n, |_, _| rng.range(-1.0, 1.0));
            let u0 = rng.range(-0.5, 0.5);
            let increments: Vec<f64> = (0..10).map(|_| rng.range(-0.1, 0.1)).collect();

            let mut xi = AugmentedModel::augmented_state(&x0, u0);
            let mut x = x0.clone();
            let mut u = u0;
            for &du in &increments {
                xi = &aug.a * &xi + &aug.b * DVector::from_element(1, du);
                u += du;
                x = &a * &x + &b * DVector::from_element(1, u);
                for i in 0..n {
                    assert!((xi[i] - x[i]).abs() <= 1e-12, "state drift at {i}");
                }
                assert!((xi[n] - u).abs() <= 1e-12);
            }
        }
    }
}
