//! Dense strictly convex QP solver for the receding-horizon problem.
//!
//! Minimizes 0.5*x'Hx + g'x subject to per-step box bounds on the input
//! increments and box bounds on their cumulative sums (the absolute input
//! constraint). Both constraint families are stacked into l <= Ax <= u with
//! A = \[I; S\] (S lower-triangular ones) and solved by an over-relaxed ADMM
//! scheme in the style of operator-splitting QP solvers, followed by an
//! active-set polish that solves the equality-constrained KKT system for a
//! high-accuracy certificate. Everything is deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Outcome quality of a QP solve, also reused as the per-tick solver flag
/// in simulation logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// KKT residual within tolerance.
    Converged,
    /// Iteration budget exhausted; best feasible iterate returned.
    Inexact,
    /// No solution produced (log-only flag; `solve_qp` errors instead).
    Failed,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::Inexact => "inexact",
            SolverStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(SolverStatus::Converged),
            "inexact" => Ok(SolverStatus::Inexact),
            "failed" => Ok(SolverStatus::Failed),
            other => Err(Error::Io(format!("unknown solver status '{other}'"))),
        }
    }
}

/// Increment-space QP with box and cumulative-sum constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Symmetric positive definite Hessian.
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    /// Per-step increment bounds.
    pub step_lower: DVector<f64>,
    pub step_upper: DVector<f64>,
    /// Bounds on the running sum of increments; +-infinity disables a row.
    pub cum_lower: DVector<f64>,
    pub cum_upper: DVector<f64>,
}

impl QpProblem {
    /// Box-only problem; the cumulative rows are disabled.
    pub fn boxed(
        hessian: DMatrix<f64>,
        gradient: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Self {
        let n = gradient.len();
        QpProblem {
            hessian,
            gradient,
            step_lower: lower,
            step_upper: upper,
            cum_lower: DVector::from_element(n, f64::NEG_INFINITY),
            cum_upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn dimension(&self) -> usize {
        self.gradient.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.transpose() * &self.hessian * x)[(0, 0)] + self.gradient.dot(x)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dimension();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "hessian is {}x{}, expected {n}x{n}",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        for v in [
            &self.step_lower,
            &self.step_upper,
            &self.cum_lower,
            &self.cum_upper,
        ] {
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "bound vector length {} does not match dimension {n}",
                    v.len()
                )));
            }
        }
        for i in 0..n {
            if self.step_lower[i] > self.step_upper[i] {
                return Err(Error::Infeasible(format!(
                    "empty increment box at index {i}: [{}, {}]",
                    self.step_lower[i], self.step_upper[i]
                )));
            }
        }
        Ok(())
    }

    /// Stacked constraint matrix \[I; S\].
    fn constraint_matrix(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut a = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            for j in 0..=i {
                a[(n + i, j)] = 1.0;
            }
        }
        a
    }

    fn stacked_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let n = self.dimension();
        let mut l = DVector::zeros(2 * n);
        let mut u = DVector::zeros(2 * n);
        for i in 0..n {
            l[i] = self.step_lower[i];
            u[i] = self.step_upper[i];
            l[n + i] = self.cum_lower[i];
            u[n + i] = self.cum_upper[i];
        }
        (l, u)
    }

    /// Per-step windows for the running sum from which every later
    /// constraint can still be met. Errors when the constraint set is empty.
    fn feasible_windows(&self) -> Result<Vec<(f64, f64)>> {
        let n = self.dimension();
        let mut windows = vec![(0.0, 0.0); n];
        let mut lo = self.cum_lower[n - 1];
        let mut hi = self.cum_upper[n - 1];
        windows[n - 1] = (lo, hi);
        for i in (0..n - 1).rev() {
            lo = self.cum_lower[i].max(lo - self.step_upper[i + 1]);
            hi = self.cum_upper[i].min(hi - self.step_lower[i + 1]);
            if lo > hi {
                return Err(Error::Infeasible(format!(
                    "cumulative bounds unreachable from step {i}"
                )));
            }
            windows[i] = (lo, hi);
        }
        // the empty sum starts at zero; step 0 must be able to enter its window
        let lo0 = self.step_lower[0].max(windows[0].0);
        let hi0 = self.step_upper[0].min(windows[0].1);
        if lo0 > hi0 {
            return Err(Error::Infeasible(
                "first increment cannot satisfy cumulative bounds".into(),
            ));
        }
        Ok(windows)
    }

    /// Clamp a candidate onto the constraint set, walking the cumulative
    /// windows forward. The move is at most the candidate's own violation.
    pub fn project_feasible(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let windows = self.feasible_windows()?;
        let n = self.dimension();
        let mut out = DVector::zeros(n);
        let mut cum = 0.0;
        for i in 0..n {
            let mut lo = self.step_lower[i].max(windows[i].0 - cum);
            let mut hi = self.step_upper[i].min(windows[i].1 - cum);
            if lo > hi {
                // only reachable through rounding at window edges
                if lo - hi > 1e-9 {
                    return Err(Error::Infeasible(format!(
                        "projection window collapsed at step {i}"
                    )));
                }
                let mid = 0.5 * (lo + hi);
                lo = mid;
                hi = mid;
            }
            out[i] = x[i].clamp(lo, hi);
            cum += out[i];
        }
        Ok(out)
    }
}

/// Solution with its optimality certificate.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub solution: DVector<f64>,
    pub objective: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    /// max of stationarity, feasibility violation and complementarity.
    pub kkt_residual: f64,
}

/// KKT residual of (x, y) for min 0.5x'Hx + g'x s.t. l <= Ax <= u.
///
/// Multiplier convention: stationarity Hx + g + A'y = 0 with y >= 0 on
/// active upper bounds and y <= 0 on active lower bounds.
pub fn kkt_residual(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    let s = a * x;
    let stationarity = (h * x + g + a.transpose() * y).amax();
    let mut primal: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for i in 0..s.len() {
        primal = primal.max(l[i] - s[i]).max(s[i] - u[i]);
        if y[i] > 0.0 {
            comp = comp.max(y[i].min((u[i] - s[i]).max(0.0)));
        } else if y[i] < 0.0 {
            comp = comp.max((-y[i]).min((s[i] - l[i]).max(0.0)));
        }
    }
    stationarity.max(primal.max(0.0)).max(comp)
}

const SIGMA: f64 = 1e-6;
const RELAXATION: f64 = 1.6;
const CHECK_EVERY: usize = 25;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

pub fn solve_qp(problem: &QpProblem, max_iter: usize, tol: f64) -> Result<QpSolution> {
    solve_qp_warm(problem, max_iter, tol, None)
}

/// Solve with an optional warm-start point (e.g. the shifted previous
/// receding-horizon solution).
pub fn solve_qp_warm(
    problem: &QpProblem,
    max_iter: usize,
    tol: f64,
    warm: Option<&DVector<f64>>,
) -> Result<QpSolution> {
    problem.validate()?;
    problem.feasible_windows()?;
    let n = problem.dimension();
    let a = problem.constraint_matrix();
    let at = a.transpose();
    let (l, u) = problem.stacked_bounds();
    let h = &problem.hessian;
    let g = &problem.gradient;

    let diag_scale = (0..n).map(|i| h[(i, i)].abs()).sum::<f64>() / n as f64;
    let mut rho = (0.1 * diag_scale.max(1e-12)).clamp(RHO_MIN, RHO_MAX);

    let ata = &at * &a;
    let factor = |rho: f64| {
        let k = h + DMatrix::<f64>::identity(n, n) * SIGMA + &ata * rho;
        k.cholesky()
            .ok_or_else(|| Error::InvalidInput("hessian is not positive definite".into()))
    };
    let mut chol = factor(rho)?;

    let mut x = match warm {
        Some(w) if w.len() == n => w.clone(),
        _ => DVector::zeros(n),
    };
    let mut z = &a * &x;
    for i in 0..z.len() {
        z[i] = z[i].clamp(l[i], u[i]);
    }
    let mut y = DVector::zeros(2 * n);

    let mut iterations = 0;
    for k in 1..=max_iter {
        iterations = k;
        let rhs = &x * SIGMA - g + &at * (&z * rho - &y);
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &a * &x_tilde;
        x = &x_tilde * RELAXATION + &x * (1.0 - RELAXATION);
        let z_relaxed = &z_tilde * RELAXATION + &z * (1.0 - RELAXATION);
        let mut z_next = &z_relaxed + &y / rho;
        for i in 0..z_next.len() {
            z_next[i] = z_next[i].clamp(l[i], u[i]);
        }
        y += (&z_relaxed - &z_next) * rho;
        z = z_next;

        if k % CHECK_EVERY == 0 || k == max_iter {
            let r_prim = (&a * &x - &z).amax();
            let r_dual = (h * &x + g + &at * &y).amax();
            let prim_scale = 1.0 + z.amax().max((&a * &x).amax());
            let dual_scale = 1.0 + g.amax().max((h * &x).amax());
            if r_prim <= 1e-4 * prim_scale && r_dual <= 1e-4 * dual_scale {
                if let Some((xp, yp)) = polish(h, g, &a, &l, &u, &y) {
                    if let Ok(xf) = problem.project_feasible(&xp) {
                        let res = kkt_residual(h, g, &a, &l, &u, &xf, &yp);
                        if res <= tol {
                            return Ok(QpSolution {
                                objective: problem.objective(&xf),
                                solution: xf,
                                status: SolverStatus::Converged,
                                iterations: k,
                                kkt_residual: res,
                            });
                        }
                    }
                }
                if let Ok(xf) = problem.project_feasible(&x) {
                    let res = kkt_residual(h, g, &a, &l, &u, &xf, &y);
                    if res <= tol {
                        return Ok(QpSolution {
                            objective: problem.objective(&xf),
                            solution: xf,
                            status: SolverStatus::Converged,
                            iterations: k,
                            kkt_residual: res,
                        });
                    }
                }
            }
            if k % (4 * CHECK_EVERY) == 0 {
                let ratio = ((r_prim / prim_scale).max(1e-16) / (r_dual / dual_scale).max(1e-16))
                    .sqrt()
                    .clamp(0.2, 5.0);
                let candidate = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
                if (candidate / rho - 1.0).abs() > 0.2 {
                    rho = candidate;
                    chol = factor(rho)?;
                }
            }
        }
    }

    let xf = problem.project_feasible(&x)?;
    let res = kkt_residual(h, g, &a, &l, &u, &xf, &y);
    Ok(QpSolution {
        objective: problem.objective(&xf),
        solution: xf,
        status: SolverStatus::Inexact,
        iterations,
        kkt_residual: res,
    })
}

/// Solve the equality-constrained KKT system on the active set implied by
/// the multiplier signs. Returns None unless the result verifies (correct
/// multiplier signs, primal feasibility).
fn polish(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = g.len();
    let rows = a.nrows();
    let mut active: Vec<(usize, f64, bool)> = Vec::new(); // (row, bound, is_upper)
    for i in 0..rows {
        if y[i] > 0.0 && u[i].is_finite() {
            active.push((i, u[i], true));
        } else if y[i] < 0.0 && l[i].is_finite() {
            active.push((i, l[i], false));
        }
    }
    let k = active.len();
    let dim = n + k;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    for (idx, &(row, _, _)) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + idx, j)] = a[(row, j)];
            kkt[(j, n + idx)] = a[(row, j)];
        }
    }
    let mut rhs = DVector::zeros(dim);
    for j in 0..n {
        rhs[j] = -g[j];
    }
    for (idx, &(_, bound, _)) in active.iter().enumerate() {
        rhs[n + idx] = bound;
    }

    let svd = kkt.clone().svd(true, true);
    let sv_max = svd.singular_values.max();
    let eps = sv_max * 1e-13;
    let mut sol = svd.solve(&rhs, eps).ok()?;
    // one round of iterative refinement
    let residual = &rhs - &kkt * &sol;
    if let Ok(corr) = svd.solve(&residual, eps) {
        sol += corr;
    }
    if (&kkt * &sol - &rhs).amax() > 1e-8 * (1.0 + rhs.amax()) {
        return None;
    }

    let x = DVector::from_iterator(n, (0..n).map(|i| sol[i]));
    let mut y_full = DVector::zeros(rows);
    for (idx, &(row, _, is_upper)) in active.iter().enumerate() {
        let lambda = sol[n + idx];
        let sign_tol = 1e-9 * (1.0 + lambda.abs());
        if is_upper && lambda < -sign_tol {
            return None;
        }
        if !is_upper && lambda > sign_tol {
            return None;
        }
        y_full[row] = lambda;
    }
    let s = a * &x;
    for i in 0..rows {
        let tol = 1e-8 * (1.0 + s[i].abs());
        if s[i] < l[i] - tol || s[i] > u[i] + tol {
            return None;
        }
    }
    Some((x, y_full))
}
