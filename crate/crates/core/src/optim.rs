//! Multirate gradient descent and baseline solvers.
//!
//! Every solver records a [`Trajectory`]: one row per gradient step with the
//! residual `‖∇L(θ)‖` of the iterate after the step, the distance to the known
//! optimum when there is one, and the running count of gradient evaluations.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::spectrum::eigendecompose_symmetric;

/// Iterates whose norm exceeds this multiple of the starting scale abort the
/// run. Multirate runs apply the guard at cycle boundaries only.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// A differentiable loss seen through its gradient.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Write `∇L(θ)` into `out`.
    fn gradient_into(&self, theta: &DVector<f64>, out: &mut DVector<f64>);

    /// The minimiser, when known.
    fn optimum(&self) -> Option<&DVector<f64>> {
        None
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.gradient_into(theta, &mut out);
        out
    }
}

/// Wraps a gradient closure as an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    grad: F,
    optimum: Option<DVector<f64>>,
}

impl<F: Fn(&DVector<f64>, &mut DVector<f64>)> FnObjective<F> {
    pub fn new(dim: usize, grad: F) -> Self {
        Self { dim, grad, optimum: None }
    }

    pub fn with_optimum(mut self, optimum: DVector<f64>) -> Self {
        self.optimum = Some(optimum);
        self
    }
}

impl<F: Fn(&DVector<f64>, &mut DVector<f64>)> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient_into(&self, theta: &DVector<f64>, out: &mut DVector<f64>) {
        (self.grad)(theta, out)
    }

    fn optimum(&self) -> Option<&DVector<f64>> {
        self.optimum.as_ref()
    }
}

/// `L(θ) = ½ θᵀAθ − gᵀθ` with `A` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    a: DMatrix<f64>,
    g: DVector<f64>,
    optimum: DVector<f64>,
    eigenvalues: Vec<f64>,
}

impl QuadraticProblem {
    pub fn new(a: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        if a.nrows() != g.len() {
            return Err(Error::Validation(format!(
                "matrix is {}x{} but g has length {}",
                a.nrows(),
                a.ncols(),
                g.len()
            )));
        }
        let eigen = eigendecompose_symmetric(&a)?;
        let chol = a.clone().cholesky().ok_or(Error::IndefiniteMatrix {
            index: a.nrows() - 1,
            value: *eigen.values.last().unwrap(),
        })?;
        let optimum = chol.solve(&g);
        let resid = (&a * &optimum - &g).norm();
        if resid > 1e-8 * g.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient(format!(
                "direct solve left residual {resid:e} (condition number {:e})",
                eigen.values[0] / eigen.values.last().unwrap()
            )));
        }
        Ok(Self { a, g, optimum, eigenvalues: eigen.values })
    }

    /// `A = diag(values)`.
    pub fn diagonal(values: &[f64], g: DVector<f64>) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)), g)
    }

    /// `A = V diag(values) Vᵀ` for an orthonormal `basis`.
    pub fn from_eigen(values: &[f64], basis: &DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        let diag = DMatrix::from_diagonal(&DVector::from_column_slice(values));
        let a = basis * diag * basis.transpose();
        let a = (&a + a.transpose()) * 0.5;
        Self::new(a, g)
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.g
    }

    /// Eigenvalues of `A`, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sigma_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn sigma_min(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn loss(&self, theta: &DVector<f64>) -> f64 {
        0.5 * theta.dot(&(&self.a * theta)) - self.g.dot(theta)
    }

    /// `‖Aθ − g‖`.
    pub fn residual(&self, theta: &DVector<f64>) -> f64 {
        (&self.a * theta - &self.g).norm()
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn gradient_into(&self, theta: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.a, theta, 0.0);
        *out -= &self.g;
    }

    fn optimum(&self) -> Option<&DVector<f64>> {
        Some(&self.optimum)
    }
}

/// One recorded step.
///
/// Row 0 describes the starting point. For multirate runs `outer` is the
/// 1-based cycle, `scale` the zero-based scale index and `inner` the 1-based
/// step within that scale's block; single-rate solvers use `outer = step`,
/// `scale = 0`, `inner = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub outer: usize,
    pub scale: usize,
    pub inner: usize,
    pub residual: f64,
    pub error: Option<f64>,
    pub grad_evals: usize,
}

/// CSV header for [`Trajectory::write_csv`].
pub const TRAJECTORY_HEADER: &str = "step,outer,scale,inner,residual,error,grad_evals";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }

    /// Gradient evaluations used when the residual first dropped to `tol`.
    pub fn evals_to(&self, tol: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.residual <= tol).map(|r| r.grad_evals)
    }

    /// Errors at the start and at the end of every completed outer cycle.
    pub fn cycle_errors(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (k, row) in self.rows.iter().enumerate() {
            let boundary = k == 0 || self.rows.get(k + 1).is_none_or(|next| next.outer != row.outer);
            if boundary {
                if let Some(e) = row.error {
                    out.push(e);
                }
            }
        }
        out
    }

    /// Ratios of consecutive entries of [`Trajectory::cycle_errors`].
    pub fn cycle_contractions(&self) -> Vec<f64> {
        self.cycle_errors().windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRAJECTORY_HEADER.split(','))?;
        for r in &self.rows {
            w.write_record([
                r.step.to_string(),
                r.outer.to_string(),
                r.scale.to_string(),
                r.inner.to_string(),
                format!("{:e}", r.residual),
                r.error.map(|e| format!("{e:e}")).unwrap_or_default(),
                r.grad_evals.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv(std::io::BufWriter::new(file))
    }
}

/// Final iterate and recorded history of a run.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub theta: DVector<f64>,
    pub trajectory: Trajectory,
    /// True when the residual reached the tolerance.
    pub converged: bool,
}

impl SolveResult {
    pub fn grad_evals(&self) -> usize {
        self.trajectory.last().map_or(0, |r| r.grad_evals)
    }
}

struct Recorder<'a> {
    optimum: Option<&'a DVector<f64>>,
    limit: f64,
    trajectory: Trajectory,
}

impl<'a> Recorder<'a> {
    fn new(optimum: Option<&'a DVector<f64>>, theta0: &DVector<f64>) -> Self {
        Self { optimum, limit: DIVERGENCE_FACTOR * theta0.norm().max(1.0), trajectory: Trajectory::default() }
    }

    fn push(&mut self, theta: &DVector<f64>, residual: f64, idx: (usize, usize, usize, usize), evals: usize) -> Result<()> {
        self.push_at(theta, residual, idx, evals, true)
    }

    /// `boundary = false` skips the growth guard: within a multirate cycle the
    /// fast-scale error is amplified by the slow rates before being damped.
    fn push_at(
        &mut self,
        theta: &DVector<f64>,
        residual: f64,
        idx: (usize, usize, usize, usize),
        evals: usize,
        boundary: bool,
    ) -> Result<()> {
        let (step, outer, scale, inner) = idx;
        let norm = theta.norm();
        if !norm.is_finite() || !residual.is_finite() || (boundary && norm > self.limit) {
            return Err(Error::Divergence { step });
        }
        let error = self.optimum.map(|opt| (theta - opt).norm());
        self.trajectory.rows.push(TrajectoryRow { step, outer, scale, inner, residual, error, grad_evals: evals });
        Ok(())
    }
}

/// Options for [`mrgd`].
#[derive(Debug, Clone, Default)]
pub struct MrgdOptions {
    /// Stop at the first outer-cycle boundary with residual at or below `tol`.
    pub tol: f64,
    /// Order in which scale blocks are visited within a cycle; defaults to
    /// `m-1, m-2, …, 0`.
    pub sweep: Option<Vec<usize>>,
}

impl MrgdOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, sweep: None }
    }
}

/// Multirate gradient descent: `schedule.outer` cycles, each applying
/// `counts[i]` steps of size `etas[i]` for every scale `i`.
pub fn mrgd<O: Objective + ?Sized>(
    objective: &O,
    schedule: &Schedule,
    theta0: &DVector<f64>,
    options: &MrgdOptions,
) -> Result<SolveResult> {
    let d = objective.dim();
    if theta0.len() != d {
        return Err(Error::Validation(format!("theta0 has length {}, expected {d}", theta0.len())));
    }
    if theta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("theta0 has non-finite entries".into()));
    }
    let m = schedule.num_scales();
    let sweep: Vec<usize> = match &options.sweep {
        Some(order) => {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..m).collect::<Vec<_>>() {
                return Err(Error::Validation(format!("sweep {order:?} is not a permutation of 0..{m}")));
            }
            order.clone()
        }
        None => (0..m).rev().collect(),
    };

    let mut theta = theta0.clone();
    let mut grad = DVector::zeros(d);
    objective.gradient_into(&theta, &mut grad);
    let mut evals = 1;
    let mut rec = Recorder::new(objective.optimum(), theta0);
    rec.push(&theta, grad.norm(), (0, 0, 0, 0), evals)?;
    let mut converged = grad.norm() <= options.tol;

    let mut step = 0;
    for k in 1..=schedule.outer {
        if converged {
            break;
        }
        for (pos, &i) in sweep.iter().enumerate() {
            let eta = schedule.etas[i];
            for l in 1..=schedule.counts[i] {
                step += 1;
                theta.axpy(-eta, &grad, 1.0);
                objective.gradient_into(&theta, &mut grad);
                evals += 1;
                let boundary = pos + 1 == sweep.len() && l == schedule.counts[i];
                rec.push_at(&theta, grad.norm(), (step, k, i, l), evals, boundary)?;
            }
        }
        converged = grad.norm() <= options.tol;
    }
    Ok(SolveResult { theta, trajectory: rec.trajectory, converged })
}

/// Baseline methods for quadratic problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Baseline {
    /// `θ ← θ − lr ∇L(θ)`.
    Gd { lr: f64 },
    /// Polyak momentum `θ ← θ − lr ∇L(θ) + momentum (θ − θ_prev)`.
    HeavyBall { lr: f64, momentum: f64 },
    /// Constant-momentum Nesterov: gradient taken at the extrapolated point.
    Nesterov { lr: f64, momentum: f64 },
    /// Chebyshev semi-iteration on the interval `[sigma_min, sigma_max]`.
    Chebyshev { sigma_min: f64, sigma_max: f64 },
    /// Conjugate gradients.
    Cg,
}

impl Baseline {
    /// Heavy ball with `lr = 4/(√L+√μ)²`, `momentum = ((√L−√μ)/(√L+√μ))²`.
    pub fn heavy_ball_tuned(sigma_min: f64, sigma_max: f64) -> Self {
        let (sl, sm) = (sigma_max.sqrt(), sigma_min.sqrt());
        Baseline::HeavyBall { lr: 4.0 / (sl + sm).powi(2), momentum: ((sl - sm) / (sl + sm)).powi(2) }
    }

    /// Nesterov with `lr = 1/L`, `momentum = (√κ−1)/(√κ+1)`.
    pub fn nesterov_tuned(sigma_min: f64, sigma_max: f64) -> Self {
        let root = (sigma_max / sigma_min).sqrt();
        Baseline::Nesterov { lr: 1.0 / sigma_max, momentum: (root - 1.0) / (root + 1.0) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Gd { .. } => "gd",
            Baseline::HeavyBall { .. } => "heavy_ball",
            Baseline::Nesterov { .. } => "nesterov",
            Baseline::Chebyshev { .. } => "chebyshev",
            Baseline::Cg => "cg",
        }
    }
}

/// Stopping and safety settings for [`baseline_solve`].
#[derive(Debug, Clone, Copy)]
pub struct BaselineOptions {
    pub max_steps: usize,
    pub tol: f64,
    /// Skip the `lr ≤ 1/σ_max` check for plain GD.
    pub allow_unsafe_rate: bool,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self { max_steps: 100_000, tol: 1e-8, allow_unsafe_rate: false }
    }
}

/// Run a baseline method on a quadratic problem.
///
/// The residual column is `‖Aθ − g‖` at each iterate; `grad_evals` counts
/// gradient (or matrix-vector) evaluations the method itself needs.
pub fn baseline_solve(
    method: Baseline,
    problem: &QuadraticProblem,
    theta0: &DVector<f64>,
    options: &BaselineOptions,
) -> Result<SolveResult> {
    let d = problem.dim();
    if theta0.len() != d {
        return Err(Error::Validation(format!("theta0 has length {}, expected {d}", theta0.len())));
    }
    let mut rec = Recorder::new(problem.optimum(), theta0);
    let mut theta = theta0.clone();
    let mut grad = problem.gradient(&theta);
    let mut evals = 1;
    rec.push(&theta, grad.norm(), (0, 0, 0, 0), evals)?;
    if grad.norm() <= options.tol {
        return Ok(SolveResult { theta, trajectory: rec.trajectory, converged: true });
    }
    let row = |s: usize| (s, s, 0, 1);

    match method {
        Baseline::Gd { lr } => {
            if !(lr > 0.0) {
                return Err(Error::Validation(format!("gd learning rate must be positive, got {lr}")));
            }
            if !options.allow_unsafe_rate && lr > 1.0 / problem.sigma_max() * (1.0 + 1e-12) {
                return Err(Error::Validation(format!(
                    "gd learning rate {lr} exceeds 1/sigma_max = {}",
                    1.0 / problem.sigma_max()
                )));
            }
            for s in 1..=options.max_steps {
                theta.axpy(-lr, &grad, 1.0);
                problem.gradient_into(&theta, &mut grad);
                evals += 1;
                rec.push(&theta, grad.norm(), row(s), evals)?;
                if grad.norm() <= options.tol {
                    return Ok(SolveResult { theta, trajectory: rec.trajectory, converged: true });
                }
            }
        }
        Baseline::HeavyBall { lr, momentum } => {
            let mut prev = theta.clone();
            for s in 1..=options.max_steps {
                let next = &theta - &grad * lr + (&theta - &prev) * momentum;
                prev = std::mem::replace(&mut theta, next);
                problem.gradient_into(&theta, &mut grad);
                evals += 1;
                rec.push(&theta, grad.norm(), row(s), evals)?;
                if grad.norm() <= options.tol {
                    return Ok(SolveResult { theta, trajectory: rec.trajectory, converged: true });
                }
            }
        }
        Baseline::Nesterov { lr, momentum } => {
            let mut prev = theta.clone();
            for s in 1..=options.max_steps {
                let look = &theta + (&theta - &prev) * momentum;
                problem.gradient_into(&look, &mut grad);
                evals += 1;
                let next = look - &grad * lr;
                prev = std::mem::replace(&mut theta, next);
                let resid = problem.residual(&theta);
                rec.push(&theta, resid, row(s), evals)?;
                if resid <= options.tol {
                    return Ok(SolveResult { theta, trajectory: rec.trajectory, converged: true });
                }
            }
        }
        Baseline::Chebyshev { sigma_min, sigma_max } => {
            if !(sigma_min > 0.0 && sigma_max >= sigma_min) {
                return Err(Error::Validation(format!(
                    "chebyshev needs 0 < sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}]"
                )));
            }
            let center = 0.5 * (sigma_max + sigma_min);
            let half_width = 0.5 * (sigma_max - sigma_min);
            let mut resid = -&grad;
            let mut dir = DVector::zeros(d);
            let mut alpha = 0.0;
            for s in 1..=options.max_steps {
                if s == 1 {
                    dir.copy_from(&resid);
                    alpha = 1.0 / center;
                } else {
                    let beta = if s == 2 {
                        0.5 * (half_width * alpha).powi(2)
                    } else {
                        (0.5 * half_width * alpha).powi(2)
                    };
                    alpha = 1.0 / (center - beta / alpha);
                    dir = &resid + dir * beta;
                }
                theta.axpy(alpha, &dir, 1.0);
                problem.gradient_into(&theta, &mut grad);
                evals += 1;
                resid = -&grad;
                rec.push(&theta, grad.norm(), row(s), evals)?;
                if grad.norm() <= options.tol {
                    return Ok(SolveResult { theta, trajectory: rec.trajectory, converged: true });
                }
            }
        }
        Baseline::Cg => {
            let a = problem.matrix();
            let mut r = -&grad;
            let mut p = r.clone();
            let mut rr = r.dot(&r);
            let mut ap = DVector::zeros(d);
            for s in 1..=options.max_steps {
                ap.gemv(1.0, a, &p, 0.0);
                evals += 1;
                let curvature = p.dot(&ap);
                if !(curvature > 0.0) {
                    return Err(Error::NumericalBreakdown {
                        step: s,
                        reason: format!("non-positive curvature {curvature:e} along search direction"),
                    });
                }
                let alpha = rr / curvature;
                theta.axpy(alpha, &p, 1.0);
                r.axpy(-alpha, &ap, 1.0);
                let resid = problem.residual(&theta);
                rec.push(&theta, resid, row(s), evals)?;
                if resid <= options.tol {
                    return Ok(SolveResult { theta, trajectory: rec.trajectory, converged: true });
                }
                let rr_next = r.dot(&r);
                if rr_next == 0.0 {
                    break;
                }
                p = &r + &p * (rr_next / rr);
                rr = rr_next;
            }
        }
    }
    Ok(SolveResult { theta, trajectory: rec.trajectory, converged: false })
}

/// `ln |Π_j (1 − η_j λ)^{n_j}|`: the log-amplification of one cycle on an
/// eigenvector with eigenvalue `λ`.
pub fn cycle_log_gain(lambda: f64, schedule: &Schedule) -> f64 {
    schedule
        .etas
        .iter()
        .zip(&schedule.counts)
        .map(|(eta, &n)| n as f64 * (1.0 - eta * lambda).abs().ln())
        .sum()
}

/// Exact `‖S‖₂` for the cycle operator `S = Π_j (I − η_j A)^{n_j}`.
///
/// `S` is a polynomial in `A`, so its norm is the largest `|p(λ)|` over the
/// eigenvalues of `A`.
pub fn error_operator_norm(eigenvalues: &[f64], schedule: &Schedule) -> f64 {
    eigenvalues
        .iter()
        .map(|&lambda| cycle_log_gain(lambda, schedule).exp())
        .fold(0.0, f64::max)
}
