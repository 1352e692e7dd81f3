//! Levenberg-Marquardt nonlinear least squares.
//!
//! Minimizes `SSE(θ) = Σ r_i(θ)²` by repeatedly solving the damped normal
//! equations
//!
//! ```text
//! (JᵀJ + μI) δ = −Jᵀr
//! ```
//!
//! For small `μ` the step is the Gauss-Newton step; as `μ` grows it turns
//! into a short steepest-descent step `−Jᵀr / μ`. A step is accepted only if
//! it strictly lowers the SSE, after which `μ` shrinks; a rejected step grows
//! `μ` and is retried from the same parameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal jitter tried, in order, when the damped normal matrix fails to
/// factorize.
pub const JITTER_LADDER: [f64; 3] = [1e-12, 1e-9, 1e-6];

/// A residual vector and its Jacobian as functions of a parameter vector.
///
/// `jacobian` must return a `residual_count × param_count` matrix whose
/// entry `(i, j)` is `∂r_i/∂θ_j`.
pub trait LeastSquaresProblem {
    fn param_count(&self) -> usize;

    fn residual_count(&self) -> usize;

    fn residuals(&self, params: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64>;

    /// Evaluates both at once. Override when the two share work.
    fn residuals_and_jacobian(&self, params: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        (self.residuals(params), self.jacobian(params))
    }
}

/// Adapter turning a pair of closures into a [`LeastSquaresProblem`].
pub struct FnProblem<R, J> {
    param_count: usize,
    residual_count: usize,
    residual_fn: R,
    jacobian_fn: J,
}

impl<R, J> FnProblem<R, J>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    pub fn new(param_count: usize, residual_count: usize, residual_fn: R, jacobian_fn: J) -> Self {
        Self {
            param_count,
            residual_count,
            residual_fn,
            jacobian_fn,
        }
    }
}

impl<R, J> LeastSquaresProblem for FnProblem<R, J>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    fn param_count(&self) -> usize {
        self.param_count
    }

    fn residual_count(&self) -> usize {
        self.residual_count
    }

    fn residuals(&self, params: &DVector<f64>) -> DVector<f64> {
        (self.residual_fn)(params)
    }

    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64> {
        (self.jacobian_fn)(params)
    }
}

/// Damping schedule and stopping knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub mu_init: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    pub mu_max: f64,
    pub max_epochs: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            mu_init: 1e-3,
            mu_increase: 10.0,
            mu_decrease: 0.1,
            mu_max: 1e10,
            max_epochs: 1000,
            gradient_tol: 1e-7,
            step_tol: 1e-12,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let non_negative = |x: f64| x.is_finite() && x >= 0.0;
        if !positive(self.mu_init) {
            return Err(Error::Config(format!("mu_init must be positive, got {}", self.mu_init)));
        }
        if !positive(self.mu_max) || self.mu_init > self.mu_max {
            return Err(Error::Config(format!(
                "mu_max must be positive and at least mu_init, got {}",
                self.mu_max
            )));
        }
        if !(self.mu_increase.is_finite() && self.mu_increase > 1.0) {
            return Err(Error::Config(format!(
                "mu_increase must be > 1, got {}",
                self.mu_increase
            )));
        }
        if !(self.mu_decrease > 0.0 && self.mu_decrease < 1.0) {
            return Err(Error::Config(format!(
                "mu_decrease must lie in (0, 1), got {}",
                self.mu_decrease
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !non_negative(self.gradient_tol) || !non_negative(self.step_tol) {
            return Err(Error::Config("tolerances must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    GradientTol,
    StepTol,
    MuMax,
    MaxEpochs,
    ExternalStop,
}

/// One row of the optimizer trace. Epoch 0 is the initial point; every later
/// epoch is one accepted update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub sse: f64,
    pub mu: f64,
    pub gradient_inf_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    pub final_sse: f64,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub trace: Vec<TraceEntry>,
}

/// State handed to the external stop callback after every trace entry
/// (including the initial point at epoch 0).
#[derive(Debug, Clone, Copy)]
pub struct EpochState<'a> {
    pub epoch: usize,
    pub params: &'a DVector<f64>,
    pub sse: f64,
    pub mu: f64,
    pub gradient_inf_norm: f64,
}

/// Solves `(jtj + μI) x = rhs` by Cholesky factorization, escalating through
/// [`JITTER_LADDER`] when the matrix is not numerically positive definite.
pub fn solve_damped_normal(jtj: &DMatrix<f64>, mu: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = rhs.len();
    if jtj.nrows() != n || jtj.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "normal matrix is {}x{}, right-hand side has length {n}",
            jtj.nrows(),
            jtj.ncols()
        )));
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::InvalidArgument(format!("damping must be positive, got {mu}")));
    }

    for jitter in std::iter::once(0.0).chain(JITTER_LADDER) {
        let mut damped = jtj.clone();
        for i in 0..n {
            damped[(i, i)] += mu + jitter;
        }
        if let Some(chol) = damped.cholesky() {
            let x = chol.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Ok(x);
            }
        }
    }
    Err(Error::SolveFailure)
}

fn checked_eval<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    params: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (r, j) = problem.residuals_and_jacobian(params);
    check_residuals(problem, &r)?;
    if j.nrows() != problem.residual_count() || j.ncols() != problem.param_count() {
        return Err(Error::DimensionMismatch(format!(
            "jacobian is {}x{}, expected {}x{}",
            j.nrows(),
            j.ncols(),
            problem.residual_count(),
            problem.param_count()
        )));
    }
    Ok((r, j))
}

fn check_residuals<P: LeastSquaresProblem + ?Sized>(problem: &P, r: &DVector<f64>) -> Result<()> {
    if r.len() != problem.residual_count() {
        return Err(Error::DimensionMismatch(format!(
            "residual vector has length {}, expected {}",
            r.len(),
            problem.residual_count()
        )));
    }
    Ok(())
}

fn check_params<P: LeastSquaresProblem + ?Sized>(problem: &P, params: &DVector<f64>) -> Result<()> {
    if params.len() != problem.param_count() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has length {}, expected {}",
            params.len(),
            problem.param_count()
        )));
    }
    Ok(())
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// A single damped step `δ` at `params`.
pub fn lm_step<P: LeastSquaresProblem + ?Sized>(problem: &P, params: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
    check_params(problem, params)?;
    let (r, j) = checked_eval(problem, params)?;
    let gradient = j.tr_mul(&r);
    let jtj = j.tr_mul(&j);
    solve_damped_normal(&jtj, mu, &(-gradient))
}

/// Runs the damped iteration from `init_params` until one of the stopping
/// rules in [`StopReason`] fires.
///
/// `external_stop` is called after the initial point and after every accepted
/// epoch; returning `true` ends the fit with [`StopReason::ExternalStop`].
pub fn lm_fit<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    init_params: DVector<f64>,
    config: &LmConfig,
    mut external_stop: Option<&mut dyn FnMut(&EpochState<'_>) -> bool>,
) -> Result<LmOutcome> {
    config.validate()?;
    check_params(problem, &init_params)?;

    let mut params = init_params;
    let mut mu = config.mu_init;
    let mut epoch = 0usize;
    let mut trace = Vec::new();

    let (mut residuals, mut jacobian) = checked_eval(problem, &params)?;
    let mut sse = residuals.norm_squared();
    if !sse.is_finite() {
        return Err(Error::InvalidArgument("initial residuals are not finite".into()));
    }

    let stop_reason = 'epochs: loop {
        let gradient = jacobian.tr_mul(&residuals);
        let gradient_inf_norm = inf_norm(&gradient);
        trace.push(TraceEntry {
            epoch,
            sse,
            mu,
            gradient_inf_norm,
        });

        if let Some(stop) = external_stop.as_deref_mut() {
            let state = EpochState {
                epoch,
                params: &params,
                sse,
                mu,
                gradient_inf_norm,
            };
            if stop(&state) {
                break StopReason::ExternalStop;
            }
        }
        if gradient_inf_norm <= config.gradient_tol {
            break StopReason::GradientTol;
        }
        if epoch >= config.max_epochs {
            break StopReason::MaxEpochs;
        }

        let jtj = jacobian.tr_mul(&jacobian);
        let rhs = -gradient;
        let param_norm = params.norm();
        loop {
            if mu > config.mu_max {
                break 'epochs StopReason::MuMax;
            }
            let step = solve_damped_normal(&jtj, mu, &rhs)?;
            if step.norm() <= config.step_tol * (param_norm + config.step_tol) {
                break 'epochs StopReason::StepTol;
            }
            let candidate = &params + &step;
            let candidate_residuals = problem.residuals(&candidate);
            check_residuals(problem, &candidate_residuals)?;
            let candidate_sse = candidate_residuals.norm_squared();
            if candidate_sse < sse {
                params = candidate;
                sse = candidate_sse;
                mu = (mu * config.mu_decrease).max(f64::MIN_POSITIVE);
                break;
            }
            mu *= config.mu_increase;
        }

        epoch += 1;
        (residuals, jacobian) = checked_eval(problem, &params)?;
    };

    Ok(LmOutcome {
        final_sse: sse,
        params,
        epochs_run: epoch,
        stop_reason,
        trace,
    })
}
