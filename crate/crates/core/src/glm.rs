//! Logistic and Poisson regression.
//!
//! The logistic model is fit by maximum likelihood or, with a Cauchy prior
//! on every coefficient, by maximum a posteriori. Posterior draws use the
//! normal approximation centered at the mode with the inverse negative
//! Hessian of the log posterior as covariance. The Poisson model uses a log
//! link with a fixed per-row offset, typically `log(follow-up time)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::cox::ROUNDING_GAIN;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, spd_cholesky, spd_inverse, spd_solve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Logistic,
    PoissonLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorKind {
    None,
    Cauchy,
}

/// Independent prior on every coefficient, intercept included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub center: f64,
    pub scale: f64,
}

impl PriorSpec {
    pub const fn none() -> Self {
        Self { kind: PriorKind::None, center: 0.0, scale: 1.0 }
    }

    /// Cauchy(0, 2.5).
    pub const fn weakly_informative() -> Self {
        Self { kind: PriorKind::Cauchy, center: 0.0, scale: 2.5 }
    }

    pub fn cauchy(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("Cauchy scale must be positive, got {scale}")));
        }
        Ok(Self { kind: PriorKind::Cauchy, center: 0.0, scale })
    }

    fn log_density(&self, theta: f64) -> f64 {
        match self.kind {
            PriorKind::None => 0.0,
            PriorKind::Cauchy => {
                let z = (theta - self.center) / self.scale;
                -(std::f64::consts::PI * self.scale).ln() - (z * z).ln_1p()
            }
        }
    }

    fn d1(&self, theta: f64) -> f64 {
        match self.kind {
            PriorKind::None => 0.0,
            PriorKind::Cauchy => {
                let d = theta - self.center;
                -2.0 * d / (self.scale * self.scale + d * d)
            }
        }
    }

    /// Negative second derivative of the log density. Negative in the tails.
    fn curvature(&self, theta: f64) -> f64 {
        match self.kind {
            PriorKind::None => 0.0,
            PriorKind::Cauchy => {
                let (s2, d2) = (self.scale * self.scale, (theta - self.center).powi(2));
                2.0 * (s2 - d2) / (s2 + d2).powi(2)
            }
        }
    }

    /// A positive curvature that majorizes the log density's.
    fn surrogate_curvature(&self, theta: f64) -> f64 {
        match self.kind {
            PriorKind::None => 0.0,
            PriorKind::Cauchy => 2.0 / (self.scale * self.scale + (theta - self.center).powi(2)),
        }
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::weakly_informative()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50 }
    }
}

pub const LOGISTIC_DIVERGENCE_GUARD: f64 = 100.0;
const FALLBACK_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub coef: DVector<f64>,
    /// Inverse observed information of the (penalized) log-likelihood.
    pub covariance: DMatrix<f64>,
    pub family: Family,
    /// Unpenalized log-likelihood at `coef`.
    pub loglik: f64,
    /// Objective actually maximized: log-likelihood plus log prior.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Numerically safe `exp(t) / (1 + exp(t))`.
pub fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn dot(coef: &DVector<f64>, design: &DMatrix<f64>, row: usize) -> f64 {
    (0..coef.len()).map(|j| coef[j] * design[(row, j)]).sum()
}

/// Success probability `expit(coef'x)`.
pub fn predict_prob(coef: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(coef.len(), x.len());
    expit(coef.iter().zip(x).map(|(c, v)| c * v).sum())
}

/// Expected events per unit person-time, `exp(coef'x)`.
pub fn incidence_rate(coef: &[f64], x_star: &[f64]) -> f64 {
    debug_assert_eq!(coef.len(), x_star.len());
    coef.iter().zip(x_star).map(|(c, v)| c * v).sum::<f64>().exp()
}

struct Eval {
    loglik: f64,
    objective: f64,
    grad: DVector<f64>,
    info: DMatrix<f64>,
    surrogate: DMatrix<f64>,
}

/// Family-specific pieces: log-likelihood contribution, residual and weight
/// of one row as functions of its linear predictor.
trait Likelihood {
    fn row(&self, i: usize, eta: f64) -> (f64, f64, f64);
}

struct LogisticLik<'a>(&'a [bool]);

impl Likelihood for LogisticLik<'_> {
    fn row(&self, i: usize, eta: f64) -> (f64, f64, f64) {
        let p = expit(eta);
        let y = if self.0[i] { 1.0 } else { 0.0 };
        (y * eta - softplus(eta), y - p, p * (1.0 - p))
    }
}

struct PoissonLik<'a> {
    y: &'a [u32],
    offset: &'a [f64],
}

impl Likelihood for PoissonLik<'_> {
    fn row(&self, i: usize, eta: f64) -> (f64, f64, f64) {
        let lin = eta + self.offset[i];
        let mu = lin.exp();
        let y = self.y[i] as f64;
        (y * lin - mu - ln_gamma(y + 1.0), y - mu, mu)
    }
}

fn evaluate<L: Likelihood>(design: &DMatrix<f64>, lik: &L, prior: &PriorSpec, coef: &DVector<f64>, derivs: bool) -> Eval {
    let (n, k) = design.shape();
    let mut loglik = 0.0;
    let mut grad = DVector::zeros(k);
    let mut info = DMatrix::zeros(k, k);
    for i in 0..n {
        let (l, r, w) = lik.row(i, dot(coef, design, i));
        loglik += l;
        if derivs {
            for a in 0..k {
                let xa = design[(i, a)];
                grad[a] += r * xa;
                for b in 0..=a {
                    info[(a, b)] += w * xa * design[(i, b)];
                }
            }
        }
    }
    let log_prior: f64 = coef.iter().map(|&c| prior.log_density(c)).sum();
    let mut surrogate = DMatrix::zeros(0, 0);
    if derivs {
        for a in 0..k {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        surrogate = info.clone();
        for j in 0..k {
            grad[j] += prior.d1(coef[j]);
            info[(j, j)] += prior.curvature(coef[j]);
            surrogate[(j, j)] += prior.surrogate_curvature(coef[j]);
        }
    }
    Eval { loglik, objective: loglik + log_prior, grad, info, surrogate }
}

fn fit_newton<L: Likelihood>(
    design: &DMatrix<f64>,
    lik: &L,
    prior: &PriorSpec,
    start: DVector<f64>,
    opts: &GlmOptions,
    family: Family,
) -> Result<GlmFit> {
    let mut coef = start;
    let mut cur = evaluate(design, lik, prior, &coef, true);
    let mut iterations = 0;
    let mut converged = false;
    let mut diverged = false;
    let budget = opts.max_iter + FALLBACK_ITERATIONS;

    loop {
        if max_abs(&cur.grad) < opts.tol {
            converged = true;
            break;
        }
        if iterations == budget {
            break;
        }
        // Plain Newton first; the damped majorizer step takes over when the
        // Hessian is indefinite or the Newton budget is spent.
        let newton = if iterations < opts.max_iter { spd_solve(&cur.info, &cur.grad) } else { None };
        let step = match newton {
            Some(s) => s,
            None => spd_solve(&cur.surrogate, &cur.grad).ok_or(Error::SingularInformation)?,
        };
        iterations += 1;
        let mut scale = 1.0;
        let mut candidate = &coef + &step;
        let mut obj = evaluate(design, lik, prior, &candidate, false).objective;
        let floor = cur.objective - ROUNDING_GAIN * cur.objective.abs().max(1.0);
        let mut halvings = 0;
        while !(obj >= floor) && halvings < MAX_HALVINGS {
            scale *= 0.5;
            candidate = &coef + &step * scale;
            obj = evaluate(design, lik, prior, &candidate, false).objective;
            halvings += 1;
        }
        if !(obj >= floor) {
            break;
        }
        coef = candidate;
        cur = evaluate(design, lik, prior, &coef, true);
        if max_abs(&coef) > LOGISTIC_DIVERGENCE_GUARD {
            diverged = true;
            break;
        }
    }
    if converged && max_abs(&coef) > 1.0 {
        // A vanishing gradient far from the origin can also mean the
        // supremum is at infinity: the objective keeps rising along the ray.
        let further = evaluate(design, lik, prior, &(&coef * 2.0), false).objective;
        diverged = further >= cur.objective - 1e-12 * cur.objective.abs().max(1.0);
    }
    converged &= !diverged;

    let covariance = match spd_inverse(&cur.info) {
        Some(c) => c,
        None if converged => return Err(Error::SingularInformation),
        None => DMatrix::from_element(coef.len(), coef.len(), f64::NAN),
    };
    Ok(GlmFit {
        coef,
        covariance,
        family,
        loglik: cur.loglik,
        objective: cur.objective,
        iterations,
        converged,
    })
}

fn check_rows(design: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if design.nrows() != n {
        return Err(Error::DimensionMismatch(format!("design has {} rows, {what} has {n}", design.nrows())));
    }
    if design.nrows() == 0 || design.ncols() == 0 {
        return Err(Error::InvalidArgument("design must be non-empty".into()));
    }
    Ok(())
}

/// Logistic regression by Newton iteration with step-halving.
pub fn logistic_fit(design: &DMatrix<f64>, response: &[bool], prior: &PriorSpec, opts: &GlmOptions) -> Result<GlmFit> {
    check_rows(design, response.len(), "response")?;
    let start = DVector::zeros(design.ncols());
    fit_newton(design, &LogisticLik(response), prior, start, opts, Family::Logistic)
}

/// Penalized log-likelihood of the logistic model (prior term included).
pub fn logistic_objective(design: &DMatrix<f64>, response: &[bool], prior: &PriorSpec, coef: &DVector<f64>) -> f64 {
    evaluate(design, &LogisticLik(response), prior, coef, false).objective
}

pub fn logistic_score(design: &DMatrix<f64>, response: &[bool], prior: &PriorSpec, coef: &DVector<f64>) -> DVector<f64> {
    evaluate(design, &LogisticLik(response), prior, coef, true).grad
}

/// Poisson regression with log link and fixed offset.
pub fn poisson_fit(design: &DMatrix<f64>, response: &[u32], offset: &[f64], opts: &GlmOptions) -> Result<GlmFit> {
    check_rows(design, response.len(), "response")?;
    check_rows(design, offset.len(), "offset")?;
    if offset.iter().any(|o| !o.is_finite()) {
        return Err(Error::InvalidArgument("offsets must be finite".into()));
    }
    let mut start = DVector::zeros(design.ncols());
    // Start the intercept at the crude rate when the first column is constant one.
    let total: f64 = response.iter().map(|&y| y as f64).sum();
    if total > 0.0 && design.column(0).iter().all(|&v| v == 1.0) {
        let exposure: f64 = offset.iter().map(|o| o.exp()).sum();
        start[0] = (total / exposure).ln();
    }
    let lik = PoissonLik { y: response, offset };
    fit_newton(design, &lik, &PriorSpec::none(), start, opts, Family::PoissonLog)
}

pub fn poisson_loglik(design: &DMatrix<f64>, response: &[u32], offset: &[f64], coef: &DVector<f64>) -> f64 {
    evaluate(design, &PoissonLik { y: response, offset }, &PriorSpec::none(), coef, false).loglik
}

pub fn poisson_score(design: &DMatrix<f64>, response: &[u32], offset: &[f64], coef: &DVector<f64>) -> DVector<f64> {
    evaluate(design, &PoissonLik { y: response, offset }, &PriorSpec::none(), coef, true).grad
}

/// Smallest ridge used when a covariance is not numerically positive definite.
const DRAW_JITTER: f64 = 1e-12;

/// One draw from the normal approximation to the coefficient posterior.
pub fn posterior_draw<R: Rng + ?Sized>(fit: &GlmFit, rng: &mut R) -> Result<DVector<f64>> {
    if fit.family != Family::Logistic {
        return Err(Error::WrongFamily { expected: "logistic" });
    }
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let k = fit.coef.len();
    let chol = spd_cholesky(&fit.covariance)
        .or_else(|| spd_cholesky(&(&fit.covariance + DMatrix::identity(k, k) * DRAW_JITTER)))
        .ok_or(Error::SingularInformation)?;
    let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok(&fit.coef + chol.l() * z)
}
