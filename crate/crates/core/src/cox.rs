//! Cox proportional-hazards regression by maximum partial likelihood.
//!
//! Only the regression coefficients are estimated; the baseline hazard is
//! never touched. Tied event times use the Breslow approximation, and case
//! weights multiply both the event terms and the risk-set sums, so a subject
//! of integer weight `k` is equivalent to `k` unit-weight copies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Status};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, spd_inverse, spd_solve};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TiePolicy {
    #[default]
    Breslow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxOptions {
    pub ties: TiePolicy,
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the score.
    pub tol: f64,
    pub initial_beta: Option<DVector<f64>>,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self { ties: TiePolicy::Breslow, max_iter: 50, tol: 1e-8, initial_beta: None }
    }
}

/// Relative change in a log-likelihood treated as rounding noise.
pub(crate) const ROUNDING_GAIN: f64 = 1e-14;

/// `‖β‖∞` beyond which the likelihood is declared monotone.
pub const DIVERGENCE_GUARD: f64 = 50.0;
const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit {
    pub beta: DVector<f64>,
    /// Inverse of the negative Hessian at `beta`.
    pub covariance: DMatrix<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the iterates ran past the divergence guard.
    pub monotone_likelihood: bool,
}

impl CoxFit {
    pub fn std_errors(&self) -> DVector<f64> {
        self.covariance.diagonal().map(f64::sqrt)
    }
}

/// Subjects sorted by decreasing follow-up time with centered covariates.
struct RiskSets {
    p: usize,
    time: Vec<f64>,
    event: Vec<bool>,
    weight: Vec<f64>,
    x: Vec<f64>,
}

impl RiskSets {
    fn new(dataset: &Dataset) -> Result<Self> {
        let subjects = dataset.subjects();
        if subjects.iter().any(|s| s.status == Status::Missing) {
            return Err(Error::HasMissingStatus);
        }
        if !subjects.iter().any(|s| s.status == Status::Event && s.weight > 0.0) {
            return Err(Error::NoEvents);
        }
        let p = dataset.n_baseline();
        let n = subjects.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| subjects[b].follow_time.total_cmp(&subjects[a].follow_time));

        let mut center = vec![0.0; p];
        for s in subjects {
            for (c, v) in center.iter_mut().zip(&s.baseline) {
                *c += v;
            }
        }
        center.iter_mut().for_each(|c| *c /= n as f64);

        let mut rs = Self {
            p,
            time: Vec::with_capacity(n),
            event: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
            x: Vec::with_capacity(n * p),
        };
        for &i in &order {
            let s = &subjects[i];
            rs.time.push(s.follow_time);
            rs.event.push(s.status == Status::Event);
            rs.weight.push(s.weight);
            rs.x.extend(s.baseline.iter().zip(&center).map(|(v, c)| v - c));
        }
        Ok(rs)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    fn check_dim(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "beta has length {}, dataset has {} covariates",
                beta.len(),
                self.p
            )));
        }
        Ok(())
    }

    fn loglik(&self, beta: &DVector<f64>) -> f64 {
        self.evaluate(beta, false).0
    }

    /// Log partial likelihood and, when `derivs`, its score and Hessian.
    fn evaluate(&self, beta: &DVector<f64>, derivs: bool) -> (f64, DVector<f64>, DMatrix<f64>) {
        let (n, p) = (self.time.len(), self.p);
        let eta: Vec<f64> = (0..n)
            .map(|i| self.row(i).iter().zip(beta.iter()).map(|(x, b)| x * b).sum())
            .collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut ll = 0.0;
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];
        let mut mean = vec![0.0; p];

        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && self.time[end] == self.time[start] {
                end += 1;
            }
            // The risk set at this time includes every tied subject.
            for j in start..end {
                let r = self.weight[j] * (eta[j] - shift).exp();
                s0 += r;
                if derivs {
                    let xj = self.row(j);
                    for a in 0..p {
                        s1[a] += r * xj[a];
                        for b in 0..=a {
                            s2[a * p + b] += r * xj[a] * xj[b];
                        }
                    }
                }
            }
            let log_s0 = shift + s0.ln();
            let mut dw = 0.0;
            for j in (start..end).filter(|&j| self.event[j]) {
                let w = self.weight[j];
                dw += w;
                ll += w * (eta[j] - log_s0);
                if derivs {
                    for (g, x) in grad.iter_mut().zip(self.row(j)) {
                        *g += w * x;
                    }
                }
            }
            if derivs && dw > 0.0 {
                for a in 0..p {
                    mean[a] = s1[a] / s0;
                    grad[a] -= dw * mean[a];
                }
                for a in 0..p {
                    for b in 0..=a {
                        let v = dw * (s2[a * p + b] / s0 - mean[a] * mean[b]);
                        hess[(a, b)] -= v;
                        if a != b {
                            hess[(b, a)] -= v;
                        }
                    }
                }
            }
            start = end;
        }
        (ll, grad, hess)
    }
}

/// Log partial likelihood at `beta`.
pub fn cox_loglik(dataset: &Dataset, beta: &DVector<f64>, _ties: TiePolicy) -> Result<f64> {
    let rs = RiskSets::new(dataset)?;
    rs.check_dim(beta)?;
    Ok(rs.loglik(beta))
}

/// Analytic score vector and Hessian of the log partial likelihood.
pub fn cox_score_hessian(
    dataset: &Dataset,
    beta: &DVector<f64>,
    _ties: TiePolicy,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let rs = RiskSets::new(dataset)?;
    rs.check_dim(beta)?;
    let (_, g, h) = rs.evaluate(beta, true);
    Ok((g, h))
}

/// Maximizes the partial likelihood by Newton iteration with step-halving.
pub fn cox_fit(dataset: &Dataset, opts: &CoxOptions) -> Result<CoxFit> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let rs = RiskSets::new(dataset)?;
    let mut beta = opts.initial_beta.clone().unwrap_or_else(|| DVector::zeros(rs.p));
    rs.check_dim(&beta)?;

    let (mut ll, mut grad, mut hess) = rs.evaluate(&beta, true);
    let mut iterations = 0;
    let mut converged = false;
    let mut monotone = false;

    loop {
        if max_abs(&grad) < opts.tol {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        let step = spd_solve(&-&hess, &grad).ok_or(Error::SingularHessian)?;
        iterations += 1;
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut cand_ll = rs.loglik(&candidate);
        // Near the optimum the gain drops below what the likelihood can
        // resolve; steps that stay within rounding of it are still accepted.
        let floor = ll - ROUNDING_GAIN * ll.abs().max(1.0);
        let mut halvings = 0;
        while !(cand_ll >= floor) && halvings < MAX_HALVINGS {
            scale *= 0.5;
            candidate = &beta + &step * scale;
            cand_ll = rs.loglik(&candidate);
            halvings += 1;
        }
        if !(cand_ll >= floor) {
            break;
        }
        beta = candidate;
        (ll, grad, hess) = rs.evaluate(&beta, true);
        if max_abs(&beta) > DIVERGENCE_GUARD {
            monotone = true;
            break;
        }
    }

    if converged && max_abs(&beta) > 1.0 {
        // A vanishing score far from the origin can also mean the supremum is
        // at infinity: the likelihood keeps rising along the ray.
        let further = rs.loglik(&(&beta * 2.0));
        if further >= ll - 1e-12 * ll.abs().max(1.0) {
            monotone = true;
            converged = false;
        }
    }

    let covariance = match spd_inverse(&-&hess) {
        Some(c) => c,
        None if converged => return Err(Error::SingularHessian),
        None => DMatrix::from_element(rs.p, rs.p, f64::NAN),
    };
    Ok(CoxFit { beta, covariance, loglik: ll, iterations, converged, monotone_likelihood: monotone })
}
