//! Probability-weighted Cox comparator.
//!
//! Each subject with a missing indicator is replaced by an event record of
//! weight `p` and a censored record of weight `1 - p`, where `p` is the
//! logistic model's estimated event probability, and a weighted Cox model is
//! fit. The estimator has no convenient closed-form variance, so intervals
//! come from a percentile bootstrap that refits the logistic model on every
//! resample.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;

use crate::cox::{cox_fit, CoxOptions};
use crate::data::{Dataset, Status};
use crate::error::{Error, Result};
use crate::glm::GlmOptions;
use crate::mi::{ImputationModel, ImputationModelSpec};
use crate::rng::{Purpose, Substream};

/// A dataset without missing indicators, built by splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    dataset: Dataset,
    origin: Vec<usize>,
}

impl SplitDataset {
    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// Index in the source dataset of every record.
    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn total_weight(&self) -> f64 {
        self.dataset.subjects().iter().map(|s| s.weight).sum()
    }
}

/// Splits every missing subject into weighted event and censored records.
///
/// Observed subjects come first in their original order, followed by the
/// split pairs in original order. Zero-weight records are dropped.
pub fn split_weighted(dataset: &Dataset, probs: &BTreeMap<usize, f64>) -> Result<SplitDataset> {
    let missing = dataset.missing_indices();
    if probs.len() != missing.len() || missing.iter().any(|i| !probs.contains_key(i)) {
        return Err(Error::CoverageMismatch);
    }
    if let Some((&index, &prob)) = probs.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
        return Err(Error::ProbOutOfRange { index, prob });
    }

    let subjects = dataset.subjects();
    let mut records = Vec::with_capacity(subjects.len() + missing.len());
    let mut origin = Vec::with_capacity(records.capacity());
    for (i, s) in subjects.iter().enumerate().filter(|(_, s)| !s.status.is_missing()) {
        records.push(s.clone());
        origin.push(i);
    }
    for (&i, &p) in probs {
        let s = &subjects[i];
        for (status, w) in [(Status::Event, p), (Status::Censored, 1.0 - p)] {
            if w > 0.0 {
                let mut r = s.clone();
                r.status = status;
                r.weight = s.weight * w;
                records.push(r);
                origin.push(i);
            }
        }
    }
    Ok(SplitDataset { dataset: dataset.with_subjects(records)?, origin })
}

/// Weighted-Cox point estimate using the logistic model at its mode.
pub fn ck_estimate(dataset: &Dataset, spec: &ImputationModelSpec) -> Result<DVector<f64>> {
    ck_estimate_with(dataset, spec, &CoxOptions::default(), &GlmOptions::default())
}

pub fn ck_estimate_with(
    dataset: &Dataset,
    spec: &ImputationModelSpec,
    cox: &CoxOptions,
    glm: &GlmOptions,
) -> Result<DVector<f64>> {
    let probs = if dataset.has_missing() {
        let model = ImputationModel::fit(dataset, spec, glm)?;
        model.missing_probabilities(dataset, &model.fit_result().coef).into_iter().collect()
    } else {
        BTreeMap::new()
    };
    let split = split_weighted(dataset, &probs)?;
    let fit = cox_fit(split.dataset(), cox)?;
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    Ok(fit.beta)
}

/// 1-based order statistic used for quantile `q` of `b` sorted replicates:
/// `ceil(q * (b + 1))` clamped to `[1, b]`.
pub fn percentile_rank(b: usize, q: f64) -> usize {
    let pos = q * (b as f64 + 1.0);
    // Absorb representation error such as 0.025 * 1000 = 25.000000000000004.
    let rank = (pos - 1e-9 * pos.abs().max(1.0)).ceil();
    (rank.max(1.0) as usize).min(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCi {
    /// Mean of the bootstrap estimates.
    pub point: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub replicates: Vec<DVector<f64>>,
    /// Resamples rejected as degenerate and drawn again.
    pub redraws: usize,
}

/// Percentile bootstrap for the weighted-Cox estimator.
///
/// Attempt `a` resamples with `stream.purpose(Bootstrap).index(a)`.
/// Resamples whose fit fails are redrawn, up to `10 * b` attempts in total.
pub fn ck_bootstrap_ci(
    dataset: &Dataset,
    spec: &ImputationModelSpec,
    b: usize,
    level: f64,
    stream: Substream,
) -> Result<BootstrapCi> {
    ck_bootstrap_ci_with(dataset, spec, b, level, stream, &CoxOptions::default(), &GlmOptions::default())
}

pub fn ck_bootstrap_ci_with(
    dataset: &Dataset,
    spec: &ImputationModelSpec,
    b: usize,
    level: f64,
    stream: Substream,
    cox: &CoxOptions,
    glm: &GlmOptions,
) -> Result<BootstrapCi> {
    if b < 100 {
        return Err(Error::InvalidArgument(format!("at least 100 bootstrap replicates are required, got {b}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} must lie in (0, 1)")));
    }
    let n = dataset.len();
    let max_attempts = 10 * b;
    let mut replicates = Vec::with_capacity(b);
    let mut attempts = 0;
    let mut indices = vec![0usize; n];
    while replicates.len() < b {
        if attempts == max_attempts {
            return Err(Error::ResampleDegenerate { attempts, accepted: replicates.len() });
        }
        let mut rng = stream.purpose(Purpose::Bootstrap).index(attempts as u64).rng();
        attempts += 1;
        for slot in indices.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        let resample = dataset.select(&indices);
        if let Ok(beta) = ck_estimate_with(&resample, spec, cox, glm) {
            replicates.push(beta);
        }
    }

    let k = replicates[0].len();
    let point = replicates.iter().fold(DVector::zeros(k), |acc, r| acc + r) / b as f64;
    let lo_rank = percentile_rank(b, 0.5 * (1.0 - level));
    let hi_rank = percentile_rank(b, 0.5 * (1.0 + level));
    let mut lower = DVector::zeros(k);
    let mut upper = DVector::zeros(k);
    for j in 0..k {
        let mut col: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        lower[j] = col[lo_rank - 1];
        upper[j] = col[hi_rank - 1];
    }
    Ok(BootstrapCi { point, lower, upper, replicates, redraws: attempts - b })
}
