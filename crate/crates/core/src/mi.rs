//! Multiple imputation of missing failure indicators and Rubin pooling.
//!
//! The imputation model is a logistic regression for the event indicator
//! among screen-positive subjects whose status was ascertained. It is fit
//! once per dataset; every imputation then draws fresh coefficients from
//! the approximate posterior and replaces each missing indicator with a
//! Bernoulli draw at the implied probability.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cox::{cox_fit, CoxOptions};
use crate::data::{Dataset, Status, Subject};
use crate::error::{Error, Result};
use crate::glm::{logistic_fit, poisson_fit, posterior_draw, predict_prob, GlmFit, GlmOptions, PriorSpec};
use crate::rng::{Purpose, Substream};
use crate::stats::{critical_value, two_sided_p};

/// Which columns enter the logistic imputation model. An intercept is
/// always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModelSpec {
    pub screen_covariates: Vec<usize>,
    pub baseline_covariates: Vec<usize>,
    pub include_time: bool,
    #[serde(default)]
    pub prior: PriorSpec,
}

impl ImputationModelSpec {
    /// Every screen and baseline covariate plus follow-up time.
    pub fn full(dataset: &Dataset) -> Self {
        Self {
            screen_covariates: (0..dataset.n_screen()).collect(),
            baseline_covariates: (0..dataset.n_baseline()).collect(),
            include_time: true,
            prior: PriorSpec::weakly_informative(),
        }
    }

    pub fn n_coef(&self) -> usize {
        1 + self.screen_covariates.len() + self.baseline_covariates.len() + usize::from(self.include_time)
    }

    /// `[1, screen..., baseline..., time]` for one subject.
    pub fn design_row(&self, s: &Subject) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n_coef());
        row.push(1.0);
        row.extend(self.screen_covariates.iter().map(|&j| s.screen[j]));
        row.extend(self.baseline_covariates.iter().map(|&j| s.baseline[j]));
        if self.include_time {
            row.push(s.follow_time);
        }
        row
    }

    pub fn column_names(&self, dataset: &Dataset) -> Vec<String> {
        let mut names = vec!["(intercept)".to_string()];
        names.extend(self.screen_covariates.iter().map(|&j| dataset.screen_names()[j].clone()));
        names.extend(self.baseline_covariates.iter().map(|&j| dataset.baseline_names()[j].clone()));
        if self.include_time {
            names.push("time".into());
        }
        names
    }

    fn check(&self, dataset: &Dataset) -> Result<()> {
        let bad_screen = self.screen_covariates.iter().any(|&j| j >= dataset.n_screen());
        let bad_base = self.baseline_covariates.iter().any(|&j| j >= dataset.n_baseline());
        if bad_screen || bad_base {
            return Err(Error::DimensionMismatch("imputation model references an absent covariate".into()));
        }
        Ok(())
    }
}

/// A fitted imputation model.
#[derive(Debug, Clone)]
pub struct ImputationModel {
    spec: ImputationModelSpec,
    fit: GlmFit,
}

/// A completed dataset and how many indicators were filled in.
#[derive(Debug, Clone)]
pub struct Imputation {
    pub dataset: Dataset,
    pub imputed: usize,
}

impl Imputation {
    pub fn is_noop(&self) -> bool {
        self.imputed == 0
    }
}

impl ImputationModel {
    /// Fits the model to screen-positive subjects with ascertained status.
    pub fn fit(dataset: &Dataset, spec: &ImputationModelSpec, opts: &GlmOptions) -> Result<Self> {
        spec.check(dataset)?;
        let training: Vec<&Subject> = dataset
            .subjects()
            .iter()
            .filter(|s| s.screener_positive && !s.status.is_missing())
            .collect();
        let events = training.iter().filter(|s| s.status.is_event()).count();
        if events == 0 || events == training.len() {
            return Err(Error::DegenerateTrainingSet(format!(
                "{events} events among {} examined screen-positive subjects",
                training.len()
            )));
        }
        let k = spec.n_coef();
        let mut design = DMatrix::zeros(training.len(), k);
        for (i, s) in training.iter().enumerate() {
            for (j, v) in spec.design_row(s).into_iter().enumerate() {
                design[(i, j)] = v;
            }
        }
        let response: Vec<bool> = training.iter().map(|s| s.status.is_event()).collect();
        let fit = logistic_fit(&design, &response, &spec.prior, opts)?;
        if !fit.converged {
            return Err(Error::NotConverged);
        }
        Ok(Self { spec: spec.clone(), fit })
    }

    pub fn from_parts(spec: ImputationModelSpec, fit: GlmFit) -> Self {
        Self { spec, fit }
    }

    pub fn spec(&self) -> &ImputationModelSpec {
        &self.spec
    }

    pub fn fit_result(&self) -> &GlmFit {
        &self.fit
    }

    /// Event probabilities of the subjects with missing status, keyed by
    /// their index in `dataset`, under coefficients `coef`.
    pub fn missing_probabilities(&self, dataset: &Dataset, coef: &DVector<f64>) -> Vec<(usize, f64)> {
        dataset
            .subjects()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.status.is_missing())
            .map(|(i, s)| (i, predict_prob(coef.as_slice(), &self.spec.design_row(s))))
            .collect()
    }

    /// One imputation: a posterior coefficient draw, then Bernoulli draws.
    pub fn impute<R: Rng + ?Sized>(&self, dataset: &Dataset, rng: &mut R) -> Result<Imputation> {
        if !dataset.has_missing() {
            return Ok(Imputation { dataset: dataset.clone(), imputed: 0 });
        }
        let coef = posterior_draw(&self.fit, rng)?;
        impute_with_coef(dataset, &self.spec, &coef, rng)
    }
}

/// Replaces every missing indicator with a Bernoulli draw at the
/// probability implied by fixed coefficients `coef`.
pub fn impute_with_coef<R: Rng + ?Sized>(
    dataset: &Dataset,
    spec: &ImputationModelSpec,
    coef: &DVector<f64>,
    rng: &mut R,
) -> Result<Imputation> {
    spec.check(dataset)?;
    if coef.len() != spec.n_coef() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a {}-column imputation model",
            coef.len(),
            spec.n_coef()
        )));
    }
    let mut imputed = 0;
    let subjects = dataset
        .subjects()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if s.status.is_missing() {
                let p = predict_prob(coef.as_slice(), &spec.design_row(&s));
                s.status = Status::from_event(rng.random::<f64>() < p);
                imputed += 1;
            }
            s
        })
        .collect();
    Ok(Imputation { dataset: dataset.with_subjects(subjects)?, imputed })
}

/// Fits the imputation model and produces one completed dataset.
pub fn impute_once<R: Rng + ?Sized>(dataset: &Dataset, spec: &ImputationModelSpec, rng: &mut R) -> Result<Imputation> {
    if !dataset.has_missing() {
        return Ok(Imputation { dataset: dataset.clone(), imputed: 0 });
    }
    ImputationModel::fit(dataset, spec, &GlmOptions::default())?.impute(dataset, rng)
}

/// Degrees-of-freedom rule for the pooled t reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfRule {
    /// `(m-1) * (1 + m*U / ((m+1)*B))`
    #[default]
    Linear,
    /// `(m-1) * (1 + m*U / ((m+1)*B))^2`, the classical Rubin form.
    Squared,
}

impl DfRule {
    pub fn df(self, m: usize, within: f64, between: f64) -> f64 {
        if between <= 0.0 {
            return f64::INFINITY;
        }
        let m = m as f64;
        let factor = 1.0 + m * within / ((m + 1.0) * between);
        match self {
            DfRule::Linear => (m - 1.0) * factor,
            DfRule::Squared => (m - 1.0) * factor * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledEstimate {
    pub beta_bar: DVector<f64>,
    /// Mean of the per-imputation covariance matrices.
    pub within_var: DMatrix<f64>,
    /// Sample covariance of the per-imputation estimates (divisor m-1).
    pub between_var: DMatrix<f64>,
    /// `within_var + (1 + 1/m) * between_var`.
    pub total_var: DMatrix<f64>,
    /// Per-coefficient degrees of freedom; `+inf` when the between variance is zero.
    pub df: DVector<f64>,
    pub m: usize,
}

impl PooledEstimate {
    pub fn std_errors(&self) -> DVector<f64> {
        self.total_var.diagonal().map(f64::sqrt)
    }

    /// Two-sided t interval for coefficient `j`.
    pub fn interval(&self, j: usize, level: f64) -> (f64, f64) {
        let half = critical_value(level, self.df[j]) * self.total_var[(j, j)].sqrt();
        (self.beta_bar[j] - half, self.beta_bar[j] + half)
    }

    pub fn p_value(&self, j: usize) -> f64 {
        two_sided_p(self.beta_bar[j] / self.total_var[(j, j)].sqrt(), self.df[j])
    }
}

/// Pools `m` estimates and their covariance matrices with Rubin's rules.
pub fn rubin_combine(estimates: &[DVector<f64>], covariances: &[DMatrix<f64>], rule: DfRule) -> Result<PooledEstimate> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::MTooSmall(m));
    }
    if covariances.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} estimates but {} covariances", covariances.len())));
    }
    let k = estimates[0].len();
    if estimates.iter().any(|e| e.len() != k) || covariances.iter().any(|c| c.shape() != (k, k)) {
        return Err(Error::DimensionMismatch("inconsistent coefficient dimensions".into()));
    }
    let mf = m as f64;

    // Means are accumulated as offsets from the first element, which makes
    // them exact when every input is identical.
    let first = &estimates[0];
    let mut beta_bar = first.clone();
    beta_bar += estimates.iter().skip(1).fold(DVector::zeros(k), |acc, e| acc + (e - first)) / mf;
    let first_cov = &covariances[0];
    let mut within_var = first_cov.clone();
    within_var += covariances.iter().skip(1).fold(DMatrix::zeros(k, k), |acc, c| acc + (c - first_cov)) / mf;

    let mut between_var = DMatrix::zeros(k, k);
    for e in estimates {
        let d = e - &beta_bar;
        between_var += &d * d.transpose();
    }
    between_var /= mf - 1.0;

    let total_var = &within_var + &between_var * (1.0 + 1.0 / mf);
    let df = DVector::from_iterator(k, (0..k).map(|j| rule.df(m, within_var[(j, j)], between_var[(j, j)])));
    Ok(PooledEstimate { beta_bar, within_var, between_var, total_var, df, m })
}

/// Outcome model applied to every completed dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    /// Cox model on all baseline covariates.
    #[default]
    Cox,
    /// Poisson model `log E[events] = intercept + baseline + log(time)`.
    Poisson,
}

impl Analysis {
    pub fn coefficient_names(self, dataset: &Dataset) -> Vec<String> {
        let mut names = Vec::new();
        if self == Analysis::Poisson {
            names.push("(intercept)".to_string());
        }
        names.extend(dataset.baseline_names().iter().cloned());
        names
    }
}

/// Fits the outcome model to a dataset without missing indicators and
/// returns its coefficients and covariance.
pub fn fit_outcome(
    dataset: &Dataset,
    analysis: Analysis,
    cox: &CoxOptions,
    glm: &GlmOptions,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    match analysis {
        Analysis::Cox => {
            let fit = cox_fit(dataset, cox)?;
            if !fit.converged {
                return Err(Error::NotConverged);
            }
            Ok((fit.beta, fit.covariance))
        }
        Analysis::Poisson => {
            if dataset.has_missing() {
                return Err(Error::HasMissingStatus);
            }
            let p = dataset.n_baseline();
            let n = dataset.len();
            let mut design = DMatrix::zeros(n, p + 1);
            let mut y = Vec::with_capacity(n);
            let mut offset = Vec::with_capacity(n);
            for (i, s) in dataset.subjects().iter().enumerate() {
                design[(i, 0)] = 1.0;
                for (j, v) in s.baseline.iter().enumerate() {
                    design[(i, j + 1)] = *v;
                }
                y.push(u32::from(s.status.is_event()));
                offset.push(s.follow_time.ln());
            }
            let fit = poisson_fit(&design, &y, &offset, glm)?;
            if !fit.converged {
                return Err(Error::NotConverged);
            }
            Ok((fit.coef, fit.covariance))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiOptions {
    pub m: usize,
    pub level: f64,
    pub df_rule: DfRule,
    pub analysis: Analysis,
    pub cox: CoxOptions,
    pub glm: GlmOptions,
}

impl Default for MiOptions {
    fn default() -> Self {
        Self {
            m: 10,
            level: 0.95,
            df_rule: DfRule::Linear,
            analysis: Analysis::Cox,
            cox: CoxOptions::default(),
            glm: GlmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSummary {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub df: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiResult {
    pub pooled: PooledEstimate,
    pub coefficients: Vec<CoefficientSummary>,
    pub level: f64,
    /// Indicators filled in per completed dataset.
    pub imputed: usize,
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} must lie in (0, 1)")));
    }
    Ok(())
}

/// Imputes `m` completed datasets, fits the outcome model to each and pools.
///
/// Imputation `j` draws from `stream.purpose(Imputation).index(j)`, so the
/// result depends only on the dataset, options and stream address.
pub fn mi_analyze(dataset: &Dataset, spec: &ImputationModelSpec, opts: &MiOptions, stream: Substream) -> Result<MiResult> {
    if opts.m < 2 {
        return Err(Error::MTooSmall(opts.m));
    }
    check_level(opts.level)?;

    let mut estimates = Vec::with_capacity(opts.m);
    let mut covariances = Vec::with_capacity(opts.m);
    let mut imputed = 0;
    if dataset.has_missing() {
        let model = ImputationModel::fit(dataset, spec, &opts.glm)?;
        for j in 0..opts.m {
            let mut rng = stream.purpose(Purpose::Imputation).index(j as u64).rng();
            let completed = model.impute(dataset, &mut rng)?;
            imputed = completed.imputed;
            let (b, v) = fit_outcome(&completed.dataset, opts.analysis, &opts.cox, &opts.glm)?;
            estimates.push(b);
            covariances.push(v);
        }
    } else {
        // Every completed dataset is the input itself.
        let (b, v) = fit_outcome(dataset, opts.analysis, &opts.cox, &opts.glm)?;
        estimates = vec![b; opts.m];
        covariances = vec![v; opts.m];
    }

    let pooled = rubin_combine(&estimates, &covariances, opts.df_rule)?;
    let coefficients = opts
        .analysis
        .coefficient_names(dataset)
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let (lower, upper) = pooled.interval(j, opts.level);
            CoefficientSummary {
                name,
                estimate: pooled.beta_bar[j],
                std_error: pooled.total_var[(j, j)].sqrt(),
                df: pooled.df[j],
                lower,
                upper,
                p_value: pooled.p_value(j),
            }
        })
        .collect();
    Ok(MiResult { pooled, coefficients, level: opts.level, imputed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidenceEstimate {
    /// Events per unit person-time.
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
    pub df: f64,
}

/// Incidence rate `exp(beta_bar' x_star)` with a t interval built on the
/// linear-predictor scale. The df is the smallest coefficient df among the
/// coefficients that `x_star` actually weights.
pub fn pooled_incidence(pooled: &PooledEstimate, x_star: &[f64], level: f64) -> Result<IncidenceEstimate> {
    check_level(level)?;
    let k = pooled.beta_bar.len();
    if x_star.len() != k {
        return Err(Error::DimensionMismatch(format!("x_star has {} entries, model has {k}", x_star.len())));
    }
    let x = DVector::from_column_slice(x_star);
    let lp = pooled.beta_bar.dot(&x);
    let var = (x.transpose() * &pooled.total_var * &x)[(0, 0)].max(0.0);
    let df = (0..k)
        .filter(|&j| x_star[j] != 0.0)
        .map(|j| pooled.df[j])
        .fold(f64::INFINITY, f64::min);
    let half = critical_value(level, df) * var.sqrt();
    Ok(IncidenceEstimate { rate: lp.exp(), lower: (lp - half).exp(), upper: (lp + half).exp(), df })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn s(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn zero_between_variance() {
        let p = rubin_combine(&[v(&[1.0]), v(&[1.0])], &[s(0.5), s(0.5)], DfRule::Linear).unwrap();
        assert_eq!(p.beta_bar[0], 1.0);
        assert_eq!(p.within_var[(0, 0)], 0.5);
        assert_eq!(p.between_var[(0, 0)], 0.0);
        assert_eq!(p.total_var[(0, 0)], 0.5);
        assert!(p.df[0].is_infinite());
    }

    #[test]
    fn three_imputations_by_hand() {
        let est = [v(&[1.0]), v(&[2.0]), v(&[3.0])];
        let cov = [s(1.0), s(1.0), s(1.0)];
        let p = rubin_combine(&est, &cov, DfRule::Linear).unwrap();
        assert!((p.beta_bar[0] - 2.0).abs() < 1e-15);
        assert!((p.within_var[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((p.between_var[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((p.total_var[(0, 0)] - 7.0 / 3.0).abs() < 1e-14);
        assert!((p.df[0] - 3.5).abs() < 1e-14);
        let sq = rubin_combine(&est, &cov, DfRule::Squared).unwrap();
        assert!((sq.df[0] - 2.0 * 1.75 * 1.75).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(rubin_combine(&[v(&[1.0])], &[s(1.0)], DfRule::Linear), Err(Error::MTooSmall(1))));
        let r = rubin_combine(&[v(&[1.0]), v(&[1.0, 2.0])], &[s(1.0), s(1.0)], DfRule::Linear);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn incidence_without_variance() {
        let p = rubin_combine(&[v(&[0.0]), v(&[0.0])], &[s(0.0), s(0.0)], DfRule::Linear).unwrap();
        let inc = pooled_incidence(&p, &[1.0], 0.95).unwrap();
        assert_eq!((inc.rate, inc.lower, inc.upper), (1.0, 1.0, 1.0));
    }

    #[test]
    fn incidence_df_uses_supported_coefficients() {
        let est = [v(&[0.0, 1.0]), v(&[0.0, 2.0]), v(&[0.0, 3.0])];
        let cov = [DMatrix::identity(2, 2), DMatrix::identity(2, 2), DMatrix::identity(2, 2)];
        let p = rubin_combine(&est, &cov, DfRule::Linear).unwrap();
        assert!(p.df[0].is_infinite());
        assert_eq!(pooled_incidence(&p, &[1.0, 0.0], 0.95).unwrap().df, f64::INFINITY);
        assert!((pooled_incidence(&p, &[1.0, 0.5], 0.95).unwrap().df - 3.5).abs() < 1e-14);
    }
}
