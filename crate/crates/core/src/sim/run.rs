use std::time::Instant;

use rayon::prelude::*;

use crate::ck::ck_bootstrap_ci;
use crate::cox::CoxOptions;
use crate::error::{Error, Result};
use crate::glm::{incidence_rate, GlmOptions};
use crate::mi::{fit_outcome, mi_analyze, pooled_incidence, Analysis, MiOptions};
use crate::rng::{Purpose, Substream};
use crate::sim::cohort::{apply_missingness, generate_cohort, GeneratedCohort, Y1_MEAN};
use crate::sim::scenario::{Method, SimScenario};
use crate::sim::summary::{summarize, ScenarioSummary};
use crate::stats::critical_value;

/// Upper-quartile deviate of the standard normal.
const Z75: f64 = 0.674_489_750_196_081_7;

/// Y1 values at which incidence rates are reported: its three quartiles.
pub const Y1_QUARTILES: [f64; 3] = [Y1_MEAN - Z75, Y1_MEAN, Y1_MEAN + Z75];

/// Incidence implied by the generating model at the Y1 quartiles.
pub fn true_rates(beta: f64) -> [f64; 3] {
    Y1_QUARTILES.map(|q| (beta * q).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOutcome {
    /// Estimate of the Y1 coefficient.
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Wall-clock seconds spent in the estimation call.
    pub runtime_seconds: f64,
    /// Poisson analyses only: rates at the Y1 quartiles.
    pub incidence: Option<[f64; 3]>,
}

/// Applies one method to one replicate's cohort.
pub fn run_method(method: Method, cohort: &GeneratedCohort, scenario: &SimScenario, replicate: u64) -> Result<MethodOutcome> {
    let stream = Substream::new(scenario.seed).replicate(replicate);
    let dataset = cohort.to_dataset(method);
    let poisson = scenario.analysis == Analysis::Poisson;
    let j = usize::from(poisson);
    let cox = CoxOptions::default();
    let glm = GlmOptions::default();

    let start = Instant::now();
    let mut outcome = match method {
        Method::MultipleImputation => {
            let opts = MiOptions {
                m: scenario.m,
                level: scenario.level,
                df_rule: scenario.df_rule,
                analysis: scenario.analysis,
                cox,
                glm,
            };
            let res = mi_analyze(&dataset, &scenario.imputation_spec.model_spec(), &opts, stream)?;
            let (lower, upper) = res.pooled.interval(j, scenario.level);
            let incidence = if poisson {
                let mut rates = [0.0; 3];
                for (r, q) in rates.iter_mut().zip(Y1_QUARTILES) {
                    *r = pooled_incidence(&res.pooled, &[1.0, q], scenario.level)?.rate;
                }
                Some(rates)
            } else {
                None
            };
            MethodOutcome { estimate: res.pooled.beta_bar[j], lower, upper, runtime_seconds: 0.0, incidence }
        }
        Method::CookKosorok => {
            if poisson {
                return Err(Error::InvalidScenario("the weighted comparator is Cox-only".into()));
            }
            let spec = scenario.imputation_spec.model_spec();
            let ci = ck_bootstrap_ci(&dataset, &spec, scenario.bootstrap_b, scenario.level, stream)?;
            MethodOutcome { estimate: ci.point[0], lower: ci.lower[0], upper: ci.upper[0], runtime_seconds: 0.0, incidence: None }
        }
        _ => {
            let (coef, cov) = fit_outcome(&dataset, scenario.analysis, &cox, &glm)?;
            let half = critical_value(scenario.level, f64::INFINITY) * cov[(j, j)].sqrt();
            let incidence = poisson.then(|| Y1_QUARTILES.map(|q| incidence_rate(coef.as_slice(), &[1.0, q])));
            MethodOutcome { estimate: coef[j], lower: coef[j] - half, upper: coef[j] + half, runtime_seconds: 0.0, incidence }
        }
    };
    outcome.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(outcome)
}

/// The cohort of replicate `r`, with missingness applied.
pub fn replicate_cohort(scenario: &SimScenario, replicate: u64) -> GeneratedCohort {
    let stream = Substream::new(scenario.seed).replicate(replicate);
    let cohort = generate_cohort(scenario, &mut stream.purpose(Purpose::Cohort).rng());
    apply_missingness(&cohort, &scenario.mechanism, &mut stream.purpose(Purpose::Missingness).rng())
}

/// Every selected method on replicate `r`, in `scenario.methods` order.
pub fn run_replicate(scenario: &SimScenario, replicate: u64) -> Vec<Result<MethodOutcome>> {
    let cohort = replicate_cohort(scenario, replicate);
    scenario.methods.iter().map(|&m| run_method(m, &cohort, scenario, replicate)).collect()
}

/// Runs all replicates on the current rayon pool and summarizes them.
pub fn run_scenario(scenario: &SimScenario) -> Result<ScenarioSummary> {
    scenario.validate()?;
    let results: Vec<Vec<Result<MethodOutcome>>> =
        (0..scenario.n_reps as u64).into_par_iter().map(|r| run_replicate(scenario, r)).collect();
    summarize(scenario, &results)
}

/// [`run_scenario`] on a dedicated pool of `jobs` threads. The summary does
/// not depend on `jobs`.
pub fn run_scenario_with_jobs(scenario: &SimScenario, jobs: usize) -> Result<ScenarioSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| run_scenario(scenario))
}
