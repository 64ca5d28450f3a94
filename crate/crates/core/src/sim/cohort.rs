//! Synthetic cohorts with screener-dependent ascertainment.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Status, Subject};
use crate::glm::expit;
use crate::sim::scenario::{Mechanism, Method, SimScenario};

/// Mean of the baseline covariate Y1.
pub const Y1_MEAN: f64 = 2.0;
/// Standard deviation of the screener measurement around the true status.
pub const Y2_SD: f64 = 0.3;
/// A screener is positive when Y2 exceeds this threshold.
pub const SCREEN_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSubject {
    pub failure_time: f64,
    pub censor_time: f64,
    pub follow_time: f64,
    /// True failure indicator.
    pub event: bool,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub screener_positive: bool,
    /// Working indicator: the true status after a positive screen, else 0.
    pub working_event: bool,
    /// Whether the working indicator was ascertained.
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCohort {
    pub subjects: Vec<CohortSubject>,
}

fn unit_open_left<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1], so the logarithm below is finite.
    1.0 - rng.random::<f64>()
}

/// Draws `scenario.n` subjects: exponential failure times with hazard
/// `exp(beta * Y1)`, exponential censoring with mean `censor_mean`, and the
/// screener covariates derived from the true status.
pub fn generate_cohort<R: Rng + ?Sized>(scenario: &SimScenario, rng: &mut R) -> GeneratedCohort {
    let y1_dist = Normal::new(Y1_MEAN, 1.0).expect("valid normal");
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let subjects = (0..scenario.n)
        .map(|_| {
            let y1 = y1_dist.sample(rng);
            let failure_time = -unit_open_left(rng).ln() / (scenario.beta_true * y1).exp();
            let censor_time = -scenario.censor_mean * unit_open_left(rng).ln();
            let event = failure_time <= censor_time;
            let y2 = f64::from(u8::from(event)) + Y2_SD * unit.sample(rng);
            let y3 = unit.sample(rng);
            let screener_positive = y2 > SCREEN_THRESHOLD;
            CohortSubject {
                failure_time,
                censor_time,
                follow_time: failure_time.min(censor_time),
                event,
                y1,
                y2,
                y3,
                screener_positive,
                working_event: screener_positive && event,
                observed: true,
            }
        })
        .collect();
    GeneratedCohort { subjects }
}

/// Marks indicators as unobserved according to `mechanism`. Any previous
/// missingness is discarded first.
pub fn apply_missingness<R: Rng + ?Sized>(cohort: &GeneratedCohort, mechanism: &Mechanism, rng: &mut R) -> GeneratedCohort {
    let subjects = cohort
        .subjects
        .iter()
        .map(|s| {
            let p_missing = match *mechanism {
                Mechanism::MarLogistic { intercept, coef_y1, coef_v } if s.screener_positive => {
                    expit(intercept + coef_y1 * s.y1 + coef_v * s.follow_time)
                }
                Mechanism::McarQ1 { rate } if s.screener_positive => rate,
                Mechanism::Mnar { p_censored, p_failure } if s.screener_positive => {
                    if s.working_event {
                        p_failure
                    } else {
                        p_censored
                    }
                }
                Mechanism::WithQ0Missing { rate_q0, intercept, coef_y1, coef_v } => {
                    if s.screener_positive {
                        expit(intercept + coef_y1 * s.y1 + coef_v * s.follow_time)
                    } else {
                        rate_q0
                    }
                }
                _ => 0.0,
            };
            // One uniform per subject keeps the stream aligned across mechanisms.
            let u: f64 = rng.random();
            CohortSubject { observed: u >= p_missing, ..s.clone() }
        })
        .collect();
    GeneratedCohort { subjects }
}

pub const BASELINE_NAMES: [&str; 1] = ["y1"];
pub const SCREEN_NAMES: [&str; 2] = ["y2", "y3"];

impl GeneratedCohort {
    pub fn missing_count(&self) -> usize {
        self.subjects.iter().filter(|s| !s.observed).count()
    }

    /// The dataset a method sees. Unobserved indicators become `Missing`
    /// for the imputation-based methods; the other methods resolve them up
    /// front. Unobserved screen-negative subjects are presented as screen
    /// positive so the imputation model is applied to them too.
    pub fn to_dataset(&self, method: Method) -> Dataset {
        let subjects = self
            .subjects
            .iter()
            .filter(|s| s.observed || method != Method::CompleteCase)
            .map(|s| {
                let status = match method {
                    Method::FullData => Status::from_event(s.event),
                    _ if s.observed => Status::from_event(s.working_event),
                    Method::AllCensored => Status::Censored,
                    Method::AllFailures => Status::Event,
                    _ => Status::Missing,
                };
                Subject::new(
                    s.follow_time,
                    status,
                    s.screener_positive || status.is_missing(),
                    vec![s.y1],
                    vec![s.y2, s.y3],
                )
            })
            .collect();
        Dataset::new(
            subjects,
            BASELINE_NAMES.iter().map(|s| s.to_string()).collect(),
            SCREEN_NAMES.iter().map(|s| s.to_string()).collect(),
        )
        .expect("fixed covariate layout")
    }
}
