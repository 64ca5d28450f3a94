//! Monte-Carlo comparison of estimators on synthetic screened cohorts.
//!
//! Each replicate draws a cohort, hides failure indicators according to a
//! missingness mechanism and applies every selected method. Replicate `r`
//! draws only from streams addressed by `(seed, r, purpose)`, so summaries
//! are identical for any thread count or processing order.

pub mod cohort;
pub mod run;
pub mod scenario;
pub mod summary;

pub use cohort::{apply_missingness, generate_cohort, CohortSubject, GeneratedCohort};
pub use run::{
    replicate_cohort, run_method, run_replicate, run_scenario, run_scenario_with_jobs, true_rates, MethodOutcome,
    Y1_QUARTILES,
};
pub use scenario::{
    catalog_cell, scenario_catalog, scenario_catalog_desk, ImputeSpecKind, Mechanism, Method, SimScenario, FAMILIES,
    CATALOG_BETAS,
};
pub use summary::{write_summaries_csv, write_summaries_markdown, MeanSe, MethodSummary, ScenarioSummary};
