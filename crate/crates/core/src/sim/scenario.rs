use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::PriorSpec;
use crate::mi::{Analysis, DfRule, ImputationModelSpec};

/// How failure indicators are hidden in a simulated cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mechanism {
    /// Screen-positive subjects lose their indicator with probability
    /// `expit(intercept + coef_y1 * Y1 + coef_v * V)`.
    MarLogistic { intercept: f64, coef_y1: f64, coef_v: f64 },
    /// A fixed fraction of screen-positive indicators is missing.
    McarQ1 { rate: f64 },
    /// Missingness among screen-positive subjects depends on the true status.
    Mnar { p_censored: f64, p_failure: f64 },
    /// The logistic mechanism on screen-positive subjects plus a fixed
    /// fraction of screen-negative subjects.
    WithQ0Missing { rate_q0: f64, intercept: f64, coef_y1: f64, coef_v: f64 },
}

impl Mechanism {
    pub const MAR: Mechanism = Mechanism::MarLogistic { intercept: -0.2, coef_y1: -0.3, coef_v: 0.1 };
    pub const MCAR: Mechanism = Mechanism::McarQ1 { rate: 0.40 };
    pub const MNAR_30_50: Mechanism = Mechanism::Mnar { p_censored: 0.30, p_failure: 0.50 };
    pub const MNAR_20_60: Mechanism = Mechanism::Mnar { p_censored: 0.20, p_failure: 0.60 };
    pub const Q0: Mechanism = Mechanism::WithQ0Missing { rate_q0: 0.40, intercept: -0.2, coef_y1: -0.3, coef_v: 0.1 };

    fn check(&self) -> Result<()> {
        let probs: &[f64] = match self {
            Mechanism::MarLogistic { .. } => &[],
            Mechanism::McarQ1 { rate } => &[*rate],
            Mechanism::Mnar { p_censored, p_failure } => &[*p_censored, *p_failure],
            Mechanism::WithQ0Missing { rate_q0, .. } => &[*rate_q0],
        };
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidScenario(format!("mechanism probabilities must lie in [0, 1]: {self:?}")));
        }
        Ok(())
    }
}

/// Covariates of the logistic imputation model relative to the generating model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeSpecKind {
    /// Y1, Y2 and follow-up time.
    #[default]
    Correct,
    /// Adds the unrelated Y3.
    ExtraCovariate,
    /// Drops the screener measurement Y2.
    OmitRelevant,
}

impl ImputeSpecKind {
    /// Model spec over the simulated columns: baseline `[Y1]`, screen `[Y2, Y3]`.
    pub fn model_spec(self) -> ImputationModelSpec {
        let screen_covariates = match self {
            ImputeSpecKind::Correct => vec![0],
            ImputeSpecKind::ExtraCovariate => vec![0, 1],
            ImputeSpecKind::OmitRelevant => vec![],
        };
        ImputationModelSpec {
            screen_covariates,
            baseline_covariates: vec![0],
            include_time: true,
            prior: PriorSpec::weakly_informative(),
        }
    }
}

impl FromStr for ImputeSpecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correct" => Ok(Self::Correct),
            "extra" => Ok(Self::ExtraCovariate),
            "omit" => Ok(Self::OmitRelevant),
            other => Err(Error::InvalidArgument(format!(
                "unknown imputation spec `{other}`; expected one of: correct, extra, omit"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FullData,
    CompleteCase,
    AllCensored,
    AllFailures,
    CookKosorok,
    MultipleImputation,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::FullData,
        Method::CompleteCase,
        Method::AllCensored,
        Method::AllFailures,
        Method::CookKosorok,
        Method::MultipleImputation,
    ];

    /// Methods that apply to a Poisson analysis (the weighted comparator is Cox-only).
    pub const POISSON: [Method; 5] = [
        Method::FullData,
        Method::CompleteCase,
        Method::AllCensored,
        Method::AllFailures,
        Method::MultipleImputation,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::FullData => "Full Data",
            Method::CompleteCase => "Complete Case",
            Method::AllCensored => "Treat all as Censored",
            Method::AllFailures => "Treat all as Failures",
            Method::CookKosorok => "Cook & Kosorok",
            Method::MultipleImputation => "Multiple Imputation",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub name: String,
    pub beta_true: f64,
    pub n: usize,
    pub n_reps: usize,
    pub censor_mean: f64,
    pub mechanism: Mechanism,
    pub imputation_spec: ImputeSpecKind,
    pub analysis: Analysis,
    pub m: usize,
    pub bootstrap_b: usize,
    pub level: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default)]
    pub df_rule: DfRule,
}

pub const DESK_REPS: usize = 200;
pub const DESK_BOOTSTRAP: usize = 300;

impl SimScenario {
    /// A cell with the standard design: 1000 subjects, 1000 replicates,
    /// censoring mean 5, 10 imputations, 1000 bootstrap resamples.
    pub fn standard(name: impl Into<String>, beta_true: f64, mechanism: Mechanism) -> Self {
        Self {
            name: name.into(),
            beta_true,
            n: 1000,
            n_reps: 1000,
            censor_mean: 5.0,
            mechanism,
            imputation_spec: ImputeSpecKind::Correct,
            analysis: Analysis::Cox,
            m: 10,
            bootstrap_b: 1000,
            level: 0.95,
            methods: Method::ALL.to_vec(),
            seed: 0,
            df_rule: DfRule::Linear,
        }
    }

    pub fn with_spec(mut self, spec: ImputeSpecKind) -> Self {
        self.imputation_spec = spec;
        self
    }

    pub fn with_poisson(mut self) -> Self {
        self.analysis = Analysis::Poisson;
        self.methods = Method::POISSON.to_vec();
        self
    }

    pub fn with_methods(mut self, methods: &[Method]) -> Self {
        self.methods = methods.to_vec();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_reps(mut self, n_reps: usize) -> Self {
        self.n_reps = n_reps;
        self
    }

    /// Reduced replication: 200 replicates and 300 bootstrap resamples.
    pub fn desk_scale(mut self) -> Self {
        self.n_reps = DESK_REPS;
        self.bootstrap_b = DESK_BOOTSTRAP;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(format!("{}: {msg}", self.name)));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if self.n_reps < 1 {
            return bad("n_reps must be at least 1".into());
        }
        if !(self.censor_mean > 0.0 && self.censor_mean.is_finite()) {
            return bad(format!("censor_mean = {} must be positive", self.censor_mean));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level = {} must lie in (0, 1)", self.level));
        }
        if !self.beta_true.is_finite() {
            return bad("beta_true must be finite".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.methods.contains(&Method::MultipleImputation) && self.m < 2 {
            return bad(format!("m = {} must be at least 2", self.m));
        }
        if self.methods.contains(&Method::CookKosorok) {
            if self.analysis == Analysis::Poisson {
                return bad("the weighted comparator is only defined for Cox analyses".into());
            }
            if self.bootstrap_b < 100 {
                return bad(format!("bootstrap_b = {} must be at least 100", self.bootstrap_b));
            }
        }
        self.mechanism.check()
    }
}

/// Scenario families, in table order.
pub const FAMILIES: [&str; 10] = [
    "mar",
    "mcar",
    "mar-extra",
    "mar-omit",
    "q0-correct",
    "q0-extra",
    "q0-omit",
    "mnar-30-50",
    "mnar-20-60",
    "poisson-mar",
];

pub const CATALOG_BETAS: [f64; 3] = [-0.5, -1.5, -3.0];

/// The cell of `family` at `beta`, at full scale.
pub fn catalog_cell(family: &str, beta: f64) -> Result<SimScenario> {
    let name = format!("{family}/beta={beta}");
    let cell = |mech| SimScenario::standard(name.clone(), beta, mech);
    Ok(match family {
        "mar" => cell(Mechanism::MAR),
        "mcar" => cell(Mechanism::MCAR),
        "mar-extra" => cell(Mechanism::MAR).with_spec(ImputeSpecKind::ExtraCovariate),
        "mar-omit" => cell(Mechanism::MAR).with_spec(ImputeSpecKind::OmitRelevant),
        "q0-correct" => cell(Mechanism::Q0),
        "q0-extra" => cell(Mechanism::Q0).with_spec(ImputeSpecKind::ExtraCovariate),
        "q0-omit" => cell(Mechanism::Q0).with_spec(ImputeSpecKind::OmitRelevant),
        "mnar-30-50" => cell(Mechanism::MNAR_30_50),
        "mnar-20-60" => cell(Mechanism::MNAR_20_60),
        "poisson-mar" => cell(Mechanism::MAR).with_poisson(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown scenario family `{other}`; expected one of: {}",
                FAMILIES.join(", ")
            )))
        }
    })
}

/// Every catalog cell: ten families at each of the three coefficients.
pub fn scenario_catalog() -> Vec<SimScenario> {
    FAMILIES
        .iter()
        .flat_map(|f| CATALOG_BETAS.iter().map(move |&b| catalog_cell(f, b).expect("known family")))
        .collect()
}

pub fn scenario_catalog_desk() -> Vec<SimScenario> {
    scenario_catalog().into_iter().map(SimScenario::desk_scale).collect()
}
