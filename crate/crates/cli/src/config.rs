//! JSON configuration shared by the subcommands. Every field is optional;
//! command-line flags take precedence over the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use survmi_core::{CsvSchema, Dataset, DfRule, ImputationModelSpec, PriorSpec};

pub const SEED_ENV: &str = "SURVMI_SEED";

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Flag, then config, then the environment.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag.or(config) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(_) => bail!("a seed is required: pass --seed, set `seed` in the config, or set {SEED_ENV}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisArg {
    Cox,
    Poisson,
}

impl From<AnalysisArg> for survmi_core::Analysis {
    fn from(a: AnalysisArg) -> Self {
        match a {
            AnalysisArg::Cox => Self::Cox,
            AnalysisArg::Poisson => Self::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfRuleArg {
    Linear,
    Squared,
}

impl From<DfRuleArg> for DfRule {
    fn from(r: DfRuleArg) -> Self {
        match r {
            DfRuleArg::Linear => DfRule::Linear,
            DfRuleArg::Squared => DfRule::Squared,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub time: Option<String>,
    pub status: Option<String>,
    pub screen: Option<String>,
    pub baseline: Option<Vec<String>>,
    pub screen_covariates: Option<Vec<String>>,
    pub weight: Option<String>,
}

/// Imputation-model columns by name. Omitted lists mean "all".
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputationConfig {
    pub screen_covariates: Option<Vec<String>>,
    pub baseline_covariates: Option<Vec<String>>,
    pub include_time: Option<bool>,
    pub prior_scale: Option<f64>,
}

/// Config file for `analyze` and `impute`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub schema: SchemaConfig,
    #[serde(default)]
    pub imputation: ImputationConfig,
    pub seed: Option<u64>,
    pub m: Option<usize>,
    pub level: Option<f64>,
    pub analysis: Option<AnalysisArg>,
    pub df_rule: Option<DfRuleArg>,
    pub at: Option<Vec<Vec<f64>>>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
}

/// Input schema and imputation-model flags shared by `analyze` and `impute`.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV file.
    pub data: PathBuf,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Follow-up time column [default: time].
    #[arg(long)]
    pub time: Option<String>,
    /// Failure indicator column: 1, 0 or NA [default: status].
    #[arg(long)]
    pub status: Option<String>,
    /// Screener result column: 1 or 0 [default: screen].
    #[arg(long)]
    pub screen: Option<String>,
    /// Outcome-model covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub baseline: Option<Vec<String>>,
    /// Columns available only to the imputation model.
    #[arg(long, value_delimiter = ',')]
    pub screen_covariates: Option<Vec<String>>,
    /// Case-weight column.
    #[arg(long)]
    pub weight: Option<String>,
    /// Screen covariates entering the imputation model [default: all].
    #[arg(long, value_delimiter = ',')]
    pub impute_screen: Option<Vec<String>>,
    /// Baseline covariates entering the imputation model [default: all].
    #[arg(long, value_delimiter = ',')]
    pub impute_baseline: Option<Vec<String>>,
    /// Leave follow-up time out of the imputation model.
    #[arg(long)]
    pub no_time_in_model: bool,
    /// Scale of the Cauchy prior on imputation coefficients [default: 2.5].
    #[arg(long)]
    pub prior_scale: Option<f64>,
    /// Seed for the imputation streams (falls back to SURVMI_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl DataArgs {
    pub fn schema(&self, cfg: &SchemaConfig) -> CsvSchema {
        let pick = |flag: &Option<String>, file: &Option<String>, default: &str| {
            flag.clone().or_else(|| file.clone()).unwrap_or_else(|| default.to_string())
        };
        let mut schema = CsvSchema::new(
            &pick(&self.time, &cfg.time, "time"),
            &pick(&self.status, &cfg.status, "status"),
            &pick(&self.screen, &cfg.screen, "screen"),
        )
        .baseline(self.baseline.clone().or_else(|| cfg.baseline.clone()).unwrap_or_default())
        .screen_covariates(self.screen_covariates.clone().or_else(|| cfg.screen_covariates.clone()).unwrap_or_default());
        schema.weight = self.weight.clone().or_else(|| cfg.weight.clone());
        schema
    }

    pub fn load(&self, cfg: &SchemaConfig) -> Result<(Dataset, CsvSchema)> {
        let schema = self.schema(cfg);
        let dataset = survmi_core::load_csv(&self.data, &schema)
            .with_context(|| format!("loading {}", self.data.display()))?;
        Ok((dataset, schema))
    }

    pub fn imputation_spec(&self, cfg: &ImputationConfig, dataset: &Dataset) -> Result<ImputationModelSpec> {
        let mut spec = ImputationModelSpec::full(dataset);
        if let Some(names) = self.impute_screen.as_ref().or(cfg.screen_covariates.as_ref()) {
            spec.screen_covariates = indices(names, dataset.screen_names(), "screen")?;
        }
        if let Some(names) = self.impute_baseline.as_ref().or(cfg.baseline_covariates.as_ref()) {
            spec.baseline_covariates = indices(names, dataset.baseline_names(), "baseline")?;
        }
        if self.no_time_in_model {
            spec.include_time = false;
        } else if let Some(t) = cfg.include_time {
            spec.include_time = t;
        }
        if let Some(scale) = self.prior_scale.or(cfg.prior_scale) {
            spec.prior = PriorSpec::cauchy(scale)?;
        }
        Ok(spec)
    }
}

fn indices(names: &[String], available: &[String], kind: &str) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            available.iter().position(|a| a == n).with_context(|| {
                format!("imputation column `{n}` is not a {kind} covariate; {kind} covariates: [{}]", available.join(", "))
            })
        })
        .collect()
}
