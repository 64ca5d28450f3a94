use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use survmi_core::sim::{
    catalog_cell, run_scenario_with_jobs, scenario_catalog, write_summaries_csv, write_summaries_markdown,
    ImputeSpecKind, Method, SimScenario,
};
use survmi_core::Analysis;

use crate::config::{self, AnalysisArg, DfRuleArg, Format};
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
pub enum MechanismArg {
    #[value(name = "mar")]
    #[serde(rename = "mar")]
    Mar,
    #[value(name = "mcar")]
    #[serde(rename = "mcar")]
    Mcar,
    #[value(name = "mnar-30-50")]
    #[serde(rename = "mnar-30-50")]
    Mnar3050,
    #[value(name = "mnar-20-60")]
    #[serde(rename = "mnar-20-60")]
    Mnar2060,
    #[value(name = "q0-correct")]
    #[serde(rename = "q0-correct")]
    Q0Correct,
    #[value(name = "q0-extra")]
    #[serde(rename = "q0-extra")]
    Q0Extra,
    #[value(name = "q0-omit")]
    #[serde(rename = "q0-omit")]
    Q0Omit,
}

impl MechanismArg {
    fn family(self) -> &'static str {
        match self {
            MechanismArg::Mar => "mar",
            MechanismArg::Mcar => "mcar",
            MechanismArg::Mnar3050 => "mnar-30-50",
            MechanismArg::Mnar2060 => "mnar-20-60",
            MechanismArg::Q0Correct => "q0-correct",
            MechanismArg::Q0Extra => "q0-extra",
            MechanismArg::Q0Omit => "q0-omit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeSpecArg {
    Correct,
    Extra,
    Omit,
}

impl From<ImputeSpecArg> for ImputeSpecKind {
    fn from(s: ImputeSpecArg) -> Self {
        match s {
            ImputeSpecArg::Correct => ImputeSpecKind::Correct,
            ImputeSpecArg::Extra => ImputeSpecKind::ExtraCovariate,
            ImputeSpecArg::Omit => ImputeSpecKind::OmitRelevant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Full,
    Cc,
    Censored,
    Failures,
    Ck,
    Mi,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Full => Method::FullData,
            MethodArg::Cc => Method::CompleteCase,
            MethodArg::Censored => Method::AllCensored,
            MethodArg::Failures => Method::AllFailures,
            MethodArg::Ck => Method::CookKosorok,
            MethodArg::Mi => Method::MultipleImputation,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run every catalog cell (ten families at three coefficients).
    #[arg(long)]
    catalog: bool,
    /// 200 replicates and 300 bootstrap resamples per cell.
    #[arg(long)]
    desk_scale: bool,
    /// True log hazard ratio of the cell.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Subjects per replicate.
    #[arg(long)]
    n: Option<usize>,
    /// Replicates per cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Missingness mechanism [default: mar].
    #[arg(long)]
    mechanism: Option<MechanismArg>,
    /// Imputation-model covariates relative to the generating model.
    #[arg(long)]
    impute_spec: Option<ImputeSpecArg>,
    /// Outcome model [default: cox].
    #[arg(long)]
    analysis: Option<AnalysisArg>,
    /// Imputations per replicate.
    #[arg(long)]
    m: Option<usize>,
    /// Bootstrap resamples for the weighted comparator.
    #[arg(long = "bootstrap-B")]
    bootstrap_b: Option<usize>,
    /// Nominal interval coverage.
    #[arg(long)]
    level: Option<f64>,
    /// Pooled degrees-of-freedom rule.
    #[arg(long)]
    df_rule: Option<DfRuleArg>,
    /// Methods to compare [default: all that apply].
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<MethodArg>>,
    /// Master seed (falls back to SURVMI_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    format: Option<Format>,
    /// Output file [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Include wall-clock runtimes, which makes the output non-reproducible.
    #[arg(long)]
    timings: bool,
}

/// Config file for `simulate`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    /// Fully specified cells; used instead of the catalog or a single cell.
    scenarios: Option<Vec<SimScenario>>,
    #[serde(default)]
    catalog: bool,
    #[serde(default)]
    desk_scale: bool,
    beta: Option<f64>,
    n: Option<usize>,
    reps: Option<usize>,
    mechanism: Option<MechanismArg>,
    impute_spec: Option<ImputeSpecArg>,
    analysis: Option<AnalysisArg>,
    m: Option<usize>,
    bootstrap_b: Option<usize>,
    level: Option<f64>,
    df_rule: Option<DfRuleArg>,
    methods: Option<Vec<MethodArg>>,
    seed: Option<u64>,
    jobs: Option<usize>,
    format: Option<Format>,
    output: Option<PathBuf>,
    #[serde(default)]
    timings: bool,
}

fn cells(args: &SimulateArgs, cfg: &SimulateConfig) -> Result<Vec<SimScenario>> {
    let beta = args.beta.or(cfg.beta);
    let mechanism = args.mechanism.or(cfg.mechanism);
    let impute_spec = args.impute_spec.or(cfg.impute_spec);
    let analysis = args.analysis.or(cfg.analysis);

    if args.catalog || (cfg.catalog && cfg.scenarios.is_none()) {
        if beta.is_some() || mechanism.is_some() || impute_spec.is_some() || analysis.is_some() {
            bail!("--catalog runs fixed cells and cannot be combined with --beta, --mechanism, --impute-spec or --analysis");
        }
        return Ok(scenario_catalog());
    }
    if let Some(list) = &cfg.scenarios {
        if list.is_empty() {
            bail!("config lists no scenarios");
        }
        return Ok(list.clone());
    }
    let Some(beta) = beta else {
        bail!("pass --beta for a single cell, or --catalog for every catalog cell");
    };
    let mut cell = catalog_cell(mechanism.unwrap_or(MechanismArg::Mar).family(), beta)?;
    if let Some(spec) = impute_spec {
        cell.imputation_spec = spec.into();
    }
    if analysis.map(Analysis::from) == Some(Analysis::Poisson) {
        cell = cell.with_poisson();
    }
    Ok(vec![cell])
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let cfg: SimulateConfig = config::load(args.config.as_deref())?;
    let seed = config::resolve_seed(args.seed, cfg.seed)?;
    let desk = args.desk_scale || cfg.desk_scale;
    let methods: Option<Vec<Method>> =
        args.methods.clone().or_else(|| cfg.methods.clone()).map(|v| v.into_iter().map(Method::from).collect());

    let mut scenarios = cells(&args, &cfg)?;
    for s in &mut scenarios {
        if desk {
            *s = s.clone().desk_scale();
        }
        s.seed = seed;
        if let Some(n) = args.n.or(cfg.n) {
            s.n = n;
        }
        if let Some(reps) = args.reps.or(cfg.reps) {
            s.n_reps = reps;
        }
        if let Some(m) = args.m.or(cfg.m) {
            s.m = m;
        }
        if let Some(b) = args.bootstrap_b.or(cfg.bootstrap_b) {
            s.bootstrap_b = b;
        }
        if let Some(level) = args.level.or(cfg.level) {
            s.level = level;
        }
        if let Some(rule) = args.df_rule.or(cfg.df_rule) {
            s.df_rule = rule.into();
        }
        if let Some(ms) = &methods {
            // The weighted comparator has no Poisson form; drop it quietly
            // so one method list can serve a whole catalog.
            s.methods = ms
                .iter()
                .copied()
                .filter(|m| s.analysis == Analysis::Cox || *m != Method::CookKosorok)
                .collect();
        }
        s.validate()?;
    }

    let jobs = match args.jobs.or(cfg.jobs) {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(j) => j,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let total = scenarios.len();
    let mut summaries = Vec::with_capacity(total);
    for (i, s) in scenarios.iter().enumerate() {
        let start = Instant::now();
        let summary = run_scenario_with_jobs(s, jobs).with_context(|| format!("cell {}", s.name))?;
        eprintln!("[{}/{total}] {} done in {:.1}s", i + 1, s.name, start.elapsed().as_secs_f64());
        summaries.push(summary);
    }

    let timings = args.timings || cfg.timings;
    let output = args.output.or(cfg.output);
    let mut w = output::open(output.as_deref())?;
    match args.format.or(cfg.format).unwrap_or_default() {
        Format::Csv => write_summaries_csv(&summaries, timings, &mut w)?,
        Format::Markdown => write_summaries_markdown(&summaries, timings, &mut w)?,
    }
    w.flush()?;
    Ok(())
}
