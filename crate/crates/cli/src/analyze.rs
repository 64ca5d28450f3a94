use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use survmi_core::mi::fit_outcome;
use survmi_core::nalgebra::{DMatrix, DVector};
use survmi_core::{
    mi_analyze, pooled_incidence, Analysis, CoxOptions, Dataset, GlmOptions, MiOptions, PooledEstimate, Status,
    Substream,
};

use crate::config::{self, AnalysisArg, DataArgs, DataConfig, DfRuleArg, Format};
use crate::output;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Outcome model [default: cox].
    #[arg(long)]
    analysis: Option<AnalysisArg>,
    /// Number of imputations [default: 10].
    #[arg(long)]
    m: Option<usize>,
    /// Interval coverage [default: 0.95].
    #[arg(long)]
    level: Option<f64>,
    /// Pooled degrees-of-freedom rule [default: linear].
    #[arg(long)]
    df_rule: Option<DfRuleArg>,
    /// Treat missing indicators as censored instead of imputing them.
    #[arg(long)]
    no_impute: bool,
    /// Baseline covariate values at which to report an incidence rate
    /// (Poisson only). Repeat for several points.
    #[arg(long, value_name = "V1,V2,...", allow_negative_numbers = true)]
    at: Vec<String>,
    #[arg(long)]
    format: Option<Format>,
    /// Output file [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

struct Row {
    term: String,
    estimate: f64,
    std_error: f64,
    df: f64,
    lower: f64,
    upper: f64,
    p_value: f64,
}

struct Incidence {
    point: String,
    rate: f64,
    lower: f64,
    upper: f64,
    df: f64,
}

fn parse_point(s: &str, k: usize) -> Result<Vec<f64>> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("`{v}` in --at {s} is not a number")))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != k {
        bail!("--at {s} has {} values, the model has {k} baseline covariates", values.len());
    }
    Ok(values)
}

fn censor_missing(dataset: &Dataset) -> Result<Dataset> {
    let rows = dataset
        .subjects()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if s.status.is_missing() {
                s.status = Status::Censored;
            }
            s
        })
        .collect();
    Ok(dataset.with_subjects(rows)?)
}

/// A single fit viewed as a pooled estimate with no between-imputation
/// variance, so it gets normal-reference intervals.
fn single_fit(beta: DVector<f64>, cov: DMatrix<f64>) -> PooledEstimate {
    let k = beta.len();
    PooledEstimate {
        beta_bar: beta,
        within_var: cov.clone(),
        between_var: DMatrix::zeros(k, k),
        total_var: cov,
        df: DVector::from_element(k, f64::INFINITY),
        m: 1,
    }
}

fn fmt_p(p: f64) -> String {
    if p < 1e-4 {
        "<0.0001".into()
    } else {
        format!("{p:.4}")
    }
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let cfg: DataConfig = config::load(args.data.config.as_deref())?;
    let (dataset, _) = args.data.load(&cfg.schema)?;
    let analysis: Analysis = args.analysis.or(cfg.analysis).map(Into::into).unwrap_or_default();
    let level = args.level.or(cfg.level).unwrap_or(0.95);
    if !(level > 0.0 && level < 1.0) {
        bail!("--level {level} must lie in (0, 1)");
    }
    let k = dataset.n_baseline();
    let points: Vec<Vec<f64>> = if args.at.is_empty() {
        cfg.at.clone().unwrap_or_default()
    } else {
        args.at.iter().map(|s| parse_point(s, k)).collect::<Result<_>>()?
    };
    if let Some(bad) = points.iter().find(|p| p.len() != k) {
        bail!("incidence point {bad:?} has {} values, the model has {k} baseline covariates", bad.len());
    }
    if !points.is_empty() && analysis != Analysis::Poisson {
        bail!("--at requires --analysis poisson");
    }

    let pooled = if args.no_impute || !dataset.has_missing() {
        // Without missing indicators every completed dataset is the input,
        // so imputation reduces to a single fit.
        let (b, v) = fit_outcome(&censor_missing(&dataset)?, analysis, &CoxOptions::default(), &GlmOptions::default())?;
        single_fit(b, v)
    } else {
        let seed = config::resolve_seed(args.data.seed, cfg.seed)?;
        let spec = args.data.imputation_spec(&cfg.imputation, &dataset)?;
        let opts = MiOptions {
            m: args.m.or(cfg.m).unwrap_or(10),
            level,
            df_rule: args.df_rule.or(cfg.df_rule).map(Into::into).unwrap_or_default(),
            analysis,
            ..MiOptions::default()
        };
        let result = mi_analyze(&dataset, &spec, &opts, Substream::new(seed))?;
        eprintln!("imputed {} missing indicators in each of {} datasets", result.imputed, opts.m);
        result.pooled
    };

    let rows: Vec<Row> = analysis
        .coefficient_names(&dataset)
        .into_iter()
        .enumerate()
        .map(|(j, term)| {
            let (lower, upper) = pooled.interval(j, level);
            Row {
                term,
                estimate: pooled.beta_bar[j],
                std_error: pooled.total_var[(j, j)].sqrt(),
                df: pooled.df[j],
                lower,
                upper,
                p_value: pooled.p_value(j),
            }
        })
        .collect();
    let incidence = points
        .iter()
        .map(|p| {
            let mut x = vec![1.0];
            x.extend(p);
            let est = pooled_incidence(&pooled, &x, level)?;
            let point = dataset
                .baseline_names()
                .iter()
                .zip(p)
                .map(|(n, v)| format!("{n}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            Ok(Incidence { point, rate: est.rate, lower: est.lower, upper: est.upper, df: est.df })
        })
        .collect::<Result<Vec<_>>>()?;

    let output = args.output.or(cfg.output);
    let mut w = output::open(output.as_deref())?;
    let ratio = if analysis == Analysis::Cox { "hazard_ratio" } else { "rate_ratio" };
    match args.format.or(cfg.format).unwrap_or_default() {
        Format::Csv => {
            writeln!(w, "kind,term,estimate,std_error,df,{ratio},lower,upper,p_value")?;
            for r in &rows {
                writeln!(
                    w,
                    "coefficient,{},{},{},{},{},{},{},{}",
                    r.term,
                    r.estimate,
                    r.std_error,
                    r.df,
                    r.estimate.exp(),
                    r.lower.exp(),
                    r.upper.exp(),
                    r.p_value
                )?;
            }
            for i in &incidence {
                writeln!(w, "incidence,{},{},,{},{},{},{},", i.point, i.rate.ln(), i.df, i.rate, i.lower, i.upper)?;
            }
        }
        Format::Markdown => {
            let label = if analysis == Analysis::Cox { "HR" } else { "RR" };
            writeln!(w, "| Covariate | {label} | LCL | UCL | P |")?;
            writeln!(w, "|---|---:|---:|---:|---:|")?;
            for r in &rows {
                writeln!(
                    w,
                    "| {} | {:.3} | {:.3} | {:.3} | {} |",
                    r.term,
                    r.estimate.exp(),
                    r.lower.exp(),
                    r.upper.exp(),
                    fmt_p(r.p_value)
                )?;
            }
            if !incidence.is_empty() {
                writeln!(w)?;
                writeln!(w, "| Point | Rate | LCL | UCL |")?;
                writeln!(w, "|---|---:|---:|---:|")?;
                for i in &incidence {
                    writeln!(w, "| {} | {:.4} | {:.4} | {:.4} |", i.point, i.rate, i.lower, i.upper)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
