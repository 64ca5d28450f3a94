use std::io::Write;

use crate::error::{Error, Result};
use crate::mi::Analysis;
use crate::sim::run::{true_rates, MethodOutcome};
use crate::sim::scenario::{Method, SimScenario};

/// Mean of a per-replicate quantity and its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    /// `None` with fewer than two replicates.
    pub se: Option<f64>,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = (values.len() > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        });
        Self { mean, se }
    }
}

/// One table row.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub bias: f64,
    pub se_bias: Option<f64>,
    pub mean_width: f64,
    pub se_width: Option<f64>,
    pub coverage: f64,
    /// `sqrt(level * (1 - level) / n_reps)`.
    pub mc_error: f64,
    pub mean_runtime_seconds: f64,
    /// Poisson analyses: incidence at the Y1 quartiles.
    pub incidence: Option<[MeanSe; 3]>,
}

impl MethodSummary {
    /// Equality over every field except runtime, which is wall-clock.
    pub fn same_statistics(&self, other: &Self) -> bool {
        Self { mean_runtime_seconds: 0.0, ..self.clone() } == Self { mean_runtime_seconds: 0.0, ..other.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub beta_true: f64,
    pub level: f64,
    pub n_reps: usize,
    pub analysis: Analysis,
    /// Poisson analyses: generating-model incidence at the Y1 quartiles.
    pub true_rates: Option<[f64; 3]>,
    pub rows: Vec<MethodSummary>,
}

impl ScenarioSummary {
    pub fn row(&self, method: Method) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn same_statistics(&self, other: &Self) -> bool {
        let strip = |s: &Self| Self { rows: vec![], ..s.clone() };
        strip(self) == strip(other)
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same_statistics(b))
    }
}

/// Reduces per-replicate outcomes (`results[replicate][method]`) in
/// replicate order.
pub fn summarize(scenario: &SimScenario, results: &[Vec<Result<MethodOutcome>>]) -> Result<ScenarioSummary> {
    let mc_error = (scenario.level * (1.0 - scenario.level) / scenario.n_reps as f64).sqrt();
    let mut rows = Vec::with_capacity(scenario.methods.len());
    for (k, &method) in scenario.methods.iter().enumerate() {
        let ok: Vec<&MethodOutcome> = results.iter().filter_map(|rep| rep[k].as_ref().ok()).collect();
        if ok.is_empty() {
            return Err(Error::AllReplicatesFailed);
        }
        let errors: Vec<f64> = ok.iter().map(|o| o.estimate - scenario.beta_true).collect();
        let widths: Vec<f64> = ok.iter().map(|o| o.upper - o.lower).collect();
        let covered = ok.iter().filter(|o| o.lower <= scenario.beta_true && scenario.beta_true <= o.upper).count();
        let bias = MeanSe::of(&errors);
        let width = MeanSe::of(&widths);
        let incidence = ok[0].incidence.map(|_| {
            [0, 1, 2].map(|q| MeanSe::of(&ok.iter().map(|o| o.incidence.expect("poisson")[q]).collect::<Vec<_>>()))
        });
        rows.push(MethodSummary {
            method,
            n_ok: ok.len(),
            n_failed: results.len() - ok.len(),
            bias: bias.mean,
            se_bias: bias.se,
            mean_width: width.mean,
            se_width: width.se,
            coverage: covered as f64 / ok.len() as f64,
            mc_error,
            mean_runtime_seconds: ok.iter().map(|o| o.runtime_seconds).sum::<f64>() / ok.len() as f64,
            incidence,
        });
    }
    Ok(ScenarioSummary {
        scenario: scenario.name.clone(),
        beta_true: scenario.beta_true,
        level: scenario.level,
        n_reps: scenario.n_reps,
        analysis: scenario.analysis,
        true_rates: (scenario.analysis == Analysis::Poisson).then(|| true_rates(scenario.beta_true)),
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub const CSV_HEADER: [&str; 16] = [
    "scenario", "beta", "method", "bias", "se_bias", "width", "se_width", "coverage", "runtime", "failed", "q1",
    "q1_se", "q2", "q2_se", "q3", "q3_se",
];

/// Writes summary rows as CSV. With `include_runtime = false` the runtime
/// column is left empty so output is a pure function of the scenario.
pub fn write_summaries_csv<W: Write>(summaries: &[ScenarioSummary], include_runtime: bool, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for s in summaries {
        for r in &s.rows {
            let mut rec = vec![
                s.scenario.clone(),
                s.beta_true.to_string(),
                r.method.label().to_string(),
                r.bias.to_string(),
                opt(r.se_bias),
                r.mean_width.to_string(),
                opt(r.se_width),
                r.coverage.to_string(),
                if include_runtime { r.mean_runtime_seconds.to_string() } else { String::new() },
                r.n_failed.to_string(),
            ];
            match &r.incidence {
                Some(rates) => {
                    for q in rates {
                        rec.push(q.mean.to_string());
                        rec.push(opt(q.se));
                    }
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.digits$}"))
}

/// Writes one Markdown table per summary.
pub fn write_summaries_markdown<W: Write>(summaries: &[ScenarioSummary], include_runtime: bool, mut w: W) -> Result<()> {
    for s in summaries {
        writeln!(w, "### {} (level {}, {} replicates)\n", s.scenario, s.level, s.n_reps)?;
        writeln!(w, "| β | Method | Bias | SE (Bias) | Width | SE (Width) | Coverage | Running Time (s.) |")?;
        writeln!(w, "|---|---|---:|---:|---:|---:|---:|---:|")?;
        for r in &s.rows {
            let runtime = if include_runtime { format!("{:.3}", r.mean_runtime_seconds) } else { "-".into() };
            writeln!(
                w,
                "| {} | {} | {:.4} | {} | {:.4} | {} | {:.3} | {} |",
                s.beta_true,
                r.method.label(),
                r.bias,
                fixed(r.se_bias, 4),
                r.mean_width,
                fixed(r.se_width, 4),
                r.coverage,
                runtime
            )?;
        }
        if let Some(mc) = s.rows.first().map(|r| r.mc_error) {
            writeln!(w, "\nMonte Carlo error of coverage: {mc:.3}")?;
        }
        if let Some(truth) = s.true_rates {
            writeln!(w, "\n| Method | Q1 | SE | Q2 | SE | Q3 | SE |")?;
            writeln!(w, "|---|---:|---:|---:|---:|---:|---:|")?;
            writeln!(w, "| True Rates | {:.4} | | {:.4} | | {:.4} | |", truth[0], truth[1], truth[2])?;
            for r in &s.rows {
                if let Some(q) = &r.incidence {
                    writeln!(
                        w,
                        "| {} | {:.4} | {} | {:.4} | {} | {:.4} | {} |",
                        r.method.label(),
                        q[0].mean,
                        fixed(q[0].se, 4),
                        q[1].mean,
                        fixed(q[1].se, 4),
                        q[2].mean,
                        fixed(q[2].se, 4)
                    )?;
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
