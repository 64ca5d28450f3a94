use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use survmi_core::{write_csv, GlmOptions, ImputationModel, Purpose, Substream};

use crate::config::{self, DataArgs, DataConfig};
use crate::output;

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of completed datasets [default: 10].
    #[arg(long)]
    m: Option<usize>,
    /// Directory for the completed files, named `<input stem>_<j>.csv`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn run(args: ImputeArgs) -> Result<()> {
    let cfg: DataConfig = config::load(args.data.config.as_deref())?;
    let (dataset, schema) = args.data.load(&cfg.schema)?;
    let m = args.m.or(cfg.m).unwrap_or(10);
    if m < 1 {
        bail!("--m must be at least 1");
    }
    let Some(dir) = args.output.or(cfg.output) else {
        bail!("pass -o DIR for the completed files");
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = args.data.data.file_stem().and_then(|s| s.to_str()).unwrap_or("imputed").to_string();

    // Same streams as `analyze`, so file j is the j-th dataset it pools.
    let model = if dataset.has_missing() {
        let seed = config::resolve_seed(args.data.seed, cfg.seed)?;
        let spec = args.data.imputation_spec(&cfg.imputation, &dataset)?;
        Some((ImputationModel::fit(&dataset, &spec, &GlmOptions::default())?, Substream::new(seed)))
    } else {
        eprintln!("warning: no missing failure indicators; writing {m} identical copies");
        None
    };
    for j in 0..m {
        let completed = match &model {
            Some((model, stream)) => {
                let mut rng = stream.purpose(Purpose::Imputation).index(j as u64).rng();
                model.impute(&dataset, &mut rng)?.dataset
            }
            None => dataset.clone(),
        };
        let path = dir.join(format!("{stem}_{}.csv", j + 1));
        let mut w = output::open(Some(&path))?;
        write_csv(&completed, &schema, &mut w)?;
        w.flush()?;
    }
    Ok(())
}
