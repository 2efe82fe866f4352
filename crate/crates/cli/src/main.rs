use std::path::PathBuf;

use anyhow::{bail, Result};
use bplambda_cli::config::{ExperimentConfig, LearnerSpec, TaskSpec};
use bplambda_cli::{runner, verify, write_outputs};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bplambda",
    about = "Synthetic gradients learned online with eligibility traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Replaces the config's seed list; repeatable.
    #[arg(long)]
    seed: Vec<u64>,
    /// Replaces the config's learner, e.g. `bp_lambda:0.5`, `no_bptt`; repeatable.
    #[arg(long)]
    learner: Vec<LearnerSpec>,
    /// MNIST directory; falls back to the config, then `data/mnist`.
    #[arg(long, env = "BPL_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Output stem; `.csv` and `.summary.json` are appended.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train and write a CSV log plus a JSON summary per learner.
    Run(RunArgs),
    /// Like `run` with alignment logging switched on.
    Align(RunArgs),
    /// Numerical self-checks, one JSON object per line.
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn prepare(args: &RunArgs, align: bool) -> Result<Vec<ExperimentConfig>> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if !args.seed.is_empty() {
        cfg.seeds = args.seed.clone();
    }
    cfg.desk_scale |= args.desk_scale;
    cfg.align |= align;
    if let (TaskSpec::SeqMnist { data_dir, .. }, Some(d)) = (&mut cfg.task, &args.data_dir) {
        *data_dir = Some(d.clone());
    }
    let cfg = cfg.effective();
    cfg.validate()?;
    let learners = if args.learner.is_empty() {
        vec![cfg.learner]
    } else {
        args.learner.clone()
    };
    Ok(learners.into_iter().map(|l| cfg.with_learner(l)).collect())
}

fn run(args: &RunArgs, align: bool) -> Result<()> {
    let configs = prepare(args, align)?;
    let several = configs.len() > 1;
    let mut failed = false;
    for cfg in &configs {
        let base = args
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
        let stem = if several {
            let name = base
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let label: String = cfg
                .learner
                .label()
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                .collect();
            base.with_file_name(format!("{name}_{}", label.trim_end_matches('_')))
        } else {
            base
        };
        let results = runner::run_seeds(cfg)?;
        let summary = write_outputs(cfg, &results, &stem)?;
        println!(
            "{} {}: {} = {:.4} ± {:.4} over {} seeds ({})",
            summary.name,
            summary.learner,
            summary.metric,
            summary.mean,
            summary.sem,
            results.len(),
            bplambda_cli::output::with_suffix(&stem, ".csv").display()
        );
        for r in &results {
            if let Some(e) = &r.error {
                eprintln!("seed {}: {e}", r.seed);
                failed = true;
            }
        }
    }
    if failed {
        bail!("one or more seeds failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run(args, false),
        Command::Align(args) => run(args, true),
        Command::Verify { out } => {
            let records = verify::run_suite()?;
            let text = verify::to_jsonl(&records);
            match out {
                Some(p) => std::fs::write(p, &text)?,
                None => print!("{text}"),
            }
            let bad = records.iter().filter(|r| !r.pass).count();
            if bad > 0 {
                bail!("{bad} of {} checks failed", records.len());
            }
            eprintln!("all {} checks passed", records.len());
            Ok(())
        }
    }
}
