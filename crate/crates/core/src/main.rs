// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use forgebench::config::{RunConfig, ScorerConfig};
use forgebench::error::{Error, Result};
use forgebench::fixture::{self, FixtureOptions};
use forgebench::perturb::parse_op_list;
use forgebench::pipeline;
use forgebench::report::{self, AucLevel};

#[derive(Parser)]
#[command(name = "forgebench", version, about = "Robustness benchmark for deepfake detectors under frame perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize perturbed copies of the test split.
    Perturb(RunArgs),
    /// Score the clean split and every perturbed copy.
    Score(RunArgs),
    /// Compute AUCs from scores and write the report.
    Evaluate(RunArgs),
    /// perturb, score and evaluate in one go.
    Run(RunArgs),
    /// Check the manifest, codec and scorer.
    Doctor(RunArgs),
    /// Verify that every op has a complete copy of the test split.
    Audit(RunArgs),
    /// Write a small synthetic dataset for installation checks.
    Fixture(FixtureArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest (overrides the config file).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output root (overrides the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated op ids to restrict the run to.
    #[arg(long)]
    ops: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Scorer command speaking the line protocol.
    #[arg(long, conflicts_with = "scores")]
    scorer_cmd: Option<String>,
    /// Precomputed score CSV.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Pool every sampled frame instead of aggregating per video.
    #[arg(long)]
    frame_level_auc: bool,
    /// Report missing ops as gaps instead of failing.
    #[arg(long)]
    allow_partial: bool,
    #[arg(long)]
    detector_name: Option<String>,
    #[arg(long)]
    trainset: Option<String>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 10)]
    n_real: usize,
    #[arg(long, default_value_t = 10)]
    n_fake: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.manifest {
        cfg.manifest = Some(m.clone());
    }
    if let Some(o) = &args.out {
        cfg.output_root = o.clone();
    }
    if let Some(ops) = &args.ops {
        cfg.restrict_ops(&parse_op_list(ops)?);
    }
    if let Some(s) = args.seed {
        cfg.global_seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(c) = &args.scorer_cmd {
        cfg.scorer = ScorerConfig::Protocol { command: c.clone() };
    }
    if let Some(p) = &args.scores {
        cfg.scorer = ScorerConfig::File { path: p.clone() };
    }
    if args.frame_level_auc {
        cfg.auc_level = AucLevel::Frame;
    }
    if args.allow_partial {
        cfg.allow_partial = true;
    }
    if let Some(d) = &args.detector_name {
        cfg.detector_name = Some(d.clone());
    }
    if let Some(t) = &args.trainset {
        cfg.trainset = t.clone();
    }
    Ok(cfg)
}

fn validated(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = build_config(args)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &report::EvalReport) -> Result<()> {
    print!("{}", report::render_markdown(std::slice::from_ref(report))?);
    if let Some(r) = report.reference_auc_percent {
        println!("clean AUC: {}", report::fmt2(r));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Perturb(a) => {
            let summary = pipeline::cmd_perturb(&validated(&a)?)?;
            print!("{summary}");
        }
        Command::Score(a) => {
            let summary = pipeline::cmd_score(&validated(&a)?)?;
            println!("scorer: {}", summary.scorer);
            for (key, n) in &summary.rows_per_key {
                println!("{key:<12} {n} rows");
            }
        }
        Command::Evaluate(a) => print_report(&pipeline::cmd_evaluate(&validated(&a)?)?)?,
        Command::Run(a) => print_report(&pipeline::cmd_run(&validated(&a)?)?)?,
        Command::Doctor(a) => {
            let cfg = build_config(&a)?;
            let report = pipeline::cmd_doctor(&cfg);
            print!("{report}");
            if !report.ok() {
                return Err(Error::StageFailed("doctor found problems".into()));
            }
        }
        Command::Audit(a) => {
            let findings = pipeline::audit_whole_copy(&validated(&a)?)?;
            if findings.is_empty() {
                println!("whole-copy audit passed");
            } else {
                for f in &findings {
                    println!("{}: {}", f.op_id, f.problem);
                }
                return Err(Error::StageFailed(format!("{} audit finding(s)", findings.len())));
            }
        }
        Command::Fixture(a) => {
            let opts = FixtureOptions {
                n_real: a.n_real,
                n_fake: a.n_fake,
                seed: a.seed,
                ..Default::default()
            };
            let manifest = fixture::generate(&a.out, &opts)?;
            println!("{}", manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
