//! Command-line front end for the alignment-enhanced corrector pipeline.
//!
//! Stages run against a persistent run directory and are resumable:
//! re-running a completed stage with an unchanged config is a no-op
//! unless `--force` is given. Exit codes: 0 success, 2 missing stage
//! dependency, 3 training divergence, 1 any other error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alirector_core::alignment::{AblationMode, Direction};
use alirector_core::error::{Error, Result};
use alirector_core::eval::render_report_text;
use alirector_core::pipeline::{self, AblateMode, RunConfig, RunSettings, SweepGrid};

#[derive(Parser)]
#[command(name = "alirector", version, about = "Alignment-enhanced corrector pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML config file; missing keys fall back to the desk preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory (defaults to $ALIRECTOR_RUN_ROOT/run-seed<seed>).
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Re-run the stage even when its manifest is up to date.
    #[arg(long)]
    force: bool,
}

impl Common {
    fn build(&self) -> Result<RunConfig> {
        let mut settings = match &self.config {
            Some(path) => {
                let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                RunSettings::from_toml(&raw)?
            }
            None => RunSettings::default(),
        };
        if let Some(seed) = self.seed {
            settings.seed = seed;
        }
        settings.validate()?;
        let run_dir = self.run_dir.clone().unwrap_or_else(|| {
            let root = std::env::var("ALIRECTOR_RUN_ROOT").unwrap_or_else(|_| "runs".into());
            PathBuf::from(root).join(format!("run-seed{}", settings.seed))
        });
        Ok(RunConfig { settings, run_dir, force: self.force })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus and the corrector/aligner split.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the initial corrector (or the full-data vanilla baseline).
    TrainCorrect {
        #[command(flatten)]
        common: Common,
        /// Train on correction + alignment splits (vanilla baseline).
        #[arg(long)]
        full_data: bool,
        /// Continue training from an existing checkpoint.
        #[arg(long)]
        init_from: Option<PathBuf>,
    },
    /// Decode initial corrections for the alignment split.
    BuildTriples {
        #[command(flatten)]
        common: Common,
    },
    /// Train one alignment teacher.
    TrainAlign {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_direction)]
        direction: Direction,
    },
    /// Distill both teachers into the corrector (the Alirector student).
    Distill {
        #[command(flatten)]
        common: Common,
        /// Initialize the student from this checkpoint instead of the
        /// run's corrector.
        #[arg(long)]
        init_from: Option<PathBuf>,
    },
    /// Decode a model over a parallel data file.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output name under predictions/.
        #[arg(long)]
        output: String,
    },
    /// Two-stage inference: corrector then forward aligner.
    PredictAndAlign {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: String,
        /// Optional input ablation (disc_source or disc_predict).
        #[arg(long, value_parser = parse_ablation)]
        ablation: Option<AblationMode>,
    },
    /// Score a predictions file against a parallel data file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hypotheses: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Report name under reports/.
        #[arg(long, default_value = "eval")]
        name: String,
        /// Number of mismatching cases to render in the text report.
        #[arg(long, default_value_t = 0)]
        diff: usize,
    },
    /// Train and score ablation variants against the full model.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated modes (no_kd_f, no_kd_r, no_kd, disc_source,
        /// disc_predict) or `all`.
        #[arg(long)]
        mode: String,
    },
    /// Sweep (alpha, beta) cells over shared teachers and triples.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated alpha values.
        #[arg(long)]
        alphas: Option<String>,
        /// Comma-separated beta values.
        #[arg(long)]
        betas: Option<String>,
        /// Comma-separated per-cell seeds.
        #[arg(long)]
        sweep_seeds: Option<String>,
    },
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    match s {
        "forward" => Ok(Direction::Forward),
        "reverse" => Ok(Direction::Reverse),
        other => Err(format!("unknown direction `{other}` (forward|reverse)")),
    }
}

fn parse_ablation(s: &str) -> std::result::Result<AblationMode, String> {
    match s.replace('-', "_").as_str() {
        "none" => Ok(AblationMode::None),
        "disc_source" => Ok(AblationMode::DiscSource),
        "disc_predict" => Ok(AblationMode::DiscPredict),
        other => Err(format!("unknown ablation `{other}` (none|disc_source|disc_predict)")),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|_| Error::Config(format!("bad {what} value `{x}`"))))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common } => {
            pipeline::gen_data(&common.build()?)?;
        }
        Command::TrainCorrect { common, full_data, init_from } => {
            pipeline::train_correct(&common.build()?, full_data, init_from.as_deref())?;
        }
        Command::BuildTriples { common } => {
            pipeline::build_triples(&common.build()?)?;
        }
        Command::TrainAlign { common, direction } => {
            pipeline::train_align(&common.build()?, direction)?;
        }
        Command::Distill { common, init_from } => {
            pipeline::distill_stage(&common.build()?, init_from.as_deref())?;
        }
        Command::Predict { common, model, input, output } => {
            pipeline::predict(&common.build()?, &model, &input, &output)?;
        }
        Command::PredictAndAlign { common, input, output, ablation } => {
            pipeline::predict_and_align_stage(
                &common.build()?,
                &input,
                &output,
                ablation.unwrap_or_default(),
            )?;
        }
        Command::Evaluate { common, hypotheses, data, name, diff } => {
            let cfg = common.build()?;
            let (_, report) = pipeline::evaluate(&cfg, &hypotheses, &data, &name, diff)?;
            print!("{}", render_report_text(&name, &report));
        }
        Command::Ablate { common, mode } => {
            let cfg = common.build()?;
            let modes: Vec<AblateMode> = if mode == "all" {
                AblateMode::ALL.to_vec()
            } else {
                parse_list::<String>(&mode, "mode")?
                    .iter()
                    .map(|m| m.parse())
                    .collect::<Result<_>>()?
            };
            let report = pipeline::ablate(&cfg, &modes)?;
            for r in &report.rows {
                println!(
                    "{:<14} P={:.2} R={:.2} F0.5={:.2} over={} under={}",
                    r.mode, r.precision, r.recall, r.f05, r.overcorrections, r.undercorrections
                );
            }
        }
        Command::Sweep { common, alphas, betas, sweep_seeds } => {
            let cfg = common.build()?;
            let mut grid = SweepGrid::default();
            grid.alpha_values =
                alphas.map(|s| parse_list(&s, "alpha")).transpose()?.unwrap_or(grid.alpha_values);
            grid.beta_values =
                betas.map(|s| parse_list(&s, "beta")).transpose()?.unwrap_or(grid.beta_values);
            grid.seeds = sweep_seeds
                .map(|s| parse_list(&s, "seed"))
                .transpose()?
                .unwrap_or(grid.seeds);
            let report = pipeline::sweep(&cfg, &grid)?;
            for p in &report.points {
                println!(
                    "alpha={} beta={} dev P={:.2} R={:.2} F0.5={:.2}",
                    p.alpha, p.beta, p.dev_p, p.dev_r, p.dev_f05
                );
            }
            for t in &report.trends {
                println!(
                    "alpha={}: precision non-decreasing in {}/{} transitions, recall non-increasing in {}/{}",
                    t.alpha,
                    t.precision_non_decreasing,
                    t.transitions,
                    t.recall_non_increasing,
                    t.transitions
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
