//! Ablations and hyperparameter sweeps over a completed base run.
//!
//! Both reuse the frozen teachers and persisted triples: an ablation
//! retrains the student with one ingredient removed (a distillation term,
//! or one slot of the teachers' alignment inputs); a sweep retrains the
//! student per (alpha, beta, seed) cell. Cells and ablation variants are
//! cached under the run directory, so interrupted sweeps resume from the
//! completed cells.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    data_path, ensure_parent, model_path, predict_and_evaluate, report_path, require,
    run_distill_variant, triples_path, RunConfig,
};
use crate::alignment::AblationMode;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::seed;
use crate::train::DevMetrics;

/// Ablation variants of the full Alirector objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblateMode {
    /// Drop the forward distillation term (alpha = 0).
    NoKdF,
    /// Drop the reverse distillation term (alpha = 1).
    NoKdR,
    /// Drop distillation entirely (beta = 0): continued fine-tuning.
    NoKd,
    /// Teachers see the initial correction twice.
    DiscSource,
    /// Teachers see the source twice.
    DiscPredict,
}

impl AblateMode {
    pub const ALL: [AblateMode; 5] = [
        AblateMode::NoKdF,
        AblateMode::NoKdR,
        AblateMode::NoKd,
        AblateMode::DiscSource,
        AblateMode::DiscPredict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblateMode::NoKdF => "no_kd_f",
            AblateMode::NoKdR => "no_kd_r",
            AblateMode::NoKd => "no_kd",
            AblateMode::DiscSource => "disc_source",
            AblateMode::DiscPredict => "disc_predict",
        }
    }

    /// (alpha, beta, teacher input mode) overrides for the variant.
    fn overrides(self, base_alpha: f64, base_beta: f64) -> (f64, f64, AblationMode) {
        match self {
            AblateMode::NoKdF => (0.0, base_beta, AblationMode::None),
            AblateMode::NoKdR => (1.0, base_beta, AblationMode::None),
            AblateMode::NoKd => (base_alpha, 0.0, AblationMode::None),
            AblateMode::DiscSource => (base_alpha, base_beta, AblationMode::DiscSource),
            AblateMode::DiscPredict => (base_alpha, base_beta, AblationMode::DiscPredict),
        }
    }
}

impl FromStr for AblateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "no_kd_f" => Ok(AblateMode::NoKdF),
            "no_kd_r" => Ok(AblateMode::NoKdR),
            "no_kd" => Ok(AblateMode::NoKd),
            "disc_source" => Ok(AblateMode::DiscSource),
            "disc_predict" => Ok(AblateMode::DiscPredict),
            other => Err(Error::Config(format!(
                "unknown ablation mode `{other}` (expected no_kd_f, no_kd_r, no_kd, disc_source, disc_predict)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: String,
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
    pub overcorrections: usize,
    pub undercorrections: usize,
}

/// Table-shaped comparison: the full model plus one row per variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

fn row(mode: &str, report: &EvalReport) -> AblationRow {
    AblationRow {
        mode: mode.to_string(),
        precision: report.precision,
        recall: report.recall,
        f05: report.f05,
        overcorrections: report.overcorrections,
        undercorrections: report.undercorrections,
    }
}

/// Trains and evaluates the requested ablation variants against the
/// completed full Alirector run.
pub fn ablate(cfg: &RunConfig, modes: &[AblateMode]) -> Result<AblationReport> {
    let run = &cfg.run_dir;
    // The comparison needs a completed full run first.
    require(cfg, "ablate", model_path(run, "alirector"), "distill")?;

    let full = predict_and_evaluate(cfg, "alirector")?;
    let mut rows = vec![row("full", &full)];
    for mode in modes {
        let name = format!("ablate_{}", mode.name());
        let (alpha, beta, ablation) =
            mode.overrides(cfg.settings.alpha, cfg.settings.beta);
        run_distill_variant(
            cfg,
            &format!("distill-{}", mode.name()),
            &name,
            None,
            Some((alpha, beta, ablation)),
        )?;
        let report = predict_and_evaluate(cfg, &name)?;
        rows.push(row(mode.name(), &report));
    }

    let report = AblationReport { rows };
    let path = report_path(run, "ablation");
    ensure_parent(&path)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Contract(format!("serializing ablation report: {e}")))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// Sweep grid over distillation hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub alpha_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepGrid {
    /// The studied beta grid at the tuned alpha, three seeds.
    fn default() -> Self {
        SweepGrid {
            alpha_values: vec![0.9],
            beta_values: vec![0.5, 1.0, 1.5, 2.0],
            seeds: vec![1, 2, 3],
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_values.is_empty() || self.beta_values.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("sweep grid lists must be nonempty".into()));
        }
        for &a in &self.alpha_values {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("sweep alpha {a} outside [0,1]")));
            }
        }
        for &b in &self.beta_values {
            if b < 0.0 {
                return Err(Error::Config(format!("sweep beta {b} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub dev: DevMetrics,
    pub best_epoch: usize,
}

/// Seed-mean dev metrics at one (alpha, beta) point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub beta: f64,
    pub dev_p: f64,
    pub dev_r: f64,
    pub dev_f05: f64,
}

/// Monotonic-trend counts of seed-mean precision/recall along the beta
/// axis at fixed alpha.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaTrend {
    pub alpha: f64,
    pub transitions: usize,
    pub precision_non_decreasing: usize,
    pub recall_non_increasing: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub points: Vec<SweepPoint>,
    pub trends: Vec<BetaTrend>,
}

fn cell_path(run: &Path, alpha: f64, beta: f64, seed: u64) -> PathBuf {
    run.join(format!("sweep/alpha{alpha}_beta{beta}_seed{seed}.json"))
}

#[derive(Serialize, Deserialize)]
struct CellFile {
    config_hash: String,
    cell: SweepCell,
}

/// Runs (or resumes) the sweep: one student per grid cell over shared
/// teachers and triples, then a trend summary and plot-ready points.
pub fn sweep(cfg: &RunConfig, grid: &SweepGrid) -> Result<SweepReport> {
    grid.validate()?;
    let run = &cfg.run_dir;
    require(cfg, "sweep", triples_path(run), "build-triples")?;
    require(cfg, "sweep", model_path(run, "corrector"), "train-correct")?;
    require(cfg, "sweep", model_path(run, "aligner_forward"), "train-align --direction forward")?;
    require(cfg, "sweep", model_path(run, "aligner_reverse"), "train-align --direction reverse")?;

    // Cell caching keys on everything that affects a cell's result.
    let base_hash = super::sha256_str(&format!(
        "{}\nsweep\n{}\n{}\n{}\n{}",
        cfg.settings.to_toml(),
        super::sha256_file(&triples_path(run))?,
        super::sha256_file(&model_path(run, "corrector"))?,
        super::sha256_file(&model_path(run, "aligner_forward"))?,
        super::sha256_file(&model_path(run, "aligner_reverse"))?,
    ));

    let mut cells = Vec::new();
    for &alpha in &grid.alpha_values {
        for &beta in &grid.beta_values {
            for &cell_seed in &grid.seeds {
                let path = cell_path(run, alpha, beta, cell_seed);
                if !cfg.force {
                    if let Ok(raw) = fs::read_to_string(&path) {
                        if let Ok(file) = serde_json::from_str::<CellFile>(&raw) {
                            if file.config_hash == base_hash {
                                cells.push(file.cell);
                                continue;
                            }
                        }
                    }
                }
                let cell = run_cell(cfg, alpha, beta, cell_seed)?;
                ensure_parent(&path)?;
                let json =
                    serde_json::to_string_pretty(&CellFile { config_hash: base_hash.clone(), cell: cell.clone() })
                        .map_err(|e| Error::Contract(format!("serializing sweep cell: {e}")))?;
                fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
                cells.push(cell);
            }
        }
    }

    let report = summarize(cells, grid);
    let path = report_path(run, "sweep");
    ensure_parent(&path)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Contract(format!("serializing sweep report: {e}")))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

    // Plot-ready CSV of the seed-mean P/R/F0.5-vs-beta curves.
    let mut csv = String::from("alpha,beta,dev_p,dev_r,dev_f05\n");
    for p in &report.points {
        csv.push_str(&format!("{},{},{:.4},{:.4},{:.4}\n", p.alpha, p.beta, p.dev_p, p.dev_r, p.dev_f05));
    }
    let csv_path = run.join("reports/sweep.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    Ok(report)
}

fn run_cell(cfg: &RunConfig, alpha: f64, beta: f64, cell_seed: u64) -> Result<SweepCell> {
    use crate::{alignment, corpus, distill, model};
    let run = &cfg.run_dir;
    let s = &cfg.settings;
    let vocab = corpus::load_vocab(super::vocab_path(run))?;
    let (student_init, _) = model::load_checkpoint(model_path(run, "corrector"))?;
    let (forward, _) = model::load_checkpoint(model_path(run, "aligner_forward"))?;
    let (reverse, _) = model::load_checkpoint(model_path(run, "aligner_reverse"))?;
    let teachers = distill::TeacherBundle::new(forward, reverse)?;
    let (_, triples) = alignment::load_triples_jsonl(triples_path(run), &vocab)?;
    let mut dev = corpus::load_parallel_jsonl(data_path(run, "dev"), &vocab)?;
    dev.truncate(s.selection_dev_count());

    let mut distill_config = s.distill_config();
    distill_config.alpha = alpha;
    distill_config.beta = beta;
    let outcome = distill::train_alirector(
        student_init,
        &teachers,
        &triples,
        &dev,
        &distill_config,
        &s.continue_train_config(seed::derive(cell_seed, "sweep-cell", 0), triples.len()),
        AblationMode::None,
        s.template(),
        s.max_decode_len(),
    )?;
    Ok(SweepCell {
        alpha,
        beta,
        seed: cell_seed,
        dev: outcome.best_dev,
        best_epoch: outcome.best_epoch,
    })
}

fn summarize(cells: Vec<SweepCell>, grid: &SweepGrid) -> SweepReport {
    let mut points = Vec::new();
    let mut trends = Vec::new();
    for &alpha in &grid.alpha_values {
        let mut series: Vec<SweepPoint> = Vec::new();
        for &beta in &grid.beta_values {
            let matching: Vec<&SweepCell> = cells
                .iter()
                .filter(|c| c.alpha == alpha && c.beta == beta)
                .collect();
            let n = matching.len().max(1) as f64;
            series.push(SweepPoint {
                alpha,
                beta,
                dev_p: matching.iter().map(|c| c.dev.precision).sum::<f64>() / n,
                dev_r: matching.iter().map(|c| c.dev.recall).sum::<f64>() / n,
                dev_f05: matching.iter().map(|c| c.dev.f05).sum::<f64>() / n,
            });
        }
        let transitions = series.len().saturating_sub(1);
        let precision_non_decreasing = series
            .windows(2)
            .filter(|w| w[1].dev_p >= w[0].dev_p - 1e-9)
            .count();
        let recall_non_increasing = series
            .windows(2)
            .filter(|w| w[1].dev_r <= w[0].dev_r + 1e-9)
            .count();
        trends.push(BetaTrend {
            alpha,
            transitions,
            precision_non_decreasing,
            recall_non_increasing,
        });
        points.extend(series);
    }
    SweepReport { cells, points, trends }
}
