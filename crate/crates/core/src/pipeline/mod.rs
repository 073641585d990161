//! Experiment orchestration: persistent, resumable run directories.
//!
//! Every stage writes its artifacts under the run directory plus a
//! manifest recording the settings hash, input/output content hashes, the
//! seed, and wall time. Re-running a stage with an unchanged manifest is
//! a no-op unless forced; a stage whose declared inputs are missing fails
//! with a dependency error naming the stage to run first. Metrics files
//! contain no timestamps, so identical configs reproduce them byte for
//! byte.

mod experiments;
mod settings;

pub use experiments::{ablate, sweep, AblateMode, AblationReport, SweepGrid, SweepReport};
pub use settings::RunSettings;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{self, AblationMode, Direction, TriplesHeader};
use crate::corpus::{self, DatasetSplit, ParallelExample, Vocab};
use crate::correction;
use crate::distill::{self, TeacherBundle};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, EvalTriple};
use crate::model;
use crate::seed;
use crate::train::{EpochRecord, TrainOutcome};
use crate::TokenId;

/// One pipeline invocation: settings plus run-directory context.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub settings: RunSettings,
    pub run_dir: PathBuf,
    pub force: bool,
}

impl RunConfig {
    pub fn new(settings: RunSettings, run_dir: impl Into<PathBuf>) -> Self {
        RunConfig { settings, run_dir: run_dir.into(), force: false }
    }
}

// Artifact layout -----------------------------------------------------------

pub fn vocab_path(run: &Path) -> PathBuf {
    run.join("data/vocab.json")
}
pub fn data_path(run: &Path, part: &str) -> PathBuf {
    run.join(format!("data/{part}.jsonl"))
}
pub fn triples_path(run: &Path) -> PathBuf {
    run.join("data/triples.jsonl")
}
pub fn model_path(run: &Path, name: &str) -> PathBuf {
    run.join(format!("models/{name}.json"))
}
pub fn metrics_path(run: &Path, name: &str) -> PathBuf {
    run.join(format!("metrics/{name}.metrics.jsonl"))
}
pub fn predictions_path(run: &Path, name: &str) -> PathBuf {
    run.join(format!("predictions/{name}.jsonl"))
}
pub fn report_path(run: &Path, name: &str) -> PathBuf {
    run.join(format!("reports/{name}.json"))
}
fn manifest_path(run: &Path, stage: &str) -> PathBuf {
    run.join(format!("manifests/{stage}.json"))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArtifactRef {
    pub path: String,
    pub sha256: String,
}

/// Per-stage provenance record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<ArtifactRef>,
    pub outputs: Vec<ArtifactRef>,
    pub wall_time_secs: f64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: String,
    pub skipped: bool,
    pub outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn sha256_str(s: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(s.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn rel(run: &Path, path: &Path) -> String {
    path.strip_prefix(run).unwrap_or(path).to_string_lossy().into_owned()
}

fn artifact_refs(run: &Path, paths: &[PathBuf]) -> Result<Vec<ArtifactRef>> {
    paths
        .iter()
        .map(|p| Ok(ArtifactRef { path: rel(run, p), sha256: sha256_file(p)? }))
        .collect()
}

struct StageGuard<'a> {
    cfg: &'a RunConfig,
    stage: String,
    config_hash: String,
    inputs: Vec<PathBuf>,
    started: Instant,
}

impl<'a> StageGuard<'a> {
    fn new(cfg: &'a RunConfig, stage: &str, stage_params: &str, inputs: Vec<PathBuf>) -> Self {
        let config_hash =
            sha256_str(&format!("{}\n--stage {stage}\n{stage_params}", cfg.settings.to_toml()));
        StageGuard { cfg, stage: stage.to_string(), config_hash, inputs, started: Instant::now() }
    }

    /// True when a matching manifest exists and all artifacts still hash
    /// to what it recorded.
    fn can_skip(&self) -> bool {
        if self.cfg.force {
            return false;
        }
        let path = manifest_path(&self.cfg.run_dir, &self.stage);
        let Ok(raw) = fs::read_to_string(&path) else { return false };
        let Ok(manifest) = serde_json::from_str::<Manifest>(&raw) else { return false };
        if manifest.config_hash != self.config_hash {
            return false;
        }
        let fresh = |refs: &[ArtifactRef]| {
            refs.iter().all(|a| {
                sha256_file(&self.cfg.run_dir.join(&a.path)).map(|h| h == a.sha256).unwrap_or(false)
            })
        };
        fresh(&manifest.inputs) && fresh(&manifest.outputs)
    }

    fn finish(self, outputs: &[PathBuf], extra: serde_json::Value) -> Result<StageOutcome> {
        let run = &self.cfg.run_dir;
        let manifest = Manifest {
            stage: self.stage.clone(),
            config_hash: self.config_hash,
            seed: self.cfg.settings.seed,
            inputs: artifact_refs(run, &self.inputs)?,
            outputs: artifact_refs(run, outputs)?,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            extra,
        };
        let path = manifest_path(run, &self.stage);
        ensure_parent(&path)?;
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Contract(format!("serializing manifest: {e}")))?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        eprintln!("[{}] done in {:.1}s", self.stage, self.started.elapsed().as_secs_f64());
        Ok(StageOutcome { stage: self.stage, skipped: false, outputs: outputs.to_vec() })
    }

    fn skipped(self) -> StageOutcome {
        eprintln!("[{}] up to date, skipped (use --force to re-run)", self.stage);
        StageOutcome { stage: self.stage, skipped: true, outputs: vec![] }
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn require(cfg: &RunConfig, stage: &str, path: PathBuf, run_first: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Dependency {
            stage: stage.to_string(),
            missing: rel(&cfg.run_dir, &path),
            run_first: run_first.to_string(),
        })
    }
}

fn write_metrics(path: &Path, epochs: &[EpochRecord]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = Vec::new();
    for record in epochs {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Contract(format!("serializing metrics: {e}")))?;
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn save_outcome(
    run: &Path,
    name: &str,
    outcome: &TrainOutcome,
) -> Result<(PathBuf, PathBuf)> {
    let model_file = model_path(run, name);
    ensure_parent(&model_file)?;
    model::save_checkpoint(&model_file, &outcome.model, outcome.final_rng)?;
    let metrics_file = metrics_path(run, name);
    write_metrics(&metrics_file, &outcome.epochs)?;
    Ok((model_file, metrics_file))
}

fn load_vocab_for(cfg: &RunConfig, stage: &str) -> Result<Vocab> {
    let path = require(cfg, stage, vocab_path(&cfg.run_dir), "gen-data")?;
    corpus::load_vocab(path)
}

fn load_part(cfg: &RunConfig, stage: &str, part: &str, vocab: &Vocab) -> Result<Vec<ParallelExample>> {
    let path = require(cfg, stage, data_path(&cfg.run_dir, part), "gen-data")?;
    corpus::load_parallel_jsonl(path, vocab)
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Generates the synthetic corpus and the teacher/student split.
pub fn gen_data(cfg: &RunConfig) -> Result<StageOutcome> {
    let s = &cfg.settings;
    s.validate()?;
    let run = &cfg.run_dir;
    let guard = StageGuard::new(cfg, "gen-data", "", vec![]);
    if guard.can_skip() {
        return Ok(guard.skipped());
    }

    let vocab = Vocab::new(s.vocab_size)?;
    let rules = s.corruption_rules()?;
    let make_part = |tag: &str, count: usize| -> Result<Vec<ParallelExample>> {
        let part_seed = seed::derive(s.seed, tag, 0);
        let sentences = corpus::generate_clean_corpus(&corpus::CorpusConfig {
            count,
            vocab_size: s.vocab_size,
            min_len: s.min_len,
            max_len: s.max_len,
            seed: part_seed,
        })?;
        sentences
            .iter()
            .enumerate()
            .map(|(i, sent)| corpus::corrupt(sent, &rules, &vocab, seed::derive(part_seed, "noise", i as u64)))
            .collect()
    };

    let pool = make_part("train-pool", s.train_count)?;
    let dev = make_part("dev-pool", s.dev_count)?;
    let test = make_part("test-pool", s.test_count)?;
    let mut split: DatasetSplit =
        corpus::split_dataset(pool, s.split_ratio, seed::derive(s.seed, "split", 0))?;
    split.dev = dev;
    split.test = test;

    let vocab_file = vocab_path(run);
    ensure_parent(&vocab_file)?;
    corpus::save_vocab(&vocab_file, &vocab)?;
    let parts: [(&str, &[ParallelExample]); 4] = [
        ("correction_train", &split.correction_train),
        ("alignment_train", &split.alignment_train),
        ("dev", &split.dev),
        ("test", &split.test),
    ];
    let mut outputs = vec![vocab_file];
    for (name, examples) in parts {
        let path = data_path(run, name);
        ensure_parent(&path)?;
        corpus::save_parallel_jsonl(&path, examples, &vocab)?;
        outputs.push(path);
    }
    guard.finish(
        &outputs,
        serde_json::json!({
            "correction_train": split.correction_train.len(),
            "alignment_train": split.alignment_train.len(),
        }),
    )
}

/// Trains the initial corrector (or, with `full_data`, the vanilla
/// fine-tuning baseline over the whole training pool).
pub fn train_correct(
    cfg: &RunConfig,
    full_data: bool,
    init_from: Option<&Path>,
) -> Result<StageOutcome> {
    let s = &cfg.settings;
    let run = &cfg.run_dir;
    let stage = if full_data { "train-correct-full" } else { "train-correct" };
    let name = if full_data { "vanilla" } else { "corrector" };

    let vocab = load_vocab_for(cfg, stage)?;
    let mut train = load_part(cfg, stage, "correction_train", &vocab)?;
    if full_data {
        train.extend(load_part(cfg, stage, "alignment_train", &vocab)?);
    }
    let mut dev = load_part(cfg, stage, "dev", &vocab)?;
    dev.truncate(s.selection_dev_count());

    let mut inputs = vec![
        vocab_path(run),
        data_path(run, "correction_train"),
        data_path(run, "dev"),
    ];
    if full_data {
        inputs.push(data_path(run, "alignment_train"));
    }
    let mut params = format!("full_data={full_data}");
    if let Some(p) = init_from {
        params.push_str(&format!("\ninit_from={}", sha256_file(p)?));
        inputs.push(p.to_path_buf());
    }
    let guard = StageGuard::new(cfg, stage, &params, inputs);
    if guard.can_skip() {
        return Ok(guard.skipped());
    }

    let train_seed = seed::derive(s.seed, stage, 0);
    let outcome = match init_from {
        Some(path) => {
            let (init, _) = model::load_checkpoint(path)?;
            correction::continue_correction(
                &train,
                &dev,
                init,
                &s.train_config(train_seed),
                s.template(),
                s.max_decode_len(),
            )?
        }
        None => correction::train_correction(
            &train,
            &dev,
            &s.model_config(),
            &s.train_config(train_seed),
            s.template(),
            s.max_decode_len(),
        )?,
    };
    let (model_file, metrics_file) = save_outcome(run, name, &outcome)?;
    guard.finish(
        &[model_file, metrics_file],
        serde_json::json!({
            "best_epoch": outcome.best_epoch,
            "dev_f05": outcome.best_dev.f05,
        }),
    )
}

/// Decodes initial corrections over the alignment split and persists the
/// triples with corrector provenance.
pub fn build_triples(cfg: &RunConfig) -> Result<StageOutcome> {
    let s = &cfg.settings;
    let run = &cfg.run_dir;
    let stage = "build-triples";
    let vocab = load_vocab_for(cfg, stage)?;
    let examples = load_part(cfg, stage, "alignment_train", &vocab)?;
    let corrector_file = require(cfg, stage, model_path(run, "corrector"), "train-correct")?;

    let inputs = vec![corrector_file.clone(), data_path(run, "alignment_train")];
    let guard = StageGuard::new(cfg, stage, "", inputs);
    if guard.can_skip() {
        return Ok(guard.skipped());
    }

    let (corrector, _) = model::load_checkpoint(&corrector_file)?;
    let triples = alignment::build_alignment_triples(
        &corrector,
        &examples,
        s.beam_size,
        s.max_decode_len(),
        s.template(),
    )?;
    let header =
        TriplesHeader { corrector_hash: corrector.content_hash(), beam_size: s.beam_size };
    let path = triples_path(run);
    ensure_parent(&path)?;
    alignment::save_triples_jsonl(&path, &triples, &vocab, &header)?;
    guard.finish(&[path], serde_json::json!({ "triples": triples.len() }))
}

/// Trains one alignment teacher over the persisted triples.
pub fn train_align(cfg: &RunConfig, direction: Direction) -> Result<StageOutcome> {
    let s = &cfg.settings;
    let run = &cfg.run_dir;
    let stage = match direction {
        Direction::Forward => "train-align-forward",
        Direction::Reverse => "train-align-reverse",
    };
    let name = match direction {
        Direction::Forward => "aligner_forward",
        Direction::Reverse => "aligner_reverse",
    };
    let vocab = load_vocab_for(cfg, stage)?;
    let triples_file = require(cfg, stage, triples_path(run), "build-triples")?;
    let corrector_file = require(cfg, stage, model_path(run, "corrector"), "train-correct")?;
    let mut dev = load_part(cfg, stage, "dev", &vocab)?;
    dev.truncate(s.selection_dev_count());

    let inputs = vec![triples_file.clone(), corrector_file.clone(), data_path(run, "dev")];
    let guard = StageGuard::new(cfg, stage, "", inputs);
    if guard.can_skip() {
        return Ok(guard.skipped());
    }

    let (_, triples) = alignment::load_triples_jsonl(&triples_file, &vocab)?;
    // Dev triples come from the same frozen corrector so aligner selection
    // mirrors the inference-time distribution.
    let (corrector, _) = model::load_checkpoint(&corrector_file)?;
    let dev_triples = alignment::build_alignment_triples(
        &corrector,
        &dev,
        s.beam_size,
        s.max_decode_len(),
        s.template(),
    )?;
    let init = s.aligner_init_from_corrector.then(|| corrector.clone());
    let outcome = alignment::train_alignment(
        &triples,
        &dev_triples,
        direction,
        &s.aligner_model_config(),
        &s.aligner_train_config(seed::derive(s.seed, stage, 0), triples.len()),
        s.template(),
        s.max_decode_len(),
        init.as_ref(),
    )?;
    let (model_file, metrics_file) = save_outcome(run, name, &outcome)?;
    guard.finish(
        &[model_file, metrics_file],
        serde_json::json!({ "best_epoch": outcome.best_epoch, "dev_f05": outcome.best_dev.f05 }),
    )
}

/// Distills both frozen teachers into the corrector, producing the
/// Alirector student.
pub fn distill_stage(cfg: &RunConfig, init_from: Option<&Path>) -> Result<StageOutcome> {
    run_distill_variant(cfg, "distill", "alirector", init_from, None)
}

/// Shared implementation for the main distillation stage and its ablation
/// variants (which override alpha/beta or the teacher input mode).
pub(crate) fn run_distill_variant(
    cfg: &RunConfig,
    stage: &str,
    name: &str,
    init_from: Option<&Path>,
    overrides: Option<(f64, f64, AblationMode)>,
) -> Result<StageOutcome> {
    let s = &cfg.settings;
    let run = &cfg.run_dir;
    let vocab = load_vocab_for(cfg, stage)?;
    let triples_file = require(cfg, stage, triples_path(run), "build-triples")?;
    let corrector_file = require(cfg, stage, model_path(run, "corrector"), "train-correct")?;
    let fwd_file =
        require(cfg, stage, model_path(run, "aligner_forward"), "train-align --direction forward")?;
    let rev_file =
        require(cfg, stage, model_path(run, "aligner_reverse"), "train-align --direction reverse")?;
    let mut dev = load_part(cfg, stage, "dev", &vocab)?;
    dev.truncate(s.selection_dev_count());

    let mut inputs = vec![
        triples_file.clone(),
        corrector_file.clone(),
        fwd_file.clone(),
        rev_file.clone(),
        data_path(run, "dev"),
    ];
    let mut params = format!("overrides={overrides:?}");
    if let Some(p) = init_from {
        params.push_str(&format!("\ninit_from={}", sha256_file(p)?));
        inputs.push(p.to_path_buf());
    }
    let guard = StageGuard::new(cfg, stage, &params, inputs);
    if guard.can_skip() {
        return Ok(guard.skipped());
    }

    let (student_init, _) = model::load_checkpoint(init_from.unwrap_or(&corrector_file))?;
    let (forward, _) = model::load_checkpoint(&fwd_file)?;
    let (reverse, _) = model::load_checkpoint(&rev_file)?;
    let teachers = TeacherBundle::new(forward, reverse)?;
    let (header, triples) = alignment::load_triples_jsonl(&triples_file, &vocab)?;

    let mut distill_config = s.distill_config();
    let mut teacher_ablation = AblationMode::None;
    if let Some((alpha, beta, ablation)) = overrides {
        distill_config.alpha = alpha;
        distill_config.beta = beta;
        teacher_ablation = ablation;
    }
    let outcome = distill::train_alirector(
        student_init,
        &teachers,
        &triples,
        &dev,
        &distill_config,
        &s.continue_train_config(seed::derive(s.seed, stage, 0), triples.len()),
        teacher_ablation,
        s.template(),
        s.max_decode_len(),
    )?;
    let (model_file, metrics_file) = save_outcome(run, name, &outcome)?;
    let (fwd_hash, rev_hash) = teachers.hashes();
    guard.finish(
        &[model_file, metrics_file],
        serde_json::json!({
            "teacher_forward_hash": fwd_hash,
            "teacher_reverse_hash": rev_hash,
            "triples_corrector_hash": header.corrector_hash,
            "triples_file_hash": sha256_file(&triples_file)?,
            "distill_config": distill_config,
            "teacher_ablation": teacher_ablation,
            "best_epoch": outcome.best_epoch,
            "dev_f05": outcome.best_dev.f05,
        }),
    )
}

/// Decodes a model over a parallel data file, writing predictions.
pub fn predict(
    cfg: &RunConfig,
    model_file: &Path,
    input: &Path,
    output_name: &str,
) -> Result<StageOutcome> {
    let s = &cfg.settings;
    let run = &cfg.run_dir;
    let stage = format!("predict-{output_name}");
    let vocab = load_vocab_for(cfg, &stage)?;
    let model_file = require(cfg, &stage, model_file.to_path_buf(), "train-correct or distill")?;
    let input = require(cfg, &stage, input.to_path_buf(), "gen-data")?;

    let guard = StageGuard::new(cfg, &stage, output_name, vec![model_file.clone(), input.clone()]);
    if guard.can_skip() {
        return Ok(guard.skipped());
    }

    let (params, _) = model::load_checkpoint(&model_file)?;
    let examples = corpus::load_parallel_jsonl(&input, &vocab)?;
    let sources: Vec<Vec<TokenId>> = examples.iter().map(|e| e.source.clone()).collect();
    let predictions = correction::predict_corpus(
        &params,
        &sources,
        s.beam_size,
        s.max_decode_len(),
        s.template(),
    )?;
    let out = predictions_path(run, output_name);
    ensure_parent(&out)?;
    corpus::save_predictions_jsonl(&out, &sources, &predictions, &vocab)?;
    guard.finish(&[out], serde_json::Value::Null)
}

/// Two-stage predict-and-align over a parallel data file.
pub fn predict_and_align_stage(
    cfg: &RunConfig,
    input: &Path,
    output_name: &str,
    ablation: AblationMode,
) -> Result<StageOutcome> {
    let s = &cfg.settings;
    let run = &cfg.run_dir;
    let stage = format!("predict-and-align-{output_name}");
    let vocab = load_vocab_for(cfg, &stage)?;
    let corrector_file = require(cfg, &stage, model_path(run, "corrector"), "train-correct")?;
    let aligner_file =
        require(cfg, &stage, model_path(run, "aligner_forward"), "train-align --direction forward")?;
    let input = require(cfg, &stage, input.to_path_buf(), "gen-data")?;

    let guard = StageGuard::new(
        cfg,
        &stage,
        &format!("{output_name}\nablation={ablation:?}"),
        vec![corrector_file.clone(), aligner_file.clone(), input.clone()],
    );
    if guard.can_skip() {
        return Ok(guard.skipped());
    }

    let (corrector, _) = model::load_checkpoint(&corrector_file)?;
    let (aligner, _) = model::load_checkpoint(&aligner_file)?;
    let examples = corpus::load_parallel_jsonl(&input, &vocab)?;
    let sources: Vec<Vec<TokenId>> = examples.iter().map(|e| e.source.clone()).collect();
    let predictions: Vec<Vec<TokenId>> = sources
        .iter()
        .map(|src| {
            alignment::predict_and_align(
                &corrector,
                &aligner,
                src,
                s.beam_size,
                s.max_decode_len(),
                s.template(),
                ablation,
            )
        })
        .collect::<Result<_>>()?;
    let out = predictions_path(run, output_name);
    ensure_parent(&out)?;
    corpus::save_predictions_jsonl(&out, &sources, &predictions, &vocab)?;
    guard.finish(&[out], serde_json::Value::Null)
}

/// Scores a predictions file against a parallel data file and writes the
/// JSON + text report. Returns the report.
pub fn evaluate(
    cfg: &RunConfig,
    hypotheses: &Path,
    data: &Path,
    report_name: &str,
    diff_examples: usize,
) -> Result<(StageOutcome, EvalReport)> {
    let run = &cfg.run_dir;
    let stage = format!("evaluate-{report_name}");
    let vocab = load_vocab_for(cfg, &stage)?;
    let data = require(cfg, &stage, data.to_path_buf(), "gen-data")?;
    let hypotheses = require(cfg, &stage, hypotheses.to_path_buf(), "predict")?;

    let guard =
        StageGuard::new(cfg, &stage, report_name, vec![data.clone(), hypotheses.clone()]);
    let report_file = report_path(run, report_name);
    if guard.can_skip() && report_file.exists() {
        let raw = fs::read_to_string(&report_file).map_err(|e| Error::io(&report_file, e))?;
        let report: EvalReport = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: report_file.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        return Ok((guard.skipped(), report));
    }

    let examples = corpus::load_parallel_jsonl(&data, &vocab)?;
    let pairs = corpus::load_predictions_jsonl(&hypotheses, &vocab)?;
    if examples.len() != pairs.len() {
        return Err(Error::Contract(format!(
            "data has {} sentences but hypotheses file has {}",
            examples.len(),
            pairs.len()
        )));
    }
    let triples: Vec<EvalTriple> = examples
        .iter()
        .zip(&pairs)
        .map(|(ex, (src, hyp))| {
            if &ex.source != src {
                return Err(Error::Contract(
                    "hypotheses file does not match the data file (source mismatch)".into(),
                ));
            }
            Ok(EvalTriple {
                source: ex.source.clone(),
                target: ex.target.clone(),
                hypothesis: hyp.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let report = eval::score_corpus(&triples);

    ensure_parent(&report_file)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Contract(format!("serializing report: {e}")))?;
    fs::write(&report_file, json).map_err(|e| Error::io(&report_file, e))?;

    let mut text = eval::render_report_text(report_name, &report);
    for t in triples.iter().filter(|t| t.target != t.hypothesis).take(diff_examples) {
        text.push_str(&format!(
            "\n  src: {}\n  tgt: {}\n  hyp: {}\n",
            vocab.decode(&t.source),
            vocab.decode(&t.target),
            vocab.decode(&t.hypothesis)
        ));
    }
    let text_file = report_file.with_extension("txt");
    fs::write(&text_file, text).map_err(|e| Error::io(&text_file, e))?;

    let outcome = guard.finish(&[report_file, text_file], serde_json::Value::Null)?;
    Ok((outcome, report))
}

/// Convenience wrapper: predict with `model_name` on the test set and
/// evaluate the result, reusing cached artifacts when valid.
pub fn predict_and_evaluate(cfg: &RunConfig, model_name: &str) -> Result<EvalReport> {
    let run = cfg.run_dir.clone();
    let pred_name = format!("{model_name}_test");
    predict(cfg, &model_path(&run, model_name), &data_path(&run, "test"), &pred_name)?;
    let (_, report) =
        evaluate(cfg, &predictions_path(&run, &pred_name), &data_path(&run, "test"), &pred_name, 0)?;
    Ok(report)
}
