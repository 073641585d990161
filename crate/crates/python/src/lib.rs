//! Python bindings for the core correction pipeline.
//!
//! Exposes the scoring primitives (edit extraction, F-beta, KL), synthetic
//! corpus generation, and a trainable `Corrector` handle good enough for
//! notebook-scale experiments. Token sequences cross the boundary as
//! strings under the same per-character tokenization the CLI uses.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::IntoPyObjectExt;

use alirector_core::alignment::{self, AblationMode, Direction};
use alirector_core::corpus::{self, ParallelExample, Vocab};
use alirector_core::correction;
use alirector_core::distill::{self, DistillConfig, TeacherBundle};
use alirector_core::error::Error;
use alirector_core::eval;
use alirector_core::model::{self, ModelParams, TemplateId};
use alirector_core::pipeline::RunSettings;
use alirector_core::seed;
use alirector_core::TokenId;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn full_vocab() -> Vocab {
    Vocab::new(62).expect("maximal body vocabulary is valid")
}

fn encode(vocab: &Vocab, s: &str) -> Vec<TokenId> {
    vocab.encode(s).0
}

/// F-measure over percent-scaled precision and recall.
#[pyfunction]
#[pyo3(signature = (precision, recall, beta = 0.5))]
fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    eval::f_beta(precision, recall, beta)
}

/// KL(p || q) with `0 ln 0 = 0` and the student side clamped at 1e-12.
#[pyfunction]
fn kl_div(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    if p.len() != q.len() {
        return Err(PyValueError::new_err("distributions must have equal length"));
    }
    Ok(distill::kl_div(&p, &q))
}

/// Softmax of `logits / tau`.
#[pyfunction]
#[pyo3(signature = (logits, tau = 1.0))]
fn tempered_distribution(logits: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
    if tau <= 0.0 {
        return Err(PyValueError::new_err("tau must be > 0"));
    }
    Ok(distill::tempered_distribution(&logits, tau))
}

fn edit_to_dict(py: Python<'_>, e: &eval::Edit, vocab: &Vocab) -> PyResult<Py<PyAny>> {
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("type", e.kind.as_str())?;
    dict.set_item("src_start", e.src_start)?;
    dict.set_item("src_end", e.src_end)?;
    dict.set_item("tgt_start", e.tgt_start)?;
    dict.set_item("tgt_end", e.tgt_end)?;
    dict.set_item("removed", vocab.decode(&e.removed))?;
    dict.set_item("replacement", vocab.decode(&e.replacement))?;
    dict.into_py_any(py)
}

/// Minimal edit script turning `source` into `hypothesis`, classified
/// into M/R/S/W span edits.
#[pyfunction]
fn extract_edits(py: Python<'_>, source: &str, hypothesis: &str) -> PyResult<Vec<Py<PyAny>>> {
    let vocab = full_vocab();
    let edits = eval::extract_edits(&encode(&vocab, source), &encode(&vocab, hypothesis));
    edits.iter().map(|e| edit_to_dict(py, e, &vocab)).collect()
}

fn report_to_dict(py: Python<'_>, report: &eval::EvalReport) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(report)
        .map_err(|e| PyValueError::new_err(format!("report serialization: {e}")))?;
    json_to_py(py, &json)
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value::*;
    Ok(match value {
        Null => py.None(),
        Bool(b) => b.into_py_any(py)?,
        Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)?
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)?
            }
        }
        String(s) => s.into_py_any(py)?,
        Array(items) => {
            let list = pyo3::types::PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)?
        }
        Object(map) => {
            let dict = pyo3::types::PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py_any(py)?
        }
    })
}

/// Scores `(source, target, hypothesis)` string triples; returns the full
/// edit-level report as a dict.
#[pyfunction]
fn score_corpus(py: Python<'_>, triples: Vec<(String, String, String)>) -> PyResult<Py<PyAny>> {
    let vocab = full_vocab();
    let triples: Vec<eval::EvalTriple> = triples
        .iter()
        .map(|(s, t, h)| eval::EvalTriple {
            source: encode(&vocab, s),
            target: encode(&vocab, t),
            hypothesis: encode(&vocab, h),
        })
        .collect();
    report_to_dict(py, &eval::score_corpus(&triples))
}

/// Generates `(source, target)` pairs from the synthetic grammar with
/// controlled error injection.
#[pyfunction]
#[pyo3(signature = (count, vocab_size = 48, min_len = 6, max_len = 12, seed = 1, clean_fraction = 0.45))]
fn generate_corpus(
    count: usize,
    vocab_size: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
    clean_fraction: f64,
) -> PyResult<Vec<(String, String)>> {
    let examples =
        generate_examples(count, vocab_size, min_len, max_len, seed, clean_fraction)?;
    let vocab = Vocab::new(vocab_size).map_err(to_py_err)?;
    Ok(examples.iter().map(|e| (vocab.decode(&e.source), vocab.decode(&e.target))).collect())
}

fn generate_examples(
    count: usize,
    vocab_size: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
    clean_fraction: f64,
) -> PyResult<Vec<ParallelExample>> {
    if !(0.0..=1.0).contains(&clean_fraction) {
        return Err(PyValueError::new_err("clean_fraction must be in [0,1]"));
    }
    let vocab = Vocab::new(vocab_size).map_err(to_py_err)?;
    let rules: Vec<corpus::CorruptionRule> = corpus::ErrorKind::ALL
        .iter()
        .map(|&kind| corpus::CorruptionRule {
            kind,
            rate: (1.0 - clean_fraction) / 4.0,
            span_len: 2,
        })
        .collect();
    let sentences = corpus::generate_clean_corpus(&corpus::CorpusConfig {
        count,
        vocab_size,
        min_len,
        max_len,
        seed,
    })
    .map_err(to_py_err)?;
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            corpus::corrupt(s, &rules, &vocab, seed::derive(seed, "noise", i as u64))
                .map_err(to_py_err)
        })
        .collect()
}

/// A trained corrector (or distilled student) with greedy/beam decoding.
#[pyclass]
struct Corrector {
    params: ModelParams,
    vocab: Vocab,
    max_decode_len: usize,
}

#[pymethods]
impl Corrector {
    /// Trains a corrector on `(source, target)` string pairs.
    #[staticmethod]
    #[pyo3(signature = (pairs, vocab_size = 48, hidden_dim = 32, layers = 1, epochs = 4, learning_rate = 2e-3, seed = 1, arch = "encoder_decoder"))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        pairs: Vec<(String, String)>,
        vocab_size: usize,
        hidden_dim: usize,
        layers: usize,
        epochs: usize,
        learning_rate: f64,
        seed: u64,
        arch: &str,
    ) -> PyResult<Self> {
        let vocab = Vocab::new(vocab_size).map_err(to_py_err)?;
        let examples: Vec<ParallelExample> = pairs
            .iter()
            .map(|(s, t)| {
                let source = encode(&vocab, s);
                let target = encode(&vocab, t);
                let applied_edits = eval::extract_edits(&source, &target);
                ParallelExample { source, target, applied_edits, example_seed: 0 }
            })
            .collect();
        if examples.is_empty() {
            return Err(PyValueError::new_err("need at least one training pair"));
        }
        let arch = match arch {
            "encoder_decoder" => model::Arch::EncoderDecoder,
            "decoder_only" => model::Arch::DecoderOnly,
            other => return Err(PyValueError::new_err(format!("unknown arch `{other}`"))),
        };
        let max_len = examples.iter().map(|e| e.source.len().max(e.target.len())).max().unwrap();
        let max_decode_len = max_len + 4;
        let model_config = model::ModelConfig {
            arch,
            layers,
            heads: 2,
            hidden_dim,
            ffn_dim: hidden_dim * 2,
            vocab_size: Vocab::RESERVED + vocab_size,
            max_positions: 3 * max_decode_len + 8,
            dropout: 0.1,
            dropout_src: 0.2,
        };
        let steps = epochs * examples.len().div_ceil(16);
        let train_config = alirector_core::train::TrainConfig {
            batch_size: 16,
            max_epochs: epochs,
            learning_rate,
            warmup_steps: (steps / 10).max(1),
            seed,
            patience: epochs,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        };
        let outcome = correction::train_correction(
            &examples,
            &examples[..examples.len().min(32)],
            &model_config,
            &train_config,
            TemplateId::DEFAULT,
            max_decode_len,
        )
        .map_err(to_py_err)?;
        Ok(Corrector { params: outcome.model, vocab, max_decode_len })
    }

    /// Decodes one source string.
    #[pyo3(signature = (source, beam_size = 1))]
    fn predict(&self, source: &str, beam_size: usize) -> PyResult<String> {
        let sources = vec![encode(&self.vocab, source)];
        let out = correction::predict_corpus(
            &self.params,
            &sources,
            beam_size,
            self.max_decode_len,
            TemplateId::DEFAULT,
        )
        .map_err(to_py_err)?;
        Ok(self.vocab.decode(&out[0]))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model::save_checkpoint(&path, &self.params, model::RngState::default())
            .map_err(to_py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (path, vocab_size = 48, max_decode_len = 20))]
    fn load(path: PathBuf, vocab_size: usize, max_decode_len: usize) -> PyResult<Self> {
        let (params, _) = model::load_checkpoint(&path).map_err(to_py_err)?;
        Ok(Corrector {
            params,
            vocab: Vocab::new(vocab_size).map_err(to_py_err)?,
            max_decode_len,
        })
    }

    fn param_count(&self) -> usize {
        self.params.store.param_count()
    }

    fn content_hash(&self) -> String {
        self.params.content_hash()
    }
}

/// Renders the correction / alignment instruction prompts as strings.
#[pyfunction]
#[pyo3(signature = (source, prediction = None, target = None, reverse = false))]
fn render_prompt(
    source: &str,
    prediction: Option<&str>,
    target: Option<&str>,
    reverse: bool,
) -> PyResult<String> {
    let vocab = full_vocab();
    let src = encode(&vocab, source);
    let tgt = target.map(|t| encode(&vocab, t));
    let prompt = match prediction {
        Some(pred) => model::render_align_prompt(
            TemplateId::DEFAULT,
            &src,
            &encode(&vocab, pred),
            tgt.as_deref(),
            reverse,
        ),
        None => model::render_gec_prompt(TemplateId::DEFAULT, &src, tgt.as_deref()),
    }
    .map_err(to_py_err)?;
    Ok(vocab.decode(&prompt.tokens))
}

/// Default desk-preset settings as a dict (for inspection from Python).
#[pyfunction]
fn desk_settings(py: Python<'_>) -> PyResult<Py<PyAny>> {
    let settings = RunSettings::default();
    let value = serde_json::to_value(&settings)
        .map_err(|e| PyValueError::new_err(format!("settings serialization: {e}")))?;
    json_to_py(py, &value)
}

/// End-to-end mini run of the method on synthetic data; returns test
/// scores per system. Sized for smoke testing, not for the full desk
/// experiment (use the `alirector` CLI for that).
#[pyfunction]
#[pyo3(signature = (train_count = 400, seed = 1))]
fn mini_pipeline(py: Python<'_>, train_count: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let vocab_size = 15;
    let (min_len, max_len) = (4, 8);
    let pool = generate_examples(train_count, vocab_size, min_len, max_len, seed, 0.45)?;
    let dev = generate_examples(60, vocab_size, min_len, max_len, seed + 1000, 0.45)?;
    let test = generate_examples(80, vocab_size, min_len, max_len, seed + 2000, 0.45)?;
    let split = corpus::split_dataset(pool, 0.8, seed).map_err(to_py_err)?;

    let model_config = model::ModelConfig {
        arch: model::Arch::EncoderDecoder,
        layers: 1,
        heads: 2,
        hidden_dim: 32,
        ffn_dim: 64,
        vocab_size: Vocab::RESERVED + vocab_size,
        max_positions: 32,
        dropout: 0.1,
        dropout_src: 0.2,
    };
    let train_config = alirector_core::train::TrainConfig {
        batch_size: 16,
        max_epochs: 4,
        learning_rate: 3e-3,
        warmup_steps: 10,
        seed,
        patience: 4,
        adam_beta1: 0.9,
        adam_beta2: 0.999,
        adam_eps: 1e-8,
    };
    let max_decode = max_len + 4;
    let template = TemplateId::DEFAULT;

    let corrector = correction::train_correction(
        &split.correction_train,
        &dev,
        &model_config,
        &train_config,
        template,
        max_decode,
    )
    .map_err(to_py_err)?;
    let triples = alignment::build_alignment_triples(
        &corrector.model,
        &split.alignment_train,
        2,
        max_decode,
        template,
    )
    .map_err(to_py_err)?;
    let dev_triples =
        alignment::build_alignment_triples(&corrector.model, &dev, 2, max_decode, template)
            .map_err(to_py_err)?;
    let mut continue_config = train_config.clone();
    continue_config.learning_rate *= 0.25;
    let fwd = alignment::train_alignment(
        &triples,
        &dev_triples,
        Direction::Forward,
        &model_config,
        &continue_config,
        template,
        max_decode,
        Some(&corrector.model),
    )
    .map_err(to_py_err)?;
    let rev = alignment::train_alignment(
        &triples,
        &dev_triples,
        Direction::Reverse,
        &model_config,
        &continue_config,
        template,
        max_decode,
        Some(&corrector.model),
    )
    .map_err(to_py_err)?;
    let teachers = TeacherBundle::new(fwd.model, rev.model).map_err(to_py_err)?;
    let student = distill::train_alirector(
        corrector.model.clone(),
        &teachers,
        &triples,
        &dev,
        &DistillConfig::default(),
        &continue_config,
        AblationMode::None,
        template,
        max_decode,
    )
    .map_err(to_py_err)?;

    let sources: Vec<Vec<TokenId>> = test.iter().map(|e| e.source.clone()).collect();
    let mut results = HashMap::new();
    for (name, params) in [("corrector", &corrector.model), ("alirector", &student.model)] {
        let hyps = correction::predict_corpus(params, &sources, 2, max_decode, template)
            .map_err(to_py_err)?;
        let triples: Vec<eval::EvalTriple> = test
            .iter()
            .zip(hyps)
            .map(|(e, h)| eval::EvalTriple {
                source: e.source.clone(),
                target: e.target.clone(),
                hypothesis: h,
            })
            .collect();
        results.insert(name.to_string(), eval::score_corpus(&triples));
    }
    let dict = pyo3::types::PyDict::new(py);
    for (name, report) in results {
        dict.set_item(name, report_to_dict(py, &report)?)?;
    }
    dict.into_py_any(py)
}

#[pymodule]
fn alirector_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(f_beta, m)?)?;
    m.add_function(wrap_pyfunction!(kl_div, m)?)?;
    m.add_function(wrap_pyfunction!(tempered_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(extract_edits, m)?)?;
    m.add_function(wrap_pyfunction!(score_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(render_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(desk_settings, m)?)?;
    m.add_function(wrap_pyfunction!(mini_pipeline, m)?)?;
    m.add_class::<Corrector>()?;
    Ok(())
}
