//! Alignment models over (source, initial correction) pairs.
//!
//! The forward aligner reads `X [SEP] Y-hat`, the reverse aligner
//! `Y-hat [SEP] X`, and both predict the gold target. Ablation modes
//! replace one slot with the other (`disc_source` doubles the initial
//! correction, `disc_predict` doubles the source) while keeping the input
//! format intact. Two-stage predict-and-align inference decodes an initial
//! correction and feeds the pair through an aligner for a second round.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ParallelExample, Vocab};
use crate::error::{Error, Result};
use crate::model::{
    self, decode, DecodeInput, Mode, ModelConfig, ModelParams, NodeId, RenderedPrompt, Role, Tape,
    TemplateId,
};
use crate::train::{self, DevMetrics, LossBreakdown, TrainConfig, TrainOutcome, TrainTask};
use crate::{correction, eval, TokenId};

/// One alignment training triple.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentExample {
    pub source: Vec<TokenId>,
    pub prediction: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn role(self) -> Role {
        match self {
            Direction::Forward => Role::ForwardAligner,
            Direction::Reverse => Role::ReverseAligner,
        }
    }
}

/// Input ablations used by the distillation-time ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    #[default]
    None,
    /// Both slots hold the initial correction.
    DiscSource,
    /// Both slots hold the source.
    DiscPredict,
}

/// Architecture-specific token form of one alignment input.
#[derive(Debug, Clone, PartialEq)]
pub enum AlignmentTokens {
    /// Encoder-decoder: the encoder-side sequence `first SEP second`.
    Encoder(Vec<TokenId>),
    /// Decoder-only: a rendered instruction prompt.
    Prompt(RenderedPrompt),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentInput {
    pub direction: Direction,
    pub ablation: AblationMode,
    pub tokens: AlignmentTokens,
}

/// Resolves the two input slots after ablation and direction.
fn slots<'a>(
    source: &'a [TokenId],
    prediction: &'a [TokenId],
    direction: Direction,
    ablation: AblationMode,
) -> (&'a [TokenId], &'a [TokenId]) {
    let (a, b) = match ablation {
        AblationMode::None => (source, prediction),
        AblationMode::DiscSource => (prediction, prediction),
        AblationMode::DiscPredict => (source, source),
    };
    match direction {
        Direction::Forward => (a, b),
        Direction::Reverse => (b, a),
    }
}

/// Builds the aligner input for one (X, Y-hat) pair.
///
/// For training the decoder-only variant, pass the gold target so the
/// prompt carries a loss span; leave it `None` for inference.
pub fn build_alignment_input(
    source: &[TokenId],
    prediction: &[TokenId],
    direction: Direction,
    ablation: AblationMode,
    config: &ModelConfig,
    template: TemplateId,
    target: Option<&[TokenId]>,
) -> Result<AlignmentInput> {
    if source.is_empty() || prediction.is_empty() {
        return Err(Error::Contract("alignment input fields must be nonempty".into()));
    }
    let (first, second) = slots(source, prediction, direction, ablation);
    let tokens = match config.arch {
        model::Arch::EncoderDecoder => {
            let mut tokens = Vec::with_capacity(first.len() + second.len() + 1);
            tokens.extend_from_slice(first);
            tokens.push(Vocab::SEP);
            tokens.extend_from_slice(second);
            if tokens.len() > config.max_positions {
                return Err(Error::Capacity { needed: tokens.len(), max: config.max_positions });
            }
            AlignmentTokens::Encoder(tokens)
        }
        model::Arch::DecoderOnly => {
            // The renderer only concatenates; direction and ablation were
            // already applied to the slot pair.
            let prompt = model::render_align_prompt(template, first, second, target, false)?;
            if prompt.tokens.len() > config.max_positions {
                return Err(Error::Capacity {
                    needed: prompt.tokens.len(),
                    max: config.max_positions,
                });
            }
            AlignmentTokens::Prompt(prompt)
        }
    };
    Ok(AlignmentInput { direction, ablation, tokens })
}

/// Teacher-forced loss graph of an aligner on one triple.
pub(crate) fn alignment_graph(
    model: &ModelParams,
    example: &AlignmentExample,
    direction: Direction,
    ablation: AblationMode,
    template: TemplateId,
    mode: &mut Mode,
) -> Result<(Tape, NodeId, NodeId)> {
    let input = build_alignment_input(
        &example.source,
        &example.prediction,
        direction,
        ablation,
        &model.config,
        template,
        Some(&example.target),
    )?;
    let loss_targets: Vec<usize> =
        model::target_with_eos(&example.target).iter().map(|&t| t as usize).collect();
    let (mut tape, logits) = match &input.tokens {
        AlignmentTokens::Encoder(enc) => {
            let dec = model::teacher_forced_decoder_input(&example.target);
            model::build_forward(model, Some(enc), &dec, 0..dec.len(), mode)?
        }
        AlignmentTokens::Prompt(prompt) => {
            let rows = prompt.target_span.start - 1..prompt.target_span.end - 1;
            model::build_forward(model, None, &prompt.tokens, rows, mode)?
        }
    };
    let loss = tape.nll_sum(logits, &loss_targets);
    Ok((tape, logits, loss))
}

struct AlignmentTask<'a> {
    triples: &'a [AlignmentExample],
    dev: &'a [AlignmentExample],
    direction: Direction,
    template: TemplateId,
    max_decode_len: usize,
}

impl TrainTask for AlignmentTask<'_> {
    fn num_examples(&self) -> usize {
        self.triples.len()
    }

    fn example_loss(
        &self,
        model: &ModelParams,
        index: usize,
        mode: &mut Mode,
    ) -> Result<(Tape, NodeId, LossBreakdown)> {
        let (tape, _, loss) = alignment_graph(
            model,
            &self.triples[index],
            self.direction,
            AblationMode::None,
            self.template,
            mode,
        )?;
        let value = tape.scalar(loss);
        Ok((tape, loss, LossBreakdown::plain(value)))
    }

    fn dev_metrics(&self, model: &ModelParams) -> Result<DevMetrics> {
        let triples: Vec<eval::EvalTriple> = self
            .dev
            .iter()
            .map(|ex| {
                let hyp = align_decode(
                    model,
                    &ex.source,
                    &ex.prediction,
                    self.direction,
                    AblationMode::None,
                    self.template,
                    1,
                    self.max_decode_len,
                )?;
                Ok(eval::EvalTriple {
                    source: ex.source.clone(),
                    target: ex.target.clone(),
                    hypothesis: hyp,
                })
            })
            .collect::<Result<_>>()?;
        let report = eval::score_corpus(&triples);
        Ok(DevMetrics { precision: report.precision, recall: report.recall, f05: report.f05 })
    }
}

/// Decodes an aligner on one (X, Y-hat) pair.
#[allow(clippy::too_many_arguments)]
pub fn align_decode(
    model: &ModelParams,
    source: &[TokenId],
    prediction: &[TokenId],
    direction: Direction,
    ablation: AblationMode,
    template: TemplateId,
    beam_size: usize,
    max_len: usize,
) -> Result<Vec<TokenId>> {
    let input = build_alignment_input(
        source,
        prediction,
        direction,
        ablation,
        &model.config,
        template,
        None,
    )?;
    let decoded = match &input.tokens {
        AlignmentTokens::Encoder(enc) => {
            decode(model, &DecodeInput::EncoderDecoder { source: enc }, beam_size, max_len)?
        }
        AlignmentTokens::Prompt(prompt) => {
            decode(model, &DecodeInput::DecoderOnly { prompt: &prompt.tokens }, beam_size, max_len)?
        }
    };
    Ok(decoded.tokens)
}

/// Trains one alignment (teacher) model on precomputed triples.
///
/// `init_from` warm-starts the aligner (typically from the trained
/// corrector, standing in for a pretrained backbone); its architecture
/// must match `model_config` apart from the dropout knobs.
#[allow(clippy::too_many_arguments)]
pub fn train_alignment(
    triples: &[AlignmentExample],
    dev: &[AlignmentExample],
    direction: Direction,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    template: TemplateId,
    max_decode_len: usize,
    init_from: Option<&ModelParams>,
) -> Result<TrainOutcome> {
    for t in triples.iter().chain(dev) {
        if t.source.is_empty() || t.prediction.is_empty() || t.target.is_empty() {
            return Err(Error::Contract("alignment triples must be nonempty".into()));
        }
    }
    let init = match init_from {
        Some(base) => {
            if base.config.arch != model_config.arch
                || base.config.hidden_dim != model_config.hidden_dim
                || base.config.layers != model_config.layers
                || base.config.vocab_size != model_config.vocab_size
            {
                return Err(Error::Contract(
                    "aligner init checkpoint does not match the model config".into(),
                ));
            }
            let mut init = base.clone().with_role(direction.role());
            init.config = model_config.clone();
            init
        }
        None => ModelParams::init(model_config.clone(), direction.role(), train_config.seed)?,
    };
    let task = AlignmentTask { triples, dev, direction, template, max_decode_len };
    train::train(&task, init, train_config)
}

/// Builds alignment triples by decoding the frozen corrector over the
/// alignment split, order-preserving.
pub fn build_alignment_triples(
    corrector: &ModelParams,
    examples: &[ParallelExample],
    beam_size: usize,
    max_len: usize,
    template: TemplateId,
) -> Result<Vec<AlignmentExample>> {
    let sources: Vec<Vec<TokenId>> = examples.iter().map(|e| e.source.clone()).collect();
    let predictions =
        correction::predict_corpus(corrector, &sources, beam_size, max_len, template)?;
    Ok(examples
        .iter()
        .zip(predictions)
        .map(|(ex, prediction)| AlignmentExample {
            source: ex.source.clone(),
            prediction,
            target: ex.target.clone(),
        })
        .collect())
}

/// Two-stage inference: decode an initial correction, then decode the
/// final output from the aligned pair.
#[allow(clippy::too_many_arguments)]
pub fn predict_and_align(
    corrector: &ModelParams,
    aligner: &ModelParams,
    source: &[TokenId],
    beam_size: usize,
    max_len: usize,
    template: TemplateId,
    ablation: AblationMode,
) -> Result<Vec<TokenId>> {
    let direction = match aligner.role {
        Role::ForwardAligner => Direction::Forward,
        Role::ReverseAligner => Direction::Reverse,
        other => {
            return Err(Error::Contract(format!(
                "predict_and_align needs an aligner-role model, got {other}"
            )))
        }
    };
    let prediction = correction::predict_corpus(
        corrector,
        std::slice::from_ref(&source.to_vec()),
        beam_size,
        max_len,
        template,
    )?
    .pop()
    .expect("one source in, one prediction out");
    align_decode(aligner, source, &prediction, direction, ablation, template, beam_size, max_len)
}

// ---------------------------------------------------------------------------
// Triples files
// ---------------------------------------------------------------------------

/// Header record pinning the provenance of a triples file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TriplesHeader {
    pub corrector_hash: String,
    pub beam_size: usize,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TriplesHeader,
}

/// Writes a triples JSONL file: one header record, then one
/// `{source, prediction, target}` record per triple.
pub fn save_triples_jsonl(
    path: impl AsRef<Path>,
    triples: &[AlignmentExample],
    vocab: &Vocab,
    header: &TriplesHeader,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    let head = serde_json::to_string(&HeaderLine { header: header.clone() })
        .map_err(|e| Error::Contract(format!("serializing header: {e}")))?;
    out.extend_from_slice(head.as_bytes());
    out.push(b'\n');
    for t in triples {
        let record = serde_json::json!({
            "source": vocab.decode(&t.source),
            "prediction": vocab.decode(&t.prediction),
            "target": vocab.decode(&t.target),
        });
        out.extend_from_slice(record.to_string().as_bytes());
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a triples JSONL file written by [`save_triples_jsonl`].
pub fn load_triples_jsonl(
    path: impl AsRef<Path>,
    vocab: &Vocab,
) -> Result<(TriplesHeader, Vec<AlignmentExample>)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut header: Option<TriplesHeader> = None;
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        if header.is_none() {
            let head: HeaderLine =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            header = Some(head.header);
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let get = |key: &str| -> Result<Vec<TokenId>> {
            let s = value
                .get(key)
                .and_then(|v| v.as_str())
                .ok_or_else(|| parse_err(format!("missing string field `{key}`")))?;
            Ok(vocab.encode(s).0)
        };
        triples.push(AlignmentExample {
            source: get("source")?,
            prediction: get("prediction")?,
            target: get("target")?,
        });
    }
    let header = header.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "triples file is missing its header record".into(),
    })?;
    Ok((header, triples))
}
