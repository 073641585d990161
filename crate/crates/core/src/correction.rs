//! Base grammatical-error-correction training.
//!
//! The corrector maps a possibly-erroneous source sentence to its gold
//! target under teacher-forced NLL (summed over target tokens including
//! EOS, averaged over the batch). `train_correction` returns the dev-best
//! checkpoint; `predict_corpus` produces the corpus-wide initial
//! corrections that later feed the alignment stage.

use crate::corpus::ParallelExample;
use crate::error::{Error, Result};
use crate::eval::{self, EvalTriple};
use crate::model::{
    self, decode, DecodeInput, LogitsTensor, Mode, ModelConfig, ModelParams, NodeId, RenderedPrompt,
    Role, Tape, TemplateId,
};
use crate::train::{self, DevMetrics, LossBreakdown, TrainConfig, TrainOutcome, TrainTask};
use crate::TokenId;

/// Summed negative log-likelihood of `target` under `logits`.
///
/// Zero iff the model puts probability one on every gold token.
pub fn gec_loss(logits: &LogitsTensor, target: &[TokenId]) -> Result<f64> {
    if logits.values.nrows() != target.len() {
        return Err(Error::Contract(format!(
            "logits cover {} positions but target has {}",
            logits.values.nrows(),
            target.len()
        )));
    }
    let mut loss = 0.0;
    for (row, &t) in logits.values.rows().into_iter().zip(target) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss -= row[t as usize] - log_sum;
    }
    Ok(loss)
}

/// Mean-per-token variant of [`gec_loss`] for reporting.
pub fn gec_loss_mean(logits: &LogitsTensor, target: &[TokenId]) -> Result<f64> {
    Ok(gec_loss(logits, target)? / target.len().max(1) as f64)
}

/// Builds the teacher-forced correction graph for one example and returns
/// the tape, the logits node, and the NLL loss node.
pub(crate) fn correction_graph(
    model: &ModelParams,
    source: &[TokenId],
    target: &[TokenId],
    template: TemplateId,
    mode: &mut Mode,
) -> Result<(Tape, NodeId, NodeId)> {
    let loss_targets: Vec<usize> =
        model::target_with_eos(target).iter().map(|&t| t as usize).collect();
    let (mut tape, logits) = match model.config.arch {
        model::Arch::EncoderDecoder => {
            let dec = model::teacher_forced_decoder_input(target);
            model::build_forward(model, Some(source), &dec, 0..dec.len(), mode)?
        }
        model::Arch::DecoderOnly => {
            let prompt = model::render_gec_prompt(template, source, Some(target))?;
            let rows = prompt.target_span.start - 1..prompt.target_span.end - 1;
            model::build_forward(model, None, &prompt.tokens, rows, mode)?
        }
    };
    let loss = tape.nll_sum(logits, &loss_targets);
    Ok((tape, logits, loss))
}

/// Training task: plain NLL over (source, target) pairs.
pub struct CorrectionTask<'a> {
    pub examples: &'a [ParallelExample],
    pub dev: &'a [ParallelExample],
    pub template: TemplateId,
    pub max_decode_len: usize,
}

impl TrainTask for CorrectionTask<'_> {
    fn num_examples(&self) -> usize {
        self.examples.len()
    }

    fn example_loss(
        &self,
        model: &ModelParams,
        index: usize,
        mode: &mut Mode,
    ) -> Result<(Tape, NodeId, LossBreakdown)> {
        let ex = &self.examples[index];
        let (tape, _, loss) = correction_graph(model, &ex.source, &ex.target, self.template, mode)?;
        let value = tape.scalar(loss);
        Ok((tape, loss, LossBreakdown::plain(value)))
    }

    fn dev_metrics(&self, model: &ModelParams) -> Result<DevMetrics> {
        dev_scores(model, self.dev, self.template, self.max_decode_len)
    }
}

/// Greedy-decodes the dev set and scores it against gold.
pub(crate) fn dev_scores(
    model: &ModelParams,
    dev: &[ParallelExample],
    template: TemplateId,
    max_decode_len: usize,
) -> Result<DevMetrics> {
    let sources: Vec<Vec<TokenId>> = dev.iter().map(|e| e.source.clone()).collect();
    let hyps = predict_corpus(model, &sources, 1, max_decode_len, template)?;
    let triples: Vec<EvalTriple> = dev
        .iter()
        .zip(hyps)
        .map(|(e, h)| EvalTriple {
            source: e.source.clone(),
            target: e.target.clone(),
            hypothesis: h,
        })
        .collect();
    let report = eval::score_corpus(&triples);
    Ok(DevMetrics { precision: report.precision, recall: report.recall, f05: report.f05 })
}

/// Trains the initial correction model and returns the dev-best outcome.
pub fn train_correction(
    examples: &[ParallelExample],
    dev: &[ParallelExample],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    template: TemplateId,
    max_decode_len: usize,
) -> Result<TrainOutcome> {
    let init = ModelParams::init(model_config.clone(), Role::Corrector, train_config.seed)?;
    continue_correction(examples, dev, init, train_config, template, max_decode_len)
}

/// Continues training from an existing checkpoint (used for the
/// native-style continued-training protocol and the distillation-free
/// control run).
pub fn continue_correction(
    examples: &[ParallelExample],
    dev: &[ParallelExample],
    init: ModelParams,
    train_config: &TrainConfig,
    template: TemplateId,
    max_decode_len: usize,
) -> Result<TrainOutcome> {
    let task = CorrectionTask { examples, dev, template, max_decode_len };
    train::train(&task, init, train_config)
}

/// Order-preserving corpus decoding with the corrector (or the distilled
/// student, which plays the same role at inference time).
pub fn predict_corpus(
    params: &ModelParams,
    sources: &[Vec<TokenId>],
    beam_size: usize,
    max_len: usize,
    template: TemplateId,
) -> Result<Vec<Vec<TokenId>>> {
    if !matches!(params.role, Role::Corrector | Role::AlirectorStudent) {
        return Err(Error::Contract(format!(
            "predict_corpus needs a corrector-role model, got {}",
            params.role
        )));
    }
    sources
        .iter()
        .map(|src| {
            let decoded = match params.config.arch {
                model::Arch::EncoderDecoder => {
                    decode(params, &DecodeInput::EncoderDecoder { source: src }, beam_size, max_len)?
                }
                model::Arch::DecoderOnly => {
                    let prompt: RenderedPrompt = model::render_gec_prompt(template, src, None)?;
                    decode(
                        params,
                        &DecodeInput::DecoderOnly { prompt: &prompt.tokens },
                        beam_size,
                        max_len,
                    )?
                }
            };
            // A degenerate empty decode falls back to copying the source
            // so downstream alignment inputs stay well-formed.
            Ok(if decoded.tokens.is_empty() { src.clone() } else { decoded.tokens })
        })
        .collect()
}
