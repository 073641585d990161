//! Beam-search decoding with length-normalized scoring.
//!
//! Hypotheses are ranked during search by cumulative log-probability and
//! at the end by average log-probability per generated token (EOS
//! included), so `beam_size = 1` is exactly greedy decoding. A hypothesis
//! that hits `max_len` without emitting EOS is returned only when no
//! complete hypothesis exists, flagged as truncated.

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::TokenId;

use super::transformer::{forward, teacher_forced_decoder_input};
use super::ModelParams;

/// Source side of a decoding call.
pub enum DecodeInput<'a> {
    /// Encoder-decoder: the raw source token sequence.
    EncoderDecoder { source: &'a [TokenId] },
    /// Decoder-only: the rendered inference prompt (no target).
    DecoderOnly { prompt: &'a [TokenId] },
}

/// Decoding result: generated tokens (EOS stripped), their
/// length-normalized log-probability, and whether EOS was never reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub truncated: bool,
}

#[derive(Clone)]
struct Hypothesis {
    tokens: Vec<TokenId>,
    cum_log_prob: f64,
}

impl Hypothesis {
    fn normalized(&self, extra: f64, len_with_eos: usize) -> f64 {
        (self.cum_log_prob + extra) / len_with_eos.max(1) as f64
    }
}

/// Decodes the highest-scoring completion of `input`.
pub fn decode(
    params: &ModelParams,
    input: &DecodeInput,
    beam_size: usize,
    max_len: usize,
) -> Result<Decoded> {
    if beam_size == 0 {
        return Err(Error::Config("beam_size must be >= 1".into()));
    }
    if max_len == 0 {
        return Err(Error::Config("max_len must be >= 1".into()));
    }
    let prefix_len = match input {
        DecodeInput::EncoderDecoder { .. } => 1, // BOS
        DecodeInput::DecoderOnly { prompt } => prompt.len(),
    };
    if prefix_len + 1 > params.config.max_positions {
        return Err(Error::Capacity {
            needed: prefix_len + 1,
            max: params.config.max_positions,
        });
    }
    // Never exceed the model's position table.
    let max_len = max_len.min(params.config.max_positions - prefix_len);

    let mut live = vec![Hypothesis { tokens: Vec::new(), cum_log_prob: 0.0 }];
    let mut finished: Vec<Decoded> = Vec::new();

    while !live.is_empty() {
        // (candidate cum logprob, hyp index, token)
        let mut candidates: Vec<(f64, usize, TokenId)> = Vec::new();
        for (h, hyp) in live.iter().enumerate() {
            let log_probs = next_log_probs(params, input, &hyp.tokens)?;
            for (t, lp) in log_probs.iter().enumerate() {
                candidates.push((hyp.cum_log_prob + lp, h, t as TokenId));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        // Scan candidates best-first until the next beam fills. An EOS
        // candidate finalizes its hypothesis only while it still outranks
        // the continuations competing for beam slots, so beam_size 1 is
        // exactly greedy decoding.
        let mut next_beam: Vec<Hypothesis> = Vec::new();
        for (cum, h, token) in candidates {
            if next_beam.len() >= beam_size {
                break;
            }
            if token == Vocab::EOS {
                let hyp = &live[h];
                finished.push(Decoded {
                    tokens: hyp.tokens.clone(),
                    score: hyp.normalized(cum - hyp.cum_log_prob, hyp.tokens.len() + 1),
                    truncated: false,
                });
            } else {
                let mut tokens = live[h].tokens.clone();
                tokens.push(token);
                next_beam.push(Hypothesis { tokens, cum_log_prob: cum });
            }
        }

        live = next_beam;
        if live.first().map(|h| h.tokens.len()) == Some(max_len) {
            // Out of positions: flag the leftover beams as truncated.
            for hyp in live.drain(..) {
                let score = hyp.normalized(0.0, hyp.tokens.len());
                finished.push(Decoded { tokens: hyp.tokens, score, truncated: true });
            }
        }
    }

    // Prefer complete hypotheses; among equals pick the best normalized
    // score with a deterministic tie-break on token order.
    finished.sort_by(|a, b| {
        a.truncated
            .cmp(&b.truncated)
            .then(b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.tokens.cmp(&b.tokens))
    });
    finished
        .into_iter()
        .next()
        .ok_or_else(|| Error::Contract("beam search produced no hypotheses".into()))
}

/// Log-probabilities of the next token after `generated`.
fn next_log_probs(
    params: &ModelParams,
    input: &DecodeInput,
    generated: &[TokenId],
) -> Result<Vec<f64>> {
    let logits = match input {
        DecodeInput::EncoderDecoder { source } => {
            let dec = teacher_forced_decoder_input(generated);
            let last = dec.len() - 1;
            forward(params, Some(source), &dec, last..last + 1)?
        }
        DecodeInput::DecoderOnly { prompt } => {
            let mut dec = Vec::with_capacity(prompt.len() + generated.len());
            dec.extend_from_slice(prompt);
            dec.extend_from_slice(generated);
            let last = dec.len() - 1;
            forward(params, None, &dec, last..last + 1)?
        }
    };
    let row = logits.values.row(0);
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    Ok(row.iter().map(|v| v - log_sum).collect())
}
