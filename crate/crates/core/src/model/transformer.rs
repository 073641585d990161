//! Forward graphs for the two architectures.
//!
//! Pre-norm transformer blocks: `x + Attn(LN(x))` then `x + FFN(LN(x))`,
//! a final LayerNorm, and an untied output head. The encoder-decoder
//! variant adds cross-attention over the encoder memory; the decoder-only
//! variant consumes rendered prompts and slices logits out of the target
//! span. One builder serves training (dropout active, tape kept for
//! backward) and inference (no dropout, tape dropped after reading).

use std::ops::Range;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tape::{NodeId, Tape};
use super::{Arch, LogitsTensor, ModelParams, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::TokenId;

/// Forward mode: inference is deterministic, training applies dropout
/// driven by the supplied stream.
pub enum Mode<'r> {
    Inference,
    Train { rng: &'r mut ChaCha8Rng },
}

/// Zeroes whole embedding rows with probability `rate` and rescales the
/// survivors by `1/(1-rate)`; identity outside training mode.
pub fn dropout_src(
    embeddings: &Array2<f64>,
    rate: f64,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Array2<f64> {
    if !training || rate == 0.0 {
        return embeddings.clone();
    }
    let mask = row_keep_mask(embeddings.nrows(), rate, rng);
    let mut out = embeddings.clone();
    for (mut row, &keep) in out.rows_mut().into_iter().zip(&mask) {
        row.mapv_inplace(|v| v * keep);
    }
    out
}

fn row_keep_mask(rows: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = 1.0 / (1.0 - rate);
    (0..rows).map(|_| if rng.random::<f64>() < rate { 0.0 } else { scale }).collect()
}

struct Builder<'m> {
    store: &'m ParamStore,
    config: &'m super::ModelConfig,
    tape: Tape,
}

impl<'m> Builder<'m> {
    fn param(&self, name: &str) -> ParamId {
        self.store.id(name).unwrap_or_else(|| panic!("missing param {name}"))
    }

    fn embed(&mut self, ids: &[TokenId]) -> NodeId {
        let tok = self.param("tok_emb");
        let pos = self.param("pos_emb");
        let idx: Vec<usize> = ids.iter().map(|&t| t as usize).collect();
        let positions: Vec<usize> = (0..ids.len()).collect();
        let te = self.tape.gather(self.store, tok, &idx);
        let pe = self.tape.gather(self.store, pos, &positions);
        self.tape.add(te, pe)
    }

    fn dropout(&mut self, x: NodeId, mode: &mut Mode) -> NodeId {
        let rate = self.config.dropout;
        let Mode::Train { rng } = mode else { return x };
        if rate == 0.0 {
            return x;
        }
        let (rows, cols) = self.tape.value(x).dim();
        let scale = 1.0 / (1.0 - rate);
        let mask = Array2::from_shape_fn((rows, cols), |_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                scale
            }
        });
        self.tape.mul_const(x, mask)
    }

    /// Row dropout over the leading `src_rows` rows (Dropout-Src).
    fn dropout_src_rows(&mut self, x: NodeId, src_rows: usize, mode: &mut Mode) -> NodeId {
        let rate = self.config.dropout_src;
        let Mode::Train { rng } = mode else { return x };
        if rate == 0.0 || src_rows == 0 {
            return x;
        }
        let (rows, cols) = self.tape.value(x).dim();
        let keep = row_keep_mask(src_rows.min(rows), rate, rng);
        let mask = Array2::from_shape_fn((rows, cols), |(r, _)| {
            if r < keep.len() {
                keep[r]
            } else {
                1.0
            }
        });
        self.tape.mul_const(x, mask)
    }

    fn attention(
        &mut self,
        prefix: &str,
        queries: NodeId,
        keys_values: NodeId,
        causal: bool,
        mode: &mut Mode,
    ) -> NodeId {
        let heads = self.config.heads;
        let head_dim = self.config.head_dim();
        let q = {
            let (w, b) = (self.param(&format!("{prefix}.wq")), self.param(&format!("{prefix}.b_q")));
            self.tape.linear(self.store, queries, w, Some(b))
        };
        let k = {
            let (w, b) = (self.param(&format!("{prefix}.wk")), self.param(&format!("{prefix}.b_k")));
            self.tape.linear(self.store, keys_values, w, Some(b))
        };
        let v = {
            let (w, b) = (self.param(&format!("{prefix}.wv")), self.param(&format!("{prefix}.b_v")));
            self.tape.linear(self.store, keys_values, w, Some(b))
        };
        let mask = causal.then(|| {
            let n = self.tape.value(q).nrows();
            Array2::from_shape_fn((n, n), |(i, j)| if j > i { -1e30 } else { 0.0 })
        });
        let mut contexts = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.tape.slice_cols(q, h * head_dim, head_dim);
            let kh = self.tape.slice_cols(k, h * head_dim, head_dim);
            let vh = self.tape.slice_cols(v, h * head_dim, head_dim);
            let scores = self.tape.matmul_nt(qh, kh);
            let scaled = self.tape.scale(scores, 1.0 / (head_dim as f64).sqrt());
            let masked = match &mask {
                Some(m) => self.tape.add_const(scaled, m),
                None => scaled,
            };
            let probs = self.tape.softmax_rows(masked);
            contexts.push(self.tape.matmul(probs, vh));
        }
        let ctx = self.tape.concat_cols(&contexts);
        let (wo, bo) = (self.param(&format!("{prefix}.wo")), self.param(&format!("{prefix}.b_o")));
        let out = self.tape.linear(self.store, ctx, wo, Some(bo));
        self.dropout(out, mode)
    }

    fn layer_norm(&mut self, prefix: &str, x: NodeId) -> NodeId {
        let (g, b) = (self.param(&format!("{prefix}.g")), self.param(&format!("{prefix}.b")));
        self.tape.layer_norm(self.store, x, g, b)
    }

    fn ffn(&mut self, prefix: &str, x: NodeId, mode: &mut Mode) -> NodeId {
        let (w1, b1) =
            (self.param(&format!("{prefix}.w1")), self.param(&format!("{prefix}.b_1")));
        let (w2, b2) =
            (self.param(&format!("{prefix}.w2")), self.param(&format!("{prefix}.b_2")));
        let h = self.tape.linear(self.store, x, w1, Some(b1));
        let a = self.tape.gelu(h);
        let out = self.tape.linear(self.store, a, w2, Some(b2));
        self.dropout(out, mode)
    }

    fn encoder(&mut self, ids: &[TokenId], mode: &mut Mode) -> NodeId {
        let emb = self.embed(ids);
        let emb = self.dropout_src_rows(emb, ids.len(), mode);
        let mut x = self.dropout(emb, mode);
        for i in 0..self.config.layers {
            let normed = self.layer_norm(&format!("enc{i}.ln1"), x);
            let attn = self.attention(&format!("enc{i}.self"), normed, normed, false, mode);
            x = self.tape.add(x, attn);
            let normed = self.layer_norm(&format!("enc{i}.ln2"), x);
            let ff = self.ffn(&format!("enc{i}.ffn"), normed, mode);
            x = self.tape.add(x, ff);
        }
        self.layer_norm("enc.ln_f", x)
    }

    fn decoder(
        &mut self,
        ids: &[TokenId],
        memory: Option<NodeId>,
        src_rows: usize,
        mode: &mut Mode,
    ) -> NodeId {
        let emb = self.embed(ids);
        let emb = self.dropout_src_rows(emb, src_rows, mode);
        let mut x = self.dropout(emb, mode);
        for i in 0..self.config.layers {
            let normed = self.layer_norm(&format!("dec{i}.ln1"), x);
            let attn = self.attention(&format!("dec{i}.self"), normed, normed, true, mode);
            x = self.tape.add(x, attn);
            if let Some(mem) = memory {
                let normed = self.layer_norm(&format!("dec{i}.lnx"), x);
                let cross = self.attention(&format!("dec{i}.cross"), normed, mem, false, mode);
                x = self.tape.add(x, cross);
            }
            let normed = self.layer_norm(&format!("dec{i}.ln2"), x);
            let ff = self.ffn(&format!("dec{i}.ffn"), normed, mode);
            x = self.tape.add(x, ff);
        }
        self.layer_norm("dec.ln_f", x)
    }
}

fn check_ids(ids: &[TokenId], config: &super::ModelConfig) -> Result<()> {
    if ids.len() > self_max(config) {
        return Err(Error::Capacity { needed: ids.len(), max: config.max_positions });
    }
    for &id in ids {
        if id as usize >= config.vocab_size {
            return Err(Error::Vocab { id, vocab_size: config.vocab_size });
        }
    }
    Ok(())
}

fn self_max(config: &super::ModelConfig) -> usize {
    config.max_positions
}

/// Builds the forward graph and returns the tape plus the logits node for
/// `logit_rows` (next-token scores at those decoder positions).
pub fn build_forward(
    params: &ModelParams,
    encoder_input: Option<&[TokenId]>,
    decoder_input: &[TokenId],
    logit_rows: Range<usize>,
    mode: &mut Mode,
) -> Result<(Tape, NodeId)> {
    let config = &params.config;
    if decoder_input.is_empty() {
        return Err(Error::Contract("decoder input must be nonempty".into()));
    }
    if logit_rows.start >= logit_rows.end || logit_rows.end > decoder_input.len() {
        return Err(Error::Contract(format!(
            "logit rows {logit_rows:?} outside decoder input of length {}",
            decoder_input.len()
        )));
    }
    check_ids(decoder_input, config)?;
    match (config.arch, encoder_input) {
        (Arch::EncoderDecoder, Some(enc)) => {
            if enc.is_empty() {
                return Err(Error::Contract("encoder input must be nonempty".into()));
            }
            check_ids(enc, config)?;
            let mut b = Builder { store: &params.store, config, tape: Tape::new() };
            let memory = b.encoder(enc, mode);
            let hidden = b.decoder(decoder_input, Some(memory), 0, mode);
            let rows =
                b.tape.slice_rows(hidden, logit_rows.start, logit_rows.end - logit_rows.start);
            let (hw, hb) = (b.param("head.w"), b.param("head.b_out"));
            let logits = b.tape.linear(b.store, rows, hw, Some(hb));
            Ok((b.tape, logits))
        }
        (Arch::DecoderOnly, None) => {
            let mut b = Builder { store: &params.store, config, tape: Tape::new() };
            // Dropout-Src covers the prompt part: everything before the
            // first position whose next-token logits carry loss.
            let src_rows = logit_rows.start + 1;
            let hidden = b.decoder(decoder_input, None, src_rows, mode);
            let rows =
                b.tape.slice_rows(hidden, logit_rows.start, logit_rows.end - logit_rows.start);
            let (hw, hb) = (b.param("head.w"), b.param("head.b_out"));
            let logits = b.tape.linear(b.store, rows, hw, Some(hb));
            Ok((b.tape, logits))
        }
        (Arch::EncoderDecoder, None) => {
            Err(Error::Contract("encoder-decoder forward needs an encoder input".into()))
        }
        (Arch::DecoderOnly, Some(_)) => {
            Err(Error::Contract("decoder-only forward takes no encoder input".into()))
        }
    }
}

/// Inference-mode forward returning logits for the requested rows,
/// teacher-forced on the given decoder input.
pub fn forward(
    params: &ModelParams,
    encoder_input: Option<&[TokenId]>,
    decoder_input: &[TokenId],
    logit_rows: Range<usize>,
) -> Result<LogitsTensor> {
    let (tape, node) =
        build_forward(params, encoder_input, decoder_input, logit_rows, &mut Mode::Inference)?;
    Ok(LogitsTensor { values: tape.value(node).clone(), role: params.role.into() })
}

/// Teacher-forced logits over `target` (plus EOS) for either architecture.
///
/// For the encoder-decoder the decoder consumes `BOS + target`; for the
/// decoder-only model the caller passes the full rendered prompt and this
/// slices the rows feeding the target span.
pub fn logits_for(
    params: &ModelParams,
    encoder_input: Option<&[TokenId]>,
    prompt: Option<&super::RenderedPrompt>,
    target: &[TokenId],
) -> Result<LogitsTensor> {
    match params.config.arch {
        Arch::EncoderDecoder => {
            let dec = teacher_forced_decoder_input(target);
            forward(params, encoder_input, &dec, 0..dec.len())
        }
        Arch::DecoderOnly => {
            let p = prompt.ok_or_else(|| {
                Error::Contract("decoder-only logits need a rendered prompt".into())
            })?;
            if p.target_span.is_empty() {
                return Err(Error::Contract("prompt target span is empty".into()));
            }
            forward(
                params,
                None,
                &p.tokens,
                p.target_span.start - 1..p.target_span.end - 1,
            )
        }
    }
}

/// `BOS` followed by the gold target: the decoder input whose next-token
/// logits line up with `target + EOS`.
pub fn teacher_forced_decoder_input(target: &[TokenId]) -> Vec<TokenId> {
    let mut dec = Vec::with_capacity(target.len() + 1);
    dec.push(crate::corpus::Vocab::BOS);
    dec.extend_from_slice(target);
    dec
}

/// The loss-side token sequence matching [`teacher_forced_decoder_input`].
pub fn target_with_eos(target: &[TokenId]) -> Vec<TokenId> {
    let mut t = Vec::with_capacity(target.len() + 1);
    t.extend_from_slice(target);
    t.push(crate::corpus::Vocab::EOS);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocab;
    use crate::model::{ModelConfig, ModelParams, Role};

    fn micro(arch: Arch) -> ModelParams {
        let config = ModelConfig {
            arch,
            layers: 2,
            heads: 2,
            hidden_dim: 16,
            ffn_dim: 32,
            vocab_size: 20,
            max_positions: 32,
            dropout: 0.1,
            dropout_src: 0.2,
        };
        ModelParams::init(config, Role::Corrector, 5).unwrap()
    }

    #[test]
    fn logits_shape_matches_target_length() {
        let model = micro(Arch::EncoderDecoder);
        let src = vec![9, 10, 11];
        let tgt = vec![9, 12, 13, 9];
        let logits = logits_for(&model, Some(&src), None, &tgt).unwrap();
        assert_eq!(logits.values.dim(), (tgt.len() + 1, 20));

        let dec_only = micro(Arch::DecoderOnly);
        let prompt = crate::model::render_gec_prompt(
            crate::model::TemplateId::DEFAULT,
            &src,
            Some(&tgt),
        )
        .unwrap();
        let logits = logits_for(&dec_only, None, Some(&prompt), &tgt).unwrap();
        assert_eq!(logits.values.dim(), (tgt.len() + 1, 20));
    }

    #[test]
    fn zero_head_gives_uniform_rows() {
        let mut model = micro(Arch::EncoderDecoder);
        let hw = model.store.id("head.w").unwrap();
        model.store.view_mut(hw).fill(0.0);
        let hb = model.store.id("head.b_out").unwrap();
        model.store.view_mut(hb).fill(0.0);
        let logits = logits_for(&model, Some(&[9, 10]), None, &[11, 12]).unwrap();
        let probs = crate::distill::tempered_distribution(
            logits.values.row(0).as_slice().unwrap(),
            1.0,
        );
        for p in probs {
            assert!((p - 1.0 / 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inference_is_deterministic_and_training_respects_seed() {
        let model = micro(Arch::EncoderDecoder);
        let a = logits_for(&model, Some(&[9, 10]), None, &[11]).unwrap();
        let b = logits_for(&model, Some(&[9, 10]), None, &[11]).unwrap();
        assert_eq!(a.values, b.values);

        let dec = teacher_forced_decoder_input(&[11]);
        let mut rng1 = crate::seed::rng(3, "drop", 0);
        let (t1, n1) = build_forward(
            &model,
            Some(&[9, 10]),
            &dec,
            0..dec.len(),
            &mut Mode::Train { rng: &mut rng1 },
        )
        .unwrap();
        let mut rng2 = crate::seed::rng(3, "drop", 0);
        let (t2, n2) = build_forward(
            &model,
            Some(&[9, 10]),
            &dec,
            0..dec.len(),
            &mut Mode::Train { rng: &mut rng2 },
        )
        .unwrap();
        assert_eq!(t1.value(n1), t2.value(n2));
    }

    #[test]
    fn capacity_and_vocab_errors() {
        let model = micro(Arch::EncoderDecoder);
        let long: Vec<TokenId> = vec![9; 40];
        assert!(matches!(
            logits_for(&model, Some(&long), None, &[9]),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(
            logits_for(&model, Some(&[25]), None, &[9]),
            Err(Error::Vocab { .. })
        ));
    }

    #[test]
    fn dropout_src_statistics_and_identity() {
        let emb = Array2::from_elem((100_000, 2), 1.0);
        let mut rng = crate::seed::rng(7, "dropout-src", 0);
        // Identity cases: inference mode and rate zero.
        assert_eq!(dropout_src(&emb, 0.3, &mut rng, false), emb);
        assert_eq!(dropout_src(&emb, 0.0, &mut rng, true), emb);

        let dropped = dropout_src(&emb, 0.2, &mut rng, true);
        let zeroed = dropped.rows().into_iter().filter(|r| r[0] == 0.0).count();
        let n = emb.nrows() as f64;
        let sigma = (n * 0.2 * 0.8).sqrt();
        assert!(
            (zeroed as f64 - 0.2 * n).abs() <= 3.0 * sigma,
            "dropped {zeroed} of {n}"
        );
        // Survivors are rescaled by 1/(1-rate).
        let survivor = dropped.rows().into_iter().find(|r| r[0] != 0.0).unwrap();
        assert!((survivor[0] - 1.25).abs() < 1e-12);
        // Whole rows drop together.
        for row in dropped.rows() {
            assert!(row[0] == row[1]);
        }
    }

    #[test]
    fn bos_eos_plumbing() {
        assert_eq!(teacher_forced_decoder_input(&[9, 10]), vec![Vocab::BOS, 9, 10]);
        assert_eq!(target_with_eos(&[9, 10]), vec![9, 10, Vocab::EOS]);
    }
}
