//! Instruction prompts for the decoder-only architecture.
//!
//! A rendered prompt is a flat token sequence with a `target_span` marking
//! the positions whose tokens carry loss (the gold target plus its closing
//! EOS). Two template variants exist; both keep the same
//! instruction / input / response structure and differ only in whether the
//! input field is introduced by an explicit marker token.

use std::ops::Range;

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::TokenId;

/// Valid template ids; unknown ids are configuration errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplateId(pub u32);

impl TemplateId {
    pub const DEFAULT: TemplateId = TemplateId(0);

    fn uses_input_marker(self) -> Result<bool> {
        match self.0 {
            0 => Ok(true),
            1 => Ok(false),
            other => Err(Error::Config(format!("unknown instruction template {other}"))),
        }
    }
}

/// A prompt plus the index range of its loss-carrying target positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub tokens: Vec<TokenId>,
    pub target_span: Range<usize>,
}

impl RenderedPrompt {
    pub fn target_len(&self) -> usize {
        self.target_span.end - self.target_span.start
    }
}

/// Renders the correction prompt: `INSTR_GEC [INPUT] X RESP [Y EOS]`.
///
/// With a target the span covers `Y` plus EOS; without one (inference) the
/// span is empty and the prompt ends at the response marker.
pub fn render_gec_prompt(
    template: TemplateId,
    source: &[TokenId],
    target: Option<&[TokenId]>,
) -> Result<RenderedPrompt> {
    if source.is_empty() {
        return Err(Error::Contract("prompt source must be nonempty".into()));
    }
    let marker = template.uses_input_marker()?;
    let mut tokens = vec![Vocab::INSTR_GEC];
    if marker {
        tokens.push(Vocab::INPUT);
    }
    tokens.extend_from_slice(source);
    tokens.push(Vocab::RESP);
    Ok(close_with_target(tokens, target))
}

/// Renders the alignment prompt:
/// `INSTR_ALIGN [INPUT] A SEP B RESP [Y EOS]`, where `(A, B)` is
/// `(X, Y-hat)` for the forward direction and `(Y-hat, X)` for reverse.
pub fn render_align_prompt(
    template: TemplateId,
    source: &[TokenId],
    prediction: &[TokenId],
    target: Option<&[TokenId]>,
    reverse: bool,
) -> Result<RenderedPrompt> {
    if source.is_empty() || prediction.is_empty() {
        return Err(Error::Contract("alignment prompt fields must be nonempty".into()));
    }
    let marker = template.uses_input_marker()?;
    let (first, second) = if reverse { (prediction, source) } else { (source, prediction) };
    let mut tokens = vec![Vocab::INSTR_ALIGN];
    if marker {
        tokens.push(Vocab::INPUT);
    }
    tokens.extend_from_slice(first);
    tokens.push(Vocab::SEP);
    tokens.extend_from_slice(second);
    tokens.push(Vocab::RESP);
    Ok(close_with_target(tokens, target))
}

fn close_with_target(mut tokens: Vec<TokenId>, target: Option<&[TokenId]>) -> RenderedPrompt {
    let start = tokens.len();
    match target {
        Some(t) => {
            tokens.extend_from_slice(t);
            tokens.push(Vocab::EOS);
            let end = tokens.len();
            RenderedPrompt { tokens, target_span: start..end }
        }
        None => RenderedPrompt { tokens, target_span: start..start },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(vocab: &Vocab, s: &str) -> Vec<TokenId> {
        vocab.encode(s).0
    }

    #[test]
    fn gec_prompt_covers_target_and_eos() {
        let vocab = Vocab::new(20).unwrap();
        let x = enc(&vocab, "abc");
        let y = enc(&vocab, "abd");
        let p = render_gec_prompt(TemplateId::DEFAULT, &x, Some(&y)).unwrap();
        // [INSTR_GEC, INPUT, a, b, c, RESP, a, b, d, EOS]
        let mut expected = vec![Vocab::INSTR_GEC, Vocab::INPUT];
        expected.extend_from_slice(&x);
        expected.push(Vocab::RESP);
        expected.extend_from_slice(&y);
        expected.push(Vocab::EOS);
        assert_eq!(p.tokens, expected);
        assert_eq!(&p.tokens[p.target_span.clone()][..3], &y[..]);
        assert_eq!(*p.tokens.last().unwrap(), Vocab::EOS);
        assert_eq!(p.target_len(), y.len() + 1);
    }

    #[test]
    fn inference_prompt_has_empty_span() {
        let vocab = Vocab::new(20).unwrap();
        let p = render_gec_prompt(TemplateId::DEFAULT, &enc(&vocab, "abc"), None).unwrap();
        assert!(p.target_span.is_empty());
        assert_eq!(*p.tokens.last().unwrap(), Vocab::RESP);
    }

    #[test]
    fn rendering_is_pure() {
        let vocab = Vocab::new(20).unwrap();
        let x = enc(&vocab, "ab");
        let y = enc(&vocab, "ba");
        let a = render_gec_prompt(TemplateId::DEFAULT, &x, Some(&y)).unwrap();
        let b = render_gec_prompt(TemplateId::DEFAULT, &x, Some(&y)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn align_prompt_orders_fields_by_direction() {
        let vocab = Vocab::new(20).unwrap();
        let x = enc(&vocab, "ab");
        let yhat = enc(&vocab, "ac");
        let fwd = render_align_prompt(TemplateId::DEFAULT, &x, &yhat, None, false).unwrap();
        let rev = render_align_prompt(TemplateId::DEFAULT, &x, &yhat, None, true).unwrap();
        let sep_fwd = fwd.tokens.iter().position(|&t| t == Vocab::SEP).unwrap();
        assert_eq!(&fwd.tokens[sep_fwd - 2..sep_fwd], &x[..]);
        assert_eq!(&fwd.tokens[sep_fwd + 1..sep_fwd + 3], &yhat[..]);
        let sep_rev = rev.tokens.iter().position(|&t| t == Vocab::SEP).unwrap();
        assert_eq!(&rev.tokens[sep_rev - 2..sep_rev], &yhat[..]);
        assert_eq!(&rev.tokens[sep_rev + 1..sep_rev + 3], &x[..]);

        // X = Y-hat makes both directions identical.
        let same_f = render_align_prompt(TemplateId::DEFAULT, &x, &x, None, false).unwrap();
        let same_r = render_align_prompt(TemplateId::DEFAULT, &x, &x, None, true).unwrap();
        assert_eq!(same_f, same_r);
    }

    #[test]
    fn missing_template_is_config_error() {
        let vocab = Vocab::new(20).unwrap();
        let x = enc(&vocab, "ab");
        assert!(matches!(
            render_gec_prompt(TemplateId(7), &x, None),
            Err(Error::Config(_))
        ));
        // Template 1 drops the input marker but keeps the structure.
        let p = render_gec_prompt(TemplateId(1), &x, None).unwrap();
        assert!(!p.tokens.contains(&Vocab::INPUT));
    }
}
