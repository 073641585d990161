//! Run settings: one flat key-value config with CLI-flag overrides.
//!
//! Defaults are the "desk" preset, sized so the full three-seed
//! experiment battery finishes on a single commodity core. Error-rate
//! knobs are relative shares scaled by `1 - clean_fraction`, so the clean
//! fraction can move without re-balancing the four error types.

use serde::{Deserialize, Serialize};

use crate::corpus::{CorruptionRule, ErrorKind, Vocab};
use crate::distill::DistillConfig;
use crate::error::{Error, Result};
use crate::model::{Arch, ModelConfig, TemplateId};
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub seed: u64,

    // corpus
    pub train_count: usize,
    pub dev_count: usize,
    pub test_count: usize,
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub clean_fraction: f64,
    pub rate_missing: f64,
    pub rate_redundant: f64,
    pub rate_substitution: f64,
    pub rate_word_order: f64,
    pub max_span: usize,
    pub split_ratio: f64,

    // model
    pub arch: Arch,
    pub layers: usize,
    pub heads: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
    pub dropout: f64,
    pub dropout_src: f64,
    /// Whether alignment teachers also train with Dropout-Src.
    pub aligner_dropout_src: bool,
    /// Initialize aligners from the trained corrector (the desk-scale
    /// stand-in for starting from a pretrained backbone). Cold-started
    /// teachers cannot learn the task from the small alignment split.
    pub aligner_init_from_corrector: bool,
    pub template_id: u32,

    // optimization
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub patience: usize,
    /// Learning-rate multiplier for stages that continue from a trained
    /// checkpoint (distillation, continued training).
    pub continue_lr_scale: f64,
    /// Epoch budget for the distillation stage (and its ablations).
    pub distill_epochs: usize,
    /// Epoch budget for alignment-teacher training. The alignment split
    /// is small, so teachers see it many times.
    pub aligner_epochs: usize,
    /// Learning-rate multiplier for alignment-teacher training.
    pub aligner_lr_scale: f64,

    // distillation
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,

    // inference
    pub beam_size: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            seed: 1,
            train_count: 4000,
            dev_count: 240,
            test_count: 500,
            vocab_size: 36,
            min_len: 5,
            max_len: 9,
            clean_fraction: 0.45,
            rate_missing: 1.0,
            rate_redundant: 1.0,
            rate_substitution: 1.0,
            rate_word_order: 1.0,
            max_span: 2,
            split_ratio: 0.8,
            arch: Arch::EncoderDecoder,
            layers: 2,
            heads: 4,
            hidden_dim: 64,
            ffn_dim: 128,
            max_positions: 48,
            dropout: 0.1,
            dropout_src: 0.2,
            aligner_dropout_src: true,
            aligner_init_from_corrector: true,
            template_id: 0,
            batch_size: 16,
            max_epochs: 6,
            learning_rate: 2e-3,
            warmup_steps: 100,
            patience: 3,
            continue_lr_scale: 0.25,
            distill_epochs: 8,
            aligner_epochs: 30,
            aligner_lr_scale: 1.5,
            alpha: 0.9,
            beta: 0.5,
            tau: 1.0,
            beam_size: 3,
        }
    }
}

impl RunSettings {
    pub fn from_toml(raw: &str) -> Result<Self> {
        let settings: RunSettings =
            toml::from_str(raw).map_err(|e| Error::Config(format!("config file: {e}")))?;
        settings.validate()?;
        Ok(settings)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize cleanly")
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        self.distill_config().validate()?;
        if self.train_count < 10 || self.dev_count == 0 || self.test_count == 0 {
            return Err(Error::Config(
                "need train_count >= 10 and nonempty dev/test sets".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.clean_fraction) {
            return Err(Error::Config("clean_fraction must be in [0,1]".into()));
        }
        if self.beam_size == 0 {
            return Err(Error::Config("beam_size must be >= 1".into()));
        }
        if self.continue_lr_scale <= 0.0 || self.aligner_lr_scale <= 0.0 {
            return Err(Error::Config("learning-rate scales must be positive".into()));
        }
        if self.distill_epochs == 0 || self.aligner_epochs == 0 {
            return Err(Error::Config("stage epoch budgets must be positive".into()));
        }
        // Alignment inputs concatenate two (possibly grown) sentences; the
        // position table must fit them up front.
        let longest = self.longest_alignment_input();
        if longest > self.max_positions {
            return Err(Error::Config(format!(
                "max_positions {} cannot hold alignment inputs up to {longest} tokens",
                self.max_positions
            )));
        }
        self.corruption_rules()?;
        Ok(())
    }

    /// Longest sentence a corrupted source can reach.
    pub fn max_source_len(&self) -> usize {
        self.max_len + self.max_span
    }

    /// Cap on decoded output length.
    pub fn max_decode_len(&self) -> usize {
        self.max_source_len() + 2
    }

    /// Dev prefix used for per-epoch checkpoint selection; the full dev
    /// set stays available for reporting.
    pub fn selection_dev_count(&self) -> usize {
        self.dev_count.min(120)
    }

    fn longest_alignment_input(&self) -> usize {
        let field = self.max_source_len().max(self.max_decode_len());
        match self.arch {
            // A [SEP] B
            Arch::EncoderDecoder => 2 * field + 1,
            // INSTR INPUT A SEP B RESP target EOS
            Arch::DecoderOnly => 3 * field + 5,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            arch: self.arch,
            layers: self.layers,
            heads: self.heads,
            hidden_dim: self.hidden_dim,
            ffn_dim: self.ffn_dim,
            vocab_size: Vocab::RESERVED + self.vocab_size,
            max_positions: self.max_positions,
            dropout: self.dropout,
            dropout_src: self.dropout_src,
        }
    }

    /// Teachers may opt out of Dropout-Src via `aligner_dropout_src`.
    pub fn aligner_model_config(&self) -> ModelConfig {
        let mut config = self.model_config();
        if !self.aligner_dropout_src {
            config.dropout_src = 0.0;
        }
        config
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            learning_rate: self.learning_rate,
            warmup_steps: self.warmup_steps,
            seed,
            patience: self.patience,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }

    /// Train config for stages continuing from a trained checkpoint;
    /// warmup shrinks with the (usually small) example count.
    pub fn continue_train_config(&self, seed: u64, num_examples: usize) -> TrainConfig {
        let mut config = self.train_config(seed);
        config.learning_rate *= self.continue_lr_scale;
        config.max_epochs = self.distill_epochs;
        config.warmup_steps =
            config.warmup_steps.min(config.total_steps(num_examples.max(1)) / 10).max(1);
        config
    }

    /// Train config for the alignment-teacher stage.
    pub fn aligner_train_config(&self, seed: u64, num_examples: usize) -> TrainConfig {
        let mut config = self.train_config(seed);
        config.learning_rate *= self.aligner_lr_scale;
        config.max_epochs = self.aligner_epochs;
        config.patience = self.patience + 2;
        config.warmup_steps =
            config.warmup_steps.min(config.total_steps(num_examples.max(1)) / 10).max(1);
        config
    }

    pub fn distill_config(&self) -> DistillConfig {
        DistillConfig { alpha: self.alpha, beta: self.beta, tau: self.tau }
    }

    pub fn template(&self) -> TemplateId {
        TemplateId(self.template_id)
    }

    /// Absolute per-sentence rates: shares normalized to `1 - clean_fraction`.
    pub fn corruption_rules(&self) -> Result<Vec<CorruptionRule>> {
        let shares = [
            (ErrorKind::Missing, self.rate_missing),
            (ErrorKind::Redundant, self.rate_redundant),
            (ErrorKind::Substitution, self.rate_substitution),
            (ErrorKind::WordOrder, self.rate_word_order),
        ];
        let total: f64 = shares.iter().map(|(_, s)| s).sum();
        if total <= 0.0 || shares.iter().any(|(_, s)| *s < 0.0) {
            return Err(Error::Config("error-rate shares must be nonnegative, sum > 0".into()));
        }
        let budget = 1.0 - self.clean_fraction;
        Ok(shares
            .into_iter()
            .map(|(kind, share)| CorruptionRule {
                kind,
                rate: budget * share / total,
                span_len: self.max_span,
            })
            .collect())
    }
}
