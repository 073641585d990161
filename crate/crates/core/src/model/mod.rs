//! Trainable sequence models.
//!
//! Two tiny transformer variants share one parameter store and one
//! reverse-mode tape ([`tape`]): an encoder-decoder and a decoder-only
//! model driven by rendered instruction prompts ([`prompts`]). All math is
//! `f64` so analytic gradients can be validated against central finite
//! differences at tight tolerances.

mod decode;
mod prompts;
mod tape;
mod transformer;

pub use decode::{decode, DecodeInput, Decoded};
pub use prompts::{render_align_prompt, render_gec_prompt, RenderedPrompt, TemplateId};
pub use tape::{GradStore, NodeId, Tape};
pub use transformer::{
    build_forward, dropout_src, forward, logits_for, target_with_eos, teacher_forced_decoder_input,
    Mode,
};

/// Row-wise softmax of `logits / tau`; the teacher side of distillation.
pub fn tempered_probs(logits: &ndarray::Array2<f64>, tau: f64) -> ndarray::Array2<f64> {
    tape::tempered_softmax(logits, tau)
}

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    EncoderDecoder,
    DecoderOnly,
}

/// Which pipeline role a parameter set plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Corrector,
    ForwardAligner,
    ReverseAligner,
    AlirectorStudent,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Corrector => "corrector",
            Role::ForwardAligner => "forward_aligner",
            Role::ReverseAligner => "reverse_aligner",
            Role::AlirectorStudent => "alirector_student",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub layers: usize,
    pub heads: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub dropout: f64,
    pub dropout_src: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.hidden_dim == 0 || self.ffn_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.hidden_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} must be divisible by heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.dropout_src) {
            return Err(Error::Config("dropout rates must be in [0,1)".into()));
        }
        if self.vocab_size == 0 || self.max_positions == 0 {
            return Err(Error::Config("vocab_size and max_positions must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }
}

/// Handle to one named tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Debug, Clone)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

/// Flat storage for all trainable tensors of one model.
///
/// The flat layout makes the optimizer, finite-difference probing, and
/// hashing trivial: every tensor is a contiguous `rows x cols` block.
#[derive(Debug, Clone)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    by_name: BTreeMap<String, usize>,
    data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore { entries: Vec::new(), by_name: BTreeMap::new(), data: Vec::new() }
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        debug_assert!(!self.by_name.contains_key(name), "duplicate param {name}");
        let offset = self.data.len();
        self.data.resize(offset + rows * cols, 0.0);
        self.entries.push(ParamEntry { name: name.to_string(), rows, cols, offset });
        self.by_name.insert(name.to_string(), self.entries.len() - 1);
        ParamId(self.entries.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn shape(&self, id: ParamId) -> (usize, usize) {
        let e = &self.entries[id.0];
        (e.rows, e.cols)
    }

    pub fn view(&self, id: ParamId) -> ArrayView2<'_, f64> {
        let e = &self.entries[id.0];
        ArrayView2::from_shape((e.rows, e.cols), &self.data[e.offset..e.offset + e.rows * e.cols])
            .expect("entry shape matches storage")
    }

    pub fn view_mut(&mut self, id: ParamId) -> ArrayViewMut2<'_, f64> {
        let e = self.entries[id.0].clone();
        ArrayViewMut2::from_shape(
            (e.rows, e.cols),
            &mut self.data[e.offset..e.offset + e.rows * e.cols],
        )
        .expect("entry shape matches storage")
    }

    pub fn param_count(&self) -> usize {
        self.data.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// SHA-256 over names, shapes, and raw parameter bits; stable across
    /// runs and platforms, used for teacher-freeze checks and manifests.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            hasher.update(e.name.as_bytes());
            hasher.update((e.rows as u64).to_le_bytes());
            hasher.update((e.cols as u64).to_le_bytes());
            for v in &self.data[e.offset..e.offset + e.rows * e.cols] {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex(&hasher.finalize())
    }

    pub(crate) fn offset_range(&self, id: ParamId) -> std::ops::Range<usize> {
        let e = &self.entries[id.0];
        e.offset..e.offset + e.rows * e.cols
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One model: config, role tag, and parameters.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub role: Role,
    pub store: ParamStore,
}

impl ModelParams {
    /// Builds and initializes parameters for `config` (weights ~ N(0, 0.02^2),
    /// biases and LayerNorm offsets zero, LayerNorm gains one).
    pub fn init(config: ModelConfig, role: Role, init_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        register_params(&config, &mut store);
        let mut rng = seed::rng(init_seed, "init", 0);
        for id in store.ids().collect::<Vec<_>>() {
            let name = store.name(id).to_string();
            let mut view = store.view_mut(id);
            if name.ends_with(".g") {
                view.fill(1.0);
            } else if name.ends_with(".b") || name.contains(".b_") {
                view.fill(0.0);
            } else {
                for v in view.iter_mut() {
                    *v = gauss(&mut rng) * 0.02;
                }
            }
        }
        Ok(ModelParams { config, role, store })
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn content_hash(&self) -> String {
        self.store.content_hash()
    }
}

fn gauss(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    // Box-Muller on two uniform draws.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Registers every tensor of the architecture in a fixed order.
fn register_params(config: &ModelConfig, store: &mut ParamStore) {
    let h = config.hidden_dim;
    let f = config.ffn_dim;
    let v = config.vocab_size;
    store.add("tok_emb", v, h);
    store.add("pos_emb", config.max_positions, h);
    let attn = |store: &mut ParamStore, prefix: &str| {
        for w in ["wq", "wk", "wv", "wo"] {
            store.add(&format!("{prefix}.{w}"), h, h);
        }
        for b in ["b_q", "b_k", "b_v", "b_o"] {
            store.add(&format!("{prefix}.{b}"), 1, h);
        }
    };
    let norm = |store: &mut ParamStore, prefix: &str| {
        store.add(&format!("{prefix}.g"), 1, h);
        store.add(&format!("{prefix}.b"), 1, h);
    };
    let ffn = |store: &mut ParamStore, prefix: &str| {
        store.add(&format!("{prefix}.w1"), h, f);
        store.add(&format!("{prefix}.b_1"), 1, f);
        store.add(&format!("{prefix}.w2"), f, h);
        store.add(&format!("{prefix}.b_2"), 1, h);
    };
    if config.arch == Arch::EncoderDecoder {
        for i in 0..config.layers {
            norm(store, &format!("enc{i}.ln1"));
            attn(store, &format!("enc{i}.self"));
            norm(store, &format!("enc{i}.ln2"));
            ffn(store, &format!("enc{i}.ffn"));
        }
        norm(store, "enc.ln_f");
    }
    for i in 0..config.layers {
        norm(store, &format!("dec{i}.ln1"));
        attn(store, &format!("dec{i}.self"));
        if config.arch == Arch::EncoderDecoder {
            norm(store, &format!("dec{i}.lnx"));
            attn(store, &format!("dec{i}.cross"));
        }
        norm(store, &format!("dec{i}.ln2"));
        ffn(store, &format!("dec{i}.ffn"));
    }
    norm(store, "dec.ln_f");
    store.add("head.w", h, v);
    store.add("head.b_out", 1, v);
}

/// Raw next-token scores over the target positions of one example.
#[derive(Debug, Clone)]
pub struct LogitsTensor {
    pub values: Array2<f64>,
    pub role: LogitsRole,
}

/// Which model produced a logits tensor during distillation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogitsRole {
    StudentC,
    ForwardF,
    ReverseR,
}

impl From<Role> for LogitsRole {
    fn from(role: Role) -> Self {
        match role {
            Role::Corrector | Role::AlirectorStudent => LogitsRole::StudentC,
            Role::ForwardAligner => LogitsRole::ForwardF,
            Role::ReverseAligner => LogitsRole::ReverseR,
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Seed/step snapshot stored with a checkpoint; together with the
/// per-purpose stream derivation this fully describes the RNG state.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub step: usize,
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    role: Role,
    rng_state: RngState,
    params: Vec<NamedTensor>,
}

const CHECKPOINT_FORMAT: &str = "alirector-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: impl AsRef<Path>, model: &ModelParams, rng: RngState) -> Result<()> {
    let path = path.as_ref();
    if !model.store.all_finite() {
        return Err(Error::Contract("refusing to checkpoint non-finite parameters".into()));
    }
    let params = model
        .store
        .ids()
        .map(|id| {
            let (rows, cols) = model.store.shape(id);
            NamedTensor {
                name: model.store.name(id).to_string(),
                rows,
                cols,
                data: model.store.data()[model.store.offset_range(id)].to_vec(),
            }
        })
        .collect();
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        role: model.role,
        rng_state: rng,
        params,
    };
    let bytes = serde_json::to_vec(&file)
        .map_err(|e| Error::Contract(format!("serializing checkpoint: {e}")))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, RngState)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("unsupported checkpoint header {}/{}", file.format, file.version),
        });
    }
    file.config.validate()?;
    let mut store = ParamStore::new();
    register_params(&file.config, &mut store);
    for tensor in &file.params {
        let id = store.id(&tensor.name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("unknown tensor `{}` for this config", tensor.name),
        })?;
        if store.shape(id) != (tensor.rows, tensor.cols)
            || tensor.data.len() != tensor.rows * tensor.cols
        {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("tensor `{}` has mismatched shape", tensor.name),
            });
        }
        let range = store.offset_range(id);
        store.data_mut()[range].copy_from_slice(&tensor.data);
    }
    Ok((ModelParams { config: file.config, role: file.role, store }, file.rng_state))
}

/// Convenience: zero-filled gradient buffer matching `store`'s layout.
pub fn grad_buffer(store: &ParamStore) -> GradStore {
    GradStore::zeros(store.param_count())
}
