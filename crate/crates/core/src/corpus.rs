//! Synthetic parallel-correction data.
//!
//! Clean sentences come from a fixed class-cycling grammar: the body
//! vocabulary is partitioned into three classes by index (`sym % 3`) and a
//! grammatical sentence walks the classes cyclically, sampling each token
//! from Zipf-like weights inside the active class. Adjacent tokens
//! therefore never repeat, and any injected error (missing, redundant,
//! substituted, or reordered tokens) usually breaks the class pattern in a
//! learnable way. The marginal token distribution is analytic (each class
//! is active with probability 1/3 at every position), which the
//! frequency tests exploit.
//!
//! Corruption applies at most one rule per sentence: a single uniform draw
//! selects which rule fires (rates must sum to at most 1), and with the
//! remaining probability the example stays clean, which keeps error-free
//! pairs in the corpus for overcorrection measurement.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, Edit, EditType};
use crate::{seed, TokenId};

/// Characters backing the body vocabulary, in id order.
const BODY_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

const CLASS_COUNT: usize = 3;

/// Token vocabulary: fixed reserved ids followed by body symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    body: Vec<char>,
}

impl Vocab {
    pub const PAD: TokenId = 0;
    pub const BOS: TokenId = 1;
    pub const EOS: TokenId = 2;
    pub const SEP: TokenId = 3;
    pub const UNK: TokenId = 4;
    pub const INSTR_GEC: TokenId = 5;
    pub const INSTR_ALIGN: TokenId = 6;
    pub const INPUT: TokenId = 7;
    pub const RESP: TokenId = 8;
    /// Number of reserved ids; body symbols start here.
    pub const RESERVED: usize = 9;

    /// Builds a vocabulary with `body_size` sentence symbols.
    pub fn new(body_size: usize) -> Result<Self> {
        if body_size < 10 {
            return Err(Error::Config(format!("vocab_size must be >= 10, got {body_size}")));
        }
        if body_size > BODY_ALPHABET.chars().count() {
            return Err(Error::Config(format!(
                "vocab_size must be <= {}, got {body_size}",
                BODY_ALPHABET.chars().count()
            )));
        }
        Ok(Vocab { body: BODY_ALPHABET.chars().take(body_size).collect() })
    }

    /// Total vocabulary size including reserved tokens (the model's view).
    pub fn size(&self) -> usize {
        Self::RESERVED + self.body.len()
    }

    pub fn body_size(&self) -> usize {
        self.body.len()
    }

    pub fn is_reserved(id: TokenId) -> bool {
        (id as usize) < Self::RESERVED
    }

    pub fn body_id(&self, body_index: usize) -> TokenId {
        debug_assert!(body_index < self.body.len());
        (Self::RESERVED + body_index) as TokenId
    }

    fn body_index(&self, id: TokenId) -> Option<usize> {
        let idx = (id as usize).checked_sub(Self::RESERVED)?;
        (idx < self.body.len()).then_some(idx)
    }

    /// Per-character encoding; unknown characters map to `UNK` and are
    /// counted so callers can warn.
    pub fn encode(&self, s: &str) -> (Vec<TokenId>, usize) {
        let mut unknown = 0;
        let ids = s
            .chars()
            .map(|c| {
                if c == '\t' {
                    Self::SEP
                } else if let Some(idx) = self.body.iter().position(|&b| b == c) {
                    self.body_id(idx)
                } else {
                    unknown += 1;
                    Self::UNK
                }
            })
            .collect();
        (ids, unknown)
    }

    /// Renders token ids as a string (reserved ids get placeholder glyphs).
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| match id {
                Self::PAD => '#',
                Self::BOS => '^',
                Self::EOS => '$',
                Self::SEP => '\t',
                Self::UNK => '?',
                Self::INSTR_GEC => '!',
                Self::INSTR_ALIGN => '@',
                Self::INPUT => '<',
                Self::RESP => '>',
                other => self.body_index(other).map(|i| self.body[i]).unwrap_or('?'),
            })
            .collect()
    }

    fn class_of(body_index: usize) -> usize {
        body_index % CLASS_COUNT
    }

    /// Unnormalized within-class weight of a body symbol (Zipf-like decay
    /// over its rank inside the class).
    fn class_weight(body_index: usize) -> f64 {
        1.0 / (2.0 + (body_index / CLASS_COUNT) as f64)
    }

    /// Analytic marginal probability of each body symbol at any sentence
    /// position: classes are equiprobable and weights are normalized
    /// within each class.
    pub fn body_marginals(&self) -> Vec<f64> {
        let mut class_totals = [0.0f64; CLASS_COUNT];
        for idx in 0..self.body.len() {
            class_totals[Self::class_of(idx)] += Self::class_weight(idx);
        }
        (0..self.body.len())
            .map(|idx| {
                Self::class_weight(idx) / class_totals[Self::class_of(idx)] / CLASS_COUNT as f64
            })
            .collect()
    }

    fn sample_from_class(&self, class: usize, rng: &mut ChaCha8Rng) -> TokenId {
        let members: Vec<usize> =
            (0..self.body.len()).filter(|&i| Self::class_of(i) == class).collect();
        let total: f64 = members.iter().map(|&i| Self::class_weight(i)).sum();
        let mut dart = rng.random::<f64>() * total;
        for &i in &members {
            dart -= Self::class_weight(i);
            if dart <= 0.0 {
                return self.body_id(i);
            }
        }
        self.body_id(*members.last().expect("classes are nonempty for body_size >= 10"))
    }

    fn sample_body_uniform(&self, rng: &mut ChaCha8Rng) -> TokenId {
        self.body_id(rng.random_range(0..self.body.len()))
    }
}

/// A grammatical sentence of body tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanSentence {
    pub tokens: Vec<TokenId>,
}

/// Configuration for [`generate_clean_corpus`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub count: usize,
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("count must be positive".into()));
        }
        if self.min_len < 2 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "need 2 <= min_len <= max_len, got {}..{}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }
}

/// Generates `count` clean sentences from the fixed grammar.
///
/// Example `i` depends only on `(seed, i)`, so corpora are reproducible
/// and order-independent.
pub fn generate_clean_corpus(config: &CorpusConfig) -> Result<Vec<CleanSentence>> {
    config.validate()?;
    let vocab = Vocab::new(config.vocab_size)?;
    Ok((0..config.count).map(|i| generate_sentence(&vocab, config, i as u64)).collect())
}

fn generate_sentence(vocab: &Vocab, config: &CorpusConfig, index: u64) -> CleanSentence {
    let mut rng = seed::rng(config.seed, "sentence", index);
    let len = rng.random_range(config.min_len..=config.max_len);
    let start_class = rng.random_range(0..CLASS_COUNT);
    let tokens = (0..len)
        .map(|t| vocab.sample_from_class((start_class + t) % CLASS_COUNT, &mut rng))
        .collect();
    CleanSentence { tokens }
}

/// The four injectable error kinds, mirroring the M/R/S/W edit taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Missing,
    Redundant,
    Substitution,
    WordOrder,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 4] =
        [ErrorKind::Missing, ErrorKind::Redundant, ErrorKind::Substitution, ErrorKind::WordOrder];

    pub fn edit_type(self) -> EditType {
        match self {
            ErrorKind::Missing => EditType::M,
            ErrorKind::Redundant => EditType::R,
            ErrorKind::Substitution => EditType::S,
            ErrorKind::WordOrder => EditType::W,
        }
    }
}

/// One corruption rule: `kind` fires with probability `rate` per sentence
/// and touches at most `span_len` tokens.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorruptionRule {
    pub kind: ErrorKind,
    pub rate: f64,
    pub span_len: usize,
}

/// A source sentence paired with its gold target and the injected edits.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelExample {
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
    pub applied_edits: Vec<Edit>,
    pub example_seed: u64,
}

fn validate_rules(rules: &[CorruptionRule]) -> Result<f64> {
    let mut total = 0.0;
    for rule in rules {
        if !(0.0..=1.0).contains(&rule.rate) {
            return Err(Error::Config(format!(
                "rule rate must be in [0,1], got {} for {:?}",
                rule.rate, rule.kind
            )));
        }
        if rule.span_len == 0 {
            return Err(Error::Config(format!("span_len must be positive for {:?}", rule.kind)));
        }
        total += rule.rate;
    }
    if total > 1.0 + 1e-9 {
        return Err(Error::Config(format!("rule rates sum to {total}, must be <= 1")));
    }
    Ok(total)
}

/// Corrupts a clean sentence into a (source, target) pair.
///
/// A single uniform draw selects at most one rule; with probability
/// `1 - sum(rates)` the example is left clean. The injected error is
/// recorded as a gold [`Edit`] over the corrupted source, so replaying
/// `applied_edits` on `source` reproduces `target`.
pub fn corrupt(
    sentence: &CleanSentence,
    rules: &[CorruptionRule],
    vocab: &Vocab,
    rng_seed: u64,
) -> Result<ParallelExample> {
    if sentence.tokens.is_empty() {
        return Err(Error::Contract("cannot corrupt an empty sentence".into()));
    }
    validate_rules(rules)?;

    let mut rng = seed::rng(rng_seed, "corrupt", 0);
    let draw: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut selected = None;
    for rule in rules {
        cumulative += rule.rate;
        if draw < cumulative {
            selected = Some(*rule);
            break;
        }
    }
    let target = sentence.tokens.clone();
    let Some(rule) = selected else {
        return Ok(ParallelExample {
            source: target.clone(),
            target,
            applied_edits: vec![],
            example_seed: rng_seed,
        });
    };

    let (source, edit) = inject(&target, rule, vocab, &mut rng);
    let applied_edits = edit.into_iter().collect();
    Ok(ParallelExample { source, target, applied_edits, example_seed: rng_seed })
}

fn inject(
    target: &[TokenId],
    rule: CorruptionRule,
    vocab: &Vocab,
    rng: &mut ChaCha8Rng,
) -> (Vec<TokenId>, Option<Edit>) {
    let len = target.len();
    match rule.kind {
        ErrorKind::Missing => {
            // Drop a span from the target; the gold edit re-inserts it.
            let k = rng.random_range(1..=rule.span_len.min(len.saturating_sub(1)).max(1));
            let j = rng.random_range(0..=len - k);
            let mut source = target.to_vec();
            source.drain(j..j + k);
            let edit = Edit {
                kind: EditType::M,
                src_start: j,
                src_end: j,
                tgt_start: j,
                tgt_end: j + k,
                removed: vec![],
                replacement: target[j..j + k].to_vec(),
            };
            (source, Some(edit))
        }
        ErrorKind::Redundant => {
            let k = rng.random_range(1..=rule.span_len);
            let j = rng.random_range(0..=len);
            let junk: Vec<TokenId> = (0..k).map(|_| vocab.sample_body_uniform(rng)).collect();
            let mut source = target.to_vec();
            source.splice(j..j, junk.iter().copied());
            let edit = Edit {
                kind: EditType::R,
                src_start: j,
                src_end: j + k,
                tgt_start: j,
                tgt_end: j,
                removed: junk,
                replacement: vec![],
            };
            (source, Some(edit))
        }
        ErrorKind::Substitution => {
            let k = rng.random_range(1..=rule.span_len.min(len));
            let j = rng.random_range(0..=len - k);
            // Each token changes, and the span must not be a pure
            // permutation of the original (that would be a W edit).
            let junk = loop {
                let candidate: Vec<TokenId> = target[j..j + k]
                    .iter()
                    .map(|&orig| loop {
                        let t = vocab.sample_body_uniform(rng);
                        if t != orig {
                            break t;
                        }
                    })
                    .collect();
                let mut a = candidate.clone();
                let mut b = target[j..j + k].to_vec();
                a.sort_unstable();
                b.sort_unstable();
                if a != b {
                    break candidate;
                }
            };
            let mut source = target.to_vec();
            source[j..j + k].copy_from_slice(&junk);
            let edit = Edit {
                kind: EditType::S,
                src_start: j,
                src_end: j + k,
                tgt_start: j,
                tgt_end: j + k,
                removed: junk,
                replacement: target[j..j + k].to_vec(),
            };
            (source, Some(edit))
        }
        ErrorKind::WordOrder => {
            // Adjacent-span reversal of length 2..=3; class cycling
            // guarantees the reversed span differs from the original.
            if len < 2 {
                return (target.to_vec(), None);
            }
            let max_k = rule.span_len.clamp(2, 3).min(len);
            let k = if max_k <= 2 { 2 } else { rng.random_range(2..=max_k) };
            let j = rng.random_range(0..=len - k);
            let mut source = target.to_vec();
            source[j..j + k].reverse();
            let removed = source[j..j + k].to_vec();
            let edit = Edit {
                kind: EditType::W,
                src_start: j,
                src_end: j + k,
                tgt_start: j,
                tgt_end: j + k,
                removed,
                replacement: target[j..j + k].to_vec(),
            };
            (source, Some(edit))
        }
    }
}

/// Teacher/student split of the training pool plus held-out sets.
#[derive(Debug, Clone, Default)]
pub struct DatasetSplit {
    pub correction_train: Vec<ParallelExample>,
    pub alignment_train: Vec<ParallelExample>,
    pub dev: Vec<ParallelExample>,
    pub test: Vec<ParallelExample>,
    pub split_seed: u64,
}

/// Shuffles `examples` and partitions them so the first part holds
/// `ratio` of the pool (rounded). Both parts must end up nonempty.
pub fn split_dataset(
    examples: Vec<ParallelExample>,
    ratio: f64,
    split_seed: u64,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0,1), got {ratio}")));
    }
    let n = examples.len();
    let n_correction = (ratio * n as f64).round() as usize;
    if n_correction == 0 || n_correction == n {
        return Err(Error::Split(format!(
            "{n} examples cannot be split {ratio} with both parts nonempty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(split_seed, "split", 0);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut examples: Vec<Option<ParallelExample>> = examples.into_iter().map(Some).collect();
    let take = |idxs: &[usize], pool: &mut Vec<Option<ParallelExample>>| {
        idxs.iter().map(|&i| pool[i].take().expect("indices are unique")).collect::<Vec<_>>()
    };
    let correction_train = take(&order[..n_correction], &mut examples);
    let alignment_train = take(&order[n_correction..], &mut examples);
    Ok(DatasetSplit { correction_train, alignment_train, dev: vec![], test: vec![], split_seed })
}

// ---------------------------------------------------------------------------
// JSONL parallel-data files
// ---------------------------------------------------------------------------

/// Wire format of one parallel-data record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParallelRecord {
    pub source: String,
    pub target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edits: Option<Vec<EditRecord>>,
}

/// Wire format of one gold edit (replacement is recovered from the target
/// span on load).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditRecord {
    #[serde(rename = "type")]
    pub kind: EditType,
    pub src_start: usize,
    pub src_end: usize,
    pub tgt_start: usize,
    pub tgt_end: usize,
}

impl EditRecord {
    pub fn from_edit(e: &Edit) -> Self {
        EditRecord {
            kind: e.kind,
            src_start: e.src_start,
            src_end: e.src_end,
            tgt_start: e.tgt_start,
            tgt_end: e.tgt_end,
        }
    }

    pub fn to_edit(&self, source: &[TokenId], target: &[TokenId]) -> Result<Edit> {
        if self.src_end > source.len() || self.tgt_end > target.len() {
            return Err(Error::Contract(format!(
                "edit record spans [{},{})/[{},{}) outside sentence bounds",
                self.src_start, self.src_end, self.tgt_start, self.tgt_end
            )));
        }
        Ok(Edit {
            kind: self.kind,
            src_start: self.src_start,
            src_end: self.src_end,
            tgt_start: self.tgt_start,
            tgt_end: self.tgt_end,
            removed: source[self.src_start..self.src_end].to_vec(),
            replacement: target[self.tgt_start..self.tgt_end].to_vec(),
        })
    }
}

/// Writes examples as UTF-8 JSONL with their gold edits.
pub fn save_parallel_jsonl(
    path: impl AsRef<Path>,
    examples: &[ParallelExample],
    vocab: &Vocab,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for ex in examples {
        let record = ParallelRecord {
            source: vocab.decode(&ex.source),
            target: vocab.decode(&ex.target),
            prediction: None,
            edits: Some(ex.applied_edits.iter().map(EditRecord::from_edit).collect()),
        };
        serde_json::to_writer(&mut out, &record)
            .map_err(|e| Error::Contract(format!("serializing record: {e}")))?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a parallel JSONL file with per-character tokenization.
///
/// Gold edits are recomputed via [`eval::extract_edits`] when absent.
/// Unknown characters fall into the `UNK` bucket with a warning.
pub fn load_parallel_jsonl(path: impl AsRef<Path>, vocab: &Vocab) -> Result<Vec<ParallelExample>> {
    let path = path.as_ref();
    let records = read_records(path)?;
    let mut unknown_total = 0usize;
    let examples = records
        .into_iter()
        .map(|(line_no, record)| {
            let (source, u1) = vocab.encode(&record.source);
            let (target, u2) = vocab.encode(&record.target);
            unknown_total += u1 + u2;
            let applied_edits = match record.edits {
                Some(recs) => recs
                    .iter()
                    .map(|r| r.to_edit(&source, &target))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: e.to_string(),
                    })?,
                None => eval::extract_edits(&source, &target),
            };
            Ok(ParallelExample { source, target, applied_edits, example_seed: line_no as u64 })
        })
        .collect::<Result<Vec<_>>>()?;
    if unknown_total > 0 {
        eprintln!(
            "warning: {} unknown character(s) in {} mapped to the vocab overflow bucket",
            unknown_total,
            path.display()
        );
    }
    Ok(examples)
}

/// Parses JSONL into `(line_number, record)` pairs, skipping blank lines.
pub(crate) fn read_records(path: &Path) -> Result<Vec<(usize, ParallelRecord)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ParallelRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push((idx + 1, record));
    }
    Ok(records)
}

/// Writes `(source, prediction)` pairs as JSONL.
pub fn save_predictions_jsonl(
    path: impl AsRef<Path>,
    sources: &[Vec<TokenId>],
    predictions: &[Vec<TokenId>],
    vocab: &Vocab,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (src, pred) in sources.iter().zip(predictions) {
        let record = serde_json::json!({
            "source": vocab.decode(src),
            "prediction": vocab.decode(pred),
        });
        out.extend_from_slice(record.to_string().as_bytes());
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads `(source, prediction)` pairs written by [`save_predictions_jsonl`].
pub fn load_predictions_jsonl(
    path: impl AsRef<Path>,
    vocab: &Vocab,
) -> Result<Vec<(Vec<TokenId>, Vec<TokenId>)>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        let get = |key: &str| -> Result<String> {
            value
                .get(key)
                .and_then(|v| v.as_str())
                .map(str::to_owned)
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("missing string field `{key}`"),
                })
        };
        let (source, _) = vocab.encode(&get("source")?);
        let (prediction, _) = vocab.encode(&get("prediction")?);
        pairs.push((source, prediction));
    }
    Ok(pairs)
}

/// Writes a flat `key = value` summary of corpus generation settings next
/// to the data so the SEP index and grammar stay pinned to the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabManifest {
    pub body_size: usize,
    pub sep_id: TokenId,
    pub reserved: usize,
    pub symbols: String,
}

impl VocabManifest {
    pub fn of(vocab: &Vocab) -> Self {
        VocabManifest {
            body_size: vocab.body_size(),
            sep_id: Vocab::SEP,
            reserved: Vocab::RESERVED,
            symbols: vocab.body.iter().collect(),
        }
    }
}

pub fn save_vocab(path: impl AsRef<Path>, vocab: &Vocab) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let json = serde_json::to_string_pretty(&VocabManifest::of(vocab))
        .map_err(|e| Error::Contract(format!("serializing vocab: {e}")))?;
    file.write_all(json.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocab> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: VocabManifest = serde_json::from_str(&raw).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    Vocab::new(manifest.body_size)
}

/// Frequency table of gold edit types in a corpus slice.
pub fn edit_type_histogram(examples: &[ParallelExample]) -> BTreeMap<EditType, usize> {
    let mut hist = BTreeMap::new();
    for ex in examples {
        for e in &ex.applied_edits {
            *hist.entry(e.kind).or_insert(0) += 1;
        }
    }
    hist
}
