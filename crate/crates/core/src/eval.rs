//! Character-level edit extraction and scoring.
//!
//! Edits are minimal-cost Levenshtein scripts (insert = delete = substitute
//! = 1) with deterministic tie-breaking, merged into span edits and
//! classified into the four error types:
//!
//! * `M` (missing): tokens absent from the source, inserted by the edit;
//! * `R` (redundant): source tokens deleted by the edit;
//! * `S` (substitution): a span rewritten with different tokens;
//! * `W` (word order): a span rewritten with the same token multiset in a
//!   different order.
//!
//! Matching is exact (type + source span + replacement), precision/recall
//! are micro-averaged over the corpus, and F0.5 weights precision twice as
//! heavily as recall. A false positive is an overcorrection (the system
//! touched error-free tokens), a false negative an undercorrection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EditType {
    M,
    R,
    S,
    W,
}

impl EditType {
    pub const ALL: [EditType; 4] = [EditType::M, EditType::R, EditType::S, EditType::W];

    pub fn as_str(self) -> &'static str {
        match self {
            EditType::M => "M",
            EditType::R => "R",
            EditType::S => "S",
            EditType::W => "W",
        }
    }
}

/// One span edit transforming the source sequence toward the other side.
///
/// `removed` holds the source tokens in `[src_start, src_end)`;
/// `replacement` the tokens that take their place (empty for deletions).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edit {
    pub kind: EditType,
    pub src_start: usize,
    pub src_end: usize,
    pub tgt_start: usize,
    pub tgt_end: usize,
    pub removed: Vec<TokenId>,
    pub replacement: Vec<TokenId>,
}

impl Edit {
    /// Key used for exact matching between gold and predicted edits.
    fn match_key(&self) -> (EditType, usize, usize, &[TokenId]) {
        (self.kind, self.src_start, self.src_end, &self.replacement)
    }
}

/// Raw alignment operation before merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    /// Source position i equals target position j.
    Match { i: usize, j: usize },
    /// Source token at i replaced by target token at j.
    Sub { i: usize, j: usize },
    /// Source token at i deleted; j is the target-side gap it points at.
    Del { i: usize, j: usize },
    /// Target token at j inserted before source position i.
    Ins { i: usize, j: usize },
}

impl EditOp {
    fn is_match(self) -> bool {
        matches!(self, EditOp::Match { .. })
    }
}

/// Minimal edit distance between two token sequences (unit costs).
pub fn edit_distance(a: &[TokenId], b: &[TokenId]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Minimal-cost alignment script in left-to-right order.
///
/// Tie-breaking is deterministic: substitution is preferred over deletion,
/// deletion over insertion. The number of non-match operations always
/// equals [`edit_distance`].
pub fn edit_ops(source: &[TokenId], hypothesis: &[TokenId]) -> Vec<EditOp> {
    let m = source.len();
    let n = hypothesis.len();
    let mut cost = vec![vec![0usize; n + 1]; m + 1];
    for i in 0..=m {
        cost[i][0] = i;
    }
    for j in 0..=n {
        cost[0][j] = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = cost[i - 1][j - 1] + usize::from(source[i - 1] != hypothesis[j - 1]);
            cost[i][j] = sub.min(cost[i - 1][j] + 1).min(cost[i][j - 1] + 1);
        }
    }
    // Backtrace preferring diagonal (match/substitution), then deletion,
    // then insertion; unique, so the script is deterministic.
    let mut ops = Vec::with_capacity(m.max(n));
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let c = cost[i][j];
        if i > 0 && j > 0 {
            let same = source[i - 1] == hypothesis[j - 1];
            if cost[i - 1][j - 1] + usize::from(!same) == c {
                i -= 1;
                j -= 1;
                ops.push(if same { EditOp::Match { i, j } } else { EditOp::Sub { i, j } });
                continue;
            }
        }
        if i > 0 && cost[i - 1][j] + 1 == c {
            i -= 1;
            ops.push(EditOp::Del { i, j });
            continue;
        }
        j -= 1;
        ops.push(EditOp::Ins { i, j });
    }
    ops.reverse();
    ops
}

/// Classifies an edit from its span shapes and token content.
pub fn classify_edit(edit: &Edit) -> Result<EditType> {
    if edit.src_start > edit.src_end || edit.tgt_start > edit.tgt_end {
        return Err(Error::Contract(format!(
            "malformed edit spans [{},{}) / [{},{})",
            edit.src_start, edit.src_end, edit.tgt_start, edit.tgt_end
        )));
    }
    if edit.removed.is_empty() && edit.replacement.is_empty() {
        return Err(Error::Contract("edit removes and inserts nothing".into()));
    }
    Ok(if edit.removed.is_empty() {
        EditType::M
    } else if edit.replacement.is_empty() {
        EditType::R
    } else if edit.removed != edit.replacement && same_multiset(&edit.removed, &edit.replacement) {
        EditType::W
    } else {
        EditType::S
    })
}

fn same_multiset(a: &[TokenId], b: &[TokenId]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    sa == sb
}

/// Extracts span edits that turn `source` into `hypothesis`.
///
/// Adjacent same-type operations merge into one span edit; a deletion
/// immediately followed by an insertion (or vice versa) whose token
/// multisets agree merges into a single word-order (`W`) edit, as does a
/// substitution span that permutes its own tokens.
pub fn extract_edits(source: &[TokenId], hypothesis: &[TokenId]) -> Vec<Edit> {
    let ops = edit_ops(source, hypothesis);
    let mut edits: Vec<Edit> = Vec::new();
    let mut k = 0;
    while k < ops.len() {
        if ops[k].is_match() {
            k += 1;
            continue;
        }
        let start = k;
        while k < ops.len() && !ops[k].is_match() && variant_of(ops[k]) == variant_of(ops[start]) {
            k += 1;
        }
        edits.push(group_to_edit(&ops[start..k], source, hypothesis));
    }
    merge_word_order_pairs(&mut edits);
    for e in &mut edits {
        e.kind = classify_edit(e).expect("extracted edits are well formed");
    }
    edits
}

fn variant_of(op: EditOp) -> u8 {
    match op {
        EditOp::Match { .. } => 0,
        EditOp::Sub { .. } => 1,
        EditOp::Del { .. } => 2,
        EditOp::Ins { .. } => 3,
    }
}

fn group_to_edit(group: &[EditOp], source: &[TokenId], hypothesis: &[TokenId]) -> Edit {
    let (src_start, src_end, tgt_start, tgt_end) = match group[0] {
        EditOp::Sub { i, j } => (i, i + group.len(), j, j + group.len()),
        EditOp::Del { i, j } => (i, i + group.len(), j, j),
        EditOp::Ins { i, j } => (i, i, j, j + group.len()),
        EditOp::Match { .. } => unreachable!("match ops are never grouped"),
    };
    Edit {
        kind: EditType::S, // refined by classify_edit afterwards
        src_start,
        src_end,
        tgt_start,
        tgt_end,
        removed: source[src_start..src_end].to_vec(),
        replacement: hypothesis[tgt_start..tgt_end].to_vec(),
    }
}

fn merge_word_order_pairs(edits: &mut Vec<Edit>) {
    let mut k = 0;
    while k + 1 < edits.len() {
        let (a, b) = (&edits[k], &edits[k + 1]);
        let del_then_ins = a.replacement.is_empty()
            && b.removed.is_empty()
            && a.src_end == b.src_start
            && same_multiset(&a.removed, &b.replacement);
        let ins_then_del = a.removed.is_empty()
            && b.replacement.is_empty()
            && a.src_start == b.src_start
            && same_multiset(&b.removed, &a.replacement);
        if del_then_ins || ins_then_del {
            let (del, ins) = if del_then_ins { (k, k + 1) } else { (k + 1, k) };
            let merged = Edit {
                kind: EditType::W,
                src_start: edits[del].src_start,
                src_end: edits[del].src_end,
                tgt_start: edits[ins].tgt_start,
                tgt_end: edits[ins].tgt_end,
                removed: edits[del].removed.clone(),
                replacement: edits[ins].replacement.clone(),
            };
            edits[k] = merged;
            edits.remove(k + 1);
        } else {
            k += 1;
        }
    }
}

/// Applies non-overlapping edits (sorted by source position) to `source`.
pub fn apply_edits(source: &[TokenId], edits: &[Edit]) -> Result<Vec<TokenId>> {
    let mut sorted: Vec<&Edit> = edits.iter().collect();
    sorted.sort_by_key(|e| (e.src_start, e.src_end));
    for pair in sorted.windows(2) {
        if pair[1].src_start < pair[0].src_end {
            return Err(Error::Contract("overlapping edits".into()));
        }
    }
    let mut out = Vec::with_capacity(source.len());
    let mut cursor = 0;
    for e in sorted {
        if e.src_end > source.len() {
            return Err(Error::Contract(format!(
                "edit span [{},{}) outside source of length {}",
                e.src_start,
                e.src_end,
                source.len()
            )));
        }
        out.extend_from_slice(&source[cursor..e.src_start]);
        out.extend_from_slice(&e.replacement);
        cursor = e.src_end;
    }
    out.extend_from_slice(&source[cursor..]);
    Ok(out)
}

/// Per-type true/false positive/negative tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
}

/// Outcome of matching one sentence's predicted edits against gold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub per_type: BTreeMap<EditType, TypeCounts>,
}

impl MatchCounts {
    fn absorb(&mut self, other: &MatchCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        for (ty, c) in &other.per_type {
            let slot = self.per_type.entry(*ty).or_default();
            slot.tp += c.tp;
            slot.fp += c.fp;
            slot.fn_ += c.fn_;
        }
    }
}

/// Matches predicted edits against gold edits for one sentence.
///
/// An exact match (type, source span, replacement) is a true positive;
/// every unmatched predicted edit is a false positive (an overcorrection)
/// and every unmatched gold edit a false negative (an undercorrection).
/// Per-type tallies attribute FPs by predicted type and FNs by gold type.
pub fn match_edits(gold: &[Edit], predicted: &[Edit]) -> MatchCounts {
    let mut counts = MatchCounts::default();
    let mut gold_used = vec![false; gold.len()];
    for p in predicted {
        let hit = gold
            .iter()
            .enumerate()
            .find(|(gi, g)| !gold_used[*gi] && g.match_key() == p.match_key());
        match hit {
            Some((gi, _)) => {
                gold_used[gi] = true;
                counts.tp += 1;
                counts.per_type.entry(p.kind).or_default().tp += 1;
            }
            None => {
                counts.fp += 1;
                counts.per_type.entry(p.kind).or_default().fp += 1;
            }
        }
    }
    for (gi, g) in gold.iter().enumerate() {
        if !gold_used[gi] {
            counts.fn_ += 1;
            counts.per_type.entry(g.kind).or_default().fn_ += 1;
        }
    }
    counts
}

/// F-measure over percentage-scaled precision and recall; 0 when both are 0.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Edit-level evaluation report (percent-scaled scores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
    pub per_type: BTreeMap<EditType, TypeCounts>,
    pub overcorrections: usize,
    pub undercorrections: usize,
}

impl EvalReport {
    pub fn from_counts(counts: MatchCounts) -> Self {
        let precision = ratio_pct(counts.tp, counts.tp + counts.fp);
        let recall = ratio_pct(counts.tp, counts.tp + counts.fn_);
        let mut per_type = counts.per_type;
        for c in per_type.values_mut() {
            c.precision = ratio_pct(c.tp, c.tp + c.fp);
        }
        EvalReport {
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            precision,
            recall,
            f05: f_beta(precision, recall, 0.5),
            per_type,
            overcorrections: counts.fp,
            undercorrections: counts.fn_,
        }
    }
}

fn ratio_pct(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        100.0 * num as f64 / denom as f64
    }
}

/// One scoring unit: the erroneous source, its gold target, and a system
/// hypothesis.
#[derive(Debug, Clone)]
pub struct EvalTriple {
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
    pub hypothesis: Vec<TokenId>,
}

/// Scores a corpus of (source, gold, hypothesis) triples.
///
/// Gold and predicted edits are both extracted with [`extract_edits`]
/// relative to the source, matched per sentence, and micro-averaged.
pub fn score_corpus(pairs: &[EvalTriple]) -> EvalReport {
    let mut total = MatchCounts::default();
    for t in pairs {
        let gold = extract_edits(&t.source, &t.target);
        let predicted = extract_edits(&t.source, &t.hypothesis);
        total.absorb(&match_edits(&gold, &predicted));
    }
    EvalReport::from_counts(total)
}

/// One row of a system-vs-baseline overcorrection comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `None` aggregates all error types.
    pub edit_type: Option<EditType>,
    pub baseline_overcorrections: usize,
    pub system_overcorrections: usize,
    /// Relative change in percent ((system - baseline) / baseline * 100);
    /// negative values mean the system overcorrects less. `None` when the
    /// baseline count is zero.
    pub overcorrection_change_pct: Option<f64>,
    pub baseline_undercorrections: usize,
    pub system_undercorrections: usize,
    pub undercorrection_change_pct: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OvercorrectionReport {
    pub baseline: String,
    pub systems: Vec<SystemComparison>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemComparison {
    pub system: String,
    pub rows: Vec<ComparisonRow>,
}

/// Relative change of `system` vs `baseline` in percent, `None` for a zero
/// baseline.
pub fn change_pct(baseline: usize, system: usize) -> Option<f64> {
    if baseline == 0 {
        None
    } else {
        Some((system as f64 - baseline as f64) / baseline as f64 * 100.0)
    }
}

/// Builds the per-type overcorrection/undercorrection comparison of each
/// system against the first entry (the baseline). Requires at least two
/// systems scored on the same corpus.
pub fn overcorrection_report(per_system: &[(String, EvalReport)]) -> Result<OvercorrectionReport> {
    if per_system.len() < 2 {
        return Err(Error::Contract(
            "overcorrection report needs a baseline and at least one system".into(),
        ));
    }
    let (base_name, base) = &per_system[0];
    let mut systems = Vec::new();
    for (name, report) in &per_system[1..] {
        let mut rows = Vec::new();
        for ty in EditType::ALL {
            let b = base.per_type.get(&ty).copied().unwrap_or_default();
            let s = report.per_type.get(&ty).copied().unwrap_or_default();
            rows.push(ComparisonRow {
                edit_type: Some(ty),
                baseline_overcorrections: b.fp,
                system_overcorrections: s.fp,
                overcorrection_change_pct: change_pct(b.fp, s.fp),
                baseline_undercorrections: b.fn_,
                system_undercorrections: s.fn_,
                undercorrection_change_pct: change_pct(b.fn_, s.fn_),
            });
        }
        rows.push(ComparisonRow {
            edit_type: None,
            baseline_overcorrections: base.overcorrections,
            system_overcorrections: report.overcorrections,
            overcorrection_change_pct: change_pct(base.overcorrections, report.overcorrections),
            baseline_undercorrections: base.undercorrections,
            system_undercorrections: report.undercorrections,
            undercorrection_change_pct: change_pct(base.undercorrections, report.undercorrections),
        });
        systems.push(SystemComparison { system: name.clone(), rows });
    }
    Ok(OvercorrectionReport { baseline: base_name.clone(), systems })
}

/// Plain-text table of an [`EvalReport`].
pub fn render_report_text(name: &str, report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{name}: P={:.2} R={:.2} F0.5={:.2} (tp={} fp={} fn={})\n",
        report.precision, report.recall, report.f05, report.tp, report.fp, report.fn_
    ));
    out.push_str("  type      tp     fp     fn   precision\n");
    for ty in EditType::ALL {
        let c = report.per_type.get(&ty).copied().unwrap_or_default();
        out.push_str(&format!(
            "  {:<5} {:>6} {:>6} {:>6}   {:>8.2}\n",
            ty.as_str(),
            c.tp,
            c.fp,
            c.fn_,
            c.precision
        ));
    }
    out.push_str(&format!(
        "  overcorrections={} undercorrections={}\n",
        report.overcorrections, report.undercorrections
    ));
    out
}
