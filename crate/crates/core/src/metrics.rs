//! Alignment quality score and translation metrics.
//!
//! The alignment score weighs each output line by its outcome: an aligned
//! line earns 1 point, a misaligned one costs 0.2, a machine-translated fill
//! earns 0.4 and a fill caused by unequal file lengths earns 1. Scaled to 100
//! and floored:
//!
//! ```text
//! S = floor(20 * (5A - M + 2T + 5D) / L)
//! ```
//!
//! BLEU, TER and CER are computed from per-sentence sufficient statistics
//! that add up component-wise, so corpus scores can be accumulated in any
//! order or in parallel.

use std::collections::HashMap;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligner::{AlignmentDecision, Outcome};
use crate::exec::{self, Execution};
use crate::text::{normalize, tokenize_text, Sentence, TokenizedSentence};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("alignment score is undefined for zero output lines")]
    NoLines,
    #[error("gold reference has no entry for source line {0}")]
    MissingGold(usize),
    #[error("empty hypothesis")]
    EmptyHypothesis,
    #[error("empty reference")]
    EmptyReference,
    #[error("invalid BLEU weights: {0}")]
    Weights(String),
    #[error("hypothesis has {hyp} lines, reference has {reference}")]
    LineCount { hyp: usize, reference: usize },
}

/// Counters of the alignment score and the score itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ScoreCard {
    pub A: u64,
    pub M: u64,
    pub T: u64,
    pub D: u64,
    pub L: u64,
    pub S: i64,
}

impl ScoreCard {
    pub fn new(aligned: u64, misaligned: u64, translated: u64, disproportion: u64, lines: u64) -> Result<Self, MetricsError> {
        Ok(ScoreCard {
            A: aligned,
            M: misaligned,
            T: translated,
            D: disproportion,
            L: lines,
            S: alignment_score(aligned, misaligned, translated, disproportion, lines)?,
        })
    }

    /// Whether `S` lies in the nominal 1..=100 range.
    pub fn in_nominal_range(&self) -> bool {
        (1..=100).contains(&self.S)
    }
}

/// `floor(20 * (5A - M + 2T + 5D) / L)` in exact integer arithmetic.
pub fn alignment_score(aligned: u64, misaligned: u64, translated: u64, disproportion: u64, lines: u64) -> Result<i64, MetricsError> {
    if lines == 0 {
        return Err(MetricsError::NoLines);
    }
    let points = 5 * aligned as i128 - misaligned as i128 + 2 * translated as i128 + 5 * disproportion as i128;
    let s = (20 * points).div_euclid(lines as i128);
    Ok(s as i64)
}

/// Classify decisions against gold target texts (indexed by source line).
/// Aligned lines whose text matches the gold after normalization count as
/// aligned, other aligned lines as misaligned.
pub fn evaluate_against_gold<S: AsRef<str>>(decisions: &[AlignmentDecision], gold: &[S]) -> Result<ScoreCard, MetricsError> {
    let (mut a, mut m, mut t, mut d) = (0, 0, 0, 0);
    for dec in decisions {
        let expected = gold
            .get(dec.source_index)
            .ok_or(MetricsError::MissingGold(dec.source_index))?;
        match dec.outcome {
            Outcome::Aligned { .. } => {
                if normalize(&dec.text) == normalize(expected.as_ref()) {
                    a += 1;
                } else {
                    m += 1;
                }
            }
            Outcome::Translated | Outcome::Filled { disproportion: false } => t += 1,
            Outcome::Filled { disproportion: true } => d += 1,
        }
    }
    ScoreCard::new(a, m, t, d, decisions.len() as u64)
}

/// Per-order n-gram counts plus lengths for one or more sentence pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SufficientStats {
    /// Clipped n-gram matches, orders 1..=N.
    pub matches: Vec<u64>,
    /// Hypothesis n-gram counts, orders 1..=N.
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl SufficientStats {
    pub fn max_order(&self) -> usize {
        self.matches.len()
    }
}

impl AddAssign<&SufficientStats> for SufficientStats {
    fn add_assign(&mut self, rhs: &SufficientStats) {
        let n = self.matches.len().max(rhs.matches.len());
        self.matches.resize(n, 0);
        self.totals.resize(n, 0);
        for (k, (m, t)) in rhs.matches.iter().zip(&rhs.totals).enumerate() {
            self.matches[k] += m;
            self.totals[k] += t;
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

impl Add for SufficientStats {
    type Output = SufficientStats;

    fn add(mut self, rhs: SufficientStats) -> SufficientStats {
        self += &rhs;
        self
    }
}

impl Sum for SufficientStats {
    fn sum<I: Iterator<Item = SufficientStats>>(iter: I) -> Self {
        iter.fold(SufficientStats::default(), Add::add)
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_default() += 1;
    }
    counts
}

pub fn bleu_stats_tokens<S: AsRef<str>>(hyp: &[S], reference: &[S], max_order: usize) -> SufficientStats {
    let mut stats = SufficientStats {
        matches: vec![0; max_order],
        totals: vec![0; max_order],
        hyp_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
    };
    for n in 1..=max_order {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        stats.totals[n - 1] = h.values().sum();
        stats.matches[n - 1] = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// A hypothesis sentence with its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub hypothesis: Sentence,
    pub reference: Sentence,
}

pub fn bleu_stats(pair: &EvalPair, max_order: usize) -> SufficientStats {
    bleu_stats_tokens(&pair.hypothesis.tokenize().tokens, &pair.reference.tokenize().tokens, max_order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BpForm {
    /// `exp(1 - r/c)`
    #[default]
    Standard,
    /// `exp((1 - r)/c)`, the alternative reading of the typeset formula.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Smoothing {
    /// A zero n-gram precision makes BLEU zero.
    #[default]
    None,
    /// Replace zero match counts with this epsilon.
    Epsilon(f64),
}

/// Brevity penalty for candidate length `c` and reference length `r`.
pub fn brevity_penalty(c: u64, r: u64, form: BpForm) -> Result<f64, MetricsError> {
    if c == 0 {
        return Err(MetricsError::EmptyHypothesis);
    }
    if c > r {
        return Ok(1.0);
    }
    let (c, r) = (c as f64, r as f64);
    Ok(match form {
        BpForm::Standard => (1.0 - r / c).exp(),
        BpForm::Paper => ((1.0 - r) / c).exp(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuOptions {
    pub weights: Vec<f64>,
    pub bp_form: BpForm,
    pub smoothing: Smoothing,
}

impl BleuOptions {
    /// Uniform weights up to `max_order`.
    pub fn uniform(max_order: usize) -> Self {
        BleuOptions {
            weights: vec![1.0 / max_order as f64; max_order],
            bp_form: BpForm::Standard,
            smoothing: Smoothing::None,
        }
    }

    pub fn max_order(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<(), MetricsError> {
        if self.weights.is_empty() {
            return Err(MetricsError::Weights("no weights".into()));
        }
        if self.weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(MetricsError::Weights("weights must be positive".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricsError::Weights(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

impl Default for BleuOptions {
    fn default() -> Self {
        BleuOptions::uniform(4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    pub bleu: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub c: u64,
    pub r: u64,
}

/// BLEU from (summed) sufficient statistics.
pub fn bleu(stats: &SufficientStats, options: &BleuOptions) -> Result<BleuScore, MetricsError> {
    options.validate()?;
    let n = options.max_order();
    let bp = brevity_penalty(stats.hyp_len, stats.ref_len, options.bp_form)?;
    let mut precisions = Vec::with_capacity(n);
    let mut log_sum = 0.0;
    let mut zero = false;
    for k in 0..n {
        let total = stats.totals.get(k).copied().unwrap_or(0);
        let matched = stats.matches.get(k).copied().unwrap_or(0);
        let p = if total == 0 { 0.0 } else { matched as f64 / total as f64 };
        precisions.push(p);
        let p_eff = match options.smoothing {
            Smoothing::Epsilon(eps) if matched == 0 => eps / total.max(1) as f64,
            _ => p,
        };
        if p_eff <= 0.0 {
            zero = true;
        } else {
            log_sum += options.weights[k] * p_eff.ln();
        }
    }
    let bleu = if zero { 0.0 } else { bp * log_sum.exp() };
    Ok(BleuScore {
        bleu,
        precisions,
        brevity_penalty: bp,
        c: stats.hyp_len,
        r: stats.ref_len,
    })
}

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag } else { 1 + diag.min(up).min(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Longest phrase considered for a single shift.
pub const MAX_SHIFT_SIZE: usize = 10;

/// Edit counts behind a TER score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerStats {
    pub shifts: u64,
    /// Shifts plus the remaining word edit distance.
    pub edits: u64,
    pub ref_len: u64,
}

impl Add for TerStats {
    type Output = TerStats;

    fn add(self, rhs: TerStats) -> TerStats {
        TerStats {
            shifts: self.shifts + rhs.shifts,
            edits: self.edits + rhs.edits,
            ref_len: self.ref_len + rhs.ref_len,
        }
    }
}

impl Sum for TerStats {
    fn sum<I: Iterator<Item = TerStats>>(iter: I) -> Self {
        iter.fold(TerStats::default(), Add::add)
    }
}

impl TerStats {
    pub fn rate(&self) -> Result<f64, MetricsError> {
        if self.ref_len == 0 {
            return Err(MetricsError::EmptyReference);
        }
        Ok(self.edits as f64 / self.ref_len as f64)
    }
}

fn occurs_in<T: PartialEq>(phrase: &[T], haystack: &[T]) -> bool {
    haystack.windows(phrase.len()).any(|w| w == phrase)
}

/// Greedy shift search: apply the phrase move that lowers the word edit
/// distance the most, as long as it saves more than its own unit cost.
/// Only phrases that occur in the reference are moved.
pub fn ter_stats<T: PartialEq + Clone>(hyp: &[T], reference: &[T]) -> TerStats {
    let mut cur = hyp.to_vec();
    let mut dist = edit_distance(&cur, reference);
    let mut shifts = 0;
    while dist > 1 {
        let mut best: Option<(usize, Vec<T>)> = None;
        for start in 0..cur.len() {
            for len in 1..=MAX_SHIFT_SIZE.min(cur.len() - start) {
                let phrase = &cur[start..start + len];
                if !occurs_in(phrase, reference) {
                    break;
                }
                let mut rest = Vec::with_capacity(cur.len() - len);
                rest.extend_from_slice(&cur[..start]);
                rest.extend_from_slice(&cur[start + len..]);
                for dest in 0..=rest.len() {
                    if dest == start {
                        continue;
                    }
                    let mut cand = Vec::with_capacity(cur.len());
                    cand.extend_from_slice(&rest[..dest]);
                    cand.extend_from_slice(phrase);
                    cand.extend_from_slice(&rest[dest..]);
                    let d = edit_distance(&cand, reference);
                    if d + 1 < dist && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        best = Some((d, cand));
                    }
                }
            }
        }
        match best {
            Some((d, cand)) => {
                cur = cand;
                dist = d;
                shifts += 1;
            }
            None => break,
        }
    }
    TerStats {
        shifts,
        edits: shifts + dist as u64,
        ref_len: reference.len() as u64,
    }
}

/// Translation edit rate of `hyp` against `reference`.
pub fn ter(hyp: &TokenizedSentence, reference: &TokenizedSentence) -> Result<f64, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    ter_stats(&hyp.tokens, &reference.tokens).rate()
}

/// Character edits and reference length for CER.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CerStats {
    pub edits: u64,
    pub ref_len: u64,
}

impl Add for CerStats {
    type Output = CerStats;

    fn add(self, rhs: CerStats) -> CerStats {
        CerStats {
            edits: self.edits + rhs.edits,
            ref_len: self.ref_len + rhs.ref_len,
        }
    }
}

impl Sum for CerStats {
    fn sum<I: Iterator<Item = CerStats>>(iter: I) -> Self {
        iter.fold(CerStats::default(), Add::add)
    }
}

impl CerStats {
    pub fn rate(&self) -> Result<f64, MetricsError> {
        if self.ref_len == 0 {
            return Err(MetricsError::EmptyReference);
        }
        Ok(self.edits as f64 / self.ref_len as f64)
    }
}

pub fn cer_stats(hyp: &str, reference: &str) -> CerStats {
    let h: Vec<char> = hyp.chars().collect();
    let r: Vec<char> = reference.chars().collect();
    CerStats {
        edits: edit_distance(&h, &r) as u64,
        ref_len: r.len() as u64,
    }
}

/// Character edit rate over the normalized texts.
pub fn cer(hyp: &Sentence, reference: &Sentence) -> Result<f64, MetricsError> {
    cer_stats(hyp.normalized(), reference.normalized()).rate()
}

/// Corpus-level BLEU, TER and CER.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusEvaluation {
    pub bleu: f64,
    pub ter: f64,
    pub cer: f64,
    pub c: u64,
    pub r: u64,
    pub per_order_precisions: Vec<f64>,
    pub brevity_penalty: f64,
}

#[derive(Debug, Clone, Default)]
struct LineStats {
    bleu: SufficientStats,
    ter: TerStats,
    cer: CerStats,
}

/// Score hypothesis lines against reference lines, line by line, summing
/// the statistics before computing each metric.
pub fn evaluate_corpus<S: AsRef<str> + Sync>(
    hyps: &[S],
    refs: &[S],
    options: &BleuOptions,
    execution: Execution,
) -> Result<CorpusEvaluation, MetricsError> {
    if hyps.len() != refs.len() {
        return Err(MetricsError::LineCount {
            hyp: hyps.len(),
            reference: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(MetricsError::EmptyHypothesis);
    }
    options.validate()?;
    let n = options.max_order();
    let per_line = exec::map_range(execution, 0..hyps.len(), |i| {
        let h = tokenize_text(hyps[i].as_ref());
        let r = tokenize_text(refs[i].as_ref());
        LineStats {
            bleu: bleu_stats_tokens(&h, &r, n),
            ter: ter_stats(&h, &r),
            cer: cer_stats(&normalize(hyps[i].as_ref()), &normalize(refs[i].as_ref())),
        }
    });
    let mut bleu_total = SufficientStats::default();
    let mut ter_total = TerStats::default();
    let mut cer_total = CerStats::default();
    for s in &per_line {
        bleu_total += &s.bleu;
        ter_total = ter_total + s.ter;
        cer_total = cer_total + s.cer;
    }
    let b = bleu(&bleu_total, options)?;
    Ok(CorpusEvaluation {
        bleu: b.bleu,
        ter: ter_total.rate()?,
        cer: cer_total.rate()?,
        c: b.c,
        r: b.r,
        per_order_precisions: b.precisions,
        brevity_penalty: b.brevity_penalty,
    })
}
