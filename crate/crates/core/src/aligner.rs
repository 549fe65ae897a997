//! Alignment of a source corpus against a target corpus through an
//! intermediate translation of the source.
//!
//! For every source line `i`, in order:
//!
//! 1. unconsumed target lines within `window` of the expected position
//!    `i * len(target) / len(source)` form the candidate pool;
//! 2. the translation of line `i` is compared with each candidate through the
//!    comparator chain, and the accepted candidate with the highest score wins
//!    (ties: closest to the expected position, then lowest index);
//! 3. if one of the next `lookahead_depth` translations scores strictly
//!    higher against the winner, the winner is left for that line and `i`
//!    selects again without it;
//! 4. a line left without a candidate keeps its machine translation.
//!
//! Every source line yields exactly one output pair and a target line is
//! consumed by at most one source line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::similarity::{
    evaluate_prepared, ChainDecision, ComparatorChain, ComparatorKind, ComparisonContext, PreparedSentence,
    Similarity,
};
use crate::text::{Corpus, Sentence};

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_LOOKAHEAD: usize = 1;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("translation has {trans} lines but the source has {source_len}")]
    LengthMismatch { source_len: usize, trans: usize },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
}

#[derive(Debug, Clone)]
pub struct AlignmentConfig {
    pub chain: ComparatorChain,
    /// Half-width of the candidate window around the expected position;
    /// 0 searches the whole target corpus.
    pub window: usize,
    /// How many following translation lines may contest a candidate.
    pub lookahead_depth: usize,
    pub context: ComparisonContext,
    pub execution: Execution,
}

impl AlignmentConfig {
    pub fn new(chain: ComparatorChain) -> Self {
        AlignmentConfig {
            chain,
            window: DEFAULT_WINDOW,
            lookahead_depth: DEFAULT_LOOKAHEAD,
            context: ComparisonContext::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Aligned {
        target_index: usize,
        score: Similarity,
        comparator: ComparatorKind,
    },
    Translated,
    /// Machine translation used because one file has more lines than the
    /// other.
    Filled { disproportion: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDecision {
    pub source_index: usize,
    /// Target-side text placed next to the source line.
    pub text: String,
    pub outcome: Outcome,
}

impl AlignmentDecision {
    pub fn target_index(&self) -> Option<usize> {
        match self.outcome {
            Outcome::Aligned { target_index, .. } => Some(target_index),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentCounts {
    /// Lines matched to a target line.
    #[serde(rename = "A")]
    pub aligned: usize,
    /// Lines filled with their machine translation (not disproportion).
    #[serde(rename = "T")]
    pub translated: usize,
    /// Fills attributed to the line-count difference of the inputs.
    #[serde(rename = "D")]
    pub disproportion: usize,
    /// Output pairs.
    #[serde(rename = "L")]
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub decisions: Vec<AlignmentDecision>,
    pub pairs: Vec<(String, String)>,
    pub counts: AlignmentCounts,
    pub unmatched_targets: Vec<usize>,
}

impl AlignmentResult {
    pub fn filled(&self) -> usize {
        self.decisions
            .iter()
            .filter(|d| matches!(d.outcome, Outcome::Filled { .. }))
            .count()
    }
}

/// Expected target position of source line `i`.
pub fn expected_position(i: usize, source_len: usize, target_len: usize) -> usize {
    (i * target_len).checked_div(source_len).unwrap_or(0)
}

/// Unconsumed target indices within `window` of `expected` (all when
/// `window == 0`), ascending.
pub fn candidate_pool(expected: usize, window: usize, consumed: &[bool]) -> Vec<usize> {
    let (lo, hi) = if window == 0 {
        (0, consumed.len())
    } else {
        (
            expected.saturating_sub(window),
            expected.saturating_add(window + 1).min(consumed.len()),
        )
    };
    (lo..hi).filter(|&j| !consumed[j]).collect()
}

/// Pick the accepted candidate with the highest score. Ties go to the
/// candidate closest to `expected`, then to the lowest index.
pub fn select_candidate(
    expected: usize,
    pool: &[usize],
    trans_line: &PreparedSentence,
    targets: &[PreparedSentence],
    chain: &ComparatorChain,
    ctx: &ComparisonContext,
    execution: Execution,
) -> Option<(usize, ChainDecision)> {
    let scored = exec::map(execution, pool, |&j| {
        (j, evaluate_prepared(trans_line, &targets[j], chain, ctx))
    });
    let mut best: Option<(usize, ChainDecision)> = None;
    for (j, d) in scored.into_iter().filter(|(_, d)| d.accepted) {
        let better = match &best {
            None => true,
            Some((bj, bd)) => {
                d.score > bd.score
                    || (d.score == bd.score
                        && (j.abs_diff(expected), j) < (bj.abs_diff(expected), *bj))
            }
        };
        if better {
            best = Some((j, d));
        }
    }
    best
}

/// Whether line `i` keeps `candidate`. It does not if one of the next
/// `depth` translation lines scores strictly higher against it with the
/// comparator that accepted it for `i`.
pub fn lookahead_keep(
    i: usize,
    candidate: &PreparedSentence,
    decision: &ChainDecision,
    trans: &[PreparedSentence],
    ctx: &ComparisonContext,
    depth: usize,
) -> bool {
    let end = i.saturating_add(depth).min(trans.len().saturating_sub(1));
    ((i + 1)..=end).all(|k| trans[k].score(candidate, decision.comparator.kind, ctx) <= decision.score)
}

/// [`lookahead_keep`] over plain sentences.
pub fn lookahead_resolve(
    i: usize,
    candidate: &Sentence,
    decision: &ChainDecision,
    trans: &Corpus,
    ctx: &ComparisonContext,
    depth: usize,
) -> bool {
    let prepared: Vec<_> = trans.iter().map(PreparedSentence::from_sentence).collect();
    lookahead_keep(i, &PreparedSentence::from_sentence(candidate), decision, &prepared, ctx, depth)
}

pub fn align(
    source: &Corpus,
    target: &Corpus,
    trans: &Corpus,
    config: &AlignmentConfig,
) -> Result<AlignmentResult, AlignError> {
    if trans.len() != source.len() {
        return Err(AlignError::LengthMismatch {
            source_len: source.len(),
            trans: trans.len(),
        });
    }
    let n = source.len();
    let m = target.len();
    let ctx = &config.context;
    let targets: Vec<PreparedSentence> = exec::map(config.execution, target.sentences(), PreparedSentence::from_sentence);
    let trans_prep: Vec<PreparedSentence> = exec::map(config.execution, trans.sentences(), PreparedSentence::from_sentence);

    let disproportion_budget = n.abs_diff(m);
    let mut consumed = vec![false; m];
    let mut decisions = Vec::with_capacity(n);
    let mut counts = AlignmentCounts {
        total: n,
        ..AlignmentCounts::default()
    };

    for i in 0..n {
        let expected = expected_position(i, n, m);
        let mut deferred: Vec<usize> = Vec::new();
        let chosen = loop {
            let mut pool = candidate_pool(expected, config.window, &consumed);
            pool.retain(|j| !deferred.contains(j));
            let Some((j, decision)) = select_candidate(
                expected,
                &pool,
                &trans_prep[i],
                &targets,
                &config.chain,
                ctx,
                config.execution,
            ) else {
                break None;
            };
            if lookahead_keep(i, &targets[j], &decision, &trans_prep, ctx, config.lookahead_depth) {
                break Some((j, decision));
            }
            deferred.push(j);
        };

        let decision = match chosen {
            Some((j, d)) => {
                consumed[j] = true;
                counts.aligned += 1;
                AlignmentDecision {
                    source_index: i,
                    text: target[j].raw().to_owned(),
                    outcome: Outcome::Aligned {
                        target_index: j,
                        score: d.score,
                        comparator: d.comparator.kind,
                    },
                }
            }
            None => {
                let outcome = if counts.disproportion < disproportion_budget {
                    counts.disproportion += 1;
                    Outcome::Filled { disproportion: true }
                } else {
                    counts.translated += 1;
                    Outcome::Translated
                };
                AlignmentDecision {
                    source_index: i,
                    text: trans[i].raw().to_owned(),
                    outcome,
                }
            }
        };
        decisions.push(decision);
    }

    let pairs = source
        .iter()
        .zip(&decisions)
        .map(|(s, d)| (s.raw().to_owned(), d.text.clone()))
        .collect();
    let unmatched_targets = (0..m).filter(|&j| !consumed[j]).collect();
    Ok(AlignmentResult {
        decisions,
        pairs,
        counts,
        unmatched_targets,
    })
}

/// One line of the JSON-lines alignment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub source_index: usize,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<ComparatorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disproportion: Option<bool>,
    pub text: String,
}

/// Final line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTrailer {
    #[serde(flatten)]
    pub counts: AlignmentCounts,
    pub unmatched_targets: Vec<usize>,
}

impl From<&AlignmentDecision> for ReportRecord {
    fn from(d: &AlignmentDecision) -> Self {
        let mut rec = ReportRecord {
            source_index: d.source_index,
            outcome: String::new(),
            target_index: None,
            score: None,
            comparator: None,
            disproportion: None,
            text: d.text.clone(),
        };
        match d.outcome {
            Outcome::Aligned {
                target_index,
                score,
                comparator,
            } => {
                rec.outcome = "ALIGNED".into();
                rec.target_index = Some(target_index);
                rec.score = Some(score.value());
                rec.comparator = Some(comparator);
            }
            Outcome::Translated => rec.outcome = "TRANSLATED".into(),
            Outcome::Filled { disproportion } => {
                rec.outcome = "FILLED".into();
                rec.disproportion = Some(disproportion);
            }
        }
        rec
    }
}

impl ReportRecord {
    pub fn to_decision(&self) -> Result<AlignmentDecision, String> {
        let outcome = match self.outcome.as_str() {
            "ALIGNED" => Outcome::Aligned {
                target_index: self.target_index.ok_or("ALIGNED record without target_index")?,
                score: self
                    .score
                    .and_then(Similarity::new)
                    .ok_or("ALIGNED record without a valid score")?,
                comparator: self.comparator.ok_or("ALIGNED record without comparator")?,
            },
            "TRANSLATED" => Outcome::Translated,
            "FILLED" => Outcome::Filled {
                disproportion: self.disproportion.unwrap_or(true),
            },
            other => return Err(format!("unknown outcome {other:?}")),
        };
        Ok(AlignmentDecision {
            source_index: self.source_index,
            text: self.text.clone(),
            outcome,
        })
    }
}

pub fn write_report<W: Write>(result: &AlignmentResult, mut out: W) -> io::Result<()> {
    for d in &result.decisions {
        serde_json::to_writer(&mut out, &ReportRecord::from(d))?;
        out.write_all(b"\n")?;
    }
    let trailer = ReportTrailer {
        counts: result.counts,
        unmatched_targets: result.unmatched_targets.clone(),
    };
    serde_json::to_writer(&mut out, &trailer)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Parse a report back into decisions and its trailer.
pub fn read_report(text: &str) -> Result<(Vec<AlignmentDecision>, ReportTrailer), String> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let (last, body) = lines.split_last().ok_or("empty report")?;
    let trailer: ReportTrailer = serde_json::from_str(last).map_err(|e| format!("bad trailer: {e}"))?;
    let decisions = body
        .iter()
        .enumerate()
        .map(|(n, line)| {
            let rec: ReportRecord = serde_json::from_str(line).map_err(|e| format!("record {}: {e}", n + 1))?;
            rec.to_decision().map_err(|e| format!("record {}: {e}", n + 1))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((decisions, trailer))
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<(), AlignError> {
    let err = |source| AlignError::Write {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(err)?);
    for line in lines {
        out.write_all(line.as_bytes()).map_err(err)?;
        out.write_all(b"\n").map_err(err)?;
    }
    out.flush().map_err(err)
}

/// Write the two parallel files and the JSON-lines report.
pub fn write_alignment(
    result: &AlignmentResult,
    out_source: impl AsRef<Path>,
    out_target: impl AsRef<Path>,
    report: impl AsRef<Path>,
) -> Result<(), AlignError> {
    write_lines(out_source.as_ref(), result.pairs.iter().map(|p| p.0.clone()))?;
    write_lines(out_target.as_ref(), result.pairs.iter().map(|p| p.1.clone()))?;
    let report = report.as_ref();
    let err = |source| AlignError::Write {
        path: report.display().to_string(),
        source,
    };
    let file = File::create(report).map_err(err)?;
    write_report(result, BufWriter::new(file)).map_err(err)
}
