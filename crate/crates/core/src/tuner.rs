//! Threshold tuning against a gold-labelled development set.
//!
//! Each comparator's threshold is searched on its own (the others stay at
//! their template values) by a binary search that probes the score on both
//! sides of the midpoint and halves toward the better side. The objective is
//! not guaranteed to be unimodal, so the best point seen anywhere during the
//! search is returned and the full trace is kept for inspection.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;
use thiserror::Error;

use crate::aligner::{align, AlignError, AlignmentConfig};
use crate::exec;
use crate::metrics::{evaluate_against_gold, MetricsError, ScoreCard};
use crate::similarity::{ChainError, ComparatorChain, ComparatorKind};
use crate::text::Corpus;

pub const DEFAULT_RESOLUTION: f64 = 1.0 / 256.0;

/// Slack for comparing interval widths against the resolution.
const WIDTH_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("gold reference is empty")]
    EmptyGold,
    #[error("{what} has {found} lines, expected {expected}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid search bounds [{lo}, {hi}]")]
    Bounds { lo: f64, hi: f64 },
    #[error("invalid resolution {0}")]
    Resolution(f64),
    #[error("no comparator at position {0}")]
    Position(usize),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub threshold: f64,
    pub score: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub threshold: f64,
    pub score: i64,
    /// Distinct thresholds evaluated, in evaluation order.
    pub trace: Vec<TracePoint>,
}

impl SearchOutcome {
    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }
}

fn check_bounds(lo: f64, hi: f64) -> Result<(), TuneError> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(TuneError::Bounds { lo, hi });
    }
    Ok(())
}

fn check_resolution(resolution: f64) -> Result<(), TuneError> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(TuneError::Resolution(resolution));
    }
    Ok(())
}

struct Probe<F> {
    objective: F,
    seen: HashMap<u64, i64>,
    trace: Vec<TracePoint>,
    best: Option<TracePoint>,
}

impl<F, E> Probe<F>
where
    F: FnMut(f64) -> Result<i64, E>,
{
    fn eval(&mut self, threshold: f64) -> Result<i64, E> {
        if let Some(&s) = self.seen.get(&threshold.to_bits()) {
            return Ok(s);
        }
        let score = (self.objective)(threshold)?;
        self.seen.insert(threshold.to_bits(), score);
        let point = TracePoint { threshold, score };
        self.trace.push(point);
        if self.best.is_none_or(|b| score > b.score) {
            self.best = Some(point);
        }
        Ok(score)
    }
}

/// Binary search for the threshold in `[lo, hi]` that maximizes `objective`.
///
/// Every step scores the midpoint and the points one resolution step either
/// side of it and keeps the half on the better side. When both sides tie the
/// interval endpoints break the tie, and a full tie keeps the lower half.
/// Results are memoized, so each threshold is evaluated at most once.
pub fn binary_search_threshold<F, E>(lo: f64, hi: f64, resolution: f64, objective: F) -> Result<SearchOutcome, E>
where
    F: FnMut(f64) -> Result<i64, E>,
    E: From<TuneError>,
{
    check_bounds(lo, hi)?;
    check_resolution(resolution)?;
    let mut probe = Probe {
        objective,
        seen: HashMap::new(),
        trace: Vec::new(),
        best: None,
    };
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > resolution * (1.0 + WIDTH_EPS) {
        let mid = lo + (hi - lo) / 2.0;
        probe.eval(mid)?;
        let below = probe.eval((mid - resolution).max(lo))?;
        let above = probe.eval((mid + resolution).min(hi))?;
        let go_up = if above != below {
            above > below
        } else {
            probe.eval(hi)? > probe.eval(lo)?
        };
        if go_up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    probe.eval(lo + (hi - lo) / 2.0)?;
    let best = probe.best.expect("at least one evaluation");
    Ok(SearchOutcome {
        threshold: best.threshold,
        score: best.score,
        trace: probe.trace,
    })
}

/// Development data plus the chain whose thresholds are being tuned.
#[derive(Debug)]
pub struct TuningJob {
    source: Corpus,
    target: Corpus,
    trans: Corpus,
    gold: Vec<String>,
    template: AlignmentConfig,
    bounds: Vec<(f64, f64)>,
    resolution: f64,
    align_calls: AtomicUsize,
}

impl TuningJob {
    /// `gold[i]` is the expected target text for source line `i`.
    pub fn new(
        source: Corpus,
        target: Corpus,
        trans: Corpus,
        gold: Vec<String>,
        template: AlignmentConfig,
    ) -> Result<Self, TuneError> {
        if gold.is_empty() {
            return Err(TuneError::EmptyGold);
        }
        for (what, found) in [("translation", trans.len()), ("gold", gold.len())] {
            if found != source.len() {
                return Err(TuneError::Length {
                    what,
                    expected: source.len(),
                    found,
                });
            }
        }
        let bounds = vec![(0.0, 1.0); template.chain.len()];
        Ok(TuningJob {
            source,
            target,
            trans,
            gold,
            template,
            bounds,
            resolution: DEFAULT_RESOLUTION,
            align_calls: AtomicUsize::new(0),
        })
    }

    pub fn with_bounds(mut self, position: usize, lo: f64, hi: f64) -> Result<Self, TuneError> {
        check_bounds(lo, hi)?;
        *self.bounds.get_mut(position).ok_or(TuneError::Position(position))? = (lo, hi);
        Ok(self)
    }

    pub fn with_resolution(mut self, resolution: f64) -> Result<Self, TuneError> {
        check_resolution(resolution)?;
        self.resolution = resolution;
        Ok(self)
    }

    pub fn template(&self) -> &AlignmentConfig {
        &self.template
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn bounds(&self, position: usize) -> Option<(f64, f64)> {
        self.bounds.get(position).copied()
    }

    pub fn dev_size(&self) -> usize {
        self.source.len()
    }

    /// Number of alignment runs performed so far.
    pub fn align_calls(&self) -> usize {
        self.align_calls.load(Ordering::Relaxed)
    }

    /// Align the dev set with `chain` and score the result against gold.
    pub fn evaluate(&self, chain: &ComparatorChain) -> Result<ScoreCard, TuneError> {
        if self.gold.is_empty() {
            return Err(TuneError::EmptyGold);
        }
        let mut config = self.template.clone();
        config.chain = chain.clone();
        self.align_calls.fetch_add(1, Ordering::Relaxed);
        let result = align(&self.source, &self.target, &self.trans, &config)?;
        Ok(evaluate_against_gold(&result.decisions, &self.gold)?)
    }
}

/// Tune the threshold of the comparator at `position`, others fixed.
pub fn tune_threshold(job: &TuningJob, position: usize) -> Result<SearchOutcome, TuneError> {
    let (lo, hi) = job.bounds(position).ok_or(TuneError::Position(position))?;
    let template = &job.template.chain;
    binary_search_threshold(lo, hi, job.resolution, |t| {
        let chain = template.with_threshold(position, t)?;
        Ok(job.evaluate(&chain)?.S)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparatorTuning {
    pub position: usize,
    pub kind: ComparatorKind,
    pub lo: f64,
    pub hi: f64,
    pub threshold: f64,
    /// Dev score with only this comparator's threshold changed.
    pub score: i64,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningReport {
    pub chain: ComparatorChain,
    pub comparators: Vec<ComparatorTuning>,
    /// Score of the assembled chain on the dev set.
    pub achieved: ScoreCard,
    pub resolution: f64,
    pub dev_lines: usize,
    pub align_calls: usize,
}

impl TuningReport {
    /// A config fragment the `align` command accepts.
    pub fn config_fragment(&self) -> serde_json::Value {
        serde_json::json!({ "chain": self.chain })
    }
}

/// Tune every comparator in isolation, then assemble and score the chain.
pub fn tune_chain(job: &TuningJob) -> Result<TuningReport, TuneError> {
    if job.gold.is_empty() {
        return Err(TuneError::EmptyGold);
    }
    let template = &job.template.chain;
    let outcomes = exec::map_range(job.template.execution, 0..template.len(), |p| tune_threshold(job, p));
    let mut comparators = Vec::with_capacity(outcomes.len());
    let mut chain = template.clone();
    for (position, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        let (lo, hi) = job.bounds[position];
        chain = chain.with_threshold(position, outcome.threshold)?;
        comparators.push(ComparatorTuning {
            position,
            kind: template.comparators()[position].kind,
            lo,
            hi,
            threshold: outcome.threshold,
            score: outcome.score,
            evaluations: outcome.evaluations(),
            trace: outcome.trace,
        });
    }
    let achieved = job.evaluate(&chain)?;
    Ok(TuningReport {
        chain,
        comparators,
        achieved,
        resolution: job.resolution,
        dev_lines: job.dev_size(),
        align_calls: job.align_calls(),
    })
}
