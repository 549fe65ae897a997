//! Sentence-pair similarity.
//!
//! Three comparators are available, from cheapest to most expensive:
//!
//! * `token_overlap`: Dice coefficient over stop-word-filtered token multisets;
//! * `matching_blocks_ratio`: `2M / T` over characters, where `M` is the total
//!   length of the matching blocks found by recursive longest-common-block
//!   decomposition and `T` the combined length;
//! * `synonym_ratio`: the best `matching_blocks_ratio` over synonym variants
//!   of the first sentence.
//!
//! A [`ComparatorChain`] tries them in cost order and stops at the first one
//! whose score reaches its threshold.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{expand_text, StopWordList, SynonymLexicon, DEFAULT_VARIANT_CAP};
use crate::text::{token_spans, Sentence, TokenizedSentence};

/// A similarity value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Similarity(f64);

impl Similarity {
    pub const ZERO: Similarity = Similarity(0.0);
    pub const ONE: Similarity = Similarity(1.0);

    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Similarity(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    fn from_counts(matched: usize, total: usize) -> Self {
        if total == 0 {
            Similarity::ONE
        } else {
            Similarity(2.0 * matched as f64 / total as f64)
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<Similarity> for f64 {
    fn from(s: Similarity) -> f64 {
        s.0
    }
}

/// A common run: `a[a_start..a_start+length] == b[b_start..b_start+length]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingBlock {
    pub a_start: usize,
    pub b_start: usize,
    pub length: usize,
}

/// Longest-common-block search over `a` against a fixed `b`.
struct BlockFinder<'a, T> {
    a: &'a [T],
    b2j: HashMap<&'a T, Vec<usize>>,
    prev: Vec<usize>,
    cur: Vec<usize>,
}

impl<'a, T: Eq + Hash> BlockFinder<'a, T> {
    fn new(a: &'a [T], b: &'a [T]) -> Self {
        let mut b2j: HashMap<&T, Vec<usize>> = HashMap::new();
        for (j, item) in b.iter().enumerate() {
            b2j.entry(item).or_default().push(j);
        }
        BlockFinder {
            a,
            b2j,
            prev: vec![0; b.len() + 1],
            cur: vec![0; b.len() + 1],
        }
    }

    /// Longest block inside `a[alo..ahi]` x `b[blo..bhi]`; ties go to the
    /// smallest `a_start`, then the smallest `b_start`.
    fn longest(&mut self, alo: usize, ahi: usize, blo: usize, bhi: usize) -> MatchingBlock {
        let mut best = MatchingBlock {
            a_start: alo,
            b_start: blo,
            length: 0,
        };
        // prev[j + 1] = length of the match ending at (i - 1, j)
        let mut prev_touched: Vec<usize> = Vec::new();
        let mut cur_touched: Vec<usize> = Vec::new();
        for i in alo..ahi {
            if let Some(js) = self.b2j.get(&self.a[i]) {
                let start = js.partition_point(|&j| j < blo);
                for &j in &js[start..] {
                    if j >= bhi {
                        break;
                    }
                    let k = if j > blo { self.prev[j] + 1 } else { 1 };
                    self.cur[j + 1] = k;
                    cur_touched.push(j + 1);
                    if k > best.length {
                        best = MatchingBlock {
                            a_start: i + 1 - k,
                            b_start: j + 1 - k,
                            length: k,
                        };
                    }
                }
            }
            for &t in &prev_touched {
                self.prev[t] = 0;
            }
            std::mem::swap(&mut self.prev, &mut self.cur);
            std::mem::swap(&mut prev_touched, &mut cur_touched);
            cur_touched.clear();
        }
        for &t in &prev_touched {
            self.prev[t] = 0;
        }
        best
    }
}

/// Matching blocks of two sequences, ordered and with adjacent blocks merged.
pub fn matching_blocks_of<T: Eq + Hash>(a: &[T], b: &[T]) -> Vec<MatchingBlock> {
    let mut finder = BlockFinder::new(a, b);
    let mut blocks = Vec::new();
    let mut queue = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let m = finder.longest(alo, ahi, blo, bhi);
        if m.length == 0 {
            continue;
        }
        blocks.push(m);
        queue.push((alo, m.a_start, blo, m.b_start));
        queue.push((m.a_start + m.length, ahi, m.b_start + m.length, bhi));
    }
    blocks.sort_by_key(|m| m.a_start);

    let mut merged: Vec<MatchingBlock> = Vec::with_capacity(blocks.len());
    for m in blocks {
        match merged.last_mut() {
            Some(last)
                if last.a_start + last.length == m.a_start
                    && last.b_start + last.length == m.b_start =>
            {
                last.length += m.length
            }
            _ => merged.push(m),
        }
    }
    merged
}

/// Matching blocks over the characters of two strings. Offsets are in chars.
pub fn matching_blocks(a: &str, b: &str) -> Vec<MatchingBlock> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    matching_blocks_of(&a, &b)
}

pub fn matched_length<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    matching_blocks_of(a, b).iter().map(|m| m.length).sum()
}

pub fn ratio_of<T: Eq + Hash>(a: &[T], b: &[T]) -> Similarity {
    Similarity::from_counts(matched_length(a, b), a.len() + b.len())
}

/// `2M / T` over characters; 1.0 when both strings are empty.
pub fn ratio(a: &str, b: &str) -> Similarity {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratio_of(&a, &b)
}

/// Upper bound on `ratio_of(a, b)` from character multiset overlap.
fn ratio_upper_bound(a: &[char], b_counts: &HashMap<char, usize>, b_len: usize) -> f64 {
    let mut avail = b_counts.clone();
    let mut common = 0;
    for c in a {
        if let Some(n) = avail.get_mut(c) {
            if *n > 0 {
                *n -= 1;
                common += 1;
            }
        }
    }
    Similarity::from_counts(common, a.len() + b_len).value()
}

fn overlap_of<S: AsRef<str>>(a: &[S], b: &[S], stopwords: &StopWordList) -> Similarity {
    let mut counts: HashMap<&str, isize> = HashMap::new();
    let mut a_len = 0;
    for t in a.iter().map(AsRef::as_ref).filter(|t| !stopwords.contains(t)) {
        *counts.entry(t).or_default() += 1;
        a_len += 1;
    }
    let mut b_len = 0;
    let mut common = 0;
    for t in b.iter().map(AsRef::as_ref).filter(|t| !stopwords.contains(t)) {
        b_len += 1;
        if let Some(n) = counts.get_mut(t) {
            if *n > 0 {
                *n -= 1;
                common += 1;
            }
        }
    }
    Similarity::from_counts(common, a_len + b_len)
}

/// Dice coefficient of the stop-word-filtered token multisets.
pub fn token_overlap(a: &TokenizedSentence, b: &TokenizedSentence, stopwords: &StopWordList) -> Similarity {
    overlap_of(&a.tokens, &b.tokens, stopwords)
}

/// Best character ratio between any synonym variant of `a` and `b`.
pub fn synonym_ratio(a: &Sentence, b: &Sentence, lexicon: &SynonymLexicon, cap: usize) -> Similarity {
    let ctx = ComparisonContext {
        lexicon: lexicon.clone(),
        cap,
        ..ComparisonContext::default()
    };
    let pa = PreparedSentence::new(a.normalized());
    let pb = PreparedSentence::new(b.normalized());
    pa.synonym_ratio(&pb, &ctx)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("comparator chain is empty")]
    Empty,
    #[error("threshold {0} is outside [0, 1]")]
    Threshold(String),
    #[error("comparators must be ordered by cost: {0} after {1}")]
    Order(ComparatorKind, ComparatorKind),
    #[error("unknown comparator kind {0:?}")]
    UnknownKind(String),
    #[error("bad chain entry {0:?}: expected kind:threshold")]
    Syntax(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorKind {
    TokenOverlap,
    MatchingBlocksRatio,
    SynonymRatio,
}

impl ComparatorKind {
    /// Relative cost; lower runs first.
    pub fn cost_class(self) -> u8 {
        match self {
            ComparatorKind::TokenOverlap => 0,
            ComparatorKind::MatchingBlocksRatio => 1,
            ComparatorKind::SynonymRatio => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ComparatorKind::TokenOverlap => "token_overlap",
            ComparatorKind::MatchingBlocksRatio => "matching_blocks_ratio",
            ComparatorKind::SynonymRatio => "synonym_ratio",
        }
    }
}

impl fmt::Display for ComparatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComparatorKind {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self, ChainError> {
        match s.trim() {
            "token_overlap" | "overlap" => Ok(ComparatorKind::TokenOverlap),
            "matching_blocks_ratio" | "ratio" => Ok(ComparatorKind::MatchingBlocksRatio),
            "synonym_ratio" | "synonym" => Ok(ComparatorKind::SynonymRatio),
            other => Err(ChainError::UnknownKind(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    pub kind: ComparatorKind,
    pub threshold: Similarity,
}

impl Comparator {
    pub fn new(kind: ComparatorKind, threshold: f64) -> Result<Self, ChainError> {
        let threshold = Similarity::new(threshold).ok_or_else(|| ChainError::Threshold(threshold.to_string()))?;
        Ok(Comparator { kind, threshold })
    }

    pub fn cost_class(&self) -> u8 {
        self.kind.cost_class()
    }
}

/// Non-empty list of comparators in ascending cost order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ComparatorChain {
    comparators: Vec<Comparator>,
}

impl ComparatorChain {
    pub fn new(comparators: Vec<Comparator>) -> Result<Self, ChainError> {
        if comparators.is_empty() {
            return Err(ChainError::Empty);
        }
        for pair in comparators.windows(2) {
            if pair[1].cost_class() < pair[0].cost_class() {
                return Err(ChainError::Order(pair[1].kind, pair[0].kind));
            }
        }
        for c in &comparators {
            if !(0.0..=1.0).contains(&c.threshold.value()) {
                return Err(ChainError::Threshold(c.threshold.to_string()));
            }
        }
        Ok(ComparatorChain { comparators })
    }

    pub fn single(kind: ComparatorKind, threshold: f64) -> Result<Self, ChainError> {
        Self::new(vec![Comparator::new(kind, threshold)?])
    }

    pub fn comparators(&self) -> &[Comparator] {
        &self.comparators
    }

    pub fn len(&self) -> usize {
        self.comparators.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same chain with the threshold at `position` replaced.
    pub fn with_threshold(&self, position: usize, threshold: f64) -> Result<Self, ChainError> {
        let mut comparators = self.comparators.clone();
        let slot = comparators
            .get_mut(position)
            .ok_or_else(|| ChainError::Syntax(format!("no comparator at position {position}")))?;
        *slot = Comparator::new(slot.kind, threshold)?;
        Self::new(comparators)
    }
}

impl<'de> Deserialize<'de> for ComparatorChain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let comparators = Vec::<Comparator>::deserialize(d)?;
        ComparatorChain::new(comparators).map_err(serde::de::Error::custom)
    }
}

impl FromStr for ComparatorChain {
    type Err = ChainError;

    /// Parses `kind:threshold[,kind:threshold...]`.
    fn from_str(s: &str) -> Result<Self, ChainError> {
        let comparators = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|part| {
                let (kind, thr) = part
                    .split_once(':')
                    .ok_or_else(|| ChainError::Syntax(part.to_owned()))?;
                let thr: f64 = thr
                    .trim()
                    .parse()
                    .map_err(|_| ChainError::Syntax(part.to_owned()))?;
                Comparator::new(kind.parse()?, thr)
            })
            .collect::<Result<Vec<_>, _>>()?;
        ComparatorChain::new(comparators)
    }
}

impl fmt::Display for ComparatorChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.comparators.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", c.kind, c.threshold)?;
        }
        Ok(())
    }
}

/// Resources the comparators need besides the two sentences.
#[derive(Debug, Clone)]
pub struct ComparisonContext {
    pub stopwords: StopWordList,
    pub lexicon: SynonymLexicon,
    pub cap: usize,
}

impl Default for ComparisonContext {
    fn default() -> Self {
        ComparisonContext {
            stopwords: StopWordList::default(),
            lexicon: SynonymLexicon::default(),
            cap: DEFAULT_VARIANT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDecision {
    pub accepted: bool,
    pub score: Similarity,
    /// Index into the chain of the comparator that produced `score`.
    pub position: usize,
    pub comparator: Comparator,
}

/// A sentence with its comparison forms computed once.
#[derive(Debug)]
pub struct PreparedSentence {
    normalized: String,
    chars: Vec<char>,
    tokens: Vec<String>,
    variants: OnceLock<Vec<Vec<char>>>,
    char_counts: OnceLock<HashMap<char, usize>>,
}

impl PreparedSentence {
    pub fn new(normalized: &str) -> Self {
        PreparedSentence {
            normalized: normalized.to_owned(),
            chars: normalized.chars().collect(),
            tokens: token_spans(normalized)
                .into_iter()
                .map(|r| normalized[r].to_owned())
                .collect(),
            variants: OnceLock::new(),
            char_counts: OnceLock::new(),
        }
    }

    pub fn from_sentence(s: &Sentence) -> Self {
        Self::new(s.normalized())
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }

    fn counts(&self) -> &HashMap<char, usize> {
        self.char_counts.get_or_init(|| {
            let mut m = HashMap::new();
            for &c in &self.chars {
                *m.entry(c).or_default() += 1;
            }
            m
        })
    }

    fn variants(&self, ctx: &ComparisonContext) -> &[Vec<char>] {
        self.variants.get_or_init(|| {
            expand_text(&self.normalized, &ctx.lexicon, ctx.cap.max(1))
                .into_iter()
                .map(|v| v.chars().collect())
                .collect()
        })
    }

    pub fn ratio(&self, other: &PreparedSentence) -> Similarity {
        ratio_of(&self.chars, &other.chars)
    }

    pub fn token_overlap(&self, other: &PreparedSentence, stopwords: &StopWordList) -> Similarity {
        overlap_of(&self.tokens, &other.tokens, stopwords)
    }

    /// Variants of `self` scored against `other`; stops early on a perfect
    /// match and skips variants whose character-overlap bound cannot win.
    pub fn synonym_ratio(&self, other: &PreparedSentence, ctx: &ComparisonContext) -> Similarity {
        let variants = self.variants(ctx);
        let mut best = ratio_of(&variants[0], &other.chars);
        for v in &variants[1..] {
            if best == Similarity::ONE {
                break;
            }
            if ratio_upper_bound(v, other.counts(), other.chars.len()) <= best.value() {
                continue;
            }
            let s = ratio_of(v, &other.chars);
            if s > best {
                best = s;
            }
        }
        best
    }

    pub fn score(&self, other: &PreparedSentence, kind: ComparatorKind, ctx: &ComparisonContext) -> Similarity {
        match kind {
            ComparatorKind::TokenOverlap => self.token_overlap(other, &ctx.stopwords),
            ComparatorKind::MatchingBlocksRatio => self.ratio(other),
            ComparatorKind::SynonymRatio => self.synonym_ratio(other, ctx),
        }
    }
}

/// Chain evaluation with a caller-supplied scoring function.
pub fn evaluate_chain_with<F>(chain: &ComparatorChain, mut score: F) -> ChainDecision
where
    F: FnMut(&Comparator) -> Similarity,
{
    let mut best: Option<ChainDecision> = None;
    for (position, comparator) in chain.comparators().iter().enumerate() {
        let s = score(comparator);
        let decision = ChainDecision {
            accepted: s >= comparator.threshold,
            score: s,
            position,
            comparator: *comparator,
        };
        if decision.accepted {
            return decision;
        }
        if best.is_none_or(|b| s > b.score) {
            best = Some(decision);
        }
    }
    best.expect("chain is never empty")
}

pub fn evaluate_prepared(
    a: &PreparedSentence,
    b: &PreparedSentence,
    chain: &ComparatorChain,
    ctx: &ComparisonContext,
) -> ChainDecision {
    evaluate_chain_with(chain, |c| a.score(b, c.kind, ctx))
}

pub fn evaluate_chain(a: &Sentence, b: &Sentence, chain: &ComparatorChain, ctx: &ComparisonContext) -> ChainDecision {
    let pa = PreparedSentence::from_sentence(a);
    let pb = PreparedSentence::from_sentence(b);
    evaluate_prepared(&pa, &pb, chain, ctx)
}
