//! Sentence alignment for parallel corpora.
//!
//! Source lines are machine translated into the target language, each
//! translation is compared with nearby target lines through a chain of
//! increasingly expensive similarity comparators, and contested candidates
//! are resolved by looking ahead at the following translations. Source lines
//! without an acceptable match keep their machine translation, so no line is
//! ever dropped.
//!
//! The crate also scores alignments against a gold reference and ships
//! BLEU, TER and CER scorers plus a threshold tuner.

pub mod aligner;
pub mod exec;
pub mod lexicon;
pub mod metrics;
pub mod similarity;
pub mod text;
pub mod translator;
pub mod tuner;

pub use exec::Execution;
pub use lexicon::{expand_sentence, load_stopwords, load_synonyms, StopWordList, SynonymLexicon};
pub use similarity::{
    evaluate_chain, matching_blocks, ratio, synonym_ratio, token_overlap, ChainDecision, Comparator,
    ComparatorChain, ComparatorKind, ComparisonContext, MatchingBlock, Similarity,
};
pub use text::{load_corpus, normalize, save_corpus, tokenize, Corpus, Sentence, TokenizedSentence};
pub use translator::{
    translate_corpus, FileProvider, HttpConfig, HttpProvider, LangPair, TranslateError, TranslationCache,
    TranslationProvider,
};
pub use aligner::{align, write_alignment, AlignmentConfig, AlignmentDecision, AlignmentResult, Outcome};
pub use metrics::{
    alignment_score, bleu, brevity_penalty, cer, edit_distance, evaluate_against_gold, evaluate_corpus, ter,
    BleuOptions, BpForm, CorpusEvaluation, MetricsError, ScoreCard, SufficientStats,
};
pub use tuner::{binary_search_threshold, tune_chain, tune_threshold, TuneError, TuningJob, TuningReport};
