//! Stop-word lists, synonym lexica and synonym-substituted sentence variants.
//!
//! File formats:
//!
//! * stop words: one word per line, lines starting with `#` are comments;
//! * synonyms: `headword<TAB>syn1,syn2,...` per line, `#` comments and blank
//!   lines allowed. The relation is used as stored; write both directions if
//!   you want it symmetric.

use std::collections::{HashMap, HashSet};
use std::io;
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

use crate::text::{normalize, token_spans, TokenizedSentence};

pub const DEFAULT_VARIANT_CAP: usize = 64;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWordList {
    words: HashSet<String>,
    language: String,
}

impl StopWordList {
    pub fn new<S: AsRef<str>>(language: impl Into<String>, words: impl IntoIterator<Item = S>) -> Self {
        StopWordList {
            words: words
                .into_iter()
                .map(|w| normalize(w.as_ref()))
                .filter(|w| !w.is_empty())
                .collect(),
            language: language.into(),
        }
    }

    pub fn parse(text: &str, language: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        Self::new(language, words)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn language(&self) -> &str {
        &self.language
    }
}

pub fn load_stopwords(path: impl AsRef<Path>, language: &str) -> Result<StopWordList, LexiconError> {
    let text = read(path.as_ref())?;
    Ok(StopWordList::parse(&text, language))
}

/// Word to synonym-set mapping. Synonym order follows first appearance in
/// the source file, which fixes the order of generated variants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: HashMap<String, Vec<String>>,
    language: String,
}

impl SynonymLexicon {
    pub fn new(language: impl Into<String>) -> Self {
        SynonymLexicon {
            entries: HashMap::new(),
            language: language.into(),
        }
    }

    /// Add synonyms for `word`, skipping self references and duplicates.
    pub fn insert<S: AsRef<str>>(&mut self, word: &str, synonyms: impl IntoIterator<Item = S>) {
        let head = normalize(word);
        let set = self.entries.entry(head.clone()).or_default();
        for syn in synonyms {
            let syn = normalize(syn.as_ref());
            if syn.is_empty() || syn == head || set.contains(&syn) {
                continue;
            }
            set.push(syn);
        }
    }

    pub fn parse(text: &str, language: &str) -> Result<Self, LexiconError> {
        let mut lex = SynonymLexicon::new(language);
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (head, rest) = line.split_once('\t').ok_or_else(|| LexiconError::Malformed {
                line: lineno,
                reason: "expected headword<TAB>synonyms".into(),
            })?;
            let head = normalize(head);
            if head.is_empty() || head.contains(' ') {
                return Err(LexiconError::Malformed {
                    line: lineno,
                    reason: format!("headword {head:?} must be a single word"),
                });
            }
            let syns: Vec<String> = rest
                .split(',')
                .map(normalize)
                .filter(|s| !s.is_empty())
                .collect();
            if let Some(multi) = syns.iter().find(|s| s.contains(' ')) {
                return Err(LexiconError::Malformed {
                    line: lineno,
                    reason: format!("multi-word synonym {multi:?} is not supported"),
                });
            }
            lex.insert(&head, syns);
        }
        Ok(lex)
    }

    /// Synonyms of `word`; empty when the word is unknown.
    pub fn synonyms(&self, word: &str) -> &[String] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(Vec::is_empty)
    }

    pub fn language(&self) -> &str {
        &self.language
    }
}

pub fn load_synonyms(path: impl AsRef<Path>, language: &str) -> Result<SynonymLexicon, LexiconError> {
    let text = read(path.as_ref())?;
    SynonymLexicon::parse(&text, language)
}

fn read(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Single-token substitutions `(position, synonym)` in variant order: by
/// position, then by lexicon order.
fn substitutions<'a, S: AsRef<str> + 'a>(
    tokens: &'a [S],
    lexicon: &'a SynonymLexicon,
) -> impl Iterator<Item = (usize, &'a str)> + 'a {
    tokens.iter().enumerate().flat_map(move |(pos, tok)| {
        lexicon
            .synonyms(tok.as_ref())
            .iter()
            .map(move |syn| (pos, syn.as_str()))
    })
}

/// The original sentence followed by every single-synonym substitution,
/// truncated to `cap` entries.
pub fn expand_sentence(
    sentence: &TokenizedSentence,
    lexicon: &SynonymLexicon,
    cap: usize,
) -> Vec<TokenizedSentence> {
    assert!(cap >= 1, "variant cap must be at least 1");
    let mut out = Vec::with_capacity(cap.min(16));
    out.push(sentence.clone());
    for (pos, syn) in substitutions(&sentence.tokens, lexicon).take(cap - 1) {
        let mut variant = sentence.clone();
        variant.tokens[pos] = syn.to_owned();
        out.push(variant);
    }
    out
}

/// Text-level counterpart of [`expand_sentence`]: substitutes synonyms in
/// place inside an already normalized string, so punctuation and spacing
/// survive. Element 0 is `normalized` itself; the order matches
/// `expand_sentence` on the tokenized form.
pub fn expand_text(normalized: &str, lexicon: &SynonymLexicon, cap: usize) -> Vec<String> {
    assert!(cap >= 1, "variant cap must be at least 1");
    let spans: Vec<Range<usize>> = token_spans(normalized);
    let tokens: Vec<&str> = spans.iter().map(|r| &normalized[r.clone()]).collect();
    let mut out = Vec::with_capacity(cap.min(16));
    out.push(normalized.to_owned());
    for (pos, syn) in substitutions(&tokens, lexicon).take(cap - 1) {
        let span = &spans[pos];
        let mut v = String::with_capacity(normalized.len() + syn.len());
        v.push_str(&normalized[..span.start]);
        v.push_str(syn);
        v.push_str(&normalized[span.end..]);
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(words: &[&str]) -> TokenizedSentence {
        TokenizedSentence::new(0, words.iter().copied())
    }

    fn game_lexicon() -> SynonymLexicon {
        SynonymLexicon::parse("game\tplay,sport,fun,gaming,action,skittle\n", "en").unwrap()
    }

    #[test]
    fn stopwords_load() {
        let s = StopWordList::parse("the\nto\nis", "en");
        assert_eq!(s.len(), 3);
        assert!(s.contains("the") && s.contains("to") && s.contains("is"));
    }

    #[test]
    fn stopwords_dedupe() {
        let s = StopWordList::parse("to\nto", "en");
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn stopwords_skip_comments() {
        let s = StopWordList::parse("# header\na", "en");
        assert_eq!(s.len(), 1);
        assert!(s.contains("a"));
        assert!(!s.contains("# header"));
    }

    #[test]
    fn stopwords_are_normalized() {
        let s = StopWordList::parse("  The \nTO", "en");
        assert!(s.contains("the") && s.contains("to"));
    }

    #[test]
    fn synonyms_game_line() {
        let lex = game_lexicon();
        assert_eq!(
            lex.synonyms("game"),
            ["play", "sport", "fun", "gaming", "action", "skittle"]
        );
    }

    #[test]
    fn synonyms_will_would() {
        let lex = SynonymLexicon::parse("will\twould", "en").unwrap();
        assert_eq!(lex.synonyms("will"), ["would"]);
        // stored direction only
        assert!(lex.synonyms("would").is_empty());
    }

    #[test]
    fn self_reference_is_stripped() {
        let lex = SynonymLexicon::parse("x\tx", "en").unwrap();
        assert!(lex.synonyms("x").is_empty());
    }

    #[test]
    fn unknown_word_has_no_synonyms() {
        assert!(game_lexicon().synonyms("zebra").is_empty());
    }

    #[test]
    fn missing_tab_reports_line() {
        let err = SynonymLexicon::parse("# c\na\tb\nbroken line\n", "en").unwrap_err();
        match err {
            LexiconError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unreadable_synonym_file() {
        assert!(matches!(
            load_synonyms("/no/such/file.tsv", "en"),
            Err(LexiconError::Read { .. })
        ));
    }

    #[test]
    fn expand_game_sentence() {
        let s = ts(&["i", "do", "not", "like", "game"]);
        let v = expand_sentence(&s, &game_lexicon(), 100);
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], s);
        assert_eq!(v[1].tokens, ["i", "do", "not", "like", "play"]);
        assert_eq!(v[6].tokens, ["i", "do", "not", "like", "skittle"]);
    }

    #[test]
    fn expand_with_empty_lexicon() {
        let s = ts(&["a", "b"]);
        assert_eq!(expand_sentence(&s, &SynonymLexicon::new("en"), 64), vec![s]);
    }

    #[test]
    fn expand_respects_cap_and_keeps_original() {
        let lex = SynonymLexicon::parse("a\tx\nb\ty", "en").unwrap();
        let s = ts(&["a", "b"]);
        let v = expand_sentence(&s, &lex, 2);
        assert_eq!(v, vec![s, ts(&["x", "b"])]);
    }

    #[test]
    fn expand_text_keeps_punctuation() {
        let lex = SynonymLexicon::parse("will\twould", "en").unwrap();
        let v = expand_text("i will call you tomorrow.", &lex, 8);
        assert_eq!(v, ["i will call you tomorrow.", "i would call you tomorrow."]);
    }

    fn arb_lexicon() -> impl Strategy<Value = SynonymLexicon> {
        proptest::collection::vec(("[a-d]", proptest::collection::vec("[a-f]", 0..4)), 0..5).prop_map(
            |entries| {
                let mut lex = SynonymLexicon::new("xx");
                for (head, syns) in entries {
                    lex.insert(&head, syns);
                }
                lex
            },
        )
    }

    proptest! {
        #[test]
        fn expansion_shape(words in proptest::collection::vec("[a-f]", 0..6), lex in arb_lexicon(), cap in 1usize..20) {
            let s = TokenizedSentence::new(3, words);
            let v = expand_sentence(&s, &lex, cap);
            prop_assert!(!v.is_empty() && v.len() <= cap);
            prop_assert_eq!(&v[0], &s);
            for variant in &v[1..] {
                let diffs = variant.tokens.iter().zip(&s.tokens).filter(|(a, b)| a != b).count();
                prop_assert_eq!(diffs, 1);
                prop_assert_eq!(variant.len(), s.len());
            }
            prop_assert_eq!(expand_sentence(&s, &lex, cap), v.clone());
            let text: Vec<String> = expand_text(&s.joined(), &lex, cap);
            let joined: Vec<String> = v.iter().map(TokenizedSentence::joined).collect();
            prop_assert_eq!(text, joined);
        }
    }
}
