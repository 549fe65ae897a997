//! Sentences, corpora, normalization and tokenization.
//!
//! A corpus file holds one sentence per line. Lines that are empty (or only
//! whitespace) are not sentences; they are skipped and reported so callers can
//! tell the user where the gaps were.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("invalid UTF-8 on line {line}")]
    InvalidUtf8 { line: usize },
    #[error("sentence text contains a line break")]
    LineBreak,
}

/// Lowercase, NFC-compose and collapse whitespace.
pub fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().flat_map(char::to_lowercase).collect();
    // lowercasing can produce decomposed sequences, so compose again
    let composed: String = lowered.nfc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// Byte ranges of the tokens of `text`: maximal runs of letters, digits and
/// apostrophes.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (pos, c) in text.char_indices() {
        match (is_token_char(c), start) {
            (true, None) => start = Some(pos),
            (false, Some(s)) => {
                spans.push(s..pos);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

/// One line of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    index: usize,
    raw: String,
    normalized: String,
}

impl Sentence {
    pub fn new(index: usize, raw: impl Into<String>) -> Result<Self, TextError> {
        let raw = raw.into();
        if raw.contains(['\n', '\r']) {
            return Err(TextError::LineBreak);
        }
        let normalized = normalize(&raw);
        Ok(Sentence {
            index,
            raw,
            normalized,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }

    pub fn tokenize(&self) -> TokenizedSentence {
        tokenize(self)
    }
}

/// Word tokens of a normalized sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenizedSentence {
    pub tokens: Vec<String>,
    pub source_index: usize,
}

impl TokenizedSentence {
    pub fn new<S: Into<String>>(source_index: usize, tokens: impl IntoIterator<Item = S>) -> Self {
        TokenizedSentence {
            tokens: tokens.into_iter().map(Into::into).collect(),
            source_index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

pub fn tokenize(sentence: &Sentence) -> TokenizedSentence {
    let text = sentence.normalized();
    TokenizedSentence {
        tokens: token_spans(text)
            .into_iter()
            .map(|r| text[r].to_owned())
            .collect(),
        source_index: sentence.index(),
    }
}

/// Tokenize arbitrary text after normalizing it.
pub fn tokenize_text(text: &str) -> Vec<String> {
    let norm = normalize(text);
    token_spans(&norm)
        .into_iter()
        .map(|r| norm[r].to_owned())
        .collect()
}

/// An ordered, language-tagged list of sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    language: String,
    sentences: Vec<Sentence>,
    skipped_lines: Vec<usize>,
}

impl Corpus {
    /// Build a corpus from in-memory lines, skipping blank ones just like
    /// [`load_corpus`] does.
    pub fn from_lines<S: AsRef<str>>(
        language: impl Into<String>,
        lines: impl IntoIterator<Item = S>,
    ) -> Result<Self, TextError> {
        let mut corpus = Corpus {
            language: language.into(),
            ..Corpus::default()
        };
        for (lineno, line) in lines.into_iter().enumerate() {
            corpus.push_line(lineno + 1, line.as_ref())?;
        }
        Ok(corpus)
    }

    /// Build a corpus with one sentence per text, blank ones included.
    pub fn from_texts<S: Into<String>>(
        language: impl Into<String>,
        texts: impl IntoIterator<Item = S>,
    ) -> Result<Self, TextError> {
        let sentences = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Corpus {
            language: language.into(),
            sentences,
            skipped_lines: Vec::new(),
        })
    }

    fn push_line(&mut self, lineno: usize, line: &str) -> Result<(), TextError> {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            self.skipped_lines.push(lineno);
            return Ok(());
        }
        let sentence = Sentence::new(self.sentences.len(), line)?;
        self.sentences.push(sentence);
        Ok(())
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn get(&self, index: usize) -> Option<&Sentence> {
        self.sentences.get(index)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// 1-based line numbers of blank input lines that were not loaded.
    pub fn skipped_lines(&self) -> &[usize] {
        &self.skipped_lines
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sentence> {
        self.sentences.iter()
    }

    /// Serialize as LF-terminated lines of raw text.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for s in &self.sentences {
            out.write_all(s.raw.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

impl std::ops::Index<usize> for Corpus {
    type Output = Sentence;

    fn index(&self, index: usize) -> &Sentence {
        &self.sentences[index]
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Sentence;
    type IntoIter = std::slice::Iter<'a, Sentence>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}

/// Read a corpus from any byte stream. LF and CRLF line endings are accepted.
pub fn read_corpus<R: Read>(mut reader: R, language: &str) -> Result<Corpus, TextError> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|source| TextError::Read {
            path: "<stream>".into(),
            source,
        })?;
    parse_corpus(&bytes, language)
}

fn parse_corpus(bytes: &[u8], language: &str) -> Result<Corpus, TextError> {
    let mut corpus = Corpus {
        language: language.to_owned(),
        ..Corpus::default()
    };
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    if body.is_empty() && bytes.len() <= 1 {
        if bytes.len() == 1 {
            corpus.skipped_lines.push(1);
        }
        return Ok(corpus);
    }
    for (i, line) in body.split(|&b| b == b'\n').enumerate() {
        let text = std::str::from_utf8(line).map_err(|_| TextError::InvalidUtf8 { line: i + 1 })?;
        corpus.push_line(i + 1, text)?;
    }
    Ok(corpus)
}

pub fn load_corpus(path: impl AsRef<Path>, language: &str) -> Result<Corpus, TextError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| TextError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&bytes, language)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), TextError> {
    let path = path.as_ref();
    let err = |source| TextError::Write {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(err)?;
    corpus.write_to(BufWriter::new(file)).map_err(err)
}

/// Read every line of a file verbatim, keeping blank lines. Used where line
/// positions must stay aligned with another file (hypothesis/reference pairs,
/// gold references).
pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>, TextError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| TextError::Read {
        path: path.display().to_string(),
        source,
    })?;
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line.strip_suffix(b"\r").unwrap_or(line);
            std::str::from_utf8(line)
                .map(str::to_owned)
                .map_err(|_| TextError::InvalidUtf8 { line: i + 1 })
        })
        .collect()
}
