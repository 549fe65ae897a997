//! Intermediate translation of a source corpus into the target language.
//!
//! Providers are pluggable: [`FileProvider`] replays a user-supplied
//! translation file, [`HttpProvider`] calls a generic web endpoint. Every
//! result goes through a [`TranslationCache`], so a line is sent to a
//! provider at most once per language pair.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{load_corpus, Corpus, TextError};

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("provider {provider} does not support {pair}")]
    Unsupported { provider: String, pair: LangPair },
    #[error("translation file has {found} lines but the source corpus has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("line {index}: request timed out")]
    Timeout { index: usize },
    #[error("line {index}: endpoint answered with status {status}")]
    Status { index: usize, status: u16 },
    #[error("line {index}: malformed response: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("line {index}: transport error: {reason}")]
    Transport { index: usize, reason: String },
    #[error("line {index}: {message}")]
    Provider { index: usize, message: String },
    #[error("translation cache {path}: {source}")]
    Cache { path: String, source: io::Error },
    #[error(transparent)]
    Text(#[from] TextError),
}

impl TranslateError {
    /// Source line index the failure belongs to, if any.
    pub fn line_index(&self) -> Option<usize> {
        match self {
            TranslateError::Timeout { index }
            | TranslateError::Status { index, .. }
            | TranslateError::Malformed { index, .. }
            | TranslateError::Transport { index, .. }
            | TranslateError::Provider { index, .. } => Some(*index),
            _ => None,
        }
    }

    fn is_transient(&self) -> bool {
        match self {
            TranslateError::Timeout { .. } | TranslateError::Transport { .. } => true,
            TranslateError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LangPair {
    pub source: String,
    pub target: String,
}

impl LangPair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        LangPair {
            source: source.into(),
            target: target.into(),
        }
    }
}

impl std::fmt::Display for LangPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}", self.source, self.target)
    }
}

pub trait TranslationProvider: Sync {
    fn name(&self) -> &str;

    fn supports(&self, _pair: &LangPair) -> bool {
        true
    }

    /// Upper bound on simultaneous `translate` calls.
    fn max_concurrency(&self) -> usize {
        1
    }

    /// Translate source line `index` whose text is `line`.
    fn translate(&self, index: usize, line: &str, pair: &LangPair) -> Result<String, TranslateError>;
}

/// Pre-translated lines, one per source sentence.
#[derive(Debug, Clone)]
pub struct FileProvider {
    path: PathBuf,
    lines: Vec<String>,
}

impl FileProvider {
    /// Load `path` and check it has exactly one line per sentence of `source`.
    pub fn open(path: impl AsRef<Path>, source: &Corpus) -> Result<Self, TranslateError> {
        let path = path.as_ref();
        let corpus = load_corpus(path, "")?;
        Self::from_lines(path, corpus.iter().map(|s| s.raw().to_owned()).collect(), source)
    }

    pub fn from_lines(path: impl AsRef<Path>, lines: Vec<String>, source: &Corpus) -> Result<Self, TranslateError> {
        if lines.len() != source.len() {
            return Err(TranslateError::LengthMismatch {
                expected: source.len(),
                found: lines.len(),
            });
        }
        Ok(FileProvider {
            path: path.as_ref().to_owned(),
            lines,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl TranslationProvider for FileProvider {
    fn name(&self) -> &str {
        "file"
    }

    fn translate(&self, index: usize, _line: &str, _pair: &LangPair) -> Result<String, TranslateError> {
        self.lines.get(index).cloned().ok_or_else(|| TranslateError::Provider {
            index,
            message: format!("no line {index} in {}", self.path.display()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Request URL; `{text}`, `{src}` and `{tgt}` are replaced with the
    /// percent-encoded line and language tags.
    pub url_template: String,
    /// Dotted path to the translated string in a JSON response, e.g.
    /// `data.translations.0.text`. Empty means the body is the translation.
    pub response_path: String,
    pub max_concurrency: usize,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            url_template: String::new(),
            response_path: String::new(),
            max_concurrency: 4,
            timeout_ms: 10_000,
            retries: 3,
            backoff_ms: 250,
        }
    }
}

pub struct HttpProvider {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider { config, agent }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn request_url(&self, line: &str, pair: &LangPair) -> String {
        self.config
            .url_template
            .replace("{text}", &percent_encode(line))
            .replace("{src}", &percent_encode(&pair.source))
            .replace("{tgt}", &percent_encode(&pair.target))
    }

    fn attempt(&self, index: usize, url: &str) -> Result<String, TranslateError> {
        let mut response = match self.agent.get(url).call() {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(TranslateError::Timeout { index }),
            Err(ureq::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) => {
                return Err(TranslateError::Timeout { index })
            }
            Err(e) => {
                return Err(TranslateError::Transport {
                    index,
                    reason: e.to_string(),
                })
            }
        };
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TranslateError::Status { index, status });
        }
        let body = match response.body_mut().read_to_string() {
            Ok(b) => b,
            Err(ureq::Error::Timeout(_)) => return Err(TranslateError::Timeout { index }),
            Err(e) => {
                return Err(TranslateError::Malformed {
                    index,
                    reason: e.to_string(),
                })
            }
        };
        extract_translation(&body, &self.config.response_path)
            .map_err(|reason| TranslateError::Malformed { index, reason })
    }

    /// One line through the endpoint, retrying transient failures with
    /// exponential backoff.
    pub fn http_translate(&self, index: usize, line: &str, pair: &LangPair) -> Result<String, TranslateError> {
        let url = self.request_url(line, pair);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(index, &url) {
                Err(e) if e.is_transient() && attempt < self.config.retries => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

impl TranslationProvider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn max_concurrency(&self) -> usize {
        self.config.max_concurrency.max(1)
    }

    fn translate(&self, index: usize, line: &str, pair: &LangPair) -> Result<String, TranslateError> {
        self.http_translate(index, line, pair)
    }
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b as char);
        } else {
            let _ = write!(out, "%{b:02X}");
        }
    }
    out
}

fn extract_translation(body: &str, path: &str) -> Result<String, String> {
    let text = if path.is_empty() {
        body.to_owned()
    } else {
        let value: serde_json::Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
        let mut cur = &value;
        for seg in path.split('.') {
            cur = match cur {
                serde_json::Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
                serde_json::Value::Object(map) => map.get(seg),
                _ => None,
            }
            .ok_or_else(|| format!("no field {seg:?} on path {path:?}"))?;
        }
        cur.as_str()
            .ok_or_else(|| format!("field {path:?} is not a string"))?
            .to_owned()
    };
    let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if text.is_empty() {
        return Err("empty translation".into());
    }
    Ok(text)
}

/// Source line to translation, per language pair. Persisted as one
/// `source<TAB>translation` file per pair inside a directory.
#[derive(Debug, Default)]
pub struct TranslationCache {
    dir: Option<PathBuf>,
    entries: RwLock<HashMap<LangPair, HashMap<String, String>>>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        TranslationCache::default()
    }

    /// Open (or create) a cache directory and load any existing pair files.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, TranslateError> {
        let dir = dir.as_ref().to_owned();
        let cache_err = |source| TranslateError::Cache {
            path: dir.display().to_string(),
            source,
        };
        std::fs::create_dir_all(&dir).map_err(cache_err)?;
        let mut entries = HashMap::new();
        for entry in std::fs::read_dir(&dir).map_err(cache_err)? {
            let path = entry.map_err(cache_err)?.path();
            let Some(pair) = pair_from_file_name(&path) else {
                continue;
            };
            entries.insert(pair, read_tsv(&path)?);
        }
        Ok(TranslationCache {
            dir: Some(dir),
            entries: RwLock::new(entries),
        })
    }

    pub fn get(&self, pair: &LangPair, source: &str) -> Option<String> {
        self.entries.read().unwrap().get(pair)?.get(source).cloned()
    }

    pub fn insert(&self, pair: &LangPair, source: &str, translation: &str) {
        self.entries
            .write()
            .unwrap()
            .entry(pair.clone())
            .or_default()
            .insert(source.to_owned(), translation.to_owned());
    }

    pub fn len(&self, pair: &LangPair) -> usize {
        self.entries.read().unwrap().get(pair).map_or(0, HashMap::len)
    }

    /// Write every pair back to the cache directory; no-op for in-memory caches.
    pub fn save(&self) -> Result<(), TranslateError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let entries = self.entries.read().unwrap();
        for (pair, map) in entries.iter() {
            let path = dir.join(format!("{}_{}.tsv", pair.source, pair.target));
            let cache_err = |source| TranslateError::Cache {
                path: path.display().to_string(),
                source,
            };
            let mut rows: Vec<_> = map.iter().collect();
            rows.sort();
            let mut out = BufWriter::new(std::fs::File::create(&path).map_err(cache_err)?);
            for (src, tr) in rows {
                writeln!(out, "{}\t{}", escape(src), escape(tr)).map_err(cache_err)?;
            }
            out.flush().map_err(cache_err)?;
        }
        Ok(())
    }
}

fn pair_from_file_name(path: &Path) -> Option<LangPair> {
    if path.extension()? != "tsv" {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    let (src, tgt) = stem.split_once('_')?;
    Some(LangPair::new(src, tgt))
}

fn read_tsv(path: &Path) -> Result<HashMap<String, String>, TranslateError> {
    let cache_err = |source| TranslateError::Cache {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(cache_err)?;
    let mut map = HashMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(cache_err)?;
        if let Some((src, tr)) = line.split_once('\t') {
            map.insert(unescape(src), unescape(tr));
        }
    }
    Ok(map)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TranslateStats {
    pub lines: usize,
    pub provider_calls: usize,
    pub cache_hits: usize,
}

/// Translate every sentence of `corpus` into `target_language`.
///
/// Distinct uncached lines are fanned out to at most
/// `provider.max_concurrency()` workers. On failure nothing is returned
/// except the error for the lowest failing line index.
pub fn translate_corpus(
    corpus: &Corpus,
    target_language: &str,
    provider: &dyn TranslationProvider,
    cache: &TranslationCache,
) -> Result<(Corpus, TranslateStats), TranslateError> {
    let pair = LangPair::new(corpus.language(), target_language);
    if !provider.supports(&pair) {
        return Err(TranslateError::Unsupported {
            provider: provider.name().to_owned(),
            pair,
        });
    }

    let mut stats = TranslateStats {
        lines: corpus.len(),
        ..TranslateStats::default()
    };
    // first index of every distinct line missing from the cache
    let mut pending: Vec<usize> = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for s in corpus {
        if cache.get(&pair, s.raw()).is_some() {
            stats.cache_hits += 1;
        } else if seen.insert(s.raw()) {
            pending.push(s.index());
        }
    }

    if !pending.is_empty() {
        let workers = provider.max_concurrency().max(1).min(pending.len());
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let errors: Mutex<Vec<TranslateError>> = Mutex::new(Vec::new());
        let calls = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&index) = pending.get(k) else {
                        break;
                    };
                    let line = corpus[index].raw();
                    calls.fetch_add(1, Ordering::Relaxed);
                    match provider.translate(index, line, &pair) {
                        Ok(t) => cache.insert(&pair, line, &t),
                        Err(e) => {
                            failed.store(true, Ordering::Relaxed);
                            errors.lock().unwrap().push(e);
                        }
                    }
                });
            }
        });
        stats.provider_calls = calls.into_inner();
        let mut errors = errors.into_inner().unwrap();
        if !errors.is_empty() {
            errors.sort_by_key(|e| e.line_index().unwrap_or(usize::MAX));
            return Err(errors.swap_remove(0));
        }
    }

    let texts: Vec<String> = corpus
        .iter()
        .map(|s| cache.get(&pair, s.raw()).expect("every line translated or cached"))
        .collect();
    let out = Corpus::from_texts(target_language, texts.into_iter().map(|t| t.replace(['\r', '\n'], " ")))?;
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Upper {
        calls: AtomicUsize,
        fail_on: Option<usize>,
    }

    impl Upper {
        fn new() -> Self {
            Upper {
                calls: AtomicUsize::new(0),
                fail_on: None,
            }
        }
    }

    impl TranslationProvider for Upper {
        fn name(&self) -> &str {
            "upper"
        }

        fn translate(&self, index: usize, line: &str, _pair: &LangPair) -> Result<String, TranslateError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_on == Some(index) {
                return Err(TranslateError::Provider {
                    index,
                    message: "boom".into(),
                });
            }
            Ok(line.to_uppercase())
        }
    }

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::from_lines("pl", lines.iter().copied()).unwrap()
    }

    #[test]
    fn file_provider_passes_lines_through() {
        let src = corpus(&["a", "b", "c"]);
        let fp = FileProvider::from_lines("t.txt", vec!["x".into(), "y".into(), "z".into()], &src).unwrap();
        let (out, stats) = translate_corpus(&src, "en", &fp, &TranslationCache::in_memory()).unwrap();
        let texts: Vec<_> = out.iter().map(|s| s.raw()).collect();
        assert_eq!(texts, ["x", "y", "z"]);
        assert_eq!(out.language(), "en");
        assert_eq!(stats.provider_calls, 3);
    }

    #[test]
    fn file_provider_length_mismatch() {
        let src = corpus(&["a", "b", "c"]);
        let err = FileProvider::from_lines("t.txt", vec!["x".into(), "y".into()], &src).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('3'), "{msg}");
    }

    #[test]
    fn repeated_line_is_translated_once() {
        let src = corpus(&["dzień dobry", "tak", "dzień dobry"]);
        let p = Upper::new();
        let (out, stats) = translate_corpus(&src, "en", &p, &TranslationCache::in_memory()).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 2);
        assert_eq!(stats.provider_calls, 2);
        assert_eq!(out[0].raw(), out[2].raw());
        assert_eq!(out[0].raw(), "DZIEŃ DOBRY");
    }

    #[test]
    fn warm_cache_makes_no_calls() {
        let src = corpus(&["a", "b"]);
        let cache = TranslationCache::in_memory();
        translate_corpus(&src, "en", &Upper::new(), &cache).unwrap();
        let p = Upper::new();
        let (_, stats) = translate_corpus(&src, "en", &p, &cache).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 0);
        assert_eq!(stats.cache_hits, 2);
    }

    #[test]
    fn failure_aborts_with_line_index() {
        let src = corpus(&["a", "b", "c"]);
        let p = Upper {
            fail_on: Some(1),
            ..Upper::new()
        };
        let err = translate_corpus(&src, "en", &p, &TranslationCache::in_memory()).unwrap_err();
        assert_eq!(err.line_index(), Some(1));
    }

    #[test]
    fn cache_persists_per_pair() {
        let dir = tempfile::tempdir().unwrap();
        let pair = LangPair::new("pl", "en");
        {
            let cache = TranslationCache::open(dir.path()).unwrap();
            cache.insert(&pair, "tab\there", "with \\ backslash");
            cache.insert(&LangPair::new("de", "en"), "hallo", "hello");
            cache.save().unwrap();
        }
        assert!(dir.path().join("pl_en.tsv").exists());
        let cache = TranslationCache::open(dir.path()).unwrap();
        assert_eq!(cache.get(&pair, "tab\there").as_deref(), Some("with \\ backslash"));
        assert_eq!(cache.get(&LangPair::new("de", "en"), "hallo").as_deref(), Some("hello"));
        assert_eq!(cache.get(&LangPair::new("de", "fr"), "hallo"), None);
    }

    #[test]
    fn response_path_extraction() {
        assert_eq!(extract_translation("plain text\n", "").unwrap(), "plain text");
        let body = r#"{"data":{"translations":[{"text":"hello"}]}}"#;
        assert_eq!(extract_translation(body, "data.translations.0.text").unwrap(), "hello");
        assert!(extract_translation(body, "data.missing").is_err());
        assert!(extract_translation("not json", "a").is_err());
        assert!(extract_translation(r#"{"a":1}"#, "a").is_err());
        assert!(extract_translation("   ", "").is_err());
    }

    #[test]
    fn url_template_encoding() {
        let p = HttpProvider::new(HttpConfig {
            url_template: "http://h/t?q={text}&sl={src}&tl={tgt}".into(),
            ..HttpConfig::default()
        });
        assert_eq!(
            p.request_url("zażółć gęś & co", &LangPair::new("pl", "en")),
            "http://h/t?q=za%C5%BC%C3%B3%C5%82%C4%87%20g%C4%99%C5%9B%20%26%20co&sl=pl&tl=en"
        );
    }
}
