//! Shared helpers for integration tests: a seeded synthetic corpus
//! generator and a scripted local HTTP server.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sentalign::SynonymLexicon;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ten", "ra", "su", "vo", "ne", "pi", "dor", "fa", "gu", "shi", "bel", "mar", "tun", "ze",
    "qo", "lin", "wa", "hep", "jo", "cri", "yas",
];

pub fn word<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(1..=3);
    (0..n).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect()
}

/// A word encoding `n` in syllables, unique per `n`.
pub fn tag(mut n: usize) -> String {
    let mut s = String::from("x");
    loop {
        s.push_str(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
        if n == 0 {
            return s;
        }
    }
}

/// Sentence `index` of a synthetic corpus: random pseudo-words plus a tag
/// word that makes every sentence distinct.
pub fn sentence<R: Rng>(rng: &mut R, index: usize) -> String {
    let n = rng.random_range(4..=9);
    let mut words: Vec<String> = (0..n).map(|_| word(rng)).collect();
    let at = rng.random_range(0..=words.len());
    words.insert(at, tag(index));
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        let upper = first.to_uppercase();
        s.replace_range(..1, &upper);
    }
    s.push('.');
    s
}

pub fn corpus_lines<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    (0..n).map(|i| sentence(rng, i)).collect()
}

/// Shuffle inside consecutive blocks of `width` lines, so no line moves
/// further than `width - 1` positions.
pub fn shuffle_blocks<R: Rng, T>(rng: &mut R, items: &mut [T], width: usize) {
    for chunk in items.chunks_mut(width.max(1)) {
        chunk.shuffle(rng);
    }
}

/// Remove each line with probability `p`; returns kept lines and the
/// indices that were dropped.
pub fn drop_lines<R: Rng>(rng: &mut R, lines: &[String], p: f64) -> (Vec<String>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        if rng.random_bool(p) {
            dropped.push(i);
        } else {
            kept.push(l.clone());
        }
    }
    (kept, dropped)
}

/// Drop exactly `count` distinct lines chosen at random.
pub fn drop_exact<R: Rng>(rng: &mut R, lines: &[String], count: usize) -> (Vec<String>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..lines.len()).collect();
    idx.shuffle(rng);
    let mut dropped: Vec<usize> = idx[..count.min(lines.len())].to_vec();
    dropped.sort_unstable();
    let kept = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| dropped.binary_search(i).is_err())
        .map(|(_, l)| l.clone())
        .collect();
    (kept, dropped)
}

/// (headword, synonym) pairs: syllable `a` with a partner `b` gives the
/// headword `ab` and the synonym `bao`.
pub fn synonym_pairs() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (i, a) in SYLLABLES.iter().enumerate() {
        let b = SYLLABLES[(i * 7 + 5) % SYLLABLES.len()];
        if *a != b {
            out.push((format!("{a}{b}"), format!("{b}{a}o")));
        }
    }
    out
}

pub fn synonym_lexicon(lang: &str) -> SynonymLexicon {
    let mut lex = SynonymLexicon::new(lang);
    for (a, b) in synonym_pairs() {
        lex.insert(&a, [b.as_str()]);
        lex.insert(&b, [a.as_str()]);
    }
    lex
}

/// Sentence with some synonym-bearing words, so perturbation has material.
pub fn rich_sentence<R: Rng>(rng: &mut R, index: usize) -> String {
    let pairs = synonym_pairs();
    let mut words: Vec<String> = (0..rng.random_range(3..=6)).map(|_| word(rng)).collect();
    for _ in 0..rng.random_range(1..=3) {
        let (a, _) = &pairs[rng.random_range(0..pairs.len())];
        let at = rng.random_range(0..=words.len());
        words.insert(at, a.clone());
    }
    words.insert(rng.random_range(0..=words.len()), tag(index));
    words.join(" ") + "."
}

/// Replace lexicon headwords with their synonym with probability `p`.
pub fn perturb<R: Rng>(rng: &mut R, text: &str, p: f64) -> String {
    let pairs = synonym_pairs();
    text.split(' ')
        .map(|w| {
            let bare = w.trim_end_matches('.');
            match pairs.iter().find(|(a, _)| a == bare) {
                Some((_, b)) if rng.random_bool(p) => w.replace(bare, b),
                _ => w.to_owned(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canned behaviour for one HTTP request.
#[derive(Debug, Clone)]
pub enum Reply {
    /// 200 with the decoded `text` query parameter as the body.
    Echo,
    /// 200 with `{"data":{"translations":[{"text": <text>}]}}`.
    EchoJson,
    /// 200 with the text upper-cased, to tell translations apart.
    Upper,
    /// Bare status code with an empty body.
    Status(u16),
    /// Accept the request and never answer.
    Hang,
}

pub struct MockServer {
    pub port: u16,
    requests: Arc<AtomicUsize>,
    in_flight_max: Arc<AtomicUsize>,
}

impl MockServer {
    /// Serve replies from `script` in request order; the last entry repeats.
    pub fn start(script: Vec<Reply>) -> MockServer {
        assert!(!script.is_empty());
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let requests = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let in_flight_max = Arc::new(AtomicUsize::new(0));
        let script = Arc::new(script);
        {
            let requests = requests.clone();
            let in_flight_max = in_flight_max.clone();
            thread::spawn(move || {
                for stream in listener.incoming() {
                    let Ok(stream) = stream else { break };
                    let n = requests.fetch_add(1, Ordering::SeqCst);
                    let reply = script[n.min(script.len() - 1)].clone();
                    let in_flight = in_flight.clone();
                    let in_flight_max = in_flight_max.clone();
                    thread::spawn(move || {
                        let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                        in_flight_max.fetch_max(now, Ordering::SeqCst);
                        serve(stream, reply);
                        in_flight.fetch_sub(1, Ordering::SeqCst);
                    });
                }
            });
        }
        MockServer {
            port,
            requests,
            in_flight_max,
        }
    }

    pub fn url_template(&self) -> String {
        format!("http://127.0.0.1:{}/translate?q={{text}}&sl={{src}}&tl={{tgt}}", self.port)
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.in_flight_max.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, reply: Reply) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    loop {
        let mut header = String::new();
        match reader.read_line(&mut header) {
            Ok(0) | Err(_) => break,
            Ok(_) if header == "\r\n" || header == "\n" => break,
            Ok(_) => {}
        }
    }
    let text = query_param(&request_line, "q").unwrap_or_default();
    // a little latency so concurrent requests overlap
    thread::sleep(Duration::from_millis(20));
    let (status, body) = match reply {
        Reply::Echo => (200, text),
        Reply::EchoJson => (200, serde_json::json!({"data": {"translations": [{"text": text}]}}).to_string()),
        Reply::Upper => (200, text.to_uppercase()),
        Reply::Status(code) => (code, String::new()),
        Reply::Hang => {
            thread::sleep(Duration::from_secs(5));
            return;
        }
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: text/plain; charset=utf-8\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.flush();
}

fn query_param(request_line: &str, name: &str) -> Option<String> {
    let target = request_line.split_whitespace().nth(1)?;
    let query = target.split_once('?')?.1;
    query.split('&').find_map(|kv| {
        let (k, v) = kv.split_once('=')?;
        (k == name).then(|| percent_decode(v))
    })
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'%' if i + 2 < bytes.len() => {
                let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).unwrap_or("");
                match u8::from_str_radix(hex, 16) {
                    Ok(b) => {
                        out.push(b);
                        i += 3;
                        continue;
                    }
                    Err(_) => out.push(b'%'),
                }
            }
            b'+' => out.push(b' '),
            b => out.push(b),
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// A four-file alignment scenario: source text, its machine translation,
/// the (damaged) target corpus and the gold target text per source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub source: Vec<String>,
    pub trans: Vec<String>,
    pub target: Vec<String>,
    pub gold: Vec<String>,
}

pub const FIXTURE_FILES: [&str; 4] = ["source.txt", "trans.txt", "target.txt", "gold.txt"];

/// Toy "foreign language": every word spelled backwards.
pub fn foreign(text: &str) -> String {
    text.trim_end_matches('.')
        .split(' ')
        .map(|w| w.chars().rev().collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
        + "."
}

/// Gold lines with synonym noise in the translations, `drop` target lines
/// removed at random and the rest shuffled in blocks of `width`.
pub fn noisy_fixture(seed: u64, n: usize, drop: usize, width: usize) -> Fixture {
    let mut r = rng(seed);
    let gold: Vec<String> = (0..n).map(|i| rich_sentence(&mut r, i)).collect();
    let trans = gold.iter().map(|g| perturb(&mut r, g, 0.5)).collect();
    let source = gold.iter().map(|g| foreign(g)).collect();
    let (mut target, _) = drop_exact(&mut r, &gold, drop);
    shuffle_blocks(&mut r, &mut target, width);
    Fixture {
        source,
        trans,
        target,
        gold,
    }
}

/// Parameters of the shipped 1005-line fixture.
pub fn shipped_fixture() -> Fixture {
    noisy_fixture(1005, 1005, 20, 6)
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic_1005")
}

impl Fixture {
    pub fn files(&self) -> [&Vec<String>; 4] {
        [&self.source, &self.trans, &self.target, &self.gold]
    }

    pub fn write_to(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, lines) in FIXTURE_FILES.iter().zip(self.files()) {
            let mut text = lines.join("\n");
            text.push('\n');
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    pub fn read_from(dir: &std::path::Path) -> std::io::Result<Fixture> {
        let read = |name: &str| -> std::io::Result<Vec<String>> {
            Ok(std::fs::read_to_string(dir.join(name))?.lines().map(str::to_owned).collect())
        };
        Ok(Fixture {
            source: read(FIXTURE_FILES[0])?,
            trans: read(FIXTURE_FILES[1])?,
            target: read(FIXTURE_FILES[2])?,
            gold: read(FIXTURE_FILES[3])?,
        })
    }
}
