//! Subcommand implementations.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;

use sentalign::aligner::{read_report, ReportTrailer};
use sentalign::metrics::BleuOptions;
use sentalign::text::read_lines;
use sentalign::tuner::{tune_chain, TuningJob, DEFAULT_RESOLUTION};
use sentalign::{
    align, evaluate_against_gold, evaluate_corpus, load_corpus, save_corpus, translate_corpus, write_alignment,
    Corpus, FileProvider, HttpProvider, TranslateError, TranslationCache, TranslationProvider,
};

use crate::config::{ProviderKind, RunConfig};

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_PROVIDER: u8 = 3;

/// Recommended development-set size range for tuning.
pub const DEV_SIZE_RANGE: std::ops::RangeInclusive<usize> = 1_000..=10_000;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn or_exit(self, code: u8) -> CmdResult<T>;

    fn config_err(self) -> CmdResult<T>
    where
        Self: Sized,
    {
        self.or_exit(EXIT_CONFIG)
    }

    fn data_err(self) -> CmdResult<T>
    where
        Self: Sized,
    {
        self.or_exit(EXIT_DATA)
    }
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> CmdResult<T> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn fail<T>(code: u8, msg: impl Display) -> CmdResult<T> {
    Err(Failure {
        code,
        error: anyhow!("{msg}"),
    })
}

fn translate_failure(e: TranslateError) -> Failure {
    let code = match e {
        TranslateError::Text(_) | TranslateError::LengthMismatch { .. } | TranslateError::Cache { .. } => EXIT_DATA,
        _ => EXIT_PROVIDER,
    };
    Failure { code, error: e.into() }
}

/// An input path that must name an existing file.
fn input<'a>(path: &'a Option<PathBuf>, flag: &str) -> CmdResult<&'a Path> {
    match path {
        None => fail(EXIT_CONFIG, format!("missing --{flag}")),
        Some(p) if !p.is_file() => fail(EXIT_CONFIG, format!("{flag} file {} does not exist", p.display())),
        Some(p) => Ok(p),
    }
}

fn print_json<T: Serialize>(value: &T) -> CmdResult<()> {
    let text = serde_json::to_string(value).data_err()?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").data_err()
}

fn warn(msg: impl Display) {
    eprintln!("warning: {msg}");
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn provider_for(cfg: &RunConfig, source: &Corpus) -> CmdResult<Box<dyn TranslationProvider>> {
    let kind = match cfg.provider {
        Some(kind) => kind,
        None if cfg.provider_file.is_some() => ProviderKind::File,
        None if cfg.http.is_some() => ProviderKind::Http,
        None => return fail(EXIT_CONFIG, "no translation provider configured (use --provider)"),
    };
    Ok(match kind {
        ProviderKind::File => {
            let path = input(&cfg.provider_file, "provider-file")?;
            Box::new(FileProvider::open(path, source).map_err(translate_failure)?)
        }
        ProviderKind::Http => {
            let http = cfg.http.clone().ok_or_else(|| Failure {
                code: EXIT_CONFIG,
                error: anyhow!("the http provider needs an \"http\" config section"),
            })?;
            Box::new(HttpProvider::new(http))
        }
    })
}

fn translate_with_provider(cfg: &RunConfig, source: &Corpus, stats: bool) -> CmdResult<Corpus> {
    let provider = provider_for(cfg, source)?;
    let cache = match &cfg.cache_dir {
        Some(dir) => TranslationCache::open(dir).map_err(translate_failure)?,
        None => TranslationCache::in_memory(),
    };
    let (trans, st) = translate_corpus(source, cfg.target_lang(), provider.as_ref(), &cache).map_err(translate_failure)?;
    cache.save().map_err(translate_failure)?;
    if stats {
        print_json(&st)?;
    }
    Ok(trans)
}

/// The translation corpus: `--trans` when given, otherwise produced by the
/// configured provider.
fn load_or_translate(cfg: &RunConfig, source: &Corpus) -> CmdResult<Corpus> {
    match &cfg.trans {
        Some(_) => {
            let path = input(&cfg.trans, "trans")?;
            load_corpus(path, cfg.target_lang()).data_err()
        }
        None => translate_with_provider(cfg, source, false),
    }
}

pub fn translate(cfg: &RunConfig, stats: bool) -> CmdResult<()> {
    let source_path = input(&cfg.source, "source")?;
    let Some(out) = &cfg.trans else {
        return fail(EXIT_CONFIG, "missing --trans (output path)");
    };
    let source = load_corpus(source_path, cfg.source_lang()).data_err()?;
    let trans = translate_with_provider(cfg, &source, stats)?;
    save_corpus(&trans, out).data_err()
}

pub fn align_cmd(cfg: &RunConfig) -> CmdResult<()> {
    let source_path = input(&cfg.source, "source")?;
    let target_path = input(&cfg.target, "target")?;
    let config = cfg.alignment_config().config_err()?;
    let source = load_corpus(source_path, cfg.source_lang()).data_err()?;
    let target = load_corpus(target_path, cfg.target_lang()).data_err()?;
    let trans = load_or_translate(cfg, &source)?;
    let result = align(&source, &target, &trans, &config).data_err()?;
    let out_source = cfg.out_source.clone().unwrap_or_else(|| with_suffix(source_path, ".aligned"));
    let out_target = cfg.out_target.clone().unwrap_or_else(|| with_suffix(target_path, ".aligned"));
    let report = cfg.report.clone().unwrap_or_else(|| with_suffix(source_path, ".report.jsonl"));
    write_alignment(&result, &out_source, &out_target, &report).data_err()?;
    print_json(&ReportTrailer {
        counts: result.counts,
        unmatched_targets: result.unmatched_targets,
    })
}

pub fn score(cfg: &RunConfig) -> CmdResult<()> {
    let report_path = input(&cfg.report, "report")?;
    let gold_path = input(&cfg.gold, "gold")?;
    let text = std::fs::read_to_string(report_path)
        .with_context(|| format!("cannot read {}", report_path.display()))
        .data_err()?;
    let (decisions, _) = read_report(&text)
        .map_err(|e| anyhow!("{}: {e}", report_path.display()))
        .data_err()?;
    let gold = load_corpus(gold_path, cfg.target_lang()).data_err()?;
    if gold.len() != decisions.len() {
        return fail(
            EXIT_DATA,
            format!("gold has {} lines but the report has {} decisions", gold.len(), decisions.len()),
        );
    }
    let gold: Vec<&str> = gold.iter().map(|s| s.raw()).collect();
    let card = evaluate_against_gold(&decisions, &gold).data_err()?;
    if !card.in_nominal_range() {
        warn(format!("score {} lies outside 1..=100", card.S));
    }
    print_json(&card)
}

pub fn evaluate(cfg: &RunConfig, hyp: &Path, reference: &Path, max_order: usize) -> CmdResult<()> {
    let hyp_path = input(&Some(hyp.to_path_buf()), "hyp")?.to_path_buf();
    let ref_path = input(&Some(reference.to_path_buf()), "ref")?.to_path_buf();
    if max_order == 0 {
        return fail(EXIT_CONFIG, "--max-order must be at least 1");
    }
    let hyps = read_lines(&hyp_path).data_err()?;
    let refs = read_lines(&ref_path).data_err()?;
    if hyps.is_empty() || refs.is_empty() {
        return fail(EXIT_DATA, "hypothesis and reference files must not be empty");
    }
    if hyps.len() != refs.len() {
        return fail(
            EXIT_DATA,
            format!("hypothesis has {} lines, reference has {}", hyps.len(), refs.len()),
        );
    }
    let options = BleuOptions {
        bp_form: cfg.bp_form(),
        ..BleuOptions::uniform(max_order)
    };
    let eval = evaluate_corpus(&hyps, &refs, &options, cfg.execution()).data_err()?;
    print_json(&eval)
}

pub fn tune(cfg: &RunConfig, resolution: Option<f64>, out: Option<&Path>) -> CmdResult<()> {
    let source_path = input(&cfg.source, "source")?;
    let target_path = input(&cfg.target, "target")?;
    let gold_path = input(&cfg.gold, "gold")?;
    let resolution = resolution.unwrap_or(DEFAULT_RESOLUTION);
    if !(resolution > 0.0 && resolution <= 1.0) {
        return fail(EXIT_CONFIG, format!("invalid --resolution {resolution}"));
    }
    let template = cfg.alignment_config().config_err()?;
    let source = load_corpus(source_path, cfg.source_lang()).data_err()?;
    let target = load_corpus(target_path, cfg.target_lang()).data_err()?;
    let gold = load_corpus(gold_path, cfg.target_lang()).data_err()?;
    let gold: Vec<String> = gold.iter().map(|s| s.raw().to_owned()).collect();
    if !DEV_SIZE_RANGE.contains(&source.len()) {
        warn(format!(
            "development set has {} lines; {}-{} lines tune best",
            source.len(),
            DEV_SIZE_RANGE.start(),
            DEV_SIZE_RANGE.end()
        ));
    }
    let trans = load_or_translate(cfg, &source)?;
    let job = TuningJob::new(source, target, trans, gold, template)
        .and_then(|j| j.with_resolution(resolution))
        .data_err()?;
    let report = tune_chain(&job).data_err()?;
    let fragment = serde_json::to_string_pretty(&report.config_fragment()).data_err()?;
    if let Some(out) = out {
        std::fs::write(out, format!("{fragment}\n"))
            .with_context(|| format!("cannot write {}", out.display()))
            .data_err()?;
    }
    if let Some(path) = &cfg.report {
        let text = serde_json::to_string_pretty(&report).data_err()?;
        std::fs::write(path, format!("{text}\n"))
            .with_context(|| format!("cannot write {}", path.display()))
            .data_err()?;
    }
    print_json(&report.config_fragment())
}
