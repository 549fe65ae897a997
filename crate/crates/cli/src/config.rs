//! Run configuration: a JSON file merged with command-line flags.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use sentalign::aligner::{AlignmentConfig, DEFAULT_LOOKAHEAD, DEFAULT_WINDOW};
use sentalign::lexicon::DEFAULT_VARIANT_CAP;
use sentalign::metrics::BpForm;
use sentalign::{load_stopwords, load_synonyms, ComparatorChain, ComparisonContext, Execution, HttpConfig};

/// Used when neither the config file nor `--chain` names one.
pub const DEFAULT_CHAIN: &str = "token_overlap:0.6,matching_blocks_ratio:0.6,synonym_ratio:0.6";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    File,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BpFormArg {
    Standard,
    Paper,
}

impl From<BpFormArg> for BpForm {
    fn from(v: BpFormArg) -> Self {
        match v {
            BpFormArg::Standard => BpForm::Standard,
            BpFormArg::Paper => BpForm::Paper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionArg {
    Sequential,
    Parallel,
}

impl From<ExecutionArg> for Execution {
    fn from(v: ExecutionArg) -> Self {
        match v {
            ExecutionArg::Sequential => Execution::Sequential,
            ExecutionArg::Parallel => Execution::Parallel,
        }
    }
}

/// Everything a run can be configured with. Every field is optional in the
/// file; command-line flags override file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Source corpus (one sentence per line)
    #[arg(long, global = true)]
    pub source: Option<PathBuf>,
    /// Target corpus
    #[arg(long, global = true)]
    pub target: Option<PathBuf>,
    /// Intermediate translation of the source corpus
    #[arg(long, global = true)]
    pub trans: Option<PathBuf>,
    /// Gold target text, line i matching source line i
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    /// Alignment report (JSON lines)
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Aligned source output
    #[arg(long, global = true)]
    pub out_source: Option<PathBuf>,
    /// Aligned target output
    #[arg(long, global = true)]
    pub out_target: Option<PathBuf>,

    #[arg(long, global = true)]
    pub source_lang: Option<String>,
    #[arg(long, global = true)]
    pub target_lang: Option<String>,

    /// Translation provider
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Pre-translated lines served by the file provider
    #[arg(long, global = true)]
    pub provider_file: Option<PathBuf>,
    #[arg(skip)]
    pub http: Option<HttpConfig>,
    /// Directory holding the persistent translation cache
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    /// Comparator chain, e.g. token_overlap:0.5,matching_blocks_ratio:0.7
    #[arg(long, global = true)]
    pub chain: Option<ComparatorChain>,
    /// Candidate window half-width; 0 scans the whole target
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Lookahead depth
    #[arg(long, global = true)]
    pub lookahead: Option<usize>,
    /// Maximum synonym variants per sentence
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    /// Stop-word list for token_overlap
    #[arg(long, global = true)]
    pub stopwords: Option<PathBuf>,
    /// Synonym lexicon (TSV) for synonym_ratio
    #[arg(long, global = true)]
    pub synonyms: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub execution: Option<ExecutionArg>,
    /// Brevity penalty form for BLEU
    #[arg(long, global = true, value_enum)]
    pub bp_form: Option<BpFormArg>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Load `--config` (if any) and apply these flags on top of it.
    pub fn resolve(flags: &RunConfig) -> Result<RunConfig> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                Self::from_json(&text).with_context(|| format!("invalid config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        overlay!(
            cfg, flags, source, target, trans, gold, report, out_source, out_target, source_lang, target_lang,
            provider, provider_file, http, cache_dir, chain, window, lookahead, cap, stopwords, synonyms,
            execution, bp_form
        );
        cfg.config = flags.config.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no input data.
    pub fn validate(&self) -> Result<()> {
        if self.cap == Some(0) {
            bail!("--cap must be at least 1");
        }
        for (name, path) in [
            ("stopwords", &self.stopwords),
            ("synonyms", &self.synonyms),
            ("provider file", &self.provider_file),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    bail!("{name} file {} does not exist", p.display());
                }
            }
        }
        if let Some(http) = &self.http {
            if !http.url_template.contains("{text}") {
                bail!("http url_template must contain {{text}}");
            }
            if http.max_concurrency == 0 {
                bail!("http max_concurrency must be at least 1");
            }
        }
        if self.provider == Some(ProviderKind::Http) && self.http.is_none() {
            bail!("the http provider needs an \"http\" section in the config file");
        }
        Ok(())
    }

    pub fn source_lang(&self) -> &str {
        self.source_lang.as_deref().unwrap_or("src")
    }

    pub fn target_lang(&self) -> &str {
        self.target_lang.as_deref().unwrap_or("tgt")
    }

    pub fn execution(&self) -> Execution {
        self.execution.map(Into::into).unwrap_or_default()
    }

    pub fn bp_form(&self) -> BpForm {
        self.bp_form.map(Into::into).unwrap_or_default()
    }

    pub fn chain(&self) -> ComparatorChain {
        self.chain
            .clone()
            .unwrap_or_else(|| DEFAULT_CHAIN.parse().expect("default chain is valid"))
    }

    /// Alignment settings, loading the lexicon files.
    pub fn alignment_config(&self) -> Result<AlignmentConfig> {
        let mut context = ComparisonContext {
            cap: self.cap.unwrap_or(DEFAULT_VARIANT_CAP),
            ..ComparisonContext::default()
        };
        if let Some(p) = &self.stopwords {
            context.stopwords = load_stopwords(p, self.target_lang())?;
        }
        if let Some(p) = &self.synonyms {
            context.lexicon = load_synonyms(p, self.target_lang())?;
        }
        Ok(AlignmentConfig {
            chain: self.chain(),
            window: self.window.unwrap_or(DEFAULT_WINDOW),
            lookahead_depth: self.lookahead.unwrap_or(DEFAULT_LOOKAHEAD),
            context,
            execution: self.execution(),
        })
    }
}
