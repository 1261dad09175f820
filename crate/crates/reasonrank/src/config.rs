//! Run configuration in `key = value` form.
//!
//! Relative paths resolve against the directory holding the config file.
//!
//! | key | default | |
//! |---|---|---|
//! | `name` | `run` | run directory name under the output root |
//! | `corpus`, `queries`, `qrels` | required | JSONL, JSONL, TREC qrels |
//! | `pricing` | built-in rates | pricing file, see [`PricingConfig`] |
//! | `k1`, `b`, `topk` | 0.9, 0.4, 20 | first stage |
//! | `modes` | all four | comma list of `basic,explicit,comparison,combined` |
//! | `window`, `stride`, `passage_tokens` | 20, 10, 120 | sliding windows |
//! | `gateway` | `http` | `mock:<script>` or `http` |
//! | `endpoint`, `model` | OpenAI chat URL, `gpt-4` | |
//! | `temperature`, `top_p`, `max_tokens` | 1.0, 0.9, 2048 | |
//! | `concurrency`, `retries`, `backoff_ms`, `timeout_s` | 4, 3, 250, 120 | |
//! | `train_mode` | `combined` | which teacher output the student learns from |
//! | `train_source` | `teacher` | or `synthetic` |
//! | `synthetic_queries` | 2000 | size of the synthetic pool |
//! | `train_size` | all | subsample of the training pool |
//! | `epochs`, `learning_rate`, `mix_learning_rate`, `momentum` | 200, 0.01, 0.001, 0.9 | |
//! | `scorer` | `linear` | or `mlp` |
//! | `hash_dim`, `vocab_size`, `max_pairs` | 64, 500, 50 | |
//! | `behavior_precision` | 0 | decimals in behaviour percentages |
//! | `seed` | 42 | |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use reasonrank_core::prompt::PromptMode;
use reasonrank_core::student::{ScorerKind, TrainConfig, DEFAULT_MAX_PAIRS};
use reasonrank_core::usage::Pricing;

use crate::error::{Error, Result};
use crate::kv;

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GatewaySpec {
    Mock(PathBuf),
    Http,
}

impl GatewaySpec {
    pub fn parse(s: &str, base: &Path) -> std::result::Result<Self, String> {
        if let Some(p) = s.strip_prefix("mock:") {
            if p.is_empty() {
                return Err("mock gateway needs a script path".into());
            }
            Ok(GatewaySpec::Mock(base.join(p)))
        } else if s == "http" {
            Ok(GatewaySpec::Http)
        } else {
            Err(format!("unknown gateway {s:?}; expected mock:<script> or http"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainSource {
    Teacher,
    Synthetic,
}

/// Token split behind one row of a cost table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostProfile {
    pub mode: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// `input_per_1k`, `output_per_1k`, and any number of
/// `profile.<mode> = <input>/<output>` rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PricingConfig {
    pub pricing: Pricing,
    pub profiles: Vec<CostProfile>,
}

impl PricingConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for e in kv::parse(text, path)? {
            match e.key.as_str() {
                "input_per_1k" => cfg.pricing.input_per_1k = kv::parse_value(&e, path)?,
                "output_per_1k" => cfg.pricing.output_per_1k = kv::parse_value(&e, path)?,
                k if k.starts_with("profile.") => {
                    let (i, o) = e
                        .value
                        .split_once('/')
                        .and_then(|(i, o)| Some((i.trim().parse().ok()?, o.trim().parse().ok()?)))
                        .ok_or_else(|| Error::parse(path, e.line, "expected <input>/<output> token counts"))?;
                    cfg.profiles.push(CostProfile {
                        mode: k["profile.".len()..].to_string(),
                        input_tokens: i,
                        output_tokens: o,
                    });
                }
                other => return Err(Error::parse(path, e.line, format!("unknown pricing key {other}"))),
            }
        }
        let p = cfg.pricing;
        if !(p.input_per_1k >= 0.0 && p.output_per_1k >= 0.0) {
            return Err(Error::Config(format!("{}: negative price", path.display())));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    pub pricing_file: Option<PathBuf>,
    pub pricing: PricingConfig,
    pub k1: f64,
    pub b: f64,
    pub topk: usize,
    pub modes: Vec<PromptMode>,
    pub window: usize,
    pub stride: usize,
    pub passage_tokens: usize,
    pub gateway: GatewaySpec,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub concurrency: usize,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_s: u64,
    pub train_mode: PromptMode,
    pub train_source: TrainSource,
    pub synthetic_queries: usize,
    pub train_size: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub mix_learning_rate: f64,
    pub momentum: f64,
    pub scorer: ScorerKind,
    pub hash_dim: usize,
    pub vocab_size: usize,
    pub max_pairs: usize,
    pub behavior_precision: u32,
    pub seed: u64,
    /// Settings as written, for the manifest snapshot.
    raw: BTreeMap<String, String>,
}

fn parse_modes(s: &str) -> std::result::Result<Vec<PromptMode>, String> {
    if s.trim() == "all" {
        return Ok(PromptMode::ALL.to_vec());
    }
    let mut out = Vec::new();
    for m in s.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        let mode: PromptMode = m.parse().map_err(|_| format!("unknown prompt mode {m:?}"))?;
        if !out.contains(&mode) {
            out.push(mode);
        }
    }
    if out.is_empty() {
        return Err("no prompt modes given".into());
    }
    Ok(out)
}

fn parse_scorer(s: &str) -> std::result::Result<ScorerKind, String> {
    match s {
        "linear" => Ok(ScorerKind::Linear),
        "mlp" => Ok(ScorerKind::Mlp),
        _ => Err(format!("unknown scorer {s:?}")),
    }
}

impl RunConfig {
    fn defaults(base: &Path) -> Self {
        let train = TrainConfig::default();
        Self {
            name: "run".into(),
            corpus: base.join("corpus.jsonl"),
            queries: base.join("queries.jsonl"),
            qrels: base.join("qrels.txt"),
            pricing_file: None,
            pricing: PricingConfig::default(),
            k1: 0.9,
            b: 0.4,
            topk: 100,
            modes: PromptMode::ALL.to_vec(),
            window: 20,
            stride: 10,
            passage_tokens: 120,
            gateway: GatewaySpec::Http,
            endpoint: DEFAULT_ENDPOINT.into(),
            model: "gpt-4".into(),
            temperature: 1.0,
            top_p: 0.9,
            max_tokens: 2048,
            concurrency: 4,
            retries: 3,
            backoff_ms: 250,
            timeout_s: 120,
            train_mode: PromptMode::Combined,
            train_source: TrainSource::Teacher,
            synthetic_queries: 2000,
            train_size: None,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            mix_learning_rate: train.mix_learning_rate,
            momentum: train.momentum,
            scorer: ScorerKind::Linear,
            hash_dim: 64,
            vocab_size: 500,
            max_pairs: DEFAULT_MAX_PAIRS,
            behavior_precision: 0,
            seed: train.seed,
            raw: BTreeMap::new(),
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut c = Self::defaults(base);
        for e in kv::parse(text, path)? {
            c.set(&e.key, &e.value, base)
                .map_err(|m| Error::parse(path, e.line, m))?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text, path)?;
        if let Some(p) = c.pricing_file.clone() {
            c.pricing = PricingConfig::load(&p)?;
        }
        Ok(c)
    }

    /// Applies one setting; command-line overrides go through here as well.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        match key {
            "name" => self.name = value.into(),
            "corpus" => self.corpus = base.join(value),
            "queries" => self.queries = base.join(value),
            "qrels" => self.qrels = base.join(value),
            "pricing" => self.pricing_file = Some(base.join(value)),
            "k1" => self.k1 = num(key, value)?,
            "b" => self.b = num(key, value)?,
            "topk" => self.topk = num(key, value)?,
            "modes" | "mode" => self.modes = parse_modes(value)?,
            "window" => self.window = num(key, value)?,
            "stride" => self.stride = num(key, value)?,
            "passage_tokens" => self.passage_tokens = num(key, value)?,
            "gateway" => self.gateway = GatewaySpec::parse(value, base)?,
            "endpoint" => self.endpoint = value.into(),
            "model" => self.model = value.into(),
            "temperature" => self.temperature = num(key, value)?,
            "top_p" => self.top_p = num(key, value)?,
            "max_tokens" => self.max_tokens = num(key, value)?,
            "concurrency" => self.concurrency = num(key, value)?,
            "retries" => self.retries = num(key, value)?,
            "backoff_ms" => self.backoff_ms = num(key, value)?,
            "timeout_s" => self.timeout_s = num(key, value)?,
            "train_mode" => {
                self.train_mode = value.parse().map_err(|_| format!("unknown prompt mode {value:?}"))?
            }
            "train_source" => {
                self.train_source = match value {
                    "teacher" => TrainSource::Teacher,
                    "synthetic" => TrainSource::Synthetic,
                    _ => return Err(format!("unknown train_source {value:?}")),
                }
            }
            "synthetic_queries" => self.synthetic_queries = num(key, value)?,
            "train_size" => {
                self.train_size = match value {
                    "all" | "" => None,
                    v => Some(num(key, v)?),
                }
            }
            "epochs" => self.epochs = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "mix_learning_rate" => self.mix_learning_rate = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "scorer" => self.scorer = parse_scorer(value)?,
            "hash_dim" => self.hash_dim = num(key, value)?,
            "vocab_size" => self.vocab_size = num(key, value)?,
            "max_pairs" => self.max_pairs = num(key, value)?,
            "behavior_precision" => self.behavior_precision = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => return Err(format!("unknown setting {other}")),
        }
        self.raw.insert(key.into(), value.into());
        Ok(())
    }

    /// Checks ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (what, p) in [("corpus", &self.corpus), ("queries", &self.queries), ("qrels", &self.qrels)] {
            if !p.is_file() {
                return bad(format!("{what} file {} does not exist", p.display()));
            }
        }
        if let GatewaySpec::Mock(p) = &self.gateway {
            if !p.is_file() {
                return bad(format!("mock script {} does not exist", p.display()));
            }
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad(format!("run name {:?} is not a plain directory name", self.name));
        }
        if !(self.k1 >= 0.0 && self.k1.is_finite()) || !(0.0..=1.0).contains(&self.b) {
            return bad(format!("BM25 parameters k1={} b={} out of range", self.k1, self.b));
        }
        if self.topk == 0 {
            return bad("topk must be at least 1".into());
        }
        if self.window < 2 || self.stride == 0 || self.stride > self.window {
            return bad(format!(
                "window {} / stride {} invalid: need window >= 2 and 1 <= stride <= window",
                self.window, self.stride
            ));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 || !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("temperature must be >= 0 and top_p in (0, 1]".into());
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        if self.train_size == Some(0) {
            return bad("train_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.mix_learning_rate >= 0.0 && (0.0..1.0).contains(&self.momentum)) {
            return bad("learning rates must be positive and momentum in [0, 1)".into());
        }
        if self.vocab_size < 3 {
            return bad("vocab_size must be at least 3".into());
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            mix_learning_rate: self.mix_learning_rate,
            momentum: self.momentum,
            seed: self.seed,
        }
    }

    /// The settings as written in the config file and overrides.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.raw.clone()
    }
}
