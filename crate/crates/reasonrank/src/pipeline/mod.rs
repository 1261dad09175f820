//! Stage orchestration over a run directory.
//!
//! ```text
//! runs/<name>/
//!   manifest.json  index.rrix  retrieve.run
//!   prompts/<mode>/  responses/<mode>/{windows.jsonl,usage.csv,...}
//!   parsed/<mode>.{jsonl,run,defects.jsonl}
//!   model.json  train_trace.csv  student.run  student_reasons.jsonl
//!   eval/
//! ```
//!
//! Every stage records its settings and the content hashes of its inputs and
//! outputs. A stage whose record still matches is skipped; one whose settings
//! changed refuses to run without `force`.

mod evaluate;
pub mod manifest;
mod student;
mod teacher;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use reasonrank_core::bm25::{Bm25Params, InvertedIndex};
use reasonrank_core::{Document, Query};

pub use evaluate::{EvalSummary, SignificanceRow, SystemScore, TextQualityRow};
pub use manifest::{Manifest, StageRecord, TrainInfo};
pub use student::ModelFile;
pub use teacher::{DocReason, QueryDefectLog, QueryRecord, WindowLog};

use crate::config::{GatewaySpec, RunConfig};
use crate::corpus_io::{self, run_entries};
use crate::error::{Error, Result};
use crate::gateway::{
    CompletionRequest, Gateway, GatewayConfig, HttpTransport, MockScript, MockTransport, ResponseCache,
    SessionLedger, Transport, TransportError, TransportReply,
};
use crate::index_file;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Parent of the run directory.
    pub out_root: PathBuf,
    /// Response cache; defaults to `<out_root>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub force: bool,
    /// Serve teacher calls from the cache only.
    pub offline: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            out_root: PathBuf::from("runs"),
            cache_dir: None,
            force: false,
            offline: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

enum Input {
    External(&'static str, PathBuf),
    /// An output of an earlier stage: (stage name, path relative to the run dir).
    Stage(String, String),
}

struct OfflineTransport;

impl Transport for OfflineTransport {
    fn send(&self, _: &CompletionRequest) -> std::result::Result<TransportReply, TransportError> {
        Err(TransportError::Fatal("offline".into()))
    }
}

pub struct Pipeline {
    cfg: RunConfig,
    opts: PipelineOptions,
    run_dir: PathBuf,
    manifest: Manifest,
    gateway: Option<Gateway>,
    /// One line per stage invocation, e.g. `retrieve: up to date`.
    pub log: Vec<String>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl Pipeline {
    pub fn open(cfg: RunConfig, opts: PipelineOptions) -> Result<Self> {
        cfg.validate()?;
        let run_dir = opts.out_root.join(&cfg.name);
        let mut manifest = Manifest::load_or_new(&run_dir.join("manifest.json"), &cfg.name)?;
        manifest.config = cfg.snapshot();
        Ok(Self {
            cfg,
            opts,
            run_dir,
            manifest,
            gateway: None,
            log: Vec::new(),
        })
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Gateway activity in this process; zero if no teacher stage needed it.
    pub fn gateway_ledger(&self) -> SessionLedger {
        self.gateway.as_ref().map(Gateway::ledger).unwrap_or_default()
    }

    /// Replaces the gateway, e.g. to inject a transport in tests.
    pub fn set_gateway(&mut self, gateway: Gateway) {
        self.gateway = Some(gateway);
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.run_dir.join(rel)
    }

    fn ensure_gateway(&mut self) -> Result<()> {
        if self.gateway.is_some() {
            return Ok(());
        }
        let cfg = &self.cfg;
        let transport: Box<dyn Transport> = if self.opts.offline {
            Box::new(OfflineTransport)
        } else {
            match &cfg.gateway {
                GatewaySpec::Mock(p) => Box::new(MockTransport::new(MockScript::load(p)?)),
                GatewaySpec::Http => Box::new(HttpTransport::from_env(
                    cfg.endpoint.clone(),
                    Duration::from_secs(cfg.timeout_s),
                )?),
            }
        };
        let cache_dir = self
            .opts
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.opts.out_root.join("cache"));
        self.gateway = Some(Gateway::new(
            transport,
            Some(ResponseCache::new(cache_dir)),
            GatewayConfig {
                retries: cfg.retries,
                backoff: Duration::from_millis(cfg.backoff_ms),
                concurrency: cfg.concurrency,
                cache_only: self.opts.offline,
                pricing: cfg.pricing.pricing,
            },
        ));
        Ok(())
    }

    fn stage<F>(
        &mut self,
        name: &str,
        settings: Vec<(&str, String)>,
        inputs: Vec<Input>,
        outputs: &[String],
        body: F,
    ) -> Result<StageStatus>
    where
        F: FnOnce(&mut Self) -> Result<()>,
    {
        let mut input_hashes = BTreeMap::new();
        for input in &inputs {
            let (key, path) = match input {
                Input::External(k, p) => ((*k).to_string(), p.clone()),
                Input::Stage(stage, rel) => {
                    if !self.manifest.stages.contains_key(stage) {
                        return Err(Error::MissingStage { stage: stage.clone() });
                    }
                    (rel.clone(), self.path(rel))
                }
            };
            let hash = manifest::hash_path(&path)?.ok_or_else(|| match input {
                Input::Stage(stage, _) => Error::MissingStage { stage: stage.clone() },
                Input::External(k, p) => Error::Config(format!("{k} {} does not exist", p.display())),
            })?;
            input_hashes.insert(key, hash);
        }
        let settings: BTreeMap<String, String> =
            settings.into_iter().map(|(k, v)| (k.to_string(), v)).collect();

        if let Some(rec) = self.manifest.stages.get(name) {
            if !self.opts.force {
                if rec.settings != settings {
                    let mut diffs = Vec::new();
                    for (k, v) in &settings {
                        match rec.settings.get(k) {
                            Some(old) if old == v => {}
                            Some(old) => diffs.push(format!("{k}: {old} -> {v}")),
                            None => diffs.push(format!("{k}: unset -> {v}")),
                        }
                    }
                    if diffs.is_empty() {
                        diffs.push("setting list changed".into());
                    }
                    return Err(Error::ConfigMismatch {
                        stage: name.into(),
                        detail: diffs.join(", "),
                    });
                }
                let mut fresh = rec.inputs == input_hashes && rec.outputs.len() == outputs.len();
                for rel in outputs {
                    fresh = fresh && manifest::hash_path(&self.path(rel))?.as_ref() == rec.outputs.get(rel);
                }
                if fresh {
                    self.log.push(format!("{name}: up to date"));
                    return Ok(StageStatus::UpToDate);
                }
            }
        }

        for rel in outputs {
            let p = self.path(rel);
            let res = if p.is_dir() {
                std::fs::remove_dir_all(&p)
            } else if p.is_file() {
                std::fs::remove_file(&p)
            } else {
                Ok(())
            };
            res.map_err(|e| Error::io(&p, e))?;
        }
        // A partial rerun must not leave the old record claiming success.
        self.manifest.stages.remove(name);
        body(self)?;

        let mut output_hashes = BTreeMap::new();
        for rel in outputs {
            let h = manifest::hash_path(&self.path(rel))?
                .ok_or_else(|| Error::Format(format!("stage {name} did not produce {rel}")))?;
            output_hashes.insert(rel.clone(), h);
        }
        self.manifest.stages.insert(
            name.into(),
            StageRecord {
                settings,
                inputs: input_hashes,
                outputs: output_hashes,
            },
        );
        self.save_manifest()?;
        self.log.push(format!("{name}: done"));
        Ok(StageStatus::Ran)
    }

    fn save_manifest(&self) -> Result<()> {
        self.manifest.save(&self.run_dir.join("manifest.json"))
    }

    fn load_corpus_map(&self) -> Result<HashMap<String, Document>> {
        Ok(corpus_io::load_corpus(&self.cfg.corpus)?
            .into_iter()
            .map(|d| (d.doc_id.clone(), d))
            .collect())
    }

    fn load_query_map(&self) -> Result<BTreeMap<String, Query>> {
        Ok(corpus_io::load_queries(&self.cfg.queries)?
            .into_iter()
            .map(|q| (q.query_id.clone(), q))
            .collect())
    }

    fn load_index(&self) -> Result<InvertedIndex> {
        index_file::read_index(&self.path("index.rrix"))
    }

    pub fn cmd_index(&mut self) -> Result<StageStatus> {
        let inputs = vec![Input::External("corpus", self.cfg.corpus.clone())];
        self.stage("index", vec![], inputs, &["index.rrix".into()], |p| {
            let corpus = corpus_io::load_corpus(&p.cfg.corpus)?;
            let index = InvertedIndex::build(&corpus)?;
            index_file::write_index(&index, &p.path("index.rrix"))
        })
    }

    pub fn cmd_retrieve(&mut self) -> Result<StageStatus> {
        let settings = vec![
            ("k1", fmt_f64(self.cfg.k1)),
            ("b", fmt_f64(self.cfg.b)),
            ("topk", self.cfg.topk.to_string()),
        ];
        let inputs = vec![
            Input::Stage("index".into(), "index.rrix".into()),
            Input::External("queries", self.cfg.queries.clone()),
        ];
        self.stage("retrieve", settings, inputs, &["retrieve.run".into()], |p| {
            let index = p.load_index()?;
            let params = Bm25Params {
                k1: p.cfg.k1,
                b: p.cfg.b,
            };
            let mut entries = Vec::new();
            for q in corpus_io::load_queries(&p.cfg.queries)? {
                let list = index.retrieve_top_k(&q.query_id, &q.text, p.cfg.topk, params);
                entries.extend(run_entries(&list, "bm25"));
            }
            corpus_io::write_run(&entries, &p.path("retrieve.run"))
        })
    }

    /// Every stage in order. The student stages only run for teacher-sourced training.
    pub fn run_all(&mut self) -> Result<()> {
        self.cmd_index()?;
        self.cmd_retrieve()?;
        for mode in self.cfg.modes.clone() {
            self.cmd_teacher_rerank(mode)?;
            self.cmd_parse(mode)?;
        }
        self.cmd_behavior_report()?;
        self.cmd_train()?;
        if self.cfg.train_source == crate::config::TrainSource::Teacher {
            self.cmd_student_rerank()?;
        }
        self.cmd_evaluate()?;
        self.cmd_cost_report()?;
        Ok(())
    }
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    corpus_io::write_file(path, &bytes)
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it).map_err(|e| Error::Format(e.to_string()))?;
        out.push(b'\n');
    }
    corpus_io::write_file(path, &out)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_vec_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    body.push(b'\n');
    corpus_io::write_file(path, &body)
}
