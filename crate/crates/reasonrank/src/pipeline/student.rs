use std::collections::{BTreeMap, HashMap};

use reasonrank_core::bm25::InvertedIndex;
use reasonrank_core::metrics::ndcg_at_k;
use reasonrank_core::sample::nested_sample;
use reasonrank_core::student::synthetic::{SyntheticConfig, SyntheticTask};
use reasonrank_core::student::{
    generation_context, rerank_student, train, DistillationExample, FeatureExtractor, FeatureInput,
    GenerationVocab, ScorerKind, StudentParams, TargetSource, MAX_REASON_TOKENS,
};
use reasonrank_core::text::tokenize;
use reasonrank_core::{Document, Query, RankedList};
use serde::{Deserialize, Serialize};

use super::teacher::QueryRecord;
use super::{fmt_f64, read_jsonl, write_csv, write_json, write_jsonl, Input, Pipeline, StageStatus, TrainInfo};
use crate::config::TrainSource;
use crate::corpus_io::{self, ranked_lists, run_entries};
use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    /// `teacher` or `synthetic`.
    pub source: String,
    pub scorer: ScorerKind,
    /// Identifies the feature layout the scorer was trained on.
    pub feature_schema: String,
    pub hash_dim: usize,
    pub vocab: GenerationVocab,
    pub params: StudentParams,
    pub mix_weights: [f64; 3],
    pub train_queries: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StudentReasonLine {
    query_id: String,
    doc_id: String,
    reason: String,
}

/// Scorer and generation inputs for one query's first-stage candidates.
struct Candidates {
    doc_ids: Vec<String>,
    features: Vec<Vec<f64>>,
    contexts: Vec<Vec<f64>>,
}

fn candidates(
    fx: &FeatureExtractor,
    query: &Query,
    list: &RankedList,
    docs: &HashMap<String, Document>,
    avgdl: f64,
) -> Result<Candidates> {
    let q_tokens = tokenize(&query.text);
    let qctx = fx.query_context(&q_tokens);
    let max_bm25 = list.entries.first().map(|e| e.1).unwrap_or(0.0);
    let n = list.len();
    let mut out = Candidates {
        doc_ids: Vec::with_capacity(n),
        features: Vec::with_capacity(n),
        contexts: Vec::with_capacity(n),
    };
    for (rank, (doc_id, score)) in list.entries.iter().enumerate() {
        let doc = docs
            .get(doc_id)
            .ok_or_else(|| Error::Config(format!("retrieved document {doc_id} is not in the corpus")))?;
        let d_tokens = tokenize(&doc.text);
        let f = fx.features(&FeatureInput {
            query_tokens: &q_tokens,
            doc_tokens: &d_tokens,
            bm25: *score,
            max_bm25,
            first_stage_rank: rank,
            candidate_count: n,
            avgdl,
        });
        out.contexts.push(generation_context(&qctx, &f));
        out.features.push(f);
        out.doc_ids.push(doc_id.clone());
    }
    Ok(out)
}

fn schema(fx: &FeatureExtractor) -> String {
    format!("hashed-v1:{}:{:016x}", fx.hash_dim, fx.schema_hash())
}

impl Pipeline {
    fn train_inputs(&self) -> Vec<Input> {
        match self.cfg.train_source {
            TrainSource::Synthetic => vec![],
            TrainSource::Teacher => {
                let m = self.cfg.train_mode.as_str();
                vec![
                    Input::Stage("index".into(), "index.rrix".into()),
                    Input::Stage("retrieve".into(), "retrieve.run".into()),
                    Input::Stage(format!("parse:{m}"), format!("parsed/{m}.jsonl")),
                    Input::External("corpus", self.cfg.corpus.clone()),
                    Input::External("queries", self.cfg.queries.clone()),
                ]
            }
        }
    }

    /// Distils a student from the parsed teacher output (or the synthetic task)
    /// into `model.json`, with per-epoch losses and mix weights in `train_trace.csv`.
    pub fn cmd_train(&mut self) -> Result<StageStatus> {
        let c = &self.cfg;
        let mut settings = vec![
            ("scorer", format!("{:?}", c.scorer).to_lowercase()),
            ("train_size", c.train_size.map_or("all".into(), |n| n.to_string())),
            ("epochs", c.epochs.to_string()),
            ("learning_rate", fmt_f64(c.learning_rate)),
            ("mix_learning_rate", fmt_f64(c.mix_learning_rate)),
            ("momentum", fmt_f64(c.momentum)),
            ("max_pairs", c.max_pairs.to_string()),
            ("seed", c.seed.to_string()),
        ];
        match c.train_source {
            TrainSource::Teacher => {
                settings.push(("source", "teacher".into()));
                settings.push(("train_mode", c.train_mode.as_str().into()));
                settings.push(("hash_dim", c.hash_dim.to_string()));
                settings.push(("vocab_size", c.vocab_size.to_string()));
            }
            TrainSource::Synthetic => {
                settings.push(("source", "synthetic".into()));
                settings.push(("synthetic_queries", c.synthetic_queries.to_string()));
            }
        }
        let inputs = self.train_inputs();
        let outputs = ["model.json".to_string(), "train_trace.csv".to_string()];
        self.stage("train", settings, inputs, &outputs, |p| {
            let (model, info, trace) = match p.cfg.train_source {
                TrainSource::Teacher => p.train_teacher()?,
                TrainSource::Synthetic => p.train_synthetic()?,
            };
            let rows: Vec<Vec<String>> = trace
                .iter()
                .map(|t| {
                    [t.epoch as f64, t.pairwise, t.listwise, t.generation, t.alpha, t.beta, t.gamma]
                        .iter()
                        .enumerate()
                        .map(|(i, v)| if i == 0 { format!("{v}") } else { format!("{v:.9}") })
                        .collect()
                })
                .collect();
            write_csv(
                &p.path("train_trace.csv"),
                &["epoch", "L_pairwise", "L_listwise", "L_generation", "alpha", "beta", "gamma"],
                &rows,
            )?;
            write_json(&p.path("model.json"), &model)?;
            p.manifest.train = Some(info);
            Ok(())
        })
    }

    /// Pool, sampled indices, and the requested size checked against the pool.
    fn sample_pool(&self, pool: &[String]) -> Result<Vec<usize>> {
        let k = self.cfg.train_size.unwrap_or(pool.len());
        if k > pool.len() {
            return Err(Error::Config(format!(
                "train_size {k} exceeds the {} available training queries",
                pool.len()
            )));
        }
        Ok(nested_sample(pool, k, self.cfg.seed))
    }

    fn train_teacher(&self) -> Result<(ModelFile, TrainInfo, Vec<reasonrank_core::student::EpochTrace>)> {
        let c = &self.cfg;
        let m = c.train_mode.as_str();
        let records: Vec<QueryRecord> = read_jsonl(&self.path(&format!("parsed/{m}.jsonl")))?;
        let lists = ranked_lists(&corpus_io::load_run(&self.path("retrieve.run"))?);
        let queries = self.load_query_map()?;
        let docs = self.load_corpus_map()?;
        let index: InvertedIndex = self.load_index()?;
        let fx = FeatureExtractor::new(c.hash_dim);

        let by_id: BTreeMap<&str, &QueryRecord> = records.iter().map(|r| (r.query_id.as_str(), r)).collect();
        let pool: Vec<String> = by_id.keys().map(|s| s.to_string()).collect();
        let picked: Vec<&QueryRecord> = self.sample_pool(&pool)?.into_iter().map(|i| by_id[pool[i].as_str()]).collect();

        let reason_text = |r: &QueryRecord, d: &str| r.reasons.get(d).map(|x| x.text()).unwrap_or_default();
        let vocab = GenerationVocab::build(
            picked
                .iter()
                .flat_map(|r| r.reasons.values().map(|x| x.text()))
                .collect::<Vec<_>>()
                .iter()
                .map(String::as_str),
            c.vocab_size,
        );
        let mut examples = Vec::with_capacity(picked.len());
        for r in &picked {
            let qid = r.query_id.as_str();
            let (query, list) = match (queries.get(qid), lists.get(qid)) {
                (Some(q), Some(l)) => (q, l),
                _ => return Err(Error::Config(format!("query {qid} has no retrieval list"))),
            };
            let cand = candidates(&fx, query, list, &docs, index.avgdl())?;
            let pos: HashMap<&str, usize> = cand.doc_ids.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
            let order: Vec<usize> = r
                .ranking
                .iter()
                .map(|d| {
                    pos.get(d.as_str())
                        .copied()
                        .ok_or_else(|| Error::Format(format!("teacher ranked {d} outside the candidates of {qid}")))
                })
                .collect::<Result<_>>()?;
            let reasons = cand
                .doc_ids
                .iter()
                .map(|d| vocab.encode(&reason_text(r, d), MAX_REASON_TOKENS))
                .collect();
            examples.push(DistillationExample::new(
                qid,
                cand.doc_ids,
                cand.features,
                cand.contexts,
                order,
                reasons,
                TargetSource::TeacherOrder,
                c.max_pairs,
            )?);
        }
        let ctx_dim = examples.first().map_or(fx.dim(), |e| e.contexts[0].len());
        let init = StudentParams::init(c.scorer, fx.dim(), ctx_dim, vocab.len(), c.seed);
        let out = train(init, &examples, &c.train_config())?;
        let mix = out.params.mix_weights();
        let model = ModelFile {
            version: MODEL_VERSION,
            source: "teacher".into(),
            scorer: c.scorer,
            feature_schema: schema(&fx),
            hash_dim: c.hash_dim,
            vocab,
            params: out.params,
            mix_weights: mix,
            train_queries: picked.iter().map(|r| r.query_id.clone()).collect(),
        };
        let info = TrainInfo {
            source: "teacher".into(),
            pool_size: pool.len(),
            train_size: picked.len(),
            mix_weights: mix,
            heldout_ndcg_at_5: None,
        };
        Ok((model, info, out.trace))
    }

    fn train_synthetic(&self) -> Result<(ModelFile, TrainInfo, Vec<reasonrank_core::student::EpochTrace>)> {
        let c = &self.cfg;
        let task = SyntheticTask::generate(&SyntheticConfig {
            queries: c.synthetic_queries,
            seed: c.seed,
            ..Default::default()
        });
        let pool: Vec<String> = task.examples.iter().map(|e| e.query_id.clone()).collect();
        let picked = self.sample_pool(&pool)?;
        let train_set: Vec<DistillationExample> = picked.iter().map(|&i| task.examples[i].clone()).collect();
        let out = train(task.initial_params(c.scorer, c.seed), &train_set, &c.train_config())?;

        // Held-out fit: up to 200 pool queries outside the sample.
        let qrels = task.teacher_qrels();
        let chosen: std::collections::HashSet<usize> = picked.iter().copied().collect();
        let mut scores = Vec::new();
        let heldout_set = task.examples.iter().enumerate().filter(|(i, _)| !chosen.contains(i));
        for (_, ex) in heldout_set.take(200) {
            let r = rerank_student(&out.params, &task.vocab, &ex.query_id, &ex.doc_ids, &ex.features, &ex.contexts)?;
            let ids: Vec<&str> = r.ranking.doc_ids().collect();
            scores.push(ndcg_at_k(&ids, &qrels, &ex.query_id, 5)?);
        }
        let heldout = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);

        let mix = out.params.mix_weights();
        let model = ModelFile {
            version: MODEL_VERSION,
            source: "synthetic".into(),
            scorer: c.scorer,
            feature_schema: format!("synthetic:{}", task.feature_dim()),
            hash_dim: 0,
            vocab: task.vocab.clone(),
            params: out.params,
            mix_weights: mix,
            train_queries: picked.iter().map(|&i| pool[i].clone()).collect(),
        };
        let info = TrainInfo {
            source: "synthetic".into(),
            pool_size: pool.len(),
            train_size: picked.len(),
            mix_weights: mix,
            heldout_ndcg_at_5: heldout,
        };
        Ok((model, info, out.trace))
    }

    /// Reranks every first-stage list with the trained student.
    pub fn cmd_student_rerank(&mut self) -> Result<StageStatus> {
        let inputs = vec![
            Input::Stage("train".into(), "model.json".into()),
            Input::Stage("index".into(), "index.rrix".into()),
            Input::Stage("retrieve".into(), "retrieve.run".into()),
            Input::External("corpus", self.cfg.corpus.clone()),
            Input::External("queries", self.cfg.queries.clone()),
        ];
        let outputs = ["student.run".to_string(), "student_reasons.jsonl".to_string()];
        self.stage("student_rerank", vec![], inputs, &outputs, |p| {
            let path = p.path("model.json");
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let model: ModelFile = serde_json::from_slice(&bytes)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            if model.source != "teacher" {
                return Err(Error::Config(format!(
                    "model.json was trained on the {} task and cannot rerank corpus documents",
                    model.source
                )));
            }
            let fx = FeatureExtractor::new(model.hash_dim);
            if schema(&fx) != model.feature_schema {
                return Err(Error::Format(format!(
                    "model feature schema {} does not match this build ({})",
                    model.feature_schema,
                    schema(&fx)
                )));
            }
            let lists = ranked_lists(&corpus_io::load_run(&p.path("retrieve.run"))?);
            let queries = p.load_query_map()?;
            let docs = p.load_corpus_map()?;
            let avgdl = p.load_index()?.avgdl();
            let mut run = Vec::new();
            let mut reasons = Vec::new();
            for (qid, list) in &lists {
                let query = queries
                    .get(qid)
                    .ok_or_else(|| Error::Config(format!("run lists query {qid} missing from the queries file")))?;
                let cand = candidates(&fx, query, list, &docs, avgdl)?;
                let r = rerank_student(&model.params, &model.vocab, qid, &cand.doc_ids, &cand.features, &cand.contexts)?;
                run.extend(run_entries(&r.ranking, "student"));
                reasons.extend(r.reasons.into_iter().map(|(doc_id, reason)| StudentReasonLine {
                    query_id: qid.clone(),
                    doc_id,
                    reason,
                }));
            }
            corpus_io::write_run(&run, &p.path("student.run"))?;
            write_jsonl(&p.path("student_reasons.jsonl"), &reasons)
        })
    }
}

/// Student reasons keyed by (query, doc).
pub(super) fn load_student_reasons(path: &std::path::Path) -> Result<BTreeMap<(String, String), String>> {
    Ok(read_jsonl::<StudentReasonLine>(path)?
        .into_iter()
        .map(|l| ((l.query_id, l.doc_id), l.reason))
        .collect())
}
