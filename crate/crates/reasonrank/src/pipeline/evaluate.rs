use reasonrank_core::metrics::{bleu, ndcg_at_k, paired_t_test, rouge_l, MetricReport};
use reasonrank_core::prompt::PromptMode;
use reasonrank_core::text::tokenize;
use serde::{Deserialize, Serialize};

use super::student::load_student_reasons;
use super::teacher::QueryRecord;
use super::{read_jsonl, write_csv, write_json, Input, Pipeline, StageStatus};
use crate::corpus_io::{self, ranked_lists};
use crate::error::Result;

pub const CUTOFFS: [usize; 2] = [5, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: String,
    /// Mean NDCG@5 and NDCG@10 as fractions.
    pub ndcg_at_5: f64,
    pub ndcg_at_10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub system: String,
    pub baseline: String,
    pub metric: String,
    pub mean_system: f64,
    pub mean_baseline: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub verdict: String,
}

impl SignificanceRow {
    /// Paired t-test of `system` against `baseline` over aligned per-query values.
    pub fn compare(system: &str, baseline: &str, metric: &str, a: &[f64], b: &[f64]) -> Result<Self> {
        let r = paired_t_test(a, b)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(Self {
            system: system.into(),
            baseline: baseline.into(),
            metric: metric.into(),
            mean_system: mean(a),
            mean_baseline: mean(b),
            t: r.t,
            df: r.df,
            p_value: r.p_value,
            verdict: if r.significant_at_05 { "significant" } else { "not significant" }.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextQualityRow {
    pub system: String,
    pub reference: String,
    /// (query, doc) pairs with both a generated and a reference reason.
    pub pairs: usize,
    pub bleu: f64,
    pub rouge_l: f64,
}

/// `eval/summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub queries: usize,
    pub systems: Vec<SystemScore>,
    pub significance: Vec<SignificanceRow>,
    pub text_quality: Vec<TextQualityRow>,
}

impl Pipeline {
    fn evaluated_systems(&self) -> Vec<(String, String, String)> {
        // (system, run file, producing stage)
        let mut out = vec![("bm25".to_string(), "retrieve.run".to_string(), "retrieve".to_string())];
        for m in &self.cfg.modes {
            out.push((
                format!("teacher-{}", m.as_str()),
                format!("parsed/{}.run", m.as_str()),
                format!("parse:{}", m.as_str()),
            ));
        }
        if self.manifest.stages.contains_key("student_rerank") {
            out.push(("student".into(), "student.run".into(), "student_rerank".into()));
        }
        out
    }

    /// NDCG tables, per-query scores, paired t-tests and reason text quality.
    pub fn cmd_evaluate(&mut self) -> Result<StageStatus> {
        let systems = self.evaluated_systems();
        let with_student = systems.iter().any(|s| s.0 == "student");
        let train_mode = self.cfg.train_mode;
        let mut inputs = vec![Input::External("qrels", self.cfg.qrels.clone())];
        for (_, file, stage) in &systems {
            inputs.push(Input::Stage(stage.clone(), file.clone()));
        }
        if with_student {
            inputs.push(Input::Stage("student_rerank".into(), "student_reasons.jsonl".into()));
            inputs.push(Input::Stage(
                format!("parse:{}", train_mode.as_str()),
                format!("parsed/{}.jsonl", train_mode.as_str()),
            ));
        }
        let settings = vec![
            ("systems", systems.iter().map(|s| s.0.as_str()).collect::<Vec<_>>().join(",")),
            ("cutoffs", "5,10".to_string()),
            ("reason_reference", train_mode.as_str().to_string()),
        ];
        let outputs = [
            "eval/ndcg.csv",
            "eval/per_query.csv",
            "eval/significance.csv",
            "eval/text_quality.csv",
            "eval/summary.json",
        ]
        .map(String::from);
        self.stage("evaluate", settings, inputs, &outputs, |p| {
            p.evaluate_body(&systems, with_student, train_mode)
        })
    }

    fn evaluate_body(
        &mut self,
        systems: &[(String, String, String)],
        with_student: bool,
        train_mode: PromptMode,
    ) -> Result<()> {
        let qrels = corpus_io::load_qrels(&self.cfg.qrels)?;
        let qids: Vec<String> = qrels
            .query_ids()
            .filter(|q| qrels.judged(q).is_some_and(|j| j.values().any(|&g| g > 0)))
            .map(String::from)
            .collect();

        // system -> [report@5, report@10]
        let mut reports: Vec<(String, Vec<MetricReport>)> = Vec::new();
        for (name, file, _) in systems {
            let lists = ranked_lists(&corpus_io::load_run(&self.path(file))?);
            let mut per_k = Vec::new();
            for k in CUTOFFS {
                let mut per_query = Vec::with_capacity(qids.len());
                for q in &qids {
                    let v = match lists.get(q) {
                        Some(l) => ndcg_at_k(&l.doc_ids().collect::<Vec<_>>(), &qrels, q, k)?,
                        None => 0.0,
                    };
                    per_query.push((q.clone(), v));
                }
                per_k.push(MetricReport::new("ndcg", Some(k), per_query));
            }
            reports.push((name.clone(), per_k));
        }

        let mut scores = Vec::new();
        let mut table = Vec::new();
        let mut per_query_rows = Vec::new();
        for (name, per_k) in &reports {
            scores.push(SystemScore {
                system: name.clone(),
                ndcg_at_5: per_k[0].mean,
                ndcg_at_10: per_k[1].mean,
            });
            table.push(vec![name.clone(), per_k[0].mean_percent(), per_k[1].mean_percent()]);
            for (i, q) in qids.iter().enumerate() {
                per_query_rows.push(vec![
                    q.clone(),
                    name.clone(),
                    format!("{:.6}", per_k[0].per_query[i].1),
                    format!("{:.6}", per_k[1].per_query[i].1),
                ]);
            }
        }
        write_csv(&self.path("eval/ndcg.csv"), &["system", "ndcg@5", "ndcg@10"], &table)?;
        write_csv(
            &self.path("eval/per_query.csv"),
            &["query_id", "system", "ndcg@5", "ndcg@10"],
            &per_query_rows,
        )?;

        // Reasoning modes against the no-reasoning prompt; the no-reasoning
        // prompt and the student against BM25.
        let find = |n: &str| reports.iter().find(|(s, _)| s == n);
        let basic = format!("teacher-{}", PromptMode::Basic.as_str());
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        let mode_baseline = if find(&basic).is_some() { basic.as_str() } else { "bm25" };
        for (name, _) in &reports {
            if name.starts_with("teacher-") && name != mode_baseline {
                pairs.push((name, mode_baseline));
            }
        }
        if find(&basic).is_some() {
            pairs.push((basic.as_str(), "bm25"));
        }
        if with_student {
            pairs.push(("student", "bm25"));
        }
        let mut significance = Vec::new();
        if qids.len() >= 2 {
            for (sys, base) in pairs {
                let (a, b) = (&find(sys).expect("listed").1, &find(base).expect("listed").1);
                for (i, k) in CUTOFFS.iter().enumerate() {
                    significance.push(SignificanceRow::compare(
                        sys,
                        base,
                        &format!("ndcg@{k}"),
                        &a[i].aligned(&qids),
                        &b[i].aligned(&qids),
                    )?);
                }
            }
        }
        let sig_rows: Vec<Vec<String>> = significance
            .iter()
            .map(|r| {
                vec![
                    r.system.clone(),
                    r.baseline.clone(),
                    r.metric.clone(),
                    format!("{:.2}", 100.0 * r.mean_system),
                    format!("{:.2}", 100.0 * r.mean_baseline),
                    format!("{:.4}", r.t),
                    r.df.to_string(),
                    format!("{:.4}", r.p_value),
                    r.verdict.clone(),
                ]
            })
            .collect();
        write_csv(
            &self.path("eval/significance.csv"),
            &["system", "baseline", "metric", "mean_system", "mean_baseline", "t", "df", "p_value", "verdict"],
            &sig_rows,
        )?;

        let mut text_quality = Vec::new();
        if with_student {
            let reference = format!("teacher-{}", train_mode.as_str());
            let generated = load_student_reasons(&self.path("student_reasons.jsonl"))?;
            let records: Vec<QueryRecord> =
                read_jsonl(&self.path(&format!("parsed/{}.jsonl", train_mode.as_str())))?;
            let (mut n, mut b_sum, mut r_sum) = (0usize, 0.0, 0.0);
            for rec in &records {
                for (doc, reason) in &rec.reasons {
                    let ref_tokens = tokenize(&reason.text());
                    let Some(gen) = generated.get(&(rec.query_id.clone(), doc.clone())) else {
                        continue;
                    };
                    if ref_tokens.is_empty() {
                        continue;
                    }
                    let cand = tokenize(gen);
                    b_sum += bleu(&cand, &ref_tokens, 4)?;
                    r_sum += rouge_l(&cand, &ref_tokens)?;
                    n += 1;
                }
            }
            if n > 0 {
                text_quality.push(TextQualityRow {
                    system: "student".into(),
                    reference,
                    pairs: n,
                    bleu: b_sum / n as f64,
                    rouge_l: r_sum / n as f64,
                });
            }
        }
        let tq_rows: Vec<Vec<String>> = text_quality
            .iter()
            .map(|r| {
                vec![
                    r.system.clone(),
                    r.reference.clone(),
                    r.pairs.to_string(),
                    format!("{:.4}", r.bleu),
                    format!("{:.4}", r.rouge_l),
                ]
            })
            .collect();
        write_csv(
            &self.path("eval/text_quality.csv"),
            &["system", "reference", "pairs", "bleu", "rouge_l"],
            &tq_rows,
        )?;

        write_json(
            &self.path("eval/summary.json"),
            &EvalSummary {
                queries: qids.len(),
                systems: scores,
                significance,
                text_quality,
            },
        )
    }
}
