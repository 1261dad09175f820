use std::collections::{BTreeMap, HashMap};

use reasonrank_core::prompt::{window_spans, PassageWindow, PromptBuilder, PromptMode, PromptTemplates};
use reasonrank_core::response::{
    analyze_behavior, merge_windows, parse_ranking_response, repair_order, DefectKind, DefectRecord,
    QueryDefects, WindowRanking,
};
use reasonrank_core::usage::{estimate_cost, format_cost, UsageRecord};
use reasonrank_core::{Document, RankedList};
use serde::{Deserialize, Serialize};

use super::{
    fmt_f64, read_jsonl, safe_name, write_csv, write_json, write_jsonl, Input, Pipeline, StageStatus,
};
use crate::config::GatewaySpec;
use crate::corpus_io::{self, ranked_lists, run_entries};
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway, TokenUsage};

/// One teacher call, as listed in `responses/<mode>/windows.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLog {
    pub query_id: String,
    pub window: usize,
    pub start: usize,
    pub doc_ids: Vec<String>,
    pub prompt_file: String,
    pub response_file: String,
    pub cache_key: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocReason {
    pub direct: String,
    pub listwise: String,
}

impl DocReason {
    pub fn text(&self) -> String {
        [self.direct.as_str(), self.listwise.as_str()]
            .iter()
            .filter(|s| !s.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Parsed teacher output for one query: the merged ranking and, per document,
/// the reasons from the last window that showed it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub ranking: Vec<String>,
    pub reasons: BTreeMap<String, DocReason>,
    pub keywords: Vec<String>,
    pub windows: Vec<WindowRanking>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDefectLog {
    #[serde(flatten)]
    pub summary: QueryDefects,
    pub records: Vec<DefectRecord>,
}

struct WindowOutcome {
    window: usize,
    start: usize,
    presented: Vec<String>,
    prompt: String,
    response: String,
    key: String,
    usage: TokenUsage,
}

/// The repaired 1-based order a response implies. A response without JSON
/// keeps the window as shown.
fn window_order(query_id: &str, text: &str, n: usize) -> Vec<usize> {
    let ids: Vec<usize> = (1..=n).collect();
    match parse_ranking_response(query_id, text, &ids) {
        Ok(p) => repair_order(&p.ranking.order, &ids, &ids),
        Err(_) => ids,
    }
}

#[allow(clippy::too_many_arguments)]
fn teacher_query(
    gw: &Gateway,
    builder: &PromptBuilder,
    template: &CompletionRequest,
    mode: PromptMode,
    query: (&str, &str),
    first_stage: &[String],
    docs: &HashMap<String, Document>,
    window: usize,
    stride: usize,
) -> Result<Vec<WindowOutcome>> {
    let (qid, qtext) = query;
    let mut working = first_stage.to_vec();
    let mut out = Vec::new();
    for (w, span) in window_spans(working.len(), window, stride)?.into_iter().enumerate() {
        let presented = working[span.clone()].to_vec();
        let mut pairs = Vec::with_capacity(presented.len());
        for d in &presented {
            let doc = docs
                .get(d)
                .ok_or_else(|| Error::Config(format!("retrieved document {d} is not in the corpus")))?;
            pairs.push((d.as_str(), doc.text.as_str()));
        }
        let pw = PassageWindow::from_slice(qid, span.start, &pairs);
        let prompt = builder.build(qtext, &pw, mode);
        let req = CompletionRequest {
            prompt: prompt.clone(),
            ..template.clone()
        };
        let c = gw.complete(&req)?;
        let order = window_order(qid, &c.text, presented.len());
        let reordered: Vec<String> = order.iter().map(|&i| presented[i - 1].clone()).collect();
        working.splice(span.clone(), reordered);
        out.push(WindowOutcome {
            window: w,
            start: span.start,
            presented,
            prompt,
            response: c.text,
            key: c.key,
            usage: c.usage,
        });
    }
    Ok(out)
}

impl Pipeline {
    fn teacher_stage(mode: PromptMode) -> String {
        format!("teacher_rerank:{}", mode.as_str())
    }

    fn parse_stage(mode: PromptMode) -> String {
        format!("parse:{}", mode.as_str())
    }

    /// Sliding-window teacher reranking of the first-stage lists for one mode.
    pub fn cmd_teacher_rerank(&mut self, mode: PromptMode) -> Result<StageStatus> {
        let c = &self.cfg;
        let mut settings = vec![
            ("mode", mode.as_str().to_string()),
            ("window", c.window.to_string()),
            ("stride", c.stride.to_string()),
            ("passage_tokens", c.passage_tokens.to_string()),
            ("model", c.model.clone()),
            ("temperature", fmt_f64(c.temperature)),
            ("top_p", fmt_f64(c.top_p)),
            ("max_tokens", c.max_tokens.to_string()),
        ];
        let mut inputs = vec![
            Input::Stage("retrieve".into(), "retrieve.run".into()),
            Input::External("corpus", c.corpus.clone()),
            Input::External("queries", c.queries.clone()),
        ];
        match &c.gateway {
            GatewaySpec::Mock(p) => {
                settings.push(("gateway", "mock".into()));
                inputs.push(Input::External("mock_script", p.clone()));
            }
            GatewaySpec::Http => {
                settings.push(("gateway", "http".into()));
                settings.push(("endpoint", c.endpoint.clone()));
            }
        }
        let m = mode.as_str();
        let outputs = [format!("prompts/{m}"), format!("responses/{m}")];
        self.stage(&Self::teacher_stage(mode), settings, inputs, &outputs, |p| {
            p.ensure_gateway()?;
            p.teacher_body(mode)
        })
    }

    fn teacher_body(&mut self, mode: PromptMode) -> Result<()> {
        let lists = ranked_lists(&corpus_io::load_run(&self.path("retrieve.run"))?);
        let queries = self.load_query_map()?;
        let docs = self.load_corpus_map()?;
        let cfg = &self.cfg;
        let builder = PromptBuilder::new(PromptTemplates::default(), cfg.passage_tokens);
        let template = CompletionRequest {
            model: cfg.model.clone(),
            prompt: String::new(),
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            max_tokens: cfg.max_tokens,
        };
        let mut jobs = Vec::new();
        for (qid, list) in &lists {
            let q = queries
                .get(qid)
                .ok_or_else(|| Error::Config(format!("run lists query {qid} missing from the queries file")))?;
            jobs.push((qid.as_str(), q.text.as_str(), list.doc_ids().map(String::from).collect::<Vec<_>>()));
        }
        let gw = self.gateway.as_ref().expect("gateway initialised");
        let results = gw.run_bounded(&jobs, |job| {
            teacher_query(gw, &builder, &template, mode, (job.0, job.1), &job.2, &docs, cfg.window, cfg.stride)
        });

        let m = mode.as_str();
        let mut logs = Vec::new();
        let mut usage_rows = Vec::new();
        let mut total = UsageRecord::default();
        let pricing = cfg.pricing.pricing;
        for (ordinal, ((qid, _, _), res)) in jobs.iter().zip(results).enumerate() {
            for w in res? {
                let stem = format!("{ordinal:04}-{}.w{:02}", safe_name(qid), w.window);
                let prompt_file = format!("prompts/{m}/{stem}.txt");
                let response_file = format!("responses/{m}/{stem}.txt");
                corpus_io::write_file(&self.path(&prompt_file), w.prompt.as_bytes())?;
                corpus_io::write_file(&self.path(&response_file), w.response.as_bytes())?;
                let rec = UsageRecord::new(w.usage.input_tokens, w.usage.output_tokens, 1, &pricing);
                total.add(&rec);
                usage_rows.push(vec![
                    qid.to_string(),
                    w.window.to_string(),
                    w.key.clone(),
                    w.usage.input_tokens.to_string(),
                    w.usage.output_tokens.to_string(),
                    format!("{:.6}", rec.cost),
                ]);
                logs.push(WindowLog {
                    query_id: qid.to_string(),
                    window: w.window,
                    start: w.start,
                    doc_ids: w.presented,
                    prompt_file,
                    response_file,
                    cache_key: w.key,
                    input_tokens: w.usage.input_tokens,
                    output_tokens: w.usage.output_tokens,
                });
            }
        }
        std::fs::create_dir_all(self.path(&format!("prompts/{m}")))
            .map_err(|e| Error::io(self.path("prompts"), e))?;
        write_jsonl(&self.path(&format!("responses/{m}/windows.jsonl")), &logs)?;
        write_csv(
            &self.path(&format!("responses/{m}/usage.csv")),
            &["query_id", "window", "cache_key", "input_tokens", "output_tokens", "cost_usd"],
            &usage_rows,
        )?;
        self.manifest.usage.insert(m.to_string(), total);
        Ok(())
    }

    /// Re-reads the stored responses: parsed records, merged teacher run, defect log.
    pub fn cmd_parse(&mut self, mode: PromptMode) -> Result<StageStatus> {
        let m = mode.as_str();
        let inputs = vec![
            Input::Stage(Self::teacher_stage(mode), format!("responses/{m}")),
            Input::Stage("retrieve".into(), "retrieve.run".into()),
        ];
        let outputs = [
            format!("parsed/{m}.jsonl"),
            format!("parsed/{m}.run"),
            format!("parsed/{m}.defects.jsonl"),
        ];
        self.stage(&Self::parse_stage(mode), vec![("mode", m.into())], inputs, &outputs, |p| {
            p.parse_body(mode)
        })
    }

    fn parse_body(&mut self, mode: PromptMode) -> Result<()> {
        let m = mode.as_str();
        let lists = ranked_lists(&corpus_io::load_run(&self.path("retrieve.run"))?);
        let logs: Vec<WindowLog> = read_jsonl(&self.path(&format!("responses/{m}/windows.jsonl")))?;
        let mut by_query: BTreeMap<&str, Vec<&WindowLog>> = BTreeMap::new();
        for l in &logs {
            by_query.entry(&l.query_id).or_default().push(l);
        }
        let mut records = Vec::new();
        let mut defect_logs = Vec::new();
        let mut run = Vec::new();
        for (qid, list) in &lists {
            let windows = by_query.remove(qid.as_str()).unwrap_or_default();
            let first: Vec<String> = list.doc_ids().map(String::from).collect();
            let mut summary = QueryDefects::new(qid.as_str());
            let mut defect_records = Vec::new();
            let mut reasons: BTreeMap<String, DocReason> = BTreeMap::new();
            let mut keywords: Vec<String> = Vec::new();
            let mut rankings = Vec::new();
            for w in windows {
                let text = std::fs::read_to_string(self.path(&w.response_file))
                    .map_err(|e| Error::io(self.path(&w.response_file), e))?;
                let n = w.doc_ids.len();
                let ids: Vec<usize> = (1..=n).collect();
                let order = match parse_ranking_response(qid, &text, &ids) {
                    Ok(parsed) => {
                        summary.absorb(&parsed.defects);
                        defect_records.extend(DefectRecord::from_defects(qid, w.start, &parsed.defects));
                        let r = &parsed.ranking;
                        for &id in r.direct_reasons.keys().chain(r.listwise_reasons.keys()) {
                            let doc = &w.doc_ids[id - 1];
                            let entry = reasons.entry(doc.clone()).or_default();
                            if let Some(t) = r.direct_reasons.get(&id).filter(|t| !t.is_empty()) {
                                entry.direct = t.clone();
                            }
                            if let Some(t) = r.listwise_reasons.get(&id).filter(|t| !t.is_empty()) {
                                entry.listwise = t.clone();
                            }
                        }
                        for k in &r.keywords {
                            if !keywords.contains(k) {
                                keywords.push(k.clone());
                            }
                        }
                        repair_order(&r.order, &ids, &ids)
                    }
                    Err(_) => {
                        summary.missing_documents += n;
                        defect_records.push(DefectRecord {
                            query_id: qid.clone(),
                            kind: DefectKind::NoJson,
                            detail: format!("window {}: no JSON in response", w.start),
                        });
                        ids
                    }
                };
                rankings.push(WindowRanking {
                    start: w.start,
                    presented: w.doc_ids.clone(),
                    order,
                });
            }
            reasons.retain(|_, r| !r.direct.is_empty() || !r.listwise.is_empty());
            let merged = merge_windows(&rankings, &first)?;
            run.extend(run_entries(
                &RankedList::from_order(qid.as_str(), merged.iter()),
                &format!("teacher-{m}"),
            ));
            records.push(QueryRecord {
                query_id: qid.clone(),
                ranking: merged,
                reasons,
                keywords,
                windows: rankings,
            });
            defect_logs.push(QueryDefectLog {
                summary,
                records: defect_records,
            });
        }
        write_jsonl(&self.path(&format!("parsed/{m}.jsonl")), &records)?;
        corpus_io::write_run(&run, &self.path(&format!("parsed/{m}.run")))?;
        write_jsonl(&self.path(&format!("parsed/{m}.defects.jsonl")), &defect_logs)
    }

    /// Duplicate and missing-document rates per configured mode.
    pub fn cmd_behavior_report(&mut self) -> Result<StageStatus> {
        let modes = self.cfg.modes.clone();
        let inputs = modes
            .iter()
            .map(|&md| {
                Input::Stage(
                    Self::parse_stage(md),
                    format!("parsed/{}.defects.jsonl", md.as_str()),
                )
            })
            .collect();
        let settings = vec![
            ("precision", self.cfg.behavior_precision.to_string()),
            ("modes", modes.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(",")),
        ];
        let outputs = ["eval/behavior.csv".to_string(), "eval/behavior.json".to_string()];
        self.stage("behavior_report", settings, inputs, &outputs, |p| {
            let mut rows = Vec::new();
            let mut json = BTreeMap::new();
            for &md in &modes {
                let logs: Vec<QueryDefectLog> =
                    read_jsonl(&p.path(&format!("parsed/{}.defects.jsonl", md.as_str())))?;
                let summaries: Vec<QueryDefects> = logs.into_iter().map(|l| l.summary).collect();
                let s = analyze_behavior(&summaries, p.cfg.behavior_precision)?;
                rows.push(vec![
                    md.as_str().to_string(),
                    s.query_count.to_string(),
                    s.duplicate_occurrences.to_string(),
                    s.queries_with_duplicates.to_string(),
                    s.duplicate_label(),
                    s.missing_documents.to_string(),
                    s.queries_with_missing.to_string(),
                    s.missing_label(),
                ]);
                json.insert(md.as_str().to_string(), s);
            }
            write_csv(
                &p.path("eval/behavior.csv"),
                &[
                    "mode",
                    "queries",
                    "duplicate_ids",
                    "queries_with_duplicates",
                    "duplicate_rate",
                    "missing_documents",
                    "queries_with_missing",
                    "missing_rate",
                ],
                &rows,
            )?;
            write_json(&p.path("eval/behavior.json"), &json)
        })
    }

    /// Per-mode token usage and cost from the stored usage ledgers, plus the
    /// configured cost profiles.
    pub fn cmd_cost_report(&mut self) -> Result<StageStatus> {
        let modes = self.cfg.modes.clone();
        let inputs = modes
            .iter()
            .map(|&md| {
                Input::Stage(
                    Self::teacher_stage(md),
                    format!("responses/{}/usage.csv", md.as_str()),
                )
            })
            .collect();
        let pc = self.cfg.pricing.clone();
        let mut settings = vec![
            ("input_per_1k", fmt_f64(pc.pricing.input_per_1k)),
            ("output_per_1k", fmt_f64(pc.pricing.output_per_1k)),
        ];
        let profiles = pc
            .profiles
            .iter()
            .map(|p| format!("{}={}/{}", p.mode, p.input_tokens, p.output_tokens))
            .collect::<Vec<_>>()
            .join(",");
        settings.push(("profiles", profiles));
        let outputs = ["eval/cost.csv".to_string(), "eval/cost_profiles.csv".to_string()];
        self.stage("cost_report", settings, inputs, &outputs, |p| {
            let mut rows = Vec::new();
            for &md in &modes {
                let path = p.path(&format!("responses/{}/usage.csv", md.as_str()));
                let mut r = csv::Reader::from_path(&path)
                    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
                let mut queries = std::collections::BTreeSet::new();
                let (mut input, mut output, mut requests) = (0u64, 0u64, 0u64);
                for rec in r.records() {
                    let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
                    let field = |i: usize| -> Result<u64> {
                        rec.get(i)
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| Error::Format(format!("{}: bad token count", path.display())))
                    };
                    queries.insert(rec.get(0).unwrap_or_default().to_string());
                    input += field(3)?;
                    output += field(4)?;
                    requests += 1;
                }
                let total = estimate_cost(input as i64, output as i64, &pc.pricing)?;
                let nq = queries.len().max(1) as f64;
                rows.push(vec![
                    md.as_str().to_string(),
                    queries.len().to_string(),
                    requests.to_string(),
                    input.to_string(),
                    output.to_string(),
                    format!("{:.1}", (input + output) as f64 / nq),
                    format_cost(total / nq),
                    format_cost(total),
                ]);
            }
            write_csv(
                &p.path("eval/cost.csv"),
                &[
                    "mode",
                    "queries",
                    "requests",
                    "input_tokens",
                    "output_tokens",
                    "avg_tokens_per_query",
                    "avg_cost_per_query",
                    "total_cost",
                ],
                &rows,
            )?;
            let profile_rows: Vec<Vec<String>> = pc
                .profiles
                .iter()
                .map(|pr| {
                    let cost = estimate_cost(pr.input_tokens as i64, pr.output_tokens as i64, &pc.pricing)
                        .unwrap_or(0.0);
                    vec![
                        pr.mode.clone(),
                        pr.input_tokens.to_string(),
                        pr.output_tokens.to_string(),
                        (pr.input_tokens + pr.output_tokens).to_string(),
                        format_cost(cost),
                    ]
                })
                .collect();
            write_csv(
                &p.path("eval/cost_profiles.csv"),
                &["mode", "input_tokens", "output_tokens", "total_tokens", "cost_per_query"],
                &profile_rows,
            )
        })
    }
}
