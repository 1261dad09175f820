use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reasonrank::config::{PricingConfig, RunConfig};
use reasonrank::pipeline::{Pipeline, PipelineOptions};
use reasonrank::{Error, Result};

/// Reasoning-augmented listwise reranking: BM25 retrieval, teacher reranking
/// through an LLM gateway, student distillation and evaluation.
#[derive(Parser, Debug)]
#[command(name = "reasonrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Run config (`key = value` lines).
    #[arg(long, global = true, default_value = "reasonrank.conf")]
    config: PathBuf,
    /// Parent directory of run directories.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Response cache directory [default: <out>/cache].
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Rerun stages even if their settings changed.
    #[arg(long, global = true)]
    force: bool,
    /// Answer teacher calls from the cache only.
    #[arg(long, global = true)]
    offline: bool,
    #[arg(long, global = true)]
    name: Option<String>,
    #[arg(long, global = true)]
    k1: Option<String>,
    #[arg(long, global = true)]
    b: Option<String>,
    #[arg(long, global = true)]
    topk: Option<String>,
    /// Prompt mode(s), comma separated: basic, explicit, comparison, combined, all.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    window: Option<String>,
    #[arg(long, global = true)]
    stride: Option<String>,
    /// Number of training queries, or `all`.
    #[arg(long, global = true)]
    train_size: Option<String>,
    /// `mock:<script>` or `http`.
    #[arg(long, global = true)]
    gateway: Option<String>,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the inverted index.
    Index,
    /// BM25 top-k per query.
    Retrieve,
    /// Sliding-window teacher reranking for each configured mode.
    TeacherRerank,
    /// Parse teacher responses into rankings, reasons and defect logs.
    Parse,
    /// Duplicate and missing-document rates per mode.
    BehaviorReport,
    /// Distil the student.
    Train,
    /// Rerank first-stage lists with the student.
    StudentRerank,
    /// NDCG, significance tests and reason text quality.
    Evaluate,
    /// Token usage and cost per mode.
    CostReport,
    /// Every stage in order.
    RunAll,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    let cwd = Path::new(".");
    let typed = [
        ("name", &c.name),
        ("k1", &c.k1),
        ("b", &c.b),
        ("topk", &c.topk),
        ("modes", &c.mode),
        ("window", &c.window),
        ("stride", &c.stride),
        ("train_size", &c.train_size),
        ("gateway", &c.gateway),
    ];
    let mut overrides: Vec<(String, String)> = typed
        .iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect();
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    let pricing_before = cfg.pricing_file.clone();
    for (k, v) in overrides {
        cfg.set(&k, &v, cwd)
            .map_err(|m| Error::Config(format!("--{k}: {m}")))?;
    }
    if cfg.pricing_file != pricing_before {
        if let Some(p) = &cfg.pricing_file {
            cfg.pricing = PricingConfig::load(p)?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Pipeline> {
    let cfg = load_config(&cli.common)?;
    let opts = PipelineOptions {
        out_root: cli.common.out.clone(),
        cache_dir: cli.common.cache.clone(),
        force: cli.common.force,
        offline: cli.common.offline,
    };
    let mut p = Pipeline::open(cfg, opts)?;
    let modes = p.config().modes.clone();
    let res = match cli.command {
        Command::Index => p.cmd_index().map(drop),
        Command::Retrieve => p.cmd_retrieve().map(drop),
        Command::TeacherRerank => modes.iter().try_for_each(|&m| p.cmd_teacher_rerank(m).map(drop)),
        Command::Parse => modes.iter().try_for_each(|&m| p.cmd_parse(m).map(drop)),
        Command::BehaviorReport => p.cmd_behavior_report().map(drop),
        Command::Train => p.cmd_train().map(drop),
        Command::StudentRerank => p.cmd_student_rerank().map(drop),
        Command::Evaluate => p.cmd_evaluate().map(drop),
        Command::CostReport => p.cmd_cost_report().map(drop),
        Command::RunAll => p.run_all(),
    };
    for line in &p.log {
        eprintln!("{line}");
    }
    res.map(|()| p)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(p) => {
            let l = p.gateway_ledger();
            if l.requests > 0 || l.cache_hits > 0 {
                eprintln!(
                    "gateway: {} requests, {} cache hits, {} input / {} output tokens, ${:.4}",
                    l.requests, l.cache_hits, l.input_tokens, l.output_tokens, l.cost
                );
            }
            println!("{}", p.run_dir().display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
