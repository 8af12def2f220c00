use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vidthinker::domain::load_qa_file;
use vidthinker::eval::{compare_policies, timing_report};
use vidthinker::features::{load_features, normalize, FrameFeatureSet};
use vidthinker::keyframe::{extract_keyframes, KeyframeParams, DEFAULT_T1, DEFAULT_T2};
use vidthinker::pipeline::{
    annotate_batch, load_manifest, read_annotations, to_sorted_json, write_annotations, write_jsonl, AnnotateConfig,
    DEFAULT_SAMPLE_FPS, DEFAULT_WORKERS,
};
use vidthinker::reasoner::{HttpBackend, MockBackend, MockScenario, ReasonerBackend, ReasonerClient, ENDPOINT_ENV};
use vidthinker::sampler::{DEFAULT_BUDGET, DEFAULT_RATE_FPS};
use vidthinker::selector::{
    score_by_query_similarity, score_frames_remote, select_topk, select_uniform, HttpScorer, Policy, RelevanceScores,
    SelectionRecord,
};
use vidthinker::taxonomy::{classify, probe_signals, RetrievalSignal};

#[derive(Parser)]
#[command(name = "vidthinker", version, about = "Instruction-guided temporal grounding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print keyframe indices, one per line.
    Keyframes {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = DEFAULT_T1, allow_hyphen_values = true)]
        t1: f64,
        #[arg(long, default_value_t = DEFAULT_T2, allow_hyphen_values = true)]
        t2: f64,
        #[arg(long)]
        lookahead: Option<usize>,
    },
    /// Print the instruction type of every QA pair, one per line.
    Classify {
        #[arg(long)]
        qa: PathBuf,
        #[command(flatten)]
        reasoner: ReasonerArgs,
    },
    /// Annotate every (video, QA) pair listed in a manifest.
    Annotate(AnnotateArgs),
    /// Select k frames by relevance or uniformly.
    Select(SelectArgs),
    /// Compare Top-k predictions and Uni-k against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        k: usize,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReasonerArgs {
    /// `mock:<scenario.json>` or `http:<url>`; defaults to $VIDTHINKER_REASONER_URL.
    #[arg(long)]
    reasoner: Option<String>,
    /// Cap on in-flight reasoner calls.
    #[arg(long, default_value_t = 8)]
    max_parallel: usize,
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    reasoner: ReasonerArgs,
    #[arg(long, default_value_t = 5.0)]
    clip_seconds: f64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = DEFAULT_RATE_FPS)]
    rate_fps: f64,
    /// Fixed frame stride for motion sampling, overriding --rate-fps.
    #[arg(long)]
    stride: Option<usize>,
    /// Rate of the feature rows when the manifest has no fourth column.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_FPS)]
    sample_fps: f64,
    #[arg(long, default_value_t = DEFAULT_WORKERS)]
    workers: usize,
    /// Failure records; defaults to <out>.failures.jsonl.
    #[arg(long)]
    failures: Option<PathBuf>,
    /// Also write reasoner exchanges and stage timings to <out>.trace.jsonl
    /// and print a per-stage timing table.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    features: PathBuf,
    /// JSON list of per-frame scores, or {"scores": [...]}.
    #[arg(long, group = "scoring")]
    scores: Option<PathBuf>,
    /// Feature file whose first row is the query embedding.
    #[arg(long, group = "scoring")]
    query_embedding: Option<PathBuf>,
    /// `http:<url>` of a frame-scoring service.
    #[arg(long, group = "scoring")]
    scorer: Option<String>,
    /// Question sent to a remote scorer.
    #[arg(long, default_value = "")]
    question: String,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    k: usize,
    #[arg(long, default_value = "topk")]
    policy: Policy,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn client(args: &ReasonerArgs) -> Result<ReasonerClient> {
    let spec = match &args.reasoner {
        Some(s) => s.clone(),
        None => format!(
            "http:{}",
            std::env::var(ENDPOINT_ENV).with_context(|| format!("--reasoner not given and {ENDPOINT_ENV} unset"))?
        ),
    };
    let backend: Arc<dyn ReasonerBackend> = if let Some(path) = spec.strip_prefix("mock:") {
        let scenario = MockScenario::load(path).with_context(|| format!("loading scenario {path}"))?;
        Arc::new(MockBackend::new(scenario))
    } else if let Some(url) = spec.strip_prefix("http:") {
        Arc::new(HttpBackend::new(url))
    } else {
        bail!("reasoner must be mock:<file> or http:<url>, got {spec:?}");
    };
    Ok(ReasonerClient::new(backend).with_max_parallelism(args.max_parallel))
}

/// Anchor-pools grids and rescales rows to unit length when needed.
fn unit_features(set: &FrameFeatureSet) -> Result<FrameFeatureSet> {
    let pooled = set.anchor_pooled()?;
    Ok(if pooled.is_normalized() { pooled } else { normalize(&pooled)? })
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_keyframes(features: &Path, t1: f64, t2: f64, lookahead: Option<usize>) -> Result<()> {
    let set = unit_features(&load_features(features)?)?;
    let params = KeyframeParams::new(t1, t2)?.with_lookahead(lookahead);
    for i in extract_keyframes(&set, &params)? {
        println!("{i}");
    }
    Ok(())
}

fn run_classify(qa: &Path, reasoner: &ReasonerArgs) -> Result<()> {
    let client = client(reasoner)?;
    for pair in load_qa_file(qa)? {
        let signals = probe_signals(&client, &pair, RetrievalSignal::NotRun, &mut Vec::new())
            .with_context(|| format!("classifying {}", pair.qa_id))?;
        println!("{}", classify(&signals));
    }
    Ok(())
}

fn run_annotate(a: &AnnotateArgs) -> Result<()> {
    let client = client(&a.reasoner)?;
    let config = AnnotateConfig {
        clip_seconds: a.clip_seconds,
        budget: a.budget,
        rate_fps: a.rate_fps,
        stride: a.stride,
        sample_fps: a.sample_fps,
        workers: a.workers,
    };
    let (entries, mut failures) = load_manifest(&a.manifest)?;
    let out = annotate_batch(&entries, &config, &client)?;
    failures.extend(out.failures);
    failures.sort();
    write_annotations(&a.out, &out.annotations)?;
    let failure_path = a.failures.clone().unwrap_or_else(|| sidecar(&a.out, ".failures.jsonl"));
    write_jsonl(&failure_path, &failures)?;
    if a.trace {
        write_jsonl(sidecar(&a.out, ".trace.jsonl"), &out.traces)?;
        let mut totals: Vec<(String, f64)> = Vec::new();
        for (stage, secs) in out.traces.iter().flat_map(|t| &t.timings_s) {
            match totals.iter_mut().find(|(name, _)| name == stage.as_str()) {
                Some(entry) => entry.1 += secs,
                None => totals.push((stage.to_string(), *secs)),
            }
        }
        eprint!("{}", timing_report(&totals)?);
    }
    eprintln!("{} annotations, {} failures", out.annotations.len(), failures.len());
    Ok(())
}

fn read_scores(path: &Path) -> Result<RelevanceScores> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let list = value.get("scores").cloned().unwrap_or(value);
    serde_json::from_value(list).with_context(|| format!("{}: expected a list of finite numbers", path.display()))
}

fn run_select(a: &SelectArgs) -> Result<()> {
    let features = load_features(&a.features)?;
    let result = match a.policy {
        Policy::UniformK => select_uniform(features.frame_count(), a.k)?,
        Policy::TopK => {
            let scores = if let Some(p) = &a.scores {
                read_scores(p)?
            } else if let Some(q) = &a.query_embedding {
                let query = load_features(q)?.anchor_pooled()?;
                if query.frame_count() == 0 {
                    bail!("{} has no rows", q.display());
                }
                score_by_query_similarity(&features.anchor_pooled()?, query.row(0))?
            } else if let Some(s) = &a.scorer {
                let url = s.strip_prefix("http:").context("--scorer must be http:<url>")?;
                score_frames_remote(&features, &a.question, &HttpScorer::new(url))?
            } else {
                bail!("topk needs one of --scores, --query-embedding, --scorer");
            };
            if scores.len() != features.frame_count() {
                bail!("{} scores for {} frames", scores.len(), features.frame_count());
            }
            select_topk(&scores, a.k)?
        }
    };
    let record = SelectionRecord::new(features.video_id(), result);
    write_or_print(a.out.as_deref(), &(to_sorted_json(&record)? + "\n"))
}

fn run_eval(pred: &Path, gt: &Path, k: usize, report: Option<&Path>, json: Option<&Path>) -> Result<()> {
    let r = compare_policies(&read_annotations(pred)?, &read_annotations(gt)?, k)?;
    write_or_print(report, &r.to_text())?;
    if let Some(j) = json {
        std::fs::write(j, r.to_json()?)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Keyframes { features, t1, t2, lookahead } => run_keyframes(&features, t1, t2, lookahead),
        Command::Classify { qa, reasoner } => run_classify(&qa, &reasoner),
        Command::Annotate(a) => run_annotate(&a),
        Command::Select(a) => run_select(&a),
        Command::Eval { pred, gt, k, report, json } => run_eval(&pred, &gt, k, report.as_deref(), json.as_deref()),
    }
}
