//! Run orchestration: select examples, assemble prompts, complete, decode,
//! score, persist one predictions file per seed, and aggregate across seeds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{batch_complete, Backend, ClientError, CompletionConfig};
use crate::codec::{decode, encode, flatten_for_text_metrics, make_stub, CodeFormat, SourceText};
use crate::dataset::{load_dataset, DatasetError};
use crate::graph::{
    EntityTrace, LabeledGraph, StateValue, Structure, TaskInput, TaskInstance, TaskKind,
};
use crate::metrics::{
    bleu, comparable_edges, edge_prf, edge_set, edge_text, g_overlap_score, graph_edit_distance,
    is_isomorphic, propara_prf, rouge_l, structural_accuracy, TokenF1,
};
use crate::prompt::{
    assemble_prompt, sample_examples, Prompt, PromptError, RetrievalIndex, DEFAULT_BUDGET_TOKENS,
};
use crate::pyparse::truncate_at_boundary;

pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("prediction files cover different instances: {0}")]
    SeedMismatch(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    Random,
    Retrieval { index: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendSpec {
    /// Answers with the gold encoding of each test instance.
    Oracle,
    /// Recorded completions keyed by prompt hash.
    Canned(PathBuf),
    /// OpenAI-compatible completions endpoint.
    Remote(String),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "oracle" => Ok(BackendSpec::Oracle),
            Some(("canned", path)) if !path.is_empty() => {
                Ok(BackendSpec::Canned(PathBuf::from(path)))
            }
            Some(("remote", url)) if !url.is_empty() => Ok(BackendSpec::Remote(url.to_string())),
            _ => Err(format!(
                "unknown backend {s:?}; expected oracle, canned:<path> or remote:<url>"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskKind,
    pub format: CodeFormat,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub selection: Selection,
    pub budget_tokens: usize,
    pub backend: BackendSpec,
    pub train: PathBuf,
    pub test: PathBuf,
    pub out: PathBuf,
    /// Request settings for the remote backend; the endpoint comes from
    /// `backend`.
    pub completion: CompletionConfig,
}

/// Flat `key = value` settings; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("line {}: expected key = value", i + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

const CONFIG_KEYS: &[&str] = &[
    "task",
    "format",
    "k",
    "seeds",
    "seed",
    "selection",
    "index",
    "budget",
    "backend",
    "train",
    "test",
    "out",
    "model",
    "max_tokens",
    "temperature",
    "timeout",
    "max_retries",
    "parallelism",
];

impl RunConfig {
    /// Builds a config from key-value settings (config file entries already
    /// overridden by command-line flags).
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self, PipelineError> {
        if let Some(key) = settings.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(PipelineError::Config(format!("unknown key {key:?}")));
        }
        let get = |key: &str| settings.get(key).map(String::as_str);
        let required =
            |key: &str| get(key).ok_or_else(|| PipelineError::Config(format!("missing {key}")));
        fn parsed<T: FromStr>(key: &str, value: &str) -> Result<T, PipelineError>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| PipelineError::Config(format!("{key}: {e}")))
        }
        let task: TaskKind = parsed("task", required("task")?)?;
        let format: CodeFormat = parsed("format", required("format")?)?;
        let seeds: Vec<u64> = match (get("seeds"), get("seed")) {
            (_, Some(one)) => vec![parsed("seed", one)?],
            (Some(list), None) => list
                .split(',')
                .map(|s| parsed("seeds", s.trim()))
                .collect::<Result<_, _>>()?,
            (None, None) => DEFAULT_SEEDS.to_vec(),
        };
        let selection = match get("selection").unwrap_or("random") {
            "random" => Selection::Random,
            "retrieval" => Selection::Retrieval {
                index: PathBuf::from(get("index").ok_or_else(|| {
                    PipelineError::Config("retrieval selection needs index".into())
                })?),
            },
            other => {
                return Err(PipelineError::Config(format!(
                    "selection: unknown value {other:?}"
                )))
            }
        };
        let mut completion = CompletionConfig::default();
        if let Some(v) = get("model") {
            completion.model_name = v.to_string();
        }
        if let Some(v) = get("max_tokens") {
            completion.max_tokens = parsed("max_tokens", v)?;
        }
        if let Some(v) = get("temperature") {
            completion.temperature = parsed("temperature", v)?;
        }
        if let Some(v) = get("timeout") {
            completion.timeout_seconds = parsed("timeout", v)?;
        }
        if let Some(v) = get("max_retries") {
            completion.max_retries = parsed("max_retries", v)?;
        }
        if let Some(v) = get("parallelism") {
            completion.parallelism = parsed("parallelism", v)?;
        }
        let backend: BackendSpec = parsed("backend", get("backend").unwrap_or("oracle"))?;
        if let BackendSpec::Remote(url) = &backend {
            completion.endpoint_url = url.clone();
        }
        let config = RunConfig {
            task,
            format,
            k: parsed("k", required("k")?)?,
            seeds,
            selection,
            budget_tokens: get("budget")
                .map(|v| parsed("budget", v))
                .transpose()?
                .unwrap_or(DEFAULT_BUDGET_TOKENS),
            backend,
            train: PathBuf::from(required("train")?),
            test: PathBuf::from(required("test")?),
            out: PathBuf::from(required("out")?),
            completion,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.seeds.is_empty() {
            return Err(PipelineError::Config(
                "at least one seed is required".into(),
            ));
        }
        if self.k == 0 {
            return Err(PipelineError::Config("k must be positive".into()));
        }
        if !self.format.applies_to(self.task) {
            return Err(PipelineError::Config(format!(
                "format {} does not apply to task {}",
                self.format, self.task
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseStatus {
    Ok,
    Warnings(usize),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub seed: u64,
    /// Absent when no prompt could be assembled.
    pub prompt_sha256: Option<String>,
    pub completion: String,
    pub status: ParseStatus,
    pub decoded: Option<Structure>,
    pub metrics: BTreeMap<String, f64>,
}

impl PredictionRecord {
    pub fn failed(&self) -> bool {
        matches!(self.status, ParseStatus::Failed(_))
    }
}

/// Where the examples for each test instance come from.
pub enum Selector<'a> {
    Random,
    Retrieval(&'a RetrievalIndex),
}

/// Builds the prompt for every test instance under one seed. Random
/// selection draws one example set per seed; retrieval picks per instance
/// and places the most similar example last, next to the stub.
pub fn build_prompts(
    train: &[TaskInstance],
    test: &[TaskInstance],
    selector: &Selector,
    k: usize,
    seed: u64,
    budget: usize,
    format: CodeFormat,
) -> Result<Vec<Result<Prompt, String>>, PipelineError> {
    let pool: Vec<TaskInstance> = train.iter().filter(|x| x.gold.is_some()).cloned().collect();
    let shared = match selector {
        Selector::Random => Some(sample_examples(&pool, k, seed)?),
        Selector::Retrieval(_) => None,
    };
    let by_id: HashMap<&str, &TaskInstance> = pool.iter().map(|x| (x.id.as_str(), x)).collect();
    let mut out = Vec::with_capacity(test.len());
    for instance in test {
        let examples = match (&shared, selector) {
            (Some(examples), _) => examples.clone(),
            (None, Selector::Retrieval(index)) => {
                let mut ids = index.retrieve(&instance.input.text(), k)?;
                ids.reverse();
                ids.iter()
                    .map(|id| {
                        by_id.get(id.as_str()).map(|x| (*x).clone()).ok_or_else(|| {
                            PipelineError::Config(format!(
                                "index entry {id} is not a labeled training instance"
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            (None, Selector::Random) => unreachable!("random selection is shared"),
        };
        let prompt = make_stub(instance, format)
            .map_err(PromptError::from)
            .and_then(|stub| assemble_prompt(&examples, &stub, budget, format))
            .map_err(|e| e.to_string());
        out.push(prompt);
    }
    Ok(out)
}

/// Stub plus completion, cut at the first further top-level declaration.
pub fn full_text(stub: &SourceText, completion: &str) -> SourceText {
    let joined = format!("{}{}", stub.text, completion);
    SourceText::new(truncate_at_boundary(&joined), stub.format)
}

/// Prediction used for scoring when nothing could be decoded.
fn empty_prediction(gold: &Structure) -> Structure {
    match gold {
        Structure::Graph(_) => Structure::Graph(LabeledGraph::new()),
        Structure::Trace(t) => {
            let row = vec![StateValue::Unknown; t.entities().len()];
            let states = vec![row; t.states().len()];
            Structure::Trace(
                EntityTrace::new(t.actions().to_vec(), t.entities().to_vec(), states)
                    .expect("shape copied from gold"),
            )
        }
    }
}

/// Scores `pred` against the gold structure of `instance`.
pub fn score(instance: &TaskInstance, pred: &Structure) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    let Some(gold) = &instance.gold else { return m };
    match (gold, pred) {
        (Structure::Graph(g), Structure::Graph(p)) => {
            let (ge, pe) = comparable_edges(g, p);
            let prf = edge_prf(&ge, &pe);
            m.insert("edge_p".into(), prf.p);
            m.insert("edge_r".into(), prf.r);
            m.insert("edge_f1".into(), prf.f1);
            if let Ok(ged) = graph_edit_distance(p, g) {
                m.insert("ged".into(), ged.raw as f64);
                m.insert("ged_norm".into(), ged.normalized);
            }
            m.insert("pred_nodes".into(), p.nodes.len() as f64);
            m.insert("pred_edges".into(), p.edges.len() as f64);
            match &instance.input {
                TaskInput::Explanation {
                    belief, argument, ..
                } => {
                    let stca = structural_accuracy(p, belief, argument).unwrap_or(false);
                    m.insert("stca".into(), f64::from(u8::from(stca)));
                    let texts = |g: &LabeledGraph| {
                        edge_set(g, true).iter().map(edge_text).collect::<Vec<_>>()
                    };
                    let gbs = g_overlap_score(&texts(g), &texts(p), &TokenF1);
                    m.insert("gbs_p".into(), gbs.p);
                    m.insert("gbs_r".into(), gbs.r);
                    m.insert("gbs_f1".into(), gbs.f1);
                }
                _ => {
                    let iso = if p.nodes.is_empty() {
                        Ok(false)
                    } else {
                        is_isomorphic(p, g)
                    };
                    if let Ok(iso) = iso {
                        m.insert("iso".into(), f64::from(u8::from(iso)));
                    }
                    if let (Ok(pt), Ok(gt)) =
                        (flatten_for_text_metrics(p), flatten_for_text_metrics(g))
                    {
                        m.insert("bleu".into(), bleu(&pt, &gt));
                        m.insert("rouge_l".into(), rouge_l(&pt, &gt));
                    }
                }
            }
        }
        (Structure::Trace(g), Structure::Trace(p)) => {
            let prf = propara_prf(g, p).unwrap_or_default();
            m.insert("state_p".into(), prf.p);
            m.insert("state_r".into(), prf.r);
            m.insert("state_f1".into(), prf.f1);
        }
        _ => return score(instance, &empty_prediction(gold)),
    }
    m
}

fn record_for(
    instance: &TaskInstance,
    seed: u64,
    prompt: &Result<Prompt, String>,
    completion: Option<Result<String, ClientError>>,
) -> PredictionRecord {
    let mut record = PredictionRecord {
        instance_id: instance.id.clone(),
        seed,
        prompt_sha256: prompt
            .as_ref()
            .ok()
            .map(|p| crate::client::prompt_hash(&p.rendered)),
        completion: String::new(),
        status: ParseStatus::Failed(String::new()),
        decoded: None,
        metrics: BTreeMap::new(),
    };
    let outcome = match (prompt, completion) {
        (Err(e), _) => Err(format!("prompt: {e}")),
        (Ok(_), None) => Err("no completion".to_string()),
        (Ok(_), Some(Err(e))) => Err(format!("completion: {e}")),
        (Ok(p), Some(Ok(text))) => {
            record.completion = text.clone();
            decode(&full_text(&p.stub, &text)).map_err(|e| format!("decode: {e}"))
        }
    };
    match outcome {
        Ok(decoded) => {
            let n = decoded.warnings.len();
            record.status = if n == 0 {
                ParseStatus::Ok
            } else {
                ParseStatus::Warnings(n)
            };
            record.metrics = score(instance, &decoded.structure);
            record.decoded = Some(decoded.structure);
        }
        Err(message) => {
            record.status = ParseStatus::Failed(message);
            if let Some(gold) = &instance.gold {
                record.metrics = score(instance, &empty_prediction(gold));
            }
        }
    }
    record
}

/// One seed of the pipeline over in-memory data. Records come back in test
/// order, one per test instance.
pub fn run_seed(
    train: &[TaskInstance],
    test: &[TaskInstance],
    selector: &Selector,
    backend: &Backend,
    config: &RunConfig,
    seed: u64,
) -> Result<Vec<PredictionRecord>, PipelineError> {
    let prompts = build_prompts(
        train,
        test,
        selector,
        config.k,
        seed,
        config.budget_tokens,
        config.format,
    )?;
    let jobs: Vec<(String, Prompt)> = test
        .iter()
        .zip(&prompts)
        .filter_map(|(x, p)| p.as_ref().ok().map(|p| (x.id.clone(), p.clone())))
        .collect();
    let mut completions: HashMap<String, Result<String, ClientError>> =
        batch_complete(backend, &jobs, backend.parallelism())
            .into_iter()
            .collect();
    Ok(test
        .iter()
        .zip(&prompts)
        .map(|(x, p)| record_for(x, seed, p, completions.remove(&x.id)))
        .collect())
}

/// Gold encodings for the oracle backend.
pub fn oracle_backend(test: &[TaskInstance], format: CodeFormat) -> Backend {
    let map = test
        .iter()
        .filter_map(|x| encode(x, format).ok().map(|s| (x.id.clone(), s)))
        .collect();
    Backend::Oracle(map)
}

pub fn open_backend(config: &RunConfig, test: &[TaskInstance]) -> Result<Backend, PipelineError> {
    match &config.backend {
        BackendSpec::Oracle => Ok(oracle_backend(test, config.format)),
        BackendSpec::Canned(path) => {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            Ok(Backend::Canned(
                Backend::read_canned(BufReader::new(file)).map_err(|e| io_err(path, e))?,
            ))
        }
        #[cfg(feature = "remote")]
        BackendSpec::Remote(_) => Ok(Backend::Remote(Box::new(crate::client::RemoteClient::new(
            config.completion.clone(),
        )))),
        #[cfg(not(feature = "remote"))]
        BackendSpec::Remote(_) => Err(ClientError::RemoteUnavailable.into()),
    }
}

pub fn read_index(path: &Path) -> Result<RetrievalIndex, PipelineError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(RetrievalIndex::read_from(BufReader::new(file))?)
}

pub fn predictions_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("predictions.seed{seed}.jsonl"))
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(path, e))?;
        writeln!(w).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PipelineError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub git_describe: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub prediction_files: Vec<PathBuf>,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Runs every seed, writes `predictions.seed<N>.jsonl` files and a
/// `manifest.json` under `config.out`, and returns the records per seed.
pub fn run(config: &RunConfig) -> Result<Vec<Vec<PredictionRecord>>, PipelineError> {
    config.validate()?;
    let started = unix_now();
    let train = load_dataset(&config.train, config.task)?;
    let test = load_dataset(&config.test, config.task)?;
    let index = match &config.selection {
        Selection::Random => None,
        Selection::Retrieval { index } => Some(read_index(index)?),
    };
    let selector = match &index {
        Some(index) => Selector::Retrieval(index),
        None => Selector::Random,
    };
    let backend = open_backend(config, &test)?;
    std::fs::create_dir_all(&config.out).map_err(|e| io_err(&config.out, e))?;
    let mut all = Vec::with_capacity(config.seeds.len());
    let mut files = Vec::new();
    for &seed in &config.seeds {
        let records = run_seed(&train, &test, &selector, &backend, config, seed)?;
        let path = predictions_path(&config.out, seed);
        write_predictions(&path, &records)?;
        files.push(path);
        all.push(records);
    }
    let manifest = Manifest {
        config: config.clone(),
        git_describe: git_describe(),
        started_unix: started,
        finished_unix: unix_now(),
        prediction_files: files,
    };
    let path = config.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation over seeds; 0 for a single seed.
    pub std: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seeds: Vec<u64>,
    pub instance_count: usize,
    pub parse_failure_rate: f64,
    pub metrics: BTreeMap<String, MetricSummary>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Aggregates one record set per seed. Every set must cover the same ids.
pub fn evaluate_records(per_seed: &[Vec<PredictionRecord>]) -> Result<EvalReport, PipelineError> {
    let Some(first) = per_seed.first() else {
        return Err(PipelineError::SeedMismatch("no prediction files".into()));
    };
    let ids = |rs: &[PredictionRecord]| {
        rs.iter()
            .map(|r| r.instance_id.clone())
            .collect::<BTreeSet<_>>()
    };
    let reference = ids(first);
    for (i, records) in per_seed.iter().enumerate() {
        let these = ids(records);
        if these.len() != records.len() {
            return Err(PipelineError::SeedMismatch(format!(
                "file {} repeats an instance id",
                i + 1
            )));
        }
        if these != reference {
            let diff: Vec<_> = these
                .symmetric_difference(&reference)
                .take(3)
                .cloned()
                .collect();
            return Err(PipelineError::SeedMismatch(format!(
                "file {} differs on {}",
                i + 1,
                diff.join(", ")
            )));
        }
    }
    let names: BTreeSet<&String> = per_seed
        .iter()
        .flatten()
        .flat_map(|r| r.metrics.keys())
        .collect();
    let mut metrics = BTreeMap::new();
    for name in names {
        let per_seed_means: Vec<f64> = per_seed
            .iter()
            .map(|rs| {
                let vals: Vec<f64> = rs
                    .iter()
                    .filter_map(|r| r.metrics.get(name).copied())
                    .collect();
                if vals.is_empty() {
                    f64::NAN
                } else {
                    mean(&vals)
                }
            })
            .collect();
        let present: Vec<f64> = per_seed_means
            .iter()
            .copied()
            .filter(|x| !x.is_nan())
            .collect();
        let summary = MetricSummary {
            mean: mean(&present),
            std: sample_std(&present),
            per_seed: per_seed_means,
        };
        metrics.insert(name.clone(), summary);
    }
    let total: usize = per_seed.iter().map(Vec::len).sum();
    let failed = per_seed.iter().flatten().filter(|r| r.failed()).count();
    Ok(EvalReport {
        seeds: per_seed
            .iter()
            .map(|rs| rs.first().map(|r| r.seed).unwrap_or_default())
            .collect(),
        instance_count: reference.len(),
        parse_failure_rate: if total == 0 {
            0.0
        } else {
            failed as f64 / total as f64
        },
        metrics,
    })
}

pub fn evaluate(files: &[PathBuf]) -> Result<EvalReport, PipelineError> {
    let per_seed = files
        .iter()
        .map(|f| read_predictions(f))
        .collect::<Result<Vec<_>, _>>()?;
    evaluate_records(&per_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStyle {
    Table,
    Json,
}

impl FromStr for ReportStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportStyle::Table),
            "json" => Ok(ReportStyle::Json),
            other => Err(format!("unknown report style {other:?}")),
        }
    }
}

/// Metrics in [0, 1] that the table shows as percentages.
const PERCENT_METRICS: &[&str] = &[
    "edge_p", "edge_r", "edge_f1", "ged_norm", "iso", "bleu", "rouge_l", "stca", "gbs_p", "gbs_r",
    "gbs_f1", "state_p", "state_r", "state_f1",
];

pub fn render_report(report: &EvalReport, style: ReportStyle) -> String {
    match style {
        ReportStyle::Json => {
            serde_json::to_string_pretty(report).expect("report serializes") + "\n"
        }
        ReportStyle::Table => {
            let mut out = format!("{:<12} {:>8}   {}\n", "metric", "mean", "std");
            for (name, s) in &report.metrics {
                let scale = if PERCENT_METRICS.contains(&name.as_str()) {
                    100.0
                } else {
                    1.0
                };
                let _ = writeln!(
                    out,
                    "{:<12} {:>8.2} ± {:.2}",
                    name,
                    s.mean * scale,
                    s.std * scale
                );
            }
            if !report.metrics.is_empty() {
                let _ = writeln!(
                    out,
                    "{} instances, {} seeds, parse failures {:.2}%",
                    report.instance_count,
                    report.seeds.len(),
                    report.parse_failure_rate * 100.0
                );
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::synthetic;

    fn config(task: TaskKind, format: CodeFormat) -> RunConfig {
        RunConfig {
            task,
            format,
            k: 3,
            seeds: vec![1, 2],
            selection: Selection::Random,
            budget_tokens: DEFAULT_BUDGET_TOKENS,
            backend: BackendSpec::Oracle,
            train: PathBuf::new(),
            test: PathBuf::new(),
            out: PathBuf::new(),
            completion: CompletionConfig::default(),
        }
    }

    fn record(id: &str, seed: u64, metric: &str, value: f64) -> PredictionRecord {
        PredictionRecord {
            instance_id: id.into(),
            seed,
            prompt_sha256: None,
            completion: String::new(),
            status: ParseStatus::Ok,
            decoded: None,
            metrics: BTreeMap::from([(metric.to_string(), value)]),
        }
    }

    #[test]
    fn oracle_scores_perfectly_on_every_format() {
        for task in [
            TaskKind::ScriptGen,
            TaskKind::EdgePrediction,
            TaskKind::ExplGraph,
            TaskKind::EntityTracking,
        ] {
            let train = synthetic(task, 10, 1, "train");
            let test = synthetic(task, 8, 2, "test");
            for format in CodeFormat::formats_for(task) {
                let cfg = config(task, format);
                let backend = oracle_backend(&test, format);
                let records =
                    run_seed(&train, &test, &Selector::Random, &backend, &cfg, 5).unwrap();
                for r in &records {
                    assert_eq!(
                        r.status,
                        ParseStatus::Ok,
                        "{task} {format} {}",
                        r.instance_id
                    );
                    for (name, v) in &r.metrics {
                        let expected = match name.as_str() {
                            "ged" | "ged_norm" => 0.0,
                            "pred_nodes" | "pred_edges" => continue,
                            _ => 1.0,
                        };
                        assert_eq!(*v, expected, "{task} {format} {name}");
                    }
                }
            }
        }
    }

    #[test]
    fn missing_canned_entry_fails_one_record() {
        let task = TaskKind::ScriptGen;
        let format = CodeFormat::ScriptTree;
        let train = synthetic(task, 5, 1, "train");
        let test = synthetic(task, 4, 2, "test");
        let prompts = build_prompts(
            &train,
            &test,
            &Selector::Random,
            2,
            9,
            DEFAULT_BUDGET_TOKENS,
            format,
        )
        .unwrap();
        let mut canned = HashMap::new();
        for (x, p) in test.iter().zip(&prompts).skip(1) {
            let p = p.as_ref().unwrap();
            let gold = encode(x, format).unwrap();
            let suffix = crate::codec::completion_suffix(&p.stub.text, &gold.text).to_string();
            canned.insert(crate::client::prompt_hash(&p.rendered), suffix);
        }
        let mut cfg = config(task, format);
        cfg.k = 2;
        let records = run_seed(
            &train,
            &test,
            &Selector::Random,
            &Backend::Canned(canned),
            &cfg,
            9,
        )
        .unwrap();
        assert!(records[0].failed());
        assert_eq!(records[0].metrics["edge_f1"], 0.0);
        assert!(records[1..]
            .iter()
            .all(|r| r.status == ParseStatus::Ok && r.metrics["edge_f1"] == 1.0));
    }

    #[test]
    fn seed_means_aggregate_with_sample_std() {
        let files: Vec<Vec<PredictionRecord>> = [10.0, 20.0, 30.0]
            .iter()
            .enumerate()
            .map(|(s, v)| {
                vec![
                    record("a", s as u64, "ged", v - 1.0),
                    record("b", s as u64, "ged", v + 1.0),
                ]
            })
            .collect();
        let report = evaluate_records(&files).unwrap();
        let ged = &report.metrics["ged"];
        assert!((ged.mean - 20.0).abs() < 1e-12);
        assert!((ged.std - 10.0).abs() < 1e-12);
        assert!(
            render_report(&report, ReportStyle::Table).contains("ged             20.00 ± 10.00")
        );
        let json = render_report(&report, ReportStyle::Json);
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), report);
    }

    #[test]
    fn mismatched_ids_are_rejected() {
        let a = vec![record("a", 1, "m", 1.0)];
        let b = vec![record("a", 2, "m", 1.0), record("b", 2, "m", 1.0)];
        assert!(matches!(
            evaluate_records(&[a, b]),
            Err(PipelineError::SeedMismatch(_))
        ));
    }

    #[test]
    fn empty_report_renders_header_only() {
        let report = EvalReport {
            seeds: vec![],
            instance_count: 0,
            parse_failure_rate: 0.0,
            metrics: BTreeMap::new(),
        };
        assert_eq!(
            render_report(&report, ReportStyle::Table).lines().count(),
            1
        );
    }

    #[test]
    fn config_file_and_overrides() {
        let mut settings = parse_config_text(
            "# run\ntask = script-gen\nformat = script-tree\nk = 5  # few\ntrain = a.jsonl\ntest = b.jsonl\nout = o\n",
        )
        .unwrap();
        let cfg = RunConfig::from_settings(&settings).unwrap();
        assert_eq!(cfg.seeds, DEFAULT_SEEDS.to_vec());
        assert_eq!(cfg.backend, BackendSpec::Oracle);
        settings.insert("seed".into(), "42".into());
        settings.insert("selection".into(), "retrieval".into());
        assert!(RunConfig::from_settings(&settings).is_err());
        settings.insert("index".into(), "idx".into());
        let cfg = RunConfig::from_settings(&settings).unwrap();
        assert_eq!(cfg.seeds, vec![42]);
        assert_eq!(
            cfg.selection,
            Selection::Retrieval {
                index: PathBuf::from("idx")
            }
        );
        settings.insert("format".into(), "propara-functions".into());
        assert!(RunConfig::from_settings(&settings).is_err());
    }

    #[test]
    fn retrieval_prompts_follow_neighbours() {
        let task = TaskKind::ScriptGen;
        let mut train = synthetic(task, 30, 4, "train");
        for (i, x) in train.iter_mut().enumerate() {
            let goal = if i % 2 == 0 {
                format!("alpha beta {i}")
            } else {
                format!("gamma delta {i}")
            };
            x.input = TaskInput::Script { goal };
        }
        let index =
            RetrievalIndex::build(train.iter().map(|x| (x.id.clone(), x.input.text()))).unwrap();
        let mut test = synthetic(task, 2, 5, "test");
        test[0].input = TaskInput::Script {
            goal: "alpha beta".into(),
        };
        test[1].input = TaskInput::Script {
            goal: "gamma delta".into(),
        };
        let prompts = build_prompts(
            &train,
            &test,
            &Selector::Retrieval(&index),
            15,
            0,
            1 << 20,
            CodeFormat::ScriptTree,
        )
        .unwrap();
        let p0 = prompts[0].as_ref().unwrap();
        let p1 = prompts[1].as_ref().unwrap();
        assert!(p0.example_ids.iter().all(|id| id
            .trim_start_matches("train-")
            .parse::<usize>()
            .unwrap()
            % 2
            == 0));
        assert!(p1.example_ids.iter().all(|id| id
            .trim_start_matches("train-")
            .parse::<usize>()
            .unwrap()
            % 2
            == 1));
        assert_ne!(
            crate::client::prompt_hash(&p0.rendered),
            crate::client::prompt_hash(&p1.rendered)
        );
    }
}
