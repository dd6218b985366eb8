use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use graphcode::codec::{decode, encode, make_stub, CodeFormat, SourceText};
use graphcode::dataset::{dataset_to_jsonl, instance_from_structure, load_dataset};
use graphcode::graph::TaskKind;
use graphcode::pipeline::{
    build_prompts, evaluate, parse_config_text, render_report, run, ReportStyle, RunConfig,
    Selector,
};
use graphcode::prompt::{mean_kst_loss, RetrievalIndex, DEFAULT_BUDGET_TOKENS};
use graphcode::samples::synthetic;

#[derive(Parser)]
#[command(
    name = "graphcode",
    version,
    about = "Graphs as code for few-shot structure prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Values given here override the
/// config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// Flat `key = value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// A single seed; `seeds = 1,2,3` in the config file gives several.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// oracle, canned:<path> or remote:<url>
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a JSONL dataset into code files, or decode a directory of
    /// code files back into JSONL.
    Convert {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the assembled prompt for one test instance.
    Prompt {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Test instance id; defaults to the first one.
        #[arg(long)]
        id: Option<String>,
        /// Retrieval index; random selection when absent.
        #[arg(long)]
        index: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Build a retrieval index over the training inputs.
    Index {
        #[arg(long)]
        train: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the full pipeline and write one predictions file per seed.
    Run {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        selection: Option<String>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate prediction files (one per seed) into a report.
    Evaluate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value = "table")]
        style: String,
        #[command(flatten)]
        common: Common,
    },
    /// Write a reproducible synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value = "synth")]
        prefix: String,
        #[command(flatten)]
        common: Common,
    },
}

/// Config-file entries with command-line values layered on top.
fn settings(common: &Common, extra: &[(&str, Option<String>)]) -> Result<BTreeMap<String, String>> {
    let mut map = match &common.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let flags = [
        ("task", common.task.clone()),
        ("format", common.format.clone()),
        ("k", common.k.map(|v| v.to_string())),
        ("seed", common.seed.map(|v| v.to_string())),
        ("budget", common.budget.map(|v| v.to_string())),
        ("backend", common.backend.clone()),
        ("out", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags
        .into_iter()
        .chain(extra.iter().map(|(k, v)| (*k, v.clone())))
    {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    }
    Ok(map)
}

fn path_arg(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn need<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .with_context(|| format!("--{key} is required"))
}

fn task_and_format(map: &BTreeMap<String, String>) -> Result<(TaskKind, CodeFormat)> {
    let task: TaskKind = need(map, "task")?.parse().map_err(anyhow::Error::msg)?;
    let format: CodeFormat = need(map, "format")?.parse().map_err(anyhow::Error::msg)?;
    if !format.applies_to(task) {
        bail!("format {format} does not apply to task {task}");
    }
    Ok((task, format))
}

fn parse_num<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    match map.get(key) {
        Some(v) => v.parse().with_context(|| format!("--{key}")),
        None => Ok(default),
    }
}

fn convert(input: &Path, common: &Common) -> Result<()> {
    let map = settings(common, &[])?;
    let (task, format) = task_and_format(&map)?;
    let out = PathBuf::from(need(&map, "out")?);
    if input.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(input)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        files.retain(|p| p.extension().and_then(|e| e.to_str()) == Some(format.extension()));
        files.sort();
        let mut instances = Vec::with_capacity(files.len());
        for path in files {
            let text = fs::read_to_string(&path)?;
            let decoded = decode(&SourceText::new(text, format))
                .with_context(|| path.display().to_string())?;
            for w in &decoded.warnings {
                eprintln!("{}:{}:{}: {}", path.display(), w.line, w.column, w.message);
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("instance");
            instances.push(
                instance_from_structure(id, task, decoded.structure).map_err(anyhow::Error::msg)?,
            );
        }
        fs::write(&out, dataset_to_jsonl(&instances))?;
        eprintln!("wrote {} instances to {}", instances.len(), out.display());
    } else {
        let instances = load_dataset(input, task)?;
        fs::create_dir_all(&out)?;
        for x in &instances {
            let source = if x.gold.is_some() {
                encode(x, format)?
            } else {
                make_stub(x, format)?
            };
            fs::write(
                out.join(format!("{}.{}", x.id, format.extension())),
                source.text,
            )?;
        }
        eprintln!("wrote {} files to {}", instances.len(), out.display());
    }
    Ok(())
}

fn prompt(
    train: &Option<PathBuf>,
    test: &Option<PathBuf>,
    id: &Option<String>,
    index: &Option<PathBuf>,
    common: &Common,
) -> Result<()> {
    let map = settings(
        common,
        &[
            ("train", path_arg(train)),
            ("test", path_arg(test)),
            ("index", path_arg(index)),
        ],
    )?;
    let (task, format) = task_and_format(&map)?;
    let train = load_dataset(Path::new(need(&map, "train")?), task)?;
    let test = load_dataset(Path::new(need(&map, "test")?), task)?;
    let target: Vec<_> = match id {
        Some(id) => test.into_iter().filter(|x| &x.id == id).collect(),
        None => test.into_iter().take(1).collect(),
    };
    if target.is_empty() {
        bail!("no matching test instance");
    }
    let loaded = match map.get("index") {
        Some(path) => Some(graphcode::pipeline::read_index(Path::new(path))?),
        None => None,
    };
    let selector = loaded
        .as_ref()
        .map_or(Selector::Random, Selector::Retrieval);
    let k = parse_num(&map, "k", 3)?;
    let seed = parse_num(&map, "seed", 1u64)?;
    let budget = parse_num(&map, "budget", DEFAULT_BUDGET_TOKENS)?;
    let prompt = build_prompts(&train, &target, &selector, k, seed, budget, format)?
        .pop()
        .expect("one prompt per target")
        .map_err(anyhow::Error::msg)?;
    match map.get("out") {
        Some(path) => fs::write(path, &prompt.rendered)?,
        None => print!("{}", prompt.rendered),
    }
    eprintln!(
        "{} examples ({} dropped for budget)",
        prompt.examples.len(),
        prompt.dropped
    );
    Ok(())
}

fn index(train: &Option<PathBuf>, common: &Common) -> Result<()> {
    let map = settings(common, &[("train", path_arg(train))])?;
    let task: TaskKind = need(&map, "task")?.parse().map_err(anyhow::Error::msg)?;
    let instances = load_dataset(Path::new(need(&map, "train")?), task)?;
    let index = RetrievalIndex::build(instances.iter().map(|x| (x.id.clone(), x.input.text())))?;
    let out = PathBuf::from(need(&map, "out")?);
    let mut w = BufWriter::new(fs::File::create(&out)?);
    index.write_to(&mut w)?;
    w.flush()?;
    eprintln!(
        "indexed {} instances over {} terms",
        index.len(),
        index.vocabulary().len()
    );
    if let Some(loss) = mean_kst_loss(&index, &instances)? {
        eprintln!("mean KST loss {loss:.4}");
    }
    Ok(())
}

fn run_cmd(
    train: &Option<PathBuf>,
    test: &Option<PathBuf>,
    selection: &Option<String>,
    index: &Option<PathBuf>,
    common: &Common,
) -> Result<()> {
    let map = settings(
        common,
        &[
            ("train", path_arg(train)),
            ("test", path_arg(test)),
            ("selection", selection.clone()),
            ("index", path_arg(index)),
        ],
    )?;
    let config = RunConfig::from_settings(&map)?;
    let per_seed = run(&config)?;
    for (seed, records) in config.seeds.iter().zip(&per_seed) {
        let failed = records.iter().filter(|r| r.failed()).count();
        eprintln!("seed {seed}: {} records, {failed} failed", records.len());
    }
    eprintln!("wrote {}", config.out.display());
    Ok(())
}

fn evaluate_cmd(files: &[PathBuf], style: &str, common: &Common) -> Result<()> {
    let map = settings(common, &[])?;
    let style: ReportStyle = style.parse().map_err(anyhow::Error::msg)?;
    let report = evaluate(files)?;
    let text = render_report(&report, style);
    match map.get("out") {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn synth(n: usize, prefix: &str, common: &Common) -> Result<()> {
    let map = settings(common, &[])?;
    let task: TaskKind = need(&map, "task")?.parse().map_err(anyhow::Error::msg)?;
    let seed = parse_num(&map, "seed", 0u64)?;
    let text = dataset_to_jsonl(&synthetic(task, n, seed, prefix));
    match map.get("out") {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Convert { input, common } => convert(input, common),
        Command::Prompt {
            train,
            test,
            id,
            index,
            common,
        } => prompt(train, test, id, index, common),
        Command::Index { train, common } => index(train, common),
        Command::Run {
            train,
            test,
            selection,
            index,
            common,
        } => run_cmd(train, test, selection, index, common),
        Command::Evaluate {
            files,
            style,
            common,
        } => evaluate_cmd(files, style, common),
        Command::Synth { n, prefix, common } => synth(*n, prefix, common),
    }
}
