use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fairwalk::config::{ExperimentConfig, Preset};
use fairwalk::crosswalk;
use fairwalk::embed::{self, EmbedConfig, EmbeddingMatrix, TrainMode};
use fairwalk::eval::{self, EvalConfig};
use fairwalk::graph::{self, AttributedGraph, GroupPartition, LoadOptions};
use fairwalk::propagation::Bandwidth;
use fairwalk::sbm::{self, ControlSpec, SbmSpec};
use fairwalk::sweep::{self, SweepSpec};
use fairwalk::walk::{self, WalkConfig, WalkSource};
use fairwalk::weights::OutWeights;

#[derive(Parser)]
#[command(name = "fairwalk", version, about = "Group-aware node embeddings and fairness metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for one configuration.
    Run(RunArgs),
    /// Run a hyperparameter sweep into a resumable CSV table.
    Sweep(SweepArgs),
    /// Aggregate a sweep table into summary JSON.
    Summarize(SummarizeArgs),
    /// Generate a stochastic block model graph.
    GenSbm(GenSbmArgs),
    /// Write boundary-aware transition weights for a graph.
    Bias(BiasArgs),
    /// Generate a walk corpus.
    Walk(WalkArgs),
    /// Train skip-gram embeddings from a walk corpus.
    Embed(EmbedArgs),
    /// Evaluate embeddings with label propagation.
    Eval(EvalArgs),
}

/// Flags shared by `run` and `sweep`; each overrides the config file.
#[derive(Args)]
struct ConfigArgs {
    /// Flat JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sensitive: Option<String>,
    #[arg(long)]
    control: Option<String>,
    /// Any other config field, as `key=value` (value parsed as JSON).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{kv}`");
            };
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(p) = self.preset {
            cfg = cfg.with_preset(p);
        }
        if self.alpha.is_some() || self.beta.is_some() {
            cfg.intervention = fairwalk::Intervention::Crosswalk;
            cfg.preset = None;
        }
        cfg.alpha = self.alpha.or(cfg.alpha);
        cfg.beta = self.beta.or(cfg.beta);
        cfg.p = self.p.unwrap_or(cfg.p);
        cfg.q = self.q.unwrap_or(cfg.q);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        if let Some(s) = &self.sensitive {
            cfg.sensitive = s.clone();
        }
        if let Some(c) = &self.control {
            cfg.control = Some(c.clone());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for report.json, report.csv, embeddings.txt, pca.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Sweep spec JSON; omitted means the base config only.
    #[arg(long, conflicts_with = "full_grid")]
    spec: Option<PathBuf>,
    /// Use the full alpha/beta/p/q grid with baselines.
    #[arg(long)]
    full_grid: bool,
    /// Add a named preset to the sweep (repeatable).
    #[arg(long = "add-preset")]
    add_preset: Vec<Preset>,
    #[arg(long)]
    cap: Option<usize>,
    /// Print the expansion and exit.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = 5)]
    buckets: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenSbmArgs {
    /// Comma-separated block sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    blocks: Vec<usize>,
    #[arg(long)]
    p_intra: f64,
    #[arg(long)]
    p_inter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "location")]
    block_attribute: String,
    /// Comma-separated control class probabilities.
    #[arg(long, value_delimiter = ',')]
    control_probs: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    control_bonus: f64,
    #[arg(long, default_value = "control")]
    control_name: String,
    #[arg(long)]
    out_edges: PathBuf,
    #[arg(long)]
    out_attrs: PathBuf,
    /// Write the graph summary JSON here instead of stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct GraphInput {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    attrs: PathBuf,
    #[arg(long)]
    age_column: Option<String>,
}

impl GraphInput {
    fn load(&self) -> Result<AttributedGraph> {
        let opts = LoadOptions {
            age_column: self.age_column.clone(),
        };
        Ok(graph::load_graph_with(&self.edges, &self.attrs, &opts)?.0)
    }
}

#[derive(Args)]
struct BiasArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long)]
    sensitive: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = crosswalk::DEFAULT_CLOSENESS_WALKS)]
    closeness_walks: usize,
    #[arg(long, default_value_t = crosswalk::DEFAULT_CLOSENESS_LENGTH)]
    closeness_length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long, requires = "attrs")]
    edges: Option<PathBuf>,
    #[arg(long)]
    attrs: Option<PathBuf>,
    /// Directed weight file written by `bias`.
    #[arg(long, conflicts_with = "edges")]
    biased: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = walk::DEFAULT_WALKS_PER_NODE)]
    walks_per_node: usize,
    #[arg(long, default_value_t = walk::DEFAULT_WALK_LENGTH)]
    walk_length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lock-free multi-threaded training (not reproducible).
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Attribute file; rows are matched to embeddings by node ID.
    #[arg(long)]
    attrs: PathBuf,
    #[arg(long)]
    sensitive: String,
    #[arg(long)]
    control: Option<String>,
    #[arg(long, default_value_t = 25)]
    folds: usize,
    #[arg(long, default_value_t = 0.5)]
    labeled_fraction: f64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let report = fairwalk::run_experiment(&cfg, &args.out)?;
    let ev = &report.evaluation;
    println!(
        "awareness={:.4} disparity={:.6} performance={}",
        ev.awareness,
        ev.disparity,
        ev.performance.map_or("-".into(), |p| format!("{p:.4}"))
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let base = args.config.load()?;
    let mut spec = match (&args.spec, args.full_grid) {
        (Some(p), _) => SweepSpec::from_file(p)?,
        (None, true) => SweepSpec::full_grid(),
        (None, false) => SweepSpec::default(),
    };
    spec.presets.extend(args.add_preset.iter().copied());
    if let Some(cap) = args.cap {
        spec.cap = cap;
    }
    let configs = spec.expand(&base)?;
    let crosswalk = configs
        .iter()
        .filter(|c| c.intervention == fairwalk::Intervention::Crosswalk)
        .count();
    println!("planned {} runs: {} crosswalk, {} baseline", configs.len(), crosswalk, configs.len() - crosswalk);
    if args.dry_run {
        return Ok(());
    }
    let outcome = sweep::run_sweep(&spec, &base, &args.out)?;
    println!(
        "computed {} (failed {}), skipped {} already in {}",
        outcome.computed,
        outcome.failed,
        outcome.skipped,
        args.out.display()
    );
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<()> {
    let rows = sweep::read_table(&args.table)?;
    let summary = sweep::summarize(&rows, args.buckets)?;
    write_or_print(args.out.as_deref(), &serde_json::to_string_pretty(&summary)?)
}

fn cmd_gen_sbm(args: GenSbmArgs) -> Result<()> {
    let mut spec = SbmSpec::new(args.blocks, args.p_intra, args.p_inter, args.seed);
    spec.block_attribute = args.block_attribute;
    if !args.control_probs.is_empty() {
        spec = spec.with_control(ControlSpec {
            name: args.control_name,
            class_probs: args.control_probs,
            intra_bonus: args.control_bonus,
        });
    }
    let (g, out) = sbm::generate_sbm(&spec)?;
    g.write_edges(&args.out_edges)?;
    g.write_attributes(&args.out_attrs)?;
    write_or_print(args.summary.as_deref(), &serde_json::to_string_pretty(&out)?)
}

fn cmd_bias(args: BiasArgs) -> Result<()> {
    let g = args.input.load()?;
    let part = graph::partition_by(&g, &args.sensitive)?;
    let m = crosswalk::estimate_closeness(&g, &part, args.closeness_walks, args.closeness_length, args.seed)?;
    let biased = crosswalk::reweight(&g, &part, &m, args.alpha, args.beta)?;
    biased.write(g.node_ids(), &args.out)?;
    Ok(())
}

fn cmd_walk(args: WalkArgs) -> Result<()> {
    let (names, weights, source) = match (&args.biased, &args.edges, &args.attrs) {
        (Some(path), _, _) => {
            let (names, w) = OutWeights::read(path)?;
            (names, w, WalkSource::Crosswalk { alpha: f64::NAN, beta: f64::NAN })
        }
        (None, Some(e), Some(a)) => {
            let g = graph::load_graph(e, a)?;
            (g.node_ids().to_vec(), OutWeights::normalized(&g), WalkSource::Baseline)
        }
        _ => bail!("walk needs --biased or --edges with --attrs"),
    };
    let cfg = WalkConfig {
        p: args.p,
        q: args.q,
        walks_per_node: args.walks_per_node,
        walk_length: args.walk_length,
        seed: args.seed,
    };
    let corpus = walk::generate_walks(&weights, &cfg, source)?;
    corpus.write(&names, &args.out)?;
    Ok(())
}

fn cmd_embed(args: EmbedArgs) -> Result<()> {
    let (names, walks) = walk::read_walks(&args.corpus)?;
    let cfg = EmbedConfig {
        dim: args.dim,
        window: args.window,
        negatives: args.negatives,
        epochs: args.epochs,
        lr: args.lr,
        seed: args.seed,
        mode: if args.parallel { TrainMode::Parallel } else { TrainMode::Exact },
    };
    let m = embed::train(&walks, names.len(), &cfg)?;
    m.write(&names, &args.out)?;
    if let Some(meta) = &m.meta {
        eprintln!("epoch losses: {:?}", meta.epoch_loss);
    }
    Ok(())
}

/// Reads attribute columns keyed by node ID, in embedding row order.
fn attribute_for(names: &[String], attrs: &Path, column: &str) -> Result<GroupPartition> {
    let text = fs::read_to_string(attrs).with_context(|| format!("reading {}", attrs.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().context("attribute file is empty")?.split('\t').collect();
    let col = header
        .iter()
        .skip(1)
        .position(|h| *h == column)
        .with_context(|| format!("attribute `{column}` not in header"))?
        + 1;
    let mut by_node = HashMap::new();
    for line in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if let (Some(id), Some(v)) = (fields.first(), fields.get(col)) {
            by_node.insert(id.to_string(), v.to_string());
        }
    }
    let values = names
        .iter()
        .map(|n| by_node.get(n).cloned().with_context(|| format!("node `{n}` has no `{column}` value")))
        .collect::<Result<Vec<_>>>()?;
    Ok(graph::partition_values(column, &values)?)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (names, m): (Vec<String>, EmbeddingMatrix) = EmbeddingMatrix::read(&args.embeddings)?;
    let sensitive = attribute_for(&names, &args.attrs, &args.sensitive)?;
    let control = match &args.control {
        Some(c) => Some(attribute_for(&names, &args.attrs, c)?),
        None => None,
    };
    let cfg = EvalConfig {
        folds: args.folds,
        labeled_fraction: args.labeled_fraction,
        k: args.k,
        bandwidth: args.sigma.map_or(Bandwidth::Auto, Bandwidth::Fixed),
        seed: args.seed,
        ..Default::default()
    };
    let report = eval::cross_validate(&m.input, m.dim, &sensitive, control.as_ref(), &cfg)?;
    write_or_print(args.out.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::GenSbm(a) => cmd_gen_sbm(a),
        Command::Bias(a) => cmd_bias(a),
        Command::Walk(a) => cmd_walk(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Eval(a) => cmd_eval(a),
    }
}
