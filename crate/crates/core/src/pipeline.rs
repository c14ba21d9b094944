//! End-to-end run: dataset → optional CrossWalk biasing → walks → embedding
//! → cross-validated evaluation, plus the artifacts written for one run.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Intervention};
use crate::crosswalk::{self, BoundaryCloseness};
use crate::embed::{self, EmbeddingMatrix, TrainMode, TrainingMeta};
use crate::error::{Error, Result};
use crate::eval::{self, EvaluationReport};
use crate::graph::{self, AttributedGraph, GraphSummary, LoadOptions};
use crate::pca;
use crate::sbm;
use crate::sweep::ResultRow;
use crate::walk::{self, WalkSource};
use crate::weights::OutWeights;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub closeness: u64,
    pub walks: u64,
    pub embed: u64,
    pub eval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessSummary {
    pub walks: usize,
    pub length: usize,
    pub mean: f64,
    pub boundary_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub seeds: StageSeeds,
    pub graph: GraphSummary,
    pub dropped_nodes: usize,
    pub closeness: Option<ClosenessSummary>,
    pub embedding: TrainingMeta,
    pub evaluation: EvaluationReport,
}

pub struct RunArtifacts {
    pub report: ExperimentReport,
    pub graph: AttributedGraph,
    pub embedding: EmbeddingMatrix,
}

/// Loads or generates the graph named by the config. Returns the graph and
/// the number of nodes dropped on the way.
pub fn prepare_dataset(cfg: &ExperimentConfig) -> Result<(AttributedGraph, usize)> {
    let (graph, dropped) = match (cfg.sbm_spec(), &cfg.edges, &cfg.attrs) {
        (Some(spec), _, _) => {
            let (g, out) = sbm::generate_sbm(&spec)?;
            (g, out.isolated_removed)
        }
        (None, Some(edges), Some(attrs)) => {
            let opts = LoadOptions {
                age_column: cfg.age_column.clone(),
            };
            let (g, r) = graph::load_graph_with(edges, attrs, &opts)?;
            (g, r.missing_attributes + r.invalid_age + r.isolated)
        }
        _ => return Err(Error::InvalidParameter("no dataset configured".into())),
    };
    match (&cfg.select_attribute, &cfg.select_values) {
        (Some(attr), Some(values)) => {
            let allowed: BTreeSet<String> = values.iter().cloned().collect();
            let sub = graph::select_subgraph(&graph, attr, &allowed)?;
            let removed = graph.node_count() - sub.node_count();
            Ok((sub, dropped + removed))
        }
        _ => Ok((graph, dropped)),
    }
}

fn cache_key(parts: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(parts).expect("cache key serializes");
    format!("{:x}", Sha256::digest(bytes))
}

/// Config fields that determine the dataset.
fn dataset_fingerprint(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({
        "edges": cfg.edges, "attrs": cfg.attrs, "age_column": cfg.age_column,
        "select_attribute": cfg.select_attribute, "select_values": cfg.select_values,
        "sbm": cfg.sbm_spec(),
    })
}

fn closeness_cached(
    cfg: &ExperimentConfig,
    graph: &AttributedGraph,
    partition: &graph::GroupPartition,
) -> Result<BoundaryCloseness> {
    let compute = || {
        crosswalk::estimate_closeness(graph, partition, cfg.closeness_walks, cfg.closeness_length, cfg.closeness_seed())
    };
    let Some(dir) = &cfg.cache_dir else {
        return compute();
    };
    let key = cache_key(&(
        "closeness",
        dataset_fingerprint(cfg),
        &cfg.sensitive,
        cfg.closeness_walks,
        cfg.closeness_length,
        cfg.closeness_seed(),
    ));
    let path = dir.join(format!("closeness-{key}.json"));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<BoundaryCloseness>(&text) {
            if c.m.len() == graph.node_count() {
                return Ok(c);
            }
        }
    }
    let c = compute()?;
    write_atomic(&path, serde_json::to_string(&c)?.as_bytes())?;
    Ok(c)
}

fn embedding_cached(
    cfg: &ExperimentConfig,
    train: impl FnOnce() -> Result<(EmbeddingMatrix, Option<ClosenessSummary>)>,
) -> Result<(EmbeddingMatrix, Option<ClosenessSummary>)> {
    let dir = match &cfg.cache_dir {
        Some(dir) if cfg.train_mode == TrainMode::Exact => dir,
        _ => return train(),
    };
    let key = cache_key(&(
        "embedding",
        dataset_fingerprint(cfg),
        &cfg.sensitive,
        cfg.intervention,
        cfg.alpha,
        cfg.beta,
        cfg.closeness_walks,
        cfg.closeness_length,
        cfg.closeness_seed(),
        cfg.walk_config(),
        cfg.embed_config(),
    ));
    let matrix_path = dir.join(format!("embedding-{key}.txt"));
    let meta_path = dir.join(format!("embedding-{key}.json"));
    if let (Ok(meta), true) = (fs::read_to_string(&meta_path), matrix_path.exists()) {
        if let Ok((meta, closeness)) = serde_json::from_str::<(TrainingMeta, Option<ClosenessSummary>)>(&meta) {
            let (_, mut m) = EmbeddingMatrix::read(&matrix_path)?;
            m.meta = Some(meta);
            return Ok((m, closeness));
        }
    }
    let (m, closeness) = train()?;
    let names: Vec<String> = (0..m.node_count()).map(|i| i.to_string()).collect();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    m.write(&names, &matrix_path)?;
    write_atomic(&meta_path, serde_json::to_string(&(&m.meta, &closeness))?.as_bytes())?;
    Ok((m, closeness))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs every stage in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let cfg = cfg.resolved()?;
    let (graph, dropped) = prepare_dataset(&cfg).map_err(|e| e.in_stage("dataset"))?;
    let sensitive = graph::partition_by(&graph, &cfg.sensitive).map_err(|e| e.in_stage("dataset"))?;
    let control = match &cfg.control {
        Some(name) => Some(graph::partition_by(&graph, name).map_err(|e| e.in_stage("dataset"))?),
        None => None,
    };

    let (embedding, closeness) = embedding_cached(&cfg, || {
        let (weights, source, closeness) = match cfg.intervention {
            Intervention::Baseline => (OutWeights::normalized(&graph), WalkSource::Baseline, None),
            Intervention::Crosswalk => {
                let (alpha, beta) = (cfg.alpha.expect("validated"), cfg.beta.expect("validated"));
                let m = closeness_cached(&cfg, &graph, &sensitive).map_err(|e| e.in_stage("closeness"))?;
                let biased = crosswalk::reweight(&graph, &sensitive, &m, alpha, beta).map_err(|e| e.in_stage("bias"))?;
                let summary = ClosenessSummary {
                    walks: m.walks,
                    length: m.length,
                    mean: m.m.iter().sum::<f64>() / m.m.len() as f64,
                    boundary_nodes: m.m.iter().filter(|&&x| x > 0.0).count(),
                };
                (biased.weights, WalkSource::Crosswalk { alpha, beta }, Some(summary))
            }
        };
        let corpus = walk::generate_walks(&weights, &cfg.walk_config(), source).map_err(|e| e.in_stage("walk"))?;
        let m = embed::train(&corpus.walks, graph.node_count(), &cfg.embed_config()).map_err(|e| e.in_stage("embed"))?;
        Ok((m, closeness))
    })?;

    let evaluation = eval::cross_validate(
        &embedding.input,
        embedding.dim,
        &sensitive,
        control.as_ref(),
        &cfg.eval_config(),
    )
    .map_err(|e| e.in_stage("eval"))?;

    let report = ExperimentReport {
        schema: REPORT_SCHEMA,
        seeds: StageSeeds {
            closeness: cfg.closeness_seed(),
            walks: cfg.walk_config().seed,
            embed: cfg.embed_config().seed,
            eval: cfg.eval_config().seed,
        },
        graph: graph.summary(),
        dropped_nodes: dropped,
        closeness,
        embedding: embedding.meta.clone().expect("trained matrix carries metadata"),
        evaluation,
        config: cfg,
    };
    Ok(RunArtifacts {
        report,
        graph,
        embedding,
    })
}

/// Paths written by [`run_experiment`].
pub struct RunFiles {
    pub report_json: PathBuf,
    pub report_csv: PathBuf,
    pub embeddings: PathBuf,
    pub pca: PathBuf,
}

impl RunFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            report_json: dir.join("report.json"),
            report_csv: dir.join("report.csv"),
            embeddings: dir.join("embeddings.txt"),
            pca: dir.join("pca.csv"),
        }
    }

    fn all(&self) -> [&Path; 4] {
        [&self.report_json, &self.report_csv, &self.embeddings, &self.pca]
    }
}

/// Runs the pipeline and writes report JSON, a one-row CSV, the embedding
/// matrix and a 2-D PCA projection into `out_dir`. On failure nothing from
/// this run is left behind.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let files = RunFiles::in_dir(out_dir);
    let result = execute(cfg).and_then(|art| {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        write_outputs(&art, &files)?;
        Ok(art.report)
    });
    if result.is_err() {
        for p in files.all() {
            let _ = fs::remove_file(p);
        }
    }
    result
}

fn write_outputs(art: &RunArtifacts, files: &RunFiles) -> Result<()> {
    let json = serde_json::to_string_pretty(&art.report)?;
    fs::write(&files.report_json, json + "\n").map_err(|e| Error::io(&files.report_json, e))?;

    let mut w = csv::Writer::from_path(&files.report_csv)?;
    w.serialize(ResultRow::from_report(&art.report))?;
    w.flush().map_err(|e| Error::io(&files.report_csv, e))?;

    art.embedding.write(art.graph.node_ids(), &files.embeddings)?;
    write_pca(art, &files.pca)
}

fn write_pca(art: &RunArtifacts, path: &Path) -> Result<()> {
    let proj = pca::project(&art.embedding.input, art.embedding.dim, 2);
    let groups = art
        .graph
        .attribute(&art.report.config.sensitive)
        .expect("sensitive attribute exists");
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(out, "node_id,x,y,group").map_err(|e| Error::io(path, e))?;
    for (v, xy) in proj.iter().enumerate() {
        writeln!(out, "{},{},{},{}", art.graph.node_id(v), xy[0], xy[1], groups[v]).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
