//! Hyperparameter sweeps with a resumable CSV results table, and summaries
//! over that table.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Intervention, Preset};
use crate::error::{Error, Result};
use crate::metrics;
use crate::pipeline::{self, ExperimentReport};

/// Version of the results-table column set.
pub const TABLE_SCHEMA: u32 = 1;
pub const DEFAULT_RUN_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Also run the plain node2vec baseline for every (p, q).
    pub include_baseline: bool,
    /// Cartesian product when true; otherwise `alpha`/`beta` and `p`/`q`
    /// are zipped pairwise.
    pub cartesian: bool,
    pub presets: Vec<Preset>,
    pub cap: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            alpha: Vec::new(),
            beta: Vec::new(),
            p: Vec::new(),
            q: Vec::new(),
            include_baseline: false,
            cartesian: true,
            presets: Vec::new(),
            cap: DEFAULT_RUN_CAP,
        }
    }
}

impl SweepSpec {
    /// The full grid: p, q ∈ {0.1, 0.5, 1, 5, 10}, α ∈ {0.01, 0.25, 0.5,
    /// 0.75, 0.99}, β ∈ {1, 2, 3, 5, 8, 11, 15}, plus baselines.
    pub fn full_grid() -> Self {
        let pq = vec![0.1, 0.5, 1.0, 5.0, 10.0];
        Self {
            alpha: vec![0.01, 0.25, 0.5, 0.75, 0.99],
            beta: vec![1.0, 2.0, 3.0, 5.0, 8.0, 11.0, 15.0],
            p: pq.clone(),
            q: pq,
            include_baseline: true,
            ..Default::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn pairs(&self, a: &[f64], b: &[f64], what: &str) -> Result<Vec<(f64, f64)>> {
        if self.cartesian {
            Ok(a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect())
        } else if a.len() == b.len() {
            Ok(a.iter().copied().zip(b.iter().copied()).collect())
        } else {
            Err(Error::InvalidParameter(format!("zipped {what} lists differ in length")))
        }
    }

    /// Every configuration of the sweep, deduplicated by run key.
    pub fn expand(&self, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        let p = if self.p.is_empty() { vec![base.p] } else { self.p.clone() };
        let q = if self.q.is_empty() { vec![base.q] } else { self.q.clone() };
        let pq = self.pairs(&p, &q, "p/q")?;
        let with_pq = |cfg: &ExperimentConfig, (p, q): (f64, f64)| ExperimentConfig { p, q, ..cfg.clone() };

        let mut out = Vec::new();
        let grid_empty = self.alpha.is_empty() && self.beta.is_empty() && self.presets.is_empty() && !self.include_baseline;
        if grid_empty {
            out.extend(pq.iter().map(|&x| with_pq(base, x)));
        }
        if self.include_baseline {
            let b = base.clone().baseline();
            out.extend(pq.iter().map(|&x| with_pq(&b, x)));
        }
        if !self.alpha.is_empty() || !self.beta.is_empty() {
            for (alpha, beta) in self.pairs(&self.alpha, &self.beta, "alpha/beta")? {
                let mut c = base.clone().baseline();
                c.intervention = Intervention::Crosswalk;
                c.alpha = Some(alpha);
                c.beta = Some(beta);
                out.extend(pq.iter().map(|&x| with_pq(&c, x)));
            }
        }
        for &preset in &self.presets {
            let c = base.clone().with_preset(preset);
            out.extend(pq.iter().map(|&x| with_pq(&c, x)));
        }
        let mut seen = BTreeSet::new();
        out.retain(|c| seen.insert(run_key(c)));
        if out.len() > self.cap {
            return Err(Error::InvalidParameter(format!(
                "sweep expands to {} runs, above the cap of {}",
                out.len(),
                self.cap
            )));
        }
        Ok(out)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Identity of a run inside a results table.
pub fn run_key(cfg: &ExperimentConfig) -> String {
    let (alpha, beta) = match cfg.intervention {
        Intervention::Baseline => (None, None),
        Intervention::Crosswalk => (cfg.alpha, cfg.beta),
    };
    format!(
        "{}|{}|{}|{}|{}|{}",
        cfg.dataset,
        match cfg.intervention {
            Intervention::Baseline => "baseline",
            Intervention::Crosswalk => "crosswalk",
        },
        fmt_opt(alpha),
        fmt_opt(beta),
        cfg.p,
        cfg.q
    )
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn split_f64(s: &str) -> Vec<f64> {
    s.split(';').filter(|t| !t.is_empty()).filter_map(|t| t.parse().ok()).collect()
}

/// One results-table row. Per-group vectors are `;`-joined in group order.
/// Baseline rows leave `alpha` and `beta` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema: u32,
    pub run_key: String,
    pub dataset: String,
    pub intervention: String,
    pub preset: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub awareness: Option<f64>,
    pub disparity: Option<f64>,
    pub performance: Option<f64>,
    pub group_labels: String,
    pub group_sizes: String,
    pub q_sensitive: String,
    pub q_control: String,
    pub error: String,
}

impl ResultRow {
    fn skeleton(cfg: &ExperimentConfig) -> Self {
        let crosswalk = cfg.intervention == Intervention::Crosswalk;
        Self {
            schema: TABLE_SCHEMA,
            run_key: run_key(cfg),
            dataset: cfg.dataset.clone(),
            intervention: if crosswalk { "crosswalk" } else { "baseline" }.into(),
            preset: cfg.preset.map(|p| p.name().to_string()).unwrap_or_default(),
            alpha: if crosswalk { cfg.alpha } else { None },
            beta: if crosswalk { cfg.beta } else { None },
            p: cfg.p,
            q: cfg.q,
            seed: cfg.seed,
            awareness: None,
            disparity: None,
            performance: None,
            group_labels: String::new(),
            group_sizes: String::new(),
            q_sensitive: String::new(),
            q_control: String::new(),
            error: String::new(),
        }
    }

    pub fn from_report(report: &ExperimentReport) -> Self {
        let ev = &report.evaluation;
        Self {
            awareness: Some(ev.awareness),
            disparity: Some(ev.disparity),
            performance: ev.performance,
            group_labels: ev.group_labels.join(";"),
            group_sizes: join(&ev.group_sizes),
            q_sensitive: join(&ev.q),
            q_control: ev.q_control.as_deref().map(join).unwrap_or_default(),
            ..Self::skeleton(&report.config)
        }
    }

    pub fn failed(cfg: &ExperimentConfig, err: &Error) -> Self {
        Self {
            error: err.to_string(),
            ..Self::skeleton(cfg)
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_empty()
    }

    /// Label for grouping: the preset name, `baseline`, or
    /// `crosswalk(alpha,beta)`.
    pub fn label(&self) -> String {
        if !self.preset.is_empty() {
            self.preset.clone()
        } else if self.intervention == "baseline" {
            "baseline".into()
        } else {
            format!("crosswalk({},{})", fmt_opt(self.alpha), fmt_opt(self.beta))
        }
    }
}

pub fn read_table(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub planned: usize,
    pub skipped: usize,
    pub computed: usize,
    pub failed: usize,
}

/// Runs every configuration not already present (without error) in `table`
/// and appends one row per run. Rows are written as runs finish, each under
/// an exclusive lock.
pub fn run_sweep(spec: &SweepSpec, base: &ExperimentConfig, table: &Path) -> Result<SweepOutcome> {
    let configs = spec.expand(base)?;
    let existing = if table.exists() { read_table(table)? } else { Vec::new() };
    let kept: Vec<ResultRow> = existing.into_iter().filter(ResultRow::ok).collect();
    let done: BTreeSet<String> = kept.iter().map(|r| r.run_key.clone()).collect();

    // rewrite without failed rows so reruns replace them
    {
        let mut w = csv::Writer::from_path(table)?;
        if kept.is_empty() {
            w.write_record(csv_header())?;
        }
        for row in &kept {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(table, e))?;
    }

    let pending: Vec<&ExperimentConfig> = configs.iter().filter(|c| !done.contains(&run_key(c))).collect();
    let file = OpenOptions::new().append(true).open(table).map_err(|e| Error::io(table, e))?;
    let writer = Mutex::new(csv::WriterBuilder::new().has_headers(false).from_writer(file));
    let failures = pending
        .par_iter()
        .map(|cfg| -> Result<usize> {
            let (row, failed) = match pipeline::execute(cfg) {
                Ok(art) => (ResultRow::from_report(&art.report), 0),
                Err(e) => (ResultRow::failed(cfg, &e), 1),
            };
            let mut w = writer.lock().expect("writer lock");
            w.serialize(&row)?;
            w.flush().map_err(|e| Error::io(table, e))?;
            Ok(failed)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(SweepOutcome {
        planned: configs.len(),
        skipped: configs.len() - pending.len(),
        computed: pending.len(),
        failed: failures,
    })
}

fn csv_header() -> Vec<&'static str> {
    vec![
        "schema",
        "run_key",
        "dataset",
        "intervention",
        "preset",
        "alpha",
        "beta",
        "p",
        "q",
        "seed",
        "awareness",
        "disparity",
        "performance",
        "group_labels",
        "group_sizes",
        "q_sensitive",
        "q_control",
        "error",
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        Some(Self {
            mean: metrics::mean(xs),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub dataset: String,
    pub label: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub runs: usize,
    pub awareness: Option<Range>,
    pub disparity: Option<Range>,
    pub performance: Option<Range>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetComparison {
    pub dataset: String,
    pub preset: String,
    pub awareness_delta: Option<f64>,
    pub disparity_delta: Option<f64>,
    pub performance_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBucket {
    pub label: String,
    pub bucket: usize,
    pub lower: f64,
    pub upper: f64,
    pub groups: usize,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub failed: usize,
    /// Ranges over (p, q) per dataset and configuration.
    pub per_dataset: Vec<ConfigSummary>,
    /// Ranges of the per-dataset means across datasets.
    pub across_datasets: Vec<ConfigSummary>,
    pub presets: Vec<PresetComparison>,
    /// Mean sensitive-attribute F1 by relative group size.
    pub group_size_buckets: Vec<SizeBucket>,
}

type ConfigKey = (String, String, Option<u64>, Option<u64>);

fn config_key(dataset: &str, row: &ResultRow) -> ConfigKey {
    (
        dataset.to_string(),
        row.label(),
        row.alpha.map(f64::to_bits),
        row.beta.map(f64::to_bits),
    )
}

fn summarize_group(dataset: &str, rows: &[&ResultRow]) -> ConfigSummary {
    let collect = |f: fn(&ResultRow) -> Option<f64>| rows.iter().filter_map(|r| f(r)).collect::<Vec<_>>();
    ConfigSummary {
        dataset: dataset.to_string(),
        label: rows[0].label(),
        alpha: rows[0].alpha,
        beta: rows[0].beta,
        runs: rows.len(),
        awareness: Range::of(&collect(|r| r.awareness)),
        disparity: Range::of(&collect(|r| r.disparity)),
        performance: Range::of(&collect(|r| r.performance)),
    }
}

/// Aggregates a results table; `buckets` equal-width bins over relative group
/// size in [0, 1].
pub fn summarize(rows: &[ResultRow], buckets: usize) -> Result<SweepSummary> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("results table is empty".into()));
    }
    let buckets = buckets.max(1);
    let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.ok()).collect();

    let mut groups: BTreeMap<ConfigKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in &ok {
        groups.entry(config_key(&r.dataset, r)).or_default().push(r);
    }
    let per_dataset: Vec<ConfigSummary> = groups.iter().map(|((d, ..), rs)| summarize_group(d, rs)).collect();

    let mut across: BTreeMap<ConfigKey, Vec<&ConfigSummary>> = BTreeMap::new();
    for (key, s) in groups.keys().zip(&per_dataset) {
        across.entry((String::new(), key.1.clone(), key.2, key.3)).or_default().push(s);
    }
    let across_datasets = across
        .values()
        .map(|ss| {
            let means = |f: fn(&ConfigSummary) -> &Option<Range>| {
                Range::of(&ss.iter().filter_map(|s| f(s).as_ref().map(|r| r.mean)).collect::<Vec<_>>())
            };
            ConfigSummary {
                dataset: "*".into(),
                label: ss[0].label.clone(),
                alpha: ss[0].alpha,
                beta: ss[0].beta,
                runs: ss.iter().map(|s| s.runs).sum(),
                awareness: means(|s| &s.awareness),
                disparity: means(|s| &s.disparity),
                performance: means(|s| &s.performance),
            }
        })
        .collect();

    let mut presets = Vec::new();
    let datasets: BTreeSet<&str> = ok.iter().map(|r| r.dataset.as_str()).collect();
    for d in datasets {
        let find = |label: &str| per_dataset.iter().find(|s| s.dataset == d && s.label == label);
        let Some(base) = find("baseline") else { continue };
        for preset in Preset::ALL {
            if let Some(s) = find(preset.name()) {
                let delta = |a: &Option<Range>, b: &Option<Range>| Some(a.as_ref()?.mean - b.as_ref()?.mean);
                presets.push(PresetComparison {
                    dataset: d.to_string(),
                    preset: preset.name().into(),
                    awareness_delta: delta(&s.awareness, &base.awareness),
                    disparity_delta: delta(&s.disparity, &base.disparity),
                    performance_delta: delta(&s.performance, &base.performance),
                });
            }
        }
    }

    let mut bins: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in &ok {
        let sizes = split_f64(&r.group_sizes);
        let scores = split_f64(&r.q_sensitive);
        let total: f64 = sizes.iter().sum();
        if total <= 0.0 || sizes.len() != scores.len() {
            continue;
        }
        for (size, score) in sizes.iter().zip(&scores) {
            let b = ((size / total * buckets as f64).floor() as usize).min(buckets - 1);
            bins.entry((r.label(), b)).or_default().push(*score);
        }
    }
    let group_size_buckets = bins
        .into_iter()
        .map(|((label, b), scores)| SizeBucket {
            label,
            bucket: b,
            lower: b as f64 / buckets as f64,
            upper: (b + 1) as f64 / buckets as f64,
            groups: scores.len(),
            mean_f1: metrics::mean(&scores),
        })
        .collect();

    Ok(SweepSummary {
        rows: rows.len(),
        failed: rows.len() - ok.len(),
        per_dataset,
        across_datasets,
        presets,
        group_size_buckets,
    })
}
