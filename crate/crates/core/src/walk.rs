//! Second-order (node2vec-style) random walks over per-node out-weights.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::weights::{sample_proportional, OutWeights};

pub const DEFAULT_WALKS_PER_NODE: usize = 10;
pub const DEFAULT_WALK_LENGTH: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            q: 1.0,
            walks_per_node: DEFAULT_WALKS_PER_NODE,
            walk_length: DEFAULT_WALK_LENGTH,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "p and q must be positive, got p={} q={}",
                self.p, self.q
            )));
        }
        if self.walks_per_node == 0 || self.walk_length == 0 {
            return Err(Error::InvalidParameter("walks_per_node and walk_length must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WalkSource {
    Baseline,
    Crosswalk { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub config: WalkConfig,
    pub source: WalkSource,
}

/// Next-step distribution at `cur` having arrived from `prev`. Scores are
/// `w(cur, x) / p` for a return to `prev`, `w(cur, x)` when `x` is adjacent
/// to `prev` and `w(cur, x) / q` otherwise, normalized to one. Without a
/// previous node the weights are simply normalized.
pub fn transition_distribution(
    weights: &OutWeights,
    prev: Option<usize>,
    cur: usize,
    p: f64,
    q: f64,
) -> Vec<(usize, f64)> {
    let row = weights.row(cur);
    let mut scores: Vec<(usize, f64)> = row
        .iter()
        .map(|&(x, w)| (x, w * bias_factor(weights, prev, x, p, q)))
        .collect();
    let total: f64 = scores.iter().map(|s| s.1).sum();
    if total > 0.0 {
        for s in &mut scores {
            s.1 /= total;
        }
    }
    scores
}

#[inline]
fn bias_factor(weights: &OutWeights, prev: Option<usize>, x: usize, p: f64, q: f64) -> f64 {
    match prev {
        None => 1.0,
        Some(t) if t == x => 1.0 / p,
        Some(t) if weights.contains(t, x) => 1.0,
        Some(_) => 1.0 / q,
    }
}

/// Samples one step; `None` when `cur` has no outgoing mass.
pub fn sample_step<R: rand::Rng + ?Sized>(
    weights: &OutWeights,
    prev: Option<usize>,
    cur: usize,
    p: f64,
    q: f64,
    buf: &mut Vec<f64>,
    rng: &mut R,
) -> Option<usize> {
    let row = weights.row(cur);
    buf.clear();
    buf.extend(row.iter().map(|&(x, w)| w * bias_factor(weights, prev, x, p, q)));
    sample_proportional(buf, rng).map(|i| row[i].0)
}

fn walk_from<R: rand::Rng + ?Sized>(weights: &OutWeights, root: usize, config: &WalkConfig, rng: &mut R) -> Vec<usize> {
    let mut walk = Vec::with_capacity(config.walk_length + 1);
    walk.push(root);
    let mut buf = Vec::new();
    let mut prev = None;
    let mut cur = root;
    for _ in 0..config.walk_length {
        match sample_step(weights, prev, cur, config.p, config.q, &mut buf, rng) {
            Some(next) => {
                prev = Some(cur);
                cur = next;
                walk.push(next);
            }
            None => break,
        }
    }
    walk
}

/// Runs `walks_per_node` rounds; every round visits all roots in a freshly
/// shuffled order. Each walk has its own generator seeded from
/// `(seed, root, round)`, so output does not depend on thread scheduling.
pub fn generate_walks(weights: &OutWeights, config: &WalkConfig, source: WalkSource) -> Result<WalkCorpus> {
    config.validate()?;
    let n = weights.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut walks = Vec::with_capacity(n * config.walks_per_node);
    for round in 0..config.walks_per_node {
        let mut order: Vec<usize> = (0..n).collect();
        let mut order_rng = rng::rng_from(rng::derive2(config.seed, u64::MAX, round as u64));
        order.shuffle(&mut order_rng);
        let batch: Vec<Vec<usize>> = order
            .par_iter()
            .map(|&root| {
                let mut rng = rng::rng_from(rng::derive2(config.seed, root as u64, round as u64));
                walk_from(weights, root, config, &mut rng)
            })
            .collect();
        walks.extend(batch);
    }
    Ok(WalkCorpus {
        walks,
        config: *config,
        source,
    })
}

impl WalkCorpus {
    /// One walk per line, node names separated by single spaces.
    pub fn write(&self, names: &[String], path: &Path) -> Result<()> {
        write_walks(&self.walks, names, path)
    }
}

pub fn write_walks(walks: &[Vec<usize>], names: &[String], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for walk in walks {
        let line: Vec<&str> = walk.iter().map(|&v| names[v].as_str()).collect();
        writeln!(out, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a sentence file. Names are numbered in first-appearance order.
pub fn read_walks(path: &Path) -> Result<(Vec<String>, Vec<Vec<usize>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut names = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut walks = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let walk = line
            .split_whitespace()
            .map(|tok| {
                *index.entry(tok.to_string()).or_insert_with(|| {
                    names.push(tok.to_string());
                    names.len() - 1
                })
            })
            .collect();
        walks.push(walk);
    }
    Ok((names, walks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(rows: Vec<Vec<usize>>) -> OutWeights {
        OutWeights::from_rows(rows.into_iter().map(|r| r.into_iter().map(|x| (x, 1.0)).collect()).collect()).unwrap()
    }

    fn probs(d: &[(usize, f64)]) -> Vec<f64> {
        d.iter().map(|x| x.1).collect()
    }

    #[test]
    fn unbiased_when_p_q_one() {
        let w = OutWeights::from_rows(vec![vec![(1, 1.0), (2, 3.0)], vec![(0, 1.0), (2, 1.0)], vec![(0, 1.0), (1, 1.0)]]).unwrap();
        for prev in [None, Some(1), Some(2)] {
            let d = transition_distribution(&w, prev, 0, 1.0, 1.0);
            assert_eq!(probs(&d), vec![0.25, 0.75]);
        }
    }

    #[test]
    fn path_fixture() {
        // t=0 - v=1 - x=2
        let w = unit(vec![vec![1], vec![0, 2], vec![1]]);
        let d = transition_distribution(&w, Some(0), 1, 0.5, 2.0);
        assert_eq!(d[0].0, 0);
        assert!((d[0].1 - 0.8).abs() < 1e-15 && (d[1].1 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn triangle_fixture() {
        let w = unit(vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        for (p, q) in [(0.5, 2.0), (4.0, 0.1), (1.0, 7.0)] {
            let d = transition_distribution(&w, Some(0), 1, p, q);
            let back = (1.0 / p) / (1.0 / p + 1.0);
            assert!((d[0].1 - back).abs() < 1e-15);
            assert!((d[1].1 - 1.0 / (1.0 / p + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_node_has_empty_distribution() {
        let w = unit(vec![vec![], vec![2], vec![1]]);
        assert!(transition_distribution(&w, None, 0, 1.0, 1.0).is_empty());
        let c = generate_walks(&w, &WalkConfig { walks_per_node: 1, walk_length: 5, ..Default::default() }, WalkSource::Baseline).unwrap();
        assert!(c.walks.contains(&vec![0]));
    }

    #[test]
    fn single_edge_alternates() {
        let w = unit(vec![vec![1], vec![0]]);
        let cfg = WalkConfig {
            walks_per_node: 1,
            walk_length: 3,
            ..Default::default()
        };
        let c = generate_walks(&w, &cfg, WalkSource::Baseline).unwrap();
        assert!(c.walks.contains(&vec![0, 1, 0, 1]));
        assert!(c.walks.contains(&vec![1, 0, 1, 0]));
    }

    #[test]
    fn counts_walks() {
        let w = unit(vec![vec![1], vec![0, 2], vec![1, 3], vec![2, 4], vec![3]]);
        let cfg = WalkConfig {
            walks_per_node: 2,
            walk_length: 4,
            ..Default::default()
        };
        let c = generate_walks(&w, &cfg, WalkSource::Baseline).unwrap();
        assert_eq!(c.walks.len(), 10);
        for round in c.walks.chunks(5) {
            let mut roots: Vec<usize> = round.iter().map(|w| w[0]).collect();
            roots.sort_unstable();
            assert_eq!(roots, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn rejects_non_positive_p() {
        let w = unit(vec![vec![1], vec![0]]);
        let cfg = WalkConfig { p: 0.0, ..Default::default() };
        assert!(generate_walks(&w, &cfg, WalkSource::Baseline).is_err());
    }

    #[test]
    fn corpus_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let walks = vec![vec![0, 1, 2], vec![2, 1]];
        let p = dir.path().join("w.txt");
        write_walks(&walks, &names, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a b c\nc b\n");
        let (n2, w2) = read_walks(&p).unwrap();
        assert_eq!((n2, w2), (names, walks));
    }
}
