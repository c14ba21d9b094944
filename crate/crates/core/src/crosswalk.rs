//! Group-boundary-aware edge reweighting.
//!
//! Each node first gets a boundary closeness `m(v)`: the fraction of
//! positions on short random walks from `v` that land in a foreign group.
//! Edges are then reweighted so that a node sends `alpha` of its transition
//! mass across group boundaries (split evenly over the foreign groups it
//! touches) and `1 - alpha` inside its own group, with every share spread
//! proportionally to `w(v, u) * (m(u) + eps)^beta`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, GroupPartition};
use crate::rng;
use crate::weights::{sample_proportional, OutWeights};

/// Smoothing added to closeness values before exponentiation.
pub const CLOSENESS_EPSILON: f64 = 1e-3;

pub const DEFAULT_CLOSENESS_WALKS: usize = 10;
pub const DEFAULT_CLOSENESS_LENGTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCloseness {
    pub m: Vec<f64>,
    pub walks: usize,
    pub length: usize,
    pub seed: u64,
}

/// Monte-Carlo estimate of `m(v)` from `walks` first-order weighted walks of
/// `length` steps per node over the original weights. Each start node uses
/// its own generator seeded from `seed ⊕ node`.
pub fn estimate_closeness(
    graph: &AttributedGraph,
    partition: &GroupPartition,
    walks: usize,
    length: usize,
    seed: u64,
) -> Result<BoundaryCloseness> {
    if walks == 0 || length == 0 {
        return Err(Error::InvalidParameter("closeness walks and length must be >= 1".into()));
    }
    if graph.edge_count() == 0 {
        return Err(Error::InvalidParameter("closeness needs at least one edge".into()));
    }
    if partition.node_count() != graph.node_count() {
        return Err(Error::InvalidParameter("partition does not match graph".into()));
    }
    let group = &partition.group_of;
    let m = (0..graph.node_count())
        .into_par_iter()
        .map(|v| {
            if graph.degree(v) == 0 {
                return 0.0;
            }
            let mut rng = rng::rng_from(rng::derive(seed, v as u64));
            let mut buf = Vec::new();
            let mut foreign = 0usize;
            for _ in 0..walks {
                let mut cur = v;
                for _ in 0..length {
                    let row = graph.neighbors(cur);
                    buf.clear();
                    buf.extend(row.iter().map(|&(_, w)| w));
                    let Some(i) = sample_proportional(&buf, &mut rng) else {
                        break;
                    };
                    cur = row[i].0;
                    if group[cur] != group[v] {
                        foreign += 1;
                    }
                }
            }
            foreign as f64 / (walks * length) as f64
        })
        .collect();
    Ok(BoundaryCloseness {
        m,
        walks,
        length,
        seed,
    })
}

/// Transition weights after boundary-aware reweighting.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedGraph {
    pub weights: OutWeights,
    pub alpha: f64,
    pub beta: f64,
}

impl BiasedGraph {
    pub fn write(&self, names: &[String], path: &Path) -> Result<()> {
        self.weights.write(names, path)
    }
}

pub fn reweight(
    graph: &AttributedGraph,
    partition: &GroupPartition,
    closeness: &BoundaryCloseness,
    alpha: f64,
    beta: f64,
) -> Result<BiasedGraph> {
    reweight_with_epsilon(graph, partition, closeness, alpha, beta, CLOSENESS_EPSILON)
}

pub fn reweight_with_epsilon(
    graph: &AttributedGraph,
    partition: &GroupPartition,
    closeness: &BoundaryCloseness,
    alpha: f64,
    beta: f64,
    epsilon: f64,
) -> Result<BiasedGraph> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    if closeness.m.len() != graph.node_count() || partition.node_count() != graph.node_count() {
        return Err(Error::InvalidParameter("closeness or partition does not match graph".into()));
    }
    let group = &partition.group_of;
    let score: Vec<f64> = closeness.m.iter().map(|&m| (m + epsilon).powf(beta)).collect();

    let rows: Vec<Vec<(usize, f64)>> = (0..graph.node_count())
        .into_par_iter()
        .map(|v| {
            let row = graph.neighbors(v);
            if row.is_empty() {
                return Vec::new();
            }
            let raw: Vec<f64> = row.iter().map(|&(u, w)| w * score[u]).collect();
            // per-group totals, own group first
            let mut totals: Vec<(usize, f64)> = Vec::new();
            for (&(u, _), &r) in row.iter().zip(&raw) {
                match totals.iter_mut().find(|(g, _)| *g == group[u]) {
                    Some(t) => t.1 += r,
                    None => totals.push((group[u], r)),
                }
            }
            let has_own = totals.iter().any(|&(g, _)| g == group[v]);
            let foreign_groups = totals.len() - usize::from(has_own);
            let share = |g: usize| -> f64 {
                if foreign_groups == 0 {
                    1.0
                } else if !has_own {
                    1.0 / foreign_groups as f64
                } else if g == group[v] {
                    1.0 - alpha
                } else {
                    alpha / foreign_groups as f64
                }
            };
            row.iter()
                .zip(&raw)
                .map(|(&(u, _), &r)| {
                    let g = group[u];
                    let total = totals.iter().find(|(h, _)| *h == g).map_or(0.0, |t| t.1);
                    let p = if total > 0.0 {
                        share(g) * r / total
                    } else {
                        // every score underflowed; fall back to uniform within the group
                        let members = row.iter().filter(|&&(x, _)| group[x] == g).count();
                        share(g) / members as f64
                    };
                    (u, p)
                })
                .collect()
        })
        .collect();
    Ok(BiasedGraph {
        weights: OutWeights::from_rows(rows)?,
        alpha,
        beta,
    })
}
