//! kNN similarity graph over embeddings and harmonic label propagation.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Mean distance from each point to its k-th nearest neighbour.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationGraph {
    /// Symmetric weighted neighbour lists, sorted by neighbour.
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub k: usize,
    pub sigma: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Connects every point to its `k` nearest neighbours (union of both
/// directions) with weight `exp(-d^2 / sigma^2)`. `points` is row-major with
/// `dim` columns. Distance ties resolve to the lower index.
pub fn build_propagation_graph(points: &[f64], dim: usize, k: usize, bandwidth: Bandwidth) -> Result<PropagationGraph> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidParameter("point buffer is not a whole number of rows".into()));
    }
    let n = points.len() / dim;
    if n < 2 || k == 0 {
        return Err(Error::InvalidParameter(format!("need n >= 2 and k >= 1, got n={n} k={k}")));
    }
    let k = k.min(n - 1);
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let knn: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, squared_distance(row(i), row(j))))
                .collect();
            d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            d.truncate(k);
            d
        })
        .collect();
    let sigma = match bandwidth {
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => return Err(Error::InvalidParameter(format!("sigma must be positive, got {s}"))),
        Bandwidth::Auto => {
            let mean = knn.iter().map(|l| l[k - 1].1.sqrt()).sum::<f64>() / n as f64;
            // all points coincide: every weight is exp(0) whatever sigma is
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, list) in knn.iter().enumerate() {
        for &(j, d2) in list {
            let w = (-d2 / (sigma * sigma)).exp();
            neighbors[i].push((j, w));
            neighbors[j].push((i, w));
        }
    }
    for list in &mut neighbors {
        list.sort_by_key(|&(j, _)| j);
        list.dedup_by_key(|e| e.0);
    }
    Ok(PropagationGraph { neighbors, k, sigma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    /// Row-major `n x classes` label distributions.
    pub probs: Vec<f64>,
    pub classes: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Classes with no labeled seed; they can never be predicted.
    pub missing_classes: Vec<usize>,
}

impl Propagation {
    pub fn distribution(&self, node: usize) -> &[f64] {
        &self.probs[node * self.classes..(node + 1) * self.classes]
    }

    /// Argmax per node, ties to the lowest class index.
    pub fn predict(&self) -> Vec<usize> {
        self.probs
            .chunks(self.classes)
            .map(|row| {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Iterates `Y <- D^-1 W Y` from uniform rows, with labeled rows clamped to
/// their one-hot vectors, until the largest change is below `tol` or
/// `max_iters` is hit. Unlabeled nodes with no path to a labeled node end up uniform.
pub fn propagate(
    graph: &PropagationGraph,
    seeds: &[Option<usize>],
    classes: usize,
    max_iters: usize,
    tol: f64,
) -> Result<Propagation> {
    let n = graph.neighbors.len();
    if seeds.len() != n {
        return Err(Error::InvalidParameter("seed vector does not match graph".into()));
    }
    if classes == 0 || seeds.iter().flatten().any(|&c| c >= classes) {
        return Err(Error::InvalidParameter("seed label outside class range".into()));
    }
    let mut present = vec![false; classes];
    for &c in seeds.iter().flatten() {
        present[c] = true;
    }
    let missing_classes = (0..classes).filter(|&c| !present[c]).collect();

    let uniform = 1.0 / classes as f64;
    let mut y = vec![uniform; n * classes];
    for (v, s) in seeds.iter().enumerate() {
        if let Some(c) = s {
            let row = &mut y[v * classes..(v + 1) * classes];
            row.fill(0.0);
            row[*c] = 1.0;
        }
    }
    let degree: Vec<f64> = graph.neighbors.iter().map(|l| l.iter().map(|e| e.1).sum()).collect();
    let unlabeled: Vec<usize> = (0..n).filter(|&v| seeds[v].is_none() && degree[v] > 0.0).collect();
    let mut next = y.clone();
    let mut iterations = 0;
    let mut converged = unlabeled.is_empty();
    while !converged && iterations < max_iters {
        iterations += 1;
        let mut change: f64 = 0.0;
        for &v in &unlabeled {
            let out = &mut next[v * classes..(v + 1) * classes];
            out.fill(0.0);
            for &(u, w) in &graph.neighbors[v] {
                for (o, x) in out.iter_mut().zip(&y[u * classes..(u + 1) * classes]) {
                    *o += w * x;
                }
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o /= degree[v];
                change = change.max((*o - y[v * classes + c]).abs());
            }
        }
        std::mem::swap(&mut y, &mut next);
        converged = change < tol;
    }

    // nodes with no weighted path to a seed get the uniform vector
    let mut reached = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| seeds[v].is_some()).collect();
    for &v in &queue {
        reached[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &(u, w) in &graph.neighbors[v] {
            if w > 0.0 && !reached[u] {
                reached[u] = true;
                queue.push_back(u);
            }
        }
    }
    for v in (0..n).filter(|&v| !reached[v]) {
        y[v * classes..(v + 1) * classes].fill(uniform);
    }
    Ok(Propagation {
        probs: y,
        classes,
        iterations,
        converged,
        missing_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_from(edges: &[(usize, usize, f64)], n: usize) -> PropagationGraph {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            neighbors[a].push((b, w));
            neighbors[b].push((a, w));
        }
        PropagationGraph { neighbors, k: 1, sigma: 1.0 }
    }

    #[test]
    fn identical_points_get_unit_weight() {
        let g = build_propagation_graph(&[0.5, 0.5, 0.5, 0.5], 2, 1, Bandwidth::Auto).unwrap();
        assert_eq!(g.neighbors[0], vec![(1, 1.0)]);
        assert_eq!(g.neighbors[1], vec![(0, 1.0)]);
    }

    #[test]
    fn collinear_points_fixture() {
        let g = build_propagation_graph(&[0.0, 1.0, 10.0], 1, 1, Bandwidth::Fixed(1.0)).unwrap();
        assert_eq!(g.neighbors[0], vec![(1, (-1f64).exp())]);
        assert_eq!(g.neighbors[1], vec![(0, (-1f64).exp()), (2, (-81f64).exp())]);
        assert_eq!(g.neighbors[2], vec![(1, (-81f64).exp())]);
    }

    #[test]
    fn auto_sigma_is_mean_kth_distance() {
        let g = build_propagation_graph(&[0.0, 1.0, 10.0], 1, 1, Bandwidth::Auto).unwrap();
        assert!((g.sigma - (1.0 + 1.0 + 9.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn path_harmonic_solution() {
        let g = graph_from(&[(0, 1, 1.0), (1, 2, 1.0)], 3);
        let out = propagate(&g, &[Some(0), None, Some(1)], 2, 1000, 1e-6).unwrap();
        assert!(out.converged);
        assert!((out.distribution(1)[0] - 0.5).abs() < 1e-6);
        assert!((out.distribution(1)[1] - 0.5).abs() < 1e-6);
        assert_eq!(out.predict()[1], 0);
    }

    #[test]
    fn all_labeled_is_identity() {
        let g = graph_from(&[(0, 1, 1.0), (1, 2, 1.0)], 3);
        let out = propagate(&g, &[Some(1), Some(0), Some(1)], 2, 1000, 1e-6).unwrap();
        assert_eq!(out.probs, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn unreachable_component_is_uniform() {
        let g = graph_from(&[(0, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)], 5);
        let out = propagate(&g, &[Some(2), None, None, None, None], 3, 1000, 1e-6).unwrap();
        assert_eq!(out.distribution(1), &[0.0, 0.0, 1.0]);
        for v in 2..5 {
            assert_eq!(out.distribution(v), &[1.0 / 3.0; 3]);
        }
        assert_eq!(out.missing_classes, vec![0, 1]);
    }

    #[test]
    fn longer_path_is_linear_interpolation() {
        // harmonic function on a path is linear between the clamped ends
        let g = graph_from(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)], 5);
        let out = propagate(&g, &[Some(0), None, None, None, Some(1)], 2, 100_000, 1e-12).unwrap();
        for v in 1..4 {
            assert!((out.distribution(v)[1] - v as f64 / 4.0).abs() < 1e-9);
        }
    }
}
