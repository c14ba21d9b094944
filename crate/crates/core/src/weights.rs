//! Per-node outgoing transition weights shared by the walk samplers.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{read_edge_lines, AttributedGraph};

/// Outgoing weights per node, sorted by target. Rows need not be normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct OutWeights {
    rows: Vec<Vec<(usize, f64)>>,
}

impl OutWeights {
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (v, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(x, _)| x);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidParameter(format!("node {v} lists target {} twice", w[0].0)));
                }
            }
            for &(x, p) in row.iter() {
                if x >= n || !(p.is_finite() && p >= 0.0) {
                    return Err(Error::InvalidParameter(format!("bad out-weight ({v} -> {x}: {p})")));
                }
            }
        }
        Ok(Self { rows })
    }

    /// Weight-normalized neighbour distributions of an undirected graph.
    pub fn normalized(graph: &AttributedGraph) -> Self {
        let rows = graph
            .adjacency()
            .iter()
            .map(|row| {
                let total: f64 = row.iter().map(|&(_, w)| w).sum();
                row.iter().map(|&(x, w)| (x, w / total)).collect()
            })
            .collect();
        Self { rows }
    }

    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, node: usize) -> &[(usize, f64)] {
        &self.rows[node]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn contains(&self, from: usize, to: usize) -> bool {
        self.rows[from].binary_search_by_key(&to, |&(x, _)| x).is_ok()
    }

    /// Writes directed `u<TAB>v<TAB>weight` lines with the given node names.
    pub fn write(&self, names: &[String], path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (v, row) in self.rows.iter().enumerate() {
            for &(x, p) in row {
                writeln!(out, "{}\t{}\t{}", names[v], names[x], p).map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a directed weighted edge list. Node names are numbered in
    /// first-appearance order.
    pub fn read(path: &Path) -> Result<(Vec<String>, Self)> {
        let lines = read_edge_lines(path)?;
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut id = |s: &str, names: &mut Vec<String>| {
            *index.entry(s.to_string()).or_insert_with(|| {
                names.push(s.to_string());
                names.len() - 1
            })
        };
        let mut pairs = Vec::with_capacity(lines.len());
        for (a, b, w) in &lines {
            let u = id(a, &mut names);
            let v = id(b, &mut names);
            pairs.push((u, v, *w));
        }
        let mut rows = vec![Vec::new(); names.len()];
        for (u, v, w) in pairs {
            rows[u].push((v, w));
        }
        Ok((names, Self::from_rows(rows)?))
    }
}

/// Draws an index with probability proportional to `weights`. Returns `None`
/// when the total weight is zero.
pub fn sample_proportional<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut x = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        if x < w {
            return Some(i);
        }
        x -= w;
        last = Some(i);
    }
    // floating-point leftovers land on the last positive entry
    last
}
