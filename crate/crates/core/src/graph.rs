//! Attributed graph model, ingestion from edge/attribute files and
//! attribute-based subgraph selection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected weighted edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected weighted graph with dense node IDs `0..n` and one categorical
/// value per node for every declared attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    node_ids: Vec<String>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    attribute_names: Vec<String>,
    attribute_values: Vec<Vec<String>>,
}

impl AttributedGraph {
    /// Builds a graph from dense parts. Edges may be given in either
    /// orientation; self-loops, duplicates, out-of-range endpoints and
    /// non-positive weights are rejected.
    pub fn from_parts(
        node_ids: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        attributes: Vec<(String, Vec<String>)>,
    ) -> Result<Self> {
        let n = node_ids.len();
        let mut canonical: Vec<Edge> = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) has endpoint outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop on node {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) has non-positive weight {w}"
                )));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            canonical.push(Edge { u, v, weight: w });
        }
        canonical.sort_by_key(|x| (x.u, x.v));
        if canonical.windows(2).any(|p| p[0].u == p[1].u && p[0].v == p[1].v) {
            return Err(Error::InvalidParameter("duplicate undirected edge".into()));
        }
        let mut names = Vec::with_capacity(attributes.len());
        let mut values = Vec::with_capacity(attributes.len());
        for (name, vals) in attributes {
            if vals.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "attribute `{name}` has {} values for {n} nodes",
                    vals.len()
                )));
            }
            if names.contains(&name) {
                return Err(Error::InvalidParameter(format!("attribute `{name}` declared twice")));
            }
            names.push(name);
            values.push(vals);
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &canonical {
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(x, _)| x);
        }
        Ok(Self {
            node_ids,
            edges: canonical,
            adjacency,
            attribute_names: names,
            attribute_values: values,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, node: usize) -> &str {
        &self.node_ids[node]
    }

    /// Neighbours of `node` with edge weights, sorted by neighbour ID.
    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn adjacency(&self) -> &[Vec<(usize, f64)>] {
        &self.adjacency
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search_by_key(&b, |&(x, _)| x).is_ok()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn attribute(&self, name: &str) -> Option<&[String]> {
        self.attribute_names
            .iter()
            .position(|a| a == name)
            .map(|i| self.attribute_values[i].as_slice())
    }

    /// Induced subgraph on nodes with `keep[i]`, preserving relative order.
    pub fn induced(&self, keep: &[bool]) -> Self {
        let mut remap = vec![usize::MAX; self.node_count()];
        let mut ids = Vec::new();
        for (old, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            remap[old] = ids.len();
            ids.push(self.node_ids[old].clone());
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| keep[e.u] && keep[e.v])
            .map(|e| (remap[e.u], remap[e.v], e.weight));
        let attrs = self
            .attribute_names
            .iter()
            .zip(&self.attribute_values)
            .map(|(name, vals)| {
                let kept = vals
                    .iter()
                    .zip(keep)
                    .filter(|(_, &k)| k)
                    .map(|(v, _)| v.clone())
                    .collect();
                (name.clone(), kept)
            })
            .collect();
        Self::from_parts(ids, edges, attrs).expect("induced subgraph of a valid graph is valid")
    }

    /// Connected components as sorted node lists, in order of smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                        queue.push_back(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn summary(&self) -> GraphSummary {
        let mut group_sizes = BTreeMap::new();
        for (name, vals) in self.attribute_names.iter().zip(&self.attribute_values) {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for v in vals {
                *counts.entry(v.clone()).or_default() += 1;
            }
            group_sizes.insert(name.clone(), counts);
        }
        GraphSummary {
            nodes: self.node_count(),
            edges: self.edge_count(),
            groups: group_sizes.iter().map(|(k, v)| (k.clone(), v.len())).collect(),
            group_sizes,
        }
    }

    /// Writes `u<TAB>v<TAB>weight` lines using original node IDs.
    pub fn write_edges(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for e in &self.edges {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.node_ids[e.u], self.node_ids[e.v], e.weight
            )
            .map_err(|err| Error::io(path, err))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes the header row and one row per node in dense-ID order.
    pub fn write_attributes(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut header = String::from("node");
        for name in &self.attribute_names {
            header.push('\t');
            header.push_str(name);
        }
        writeln!(out, "{header}").map_err(|e| Error::io(path, e))?;
        for (i, id) in self.node_ids.iter().enumerate() {
            let mut row = id.clone();
            for vals in &self.attribute_values {
                row.push('\t');
                row.push_str(&vals[i]);
            }
            writeln!(out, "{row}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Node, edge and per-attribute group counts of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    /// Number of distinct groups per attribute.
    pub groups: BTreeMap<String, usize>,
    pub group_sizes: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Node → group index for one attribute. Group indices follow the
/// lexicographic order of the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub attribute: String,
    pub group_of: Vec<usize>,
    pub labels: Vec<String>,
}

impl GroupPartition {
    pub fn group_count(&self) -> usize {
        self.labels.len()
    }

    pub fn node_count(&self) -> usize {
        self.group_of.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.labels.len()];
        for &g in &self.group_of {
            sizes[g] += 1;
        }
        sizes
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.group_of.len())
            .filter(|&v| self.group_of[v] == group)
            .collect()
    }
}

pub fn partition_by(graph: &AttributedGraph, attribute: &str) -> Result<GroupPartition> {
    let values = graph
        .attribute(attribute)
        .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))?;
    partition_values(attribute, values)
}

/// Partitions raw per-node values; labels are sorted lexicographically.
pub fn partition_values(attribute: &str, values: &[String]) -> Result<GroupPartition> {
    let labels: Vec<String> = values
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if labels.len() < 2 {
        return Err(Error::TooFewGroups {
            attribute: attribute.to_string(),
            count: labels.len(),
        });
    }
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let group_of = values.iter().map(|v| index[v.as_str()]).collect();
    Ok(GroupPartition {
        attribute: attribute.to_string(),
        group_of,
        labels,
    })
}

/// Age bins used for the age attribute. Ages below 16 or non-integer values
/// have no bin.
pub fn bin_age(raw: &str) -> Option<&'static str> {
    let age: i64 = raw.trim().parse().ok()?;
    match age {
        16..=18 => Some("16-18"),
        19..=21 => Some("19-21"),
        a if a >= 22 => Some("22+"),
        _ => None,
    }
}

/// Orders original node IDs numerically when both are integers, otherwise
/// lexicographically.
pub fn compare_node_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i128>(), b.parse::<i128>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Induced subgraph on nodes whose `attribute` value is in `allowed`,
/// restricted to its largest connected component. Ties go to the component
/// holding the smallest original node ID.
pub fn select_subgraph(
    graph: &AttributedGraph,
    attribute: &str,
    allowed: &BTreeSet<String>,
) -> Result<AttributedGraph> {
    if allowed.is_empty() {
        return Err(Error::InvalidParameter("allowed value set is empty".into()));
    }
    let values = graph
        .attribute(attribute)
        .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))?;
    let keep: Vec<bool> = values.iter().map(|v| allowed.contains(v)).collect();
    let filtered = graph.induced(&keep);
    if filtered.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(largest_component(&filtered))
}

/// Largest connected component, ties broken by smallest original node ID.
pub fn largest_component(graph: &AttributedGraph) -> AttributedGraph {
    let comps = graph.components();
    let min_id = |c: &Vec<usize>| {
        c.iter()
            .map(|&v| graph.node_id(v))
            .min_by(|a, b| compare_node_ids(a, b))
            .expect("components are non-empty")
    };
    let best = comps
        .iter()
        .max_by(|a, b| {
            a.len()
                .cmp(&b.len())
                .then_with(|| compare_node_ids(min_id(b), min_id(a)))
        })
        .expect("graph is non-empty");
    if best.len() == graph.node_count() {
        return graph.clone();
    }
    let mut keep = vec![false; graph.node_count()];
    for &v in best {
        keep[v] = true;
    }
    graph.induced(&keep)
}

/// What ingestion dropped and why.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub missing_attributes: usize,
    pub invalid_age: usize,
    pub isolated: usize,
    pub self_loops: usize,
    pub duplicate_edges: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Column holding raw ages in years, replaced by its age bin.
    pub age_column: Option<String>,
}

/// Loads a graph with default options.
pub fn load_graph(edge_path: &Path, attr_path: &Path) -> Result<AttributedGraph> {
    load_graph_with(edge_path, attr_path, &LoadOptions::default()).map(|(g, _)| g)
}

fn is_missing(value: &str) -> bool {
    value.is_empty() || value == "null"
}

/// Reads an edge list (`u v [weight]`, whitespace separated, `#` comments)
/// and a tab-separated attribute file with a header row.
///
/// Dense IDs follow attribute-file row order. Nodes with a missing attribute
/// are dropped with their edges, as are nodes left without any edge.
/// Duplicate edges collapse by summing weights; self-loops are skipped.
pub fn load_graph_with(
    edge_path: &Path,
    attr_path: &Path,
    options: &LoadOptions,
) -> Result<(AttributedGraph, IngestReport)> {
    let mut report = IngestReport::default();
    let raw_edges = read_edge_lines(edge_path)?;
    let known: BTreeSet<&str> = raw_edges
        .iter()
        .flat_map(|(a, b, _)| [a.as_str(), b.as_str()])
        .collect();

    let file = File::open(attr_path).map_err(|e| Error::io(attr_path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((i, line)) => {
                let line = line.map_err(|e| Error::io(attr_path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break (i + 1, line);
            }
            None => return Err(Error::parse(attr_path, 1, "missing header row")),
        }
    };
    let names: Vec<String> = header
        .1
        .trim_end_matches('\r')
        .split('\t')
        .skip(1)
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(Error::parse(attr_path, header.0, "header declares no attributes"));
    }
    let age_index = match &options.age_column {
        Some(col) => Some(
            names
                .iter()
                .position(|n| n == col)
                .ok_or_else(|| Error::UnknownAttribute(col.clone()))?,
        ),
        None => None,
    };

    let mut ids: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(attr_path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != names.len() + 1 {
            return Err(Error::parse(
                attr_path,
                i + 1,
                format!("expected {} fields, found {}", names.len() + 1, fields.len()),
            ));
        }
        let node = fields[0].to_string();
        if !known.contains(node.as_str()) {
            return Err(Error::UnknownNode(node));
        }
        if !seen.insert(node.clone()) {
            return Err(Error::parse(attr_path, i + 1, format!("duplicate row for node `{node}`")));
        }
        let mut values: Vec<String> = fields[1..].iter().map(|s| s.trim().to_string()).collect();
        if values.iter().any(|v| is_missing(v)) {
            report.missing_attributes += 1;
            continue;
        }
        if let Some(ai) = age_index {
            match bin_age(&values[ai]) {
                Some(bin) => values[ai] = bin.to_string(),
                None => {
                    report.invalid_age += 1;
                    continue;
                }
            }
        }
        ids.push(node);
        rows.push(values);
    }
    report.missing_attributes += known.len() - seen.len();

    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (a, b, w) in &raw_edges {
        let (Some(&x), Some(&y)) = (index.get(a.as_str()), index.get(b.as_str())) else {
            continue;
        };
        if x == y {
            report.self_loops += 1;
            continue;
        }
        let key = if x < y { (x, y) } else { (y, x) };
        match weights.get_mut(&key) {
            Some(total) => {
                *total += w;
                report.duplicate_edges += 1;
            }
            None => {
                weights.insert(key, *w);
            }
        }
    }

    let columns: Vec<(String, Vec<String>)> = names
        .iter()
        .enumerate()
        .map(|(c, name)| (name.clone(), rows.iter().map(|r| r[c].clone()).collect()))
        .collect();
    let graph = AttributedGraph::from_parts(
        ids,
        weights.into_iter().map(|((u, v), w)| (u, v, w)),
        columns,
    )?;
    let keep: Vec<bool> = (0..graph.node_count()).map(|v| graph.degree(v) > 0).collect();
    report.isolated = keep.iter().filter(|k| !**k).count();
    let graph = if report.isolated > 0 { graph.induced(&keep) } else { graph };
    if graph.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok((graph, report))
}

/// Parses `u v [weight]` lines. Shared with the directed biased-graph format.
pub(crate) fn read_edge_lines(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let weight = match tokens.len() {
            2 => 1.0,
            3 => tokens[2]
                .parse::<f64>()
                .map_err(|_| Error::parse(path, i + 1, format!("bad weight `{}`", tokens[2])))?,
            k => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected `u v [weight]`, found {k} fields"),
                ))
            }
        };
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::parse(path, i + 1, format!("weight must be positive, got {weight}")));
        }
        out.push((tokens[0].to_string(), tokens[1].to_string(), weight));
    }
    Ok(out)
}
