//! Stochastic block model generator with a planted location-like attribute
//! and an optional independent control attribute.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, GraphSummary};
use crate::rng;

/// Independent categorical attribute with an additive intra-class edge bonus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub name: String,
    /// Class probabilities; normalized before sampling.
    pub class_probs: Vec<f64>,
    pub intra_bonus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_intra: f64,
    pub p_inter: f64,
    /// Name of the attribute holding the block label.
    pub block_attribute: String,
    pub control: Option<ControlSpec>,
    pub seed: u64,
}

impl SbmSpec {
    pub fn new(block_sizes: Vec<usize>, p_intra: f64, p_inter: f64, seed: u64) -> Self {
        Self {
            block_sizes,
            p_intra,
            p_inter,
            block_attribute: "location".into(),
            control: None,
            seed,
        }
    }

    pub fn with_control(mut self, control: ControlSpec) -> Self {
        self.control = Some(control);
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return bad("block sizes must be non-empty and >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.p_inter)
            || !(0.0..=1.0).contains(&self.p_intra)
            || self.p_inter > self.p_intra
        {
            return bad(format!(
                "need 0 <= p_inter <= p_intra <= 1, got p_intra={} p_inter={}",
                self.p_intra, self.p_inter
            ));
        }
        if let Some(c) = &self.control {
            if c.class_probs.is_empty()
                || c.class_probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                || c.class_probs.iter().sum::<f64>() <= 0.0
            {
                return bad("control class probabilities must be non-negative with positive sum".into());
            }
            if !(0.0..=1.0).contains(&c.intra_bonus) {
                return bad(format!("control bonus {} outside [0, 1]", c.intra_bonus));
            }
            if c.name == self.block_attribute {
                return bad("control and block attribute share a name".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmOutput {
    pub summary: GraphSummary,
    pub isolated_removed: usize,
}

fn padded_label(prefix: &str, index: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len();
    format!("{prefix}{index:0width$}")
}

/// Samples the graph. Node IDs are the pre-removal indices `0..n`; isolated
/// nodes are removed and counted.
pub fn generate_sbm(spec: &SbmSpec) -> Result<(AttributedGraph, SbmOutput)> {
    spec.validate()?;
    let mut rng = rng::rng_from(spec.seed);
    let n: usize = spec.block_sizes.iter().sum();
    let block_of: Vec<usize> = spec
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();

    let class_of: Option<Vec<usize>> = spec.control.as_ref().map(|c| {
        let total: f64 = c.class_probs.iter().sum();
        (0..n)
            .map(|_| {
                let mut x = rng.gen::<f64>() * total;
                for (k, p) in c.class_probs.iter().enumerate() {
                    if x < *p {
                        return k;
                    }
                    x -= p;
                }
                c.class_probs.len() - 1
            })
            .collect()
    });
    let bonus = spec.control.as_ref().map_or(0.0, |c| c.intra_bonus);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut p = if block_of[i] == block_of[j] {
                spec.p_intra
            } else {
                spec.p_inter
            };
            if let Some(classes) = &class_of {
                if classes[i] == classes[j] {
                    p = (p + bonus).min(1.0);
                }
            }
            if rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }

    let blocks = spec.block_sizes.len();
    let mut attributes = vec![(
        spec.block_attribute.clone(),
        block_of.iter().map(|&b| padded_label("b", b, blocks)).collect(),
    )];
    if let (Some(c), Some(classes)) = (&spec.control, &class_of) {
        let k = c.class_probs.len();
        attributes.push((
            c.name.clone(),
            classes.iter().map(|&x| padded_label("c", x, k)).collect(),
        ));
    }
    let full = AttributedGraph::from_parts((0..n).map(|i| i.to_string()).collect(), edges, attributes)?;
    let keep: Vec<bool> = (0..n).map(|v| full.degree(v) > 0).collect();
    let isolated = keep.iter().filter(|k| !**k).count();
    let graph = if isolated > 0 { full.induced(&keep) } else { full };
    if graph.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let summary = graph.summary();
    Ok((
        graph,
        SbmOutput {
            summary,
            isolated_removed: isolated,
        },
    ))
}
