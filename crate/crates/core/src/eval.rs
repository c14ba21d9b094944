//! Repeated stratified 50/50 splits with label propagation, scored per
//! sensitive group.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GroupPartition;
use crate::metrics::{self, GroupScores};
use crate::propagation::{self, Bandwidth, PropagationGraph};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub folds: usize,
    pub labeled_fraction: f64,
    pub k: usize,
    pub bandwidth: Bandwidth,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            folds: 25,
            labeled_fraction: 0.5,
            k: propagation::DEFAULT_K,
            bandwidth: Bandwidth::Auto,
            max_iters: propagation::DEFAULT_MAX_ITERS,
            tol: propagation::DEFAULT_TOL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub labeled: usize,
    pub sensitive: GroupScores,
    pub control: Option<GroupScores>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub sensitive_attribute: String,
    pub control_attribute: Option<String>,
    pub group_labels: Vec<String>,
    pub group_sizes: Vec<usize>,
    /// Fold-averaged sensitive-attribute F1 per group.
    pub q: Vec<f64>,
    /// Fold-averaged control-attribute macro-F1 per sensitive group.
    pub q_control: Option<Vec<f64>>,
    pub awareness: f64,
    pub disparity: f64,
    pub performance: Option<f64>,
    pub folds: usize,
    pub eval: EvalConfig,
    /// Bandwidth actually used by the similarity graph.
    pub sigma: f64,
    pub fold_results: Vec<FoldResult>,
}

/// Number of labeled members per class: `⌈n·fraction⌉` in total, spread
/// proportionally, at least one labeled and one unlabeled per class.
/// Leftover slots go to the largest fractional remainders, ties in `order`.
pub fn stratified_counts(sizes: &[usize], fraction: f64, order: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let target = (n as f64 * fraction).ceil() as usize;
    let mut counts: Vec<usize> = sizes
        .iter()
        .map(|&s| ((s as f64 * fraction).floor() as usize).min(s - 1).max(1))
        .collect();
    let mut assigned: usize = counts.iter().sum();
    let mut by_remainder: Vec<usize> = order.to_vec();
    by_remainder.sort_by(|&a, &b| {
        let ra = sizes[a] as f64 * fraction - counts[a] as f64;
        let rb = sizes[b] as f64 * fraction - counts[b] as f64;
        rb.total_cmp(&ra)
    });
    while assigned < target {
        let Some(&g) = by_remainder.iter().find(|&&g| counts[g] < sizes[g] - 1) else {
            break;
        };
        counts[g] += 1;
        assigned += 1;
        by_remainder.retain(|&x| x != g);
        by_remainder.push(g);
    }
    counts
}

fn check_stratifiable(partition: &GroupPartition) -> Result<()> {
    for (label, size) in partition.labels.iter().zip(partition.sizes()) {
        if size < 2 {
            return Err(Error::Stratification {
                attribute: partition.attribute.clone(),
                class: label.clone(),
                size,
            });
        }
    }
    Ok(())
}

/// Labeled node set of one fold, stratified by sensitive group.
pub fn fold_split(partition: &GroupPartition, fraction: f64, seed: u64) -> Vec<bool> {
    let mut rng = rng::rng_from(seed);
    let groups = partition.group_count();
    let mut order: Vec<usize> = (0..groups).collect();
    order.shuffle(&mut rng);
    let counts = stratified_counts(&partition.sizes(), fraction, &order);
    let mut labeled = vec![false; partition.node_count()];
    for g in 0..groups {
        let mut members = partition.members(g);
        members.shuffle(&mut rng);
        for &v in &members[..counts[g]] {
            labeled[v] = true;
        }
    }
    labeled
}

/// Scores `points` (row-major, `dim` columns) by predicting the sensitive
/// and, if given, the control attribute over `config.folds` splits.
pub fn cross_validate(
    points: &[f64],
    dim: usize,
    sensitive: &GroupPartition,
    control: Option<&GroupPartition>,
    config: &EvalConfig,
) -> Result<EvaluationReport> {
    let n = sensitive.node_count();
    if points.len() != n * dim {
        return Err(Error::InvalidParameter("embedding rows do not match partition".into()));
    }
    if let Some(c) = control {
        if c.node_count() != n {
            return Err(Error::InvalidParameter("control partition does not match".into()));
        }
    }
    if config.folds == 0 || !(config.labeled_fraction > 0.0 && config.labeled_fraction < 1.0) {
        return Err(Error::InvalidParameter("need folds >= 1 and 0 < labeled_fraction < 1".into()));
    }
    if n < 2 * sensitive.group_count() {
        return Err(Error::InvalidParameter(format!(
            "{n} nodes cannot cover {} groups twice",
            sensitive.group_count()
        )));
    }
    check_stratifiable(sensitive)?;
    if let Some(c) = control {
        check_stratifiable(c)?;
    }
    let graph = propagation::build_propagation_graph(points, dim, config.k, config.bandwidth)?;

    let fold_results: Vec<FoldResult> = (0..config.folds)
        .into_par_iter()
        .map(|fold| run_fold(&graph, sensitive, control, config, fold))
        .collect::<Result<_>>()?;

    let q = metrics::fold_average(&fold_results.iter().map(|f| f.sensitive.scores.as_slice()).collect::<Vec<_>>());
    let q_control = control.map(|_| {
        metrics::fold_average(
            &fold_results
                .iter()
                .map(|f| f.control.as_ref().expect("control scored").scores.as_slice())
                .collect::<Vec<_>>(),
        )
    });
    Ok(EvaluationReport {
        sensitive_attribute: sensitive.attribute.clone(),
        control_attribute: control.map(|c| c.attribute.clone()),
        group_labels: sensitive.labels.clone(),
        group_sizes: sensitive.sizes(),
        awareness: metrics::awareness(&q),
        disparity: metrics::disparity(&q),
        performance: q_control.as_deref().map(metrics::performance),
        q,
        q_control,
        folds: config.folds,
        eval: *config,
        sigma: graph.sigma,
        fold_results,
    })
}

fn run_fold(
    graph: &PropagationGraph,
    sensitive: &GroupPartition,
    control: Option<&GroupPartition>,
    config: &EvalConfig,
    fold: usize,
) -> Result<FoldResult> {
    let labeled = fold_split(sensitive, config.labeled_fraction, rng::derive(config.seed, fold as u64));
    let eval: Vec<usize> = (0..labeled.len()).filter(|&v| !labeled[v]).collect();
    let mut warnings = Vec::new();

    let mut predict = |partition: &GroupPartition| -> Result<Vec<usize>> {
        let seeds: Vec<Option<usize>> = partition
            .group_of
            .iter()
            .zip(&labeled)
            .map(|(&g, &l)| l.then_some(g))
            .collect();
        let out = propagation::propagate(graph, &seeds, partition.group_count(), config.max_iters, config.tol)?;
        for &c in &out.missing_classes {
            warnings.push(format!(
                "fold {fold}: class `{}` of `{}` has no labeled seed",
                partition.labels[c], partition.attribute
            ));
        }
        if !out.converged {
            warnings.push(format!("fold {fold}: propagation of `{}` hit max_iters", partition.attribute));
        }
        Ok(out.predict())
    };

    let pred = predict(sensitive)?;
    let sens_scores = metrics::per_group_f1(&sensitive.attribute, &pred, &sensitive.group_of, sensitive.group_count(), &eval);
    let ctrl_scores = match control {
        Some(c) => {
            let pred_c = predict(c)?;
            Some(metrics::control_group_f1(
                &c.attribute,
                &pred_c,
                &c.group_of,
                c.group_count(),
                &sensitive.group_of,
                sensitive.group_count(),
                &eval,
            ))
        }
        None => None,
    };
    Ok(FoldResult {
        labeled: labeled.iter().filter(|l| **l).count(),
        sensitive: sens_scores,
        control: ctrl_scores,
        warnings,
    })
}
