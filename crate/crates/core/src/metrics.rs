//! Per-group F1 scores and the awareness / disparity / performance metrics.

use serde::{Deserialize, Serialize};

/// Binary confusion counts for one positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn count(predicted: &[usize], truth: &[usize], positive: usize, eval: &[usize]) -> Self {
        let mut c = Confusion::default();
        for &v in eval {
            match (predicted[v] == positive, truth[v] == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        c
    }

    /// F1, or `None` when there are no positives and no predicted positives.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 2.0 * self.tp as f64 / denom as f64)
    }
}

/// Per-group scores for one predicted attribute. `undefined` lists groups
/// whose F1 had no positives on either side and was set to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScores {
    pub attribute: String,
    pub scores: Vec<f64>,
    pub undefined: Vec<usize>,
}

/// One-vs-rest F1 for every sensitive group over `eval`.
pub fn per_group_f1(attribute: &str, predicted: &[usize], truth: &[usize], groups: usize, eval: &[usize]) -> GroupScores {
    let mut undefined = Vec::new();
    let scores = (0..groups)
        .map(|g| {
            Confusion::count(predicted, truth, g, eval).f1().unwrap_or_else(|| {
                undefined.push(g);
                0.0
            })
        })
        .collect();
    GroupScores {
        attribute: attribute.to_string(),
        scores,
        undefined,
    }
}

/// Macro-F1 over the classes that occur in either truth or prediction
/// within `subset`. `None` for an empty subset.
pub fn macro_f1(predicted: &[usize], truth: &[usize], classes: usize, subset: &[usize]) -> Option<f64> {
    let mut seen = vec![false; classes];
    for &v in subset {
        seen[predicted[v]] = true;
        seen[truth[v]] = true;
    }
    let scores: Vec<f64> = (0..classes)
        .filter(|&c| seen[c])
        .map(|c| Confusion::count(predicted, truth, c, subset).f1().unwrap_or(0.0))
        .collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Control-attribute quality per sensitive group: macro-F1 of the control
/// prediction restricted to the eval members of each sensitive group.
pub fn control_group_f1(
    attribute: &str,
    predicted: &[usize],
    truth: &[usize],
    classes: usize,
    sensitive_group_of: &[usize],
    groups: usize,
    eval: &[usize],
) -> GroupScores {
    let mut undefined = Vec::new();
    let scores = (0..groups)
        .map(|g| {
            let subset: Vec<usize> = eval.iter().copied().filter(|&v| sensitive_group_of[v] == g).collect();
            macro_f1(predicted, truth, classes, &subset).unwrap_or_else(|| {
                undefined.push(g);
                0.0
            })
        })
        .collect();
    GroupScores {
        attribute: attribute.to_string(),
        scores,
        undefined,
    }
}

/// Largest per-group score.
pub fn awareness(q: &[f64]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Population variance (divides by the number of groups).
pub fn disparity(q: &[f64]) -> f64 {
    let mean = mean(q);
    q.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / q.len() as f64
}

pub fn performance(q_control: &[f64]) -> f64 {
    mean(q_control)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Element-wise mean of equally long score vectors.
pub fn fold_average(folds: &[&[f64]]) -> Vec<f64> {
    let len = folds.first().map_or(0, |f| f.len());
    (0..len)
        .map(|i| folds.iter().map(|f| f[i]).sum::<f64>() / folds.len() as f64)
        .collect()
}
