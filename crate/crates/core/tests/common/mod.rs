#![allow(dead_code)]

use fairwalk::crosswalk::{self, DEFAULT_CLOSENESS_LENGTH, DEFAULT_CLOSENESS_WALKS};
use fairwalk::embed::sgns_pair_loss;
use fairwalk::graph::{partition_by, AttributedGraph};
use fairwalk::metrics;
use fairwalk::propagation::{propagate, PropagationGraph};
use fairwalk::walk::{sample_step, transition_distribution};
use fairwalk::weights::OutWeights;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHAS: [f64; 5] = [0.01, 0.25, 0.5, 0.75, 0.99];
pub const BETAS: [f64; 7] = [1.0, 2.0, 3.0, 5.0, 8.0, 11.0, 15.0];
pub const PQ: [f64; 5] = [0.1, 0.5, 1.0, 5.0, 10.0];

pub type Check = Result<String, String>;

pub fn unit_weights(n: usize, edges: &[(usize, usize)]) -> OutWeights {
    let mut rows = vec![Vec::new(); n];
    for &(a, b) in edges {
        rows[a].push((b, 1.0));
        rows[b].push((a, 1.0));
    }
    OutWeights::from_rows(rows).unwrap()
}

fn prob(dist: &[(usize, f64)], node: usize) -> f64 {
    dist.iter().find(|d| d.0 == node).map_or(0.0, |d| d.1)
}

/// Hand-enumerated node2vec distributions plus Monte-Carlo agreement.
pub fn check_transitions(samples: usize) -> Check {
    // path t(0) - v(1) - x(2)
    let path = unit_weights(3, &[(0, 1), (1, 2)]);
    let d = transition_distribution(&path, Some(0), 1, 0.5, 2.0);
    if (prob(&d, 0) - 0.8).abs() > 1e-12 || (prob(&d, 2) - 0.2).abs() > 1e-12 {
        return Err(format!("path fixture gave {d:?}"));
    }
    let tri = unit_weights(3, &[(0, 1), (1, 2), (0, 2)]);
    for p in PQ {
        for q in PQ {
            let d = transition_distribution(&tri, Some(0), 1, p, q);
            let want = (1.0 / p) / (1.0 / p + 1.0);
            if (prob(&d, 0) - want).abs() > 1e-12 || (prob(&d, 2) - (1.0 - want)).abs() > 1e-12 {
                return Err(format!("triangle fixture p={p} q={q} gave {d:?}"));
            }
        }
    }

    // Monte-Carlo on a small weighted graph with mixed neighbourhoods
    let rows = vec![
        vec![(1, 1.0), (2, 2.0), (3, 0.5)],
        vec![(0, 1.0), (2, 1.5), (4, 3.0)],
        vec![(0, 2.0), (1, 1.5)],
        vec![(0, 0.5), (4, 1.0)],
        vec![(1, 3.0), (3, 1.0)],
    ];
    let w = OutWeights::from_rows(rows).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for (prev, cur, p, q) in [(Some(0), 1, 0.5, 2.0), (Some(2), 0, 4.0, 0.25), (None, 1, 1.0, 1.0), (Some(4), 1, 0.1, 10.0)] {
        let exact = transition_distribution(&w, prev, cur, p, q);
        let mut counts = vec![0usize; 5];
        let mut buf = Vec::new();
        for _ in 0..samples {
            counts[sample_step(&w, prev, cur, p, q, &mut buf, &mut rng).unwrap()] += 1;
        }
        let tv: f64 = (0..5)
            .map(|x| (counts[x] as f64 / samples as f64 - prob(&exact, x)).abs())
            .sum::<f64>()
            / 2.0;
        worst = worst.max(tv);
    }
    if worst > 0.01 {
        return Err(format!("Monte-Carlo TV {worst:.4} > 0.01"));
    }
    Ok(format!("fixtures exact, max TV {worst:.4} at {samples} samples"))
}

/// Random connected-ish attributed graph with 2..=4 groups.
pub fn random_graph(rng: &mut impl Rng) -> AttributedGraph {
    loop {
        let n = rng.gen_range(4..=30);
        let groups = rng.gen_range(2..=4);
        let density = rng.gen_range(0.1..0.6);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.gen::<f64>() < density {
                    edges.push((a, b, rng.gen_range(0.1..5.0)));
                }
            }
        }
        let labels: Vec<String> = (0..n).map(|_| format!("g{}", rng.gen_range(0..groups))).collect();
        let ids = (0..n).map(|i| i.to_string()).collect();
        let g = AttributedGraph::from_parts(ids, edges, vec![("location".into(), labels)]).unwrap();
        if g.edge_count() > 0 && partition_by(&g, "location").is_ok() {
            return g;
        }
    }
}

/// Row-stochasticity and the alpha split over the full alpha x beta grid.
pub fn check_reweight_grid(graphs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows_checked = 0usize;
    let mut split_checked = 0usize;
    for gi in 0..graphs {
        let g = random_graph(&mut rng);
        let part = partition_by(&g, "location").unwrap();
        let m = crosswalk::estimate_closeness(&g, &part, DEFAULT_CLOSENESS_WALKS, DEFAULT_CLOSENESS_LENGTH, gi as u64)
            .map_err(|e| e.to_string())?;
        for alpha in ALPHAS {
            for beta in BETAS {
                let biased = crosswalk::reweight(&g, &part, &m, alpha, beta).map_err(|e| e.to_string())?;
                for v in 0..g.node_count() {
                    let row = biased.weights.row(v);
                    if row.is_empty() {
                        continue;
                    }
                    let total: f64 = row.iter().map(|r| r.1).sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(format!("graph {gi} node {v} alpha {alpha} beta {beta}: row sums to {total}"));
                    }
                    rows_checked += 1;
                    let own = part.group_of[v];
                    let has_same = row.iter().any(|r| part.group_of[r.0] == own);
                    let has_foreign = row.iter().any(|r| part.group_of[r.0] != own);
                    if has_same && has_foreign {
                        let cross: f64 = row.iter().filter(|r| part.group_of[r.0] != own).map(|r| r.1).sum();
                        if (cross - alpha).abs() > 1e-9 {
                            return Err(format!("graph {gi} node {v}: cross mass {cross} != alpha {alpha}"));
                        }
                        split_checked += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{graphs} graphs, {rows_checked} rows, {split_checked} alpha splits"))
}

fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Analytic SGNS gradients against central differences (h = 1e-5).
pub fn check_gradients(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let dim = 8;
        let k = 3;
        let mut vecs: Vec<Vec<f64>> = (0..2 + k).map(|_| random_vec(&mut rng, dim)).collect();
        let loss_of = |vecs: &[Vec<f64>]| {
            let negs: Vec<&[f64]> = vecs[2..].iter().map(|v| v.as_slice()).collect();
            sgns_pair_loss(&vecs[0], &vecs[1], &negs).loss
        };
        let analytic = {
            let negs: Vec<&[f64]> = vecs[2..].iter().map(|v| v.as_slice()).collect();
            sgns_pair_loss(&vecs[0], &vecs[1], &negs)
        };
        let mut grads = vec![analytic.grad_center.clone(), analytic.grad_context.clone()];
        grads.extend(analytic.grad_negatives.iter().cloned());
        for which in 0..vecs.len() {
            let mut numeric = vec![0.0; dim];
            for i in 0..dim {
                let orig = vecs[which][i];
                vecs[which][i] = orig + h;
                let up = loss_of(&vecs);
                vecs[which][i] = orig - h;
                let down = loss_of(&vecs);
                vecs[which][i] = orig;
                numeric[i] = (up - down) / (2.0 * h);
            }
            let err = rel_err(&grads[which], &numeric);
            if err > 1e-4 {
                return Err(format!("case {case} vector {which}: relative error {err:e}"));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!("{cases} cases, max relative error {worst:.2e}"))
}

pub fn check_harmonic_path() -> Check {
    let g = PropagationGraph {
        neighbors: vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 1.0)], vec![(1, 1.0)]],
        k: 1,
        sigma: 1.0,
    };
    let out = propagate(&g, &[Some(0), None, Some(1)], 2, 1000, 1e-6).map_err(|e| e.to_string())?;
    let b = out.distribution(1);
    if (b[0] - 0.5).abs() <= 1e-6 && (b[1] - 0.5).abs() <= 1e-6 && out.predict()[1] == 0 {
        Ok(format!("middle node {b:?}"))
    } else {
        Err(format!("middle node {b:?}, prediction {}", out.predict()[1]))
    }
}

/// Exact rational number with a positive denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub num: i128,
    pub den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub fn new(num: i128, den: i128) -> Self {
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Ratio { num: s * num / g, den: s * den / g }
    }
    pub fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }
    pub fn sub(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }
    pub fn mul(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.num, self.den * o.den)
    }
    pub fn div_int(self, k: i128) -> Ratio {
        Ratio::new(self.num, self.den * k)
    }
    pub fn gt(self, o: Ratio) -> bool {
        self.num * o.den > o.num * self.den
    }
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub struct Brute {
    pub awareness: Ratio,
    pub disparity: Ratio,
    pub performance: Ratio,
}

pub fn brute_metrics(q: &[Ratio], qc: &[Ratio]) -> Brute {
    let n = q.len() as i128;
    let mut best = q[0];
    for &x in q {
        if x.gt(best) {
            best = x;
        }
    }
    let mean = q.iter().fold(Ratio::new(0, 1), |a, &x| a.add(x)).div_int(n);
    let var = q
        .iter()
        .fold(Ratio::new(0, 1), |a, &x| {
            let d = x.sub(mean);
            a.add(d.mul(d))
        })
        .div_int(n);
    let perf = qc.iter().fold(Ratio::new(0, 1), |a, &x| a.add(x)).div_int(qc.len() as i128);
    Brute {
        awareness: best,
        disparity: var,
        performance: perf,
    }
}

fn close(a: f64, b: Ratio) -> bool {
    (a - b.to_f64()).abs() <= 1e-12 * (1.0 + b.to_f64().abs())
}

/// Metrics on random predictions and random score sets against exact
/// rational recomputation.
pub fn check_metrics(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let groups = rng.gen_range(2..=5);
        let n = rng.gen_range(groups..=60);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..groups)).collect();
        let predicted: Vec<usize> = (0..n).map(|_| rng.gen_range(0..groups)).collect();
        let eval: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
        let scores = metrics::per_group_f1("g", &predicted, &truth, groups, &eval);
        let mut q = Vec::new();
        for g in 0..groups {
            let (mut tp, mut fp, mut fn_) = (0i128, 0i128, 0i128);
            for &v in &eval {
                let (p, t) = (predicted[v] == g, truth[v] == g);
                tp += (p && t) as i128;
                fp += (p && !t) as i128;
                fn_ += (!p && t) as i128;
            }
            let f1 = if tp + fp + fn_ == 0 {
                Ratio::new(0, 1)
            } else {
                // harmonic mean of precision and recall
                let prec = if tp + fp == 0 { Ratio::new(0, 1) } else { Ratio::new(tp, tp + fp) };
                let rec = if tp + fn_ == 0 { Ratio::new(0, 1) } else { Ratio::new(tp, tp + fn_) };
                let s = prec.add(rec);
                if s.num == 0 {
                    Ratio::new(0, 1)
                } else {
                    let prod = prec.mul(rec);
                    Ratio::new(2 * prod.num * s.den, prod.den * s.num)
                }
            };
            if !close(scores.scores[g], f1) {
                return Err(format!("case {case} group {g}: F1 {} vs exact {}", scores.scores[g], f1.to_f64()));
            }
            q.push(f1);
        }

        // random score sets as rationals
        let rs: Vec<Ratio> = (0..groups).map(|_| Ratio::new(rng.gen_range(0..=97), 97)).collect();
        let rc: Vec<Ratio> = (0..groups).map(|_| Ratio::new(rng.gen_range(0..=89), 89)).collect();
        for (set, ctrl) in [(&q, &rc), (&rs, &rc)] {
            let exact = brute_metrics(set, ctrl);
            let fq: Vec<f64> = set.iter().map(|r| r.to_f64()).collect();
            let fc: Vec<f64> = ctrl.iter().map(|r| r.to_f64()).collect();
            if metrics::awareness(&fq) != exact.awareness.to_f64()
                || !close(metrics::disparity(&fq), exact.disparity)
                || !close(metrics::performance(&fc), exact.performance)
            {
                return Err(format!("case {case}: metrics disagree on {fq:?}"));
            }
        }
    }
    let d = metrics::disparity(&[0.2, 0.4, 0.6]);
    if (d - 0.0266667).abs() > 1e-7 {
        return Err(format!("var([0.2,0.4,0.6]) = {d}"));
    }
    Ok(format!("{cases} cases, var([0.2,0.4,0.6]) = {d:.7}"))
}
