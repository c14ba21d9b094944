//! Skip-gram with negative sampling over walk corpora.

use std::cell::Cell;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Exponent applied to node frequencies for the negative-sampling distribution.
pub const UNIGRAM_POWER: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Sequential and bit-reproducible.
    Exact,
    /// Lock-free updates from several threads; not reproducible.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate; decays linearly to `lr / 100`.
    pub lr: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
            mode: TrainMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: EmbedConfig,
    pub lr_final: f64,
    /// Mean pair loss per epoch.
    pub epoch_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    /// Row-major `n x dim` input ("center") vectors; these are the embeddings.
    pub input: Vec<f64>,
    /// Row-major `n x dim` output ("context") vectors.
    pub output: Vec<f64>,
    pub meta: Option<TrainingMeta>,
}

impl EmbeddingMatrix {
    pub fn node_count(&self) -> usize {
        self.input.len() / self.dim
    }

    pub fn vector(&self, node: usize) -> &[f64] {
        &self.input[node * self.dim..(node + 1) * self.dim]
    }

    /// Text matrix: `n dim` header, then `node_id v1 ... v_dim` per line.
    pub fn write(&self, names: &[String], path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{} {}", self.node_count(), self.dim).map_err(|e| Error::io(path, e))?;
        for (v, name) in names.iter().enumerate().take(self.node_count()) {
            let mut line = name.clone();
            for x in self.vector(v) {
                line.push(' ');
                line.push_str(&x.to_string());
            }
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a text matrix; only input vectors are restored.
    pub fn read(path: &Path) -> Result<(Vec<String>, Self)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(path, 1, "header must be `n dim`")))
            .collect::<Result<_>>()?;
        let [n, dim] = dims[..] else {
            return Err(Error::parse(path, 1, "header must be `n dim`"));
        };
        let mut names = Vec::with_capacity(n);
        let mut input = Vec::with_capacity(n * dim);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let name = tokens.next().expect("non-empty line");
            let before = input.len();
            for t in tokens {
                input.push(t.parse::<f64>().map_err(|_| Error::parse(path, i + 2, format!("bad value `{t}`")))?);
            }
            if input.len() - before != dim {
                return Err(Error::parse(path, i + 2, format!("expected {dim} values")));
            }
            names.push(name.to_string());
        }
        if names.len() != n {
            return Err(Error::parse(path, 1, format!("header says {n} rows, found {}", names.len())));
        }
        Ok((
            names,
            Self {
                dim,
                output: vec![0.0; input.len()],
                input,
                meta: None,
            },
        ))
    }
}

/// Occurrence count of every node `0..n` in the corpus.
pub fn frequency_table(walks: &[Vec<usize>], n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for &v in walks.iter().flatten() {
        counts[v] += 1;
    }
    counts
}

/// Negative-sampling probabilities, proportional to `count^0.75`.
pub fn negative_distribution(counts: &[u64]) -> Vec<f64> {
    let raw: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(UNIGRAM_POWER)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairLoss {
    pub loss: f64,
    pub grad_center: Vec<f64>,
    pub grad_context: Vec<f64>,
    pub grad_negatives: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-ln σ(c·o) - Σ ln σ(-c·n)` and its exact gradients.
pub fn sgns_pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairLoss {
    let pos = dot(center, context);
    let mut loss = -log_sigmoid(pos);
    let g_pos = sigmoid(pos) - 1.0;
    let mut grad_center: Vec<f64> = context.iter().map(|x| g_pos * x).collect();
    let grad_context = center.iter().map(|x| g_pos * x).collect();
    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let s = dot(center, neg);
        loss -= log_sigmoid(-s);
        let g = sigmoid(s);
        for (gc, x) in grad_center.iter_mut().zip(neg.iter()) {
            *gc += g * x;
        }
        grad_negatives.push(center.iter().map(|x| g * x).collect());
    }
    PairLoss {
        loss,
        grad_center,
        grad_context,
        grad_negatives,
    }
}

/// Parameter cell: `Cell` for the sequential path, relaxed atomics for the
/// lock-free path.
trait Slot {
    fn get(&self) -> f64;
    fn set(&self, v: f64);
}

impl Slot for Cell<f64> {
    #[inline]
    fn get(&self) -> f64 {
        Cell::get(self)
    }
    #[inline]
    fn set(&self, v: f64) {
        Cell::set(self, v)
    }
}

impl Slot for AtomicU64 {
    #[inline]
    fn get(&self) -> f64 {
        f64::from_bits(self.load(Ordering::Relaxed))
    }
    #[inline]
    fn set(&self, v: f64) {
        self.store(v.to_bits(), Ordering::Relaxed)
    }
}

/// One SGD step on a (center, context) pair plus negatives. Returns the loss
/// before the update.
#[inline]
fn sgd_pair<S: Slot>(
    input: &[S],
    output: &[S],
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    acc: &mut [f64],
) -> f64 {
    let c = &input[center * dim..(center + 1) * dim];
    acc.fill(0.0);
    let mut loss = 0.0;
    for (k, &target) in std::iter::once(&context).chain(negatives).enumerate() {
        let label = if k == 0 { 1.0 } else { 0.0 };
        let t = &output[target * dim..(target + 1) * dim];
        let f: f64 = c.iter().zip(t).map(|(a, b)| a.get() * b.get()).sum();
        loss -= if k == 0 { log_sigmoid(f) } else { log_sigmoid(-f) };
        let g = (label - sigmoid(f)) * lr;
        for ((a, ci), ti) in acc.iter_mut().zip(c).zip(t) {
            let tv = ti.get();
            *a += g * tv;
            ti.set(tv + g * ci.get());
        }
    }
    for (a, ci) in acc.iter().zip(c) {
        ci.set(ci.get() + a);
    }
    loss
}

fn pair_count(walks: &[Vec<usize>], window: usize) -> usize {
    walks
        .iter()
        .map(|w| {
            let len = w.len();
            (0..len)
                .map(|i| i.min(window) + (len - 1 - i).min(window))
                .sum::<usize>()
        })
        .sum()
}

fn init_input(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::rng_from(seed);
    let half = 0.5 / dim as f64;
    (0..n * dim).map(|_| rng.gen_range(-half..half)).collect()
}

fn draw_negatives<R: Rng>(sampler: &WeightedIndex<f64>, context: usize, k: usize, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    while out.len() < k {
        let x = sampler.sample(rng);
        if x != context {
            out.push(x);
        }
    }
}

/// Trains embeddings for nodes `0..n` from a walk corpus.
pub fn train(walks: &[Vec<usize>], n: usize, config: &EmbedConfig) -> Result<EmbeddingMatrix> {
    if config.dim < 2 {
        return Err(Error::InvalidParameter(format!("dim must be >= 2, got {}", config.dim)));
    }
    if config.window == 0 || !(config.lr > 0.0) {
        return Err(Error::InvalidParameter("window must be >= 1 and lr > 0".into()));
    }
    let counts = frequency_table(walks, n);
    if let Some(v) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidParameter(format!("node {v} never appears in the corpus")));
    }
    let dim = config.dim;
    let input = init_input(n, dim, rng::derive(config.seed, 0));
    let output = vec![0.0; n * dim];
    let mut meta = TrainingMeta {
        config: *config,
        lr_final: config.lr,
        epoch_loss: Vec::new(),
    };
    if config.epochs == 0 {
        return Ok(EmbeddingMatrix {
            dim,
            input,
            output,
            meta: Some(meta),
        });
    }
    let probs = negative_distribution(&counts);
    let distinct = probs.iter().filter(|&&p| p > 0.0).count();
    let negatives = if distinct < 2 { 0 } else { config.negatives };
    let sampler = WeightedIndex::new(&probs).expect("corpus has positive counts");
    let total = (pair_count(walks, config.window) * config.epochs).max(1);
    let lr_at = |done: usize| config.lr * (1.0 - 0.99 * (done as f64 / total as f64).min(1.0));

    let (input, output) = match config.mode {
        TrainMode::Exact => {
            let mut input = input;
            let mut output = output;
            let ins = Cell::from_mut(input.as_mut_slice()).as_slice_of_cells();
            let outs = Cell::from_mut(output.as_mut_slice()).as_slice_of_cells();
            let mut rng = rng::rng_from(rng::derive(config.seed, 1));
            let mut acc = vec![0.0; dim];
            let mut negs = Vec::with_capacity(negatives);
            let mut done = 0usize;
            for epoch in 0..config.epochs {
                let mut loss_sum = 0.0;
                let mut pairs = 0usize;
                for walk in walks {
                    for (i, &center) in walk.iter().enumerate() {
                        let lo = i.saturating_sub(config.window);
                        let hi = (i + config.window).min(walk.len() - 1);
                        for j in lo..=hi {
                            if j == i {
                                continue;
                            }
                            let context = walk[j];
                            draw_negatives(&sampler, context, negatives, &mut rng, &mut negs);
                            loss_sum += sgd_pair(ins, outs, dim, center, context, &negs, lr_at(done), &mut acc);
                            done += 1;
                            pairs += 1;
                        }
                    }
                }
                let mean = if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 };
                if !mean.is_finite() {
                    return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}")));
                }
                meta.epoch_loss.push(mean);
            }
            meta.lr_final = lr_at(done);
            (input, output)
        }
        TrainMode::Parallel => {
            let ins: Vec<AtomicU64> = input.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect();
            let outs: Vec<AtomicU64> = output.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect();
            let done = AtomicUsize::new(0);
            let shards = rayon::current_num_threads().max(1);
            let chunk = walks.len().div_ceil(shards).max(1);
            for epoch in 0..config.epochs {
                let (loss_sum, pairs) = walks
                    .par_chunks(chunk)
                    .enumerate()
                    .map(|(shard, part)| {
                        let mut rng = rng::rng_from(rng::derive2(config.seed, epoch as u64 + 2, shard as u64));
                        let mut acc = vec![0.0; dim];
                        let mut negs = Vec::with_capacity(negatives);
                        let mut loss_sum = 0.0;
                        let mut pairs = 0usize;
                        for walk in part {
                            for (i, &center) in walk.iter().enumerate() {
                                let lo = i.saturating_sub(config.window);
                                let hi = (i + config.window).min(walk.len() - 1);
                                let lr = lr_at(done.load(Ordering::Relaxed));
                                for j in lo..=hi {
                                    if j == i {
                                        continue;
                                    }
                                    let context = walk[j];
                                    draw_negatives(&sampler, context, negatives, &mut rng, &mut negs);
                                    loss_sum += sgd_pair(&ins, &outs, dim, center, context, &negs, lr, &mut acc);
                                    pairs += 1;
                                }
                                done.fetch_add(hi - lo, Ordering::Relaxed);
                            }
                        }
                        (loss_sum, pairs)
                    })
                    .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
                let mean = if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 };
                if !mean.is_finite() {
                    return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}")));
                }
                meta.epoch_loss.push(mean);
            }
            meta.lr_final = lr_at(done.load(Ordering::Relaxed));
            let unpack = |v: Vec<AtomicU64>| v.into_iter().map(|a| f64::from_bits(a.into_inner())).collect::<Vec<_>>();
            (unpack(ins), unpack(outs))
        }
    };
    if input.iter().chain(&output).any(|x| !x.is_finite()) {
        return Err(Error::Diverged("non-finite parameter after training".into()));
    }
    Ok(EmbeddingMatrix {
        dim,
        input,
        output,
        meta: Some(meta),
    })
}
