use fairwalk::embed::{train, EmbedConfig, EmbeddingMatrix, TrainMode};
use fairwalk::graph::{partition_by, AttributedGraph};
use fairwalk::sbm::{generate_sbm, SbmSpec};
use fairwalk::walk::{generate_walks, WalkConfig, WalkSource};
use fairwalk::weights::OutWeights;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn two_cliques(size: usize) -> AttributedGraph {
    let mut edges = Vec::new();
    for base in [0, size] {
        for a in 0..size {
            for b in (a + 1)..size {
                edges.push((base + a, base + b, 1.0));
            }
        }
    }
    let ids = (0..2 * size).map(|i| i.to_string()).collect();
    let labels = (0..2 * size).map(|i| if i < size { "x" } else { "y" }.to_string()).collect();
    AttributedGraph::from_parts(ids, edges, vec![("location".into(), labels)]).unwrap()
}

fn corpus(g: &AttributedGraph, seed: u64) -> Vec<Vec<usize>> {
    let cfg = WalkConfig {
        walks_per_node: 10,
        walk_length: 40,
        seed,
        ..Default::default()
    };
    generate_walks(&OutWeights::normalized(g), &cfg, WalkSource::Baseline).unwrap().walks
}

#[test]
fn disconnected_cliques_separate() {
    let g = two_cliques(8);
    let cfg = EmbedConfig { dim: 16, seed: 4, ..Default::default() };
    let m = train(&corpus(&g, 1), g.node_count(), &cfg).unwrap();
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for a in 0..16 {
        for b in (a + 1)..16 {
            let c = cosine(m.vector(a), m.vector(b));
            if (a < 8) == (b < 8) {
                intra.push(c);
            } else {
                inter.push(c);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&intra) > mean(&inter), "intra {} inter {}", mean(&intra), mean(&inter));
}

#[test]
fn repeated_pair_loss_decreases() {
    let walks = vec![vec![0, 1]; 50];
    let cfg = EmbedConfig { dim: 8, epochs: 10, seed: 2, ..Default::default() };
    let m = train(&walks, 2, &cfg).unwrap();
    let trace = m.meta.unwrap().epoch_loss;
    assert_eq!(trace.len(), 10);
    for w in trace.windows(2) {
        assert!(w[1] < w[0], "{trace:?}");
    }
}

#[test]
fn later_epochs_have_lower_loss() {
    let (g, _) = generate_sbm(&SbmSpec::new(vec![40, 40], 0.2, 0.02, 5)).unwrap();
    let cfg = EmbedConfig { dim: 16, epochs: 5, seed: 1, ..Default::default() };
    let trace = train(&corpus(&g, 3), g.node_count(), &cfg).unwrap().meta.unwrap().epoch_loss;
    assert!(trace[4] < trace[0], "{trace:?}");
}

fn nearest_neighbour_accuracy(m: &EmbeddingMatrix, labels: &[usize]) -> f64 {
    let n = m.node_count();
    let hits = (0..n)
        .filter(|&a| {
            let best = (0..n)
                .filter(|&b| b != a)
                .max_by(|&x, &y| cosine(m.vector(a), m.vector(x)).total_cmp(&cosine(m.vector(a), m.vector(y))))
                .unwrap();
            labels[best] == labels[a]
        })
        .count();
    hits as f64 / n as f64
}

#[test]
fn sbm_blocks_are_recoverable() {
    let (g, _) = generate_sbm(&SbmSpec::new(vec![60, 60], 0.2, 0.01, 9)).unwrap();
    let part = partition_by(&g, "location").unwrap();
    let cfg = EmbedConfig { dim: 32, epochs: 2, seed: 6, ..Default::default() };
    let m = train(&corpus(&g, 8), g.node_count(), &cfg).unwrap();
    let acc = nearest_neighbour_accuracy(&m, &part.group_of);
    assert!(acc >= 0.95, "1-NN accuracy {acc}");
}

#[test]
fn exact_mode_is_reproducible() {
    let g = two_cliques(6);
    let walks = corpus(&g, 11);
    let cfg = EmbedConfig { dim: 8, epochs: 2, seed: 12, ..Default::default() };
    let a = train(&walks, 12, &cfg).unwrap();
    let b = train(&walks, 12, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train(&walks, 12, &EmbedConfig { seed: 13, ..cfg }).unwrap();
    assert_ne!(a.input, c.input);
}

#[test]
fn parallel_mode_separates_cliques() {
    let g = two_cliques(8);
    let cfg = EmbedConfig { dim: 16, seed: 4, mode: TrainMode::Parallel, ..Default::default() };
    let m = train(&corpus(&g, 1), g.node_count(), &cfg).unwrap();
    assert!(m.input.iter().all(|x| x.is_finite()));
    let part = partition_by(&g, "location").unwrap();
    assert_eq!(nearest_neighbour_accuracy(&m, &part.group_of), 1.0);
}
