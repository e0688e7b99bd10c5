//! Independent re-evaluations of the trust formulas, written directly from
//! their closed forms without sharing code with the library.

#![allow(dead_code)]

use std::collections::BTreeSet;

use cloudtrust::chain::{GraphEdge, TrustGraph};
use cloudtrust::trust::TrustDegree;
use rand::Rng;

pub fn decay(t_current: f64, t_last: f64, k: u32, tau: f64) -> f64 {
    (-((t_current - t_last) / tau).powf(k as f64)).exp()
}

/// Decay-weighted mean of `(time, score)` pairs plus `bonus`, unclamped.
pub fn direct_trust(history: &[(f64, f64)], t_now: f64, k: u32, tau: f64, bonus: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(t, s) in history {
        let g = decay(t_now, t, k, tau);
        num += g * s;
        den += g;
    }
    num / den + bonus
}

pub fn edge_weight(n_p: u64, n: u64, sl: f64) -> f64 {
    (n_p as f64 * sl) / n as f64
}

pub fn chain_trust(edges: &[(f64, f64)]) -> f64 {
    let num: f64 = edges.iter().map(|(w, dt)| w * dt).sum();
    let den: f64 = edges.iter().map(|(w, _)| w).sum();
    num / den
}

pub fn weighted_mean(values: &[f64; 5], weights: &[f64; 5]) -> f64 {
    let num: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let den: f64 = weights.iter().sum();
    num / den
}

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        actual.abs()
    } else {
        ((actual - expected) / expected).abs()
    }
}

/// Every node sequence from `source` to `target` with distinct nodes and
/// between `min_edges` and `max_edges` edges whose consecutive pairs are all
/// edges of `service`. Enumerates ordered selections of intermediates.
pub fn brute_force_paths(
    graph: &TrustGraph,
    source: &str,
    target: &str,
    service: &str,
    min_edges: usize,
    max_edges: usize,
) -> BTreeSet<Vec<String>> {
    let others: Vec<String> = graph
        .nodes()
        .filter(|n| *n != source && *n != target)
        .map(str::to_owned)
        .collect();
    let mut out = BTreeSet::new();
    let mut seq = Vec::new();
    arrangements(
        &others,
        &mut vec![false; others.len()],
        &mut seq,
        &mut |mid| {
            let edges = mid.len() + 1;
            if edges < min_edges || edges > max_edges {
                return;
            }
            let mut nodes = vec![source.to_owned()];
            nodes.extend(mid.iter().cloned());
            nodes.push(target.to_owned());
            if nodes
                .windows(2)
                .all(|w| graph.edge(&w[0], &w[1], service).is_some())
            {
                out.insert(nodes);
            }
        },
    );
    out
}

/// Calls `visit` with every ordered arrangement of every subset of `items`.
fn arrangements(
    items: &[String],
    used: &mut Vec<bool>,
    seq: &mut Vec<String>,
    visit: &mut dyn FnMut(&[String]),
) {
    visit(seq);
    for i in 0..items.len() {
        if !used[i] {
            used[i] = true;
            seq.push(items[i].clone());
            arrangements(items, used, seq, visit);
            seq.pop();
            used[i] = false;
        }
    }
}

/// Random directed graph over `n` nodes named `n0..`, with edges on two
/// services.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, density: f64) -> TrustGraph {
    let mut g = TrustGraph::new();
    for i in 0..n {
        g.add_node(format!("n{i}"));
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for service in ["s", "t"] {
                if rng.random_bool(density) {
                    let total = rng.random_range(1..=20);
                    let positive = rng.random_range(0..=total);
                    let edge = GraphEdge::new(
                        positive,
                        total,
                        rng.random_range(0.0..=1.0),
                        TrustDegree::new(rng.random_range(0.0..=1.0)).unwrap(),
                    )
                    .unwrap();
                    g.add_edge(&format!("n{i}"), &format!("n{j}"), service, edge)
                        .unwrap();
                }
            }
        }
    }
    g
}
