#![allow(dead_code)]

use std::collections::HashSet;

use cardmso_core::graph::Graph;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Edge bitmask over pairs `i < j` in row order.
fn code(n: usize, adj: &[u32], perm: &[usize]) -> u64 {
    let mut c = 0u64;
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if adj[perm[i]] >> perm[j] & 1 == 1 {
                c |= 1 << bit;
            }
            bit += 1;
        }
    }
    c
}

/// Smallest code over relabellings that list vertices by non-decreasing
/// degree; equal for isomorphic graphs.
fn canonical(n: usize, adj: &[u32]) -> u64 {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| adj[v].count_ones());
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || adj[order[i]].count_ones() != adj[order[start]].count_ones() {
            groups.push((start, i));
            start = i;
        }
    }
    let mut best = u64::MAX;
    permute_groups(n, adj, &mut order, &groups, 0, &mut best);
    best
}

fn permute_groups(n: usize, adj: &[u32], order: &mut Vec<usize>, groups: &[(usize, usize)], g: usize, best: &mut u64) {
    if g == groups.len() {
        *best = (*best).min(code(n, adj, order));
        return;
    }
    let (lo, hi) = groups[g];
    heap_permutations(order, lo, hi - lo, &mut |order| {
        permute_groups(n, adj, order, groups, g + 1, best)
    });
}

fn heap_permutations(order: &mut Vec<usize>, lo: usize, k: usize, visit: &mut dyn FnMut(&mut Vec<usize>)) {
    if k <= 1 {
        visit(order);
        return;
    }
    for i in 0..k {
        heap_permutations(order, lo, k - 1, visit);
        if k.is_multiple_of(2) {
            order.swap(lo + i, lo + k - 1);
        } else {
            order.swap(lo, lo + k - 1);
        }
    }
}

fn to_graph(n: usize, adj: &[u32]) -> Graph {
    let mut g = Graph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if adj[u] >> v & 1 == 1 {
                g.add_edge(u, v).unwrap();
            }
        }
    }
    g
}

/// All connected graphs on exactly `n` vertices up to isomorphism, grown by
/// attaching a vertex to a connected graph on `n - 1` vertices.
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    let mut level: Vec<Vec<u32>> = vec![vec![0]];
    for k in 2..=n {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for adj in &level {
            for nbrs in 1u32..1 << (k - 1) {
                let mut grown = adj.clone();
                grown.push(nbrs);
                for v in 0..k - 1 {
                    if nbrs >> v & 1 == 1 {
                        grown[v] |= 1 << (k - 1);
                    }
                }
                if seen.insert(canonical(k, &grown)) {
                    next.push(grown);
                }
            }
        }
        level = next;
    }
    if n == 0 {
        return vec![Graph::new(0)];
    }
    level.iter().map(|adj| to_graph(n, adj)).collect()
}

/// Connected graphs on `1..=max_n` vertices.
pub fn connected_family(max_n: usize) -> Vec<Graph> {
    (1..=max_n).flat_map(connected_graphs).collect()
}

/// `G(n, 1/2)` samples from a fixed seed.
pub fn random_graphs(n: usize, count: usize, seed: u64) -> Vec<Graph> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut g = Graph::new(n);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.5) {
                        g.add_edge(u, v).unwrap();
                    }
                }
            }
            g
        })
        .collect()
}

/// Copy of `g` with vertices relabelled by `perm` (old `v` becomes `perm[v]`).
pub fn relabel(g: &Graph, perm: &[usize]) -> Graph {
    let edges: Vec<(usize, usize)> = g.edges().map(|(u, v)| (perm[u], perm[v])).collect();
    Graph::from_edges(g.n(), &edges).unwrap()
}
