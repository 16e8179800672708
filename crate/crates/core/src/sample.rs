//! Seeded random chains for invariant suites.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::chains::Chain;
use crate::geometry::{path_chain, LatticeGraph};

fn random_theta(m: usize, theta_max: i64, rng: &mut impl Rng) -> Vec<i64> {
    loop {
        let t: Vec<i64> = (0..m)
            .map(|_| rng.gen_range(-theta_max..=theta_max))
            .collect();
        if t.iter().any(|&x| x != 0) {
            return t;
        }
    }
}

/// Chain with up to `edges` random edges, each carrying a random nonzero
/// multiplicity with components in `[-theta_max, theta_max]`.
pub fn random_chain(
    g: &Arc<LatticeGraph>,
    m: usize,
    edges: usize,
    theta_max: i64,
    rng: &mut impl Rng,
) -> Chain {
    let mut c = Chain::zero(g.clone(), m);
    for _ in 0..edges {
        let e = rng.gen_range(0..g.edge_count());
        c.add_to_edge(e, &random_theta(m, theta_max, rng));
    }
    c
}

fn hop_path(g: &LatticeGraph, src: usize, dst: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; g.node_count()];
    prev[src] = src;
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        if v == dst {
            let mut path = vec![dst];
            let mut w = dst;
            while w != src {
                w = prev[w];
                path.push(w);
            }
            path.reverse();
            return Some(path);
        }
        for &(w, _) in g.neighbors(v) {
            if prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    None
}

/// Closed chain built from random triangles of shortest lattice paths,
/// stopping before the support would exceed `max_edges`.
pub fn random_closed_chain(
    g: &Arc<LatticeGraph>,
    m: usize,
    max_edges: usize,
    theta_max: i64,
    rng: &mut impl Rng,
) -> Chain {
    let mut c = Chain::zero(g.clone(), m);
    'outer: for _ in 0..64 {
        let [a, b, d] = [(); 3].map(|_| rng.gen_range(0..g.node_count()));
        let theta = random_theta(m, theta_max, rng);
        let mut path = match hop_path(g, a, b) {
            Some(p) => p,
            None => continue,
        };
        for (x, y) in [(b, d), (d, a)] {
            match hop_path(g, x, y) {
                Some(p) => path.extend_from_slice(&p[1..]),
                None => continue 'outer,
            }
        }
        let next = match path_chain(g, &path, &theta) {
            Ok(loop_chain) => c.add(&loop_chain),
            Err(_) => continue,
        };
        if next.len() > max_edges {
            break;
        }
        c = next;
    }
    c
}
