use std::collections::BTreeSet;

use crate::chains::{Chain, LevelFn, MassNorm, PointChain};
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::geometry::Cube;

#[derive(Debug, Clone)]
pub struct PatchResult {
    /// Shell depth: the chain is replaced by the clamp where the cube depth
    /// is at most `delta`.
    pub delta: f64,
    pub patched: Chain,
    /// Filling inserted just inside the shell to close the chain again.
    pub patch: Chain,
    pub patch_mass: f64,
    /// Slice of `c - clamp` at the chosen depth.
    pub crossing: PointChain,
    pub crossing_mass: f64,
    /// The crossing mass exceeded the budget.
    pub flagged: bool,
}

/// Replaces `c` by `clamp` in a boundary layer of `cube` and closes the
/// result with a minimal filling next to the layer.
///
/// Depths `δ ∈ (δ0/2, δ0)` are scanned at every value separating two node
/// depths; the one whose crossing slice of `c - clamp` has least l1 mass
/// is used, the smaller depth winning ties.
pub fn boundary_patch(
    c: &Chain,
    clamp: &Chain,
    cube: &Cube,
    delta0: f64,
    budget: f64,
) -> Result<PatchResult> {
    if !(delta0 > 0.0 && delta0 < cube.side() / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "shell depth {delta0} must lie in (0, {})",
            cube.side() / 2.0
        )));
    }
    let g = c.graph().clone();
    let m = c.rank();
    let diff = c.sub(clamp);
    let depth: Vec<f64> = (0..g.node_count())
        .map(|v| cube.depth(&g.position(v)))
        .collect();

    let mut levels: Vec<f64> = depth
        .iter()
        .copied()
        .filter(|&d| d >= delta0 / 2.0 - g.h() && d <= delta0 + g.h())
        .collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let candidates: Vec<f64> = levels
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .filter(|&d| d > delta0 / 2.0 && d < delta0)
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no lattice-resolved shell depth in ({}, {delta0}); lower h or raise δ0",
            delta0 / 2.0
        )));
    }
    let crossing_cost = |delta: f64| -> f64 {
        diff.iter()
            .filter(|&(e, _)| {
                let edge = g.edge(e);
                (depth[edge.u] > delta) != (depth[edge.v] > delta)
            })
            .map(|(_, t)| MassNorm::One.of(t))
            .sum()
    };
    let mut delta = candidates[0];
    let mut best = crossing_cost(delta);
    for &d in &candidates[1..] {
        let cost = crossing_cost(d);
        if cost < best - 1e-12 {
            best = cost;
            delta = d;
        }
    }

    let inner = |e: usize| {
        let edge = g.edge(e);
        depth[edge.u] > delta && depth[edge.v] > delta
    };
    let kept = diff.filter(inner);
    let defect = kept.boundary();
    let reach = (0..g.edge_count())
        .map(|e| g.edge_length(e))
        .fold(0.0, f64::max);
    let band: BTreeSet<usize> = (0..g.node_count())
        .filter(|&v| depth[v] > delta && depth[v] <= delta + reach + 1e-12)
        .collect();
    if let Some((v, _)) = defect.iter().find(|(v, _)| !band.contains(v)) {
        return Err(Error::Infeasible(format!(
            "boundary defect at node {v} lies off the shell band"
        )));
    }
    let mut patch = Chain::zero(g.clone(), m);
    if !defect.is_zero() {
        let nodes: Vec<usize> = band.iter().copied().collect();
        let local = |v: usize| nodes.binary_search(&v).ok();
        let band_edges: Vec<usize> = (0..g.edge_count())
            .filter(|&e| {
                let edge = g.edge(e);
                band.contains(&edge.u) && band.contains(&edge.v)
            })
            .collect();
        for k in 0..m {
            if defect.iter().all(|(_, t)| t[k] == 0) {
                continue;
            }
            let mut net = FlowNetwork::new(nodes.len());
            for (v, t) in defect.iter() {
                net.add_supply(local(v).unwrap(), t[k] as f64);
            }
            let mut arcs = Vec::with_capacity(band_edges.len());
            for &e in &band_edges {
                let edge = g.edge(e);
                let (u, v) = (local(edge.u).unwrap(), local(edge.v).unwrap());
                let len = g.edge_length(e);
                arcs.push((
                    e,
                    net.add_arc(u, v, f64::INFINITY, len),
                    net.add_arc(v, u, f64::INFINITY, len),
                ));
            }
            let sol = net.solve().map_err(|_| {
                Error::Infeasible("shell graph is disconnected; lower h or raise δ0".into())
            })?;
            for (e, f, b) in arcs {
                let beta = (sol.flows[f] - sol.flows[b]).round() as i64;
                if beta != 0 {
                    let mut t = vec![0; m];
                    t[k] = beta;
                    patch.add_to_edge(e, &t);
                }
            }
        }
    }
    let patched = clamp.add(&kept).add(&patch);
    let crossing = diff.slice(&LevelFn::CubeDepth(cube.clone()), delta);
    let crossing_mass = crossing.mass(MassNorm::One);
    Ok(PatchResult {
        delta,
        patch_mass: patch.mass(MassNorm::One, None),
        patched,
        patch,
        crossing,
        crossing_mass,
        flagged: crossing_mass > budget,
    })
}
