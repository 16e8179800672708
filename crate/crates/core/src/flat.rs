//! Flat norms of lattice chains, solved exactly as min-cost flows.
//!
//! Multiplicities are measured in l1 so the problem separates into one flow
//! per component of Z^m. Since |θ|_2 ≤ |θ|_1 ≤ √m |θ|_2, the Euclidean flat
//! norm is sandwiched by `value / √m ≤ F_2 ≤ value`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::chains::{Chain, LevelFn, MassNorm, PointChain, ZeroChain};
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::geometry::{Cube, LatticeGraph};

/// Decomposition `S = A + ∂B` of a 0-chain.
#[derive(Debug, Clone)]
pub struct FlatWitness {
    pub residual: ZeroChain,
    pub filling: Chain,
    pub value: f64,
}

/// Decomposition `S = A + ∂B` of a planar 1-chain; `filling` lists unit
/// squares by lower-left lattice index.
#[derive(Debug, Clone)]
pub struct FlatWitness1 {
    pub residual: Chain,
    pub filling: Vec<([i64; 2], Vec<i64>)>,
    pub value: f64,
}

/// Flat norm of a 0-chain with fillings on the edges of its graph inside `w`.
pub fn flat_norm_zero(s: &ZeroChain, w: &Cube) -> Result<FlatWitness> {
    let g = s.graph().clone();
    let m = s.rank();
    let nn = g.node_count();
    let inside: Vec<bool> = (0..nn).map(|v| w.contains(&g.position(v))).collect();
    let usable: Vec<usize> = (0..g.edge_count())
        .filter(|&e| {
            let edge = g.edge(e);
            inside[edge.u] && inside[edge.v]
        })
        .collect();
    let mut filling = Chain::zero(g.clone(), m);
    for k in 0..m {
        if s.iter().all(|(_, t)| t[k] == 0) {
            continue;
        }
        let mut net = FlowNetwork::new(nn + 1);
        let ground = nn;
        let mut total = 0i64;
        for (v, t) in s.iter() {
            net.add_supply(v, -(t[k] as f64));
            total += t[k];
        }
        net.add_supply(ground, total as f64);
        // Dumping at a node outside the support never beats dumping at the source.
        for (v, _) in s.iter() {
            net.add_arc(v, ground, f64::INFINITY, 1.0);
            net.add_arc(ground, v, f64::INFINITY, 1.0);
        }
        let mut arcs = Vec::with_capacity(usable.len());
        for &e in &usable {
            let edge = g.edge(e);
            let len = g.edge_length(e);
            let fwd = net.add_arc(edge.u, edge.v, f64::INFINITY, len);
            let bwd = net.add_arc(edge.v, edge.u, f64::INFINITY, len);
            arcs.push((e, fwd, bwd));
        }
        let sol = net.solve()?;
        for (e, fwd, bwd) in arcs {
            let beta = (sol.flows[fwd] - sol.flows[bwd]).round() as i64;
            if beta != 0 {
                let mut t = vec![0; m];
                t[k] = beta;
                filling.add_to_edge(e, &t);
            }
        }
    }
    let residual = s.sub(&filling.boundary());
    let value = residual.mass(MassNorm::One) + filling.mass(MassNorm::One, None);
    Ok(FlatWitness {
        residual,
        filling,
        value,
    })
}

/// Flat norm of weighted points with straight-segment fillings: each unit
/// of unmatched mass costs 1, matching costs the Euclidean distance.
pub fn flat_norm_points(p: &PointChain) -> Result<f64> {
    let pts = p.points();
    let k = pts.len();
    let mut value = 0.0;
    for comp in 0..p.rank() {
        let active: Vec<usize> = (0..k).filter(|&i| pts[i].1[comp] != 0).collect();
        if active.is_empty() {
            continue;
        }
        let mut net = FlowNetwork::new(active.len() + 1);
        let ground = active.len();
        let mut total = 0i64;
        for (a, &i) in active.iter().enumerate() {
            let w = pts[i].1[comp];
            net.add_supply(a, w as f64);
            total += w;
            net.add_arc(a, ground, f64::INFINITY, 1.0);
            net.add_arc(ground, a, f64::INFINITY, 1.0);
        }
        net.add_supply(ground, -(total as f64));
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                if a == b {
                    continue;
                }
                let d: f64 = pts[i]
                    .0
                    .iter()
                    .zip(&pts[j].0)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if d < 2.0 {
                    net.add_arc(a, b, f64::INFINITY, d);
                }
            }
        }
        value += net.solve()?.cost;
    }
    Ok(value)
}

fn face_table(g: &LatticeGraph, w: &Cube) -> HashMap<[i64; 2], usize> {
    let mut faces = HashMap::new();
    let mut order: Vec<[i64; 2]> = Vec::new();
    for v in 0..g.node_count() {
        let i = g.node_index(v);
        let ll = [i[0], i[1]];
        let corners = [
            [ll[0], ll[1]],
            [ll[0] + 1, ll[1]],
            [ll[0], ll[1] + 1],
            [ll[0] + 1, ll[1] + 1],
        ];
        let ok = corners
            .iter()
            .all(|c| g.node_id(c).is_some_and(|id| w.contains(&g.position(id))));
        if ok {
            order.push(ll);
        }
    }
    order.sort_unstable();
    for (id, ll) in order.into_iter().enumerate() {
        faces.insert(ll, id);
    }
    faces
}

/// Flat norm of a 1-chain on a planar square lattice (n = 2, radius 1),
/// filling with unit squares inside `w`.
///
/// Solved through the dual: face weights are potentials of a min-cost
/// circulation on the dual graph.
pub fn flat_norm_chain(s: &Chain, w: &Cube) -> Result<FlatWitness1> {
    let g = s.graph().clone();
    if g.dim() != 2 || g.radius() != 1 {
        return Err(Error::Unsupported(
            "1-chain flat norm needs a planar square lattice (n = 2, r = 1); \
             use flat_distance, the slicing proxy, instead"
                .into(),
        ));
    }
    let m = s.rank();
    let h = g.h();
    let area = h * h;
    let faces = face_table(&g, w);
    let nf = faces.len();
    let out = nf;
    let sides: Vec<(usize, usize)> = (0..g.edge_count())
        .map(|e| {
            let edge = g.edge(e);
            let i = g.node_index(edge.u);
            let step = g.edge_step(e);
            let (left, right) = if step == [1, 0] {
                ([i[0], i[1]], [i[0], i[1] - 1])
            } else {
                ([i[0] - 1, i[1]], [i[0], i[1]])
            };
            (
                faces.get(&left).copied().unwrap_or(out),
                faces.get(&right).copied().unwrap_or(out),
            )
        })
        .collect();
    let mut weights = vec![vec![0i64; m]; nf];
    for k in 0..m {
        let mut net = FlowNetwork::new(nf + 1);
        for f in 0..nf {
            net.add_arc(out, f, area, 0.0);
            net.add_arc(f, out, area, 0.0);
        }
        for (e, &(l, r)) in sides.iter().enumerate() {
            if l == r {
                continue;
            }
            let se = s.get(e).map_or(0, |t| t[k]) as f64;
            let len = g.edge_length(e);
            net.add_arc(l, r, len, -se);
            net.add_arc(r, l, len, se);
        }
        let sol = net.solve()?;
        let objective = |p: &[i64]| -> f64 {
            let mut v: f64 = p[..nf].iter().map(|x| x.abs() as f64 * area).sum();
            for (e, &(l, r)) in sides.iter().enumerate() {
                let se = s.get(e).map_or(0, |t| t[k]);
                v += (se - (p[l] - p[r])).abs() as f64 * g.edge_length(e);
            }
            v
        };
        let base = sol.potentials[out];
        let plus: Vec<i64> = sol
            .potentials
            .iter()
            .map(|x| (x - base).round() as i64)
            .collect();
        let minus: Vec<i64> = plus.iter().map(|x| -x).collect();
        let zero = vec![0i64; nf + 1];
        let best = [plus, minus, zero]
            .into_iter()
            .min_by(|a, b| objective(a).total_cmp(&objective(b)))
            .unwrap();
        let dual = -sol.cost;
        if (objective(&best) - dual).abs() > 1e-6 * (1.0 + dual.abs()) {
            log::warn!(
                "flat norm primal {} and dual {} disagree",
                objective(&best),
                dual
            );
        }
        for f in 0..nf {
            weights[f][k] = best[f];
        }
    }
    let mut order: Vec<([i64; 2], usize)> = faces.iter().map(|(&ll, &id)| (ll, id)).collect();
    order.sort_unstable();
    let filling: Vec<([i64; 2], Vec<i64>)> = order
        .into_iter()
        .filter(|(_, id)| weights[*id].iter().any(|&x| x != 0))
        .map(|(ll, id)| (ll, weights[id].clone()))
        .collect();
    let mut residual = s.clone();
    for (e, &(l, r)) in sides.iter().enumerate() {
        let mut d = vec![0i64; m];
        for k in 0..m {
            let pl = if l == out { 0 } else { weights[l][k] };
            let pr = if r == out { 0 } else { weights[r][k] };
            d[k] = -(pl - pr);
        }
        if d.iter().any(|&x| x != 0) {
            residual.add_to_edge(e, &d);
        }
    }
    let value = residual.mass(MassNorm::One, None)
        + filling
            .iter()
            .map(|(_, t)| MassNorm::One.of(t) * area)
            .sum::<f64>();
    Ok(FlatWitness1 {
        residual,
        filling,
        value,
    })
}

/// Boundary of the filling squares as a chain on `g`.
pub fn filling_boundary(g: &Arc<LatticeGraph>, filling: &[([i64; 2], Vec<i64>)]) -> Result<Chain> {
    let m = filling.first().map_or(1, |(_, t)| t.len());
    let mut c = Chain::zero(g.clone(), m);
    for (ll, t) in filling {
        let [i, j] = *ll;
        let sides = [
            ([i, j], [i + 1, j], 1),
            ([i + 1, j], [i + 1, j + 1], 1),
            ([i, j + 1], [i + 1, j + 1], -1),
            ([i, j], [i, j + 1], -1),
        ];
        for (a, b, sign) in sides {
            let (ua, ub) = (g.node_id(&a), g.node_id(&b));
            let (Some(ua), Some(ub)) = (ua, ub) else {
                return Err(Error::InvalidParameter(
                    "filling square off the graph".into(),
                ));
            };
            let (e, s) = g.find_edge(ua, ub).ok_or(Error::NotAdjacent {
                u: ua,
                v: ub,
                fu: ua,
                fv: ub,
            })?;
            let th: Vec<i64> = t.iter().map(|x| x * sign * s).collect();
            c.add_to_edge(e, &th);
        }
    }
    Ok(c)
}

/// Slicing proxy for the flat distance: the largest over coordinate axes of
/// `Σ_s F(slice(c1 - c2, x_i = s)) * h` over levels `s ∈ h(Z + 1/2)`,
/// restricted to edges with midpoint in `w`.
pub fn flat_distance(c1: &Chain, c2: &Chain, w: &Cube) -> Result<f64> {
    let g = c1.graph().clone();
    let diff = c1.sub(c2);
    let diff = diff.filter(|e| w.contains(&g.edge_midpoint(e)));
    if diff.is_zero() {
        return Ok(0.0);
    }
    let h = g.h();
    let (lo, hi) = w.bounding_box();
    let mut best = 0.0_f64;
    for axis in 0..g.dim() {
        let j0 = (lo[axis] / h).floor() as i64 - 1;
        let j1 = (hi[axis] / h).ceil() as i64 + 1;
        let f = LevelFn::Axis(axis);
        let mut total = 0.0;
        for j in j0..=j1 {
            let s = h * (j as f64 + 0.5);
            let sl = diff.slice(&f, s);
            if sl.points().is_empty() {
                continue;
            }
            total += flat_norm_points(&sl)? * h;
        }
        best = best.max(total);
    }
    Ok(best)
}
