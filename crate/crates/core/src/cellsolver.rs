//! The cell problem: minimal energy of divergence-free lattice chains in a
//! cube that agree with the straight staircase near the cube boundary.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::chains::{euclid, Chain};
use crate::energy::{DensityKind, EdgeProfile, EnergyDensity};
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::geometry::{norm, staircase_line, Cube, LatticeGraph, Spacing, DEFAULT_NODE_CAP};

/// Improving cycle: total cost, delta index, and (free edge index, sign) steps.
type Candidate = (f64, usize, Vec<(usize, i64)>);

/// Largest number of free edges the enumerator accepts.
pub const EXACT_EDGE_CAP: usize = 18;
/// Largest number of multiplicity states per edge the enumerator accepts.
pub const EXACT_STATE_CAP: usize = 25;
/// Default bound on improving cycles applied by the heuristic.
pub const DEFAULT_ITERATION_LIMIT: usize = 10_000;

#[derive(Debug, Clone)]
pub struct CellProblem {
    pub b: Vec<i64>,
    pub t: Vec<f64>,
    pub side: f64,
    pub center: Vec<f64>,
    pub spacing: Spacing,
    pub r: u32,
    pub theta_max: i64,
    pub density: EnergyDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverTag {
    Exact,
    Heuristic,
}

impl fmt::Display for SolverTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverTag::Exact => "exact",
            SolverTag::Heuristic => "heuristic",
        })
    }
}

impl std::str::FromStr for SolverTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverTag::Exact),
            "heuristic" => Ok(SolverTag::Heuristic),
            other => Err(Error::InvalidParameter(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub chain: Chain,
    pub value: f64,
    pub solver: SolverTag,
    /// Improving cycles applied (heuristic) or assignments visited (exact).
    pub iterations: usize,
    pub iteration_limit: bool,
    pub lower_bound: f64,
    /// Value after each applied improvement, starting from the clamp.
    pub history: Vec<f64>,
}

impl CellProblem {
    /// Validates and builds a problem; `theta_max` defaults to `|b|_inf + 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        b: &[i64],
        t: &[f64],
        side: f64,
        center: &[f64],
        spacing: Spacing,
        r: u32,
        theta_max: Option<i64>,
        density: EnergyDensity,
    ) -> Result<CellProblem> {
        if b.is_empty() || b.iter().all(|&x| x == 0) {
            return Err(Error::InvalidParameter("b must be nonzero".into()));
        }
        let nt = norm(t);
        if (nt - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnit { norm: nt });
        }
        if center.len() != t.len() {
            return Err(Error::InvalidParameter(
                "centre and t dimensions differ".into(),
            ));
        }
        if density.rank() != b.len() || density.dim() != t.len() {
            return Err(Error::InvalidParameter(format!(
                "density is for m={}, n={} but b has {} and t has {} components",
                density.rank(),
                density.dim(),
                b.len(),
                t.len()
            )));
        }
        let binf = b.iter().map(|x| x.abs()).max().unwrap_or(0);
        let theta_max = theta_max.unwrap_or(binf + 1);
        if theta_max < binf {
            return Err(Error::InvalidParameter(format!(
                "theta_max {theta_max} is below |b|_inf = {binf}"
            )));
        }
        if side < 4.0 * spacing.h() * r as f64 - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "cube side {side} is below 4 h r = {}",
                4.0 * spacing.h() * r as f64
            )));
        }
        Ok(CellProblem {
            b: b.to_vec(),
            t: t.to_vec(),
            side,
            center: center.to_vec(),
            spacing,
            r,
            theta_max,
            density,
        })
    }

    pub fn cube(&self) -> Result<Cube> {
        Cube::new(&self.t, self.side, &self.center)
    }

    /// Canonical parameter string hashed into [`CellProblem::hash`].
    pub fn canonical(&self) -> String {
        format!(
            "b={:?};t={:?};T={:?};x={:?};h=1/{};r={};thetamax={};density={}",
            self.b,
            self.t,
            self.side,
            self.center,
            self.spacing.k(),
            self.r,
            self.theta_max,
            self.density.describe()
        )
    }

    /// First 16 hex digits of the SHA-256 of the canonical parameters.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn states(&self) -> usize {
        ((2 * self.theta_max + 1) as usize).saturating_pow(self.b.len() as u32)
    }

    pub fn setup(&self) -> Result<CellSetup> {
        CellSetup::new(self)
    }
}

/// Certified lower bound `c0 |b| T (1 - 2rh/T)`.
pub fn lower_bound(p: &CellProblem) -> f64 {
    let rh = p.r as f64 * p.spacing.h();
    p.density.c0() * euclid(&p.b) * p.side * (1.0 - 2.0 * rh / p.side)
}

/// Lattice, clamp and free-edge bookkeeping shared by both solvers.
#[derive(Debug, Clone)]
pub struct CellSetup {
    pub cube: Cube,
    pub inner: Cube,
    pub graph: Arc<LatticeGraph>,
    pub clamp: Chain,
    pub free: Vec<usize>,
    is_free: Vec<bool>,
    profiles: BTreeMap<usize, EdgeProfile>,
    /// Boundary of the clamp restricted to frozen edges, at free nodes.
    balance: BTreeMap<usize, Vec<i64>>,
}

impl CellSetup {
    fn new(p: &CellProblem) -> Result<CellSetup> {
        let cube = p.cube()?;
        let graph = Arc::new(LatticeGraph::build(
            &cube,
            p.spacing,
            p.r,
            p.r,
            DEFAULT_NODE_CAP,
        )?);
        let clamp = staircase_line(&p.b, &p.t, &cube, &graph)?;
        let inner = cube.with_side(p.side - 2.0 * p.r as f64 * p.spacing.h())?;
        let inside: Vec<bool> = (0..graph.node_count())
            .map(|v| inner.contains(&graph.position(v)))
            .collect();
        let mut is_free = vec![false; graph.edge_count()];
        let mut free = Vec::new();
        for (e, edge) in graph.edges().iter().enumerate() {
            if inside[edge.u] && inside[edge.v] {
                is_free[e] = true;
                free.push(e);
            }
        }
        let mut profiles = BTreeMap::new();
        for &e in &free {
            profiles.insert(e, EdgeProfile::new(&p.density, &graph, e, 1.0, Some(&cube)));
        }
        for (e, _) in clamp.iter() {
            profiles
                .entry(e)
                .or_insert_with(|| EdgeProfile::new(&p.density, &graph, e, 1.0, Some(&cube)));
        }
        let m = p.b.len();
        let mut balance: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
        for &e in &free {
            let edge = graph.edge(e);
            balance.entry(edge.u).or_insert_with(|| vec![0; m]);
            balance.entry(edge.v).or_insert_with(|| vec![0; m]);
        }
        let frozen = clamp.filter(|e| !is_free[e]);
        for (v, t) in frozen.boundary().iter() {
            if let Some(b) = balance.get_mut(&v) {
                b.copy_from_slice(t);
            }
        }
        Ok(CellSetup {
            cube,
            inner,
            graph,
            clamp,
            free,
            is_free,
            profiles,
            balance,
        })
    }

    pub fn is_free(&self, e: usize) -> bool {
        self.is_free[e]
    }

    fn cost(&self, d: &EnergyDensity, e: usize, theta: &[i64]) -> f64 {
        match self.profiles.get(&e) {
            Some(p) => p.cost(d, theta),
            None => EdgeProfile::new(d, &self.graph, e, 1.0, Some(&self.cube)).cost(d, theta),
        }
    }

    /// F_1 of `c` over the cube.
    pub fn value(&self, d: &EnergyDensity, c: &Chain) -> f64 {
        c.iter().map(|(e, t)| self.cost(d, e, t)).sum()
    }

    /// Whether `c` is admissible: equal to the clamp on frozen edges and
    /// closed at every node touched by a free edge.
    pub fn admissible(&self, c: &Chain) -> bool {
        let frozen_ok = self
            .clamp
            .iter()
            .filter(|&(e, _)| !self.is_free[e])
            .all(|(e, t)| c.get(e) == Some(t))
            && c.iter()
                .filter(|&(e, _)| !self.is_free[e])
                .all(|(e, _)| self.clamp.get(e).is_some());
        let bnd = c.boundary();
        frozen_ok && self.balance.keys().all(|&v| bnd.get(v).is_none())
    }
}

fn theta_states(m: usize, cap: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![-cap; m];
    loop {
        out.push(cur.clone());
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < cap {
                cur[i] += 1;
                break;
            }
            cur[i] = -cap;
        }
    }
}

fn separable(d: &EnergyDensity) -> bool {
    d.rank() == 1 || matches!(d.kind(), DensityKind::Split2 { .. })
}

/// Exact lattice minimum.
///
/// Up to [`EXACT_EDGE_CAP`] free edges and [`EXACT_STATE_CAP`] states per
/// edge the minimum is found by exhaustive enumeration. Larger problems
/// whose density is separable across components (m = 1, or `split2`) are
/// solved exactly as one min-cost flow per component.
pub fn solve_exact(p: &CellProblem) -> Result<CellSolution> {
    let s = p.setup()?;
    if s.free.len() <= EXACT_EDGE_CAP && p.states() <= EXACT_STATE_CAP {
        enumerate(p, &s)
    } else if separable(&p.density) {
        flow_exact(p, &s)
    } else {
        Err(Error::ExactCapExceeded {
            free_edges: s.free.len(),
            edge_cap: EXACT_EDGE_CAP,
            states: p.states(),
            state_cap: EXACT_STATE_CAP,
        })
    }
}

/// Exhaustive enumeration only; errors beyond the caps.
pub fn solve_enumerate(p: &CellProblem) -> Result<CellSolution> {
    let s = p.setup()?;
    if s.free.len() > EXACT_EDGE_CAP || p.states() > EXACT_STATE_CAP {
        return Err(Error::ExactCapExceeded {
            free_edges: s.free.len(),
            edge_cap: EXACT_EDGE_CAP,
            states: p.states(),
            state_cap: EXACT_STATE_CAP,
        });
    }
    enumerate(p, &s)
}

struct Search {
    states: Vec<Vec<i64>>,
    // per free edge (in order): endpoints and cost of every state
    ends: Vec<(usize, usize)>,
    costs: Vec<Vec<f64>>,
    // per node: number of still unassigned incident free edges
    remaining: BTreeMap<usize, usize>,
    // per node: current boundary from frozen and assigned edges
    net: BTreeMap<usize, Vec<i64>>,
    choice: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    visited: usize,
}

impl Search {
    fn apply(&mut self, i: usize, st: usize, sign: i64) {
        let (u, v) = self.ends[i];
        let t = &self.states[st];
        for (k, x) in t.iter().enumerate() {
            self.net.get_mut(&v).unwrap()[k] += sign * x;
            self.net.get_mut(&u).unwrap()[k] -= sign * x;
        }
    }

    fn dfs(&mut self, i: usize, cost: f64) {
        self.visited += 1;
        if let Some((b, _)) = &self.best {
            if cost >= *b - 1e-12 * (1.0 + b.abs()) {
                return;
            }
        }
        if i == self.ends.len() {
            self.best = Some((cost, self.choice.clone()));
            return;
        }
        let (u, v) = self.ends[i];
        *self.remaining.get_mut(&u).unwrap() -= 1;
        *self.remaining.get_mut(&v).unwrap() -= 1;
        let last_u = self.remaining[&u] == 0;
        let last_v = self.remaining[&v] == 0;
        // A node closing with this edge forces its value.
        let forced: Option<Vec<i64>> = if last_v {
            Some(self.net[&v].iter().map(|x| -x).collect())
        } else if last_u {
            Some(self.net[&u].clone())
        } else {
            None
        };
        for st in 0..self.states.len() {
            if let Some(f) = &forced {
                if &self.states[st] != f {
                    continue;
                }
            }
            self.apply(i, st, 1);
            let ok = (!last_u || self.net[&u].iter().all(|&x| x == 0))
                && (!last_v || self.net[&v].iter().all(|&x| x == 0));
            if ok {
                self.choice[i] = st;
                let c = cost + self.costs[i][st];
                self.dfs(i + 1, c);
            }
            self.apply(i, st, -1);
        }
        *self.remaining.get_mut(&u).unwrap() += 1;
        *self.remaining.get_mut(&v).unwrap() += 1;
    }
}

fn enumerate(p: &CellProblem, s: &CellSetup) -> Result<CellSolution> {
    let m = p.b.len();
    let states = theta_states(m, p.theta_max);
    let ends: Vec<(usize, usize)> = s
        .free
        .iter()
        .map(|&e| {
            let edge = s.graph.edge(e);
            (edge.u, edge.v)
        })
        .collect();
    let costs: Vec<Vec<f64>> = s
        .free
        .iter()
        .map(|&e| states.iter().map(|t| s.cost(&p.density, e, t)).collect())
        .collect();
    let mut remaining = BTreeMap::new();
    for &(u, v) in &ends {
        *remaining.entry(u).or_insert(0) += 1;
        *remaining.entry(v).or_insert(0) += 1;
    }
    let net = s.balance.clone();
    let frozen = s.clamp.filter(|e| !s.is_free(e));
    let base = s.value(&p.density, &frozen);
    let mut search = Search {
        states,
        ends,
        costs,
        remaining,
        net,
        choice: vec![0; s.free.len()],
        best: None,
        visited: 0,
    };
    search.dfs(0, 0.0);
    let (_, choice) = search
        .best
        .ok_or_else(|| Error::Infeasible("no admissible assignment".into()))?;
    let mut chain = frozen;
    for (i, &e) in s.free.iter().enumerate() {
        chain.set_edge(e, &search.states[choice[i]]);
    }
    let value = s.value(&p.density, &chain);
    debug_assert!(value >= base - 1e-9);
    Ok(CellSolution {
        chain,
        value,
        solver: SolverTag::Exact,
        iterations: search.visited,
        iteration_limit: false,
        lower_bound: lower_bound(p),
        history: vec![value],
    })
}

fn flow_exact(p: &CellProblem, s: &CellSetup) -> Result<CellSolution> {
    let m = p.b.len();
    let nodes: Vec<usize> = s.balance.keys().copied().collect();
    let local: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut chain = s.clamp.filter(|e| !s.is_free(e));
    let mut assigned: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
    for k in 0..m {
        let mut net = FlowNetwork::new(nodes.len());
        for (v, bal) in &s.balance {
            net.add_supply(local[v], bal[k] as f64);
        }
        let mut unit = vec![0i64; m];
        unit[k] = 1;
        let neg: Vec<i64> = unit.iter().map(|x| -x).collect();
        let mut arcs = Vec::new();
        for &e in &s.free {
            let edge = s.graph.edge(e);
            let cap = p.theta_max as f64;
            let fwd = net.add_arc(
                local[&edge.u],
                local[&edge.v],
                cap,
                s.cost(&p.density, e, &unit),
            );
            let bwd = net.add_arc(
                local[&edge.v],
                local[&edge.u],
                cap,
                s.cost(&p.density, e, &neg),
            );
            arcs.push((e, fwd, bwd));
        }
        let sol = net.solve()?;
        for (e, fwd, bwd) in arcs {
            let th = (sol.flows[fwd] - sol.flows[bwd]).round() as i64;
            if th != 0 {
                assigned.entry(e).or_insert_with(|| vec![0; m])[k] = th;
            }
        }
    }
    for (e, t) in assigned {
        chain.set_edge(e, &t);
    }
    let value = s.value(&p.density, &chain);
    Ok(CellSolution {
        chain,
        value,
        solver: SolverTag::Exact,
        iterations: m,
        iteration_limit: false,
        lower_bound: lower_bound(p),
        history: vec![value],
    })
}

pub fn solve_heuristic(p: &CellProblem) -> Result<CellSolution> {
    solve_heuristic_with(p, DEFAULT_ITERATION_LIMIT)
}

/// Cycle canceling over Z^m: repeatedly pushes a constant vector δ around
/// the most improving negative cycle found among all candidate δ.
pub fn solve_heuristic_with(p: &CellProblem, limit: usize) -> Result<CellSolution> {
    let s = p.setup()?;
    let m = p.b.len();
    let deltas: Vec<Vec<i64>> = theta_states(m, p.theta_max)
        .into_iter()
        .filter(|d| d.iter().any(|&x| x != 0))
        .collect();
    let nodes: Vec<usize> = s.balance.keys().copied().collect();
    let local: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let ends: Vec<(usize, usize)> = s
        .free
        .iter()
        .map(|&e| {
            let edge = s.graph.edge(e);
            (local[&edge.u], local[&edge.v])
        })
        .collect();
    let mut theta: Vec<Vec<i64>> = s
        .free
        .iter()
        .map(|&e| s.clamp.get(e).map_or(vec![0; m], |t| t.to_vec()))
        .collect();
    let mut cost: Vec<f64> = s
        .free
        .iter()
        .zip(&theta)
        .map(|(&e, t)| s.cost(&p.density, e, t))
        .collect();
    let frozen = s.clamp.filter(|e| !s.is_free(e));
    let frozen_value = s.value(&p.density, &frozen);
    let mut value = frozen_value + cost.iter().sum::<f64>();
    let mut history = vec![value];
    let mut iterations = 0;
    let mut hit_limit = false;
    let within = |t: &[i64]| t.iter().all(|x| x.abs() <= p.theta_max);

    loop {
        if iterations >= limit {
            hit_limit = true;
            break;
        }
        let mut best: Option<Candidate> = None;
        for (di, delta) in deltas.iter().enumerate() {
            // arcs: (from, to, free index, sign, Δ)
            let mut arcs: Vec<(usize, usize, usize, i64, f64)> = Vec::new();
            for (i, &(u, v)) in ends.iter().enumerate() {
                let e = s.free[i];
                for sign in [1i64, -1] {
                    let nt: Vec<i64> = theta[i]
                        .iter()
                        .zip(delta)
                        .map(|(a, d)| a + sign * d)
                        .collect();
                    if !within(&nt) {
                        continue;
                    }
                    let dc = s.cost(&p.density, e, &nt) - cost[i];
                    if sign == 1 {
                        arcs.push((u, v, i, 1, dc));
                    } else {
                        arcs.push((v, u, i, -1, dc));
                    }
                }
            }
            if let Some((c, cyc)) = negative_cycle(nodes.len(), &arcs) {
                if best.as_ref().is_none_or(|(bc, _, _)| c < *bc) {
                    best = Some((c, di, cyc));
                }
            }
        }
        let Some((gain, di, cyc)) = best else { break };
        if gain >= -1e-9 * (1.0 + value.abs()) {
            break;
        }
        let delta = &deltas[di];
        for &(i, sign) in &cyc {
            for (a, d) in theta[i].iter_mut().zip(delta) {
                *a += sign * d;
            }
            cost[i] = s.cost(&p.density, s.free[i], &theta[i]);
        }
        value = frozen_value + cost.iter().sum::<f64>();
        history.push(value);
        iterations += 1;
    }
    let mut chain = frozen;
    for (i, &e) in s.free.iter().enumerate() {
        chain.set_edge(e, &theta[i]);
    }
    let value = s.value(&p.density, &chain);
    Ok(CellSolution {
        chain,
        value,
        solver: SolverTag::Heuristic,
        iterations,
        iteration_limit: hit_limit,
        lower_bound: lower_bound(p),
        history,
    })
}

/// Finds a negative cycle by label correcting from a virtual root, checking
/// the predecessor graph for cycles after every `nodes` relaxations.
/// Returns the cycle's cost and its arcs as (free index, sign).
fn negative_cycle(
    nodes: usize,
    arcs: &[(usize, usize, usize, i64, f64)],
) -> Option<(f64, Vec<(usize, i64)>)> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, a) in arcs.iter().enumerate() {
        out[a.0].push(k);
    }
    let mut dist = vec![0.0_f64; nodes];
    let mut pred: Vec<Option<usize>> = vec![None; nodes];
    let mut queued = vec![true; nodes];
    let mut queue: std::collections::VecDeque<usize> = (0..nodes).collect();
    let mut relax = 0usize;
    let budget = nodes
        .saturating_mul(arcs.len().max(1))
        .saturating_add(nodes);
    let mut spent = 0usize;
    while let Some(u) = queue.pop_front() {
        queued[u] = false;
        for &k in &out[u] {
            let (_, v, _, _, c) = arcs[k];
            let nd = dist[u] + c;
            if nd < dist[v] - 1e-12 {
                dist[v] = nd;
                pred[v] = Some(k);
                relax += 1;
                spent += 1;
                if relax >= nodes {
                    relax = 0;
                    if let Some(cyc) = pred_cycle(nodes, arcs, &pred) {
                        return Some(cyc);
                    }
                }
                if !queued[v] {
                    queued[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if spent > budget {
            break;
        }
    }
    pred_cycle(nodes, arcs, &pred)
}

fn pred_cycle(
    nodes: usize,
    arcs: &[(usize, usize, usize, i64, f64)],
    pred: &[Option<usize>],
) -> Option<(f64, Vec<(usize, i64)>)> {
    let mut stamp = vec![usize::MAX; nodes];
    let mut best: Option<(f64, Vec<(usize, i64)>)> = None;
    for start in 0..nodes {
        let mut v = start;
        while stamp[v] == usize::MAX {
            stamp[v] = start;
            match pred[v] {
                Some(k) => v = arcs[k].0,
                None => break,
            }
        }
        if stamp[v] != start || pred[v].is_none() {
            continue;
        }
        // v lies on a cycle discovered in this walk
        let mut cyc = Vec::new();
        let mut total = 0.0;
        let mut w = v;
        loop {
            let k = pred[w].unwrap();
            cyc.push((arcs[k].2, arcs[k].3));
            total += arcs[k].4;
            w = arcs[k].0;
            if w == v {
                break;
            }
        }
        let mut edges: Vec<usize> = cyc.iter().map(|&(i, _)| i).collect();
        edges.sort_unstable();
        edges.dedup();
        if edges.len() < cyc.len() {
            continue;
        }
        cyc.reverse();
        if total < 0.0 && best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, cyc));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_problem(b: &[i64], side: f64, k: u32, r: u32) -> CellProblem {
        let n = 2;
        CellProblem::new(
            b,
            &[1.0, 0.0],
            side,
            &[0.0; 2],
            Spacing::new(k).unwrap(),
            r,
            None,
            EnergyDensity::unit(b.len(), n),
        )
        .unwrap()
    }

    #[test]
    fn straight_path_is_exact_minimum() {
        let p = CellProblem::new(
            &[1],
            &[1.0, 0.0],
            4.0,
            &[0.0, 0.0],
            Spacing::new(1).unwrap(),
            1,
            None,
            EnergyDensity::unit(1, 2),
        )
        .unwrap();
        let sol = solve_exact(&p).unwrap();
        assert!((sol.value - 4.0).abs() < 1e-12);
        let s = p.setup().unwrap();
        assert!(s.admissible(&sol.chain));
        assert_eq!(sol.chain, s.clamp);
    }

    #[test]
    fn zero_b_rejected() {
        let r = CellProblem::new(
            &[0],
            &[1.0, 0.0],
            4.0,
            &[0.0, 0.0],
            Spacing::new(1).unwrap(),
            1,
            None,
            EnergyDensity::unit(1, 2),
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn small_side_rejected() {
        let r = CellProblem::new(
            &[1],
            &[1.0, 0.0],
            3.0,
            &[0.0, 0.0],
            Spacing::new(1).unwrap(),
            1,
            None,
            EnergyDensity::unit(1, 2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn lower_bound_example() {
        let p = unit_problem(&[2], 8.0, 2, 1);
        assert!((lower_bound(&p) - 14.0).abs() < 1e-12);
        let sol = solve_heuristic(&p).unwrap();
        assert!((sol.value - 16.0).abs() < 1e-9);
    }

    #[test]
    fn vector_line_is_not_improved() {
        let p = unit_problem(&[1, 1], 4.0, 2, 1);
        let sol = solve_heuristic(&p).unwrap();
        assert!((sol.value - 4.0 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn heuristic_history_is_monotone() {
        let d = EnergyDensity::new(DensityKind::Checker { a: 3.0 }, 1, 2).unwrap();
        let p = CellProblem::new(
            &[1],
            &[1.0, 0.0],
            4.0,
            &[0.0, 0.5],
            Spacing::new(2).unwrap(),
            1,
            None,
            d,
        )
        .unwrap();
        let sol = solve_heuristic(&p).unwrap();
        for w in sol.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(p.setup().unwrap().admissible(&sol.chain));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let p = unit_problem(&[1], 4.0, 2, 1);
        let q = unit_problem(&[2], 4.0, 2, 1);
        assert_eq!(p.hash(), p.clone().hash());
        assert_ne!(p.hash(), q.hash());
        assert_eq!(p.hash().len(), 16);
    }
}
