//! Z^m-valued 1-chains and 0-chains on lattice graphs.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{parse_err, Error, Result};
use crate::geometry::{Cube, LatticeGraph};

/// Norm used on multiplicity vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassNorm {
    Euclid,
    One,
}

impl MassNorm {
    pub fn of(self, theta: &[i64]) -> f64 {
        match self {
            MassNorm::Euclid => (theta.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt(),
            MassNorm::One => theta.iter().map(|x| x.abs() as f64).sum(),
        }
    }
}

pub(crate) fn euclid(theta: &[i64]) -> f64 {
    MassNorm::Euclid.of(theta)
}

fn add_into(acc: &mut [i64], theta: &[i64], sign: i64) {
    for (a, t) in acc.iter_mut().zip(theta) {
        *a += sign * t;
    }
}

/// Sparse map from edges to nonzero multiplicity vectors.
#[derive(Debug, Clone)]
pub struct Chain {
    graph: Arc<LatticeGraph>,
    m: usize,
    coeffs: BTreeMap<usize, Vec<i64>>,
}

impl PartialEq for Chain {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.coeffs == other.coeffs && self.graph.same_as(&other.graph)
    }
}

impl Chain {
    pub fn zero(graph: Arc<LatticeGraph>, m: usize) -> Chain {
        Chain {
            graph,
            m,
            coeffs: BTreeMap::new(),
        }
    }

    /// Builds a chain from `(edge, θ)` pairs; repeated edges accumulate.
    pub fn from_edges(
        graph: Arc<LatticeGraph>,
        m: usize,
        entries: impl IntoIterator<Item = (usize, Vec<i64>)>,
    ) -> Result<Chain> {
        let mut c = Chain::zero(graph, m);
        for (e, theta) in entries {
            if e >= c.graph.edge_count() {
                return Err(Error::InvalidParameter(format!("edge {e} not in graph")));
            }
            if theta.len() != m {
                return Err(Error::InvalidParameter(format!(
                    "multiplicity has {} components, expected {m}",
                    theta.len()
                )));
            }
            c.add_to_edge(e, &theta);
        }
        Ok(c)
    }

    pub fn graph(&self) -> &Arc<LatticeGraph> {
        &self.graph
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn get(&self, e: usize) -> Option<&[i64]> {
        self.coeffs.get(&e).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[i64])> + '_ {
        self.coeffs.iter().map(|(&e, v)| (e, v.as_slice()))
    }

    pub fn add_to_edge(&mut self, e: usize, theta: &[i64]) {
        let m = self.m;
        let entry = self.coeffs.entry(e).or_insert_with(|| vec![0; m]);
        add_into(entry, theta, 1);
        if entry.iter().all(|&x| x == 0) {
            self.coeffs.remove(&e);
        }
    }

    pub fn set_edge(&mut self, e: usize, theta: &[i64]) {
        if theta.iter().all(|&x| x == 0) {
            self.coeffs.remove(&e);
        } else {
            self.coeffs.insert(e, theta.to_vec());
        }
    }

    fn check_compatible(&self, other: &Chain) {
        assert!(
            self.m == other.m && self.graph.same_as(&other.graph),
            "chains live on different graphs"
        );
    }

    pub fn add(&self, other: &Chain) -> Chain {
        self.check_compatible(other);
        let mut c = self.clone();
        for (e, t) in other.iter() {
            c.add_to_edge(e, t);
        }
        c
    }

    pub fn sub(&self, other: &Chain) -> Chain {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Chain {
        self.scale(-1)
    }

    pub fn scale(&self, k: i64) -> Chain {
        let mut c = Chain::zero(self.graph.clone(), self.m);
        if k != 0 {
            for (e, t) in self.iter() {
                c.coeffs.insert(e, t.iter().map(|x| x * k).collect());
            }
        }
        c
    }

    /// Keeps the edges for which `keep` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> Chain {
        Chain {
            graph: self.graph.clone(),
            m: self.m,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&e, _)| keep(e))
                .map(|(&e, v)| (e, v.clone()))
                .collect(),
        }
    }

    pub fn boundary(&self) -> ZeroChain {
        let mut z = ZeroChain::zero(self.graph.clone(), self.m);
        for (e, t) in self.iter() {
            let edge = self.graph.edge(e);
            z.add_to_node(edge.v, t, 1);
            z.add_to_node(edge.u, t, -1);
        }
        z
    }

    pub fn is_closed(&self) -> bool {
        self.boundary().is_zero()
    }

    /// Sum of |θ_e| * length(e) over edges whose midpoint lies in `region`.
    pub fn mass(&self, norm: MassNorm, region: Option<&Cube>) -> f64 {
        self.iter()
            .filter(|&(e, _)| region.is_none_or(|q| q.contains(&self.graph.edge_midpoint(e))))
            .map(|(e, t)| norm.of(t) * self.graph.edge_length(e))
            .sum()
    }

    /// True when no boundary node lies strictly inside `interior`.
    pub fn is_divergence_free(&self, interior: &Cube) -> bool {
        self.boundary()
            .iter()
            .all(|(v, _)| !interior.contains_strictly(&self.graph.position(v)))
    }

    /// Nodes touched by the support, ascending.
    pub fn support_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .coeffs
            .keys()
            .flat_map(|&e| {
                let edge = self.graph.edge(e);
                [edge.u, edge.v]
            })
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Maps the chain through a node map into `target`.
    ///
    /// Each edge `u -> v` becomes the target edge `f(u) -> f(v)` with the
    /// multiplicity negated when that pair is stored in the opposite
    /// orientation.
    pub fn push_forward(
        &self,
        target: &Arc<LatticeGraph>,
        f: impl Fn(usize) -> Option<usize>,
    ) -> Result<Chain> {
        let mut image: BTreeMap<usize, usize> = BTreeMap::new();
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        for v in self.support_nodes() {
            let w = f(v).ok_or_else(|| {
                Error::InvalidParameter(format!("node {v} has no image under the map"))
            })?;
            if w >= target.node_count() {
                return Err(Error::InvalidParameter(format!(
                    "image {w} of node {v} is not a target node"
                )));
            }
            if let Some(&prev) = seen.get(&w) {
                if prev != v {
                    return Err(Error::NotInjective(v));
                }
            }
            seen.insert(w, v);
            image.insert(v, w);
        }
        let mut c = Chain::zero(target.clone(), self.m);
        for (e, t) in self.iter() {
            let edge = self.graph.edge(e);
            let (fu, fv) = (image[&edge.u], image[&edge.v]);
            let (te, sign) = target.find_edge(fu, fv).ok_or(Error::NotAdjacent {
                u: edge.u,
                v: edge.v,
                fu,
                fv,
            })?;
            let theta: Vec<i64> = t.iter().map(|x| x * sign).collect();
            c.add_to_edge(te, &theta);
        }
        Ok(c)
    }

    /// Push-forward under the lattice translation `x -> x + shift*h`.
    pub fn translate(&self, target: &Arc<LatticeGraph>, shift: &[i64]) -> Result<Chain> {
        let g = self.graph.clone();
        self.push_forward(target, |v| {
            let idx: Vec<i64> = g
                .node_index(v)
                .iter()
                .zip(shift)
                .map(|(a, b)| a + b)
                .collect();
            target.node_id(&idx)
        })
    }

    /// Slice through the level `{f = s}`.
    ///
    /// Every support edge crossing the level contributes a point at the
    /// crossing carrying `+θ` when the edge runs from `{f < s}` to `{f > s}`
    /// and `-θ` otherwise. Levels passing through a node are moved up by
    /// `h * 1e-6` first.
    pub fn slice(&self, f: &LevelFn, s: f64) -> PointChain {
        let h = self.graph.h();
        let mut s = s;
        let hits = self.support_nodes().into_iter().any(|v| {
            let fv = f.eval(&self.graph.position(v));
            (fv - s).abs() <= 1e-12 * (1.0 + s.abs())
        });
        if hits {
            log::warn!(
                "slice level {s} passes through a node; dithering by {}",
                h * 1e-6
            );
            s += h * 1e-6;
        }
        let mut points = Vec::new();
        for (e, t) in self.iter() {
            let edge = self.graph.edge(e);
            let pu = self.graph.position(edge.u);
            let pv = self.graph.position(edge.v);
            let (fu, fv) = (f.eval(&pu), f.eval(&pv));
            if (fu < s) == (fv < s) {
                continue;
            }
            let sign = if fv > fu { 1 } else { -1 };
            let lam = match f {
                LevelFn::CubeDepth(_) => bisect_level(f, &pu, &pv, s),
                _ => (s - fu) / (fv - fu),
            };
            let p: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a + lam * (b - a)).collect();
            points.push((p, t.iter().map(|x| x * sign).collect()));
        }
        PointChain::new(self.m, points)
    }

    /// Decomposes a closed chain into simple directed cycles with constant
    /// multiplicities.
    ///
    /// Each round takes the shortest directed cycle in the support of the
    /// first nonzero component and removes the largest constant vector
    /// along it that does not change the sign of any component. Every
    /// component then shrinks monotonically, so the pieces never cancel and
    /// their total l1 mass equals that of the chain.
    pub fn loop_decompose(&self) -> Result<Vec<Loop>> {
        let bnd = self.boundary();
        if !bnd.is_zero() {
            return Err(Error::NotClosed { nodes: bnd.len() });
        }
        let mut rest = self.clone();
        let mut loops = Vec::new();
        while !rest.is_zero() {
            let comp = (0..rest.m)
                .find(|&j| rest.iter().any(|(_, t)| t[j] != 0))
                .unwrap_or(0);
            let cycle = rest
                .shortest_directed_cycle(comp)
                .ok_or(Error::NotClosed { nodes: 0 })?;
            let oriented: Vec<Vec<i64>> = cycle
                .iter()
                .map(|&(e, sign)| rest.get(e).unwrap().iter().map(|x| x * sign).collect())
                .collect();
            let delta: Vec<i64> = (0..rest.m)
                .map(|j| {
                    if oriented.iter().all(|t| t[j] > 0) {
                        oriented.iter().map(|t| t[j]).min().unwrap()
                    } else if oriented.iter().all(|t| t[j] < 0) {
                        oriented.iter().map(|t| t[j]).max().unwrap()
                    } else {
                        0
                    }
                })
                .collect();
            for &(e, sign) in &cycle {
                let d: Vec<i64> = delta.iter().map(|x| -x * sign).collect();
                rest.add_to_edge(e, &d);
            }
            loops.push(Loop {
                edges: cycle,
                theta: delta,
            });
        }
        Ok(loops)
    }

    // Shortest cycle (fewest edges, then smallest start node) following the
    // sign of component `k`. Returned as (edge, orientation sign) in order.
    fn shortest_directed_cycle(&self, k: usize) -> Option<Vec<(usize, i64)>> {
        let mut out: BTreeMap<usize, Vec<(usize, usize, i64)>> = BTreeMap::new();
        for (e, t) in self.iter() {
            if t[k] == 0 {
                continue;
            }
            let edge = self.graph.edge(e);
            if t[k] > 0 {
                out.entry(edge.u).or_default().push((edge.v, e, 1));
            } else {
                out.entry(edge.v).or_default().push((edge.u, e, -1));
            }
        }
        for arcs in out.values_mut() {
            arcs.sort_unstable();
        }
        let mut best: Option<Vec<(usize, i64)>> = None;
        for &start in out.keys() {
            // BFS from start back to start
            let mut prev: BTreeMap<usize, (usize, usize, i64)> = BTreeMap::new();
            let mut queue = VecDeque::from([start]);
            let mut found = None;
            'bfs: while let Some(u) = queue.pop_front() {
                for &(w, e, sign) in out.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if w == start {
                        found = Some((u, e, sign));
                        break 'bfs;
                    }
                    if let std::collections::btree_map::Entry::Vacant(slot) = prev.entry(w) {
                        slot.insert((u, e, sign));
                        queue.push_back(w);
                    }
                }
            }
            if let Some((last, e, sign)) = found {
                let mut cyc = vec![(e, sign)];
                let mut cur = last;
                while cur != start {
                    let (p, pe, ps) = prev[&cur];
                    cyc.push((pe, ps));
                    cur = p;
                }
                cyc.reverse();
                if best.as_ref().is_none_or(|b| cyc.len() < b.len()) {
                    best = Some(cyc);
                }
            }
        }
        best
    }

    /// Text form: header `chain m`, then `u v θ1 .. θm` per edge in edge order.
    pub fn to_text(&self) -> String {
        let mut s = format!("chain {}\n", self.m);
        for (e, t) in self.iter() {
            let edge = self.graph.edge(e);
            let _ = write!(s, "{} {}", edge.u, edge.v);
            for x in t {
                let _ = write!(s, " {x}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(graph: Arc<LatticeGraph>, text: &str) -> Result<Chain> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty chain"))?;
        let m: usize = header
            .strip_prefix("chain ")
            .and_then(|x| x.trim().parse().ok())
            .ok_or_else(|| parse_err(1, "header must be `chain m`"))?;
        let mut c = Chain::zero(graph, m);
        for (no, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != m + 2 {
                return Err(parse_err(no + 1, "expected `u v θ1 .. θm`"));
            }
            let nums: Vec<i64> = f
                .iter()
                .map(|x| x.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(no + 1, "bad integer"))?;
            let (u, v) = (nums[0] as usize, nums[1] as usize);
            let (e, sign) = c
                .graph
                .find_edge(u, v)
                .ok_or_else(|| parse_err(no + 1, format!("no edge {u} {v}")))?;
            if sign < 0 {
                return Err(parse_err(no + 1, "edge not in canonical orientation"));
            }
            c.add_to_edge(e, &nums[2..]);
        }
        Ok(c)
    }
}

/// A directed cycle `(edge, sign)` carrying constant multiplicity `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub edges: Vec<(usize, i64)>,
    pub theta: Vec<i64>,
}

impl Loop {
    pub fn length(&self, g: &LatticeGraph) -> f64 {
        self.edges.iter().map(|&(e, _)| g.edge_length(e)).sum()
    }

    pub fn to_chain(&self, g: &Arc<LatticeGraph>) -> Chain {
        let mut c = Chain::zero(g.clone(), self.theta.len());
        for &(e, sign) in &self.edges {
            let t: Vec<i64> = self.theta.iter().map(|x| x * sign).collect();
            c.add_to_edge(e, &t);
        }
        c
    }
}

/// Sparse map from nodes to nonzero vectors in Z^m.
#[derive(Debug, Clone)]
pub struct ZeroChain {
    graph: Arc<LatticeGraph>,
    m: usize,
    coeffs: BTreeMap<usize, Vec<i64>>,
}

impl PartialEq for ZeroChain {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.coeffs == other.coeffs && self.graph.same_as(&other.graph)
    }
}

impl ZeroChain {
    pub fn zero(graph: Arc<LatticeGraph>, m: usize) -> ZeroChain {
        ZeroChain {
            graph,
            m,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn graph(&self) -> &Arc<LatticeGraph> {
        &self.graph
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn get(&self, v: usize) -> Option<&[i64]> {
        self.coeffs.get(&v).map(|x| x.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[i64])> + '_ {
        self.coeffs.iter().map(|(&v, t)| (v, t.as_slice()))
    }

    pub fn add_to_node(&mut self, v: usize, theta: &[i64], sign: i64) {
        let m = self.m;
        let entry = self.coeffs.entry(v).or_insert_with(|| vec![0; m]);
        add_into(entry, theta, sign);
        if entry.iter().all(|&x| x == 0) {
            self.coeffs.remove(&v);
        }
    }

    pub fn add(&self, other: &ZeroChain) -> ZeroChain {
        let mut z = self.clone();
        for (v, t) in other.iter() {
            z.add_to_node(v, t, 1);
        }
        z
    }

    pub fn sub(&self, other: &ZeroChain) -> ZeroChain {
        let mut z = self.clone();
        for (v, t) in other.iter() {
            z.add_to_node(v, t, -1);
        }
        z
    }

    pub fn mass(&self, norm: MassNorm) -> f64 {
        self.iter().map(|(_, t)| norm.of(t)).sum()
    }

    pub fn push_forward(
        &self,
        target: &Arc<LatticeGraph>,
        f: impl Fn(usize) -> Option<usize>,
    ) -> Result<ZeroChain> {
        let mut z = ZeroChain::zero(target.clone(), self.m);
        for (v, t) in self.iter() {
            let w = f(v).ok_or_else(|| {
                Error::InvalidParameter(format!("node {v} has no image under the map"))
            })?;
            z.add_to_node(w, t, 1);
        }
        Ok(z)
    }
}

/// Finitely many points in R^n with Z^m weights (the output of slicing).
#[derive(Debug, Clone, PartialEq)]
pub struct PointChain {
    m: usize,
    points: Vec<(Vec<f64>, Vec<i64>)>,
}

impl PointChain {
    pub fn new(m: usize, points: Vec<(Vec<f64>, Vec<i64>)>) -> PointChain {
        PointChain {
            m,
            points: points
                .into_iter()
                .filter(|(_, t)| t.iter().any(|&x| x != 0))
                .collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> &[(Vec<f64>, Vec<i64>)] {
        &self.points
    }

    pub fn total(&self) -> Vec<i64> {
        let mut acc = vec![0; self.m];
        for (_, t) in &self.points {
            add_into(&mut acc, t, 1);
        }
        acc
    }

    pub fn mass(&self, norm: MassNorm) -> f64 {
        self.points.iter().map(|(_, t)| norm.of(t)).sum()
    }
}

/// Lipschitz functions used for slicing.
#[derive(Debug, Clone)]
pub enum LevelFn {
    /// `x -> x[i]`.
    Axis(usize),
    /// `x -> <a, x> + c`.
    Affine { grad: Vec<f64>, offset: f64 },
    /// Distance to the boundary of a cube in its own max-norm,
    /// `T/2 - |O^T (x - c)|_inf`.
    CubeDepth(Cube),
}

impl LevelFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            LevelFn::Axis(i) => x[*i],
            LevelFn::Affine { grad, offset } => {
                grad.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + offset
            }
            LevelFn::CubeDepth(q) => q.depth(x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            LevelFn::Axis(_) | LevelFn::CubeDepth(_) => 1.0,
            LevelFn::Affine { grad, .. } => crate::geometry::norm(grad),
        }
    }
}

fn bisect_level(f: &LevelFn, a: &[f64], b: &[f64], s: f64) -> f64 {
    let at = |lam: f64| -> f64 {
        let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + lam * (y - x)).collect();
        f.eval(&p) - s
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let lo_sign = at(0.0) < 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (at(mid) < 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
