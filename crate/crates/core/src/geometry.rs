//! Rotated cubes, deterministic rotations, lattice graphs and staircase
//! approximations of straight lines.
//!
//! Lattice nodes are stored as integer index vectors; the physical position
//! of node `i` is `i * h` with `h = 1/k`. Keeping the indices exact means set
//! membership and translations by whole periods never depend on rounding.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chains::Chain;
use crate::error::{parse_err, Error, Result};

/// Default cap on the number of nodes a single lattice may hold.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lattice spacing `h = 1/k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Spacing {
    k: u32,
}

impl Spacing {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Spacing(f64::INFINITY));
        }
        Ok(Spacing { k })
    }

    /// Accepts `h` only when `1/h` is an integer to 1e-9.
    pub fn from_h(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Spacing(h));
        }
        let inv = 1.0 / h;
        let k = inv.round();
        if (inv - k).abs() > 1e-9 * inv.max(1.0) || k < 1.0 || k > u32::MAX as f64 {
            return Err(Error::Spacing(h));
        }
        Ok(Spacing { k: k as u32 })
    }

    /// Parses `"1/k"` or a decimal.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("1/") {
            let k: u32 = rest
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad spacing '{s}'")))?;
            return Spacing::new(k);
        }
        let h: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad spacing '{s}'")))?;
        Spacing::from_h(h)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn h(&self) -> f64 {
        1.0 / self.k as f64
    }
}

/// A rotation in SO(n) whose first column is `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    t: Vec<f64>,
    matrix: DMatrix<f64>,
}

/// Builds the rotation O_t with O_t e1 = t.
///
/// The construction is a Householder reflection taking e1 to t followed by a
/// sign flip of the last column, so the same input bits always produce the
/// same matrix.
pub fn rotation_for(t: &[f64]) -> Result<Rotation> {
    let n = t.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "rotations need dimension n >= 2".into(),
        ));
    }
    let nt = norm(t);
    if (nt - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit { norm: nt });
    }
    let mut v: Vec<f64> = t.iter().map(|x| -x).collect();
    v[0] += 1.0;
    let vv = dot(&v, &v);
    let mut m = DMatrix::<f64>::identity(n, n);
    if vv > 1e-30 {
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= 2.0 * v[i] * v[j] / vv;
            }
        }
        for i in 0..n {
            m[(i, n - 1)] = -m[(i, n - 1)];
        }
    }
    Ok(Rotation {
        t: t.to_vec(),
        matrix: m,
    })
}

impl Rotation {
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }

    /// Local coordinates `O_t^T v`.
    pub fn to_local(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|i| self.matrix[(i, j)] * v[i]).sum())
            .collect()
    }

    pub fn to_global(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect()
    }
}

/// The cube Q_T^t(x): side `T`, one side parallel to `t`, centred at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    center: Vec<f64>,
    side: f64,
    rotation: Rotation,
}

impl Cube {
    pub fn new(t: &[f64], side: f64, center: &[f64]) -> Result<Self> {
        if !(side > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cube side must be positive, got {side}"
            )));
        }
        if center.len() != t.len() {
            return Err(Error::InvalidParameter(
                "cube centre and direction dimensions differ".into(),
            ));
        }
        Ok(Cube {
            center: center.to_vec(),
            side,
            rotation: rotation_for(t)?,
        })
    }

    /// Axis-aligned cube (t = e1).
    pub fn axis(side: f64, center: &[f64]) -> Result<Self> {
        let mut e1 = vec![0.0; center.len()];
        e1[0] = 1.0;
        Cube::new(&e1, side, center)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn t(&self) -> &[f64] {
        self.rotation.t()
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn with_side(&self, side: f64) -> Result<Cube> {
        if !(side > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cube side must be positive, got {side}"
            )));
        }
        Ok(Cube {
            center: self.center.clone(),
            side,
            rotation: self.rotation.clone(),
        })
    }

    pub fn inflated(&self, margin: f64) -> Result<Cube> {
        self.with_side(self.side + 2.0 * margin)
    }

    pub fn local(&self, p: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = p.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.rotation.to_local(&d)
    }

    /// Signed distance to the boundary measured in the cube's own max-norm:
    /// positive inside, zero on the faces, negative outside.
    pub fn depth(&self, p: &[f64]) -> f64 {
        let l = self.local(p);
        self.side / 2.0 - l.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.depth(p) >= -self.tol()
    }

    pub fn contains_strictly(&self, p: &[f64]) -> bool {
        self.depth(p) > self.tol()
    }

    fn tol(&self) -> f64 {
        1e-9 * (1.0 + self.side)
    }

    /// Parameter interval `[s0, s1] ⊂ [0, 1]` of the segment `a + s(b - a)`
    /// lying inside the closed cube.
    pub fn clip_segment(&self, a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
        let la = self.local(a);
        let lb = self.local(b);
        let half = self.side / 2.0;
        let (mut s0, mut s1) = (0.0_f64, 1.0_f64);
        for i in 0..la.len() {
            let d = lb[i] - la[i];
            if d.abs() < 1e-15 {
                if la[i].abs() > half + self.tol() {
                    return None;
                }
                continue;
            }
            let mut u = (-half - la[i]) / d;
            let mut w = (half - la[i]) / d;
            if u > w {
                std::mem::swap(&mut u, &mut w);
            }
            s0 = s0.max(u);
            s1 = s1.min(w);
        }
        if s1 - s0 > 1e-15 {
            Some((s0, s1))
        } else {
            None
        }
    }

    /// Axis-aligned bounding box of the cube.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let half = self.side / 2.0;
        let m = self.rotation.matrix();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let ext: f64 = (0..n).map(|j| m[(i, j)].abs()).sum::<f64>() * half;
            lo[i] = self.center[i] - ext;
            hi[i] = self.center[i] + ext;
        }
        (lo, hi)
    }
}

/// Directions of the stencil with radius `r`, one per unordered pair
/// (first nonzero entry positive).
///
/// A step `d` belongs to the stencil when it is primitive, `|d|_inf <= r` and
/// `|d|_1 <= 2r - 1`: radius 1 gives the axis neighbours, radius 2 adds the
/// diagonals and knight steps.
pub fn stencil(n: usize, r: u32) -> Vec<Vec<i64>> {
    let r = r as i64;
    let mut out = Vec::new();
    let mut d = vec![-r; n];
    loop {
        let lex_pos = d.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0);
        let l1: i64 = d.iter().map(|x| x.abs()).sum();
        if lex_pos && l1 < 2 * r && gcd_all(&d) == 1 {
            out.push(d.clone());
        }
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if d[i] < r {
                d[i] += 1;
                break;
            }
            d[i] = -r;
        }
    }
}

// Upper bound on the node count from the index box, for error messages.
fn estimate_nodes(lo: &[i64], hi: &[i64]) -> usize {
    lo.iter()
        .zip(hi)
        .map(|(a, b)| (b - a + 1).max(0) as usize)
        .fold(1usize, |acc, x| acc.saturating_mul(x))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn gcd_all(d: &[i64]) -> i64 {
    d.iter().fold(0, |g, &x| gcd(g, x))
}

/// A directed lattice edge stored with its lexicographically smaller
/// endpoint first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

/// Finite piece of `hZ^n` with stencil edges.
#[derive(Debug, Clone)]
pub struct LatticeGraph {
    n: usize,
    spacing: Spacing,
    r: u32,
    coords: Vec<i64>,
    index: HashMap<Vec<i64>, usize>,
    edges: Vec<Edge>,
    edge_index: HashMap<(usize, usize), usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl PartialEq for LatticeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.spacing == other.spacing
            && self.r == other.r
            && self.coords == other.coords
            && self.edges == other.edges
    }
}

/// Lattice of `hZ^n` clipped to `domain` inflated by `r*h`.
pub fn build_lattice(domain: &Cube, h: Spacing, r: u32) -> Result<LatticeGraph> {
    LatticeGraph::build(domain, h, r, r, DEFAULT_NODE_CAP)
}

impl LatticeGraph {
    /// Builds the lattice inside `domain` inflated by `margin_layers * h`.
    pub fn build(
        domain: &Cube,
        h: Spacing,
        r: u32,
        margin_layers: u32,
        node_cap: usize,
    ) -> Result<LatticeGraph> {
        if !(1..=3).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "stencil radius must be 1, 2 or 3, got {r}"
            )));
        }
        let n = domain.dim();
        let k = h.k() as f64;
        let region = domain.inflated(margin_layers as f64 * h.h())?;
        let (lo, hi) = region.bounding_box();
        let lo_i: Vec<i64> = lo.iter().map(|x| (x * k - 1e-9).floor() as i64).collect();
        let hi_i: Vec<i64> = hi.iter().map(|x| (x * k + 1e-9).ceil() as i64).collect();

        let mut coords = Vec::new();
        let mut count = 0usize;
        let mut idx = lo_i.clone();
        let mut pos = vec![0.0; n];
        'outer: loop {
            for i in 0..n {
                pos[i] = idx[i] as f64 / k;
            }
            if region.contains(&pos) {
                count += 1;
                if count > node_cap {
                    return Err(Error::TooManyNodes {
                        count: estimate_nodes(&lo_i, &hi_i),
                        cap: node_cap,
                    });
                }
                coords.extend_from_slice(&idx);
            }
            let mut i = n;
            loop {
                if i == 0 {
                    break 'outer;
                }
                i -= 1;
                if idx[i] < hi_i[i] {
                    idx[i] += 1;
                    break;
                }
                idx[i] = lo_i[i];
            }
        }
        Ok(LatticeGraph::from_nodes(n, h, r, coords))
    }

    fn from_nodes(n: usize, spacing: Spacing, r: u32, coords: Vec<i64>) -> LatticeGraph {
        let count = coords.len() / n;
        let mut index = HashMap::with_capacity(count);
        for v in 0..count {
            index.insert(coords[v * n..(v + 1) * n].to_vec(), v);
        }
        let mut edges = Vec::new();
        let steps = stencil(n, r);
        let mut w = vec![0i64; n];
        for u in 0..count {
            let cu = &coords[u * n..(u + 1) * n];
            for d in &steps {
                for i in 0..n {
                    w[i] = cu[i] + d[i];
                }
                if let Some(&v) = index.get(&w) {
                    edges.push(Edge { u, v });
                }
            }
        }
        edges.sort_by_key(|e| (e.u, e.v));
        LatticeGraph::assemble(n, spacing, r, coords, index, edges)
    }

    fn assemble(
        n: usize,
        spacing: Spacing,
        r: u32,
        coords: Vec<i64>,
        index: HashMap<Vec<i64>, usize>,
        edges: Vec<Edge>,
    ) -> LatticeGraph {
        let count = coords.len() / n;
        let mut adjacency = vec![Vec::new(); count];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (id, e) in edges.iter().enumerate() {
            adjacency[e.u].push((e.v, id));
            adjacency[e.v].push((e.u, id));
            edge_index.insert((e.u, e.v), id);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        LatticeGraph {
            n,
            spacing,
            r,
            coords,
            index,
            edges,
            edge_index,
            adjacency,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn h(&self) -> f64 {
        self.spacing.h()
    }

    pub fn radius(&self) -> u32 {
        self.r
    }

    pub fn node_count(&self) -> usize {
        self.coords.len() / self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    pub fn node_index(&self, v: usize) -> &[i64] {
        &self.coords[v * self.n..(v + 1) * self.n]
    }

    pub fn position(&self, v: usize) -> Vec<f64> {
        let k = self.spacing.k() as f64;
        self.node_index(v).iter().map(|&i| i as f64 / k).collect()
    }

    pub fn node_id(&self, idx: &[i64]) -> Option<usize> {
        self.index.get(idx).copied()
    }

    /// Neighbours of `v` as `(node, edge)` pairs, sorted by node.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// Edge joining `a` and `b`, with `+1` when `a -> b` is the stored
    /// orientation and `-1` otherwise.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<(usize, i64)> {
        if let Some(&e) = self.edge_index.get(&(a, b)) {
            Some((e, 1))
        } else {
            self.edge_index.get(&(b, a)).map(|&e| (e, -1))
        }
    }

    pub fn edge_step(&self, e: usize) -> Vec<i64> {
        let Edge { u, v } = self.edges[e];
        self.node_index(v)
            .iter()
            .zip(self.node_index(u))
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let d = self.edge_step(e);
        (d.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt() * self.h()
    }

    pub fn edge_tangent(&self, e: usize) -> Vec<f64> {
        let d = self.edge_step(e);
        let l = (d.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt();
        d.iter().map(|&x| x as f64 / l).collect()
    }

    pub fn edge_midpoint(&self, e: usize) -> Vec<f64> {
        let Edge { u, v } = self.edges[e];
        let k = self.spacing.k() as f64;
        self.node_index(u)
            .iter()
            .zip(self.node_index(v))
            .map(|(a, b)| (a + b) as f64 / (2.0 * k))
            .collect()
    }

    /// Whether both graphs share node ids and edge ids (same lattice).
    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }

    /// Text form: header `n m h r`, node lines `v id i1..in` with integer
    /// lattice indices (position = index * h), edge lines `e u v`.
    pub fn to_text(&self, m: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {} {}", self.n, m, self.h(), self.r);
        for v in 0..self.node_count() {
            let _ = write!(s, "v {v}");
            for x in self.node_index(v) {
                let _ = write!(s, " {x}");
            }
            s.push('\n');
        }
        for e in &self.edges {
            let _ = writeln!(s, "e {} {}", e.u, e.v);
        }
        s
    }

    /// Parses the text form; returns the graph and the multiplicity rank `m`
    /// recorded in its header.
    pub fn from_text(text: &str) -> Result<(LatticeGraph, usize)> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty graph"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 4 {
            return Err(parse_err(1, "header must be `n m h r`"));
        }
        let n: usize = f[0].parse().map_err(|_| parse_err(1, "bad n"))?;
        let m: usize = f[1].parse().map_err(|_| parse_err(1, "bad m"))?;
        let h: f64 = f[2].parse().map_err(|_| parse_err(1, "bad h"))?;
        let r: u32 = f[3].parse().map_err(|_| parse_err(1, "bad r"))?;
        let spacing = Spacing::from_h(h)?;
        let mut coords = Vec::new();
        let mut index = HashMap::new();
        let mut edges = Vec::new();
        for (no, line) in lines {
            let line_no = no + 1;
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.first() {
                Some(&"v") => {
                    if f.len() != n + 2 {
                        return Err(parse_err(line_no, "node line needs id and n indices"));
                    }
                    let id: usize = f[1].parse().map_err(|_| parse_err(line_no, "bad id"))?;
                    if id != index.len() {
                        return Err(parse_err(line_no, "node ids must be consecutive"));
                    }
                    let idx: Vec<i64> = f[2..]
                        .iter()
                        .map(|x| x.parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_err(line_no, "bad index"))?;
                    coords.extend_from_slice(&idx);
                    index.insert(idx, id);
                }
                Some(&"e") => {
                    if f.len() != 3 {
                        return Err(parse_err(line_no, "edge line is `e u v`"));
                    }
                    let u: usize = f[1].parse().map_err(|_| parse_err(line_no, "bad u"))?;
                    let v: usize = f[2].parse().map_err(|_| parse_err(line_no, "bad v"))?;
                    if u >= index.len() || v >= index.len() || u == v {
                        return Err(parse_err(line_no, "edge endpoint out of range"));
                    }
                    edges.push(Edge { u, v });
                }
                None => {}
                Some(other) => return Err(parse_err(line_no, format!("unknown record '{other}'"))),
            }
        }
        Ok((
            LatticeGraph::assemble(n, spacing, r, coords, index, edges),
            m,
        ))
    }

    fn distance_to_line(&self, v: usize, x: &[f64], t: &[f64]) -> (f64, f64) {
        let p = self.position(v);
        let d: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
        let s = dot(&d, t);
        let perp2 = (dot(&d, &d) - s * s).max(0.0);
        (perp2.sqrt(), s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Penalty on distance from the line; small enough to only break length ties.
const LINE_PENALTY: f64 = 1e-7;

/// Shortest lattice path from `src` to `dst` using only nodes within
/// `radius` of the line `x + tR`.
pub(crate) fn tube_path(
    g: &LatticeGraph,
    src: usize,
    dst: usize,
    x: &[f64],
    t: &[f64],
    radius: f64,
) -> Option<Vec<usize>> {
    let nn = g.node_count();
    let inside: Vec<bool> = (0..nn)
        .map(|v| g.distance_to_line(v, x, t).0 <= radius)
        .collect();
    if !inside[src] || !inside[dst] {
        return None;
    }
    let h = g.h();
    let mut dist = vec![f64::INFINITY; nn];
    let mut prev = vec![usize::MAX; nn];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapItem {
        cost: 0.0,
        node: src,
    });
    while let Some(HeapItem { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        if node == dst {
            break;
        }
        for &(w, e) in g.neighbors(node) {
            if !inside[w] {
                continue;
            }
            let mid = g.edge_midpoint(e);
            let md: Vec<f64> = mid.iter().zip(x).map(|(a, b)| a - b).collect();
            let s = dot(&md, t);
            let off = (dot(&md, &md) - s * s).max(0.0).sqrt();
            let c = cost + g.edge_length(e) * (1.0 + LINE_PENALTY * off / h);
            if c < dist[w] {
                dist[w] = c;
                prev[w] = node;
                heap.push(HeapItem { cost: c, node: w });
            }
        }
    }
    if !dist[dst].is_finite() {
        return None;
    }
    let mut path = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

/// Turns a node path into a chain carrying `b` along the path direction.
pub(crate) fn path_chain(g: &Arc<LatticeGraph>, path: &[usize], b: &[i64]) -> Result<Chain> {
    let mut c = Chain::zero(g.clone(), b.len());
    for w in path.windows(2) {
        let (e, sign) = g.find_edge(w[0], w[1]).ok_or(Error::NotAdjacent {
            u: w[0],
            v: w[1],
            fu: w[0],
            fv: w[1],
        })?;
        let theta: Vec<i64> = b.iter().map(|x| x * sign).collect();
        c.add_to_edge(e, &theta);
    }
    Ok(c)
}

/// Tube radius used for staircases: every point of the line lies within one
/// lattice-cell diagonal of some node.
pub fn staircase_radius(g: &LatticeGraph) -> f64 {
    g.h() * (g.dim() as f64).sqrt() * (1.0 + 1e-9)
}

/// Lattice path carrying `b` along the line `x + tR` through `domain`.
///
/// The path runs between the two tube nodes nearest the entry and exit faces
/// (both outside or on the cube) and is the shortest path inside a tube of
/// radius `h*sqrt(n)` around the line.
pub fn staircase_line(b: &[i64], t: &[f64], domain: &Cube, g: &Arc<LatticeGraph>) -> Result<Chain> {
    let nt = norm(t);
    if (nt - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit { norm: nt });
    }
    if t.len() != g.dim() || domain.dim() != g.dim() {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    let x = domain.center();
    let half = domain.side() / 2.0;
    let mut radius = staircase_radius(g);
    for attempt in 0..5 {
        if let Some(path) = staircase_nodes(g, t, domain, x, half, radius) {
            if attempt == 0 {
                return path_chain(g, &path, b);
            }
            return Err(Error::NoStaircase {
                bound: staircase_radius(g),
                best: radius,
            });
        }
        radius *= 2.0;
    }
    Err(Error::NoStaircase {
        bound: staircase_radius(g),
        best: f64::INFINITY,
    })
}

fn staircase_nodes(
    g: &LatticeGraph,
    t: &[f64],
    domain: &Cube,
    x: &[f64],
    half: f64,
    radius: f64,
) -> Option<Vec<usize>> {
    let mut best: [Option<(f64, f64, usize)>; 2] = [None, None];
    for v in 0..g.node_count() {
        let (off, s) = g.distance_to_line(v, x, t);
        if off > radius || s.abs() < half * 0.5 {
            continue;
        }
        if domain.depth(&g.position(v)) > 1e-12 {
            continue;
        }
        let side = usize::from(s > 0.0);
        let score = off + (s.abs() - half).abs();
        // ties go to the node closer to the line
        let better = match best[side] {
            None => true,
            Some((bs, boff, _)) => score < bs - 1e-9 || (score < bs + 1e-9 && off < boff - 1e-9),
        };
        if better {
            best[side] = Some((score, off, v));
        }
    }
    let (_, _, src) = best[0]?;
    let (_, _, dst) = best[1]?;
    tube_path(g, src, dst, x, t, radius)
}

/// Asymptotic length per unit displacement of stencil paths in direction
/// `t`: the smallest `sum |c_i| |d_i|` over nonnegative combinations
/// `sum c_i d_i = t` of stencil steps.
pub fn stretch(t: &[f64], r: u32) -> f64 {
    let n = t.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for d in stencil(n, r) {
        let f: Vec<f64> = d.iter().map(|&x| x as f64).collect();
        dirs.push(f.iter().map(|x| -x).collect());
        dirs.push(f);
    }
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..n).collect();
    let total = dirs.len();
    let rhs = DVector::from_column_slice(t);
    loop {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (j, &s) in subset.iter().enumerate() {
            for i in 0..n {
                m[(i, j)] = dirs[s][i];
            }
        }
        if let Some(inv) = m.clone().try_inverse() {
            let c = inv * &rhs;
            if c.iter().all(|&x| x >= -1e-12) {
                let cost: f64 = subset
                    .iter()
                    .zip(c.iter())
                    .map(|(&s, &ci)| ci.max(0.0) * norm(&dirs[s]))
                    .sum();
                best = best.min(cost);
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < total - n + i {
                subset[i] += 1;
                for j in i + 1..n {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Default direction grids: eight directions `(cos kπ/8, sin kπ/8)` in the
/// plane, and the 13 lattice directions of the half-space in three
/// dimensions.
pub fn direction_grid(n: usize) -> Vec<Vec<f64>> {
    match n {
        2 => (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::PI / 8.0;
                clean_direction(&[a.cos(), a.sin()])
            })
            .collect(),
        3 => {
            let mut out = Vec::new();
            for d in stencil(3, 2) {
                if d.iter().all(|x| x.abs() <= 1) {
                    let f: Vec<f64> = d.iter().map(|&x| x as f64).collect();
                    let l = norm(&f);
                    out.push(f.iter().map(|x| x / l).collect());
                }
            }
            out
        }
        _ => {
            let mut e1 = vec![0.0; n];
            e1[0] = 1.0;
            vec![e1]
        }
    }
}

/// Snaps round-off residue (|x| < 1e-15) to zero and renormalizes.
pub fn clean_direction(t: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = t
        .iter()
        .map(|&x| if x.abs() < 1e-15 { 0.0 } else { x })
        .collect();
    let l = norm(&v);
    v.iter().map(|x| x / l).collect()
}
