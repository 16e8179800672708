//! Periodic line-energy densities and the localized functional F_ε.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::chains::{euclid, Chain};
use crate::error::{Error, Result};
use crate::geometry::{Cube, LatticeGraph};

/// Points per edge for densities that are not cellwise constant.
pub const QUADRATURE_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// ψ = |θ|_2.
    Unit,
    /// ψ = w(y)|θ|_2 with w = 1 on cells whose integer coordinates sum to an
    /// even number and w = a elsewhere.
    Checker { a: f64 },
    /// ψ = w(y)|θ|_2 with w = 1 where frac(y_2) < 1/2 and w = a elsewhere.
    Channels { a: f64 },
    /// m = 2: ψ = w_1|θ_1| + w_2|θ_2| with weights (1, a) on rows with even
    /// floor(y_2) and (a, 1) on odd rows.
    Split2 { a: f64 },
    /// ψ = |θ|_2 (1 + κ(1 - (τ·e_1)^2)).
    Aniso { kappa: f64 },
    /// ψ = (1 + (a - 1) sin^2(π y_1) sin^2(π y_2)) |θ|_2.
    Smooth { a: f64 },
    /// ψ = w|θ|_2 with `w` constant on the cells of the grid (1/res)Z^n in
    /// the unit period, stored with the last coordinate fastest.
    Tabulated { res: usize, weights: Vec<f64> },
}

/// How edge integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindTag {
    CellwiseConstant,
    Smooth,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDensity {
    kind: DensityKind,
    c0: f64,
    c1: f64,
    m: usize,
    n: usize,
}

/// Structured density description; unknown keys are rejected.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub kind: String,
    pub a: Option<f64>,
    pub kappa: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub m: Option<usize>,
    pub n: Option<usize>,
}

impl EnergyDensity {
    /// Density with its default growth constants.
    pub fn new(kind: DensityKind, m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("m and n must be positive".into()));
        }
        let (c0, c1) = match &kind {
            DensityKind::Unit => (1.0, 1.0),
            DensityKind::Checker { a }
            | DensityKind::Channels { a }
            | DensityKind::Smooth { a } => {
                positive(*a, "a")?;
                (a.min(1.0), a.max(1.0))
            }
            DensityKind::Split2 { a } => {
                positive(*a, "a")?;
                if m != 2 {
                    return Err(Error::InvalidParameter("split2 needs m = 2".into()));
                }
                (a.min(1.0), a.max(1.0) * 2f64.sqrt())
            }
            DensityKind::Aniso { kappa } => {
                if !(*kappa >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "kappa must be >= 0, got {kappa}"
                    )));
                }
                (1.0, 1.0 + kappa)
            }
            DensityKind::Tabulated { res, weights } => {
                let cells = res.checked_pow(n as u32).unwrap_or(0);
                if *res == 0 || weights.len() != cells {
                    return Err(Error::InvalidParameter(format!(
                        "tabulated density needs res^n = {cells} weights, got {}",
                        weights.len()
                    )));
                }
                for w in weights {
                    positive(*w, "weight")?;
                }
                let lo = weights.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = weights.iter().cloned().fold(0.0, f64::max);
                (lo, hi)
            }
        };
        if matches!(kind, DensityKind::Smooth { .. }) && n < 2 {
            return Err(Error::InvalidParameter(
                "smooth density needs n >= 2".into(),
            ));
        }
        if matches!(kind, DensityKind::Channels { .. }) && n < 2 {
            return Err(Error::InvalidParameter(
                "channels density needs n >= 2".into(),
            ));
        }
        if matches!(kind, DensityKind::Split2 { .. }) && n < 2 {
            return Err(Error::InvalidParameter(
                "split2 density needs n >= 2".into(),
            ));
        }
        Ok(EnergyDensity { kind, c0, c1, m, n })
    }

    pub fn unit(m: usize, n: usize) -> Self {
        EnergyDensity::new(DensityKind::Unit, m, n).expect("unit density is always valid")
    }

    /// Overrides the declared growth constants.
    pub fn with_growth(mut self, c0: f64, c1: f64) -> Result<Self> {
        positive(c0, "c0")?;
        positive(c1, "c1")?;
        if c0 > c1 {
            return Err(Error::InvalidParameter(format!(
                "c0 = {c0} exceeds c1 = {c1}"
            )));
        }
        self.c0 = c0;
        self.c1 = c1;
        Ok(self)
    }

    pub fn from_config(cfg: &DensityConfig) -> Result<Self> {
        let need_a = || {
            cfg.a
                .ok_or_else(|| Error::Config(format!("density '{}' needs `a`", cfg.kind)))
        };
        let kind = match cfg.kind.as_str() {
            "unit" => DensityKind::Unit,
            "checker" => DensityKind::Checker { a: need_a()? },
            "channels" => DensityKind::Channels { a: need_a()? },
            "split2" => DensityKind::Split2 { a: need_a()? },
            "smooth" => DensityKind::Smooth { a: need_a()? },
            "aniso" => DensityKind::Aniso {
                kappa: cfg
                    .kappa
                    .ok_or_else(|| Error::Config("density 'aniso' needs `kappa`".into()))?,
            },
            other => return Err(Error::Config(format!("unknown density kind '{other}'"))),
        };
        let m = cfg.m.unwrap_or(if cfg.kind == "split2" { 2 } else { 1 });
        let n = cfg.n.unwrap_or(2);
        let mut d = EnergyDensity::new(kind, m, n)?;
        if cfg.c0.is_some() || cfg.c1.is_some() {
            let (c0, c1) = (cfg.c0.unwrap_or(d.c0), cfg.c1.unwrap_or(d.c1));
            d = d.with_growth(c0, c1)?;
        }
        Ok(d)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DensityConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        EnergyDensity::from_config(&cfg)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn tag(&self) -> KindTag {
        match self.kind {
            DensityKind::Smooth { .. } => KindTag::Smooth,
            DensityKind::Tabulated { .. } => KindTag::Tabulated,
            _ => KindTag::CellwiseConstant,
        }
    }

    /// Canonical short description, e.g. `checker(3)`.
    pub fn describe(&self) -> String {
        let base = match &self.kind {
            DensityKind::Unit => "unit".to_string(),
            DensityKind::Checker { a } => format!("checker({a})"),
            DensityKind::Channels { a } => format!("channels({a})"),
            DensityKind::Split2 { a } => format!("split2({a})"),
            DensityKind::Aniso { kappa } => format!("aniso({kappa})"),
            DensityKind::Smooth { a } => format!("smooth({a})"),
            DensityKind::Tabulated { res, weights } => {
                let w: Vec<String> = weights.iter().map(|x| x.to_string()).collect();
                format!("tabulated({res};{})", w.join(","))
            }
        };
        format!(
            "{base}[c0={},c1={},m={},n={}]",
            self.c0, self.c1, self.m, self.n
        )
    }

    /// Resolution `g` of the grid (1/g)Z^n on which the density is constant,
    /// `Some(0)` when it does not depend on `y`, `None` when it is not
    /// cellwise constant.
    pub fn grid(&self) -> Option<usize> {
        match &self.kind {
            DensityKind::Unit | DensityKind::Aniso { .. } => Some(0),
            DensityKind::Checker { .. } | DensityKind::Split2 { .. } => Some(1),
            DensityKind::Channels { .. } => Some(2),
            DensityKind::Tabulated { res, .. } => Some(*res),
            DensityKind::Smooth { .. } => None,
        }
    }

    pub fn eval(&self, y: &[f64], theta: &[i64], tau: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Unit => euclid(theta),
            DensityKind::Checker { a } => {
                let s: i64 = y.iter().map(|x| x.floor() as i64).sum();
                if s.rem_euclid(2) == 0 {
                    euclid(theta)
                } else {
                    a * euclid(theta)
                }
            }
            DensityKind::Channels { a } => {
                let f = y[1] - y[1].floor();
                if f < 0.5 {
                    euclid(theta)
                } else {
                    a * euclid(theta)
                }
            }
            DensityKind::Split2 { a } => {
                let (w1, w2) = if (y[1].floor() as i64).rem_euclid(2) == 0 {
                    (1.0, *a)
                } else {
                    (*a, 1.0)
                };
                w1 * theta[0].abs() as f64 + w2 * theta[1].abs() as f64
            }
            DensityKind::Aniso { kappa } => {
                let c = tau[0];
                euclid(theta) * (1.0 + kappa * (1.0 - c * c))
            }
            DensityKind::Smooth { a } => {
                let s1 = (std::f64::consts::PI * y[0]).sin();
                let s2 = (std::f64::consts::PI * y[1]).sin();
                (1.0 + (a - 1.0) * s1 * s1 * s2 * s2) * euclid(theta)
            }
            DensityKind::Tabulated { res, weights } => {
                let mut idx = 0usize;
                for x in y {
                    let c = ((x - x.floor()) * *res as f64).floor() as usize;
                    idx = idx * res + c.min(res - 1);
                }
                weights[idx] * euclid(theta)
            }
        }
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be positive, got {x}"
        )))
    }
}

/// Pieces of one edge on which the density is frozen: the scaled midpoint
/// `y` of each piece and its physical length.
#[derive(Debug, Clone)]
pub struct EdgeProfile {
    tau: Vec<f64>,
    pieces: Vec<(Vec<f64>, f64)>,
}

impl EdgeProfile {
    /// Profile of edge `e` at scale `eps`, restricted to `region` when given.
    pub fn new(
        d: &EnergyDensity,
        g: &LatticeGraph,
        e: usize,
        eps: f64,
        region: Option<&Cube>,
    ) -> EdgeProfile {
        let edge = g.edge(e);
        let a = g.position(edge.u);
        let b = g.position(edge.v);
        let (s0, s1) = match region {
            Some(q) => q.clip_segment(&a, &b).unwrap_or((0.0, 0.0)),
            None => (0.0, 1.0),
        };
        let tau = g.edge_tangent(e);
        let len = g.edge_length(e);
        if s1 <= s0 {
            return EdgeProfile {
                tau,
                pieces: Vec::new(),
            };
        }
        // coordinates within rounding of a cell face are put on it, so edges
        // along a face see the same side whatever eps is
        let snap = d.grid().filter(|&r| r > 0).map(|r| r as f64);
        let point = |lam: f64| -> Vec<f64> {
            a.iter()
                .zip(&b)
                .map(|(x, z)| {
                    let y = (x + lam * (z - x)) / eps;
                    match snap {
                        Some(r) if ((y * r).round() - y * r).abs() < 1e-9 => (y * r).round() / r,
                        _ => y,
                    }
                })
                .collect()
        };
        let mut pieces = Vec::new();
        match d.grid() {
            Some(0) => pieces.push((point(0.5 * (s0 + s1)), len * (s1 - s0))),
            Some(res) => {
                let mut cuts = vec![s0, s1];
                let r = res as f64;
                let (ya, yb) = (point(0.0), point(1.0));
                for i in 0..ya.len() {
                    let (p, q) = (ya[i] * r, yb[i] * r);
                    if (q - p).abs() < 1e-15 {
                        continue;
                    }
                    let (lo, hi) = (p.min(q), p.max(q));
                    let mut k = lo.ceil();
                    while k <= hi {
                        let lam = (k - p) / (q - p);
                        if lam > s0 && lam < s1 {
                            cuts.push(lam);
                        }
                        k += 1.0;
                    }
                }
                cuts.sort_by(|x, y| x.total_cmp(y));
                cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
                for w in cuts.windows(2) {
                    if w[1] - w[0] > 1e-14 {
                        pieces.push((point(0.5 * (w[0] + w[1])), len * (w[1] - w[0])));
                    }
                }
            }
            None => {
                let q = QUADRATURE_POINTS;
                let step = (s1 - s0) / q as f64;
                for i in 0..q {
                    pieces.push((point(s0 + (i as f64 + 0.5) * step), len * step));
                }
            }
        }
        EdgeProfile { tau, pieces }
    }

    pub fn cost(&self, d: &EnergyDensity, theta: &[i64]) -> f64 {
        if theta.iter().all(|&x| x == 0) {
            return 0.0;
        }
        self.pieces
            .iter()
            .map(|(y, l)| d.eval(y, theta, &self.tau) * l)
            .sum()
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|(_, l)| l).sum()
    }
}

/// ∫_e ψ(x/ε, θ, τ_e) dH^1 over the whole edge.
pub fn edge_cost(d: &EnergyDensity, g: &LatticeGraph, e: usize, theta: &[i64], eps: f64) -> f64 {
    EdgeProfile::new(d, g, e, eps, None).cost(d, theta)
}

/// The same integral by composite midpoint quadrature with `q` points,
/// whatever the density kind.
pub fn edge_cost_quadrature(
    d: &EnergyDensity,
    g: &LatticeGraph,
    e: usize,
    theta: &[i64],
    eps: f64,
    q: usize,
) -> f64 {
    let edge = g.edge(e);
    let a = g.position(edge.u);
    let b = g.position(edge.v);
    let tau = g.edge_tangent(e);
    let len = g.edge_length(e);
    (0..q)
        .map(|i| {
            let lam = (i as f64 + 0.5) / q as f64;
            let y: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, z)| (x + lam * (z - x)) / eps)
                .collect();
            d.eval(&y, theta, &tau) * len / q as f64
        })
        .sum()
}

/// F_ε(chain, region): the density integrated along the chain, counting
/// only the part of each edge inside `region`.
pub fn energy(c: &Chain, d: &EnergyDensity, eps: f64, region: Option<&Cube>) -> f64 {
    let g = c.graph();
    c.iter()
        .map(|(e, t)| EdgeProfile::new(d, g, e, eps, region).cost(d, t))
        .sum()
}

/// Outcome of sampling the growth sandwich `c0|θ| <= ψ <= c1|θ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub samples: usize,
    /// Smallest observed ψ / (c0 |θ|); at least 1 when the lower bound holds.
    pub lower_ratio: f64,
    /// Largest observed ψ / (c1 |θ|); at most 1 when the upper bound holds.
    pub upper_ratio: f64,
    pub witness: Option<GrowthWitness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthWitness {
    pub y: Vec<f64>,
    pub theta: Vec<i64>,
    pub tau: Vec<f64>,
    pub value: f64,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// Checks the growth sandwich on `samples` seeded random triples with
/// `|θ|_inf <= 4`.
pub fn validate_growth(d: &EnergyDensity, samples: usize, seed: u64) -> Result<GrowthReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GrowthReport {
        samples,
        lower_ratio: f64::INFINITY,
        upper_ratio: 0.0,
        witness: None,
    };
    let tol = 1e-12;
    for _ in 0..samples {
        let y: Vec<f64> = (0..d.n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let theta: Vec<i64> = loop {
            let t: Vec<i64> = (0..d.m).map(|_| rng.gen_range(-4..=4)).collect();
            if t.iter().any(|&x| x != 0) {
                break t;
            }
        };
        let tau: Vec<f64> = loop {
            let v: Vec<f64> = (0..d.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l = crate::geometry::norm(&v);
            if l > 1e-3 && l <= 1.0 {
                break v.iter().map(|x| x / l).collect();
            }
        };
        let value = d.eval(&y, &theta, &tau);
        let size = euclid(&theta);
        let lo = value / (d.c0 * size);
        let hi = value / (d.c1 * size);
        report.lower_ratio = report.lower_ratio.min(lo);
        report.upper_ratio = report.upper_ratio.max(hi);
        if (lo < 1.0 - tol || hi > 1.0 + tol) && report.witness.is_none() {
            report.witness = Some(GrowthWitness {
                y,
                theta,
                tau,
                value,
            });
        }
    }
    Ok(report)
}
