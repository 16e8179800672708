use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::cellsolver::{solve_exact, solve_heuristic, CellProblem, SolverTag};
use crate::chains::{euclid, Chain};
use crate::energy::EnergyDensity;
use crate::error::{parse_err, Error, Result};
use crate::geometry::{stretch, Spacing};

/// One solved cell of side `side`.
#[derive(Debug, Clone)]
pub struct TPoint {
    pub side: f64,
    pub value: f64,
    pub solver: SolverTag,
    pub hash: String,
    pub chain_ref: String,
    /// The minimizer and its clamp, kept in memory for recovery sequences.
    pub chain: Option<Arc<(Chain, Chain)>>,
    /// Wall time of the solve; not persisted.
    pub seconds: f64,
}

impl TPoint {
    pub fn per_length(&self) -> f64 {
        self.value / self.side
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFlag {
    Ok,
    /// Largest fit residual above 5% of the extrapolated value.
    Residual,
    /// value/T spread above 50%; no extrapolation performed.
    Spread,
}

impl FitFlag {
    fn as_str(&self) -> &'static str {
        match self {
            FitFlag::Ok => "ok",
            FitFlag::Residual => "residual",
            FitFlag::Spread => "spread",
        }
    }

    fn parse(s: &str) -> Option<FitFlag> {
        match s {
            "ok" => Some(FitFlag::Ok),
            "residual" => Some(FitFlag::Residual),
            "spread" => Some(FitFlag::Spread),
            _ => None,
        }
    }
}

/// Least-squares fit of value/T = psi_hom + slope/T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub psi_hom: f64,
    pub slope: f64,
    pub residual: f64,
    pub error_bar: f64,
    pub flag: FitFlag,
}

#[derive(Debug, Clone)]
pub struct TableEntry {
    pub b: Vec<i64>,
    pub t: Vec<f64>,
    pub points: Vec<TPoint>,
    pub fit: Fit,
}

#[derive(Debug, Clone)]
pub struct HomogTable {
    pub density: String,
    pub spacing: Spacing,
    pub r: u32,
    pub theta_max: Option<i64>,
    pub m: usize,
    pub n: usize,
    pub entries: Vec<TableEntry>,
}

/// Everything needed to build a table. Every cell is centred at the origin.
#[derive(Debug, Clone)]
pub struct TableSpec {
    pub density: EnergyDensity,
    pub spacing: Spacing,
    pub r: u32,
    pub theta_max: Option<i64>,
    pub bs: Vec<Vec<i64>>,
    pub ts: Vec<Vec<f64>>,
    pub sides: Vec<f64>,
    /// Use the exact solver instead of the heuristic.
    pub exact: bool,
}

/// Fits value/T = a + C/T; flags large residuals and refuses to
/// extrapolate wildly spread data.
pub fn fit_entry(points: &[TPoint]) -> Fit {
    let ys: Vec<f64> = points.iter().map(|p| p.per_length()).collect();
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.side).collect();
    let last = points
        .iter()
        .max_by(|a, b| a.side.total_cmp(&b.side))
        .map_or(0.0, |p| p.per_length());
    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if ys.is_empty() || (hi - lo) > 0.5 * lo.abs() {
        return Fit {
            psi_hom: last,
            slope: 0.0,
            residual: 0.0,
            error_bar: hi - lo,
            flag: FitFlag::Spread,
        };
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - a - slope * x).abs())
        .fold(0.0, f64::max);
    let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let flag = if residual > 0.05 * a.abs() {
        FitFlag::Residual
    } else {
        FitFlag::Ok
    };
    Fit {
        psi_hom: a,
        slope,
        residual,
        error_bar: residual + (slope * xmin).abs(),
        flag,
    }
}

fn solve_point(p: &CellProblem, exact: bool) -> Result<TPoint> {
    let start = Instant::now();
    let sol = if exact {
        solve_exact(p)?
    } else {
        solve_heuristic(p)?
    };
    let hash = p.hash();
    let clamp = p.setup()?.clamp;
    Ok(TPoint {
        side: p.side,
        value: sol.value,
        solver: sol.solver,
        chain_ref: format!("chains/{hash}.chain"),
        hash,
        chain: Some(Arc::new((sol.chain, clamp))),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Solves the cell problem for every side in `sides` and fits ψ_hom.
#[allow(clippy::too_many_arguments)]
pub fn psi_hom_estimate(
    b: &[i64],
    t: &[f64],
    density: &EnergyDensity,
    sides: &[f64],
    spacing: Spacing,
    r: u32,
    theta_max: Option<i64>,
) -> Result<TableEntry> {
    check_sides(sides)?;
    let center = vec![0.0; t.len()];
    let points = sides
        .iter()
        .map(|&s| {
            let p = CellProblem::new(b, t, s, &center, spacing, r, theta_max, density.clone())?;
            solve_point(&p, false)
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_entry(&points);
    Ok(TableEntry {
        b: b.to_vec(),
        t: t.to_vec(),
        points,
        fit,
    })
}

fn check_sides(sides: &[f64]) -> Result<()> {
    if sides.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least three cube sides to extrapolate".into(),
        ));
    }
    if sides.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "cube sides must be ascending".into(),
        ));
    }
    if sides.iter().any(|s| (s - s.round()).abs() > 1e-12) {
        return Err(Error::InvalidParameter(
            "cube sides must be integers".into(),
        ));
    }
    Ok(())
}

/// Solves every (b, t, T) cell on a pool of `workers` threads. The table
/// is assembled in input order, so its bytes do not depend on `workers`.
pub fn build_table(spec: &TableSpec, workers: usize) -> Result<HomogTable> {
    check_sides(&spec.sides)?;
    let center = vec![0.0; spec.density.dim()];
    let mut problems = Vec::new();
    for b in &spec.bs {
        for t in &spec.ts {
            for &s in &spec.sides {
                problems.push(CellProblem::new(
                    b,
                    t,
                    s,
                    &center,
                    spec.spacing,
                    spec.r,
                    spec.theta_max,
                    spec.density.clone(),
                )?);
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let solved: Vec<Result<TPoint>> = pool.install(|| {
        problems
            .par_iter()
            .map(|p| solve_point(p, spec.exact))
            .collect()
    });
    let mut solved = solved.into_iter();
    let mut entries = Vec::new();
    for b in &spec.bs {
        for t in &spec.ts {
            let points = (0..spec.sides.len())
                .map(|_| solved.next().expect("one result per problem"))
                .collect::<Result<Vec<_>>>()?;
            let fit = fit_entry(&points);
            entries.push(TableEntry {
                b: b.clone(),
                t: t.clone(),
                points,
                fit,
            });
        }
    }
    Ok(HomogTable {
        density: spec.density.describe(),
        spacing: spec.spacing,
        r: spec.r,
        theta_max: spec.theta_max,
        m: spec.density.rank(),
        n: spec.density.dim(),
        entries,
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

impl HomogTable {
    pub fn find(&self, b: &[i64], t: &[f64]) -> Option<&TableEntry> {
        self.entries
            .iter()
            .find(|e| e.b == b && e.t.iter().zip(t).all(|(x, y)| (x - y).abs() < 1e-12))
    }

    /// Checks `c0|b|(1 - 2rh/Tmin) <= ψ_hom <= c1|b| stretch(t, r)` on every
    /// entry; returns the offending entries.
    pub fn sandwich_violations(&self, density: &EnergyDensity) -> Vec<(Vec<i64>, Vec<f64>, f64)> {
        let rh = self.r as f64 * self.spacing.h();
        let mut out = Vec::new();
        for e in &self.entries {
            let tmin = e
                .points
                .iter()
                .map(|p| p.side)
                .fold(f64::INFINITY, f64::min);
            let nb = euclid(&e.b);
            let lo = density.c0() * nb * (1.0 - 2.0 * rh / tmin) - 1e-9;
            let hi = density.c1() * nb * stretch(&e.t, self.r) + 1e-9;
            if e.fit.psi_hom < lo || e.fit.psi_hom > hi {
                out.push((e.b.clone(), e.t.clone(), e.fit.psi_hom));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let tm = self
            .theta_max
            .map_or_else(|| "auto".to_string(), |x| x.to_string());
        let _ = writeln!(
            s,
            "homtable density={} h=1/{} r={} thetamax={} m={} n={}",
            self.density,
            self.spacing.k(),
            self.r,
            tm,
            self.m,
            self.n
        );
        for e in &self.entries {
            let _ = writeln!(s, "entry b={} t={}", join(&e.b), join_f(&e.t));
            for p in &e.points {
                let _ = writeln!(
                    s,
                    "T {:?} {:.16e} {:.16e} {} {} {}",
                    p.side,
                    p.value,
                    p.per_length(),
                    p.solver,
                    p.hash,
                    p.chain_ref
                );
            }
            let _ = writeln!(
                s,
                "fit psi_hom={:.16e} slope={:.16e} residual={:.16e} error_bar={:.16e} flag={}",
                e.fit.psi_hom,
                e.fit.slope,
                e.fit.residual,
                e.fit.error_bar,
                e.fit.flag.as_str()
            );
            s.push_str("end\n");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<HomogTable> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty table"))?;
        let kv = key_values(
            header
                .strip_prefix("homtable ")
                .ok_or_else(|| parse_err(1, "header must start with `homtable`"))?,
        );
        let get = |k: &str| -> Result<&str> {
            kv.iter()
                .find(|(a, _)| a == k)
                .map(|(_, b)| b.as_str())
                .ok_or_else(|| parse_err(1, format!("missing `{k}`")))
        };
        let spacing = Spacing::parse(get("h")?)?;
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| parse_err(1, format!("bad `{k}`")))
        };
        let theta_max = match get("thetamax")? {
            "auto" => None,
            x => Some(x.parse().map_err(|_| parse_err(1, "bad `thetamax`"))?),
        };
        let mut table = HomogTable {
            density: get("density")?.to_string(),
            spacing,
            r: num("r")? as u32,
            theta_max,
            m: num("m")?,
            n: num("n")?,
            entries: Vec::new(),
        };
        let mut current: Option<TableEntry> = None;
        for (no, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("entry ") {
                let kv = key_values(rest);
                let field = |k: &str| {
                    kv.iter()
                        .find(|(a, _)| a == k)
                        .map(|(_, b)| b.clone())
                        .ok_or_else(|| parse_err(no, format!("missing `{k}`")))
                };
                let b = field("b")?
                    .split(',')
                    .map(|x| x.parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| parse_err(no, "bad b"))?;
                let t = field("t")?
                    .split(',')
                    .map(|x| x.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| parse_err(no, "bad t"))?;
                current = Some(TableEntry {
                    b,
                    t,
                    points: Vec::new(),
                    fit: Fit {
                        psi_hom: f64::NAN,
                        slope: 0.0,
                        residual: 0.0,
                        error_bar: 0.0,
                        flag: FitFlag::Ok,
                    },
                });
            } else if let Some(rest) = line.strip_prefix("T ") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 6 {
                    return Err(parse_err(no, "T line needs 6 fields"));
                }
                let e = current
                    .as_mut()
                    .ok_or_else(|| parse_err(no, "T outside entry"))?;
                let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(no, "bad number"));
                e.points.push(TPoint {
                    side: num(f[0])?,
                    value: num(f[1])?,
                    solver: f[3].parse().map_err(|_| parse_err(no, "bad solver"))?,
                    hash: f[4].to_string(),
                    chain_ref: f[5].to_string(),
                    chain: None,
                    seconds: 0.0,
                });
            } else if let Some(rest) = line.strip_prefix("fit ") {
                let kv = key_values(rest);
                let e = current
                    .as_mut()
                    .ok_or_else(|| parse_err(no, "fit outside entry"))?;
                let num = |k: &str| -> Result<f64> {
                    kv.iter()
                        .find(|(a, _)| a == k)
                        .and_then(|(_, b)| b.parse().ok())
                        .ok_or_else(|| parse_err(no, format!("bad `{k}`")))
                };
                let flag = kv
                    .iter()
                    .find(|(a, _)| a == "flag")
                    .and_then(|(_, b)| FitFlag::parse(b))
                    .ok_or_else(|| parse_err(no, "bad flag"))?;
                e.fit = Fit {
                    psi_hom: num("psi_hom")?,
                    slope: num("slope")?,
                    residual: num("residual")?,
                    error_bar: num("error_bar")?,
                    flag,
                };
            } else if line == "end" {
                let e = current
                    .take()
                    .ok_or_else(|| parse_err(no, "end outside entry"))?;
                table.entries.push(e);
            } else {
                return Err(parse_err(no, format!("unrecognized line '{line}'")));
            }
        }
        if current.is_some() {
            return Err(parse_err(0, "unterminated entry"));
        }
        Ok(table)
    }
}

fn key_values(s: &str) -> Vec<(String, String)> {
    s.split_whitespace()
        .filter_map(|tok| {
            tok.split_once('=')
                .map(|(a, b)| (a.to_string(), b.to_string()))
        })
        .collect()
}
