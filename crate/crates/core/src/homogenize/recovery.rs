use std::sync::Arc;

use serde::Deserialize;

use super::table::{HomogTable, TPoint};
use crate::chains::{euclid, Chain};
use crate::energy::{energy, EnergyDensity};
use crate::error::{Error, Result};
use crate::flat::flat_distance;
use crate::geometry::{norm, path_chain, tube_path, Cube, LatticeGraph, Spacing};

/// Largest angular gap bridged by interpolation in [`f_hom`].
pub const MAX_INTERPOLATION_ANGLE: f64 = std::f64::consts::PI / 8.0;

const RECOVERY_NODE_CAP: usize = 4_000_000;

/// Straight segment carrying the multiplicity `b` from `start` to `end`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub b: Vec<i64>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        let d: Vec<f64> = self
            .end
            .iter()
            .zip(&self.start)
            .map(|(a, b)| a - b)
            .collect();
        norm(&d)
    }

    pub fn direction(&self) -> Vec<f64> {
        let l = self.length();
        self.end
            .iter()
            .zip(&self.start)
            .map(|(a, b)| (a - b) / l)
            .collect()
    }
}

/// Polyhedral closed chain.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    #[serde(rename = "segment")]
    pub segments: Vec<Segment>,
}

impl Target {
    pub fn new(segments: Vec<Segment>) -> Result<Target> {
        let t = Target { segments };
        t.validate()?;
        Ok(t)
    }

    /// Axis-aligned square loop `[x, x+side] x [y, y+side]`, counterclockwise.
    pub fn square_loop(corner: [f64; 2], side: f64, b: &[i64]) -> Target {
        let [x, y] = corner;
        let pts = [[x, y], [x + side, y], [x + side, y + side], [x, y + side]];
        let segments = (0..4)
            .map(|i| Segment {
                start: pts[i].to_vec(),
                end: pts[(i + 1) % 4].to_vec(),
                b: b.to_vec(),
            })
            .collect();
        Target { segments }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidParameter("target has no segments".into()));
        }
        let n = self.segments[0].start.len();
        let m = self.segments[0].b.len();
        let mut ends: Vec<(Vec<f64>, Vec<i64>)> = Vec::new();
        let mut add = |p: &[f64], b: &[i64], sign: i64| {
            if let Some(slot) = ends
                .iter_mut()
                .find(|(q, _)| q.iter().zip(p).all(|(a, c)| (a - c).abs() < 1e-9))
            {
                for (s, x) in slot.1.iter_mut().zip(b) {
                    *s += sign * x;
                }
            } else {
                ends.push((p.to_vec(), b.iter().map(|x| sign * x).collect()));
            }
        };
        for s in &self.segments {
            if s.start.len() != n || s.end.len() != n || s.b.len() != m {
                return Err(Error::InvalidParameter("segment dimensions differ".into()));
            }
            if s.length() < 1e-12 {
                return Err(Error::InvalidParameter("degenerate segment".into()));
            }
            add(&s.end, &s.b, 1);
            add(&s.start, &s.b, -1);
        }
        if ends.iter().any(|(_, b)| b.iter().any(|&x| x != 0)) {
            return Err(Error::NotClosed {
                nodes: ends
                    .iter()
                    .filter(|(_, b)| b.iter().any(|&x| x != 0))
                    .count(),
            });
        }
        Ok(())
    }
}

/// Entry for `(b, t)` with the sign relating its chain to a line carrying
/// `b` along `t`. Uses ψ(y,-θ,τ) = ψ(y,θ,τ) = ψ(y,θ,-τ), which holds for
/// every built-in density.
fn lookup<'a>(table: &'a HomogTable, b: &[i64], t: &[f64]) -> Option<(&'a super::TableEntry, i64)> {
    let nb: Vec<i64> = b.iter().map(|x| -x).collect();
    let nt: Vec<f64> = t.iter().map(|x| -x).collect();
    table
        .find(b, t)
        .map(|e| (e, 1))
        .or_else(|| table.find(&nb, &nt).map(|e| (e, 1)))
        .or_else(|| table.find(b, &nt).map(|e| (e, -1)))
        .or_else(|| table.find(&nb, t).map(|e| (e, -1)))
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let c: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    c.clamp(-1.0, 1.0).acos()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FHomValue {
    pub value: f64,
    /// Σ length · c1|b| α over interpolated segments.
    pub error_bound: f64,
}

/// ψ_hom(b, t) from the table: exact lookup, otherwise interpolation in
/// the angle between the nearest tabulated directions on either side
/// (plane), or the nearest direction (higher dimension), within π/8.
/// Returns the value and its error bound `c1|b| α`.
pub fn psi_hom_at(
    table: &HomogTable,
    density: &EnergyDensity,
    b: &[i64],
    t: &[f64],
) -> Result<(f64, f64)> {
    if let Some((e, _)) = lookup(table, b, t) {
        return Ok((e.fit.psi_hom, 0.0));
    }
    let nb: Vec<i64> = b.iter().map(|x| -x).collect();
    let mut dirs: Vec<(Vec<f64>, f64)> = Vec::new();
    for e in &table.entries {
        if e.b == b || e.b == nb {
            let neg: Vec<f64> = e.t.iter().map(|x| -x).collect();
            dirs.push((e.t.clone(), e.fit.psi_hom));
            dirs.push((neg, e.fit.psi_hom));
        }
    }
    let missing = || Error::MissingEntry {
        b: b.to_vec(),
        t: t.to_vec(),
    };
    if t.len() == 2 {
        let phi = t[1].atan2(t[0]);
        let signed = |d: &[f64]| {
            let mut a = d[1].atan2(d[0]) - phi;
            while a > std::f64::consts::PI {
                a -= 2.0 * std::f64::consts::PI;
            }
            while a <= -std::f64::consts::PI {
                a += 2.0 * std::f64::consts::PI;
            }
            a
        };
        let above = dirs
            .iter()
            .map(|(d, v)| (signed(d), *v))
            .filter(|(a, _)| *a >= 0.0)
            .min_by(|x, y| x.0.total_cmp(&y.0));
        let below = dirs
            .iter()
            .map(|(d, v)| (signed(d), *v))
            .filter(|(a, _)| *a < 0.0)
            .max_by(|x, y| x.0.total_cmp(&y.0));
        let c = density.c1() * euclid(b);
        return match (above, below) {
            (Some((a1, v1)), Some((a0, v0)))
                if a1 <= MAX_INTERPOLATION_ANGLE && -a0 <= MAX_INTERPOLATION_ANGLE =>
            {
                let w = -a0 / (a1 - a0);
                Ok((v0 + w * (v1 - v0), c * a1.max(-a0)))
            }
            _ => {
                let near = [above, below]
                    .into_iter()
                    .flatten()
                    .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
                    .ok_or_else(missing)?;
                if near.0.abs() > MAX_INTERPOLATION_ANGLE {
                    return Err(missing());
                }
                Ok((near.1, c * near.0.abs()))
            }
        };
    }
    let (a, v) = dirs
        .iter()
        .map(|(d, v)| (angle(d, t), *v))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .ok_or_else(missing)?;
    if a > MAX_INTERPOLATION_ANGLE {
        return Err(missing());
    }
    Ok((v, density.c1() * euclid(b) * a))
}

/// F_hom of a polyhedral target: Σ length · ψ_hom(b_i, t_i).
pub fn f_hom(target: &Target, table: &HomogTable, density: &EnergyDensity) -> Result<FHomValue> {
    target.validate()?;
    let mut value = 0.0;
    let mut error_bound = 0.0;
    for s in &target.segments {
        let (psi, err) = psi_hom_at(table, density, &s.b, &s.direction())?;
        value += s.length() * psi;
        error_bound += s.length() * err;
    }
    Ok(FHomValue { value, error_bound })
}

#[derive(Debug, Clone)]
pub struct RecoveryStep {
    pub eps: f64,
    pub chain: Chain,
    /// The target drawn on the same lattice.
    pub target_chain: Chain,
    pub energy: f64,
    pub flat_distance: f64,
    pub cells: usize,
}

fn target_on_lattice(target: &Target, g: &Arc<LatticeGraph>) -> Result<Chain> {
    let k = g.spacing().k() as f64;
    let m = target.segments[0].b.len();
    let mut c = Chain::zero(g.clone(), m);
    let radius = g.h() * (g.dim() as f64).sqrt() * (1.0 + 1e-9);
    for s in &target.segments {
        let node = |p: &[f64]| -> Result<usize> {
            let idx: Vec<i64> = p.iter().map(|x| (x * k).round() as i64).collect();
            g.node_id(&idx).ok_or_else(|| {
                Error::InvalidParameter(format!("target vertex {p:?} off the lattice"))
            })
        };
        let (a, b) = (node(&s.start)?, node(&s.end)?);
        let path =
            tube_path(g, a, b, &s.start, &s.direction(), radius).ok_or(Error::NoStaircase {
                bound: radius,
                best: f64::INFINITY,
            })?;
        c = c.add(&path_chain(g, &path, &s.b)?);
    }
    Ok(c)
}

/// Glues rescaled cell minimizers along each segment of `target`.
///
/// For ε = 1/N the lattice has spacing ε h. Each segment is tiled by cubes
/// of side ε T aligned with it, using the largest tabulated T whose cubes
/// tile the segment exactly (or, failing that, the largest that fits,
/// centred). Each cube replaces the target's staircase by the cell
/// minimizer: the recovery chain is the target plus, for every cube, the
/// pushed-forward minimizer minus its pushed-forward clamp. Both differ
/// only inside the cube and share their boundary, so the result is closed.
/// Cube centres are rounded to εZ^n, which keeps ψ(x/ε) aligned with the
/// cell problem.
pub fn recovery_sequence(
    target: &Target,
    density: &EnergyDensity,
    eps_list: &[f64],
    table: &HomogTable,
) -> Result<Vec<RecoveryStep>> {
    target.validate()?;
    let n = target.segments[0].start.len();
    let k = table.spacing.k() as u64;
    let mut steps = Vec::new();
    for &eps in eps_list {
        let inv = 1.0 / eps;
        if !(eps > 0.0) || (inv - inv.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "ε = {eps} is not 1/integer"
            )));
        }
        let big_n = inv.round() as u64;
        let spacing = Spacing::new(
            u32::try_from(big_n * k).map_err(|_| Error::InvalidParameter("ε too small".into()))?,
        )?;

        // choose cells per segment
        let mut plan: Vec<(usize, &TPoint, i64, Vec<Vec<f64>>)> = Vec::new();
        let mut reach = 0.0_f64;
        for (si, s) in target.segments.iter().enumerate() {
            let t = s.direction();
            let (entry, sign) = lookup(table, &s.b, &t).ok_or_else(|| Error::MissingEntry {
                b: s.b.clone(),
                t: t.clone(),
            })?;
            let len = s.length();
            let usable: Vec<&TPoint> = entry
                .points
                .iter()
                .filter(|p| p.chain.is_some() && eps * p.side <= len + 1e-9)
                .collect();
            let tiles = |p: &TPoint| {
                let q = len / (eps * p.side);
                (q - q.round()).abs() < 1e-9
            };
            let chosen = usable
                .iter()
                .filter(|p| tiles(p))
                .max_by(|a, b| a.side.total_cmp(&b.side))
                .or_else(|| usable.iter().max_by(|a, b| a.side.total_cmp(&b.side)));
            let Some(&point) = chosen else {
                continue;
            };
            let side = eps * point.side;
            let q = (len / side + 1e-9).floor() as usize;
            let offset = (len - q as f64 * side) / 2.0;
            let centers: Vec<Vec<f64>> = (0..q)
                .map(|j| {
                    let sj = offset + (j as f64 + 0.5) * side;
                    s.start
                        .iter()
                        .zip(&t)
                        .map(|(a, d)| ((a + sj * d) * inv).round() / inv)
                        .collect()
                })
                .collect();
            reach = reach.max(side * (n as f64).sqrt() / 2.0);
            plan.push((si, point, sign, centers));
        }

        // lattice covering the target and every cube
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for s in &target.segments {
            for p in [&s.start, &s.end] {
                for i in 0..n {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
        }
        let margin = reach + 2.0 * table.r as f64 * spacing.h();
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max) + 2.0 * margin;
        let domain = Cube::axis(extent, &center)?;
        let g = Arc::new(LatticeGraph::build(
            &domain,
            spacing,
            table.r,
            table.r,
            RECOVERY_NODE_CAP,
        )?);
        let target_chain = target_on_lattice(target, &g)?;
        let mut chain = target_chain.clone();
        let mut cells = 0;
        for (_, point, sign, centers) in &plan {
            let pair = point.chain.as_ref().expect("filtered on stored chains");
            let (cell, clamp) = (&pair.0, &pair.1);
            let perturbation = cell.sub(clamp).scale(*sign);
            let cg = cell.graph().clone();
            for c in centers {
                let shift: Vec<i64> = c
                    .iter()
                    .map(|x| (x * inv).round() as i64 * k as i64)
                    .collect();
                let pushed = perturbation.push_forward(&g, |v| {
                    let idx: Vec<i64> = cg
                        .node_index(v)
                        .iter()
                        .zip(&shift)
                        .map(|(a, b)| a + b)
                        .collect();
                    g.node_id(&idx)
                })?;
                chain = chain.add(&pushed);
                cells += 1;
            }
        }
        let energy = energy(&chain, density, eps, None);
        let flat = flat_distance(&chain, &target_chain, &domain)?;
        steps.push(RecoveryStep {
            eps,
            chain,
            target_chain,
            energy,
            flat_distance: flat,
            cells,
        });
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDensityReport {
    pub x0: Vec<f64>,
    pub rhos: Vec<f64>,
    /// F_ε_j(chain_j, Q_ρj^t(x0)) / ρ_j.
    pub values: Vec<f64>,
    pub reference: f64,
    /// Every value is at least `reference * (1 - tol)`.
    pub passed: bool,
}

/// Energy per unit length of each chain in a cube of side ρ_j around `x0`
/// aligned with `t`, compared with ψ_hom(b, t).
pub fn local_density_probe(
    chains: &[(f64, Chain)],
    x0: &[f64],
    t: &[f64],
    rhos: &[f64],
    density: &EnergyDensity,
    reference: f64,
    tol: f64,
) -> Result<LocalDensityReport> {
    if chains.len() != rhos.len() {
        return Err(Error::InvalidParameter("need one radius per chain".into()));
    }
    let mut values = Vec::with_capacity(rhos.len());
    for ((eps, c), &rho) in chains.iter().zip(rhos) {
        let q = Cube::new(t, rho, x0)?;
        values.push(energy(c, density, *eps, Some(&q)) / rho);
    }
    let passed = values.iter().all(|v| *v >= reference * (1.0 - tol));
    Ok(LocalDensityReport {
        x0: x0.to_vec(),
        rhos: rhos.to_vec(),
        values,
        reference,
        passed,
    })
}
