//! Estimates of the homogenized density ψ_hom from cell problems of growing
//! size, checks of its structural properties, boundary patching and
//! recovery sequences.

mod patch;
mod recovery;
mod table;

pub use patch::{boundary_patch, PatchResult};
pub use recovery::{
    f_hom, local_density_probe, psi_hom_at, recovery_sequence, FHomValue, LocalDensityReport,
    RecoveryStep, Segment, Target,
};
pub use table::{
    build_table, fit_entry, psi_hom_estimate, Fit, FitFlag, HomogTable, TPoint, TableEntry,
    TableSpec,
};

use crate::cellsolver::{solve_heuristic, CellProblem};
use crate::chains::euclid;
use crate::energy::EnergyDensity;
use crate::error::Result;
use crate::geometry::Spacing;

/// Slack allowed on top of `c1` for direction-to-direction variation of
/// lattice minima (staircase anisotropy).
pub const DIRECTION_TOLERANCE: f64 = 0.25;
/// Constant in the doubling estimate `m(2T)/2T <= m(T)/T + C c1|b|(rh+√n)/T`.
pub const SUBADDITIVITY_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    /// m^(T)(x)/T for each sample centre.
    pub values: Vec<f64>,
    pub spread: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Spread of m^(T)(x)/T over cell centres `x`, against the gluing slack
/// `c1|b|(2rh + √n)/T`.
#[allow(clippy::too_many_arguments)]
pub fn translation_uniformity_check(
    b: &[i64],
    t: &[f64],
    density: &EnergyDensity,
    side: f64,
    spacing: Spacing,
    r: u32,
    theta_max: Option<i64>,
    centers: &[Vec<f64>],
) -> Result<UniformityReport> {
    let mut values = Vec::with_capacity(centers.len());
    for x in centers {
        let p = CellProblem::new(b, t, side, x, spacing, r, theta_max, density.clone())?;
        values.push(solve_heuristic(&p)?.value / side);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = if values.is_empty() { 0.0 } else { hi - lo };
    let n = t.len() as f64;
    let bound = 1e-9 + density.c1() * euclid(b) * (2.0 * r as f64 * spacing.h() + n.sqrt()) / side;
    Ok(UniformityReport {
        values,
        spread,
        bound,
        passed: spread <= bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub max_ratio: f64,
    pub bound: f64,
    /// Directions of the grid with no table entry.
    pub missing: Vec<Vec<f64>>,
    pub pairs: usize,
    pub passed: bool,
}

/// Largest `|ψ(b,t) - ψ(b,t')| / (|b| |t - t'|)` over pairs of grid
/// directions, against `c1 (1 + 0.25)`.
pub fn continuity_check(
    b: &[i64],
    t_grid: &[Vec<f64>],
    table: &HomogTable,
    density: &EnergyDensity,
) -> ContinuityReport {
    let mut have = Vec::new();
    let mut missing = Vec::new();
    for t in t_grid {
        match table.find(b, t) {
            Some(e) => have.push((t.clone(), e.fit.psi_hom)),
            None => missing.push(t.clone()),
        }
    }
    let nb = euclid(b);
    let mut max_ratio = 0.0_f64;
    let mut pairs = 0;
    for i in 0..have.len() {
        for j in i + 1..have.len() {
            let dt: f64 = have[i]
                .0
                .iter()
                .zip(&have[j].0)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if dt < 1e-12 {
                continue;
            }
            pairs += 1;
            max_ratio = max_ratio.max((have[i].1 - have[j].1).abs() / (nb * dt));
        }
    }
    let bound = density.c1() * (1.0 + DIRECTION_TOLERANCE);
    ContinuityReport {
        max_ratio,
        bound,
        passed: missing.is_empty() && max_ratio <= bound,
        missing,
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubadditivityViolation {
    pub b: Vec<i64>,
    pub t: Vec<f64>,
    pub side: f64,
    pub excess: f64,
}

/// Checks `m(2T)/2T <= m(T)/T + C c1|b|(rh + √n)/T` on every entry holding
/// both T and 2T; returns the violations.
pub fn subadditivity_check(
    table: &HomogTable,
    density: &EnergyDensity,
) -> Vec<SubadditivityViolation> {
    let rh = table.r as f64 * table.spacing.h();
    let mut out = Vec::new();
    for e in &table.entries {
        let n = e.t.len() as f64;
        for p in &e.points {
            if let Some(q) = e
                .points
                .iter()
                .find(|q| (q.side - 2.0 * p.side).abs() < 1e-9)
            {
                let slack =
                    SUBADDITIVITY_CONSTANT * density.c1() * euclid(&e.b) * (rh + n.sqrt()) / p.side;
                let excess = q.per_length() - p.per_length() - slack;
                if excess > 1e-9 {
                    out.push(SubadditivityViolation {
                        b: e.b.clone(),
                        t: e.t.clone(),
                        side: p.side,
                        excess,
                    });
                }
            }
        }
    }
    out
}
