//! Seeded invariant suites reported as pass/fail lines.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cellsolver::{solve_enumerate, solve_heuristic, CellProblem, EXACT_EDGE_CAP};
use crate::chains::{LevelFn, MassNorm};
use crate::energy::{energy, validate_growth, EnergyDensity};
use crate::error::{Error, Result};
use crate::geometry::{build_lattice, direction_grid, Cube, LatticeGraph, Spacing};
use crate::homogenize::{continuity_check, subadditivity_check, HomogTable};
use crate::sample::{random_chain, random_closed_chain};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

fn suite(name: &str, passed: bool, detail: String) -> SuiteResult {
    SuiteResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn test_graph(n: usize, r: u32) -> Result<Arc<LatticeGraph>> {
    let w = Cube::axis(4.0, &vec![0.0; n])?;
    Ok(Arc::new(build_lattice(&w, Spacing::new(2)?, r)?))
}

/// `c0|θ| <= ψ(y,θ,τ) <= c1|θ|` at random sample points.
pub fn growth_suite(d: &EnergyDensity, samples: usize, seed: u64) -> Result<SuiteResult> {
    let rep = validate_growth(d, samples, seed)?;
    Ok(suite(
        "growth",
        rep.passed(),
        format!(
            "{} samples, min ψ/(c0|θ|) = {:.6}, max ψ/(c1|θ|) = {:.6}",
            rep.samples, rep.lower_ratio, rep.upper_ratio
        ),
    ))
}

/// `c0 M(c) <= F_ε(c) <= c1 M(c)` on random chains.
pub fn energy_sandwich_suite(d: &EnergyDensity, trials: usize, seed: u64) -> Result<SuiteResult> {
    let g = test_graph(d.dim(), 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let c = random_chain(&g, d.rank(), 40, 3, &mut rng);
        let eps = 1.0 / rng.gen_range(1..=4) as f64;
        let mass = c.mass(MassNorm::Euclid, None);
        let f = energy(&c, d, eps, None);
        let tol = 1e-9 * (1.0 + mass);
        worst = worst
            .max(d.c0() * mass - f - tol)
            .max(f - d.c1() * mass - tol);
    }
    Ok(suite(
        "energy-sandwich",
        worst <= 0.0,
        format!("{trials} chains, worst excess {worst:.3e}"),
    ))
}

/// Loop decomposition reconstructs the chain and the loops' total mass is
/// at most `√m` times the chain's Euclidean mass.
pub fn structure_suite(m: usize, trials: usize, seed: u64) -> Result<SuiteResult> {
    let g = test_graph(2, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = (m as f64).sqrt();
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let c = random_closed_chain(&g, m, 200, 3, &mut rng);
        let loops = c.loop_decompose()?;
        let mut sum = crate::chains::Chain::zero(g.clone(), m);
        let mut total = 0.0;
        for l in &loops {
            sum = sum.add(&l.to_chain(&g));
            total += MassNorm::Euclid.of(&l.theta) * l.length(&g);
        }
        let mass = c.mass(MassNorm::Euclid, None);
        if mass > 0.0 {
            worst = worst.max(total / mass);
        }
        if sum != c || total > bound * mass + 1e-9 {
            failures += 1;
        }
    }
    Ok(suite(
        "structure",
        failures == 0,
        format!("{trials} closed chains, m={m}, max loop/chain mass {worst:.6} (bound {bound:.6}), {failures} failures"),
    ))
}

/// For `f = x_i` the integral of the slice mass over all levels equals
/// `Σ |θ_e| |Δx_i(e)|` and is at most the mass. Level integrals are summed
/// in integer units of `h` over the intervals between node coordinates.
pub fn coarea_suite(trials: usize, seed: u64) -> Result<SuiteResult> {
    let g = test_graph(2, 2)?;
    let k = g.spacing().k() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..trials {
        let m = rng.gen_range(1..=2);
        let c = random_chain(&g, m, 30, 3, &mut rng);
        for axis in 0..g.dim() {
            let mut levels: Vec<i64> = c
                .support_nodes()
                .iter()
                .map(|&v| g.node_index(v)[axis])
                .collect();
            levels.sort_unstable();
            levels.dedup();
            let mut integral: i64 = 0;
            for w in levels.windows(2) {
                let s = (w[0] + w[1]) as f64 / (2 * k) as f64;
                let slice = c.slice(&LevelFn::Axis(axis), s);
                integral += (w[1] - w[0]) * slice.mass(MassNorm::One).round() as i64;
            }
            let mut expected: i64 = 0;
            let mut dominated = true;
            for (e, t) in c.iter() {
                let step = g.edge_step(e);
                let l1: i64 = t.iter().map(|x| x.abs()).sum();
                expected += l1 * step[axis].abs();
                let sq: i64 = step.iter().map(|x| x * x).sum();
                dominated &= step[axis] * step[axis] <= sq;
            }
            if integral != expected
                || !dominated
                || integral as f64 / k as f64 > c.mass(MassNorm::One, None) + 1e-9
            {
                failures += 1;
            }
        }
    }
    Ok(suite(
        "coarea",
        failures == 0,
        format!("{trials} chains, both axes, {failures} failures"),
    ))
}

/// Heuristic against brute-force enumeration on small random cells.
/// Returns the suite line and the gaps `heuristic - exact`.
pub fn oracle_suite(
    d: &EnergyDensity,
    trials: usize,
    seed: u64,
) -> Result<(SuiteResult, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = direction_grid(d.dim());
    let mut gaps = Vec::new();
    let mut attempts = 0;
    while gaps.len() < trials && attempts < 50 * trials.max(1) {
        attempts += 1;
        let b: Vec<i64> = loop {
            let b: Vec<i64> = (0..d.rank()).map(|_| rng.gen_range(-1..=1)).collect();
            if b.iter().any(|&x| x != 0) {
                break b;
            }
        };
        let t = &dirs[rng.gen_range(0..dirs.len())];
        let center: Vec<f64> = (0..d.dim())
            .map(|_| rng.gen_range(0..4) as f64 * 0.5)
            .collect();
        let p = CellProblem::new(&b, t, 4.0, &center, Spacing::new(1)?, 1, None, d.clone())?;
        if p.setup()?.free.len() > EXACT_EDGE_CAP {
            continue;
        }
        let exact = match solve_enumerate(&p) {
            Ok(s) => s,
            Err(Error::ExactCapExceeded { .. }) => continue,
            Err(e) => return Err(e),
        };
        let heur = solve_heuristic(&p)?;
        gaps.push(heur.value - exact.value);
    }
    let below = gaps.iter().filter(|&&g| g < -1e-9).count();
    let equal = gaps.iter().filter(|&&g| g.abs() <= 1e-9).count();
    let passed = gaps.len() == trials && below == 0 && equal * 5 >= 4 * gaps.len();
    let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    Ok((
        suite(
            "oracle",
            passed,
            format!(
                "{} problems, {equal} equal, {below} below exact, max gap {max_gap:.6}",
                gaps.len()
            ),
        ),
        gaps,
    ))
}

/// Growth sandwich, doubling estimate and direction continuity on a table.
pub fn table_suites(table: &HomogTable, d: &EnergyDensity) -> Vec<SuiteResult> {
    let mut out = Vec::new();
    let viol = table.sandwich_violations(d);
    out.push(suite(
        "table-sandwich",
        viol.is_empty(),
        format!("{} entries, {} violations", table.entries.len(), viol.len()),
    ));
    let sub = subadditivity_check(table, d);
    let worst = sub.iter().map(|v| v.excess).fold(0.0, f64::max);
    out.push(suite(
        "subadditivity",
        sub.is_empty(),
        format!("{} violations, worst excess {worst:.3e}", sub.len()),
    ));
    let mut bs: Vec<Vec<i64>> = table.entries.iter().map(|e| e.b.clone()).collect();
    bs.dedup();
    for b in bs {
        let grid: Vec<Vec<f64>> = table
            .entries
            .iter()
            .filter(|e| e.b == b)
            .map(|e| e.t.clone())
            .collect();
        let rep = continuity_check(&b, &grid, table, d);
        if rep.pairs == 0 {
            continue;
        }
        out.push(suite(
            &format!("continuity b={b:?}"),
            rep.passed,
            format!(
                "{} pairs, Lipschitz ratio {:.6} (bound {:.6})",
                rep.pairs, rep.max_ratio, rep.bound
            ),
        ));
    }
    out
}
