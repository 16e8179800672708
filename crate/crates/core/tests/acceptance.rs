//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use homogcur::cellsolver::{solve_exact, solve_heuristic, CellProblem};
use homogcur::chains::{Chain, ZeroChain};
use homogcur::energy::{DensityKind, EnergyDensity};
use homogcur::flat::{filling_boundary, flat_distance, flat_norm_zero};
use homogcur::geometry::{build_lattice, direction_grid, staircase_line, Cube, Spacing};
use homogcur::homogenize::{
    boundary_patch, build_table, continuity_check, f_hom, recovery_sequence,
    translation_uniformity_check, HomogTable, TableSpec, Target,
};
use homogcur::verify::{coarea_suite, oracle_suite, structure_suite};

const SEED: u64 = 20240917;
const UNIT_TOL: f64 = 0.02;
const TABLE_SECONDS: f64 = 120.0;
const ORACLE_PROBLEMS: usize = 50;
const ORACLE_EQUAL_SHARE: f64 = 0.8;
const RECOVERY_TOL: f64 = 0.05;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn density(kind: DensityKind, m: usize) -> EnergyDensity {
    EnergyDensity::new(kind, m, 2).expect("valid density")
}

fn h_half() -> Spacing {
    Spacing::new(2).expect("valid spacing")
}

fn diagonal() -> Vec<f64> {
    let s = 0.5f64.sqrt();
    vec![s, s]
}

fn table(
    d: &EnergyDensity,
    bs: Vec<Vec<i64>>,
    ts: Vec<Vec<f64>>,
    sides: &[f64],
    workers: usize,
) -> HomogTable {
    let spec = TableSpec {
        density: d.clone(),
        spacing: h_half(),
        r: 2,
        theta_max: None,
        bs,
        ts,
        sides: sides.to_vec(),
        exact: false,
    };
    build_table(&spec, workers).expect("table builds")
}

fn euclid(b: &[i64]) -> f64 {
    b.iter().map(|x| (x * x) as f64).sum::<f64>().sqrt()
}

struct Tables {
    unit: Vec<(EnergyDensity, HomogTable)>,
    aniso: (EnergyDensity, HomogTable),
    checker: (EnergyDensity, HomogTable),
}

fn unit_exactness(tables: &mut Vec<(EnergyDensity, HomogTable)>) -> Outcome {
    let mut worst = 0.0_f64;
    let mut slowest = 0.0_f64;
    for b in [vec![1], vec![2], vec![1, 1]] {
        let d = EnergyDensity::unit(b.len(), 2);
        let start = Instant::now();
        let t = table(
            &d,
            vec![b.clone()],
            vec![vec![1.0, 0.0], diagonal()],
            &[4.0, 8.0, 16.0],
            4,
        );
        slowest = slowest.max(start.elapsed().as_secs_f64());
        for e in &t.entries {
            worst = worst.max((e.fit.psi_hom - euclid(&b)).abs() / euclid(&b));
        }
        tables.push((d, t));
    }
    outcome(
        worst <= UNIT_TOL && slowest < TABLE_SECONDS,
        format!("max relative error {worst:.4} (tol {UNIT_TOL}), slowest table {slowest:.1} s"),
    )
}

fn growth_sandwich(tables: &Tables) -> Outcome {
    let mut entries = 0;
    let mut violations = 0;
    let all = tables.unit.iter().chain([&tables.aniso, &tables.checker]);
    for (d, t) in all {
        entries += t.entries.len();
        violations += t.sandwich_violations(d).len();
    }
    outcome(
        violations == 0,
        format!("{entries} entries, {violations} violations"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut gaps = Vec::new();
    for (d, n, seed) in [
        (density(DensityKind::Checker { a: 3.0 }, 1), 20, SEED),
        (density(DensityKind::Channels { a: 3.0 }, 1), 15, SEED + 1),
        (density(DensityKind::Split2 { a: 3.0 }, 2), 15, SEED + 2),
    ] {
        let (_, g) = oracle_suite(&d, n, seed).expect("oracle runs");
        gaps.extend(g);
    }
    let below = gaps.iter().filter(|&&g| g < -1e-9).count();
    let equal = gaps.iter().filter(|&&g| g.abs() <= 1e-9).count();
    let mut positive: Vec<f64> = gaps.iter().copied().filter(|&g| g > 1e-9).collect();
    positive.sort_by(|a, b| a.total_cmp(b));
    let passed = gaps.len() == ORACLE_PROBLEMS
        && below == 0
        && equal as f64 >= ORACLE_EQUAL_SHARE * gaps.len() as f64;
    outcome(
        passed,
        format!(
            "{} problems: {equal} equal, {below} below exact, positive gaps {positive:.4?}",
            gaps.len()
        ),
    )
}

fn vector_recombination(tables: &Tables) -> Outcome {
    let (_, unit11) = &tables.unit[2];
    let merged = unit11
        .entries
        .iter()
        .map(|e| (e.fit.psi_hom - 2f64.sqrt()).abs() / 2f64.sqrt())
        .fold(0.0, f64::max);

    let d = density(DensityKind::Split2 { a: 3.0 }, 2);
    let p = CellProblem::new(&[1, 1], &[1.0, 0.0], 4.0, &[0.0, 0.0], h_half(), 2, None, d)
        .expect("valid cell");
    let exact = solve_exact(&p).expect("exact solve");
    let heur = solve_heuristic(&p).expect("heuristic solve");
    let setup = p.setup().expect("setup");
    let g = heur.chain.graph();
    // component-pure edges inside the cube, by the parity of their row
    let (mut even_first, mut odd_second, mut misplaced) = (0, 0, 0);
    for (e, t) in heur.chain.iter() {
        let mid = g.edge_midpoint(e);
        if !setup.inner.contains(&mid) {
            continue;
        }
        let row = (mid[1].floor() as i64).rem_euclid(2);
        match (t[0] != 0, t[1] != 0, row) {
            (true, false, 0) => even_first += 1,
            (false, true, 1) => odd_second += 1,
            (true, true, _) => {}
            _ => misplaced += 1,
        }
    }
    let single = setup.value(&p.density, &setup.clamp);
    let passed = merged <= UNIT_TOL
        && (heur.value - exact.value).abs() < 1e-9
        && heur.value < single - 1e-9
        && even_first > 0
        && odd_second > 0
        && misplaced == 0;
    outcome(
        passed,
        format!(
            "unit (1,1) error {merged:.4}; split2 heuristic {:.6} exact {:.6} single line {single:.6}; \
             (1,0) edges on even rows {even_first}, (0,1) edges on odd rows {odd_second}, misplaced {misplaced}",
            heur.value, exact.value
        ),
    )
}

fn flat_dipole() -> Outcome {
    let w = Cube::axis(12.0, &[0.0, 0.0]).expect("cube");
    let g = Arc::new(build_lattice(&w, Spacing::new(1).expect("spacing"), 1).expect("lattice"));
    let mut values = Vec::new();
    for dist in [1, 5] {
        let mut s = ZeroChain::zero(g.clone(), 1);
        s.add_to_node(g.node_id(&[dist, 0]).expect("node"), &[1], 1);
        s.add_to_node(g.node_id(&[0, 0]).expect("node"), &[1], -1);
        values.push(flat_norm_zero(&s, &w).expect("flat norm").value);
    }
    outcome(
        values == [1.0, 2.0],
        format!("distance 1: {}, distance 5: {}", values[0], values[1]),
    )
}

fn structure_bound() -> Outcome {
    let s = structure_suite(2, 100, SEED).expect("structure suite");
    outcome(s.passed, s.detail)
}

fn discrete_coarea() -> Outcome {
    let s = coarea_suite(100, SEED).expect("coarea suite");
    outcome(s.passed, s.detail)
}

fn translation_uniformity() -> Outcome {
    let d = density(DensityKind::Checker { a: 3.0 }, 1);
    let offsets: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0],
        vec![0.5, 0.0],
        vec![0.0, 0.5],
        vec![0.25, 0.25],
        vec![0.5, 0.5],
    ];
    let rep = translation_uniformity_check(&[1], &[1.0, 0.0], &d, 8.0, h_half(), 2, None, &offsets)
        .expect("uniformity check");
    outcome(
        rep.passed,
        format!(
            "spread {:.4} (bound {:.4}), values {:.4?}",
            rep.spread, rep.bound, rep.values
        ),
    )
}

fn continuity(tables: &Tables) -> Outcome {
    let (d, t) = &tables.aniso;
    let rep = continuity_check(&[1], &direction_grid(2), t, d);
    outcome(
        rep.passed,
        format!(
            "{} pairs, max Lipschitz ratio {:.4} (bound {:.4}), {} missing",
            rep.pairs,
            rep.max_ratio,
            rep.bound,
            rep.missing.len()
        ),
    )
}

fn recovery() -> Outcome {
    let d = density(DensityKind::Checker { a: 3.0 }, 1);
    let t = table(
        &d,
        vec![vec![1]],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        &[8.0, 16.0, 32.0, 64.0],
        4,
    );
    let target = Target::square_loop([0.0, 0.0], 4.0, &[1]);
    let fh = f_hom(&target, &t, &d).expect("f_hom").value;
    let steps = recovery_sequence(&target, &d, &[0.25, 0.125, 0.0625], &t).expect("recovery");
    let errors: Vec<f64> = steps.iter().map(|s| (s.energy - fh).abs() / fh).collect();
    let flats: Vec<f64> = steps.iter().map(|s| s.flat_distance).collect();
    let monotone = flats.windows(2).all(|w| w[1] < w[0]);
    let closed = steps.iter().all(|s| s.chain.is_closed());
    outcome(
        errors[2] <= RECOVERY_TOL && monotone && closed,
        format!("f_hom {fh:.4}; relative errors {errors:.4?}; flat distances {flats:.4?}"),
    )
}

fn patch_smallness() -> Outcome {
    let delta0 = 2.0;
    let cube = Cube::axis(8.0, &[0.0, 0.0]).expect("cube");
    let mut lines = Vec::new();
    let mut passed = true;
    let mut last = f64::INFINITY;
    for k in [2u32, 4, 8, 16] {
        let g =
            Arc::new(build_lattice(&cube, Spacing::new(k).expect("spacing"), 1).expect("lattice"));
        let clamp = staircase_line(&[1], &[1.0, 0.0], &cube, &g).expect("clamp");
        // clamp pushed up by one lattice row over x in [-3.5, 0]
        let cells: Vec<([i64; 2], Vec<i64>)> =
            (-7 * k as i64 / 2..0).map(|i| ([i, 0], vec![1])).collect();
        let c: Chain = clamp.sub(&filling_boundary(&g, &cells).expect("filling"));
        let flat = flat_distance(&c, &clamp, &cube).expect("flat distance");
        let p = boundary_patch(&c, &clamp, &cube, delta0, f64::INFINITY).expect("patch");
        let h = 1.0 / k as f64;
        passed &= p.patch_mass <= 4.0 / delta0 * flat + 2.0 * h + 1e-12 && p.patch_mass < last;
        last = p.patch_mass;
        lines.push(format!("h={h}: flat {flat:.4}, patch {:.4}", p.patch_mass));
    }
    outcome(passed, lines.join("; "))
}

fn determinism() -> Outcome {
    let d = density(DensityKind::Checker { a: 3.0 }, 1);
    let ts = direction_grid(2);
    let one = table(&d, vec![vec![1], vec![2]], ts.clone(), &[4.0, 8.0, 16.0], 1).to_text();
    let eight = table(&d, vec![vec![1], vec![2]], ts, &[4.0, 8.0, 16.0], 8).to_text();
    outcome(
        one == eight,
        format!("{} bytes, identical: {}", one.len(), one == eight),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut unit = Vec::new();
    results.push(("1 unit density exactness", unit_exactness(&mut unit)));
    let aniso_d = density(DensityKind::Aniso { kappa: 1.0 }, 1);
    let aniso_t = table(
        &aniso_d,
        vec![vec![1]],
        direction_grid(2),
        &[4.0, 8.0, 16.0],
        4,
    );
    let checker_d = density(DensityKind::Checker { a: 3.0 }, 1);
    let checker_t = table(
        &checker_d,
        vec![vec![1]],
        direction_grid(2),
        &[4.0, 8.0, 16.0],
        4,
    );
    let tables = Tables {
        unit,
        aniso: (aniso_d, aniso_t),
        checker: (checker_d, checker_t),
    };
    results.push(("2 growth sandwich", growth_sandwich(&tables)));
    results.push(("3 oracle equivalence", oracle_equivalence()));
    results.push(("4 vector recombination", vector_recombination(&tables)));
    results.push(("5 flat-norm dipole", flat_dipole()));
    results.push(("6 structure bound", structure_bound()));
    results.push(("7 discrete coarea", discrete_coarea()));
    results.push(("8 translation uniformity", translation_uniformity()));
    results.push(("9 continuity", continuity(&tables)));
    results.push(("10 recovery tiling", recovery()));
    results.push(("11 boundary patch smallness", patch_smallness()));
    results.push(("12 determinism", determinism()));

    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "{} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
