use std::sync::Arc;

use homogcur::chains::{Chain, MassNorm};
use homogcur::energy::{DensityKind, EnergyDensity};
use homogcur::flat::{filling_boundary, flat_distance};
use homogcur::geometry::{build_lattice, direction_grid, staircase_line, Cube, Spacing};
use homogcur::homogenize::{
    boundary_patch, build_table, continuity_check, f_hom, psi_hom_at, psi_hom_estimate,
    subadditivity_check, translation_uniformity_check, FitFlag, Segment, TableSpec, Target,
};
use homogcur::Error;

fn checker(a: f64) -> EnergyDensity {
    EnergyDensity::new(DensityKind::Checker { a }, 1, 2).unwrap()
}

fn h_half() -> Spacing {
    Spacing::new(2).unwrap()
}

#[test]
fn unit_density_gives_the_euclidean_norm() {
    let s = 0.5f64.sqrt();
    for (b, t, tol) in [
        (vec![1], vec![1.0, 0.0], 1e-9),
        (vec![2], vec![1.0, 0.0], 1e-9),
        (vec![1, 1], vec![s, s], 0.02),
    ] {
        let d = EnergyDensity::unit(b.len(), 2);
        let e = psi_hom_estimate(&b, &t, &d, &[4.0, 8.0, 16.0], h_half(), 2, None).unwrap();
        let nb = (b.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt();
        assert!(
            (e.fit.psi_hom - nb).abs() <= tol * nb,
            "{b:?} {t:?}: {}",
            e.fit.psi_hom
        );
        assert_eq!(e.fit.flag, FitFlag::Ok);
    }
}

#[test]
fn checker_cell_values_follow_the_inverse_size_law() {
    let e = psi_hom_estimate(
        &[1],
        &[1.0, 0.0],
        &checker(3.0),
        &[4.0, 8.0, 16.0],
        h_half(),
        2,
        None,
    )
    .unwrap();
    // exactly linear in 1/T; the zig-zag through cheap cells costs
    // (1 + √2)/2 per unit length in the limit
    assert!(e.fit.residual < 1e-9, "residual {}", e.fit.residual);
    assert!((e.fit.psi_hom - (1.0 + 2f64.sqrt()) / 2.0).abs() < 1e-9);
}

#[test]
fn uniformity_on_lattice_translations_and_offsets() {
    let d = checker(3.0);
    let translations: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0],
        vec![2.0, 0.0],
        vec![1.0, 1.0],
        vec![-3.0, 5.0],
    ];
    let rep =
        translation_uniformity_check(&[1], &[1.0, 0.0], &d, 8.0, h_half(), 2, None, &translations)
            .unwrap();
    assert!(rep.spread < 1e-9, "{:?}", rep.values);

    let offsets: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0],
        vec![0.5, 0.0],
        vec![0.0, 0.5],
        vec![0.25, 0.25],
        vec![0.5, 0.5],
    ];
    let rep = translation_uniformity_check(&[1], &[1.0, 0.0], &d, 8.0, h_half(), 2, None, &offsets)
        .unwrap();
    assert!(rep.passed, "spread {} bound {}", rep.spread, rep.bound);
}

#[test]
fn unit_table_is_isotropic_and_consistent() {
    let d = EnergyDensity::unit(1, 2);
    let spec = TableSpec {
        density: d.clone(),
        spacing: h_half(),
        r: 2,
        theta_max: None,
        bs: vec![vec![1]],
        ts: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        sides: vec![4.0, 8.0, 16.0],
        exact: false,
    };
    let table = build_table(&spec, 2).unwrap();
    assert!(table.sandwich_violations(&d).is_empty());
    assert!(subadditivity_check(&table, &d).is_empty());
    let rep = continuity_check(&[1], &spec.ts, &table, &d);
    assert!(rep.passed);
    assert!(rep.max_ratio < 1e-9);
    assert_eq!(rep.pairs, 1);

    // a lone direction makes the check vacuous; missing directions fail it
    let lone = continuity_check(&[1], &spec.ts[..1], &table, &d);
    assert!(lone.passed && lone.pairs == 0);
    let grid = continuity_check(&[1], &direction_grid(2), &table, &d);
    assert!(!grid.passed && !grid.missing.is_empty());
}

#[test]
fn f_hom_looks_up_interpolates_and_refuses() {
    let d = EnergyDensity::unit(1, 2);
    let spec = TableSpec {
        density: d.clone(),
        spacing: h_half(),
        r: 2,
        theta_max: None,
        bs: vec![vec![1]],
        ts: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        sides: vec![4.0, 8.0, 16.0],
        exact: false,
    };
    let table = build_table(&spec, 1).unwrap();
    let square = Target::square_loop([0.0, 0.0], 2.0, &[1]);
    let v = f_hom(&square, &table, &d).unwrap();
    assert!((v.value - 8.0).abs() < 1e-9);
    assert_eq!(v.error_bound, 0.0);

    // (-b, -t) and (b, -t) reuse the tabulated entries
    let (psi, err) = psi_hom_at(&table, &d, &[-1], &[-1.0, 0.0]).unwrap();
    assert!((psi - 1.0).abs() < 1e-9 && err == 0.0);

    // π/16 off the axis: bridged, with a positive error bound
    let a = std::f64::consts::PI / 16.0;
    let (psi, err) = psi_hom_at(&table, &d, &[1], &[a.cos(), a.sin()]).unwrap();
    assert!((psi - 1.0).abs() < 1e-9);
    assert!(err > 0.0);

    let diag = 0.5f64.sqrt();
    assert!(matches!(
        psi_hom_at(&table, &d, &[1], &[diag, diag]),
        Err(Error::MissingEntry { .. })
    ));
    assert!(matches!(
        psi_hom_at(&table, &d, &[2], &[1.0, 0.0]),
        Err(Error::MissingEntry { .. })
    ));
}

#[test]
fn open_targets_are_rejected() {
    let seg = Segment {
        start: vec![0.0, 0.0],
        end: vec![1.0, 0.0],
        b: vec![1],
    };
    assert!(matches!(
        Target::new(vec![seg.clone()]),
        Err(Error::NotClosed { .. })
    ));
    let back = Segment {
        start: vec![1.0, 0.0],
        end: vec![0.0, 0.0],
        b: vec![1],
    };
    assert!(Target::new(vec![seg, back]).is_ok());
    assert!(Target::square_loop([0.0, 0.0], 1.0, &[2])
        .validate()
        .is_ok());
}

/// Clamp along the x axis in an 8 x 8 cube with lattice spacing 1/k and a
/// detour one cell high over lattice columns `from..to`.
fn detoured(k: u32, from: i64, to: i64) -> (Cube, Chain, Chain) {
    let cube = Cube::axis(8.0, &[0.0, 0.0]).unwrap();
    let g = Arc::new(build_lattice(&cube, Spacing::new(k).unwrap(), 1).unwrap());
    let clamp = staircase_line(&[1], &[1.0, 0.0], &cube, &g).unwrap();
    let cells: Vec<([i64; 2], Vec<i64>)> = (from..to).map(|i| ([i, 0], vec![1])).collect();
    let c = if cells.is_empty() {
        clamp.clone()
    } else {
        clamp.sub(&filling_boundary(&g, &cells).unwrap())
    };
    (cube, c, clamp)
}

#[test]
fn patch_of_the_clamp_is_empty() {
    let (cube, c, clamp) = detoured(2, 0, 0);
    let p = boundary_patch(&c, &clamp, &cube, 2.0, 1.0).unwrap();
    assert_eq!(p.patch_mass, 0.0);
    assert_eq!(p.crossing_mass, 0.0);
    assert_eq!(p.patched, clamp);
    // smallest lattice-resolved depth above δ0/2 = 1
    assert!((p.delta - 1.25).abs() < 1e-12, "delta {}", p.delta);
}

#[test]
fn detour_across_the_shell_is_closed_by_one_rung() {
    // detour over x in [-3.5, 0]: it crosses every depth in (1, 2)
    let (cube, c, clamp) = detoured(2, -7, 0);
    let p = boundary_patch(&c, &clamp, &cube, 2.0, 10.0).unwrap();
    assert_eq!(p.crossing_mass, 2.0);
    assert!((p.patch_mass - 0.5).abs() < 1e-12);
    let inner = cube.with_side(7.0).unwrap();
    assert!(p.patched.is_divergence_free(&inner));
    // the patched chain agrees with the clamp in the shell
    let shell_diff = p.patched.sub(&clamp).filter(|e| {
        let g = clamp.graph();
        let edge = g.edge(e);
        cube.depth(&g.position(edge.u)) <= p.delta || cube.depth(&g.position(edge.v)) <= p.delta
    });
    assert!(shell_diff.is_zero());
    assert!(!p.flagged);
}

#[test]
fn patch_mass_vanishes_with_the_flat_distance() {
    let delta0 = 2.0;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for k in [2u32, 4, 8, 16] {
        let ki = k as i64;
        let (cube, c, clamp) = detoured(k, -7 * ki / 2, 0);
        let p = boundary_patch(&c, &clamp, &cube, delta0, f64::INFINITY).unwrap();
        let flat = flat_distance(&c, &clamp, &cube).unwrap();
        let h = 1.0 / k as f64;
        assert!(
            p.patch_mass <= 4.0 / delta0 * flat + 2.0 * h + 1e-12,
            "k {k}"
        );
        assert!(p.patch_mass < last.0 && flat < last.1, "k {k}");
        last = (p.patch_mass, flat);
        assert!(p.patched.mass(MassNorm::Euclid, None) > 0.0);
    }
    assert!(last.0 <= 1.0 / 16.0 + 1e-12);
}
