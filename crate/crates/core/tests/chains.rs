use std::sync::Arc;

use homogcur::chains::{Chain, LevelFn, MassNorm};
use homogcur::geometry::{build_lattice, Cube, LatticeGraph, Spacing};
use homogcur::sample::{random_chain, random_closed_chain};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(side: f64, k: u32, r: u32) -> Arc<LatticeGraph> {
    let w = Cube::axis(side, &[0.0, 0.0]).unwrap();
    Arc::new(build_lattice(&w, Spacing::new(k).unwrap(), r).unwrap())
}

fn node(g: &LatticeGraph, i: i64, j: i64) -> usize {
    g.node_id(&[i, j]).unwrap()
}

/// Chain along consecutive lattice points.
fn path(g: &Arc<LatticeGraph>, pts: &[[i64; 2]], theta: &[i64]) -> Chain {
    let mut c = Chain::zero(g.clone(), theta.len());
    for w in pts.windows(2) {
        let (e, s) = g
            .find_edge(node(g, w[0][0], w[0][1]), node(g, w[1][0], w[1][1]))
            .unwrap();
        let t: Vec<i64> = theta.iter().map(|x| x * s).collect();
        c.add_to_edge(e, &t);
    }
    c
}

fn unit_square(g: &Arc<LatticeGraph>, x: i64, y: i64, theta: &[i64]) -> Chain {
    path(
        g,
        &[[x, y], [x + 1, y], [x + 1, y + 1], [x, y + 1], [x, y]],
        theta,
    )
}

#[test]
fn square_loop_has_no_boundary() {
    let g = grid(4.0, 1, 1);
    assert!(unit_square(&g, 0, 0, &[1]).boundary().is_zero());
}

#[test]
fn single_edge_boundary() {
    let g = grid(4.0, 1, 1);
    let c = path(&g, &[[0, 0], [1, 0]], &[3]);
    let b = c.boundary();
    assert_eq!(b.get(node(&g, 1, 0)), Some(&[3][..]));
    assert_eq!(b.get(node(&g, 0, 0)), Some(&[-3][..]));
    assert_eq!(b.len(), 2);
}

#[test]
fn mass_examples() {
    let g = grid(8.0, 1, 1);
    let c = path(&g, &[[0, 0], [1, 0], [2, 0], [3, 0]], &[2]);
    assert_eq!(c.mass(MassNorm::Euclid, None), 6.0);
    assert_eq!(Chain::zero(g, 1).mass(MassNorm::Euclid, None), 0.0);
}

#[test]
fn mass_in_region_uses_edge_midpoints() {
    let g = grid(8.0, 1, 1);
    let c = path(&g, &[[0, 0], [1, 0], [2, 0], [3, 0]], &[1]);
    let q = Cube::axis(2.0, &[1.0, 0.0]).unwrap();
    // midpoints 0.5 and 1.5 inside, 2.5 outside
    assert_eq!(c.mass(MassNorm::One, Some(&q)), 2.0);
}

#[test]
fn divergence_free_examples() {
    let g = grid(6.0, 1, 1);
    let q = Cube::axis(4.0, &[0.0, 0.0]).unwrap();
    assert!(unit_square(&g, 0, 0, &[1]).is_divergence_free(&q));
    assert!(!path(&g, &[[0, 0], [1, 0]], &[1]).is_divergence_free(&q));
}

#[test]
fn loop_decompose_single_square() {
    let g = grid(4.0, 1, 1);
    let c = unit_square(&g, 0, 0, &[1, 1]);
    let loops = c.loop_decompose().unwrap();
    assert_eq!(loops.len(), 1);
    assert_eq!(loops[0].theta, vec![1, 1]);
    assert_eq!(loops[0].edges.len(), 4);
}

#[test]
fn loop_decompose_figure_eight() {
    let g = grid(6.0, 1, 1);
    let c = unit_square(&g, 0, 0, &[1]).add(&unit_square(&g, 1, 1, &[1]));
    let loops = c.loop_decompose().unwrap();
    assert_eq!(loops.len(), 2);
    let mut sum = Chain::zero(g.clone(), 1);
    for l in &loops {
        assert_eq!(l.edges.len(), 4);
        sum = sum.add(&l.to_chain(&g));
    }
    assert_eq!(sum, c);
}

#[test]
fn loop_decompose_rejects_open_chain() {
    let g = grid(4.0, 1, 1);
    assert!(path(&g, &[[0, 0], [1, 0]], &[1]).loop_decompose().is_err());
}

#[test]
fn push_forward_identity_and_translation() {
    let g = grid(8.0, 1, 1);
    let c = unit_square(&g, 0, 0, &[2]).add(&path(&g, &[[-1, -1], [-1, 0]], &[1]));
    assert_eq!(c.push_forward(&g, Some).unwrap(), c);
    let moved = c.translate(&g, &[1, 2]).unwrap();
    let expected = unit_square(&g, 1, 2, &[2]).add(&path(&g, &[[0, 1], [0, 2]], &[1]));
    assert_eq!(moved, expected);
    assert_eq!(
        moved.mass(MassNorm::Euclid, None),
        c.mass(MassNorm::Euclid, None)
    );
}

#[test]
fn push_forward_reflection_flips_orientation() {
    let g = grid(8.0, 1, 1);
    let c = path(&g, &[[0, 0], [1, 0]], &[1]);
    let gg = g.clone();
    let mirrored = c
        .push_forward(&g, |v| {
            let idx = gg.node_index(v);
            gg.node_id(&[-idx[0], idx[1]])
        })
        .unwrap();
    assert_eq!(mirrored, path(&g, &[[0, 0], [-1, 0]], &[1]));
}

#[test]
fn push_forward_rejects_non_injective_map() {
    let g = grid(4.0, 1, 1);
    let c = path(&g, &[[0, 0], [1, 0], [2, 0]], &[1]);
    let zero = node(&g, 0, 0);
    assert!(c.push_forward(&g, |_| Some(zero)).is_err());
}

#[test]
fn slice_of_horizontal_segment() {
    let g = grid(8.0, 1, 1);
    let c = path(&g, &[[0, 0], [1, 0], [2, 0]], &[1]);
    let p = c.slice(&LevelFn::Axis(0), 1.5);
    assert_eq!(p.points().len(), 1);
    assert_eq!(p.points()[0].0, vec![1.5, 0.0]);
    assert_eq!(p.points()[0].1, vec![1]);
    let back = c.neg().slice(&LevelFn::Axis(0), 1.5);
    assert_eq!(back.points()[0].1, vec![-1]);
}

#[test]
fn slice_of_closed_loop_cancels() {
    let g = grid(8.0, 1, 1);
    let c = path(
        &g,
        &[
            [0, 0],
            [1, 0],
            [2, 0],
            [2, 1],
            [2, 2],
            [1, 2],
            [0, 2],
            [0, 1],
            [0, 0],
        ],
        &[1],
    );
    let p = c.slice(&LevelFn::Axis(0), 0.5);
    assert_eq!(p.points().len(), 2);
    assert_eq!(p.total(), vec![0]);
}

#[test]
fn slice_by_cube_depth_counts_crossings() {
    let g = grid(8.0, 2, 1);
    let q = Cube::axis(4.0, &[0.0, 0.0]).unwrap();
    let pts: Vec<[i64; 2]> = (-6..=6).map(|i| [i, 0]).collect();
    let c = path(&g, &pts, &[1]);
    let p = c.slice(&LevelFn::CubeDepth(q), 0.25);
    assert_eq!(p.points().len(), 2);
    let mut xs: Vec<f64> = p.points().iter().map(|(x, _)| x[0]).collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    assert!((xs[0] + 1.75).abs() < 1e-9 && (xs[1] - 1.75).abs() < 1e-9);
    // depth rises into the cube, then falls
    let signs: Vec<i64> = p
        .points()
        .iter()
        .map(|(x, t)| if x[0] < 0.0 { t[0] } else { -t[0] })
        .collect();
    assert_eq!(signs, vec![1, 1]);
}

#[test]
fn text_round_trip() {
    let g = grid(4.0, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_chain(&g, 2, 20, 3, &mut rng);
    let back = Chain::from_text(g.clone(), &c.to_text()).unwrap();
    assert_eq!(back, c);
    let (g2, m) = LatticeGraph::from_text(&g.to_text(2)).unwrap();
    assert_eq!(m, 2);
    assert_eq!(&g2, g.as_ref());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn boundary_is_linear(seed in any::<u64>()) {
        let g = grid(4.0, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_chain(&g, 2, 15, 3, &mut rng);
        let b = random_chain(&g, 2, 15, 3, &mut rng);
        prop_assert_eq!(a.add(&b).boundary(), a.boundary().add(&b.boundary()));
    }

    #[test]
    fn mass_norms_are_equivalent(seed in any::<u64>(), m in 1usize..=3) {
        let g = grid(4.0, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_chain(&g, m, 25, 4, &mut rng);
        let e = c.mass(MassNorm::Euclid, None);
        let o = c.mass(MassNorm::One, None);
        prop_assert!(e <= o + 1e-12);
        prop_assert!(o <= (m as f64).sqrt() * e + 1e-9);
    }

    #[test]
    fn push_forward_commutes_with_boundary(seed in any::<u64>(), sym in 0usize..8, sx in -2i64..=2, sy in -2i64..=2) {
        let g = grid(4.0, 1, 2);
        let big = grid(16.0, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_chain(&g, 2, 15, 3, &mut rng);
        // lattice isometry: signed axis permutation followed by a shift
        let map = |idx: &[i64]| -> Vec<i64> {
            let (mut x, mut y) = (idx[0], idx[1]);
            if sym & 1 == 1 { std::mem::swap(&mut x, &mut y); }
            if sym & 2 == 2 { x = -x; }
            if sym & 4 == 4 { y = -y; }
            vec![x + sx, y + sy]
        };
        let (gs, bs) = (g.clone(), big.clone());
        let f = |v: usize| bs.node_id(&map(gs.node_index(v)));
        let pushed = c.push_forward(&big, f).unwrap();
        let lhs = pushed.boundary();
        let rhs = c.boundary().push_forward(&big, f).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert!((pushed.mass(MassNorm::Euclid, None) - c.mass(MassNorm::Euclid, None)).abs() < 1e-9);
    }

    #[test]
    fn loop_decomposition_reconstructs(seed in any::<u64>()) {
        let g = grid(4.0, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_closed_chain(&g, 2, 200, 3, &mut rng);
        let loops = c.loop_decompose().unwrap();
        let mut sum = Chain::zero(g.clone(), 2);
        let mut total = 0.0;
        for l in &loops {
            prop_assert!(l.to_chain(&g).is_closed());
            sum = sum.add(&l.to_chain(&g));
            total += MassNorm::Euclid.of(&l.theta) * l.length(&g);
        }
        prop_assert_eq!(sum, c.clone());
        prop_assert!(total <= 2f64.sqrt() * c.mass(MassNorm::Euclid, None) + 1e-9);
    }

    #[test]
    fn coarea_bound_for_affine_levels(seed in any::<u64>(), angle in 0.0f64..std::f64::consts::PI) {
        let g = grid(4.0, 2, 2);
        let h = g.h();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_chain(&g, 1, 25, 3, &mut rng);
        let f = LevelFn::Affine { grad: vec![angle.cos(), angle.sin()], offset: 1e-7 };
        let fine = h / 64.0;
        let mut integral = 0.0;
        let mut s = -6.0 + fine / 2.0;
        while s < 6.0 {
            integral += c.slice(&f, s).mass(MassNorm::Euclid) * fine;
            s += fine;
        }
        prop_assert!(integral <= f.lipschitz() * c.mass(MassNorm::Euclid, None) * (1.0 + 1e-6) + 2.0 * fine * 75.0);
    }
}
