use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smash::bench::{cauchy_like_hss, choose_params, error_bound, grid_cauchy, BoundInputs};
use smash::cluster::{leaf_sets, Branching, ClusterTree, Structure};
use smash::io::{decode_matrix, encode_matrix, StoredMatrix};
use smash::cluster::{PointSet, Role};
use smash::kernel::{assemble_dense, cauchy_points, random_generators, CauchyMatrix, Curve, Geometry};
use smash::{
    diag_scale, hss_add, matvec_dense, matvec_levelwise, matvec_nodewise, H2Matrix, H2Params, HssMatrix, HssParams, SharedKernel,
};

fn cauchy(curve: Curve, n: usize, seed: u64) -> SharedKernel {
    let (x, y) = cauchy_points(Geometry::Curve(curve), n, seed).unwrap();
    Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0)).unwrap())
}

fn curve() -> impl Strategy<Value = Curve> {
    prop_oneof![Just(Curve::Interval), Just(Curve::Circle), Just(Curve::Snail), Just(Curve::Honeybee)]
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hss_error_within_bounds(
        c in curve(),
        n in 100usize..=1024,
        eps in prop_oneof![Just(1e-4), Just(1e-6), Just(1e-10)],
        cap in 16usize..=50,
        seed in 0u64..1000,
    ) {
        let kernel = cauchy(c, n, seed);
        let params = choose_params(eps, 1).unwrap().hss_params(cap);
        let h = HssMatrix::from_kernel(kernel.clone(), &params).unwrap();
        let a = assemble_dense(kernel.as_ref(), usize::MAX).unwrap();
        let err = rel(&h.to_dense(usize::MAX).unwrap(), &a);
        let bound = error_bound(&BoundInputs::for_hss(&h), Structure::Hss);
        prop_assert!(err <= bound.level_resolved, "{err:e} > {:e}", bound.level_resolved);
        prop_assert!(bound.level_resolved <= bound.uniform_rank);
        prop_assert!(h.max_coefficient() <= params.s * (1.0 + 1e-10));
    }

    #[test]
    fn h2_error_within_bounds(m in 10usize..=32, eps in prop_oneof![Just(1e-4), Just(1e-8)], cap in 10usize..=40) {
        let kernel: SharedKernel = Arc::new(grid_cauchy(m, 1.0).unwrap());
        let params = choose_params(eps, 2).unwrap().h2_params(cap);
        let h = H2Matrix::from_kernel(kernel.clone(), &params).unwrap();
        let a = assemble_dense(kernel.as_ref(), usize::MAX).unwrap();
        let err = rel(&h.to_dense(usize::MAX).unwrap(), &a);
        let bound = error_bound(&BoundInputs::for_h2(&h), Structure::H2);
        prop_assert!(err <= bound.level_resolved, "{err:e} > {:e}", bound.level_resolved);
        prop_assert!(bound.level_resolved <= bound.uniform_rank);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Equispaced points with `leaf · 2^k` entries give perfect binary trees.
    #[test]
    fn levelwise_and_nodewise_agree(
        leaf in 8usize..=50,
        k in 1u32..=5,
        q in prop::collection::vec(-1.0f64..1.0, 1600),
    ) {
        let n = leaf << k;
        prop_assume!(n <= 1600);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let p = PointSet::from_1d(&xs, Role::Target).unwrap();
        let kernel: SharedKernel = Arc::new(CauchyMatrix::new(&p, &p, Complex64::new(1.0, 0.0)).unwrap());
        let h = HssMatrix::from_kernel(kernel, &HssParams { leaf_capacity: leaf, ..Default::default() }).unwrap();
        prop_assert!(h.tree().is_perfect());
        let a = matvec_nodewise(&h, &q[..n]).unwrap();
        let b = matvec_levelwise(&h, &q[..n]).unwrap();
        prop_assert!(rel_vec(&a, &b) <= 1e-14, "{:e}", rel_vec(&a, &b));
    }

    #[test]
    fn levelwise_and_nodewise_agree_on_grids(m in prop_oneof![Just(8usize), Just(16), Just(32)], cap in 8usize..=40) {
        let kernel: SharedKernel = Arc::new(grid_cauchy(m, 1.0).unwrap());
        let h = H2Matrix::from_kernel(kernel, &H2Params { leaf_capacity: cap, ..Default::default() }).unwrap();
        prop_assume!(h.tree().is_perfect());
        let q: Vec<f64> = (0..h.ncols()).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
        let a = matvec_nodewise(&h, &q).unwrap();
        let b = matvec_levelwise(&h, &q).unwrap();
        prop_assert!(rel_vec(&a, &b) <= 1e-14, "{:e}", rel_vec(&a, &b));
    }

    #[test]
    fn matvec_is_linear(
        n in 50usize..=600,
        q1 in prop::collection::vec(-1.0f64..1.0, 1200),
        q2 in prop::collection::vec(-1.0f64..1.0, 1200),
        alpha in -3.0f64..3.0,
    ) {
        let kernel = cauchy(Curve::Circle, n, 1);
        let h = HssMatrix::from_kernel(kernel, &HssParams::default()).unwrap();
        let m = h.ncols();
        let combo: Vec<f64> = (0..m).map(|i| alpha * q1[i] + q2[i]).collect();
        let lhs = matvec_nodewise(&h, &combo).unwrap();
        let z1 = matvec_nodewise(&h, &q1[..m]).unwrap();
        let z2 = matvec_nodewise(&h, &q2[..m]).unwrap();
        let rhs: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| alpha * a + b).collect();
        prop_assert!(rel_vec(&lhs, &rhs) <= 1e-13);
    }

    #[test]
    fn leaf_sets_tile_the_matrix(
        c in curve(),
        n in 20usize..=400,
        cap in 4usize..=40,
        tau in 0.3f64..0.7,
        full in any::<bool>(),
    ) {
        let kernel = cauchy(c, n, 3);
        let branching = if full { Branching::Full } else { Branching::Alternating };
        let tree = ClusterTree::build(kernel.row_points(), kernel.col_points(), cap, branching).unwrap();
        let mut seen_rows = tree.row_perm().to_vec();
        seen_rows.sort_unstable();
        prop_assert_eq!(seen_rows, (0..tree.num_rows()).collect::<Vec<_>>());
        let structures: &[Structure] = if full { &[Structure::H2] } else { &[Structure::Hss, Structure::H2] };
        for &s in structures {
            let sets = leaf_sets(&tree, tau, s).unwrap();
            let mut count = vec![0u8; tree.num_rows() * tree.num_cols()];
            for &(i, j) in sets.admissible.iter().chain(&sets.inadmissible) {
                for r in tree.node(i).rows.clone() {
                    for c in tree.node(j).cols.clone() {
                        count[r * tree.num_cols() + c] += 1;
                    }
                }
            }
            prop_assert!(count.iter().all(|&k| k == 1));
        }
    }

    #[test]
    fn container_round_trip_is_exact(c in curve(), n in 30usize..=500, seed in 0u64..100, h2 in any::<bool>()) {
        let kernel = cauchy(c, n, seed);
        let stored = if h2 {
            StoredMatrix::H2(H2Matrix::from_kernel(kernel.clone(), &Default::default()).unwrap())
        } else {
            StoredMatrix::Hss(HssMatrix::from_kernel(kernel.clone(), &HssParams::default()).unwrap())
        };
        let back = decode_matrix(&encode_matrix(&stored), &[kernel]).unwrap();
        prop_assert_eq!(matches!(back, StoredMatrix::H2(_)), h2);
        prop_assert_eq!(
            back.as_hier().to_dense(usize::MAX).unwrap(),
            stored.as_hier().to_dense(usize::MAX).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sums_and_scalings_match_dense(
        c in curve(),
        seed in 0u64..1000,
        dl in prop::collection::vec(-2.0f64..2.0, 512),
        dr in prop::collection::vec(-2.0f64..2.0, 512),
    ) {
        let h = HssMatrix::from_kernel(cauchy(c, 256, seed), &HssParams::default()).unwrap();
        let a = h.to_dense(usize::MAX).unwrap();
        let m = h.nrows();
        let (dl, dr) = (&dl[..m], &dr[..m]);

        let scaled = diag_scale(&h, dl, dr).unwrap();
        let expect = DMatrix::from_fn(m, m, |i, j| dl[i] * a[(i, j)] * dr[j]);
        prop_assert!(rel(&scaled.to_dense(usize::MAX).unwrap(), &expect) <= 1e-10);

        let sum = hss_add(&h, &scaled).unwrap();
        prop_assert!(rel(&sum.to_dense(usize::MAX).unwrap(), &(&a + &expect)) <= 1e-10);
    }

    #[test]
    fn cauchy_like_sum_matches_weighted_kernel(c in curve(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = cauchy_points(Geometry::Curve(c), 256, seed).unwrap();
        let w = random_generators(x.len(), 2, &mut rng);
        let v = random_generators(y.len(), 2, &mut rng);
        let exact = CauchyMatrix::cauchy_like(&x, &y, w.clone(), v.clone()).unwrap();
        let base: SharedKernel = Arc::new(exact.without_weights());
        let plain = HssMatrix::from_kernel(base, &HssParams::default()).unwrap();
        let h = cauchy_like_hss(&plain, &w, &v).unwrap();
        let q: Vec<f64> = (0..h.ncols()).map(|_| rng.random::<f64>() - 0.5).collect();
        let err = rel_vec(&matvec_nodewise(&h, &q).unwrap(), &matvec_dense(&exact, &q).unwrap());
        prop_assert!(err <= 1e-8, "{err:e}");
    }
}
