use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use smash::bench::eps_rank;
use smash::cluster::BoundingBox;
use smash::lowrank::{compr, srrqr, taylor_bases, Rank, TaylorExpansion};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

/// `rows × cols` matrix of rank at most `k` with entries of mixed scale.
fn low_rank(rows: usize, cols: usize, k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (matrix(rows, k), matrix(k, cols), prop::collection::vec(-3i32..3, k)).prop_map(|(a, b, scale)| {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            scale.len(),
            scale.iter().map(|&e| 10f64.powi(e)),
        ));
        a * d * b
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn srrqr_coefficients_stay_below_two(m in matrix(20, 12), k in 1usize..=12) {
        let f = srrqr(&m, Rank::Fixed(k), 2.0).unwrap();
        let c = f.coefficients();
        prop_assert!(c.amax() <= 2.0 * (1.0 + 1e-10), "max coefficient {}", c.amax());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn srrqr_tolerance_finds_low_rank((m, k) in (1usize..=8).prop_flat_map(|k| (low_rank(20, 12, k), Just(k)))) {
        let f = srrqr(&m, Rank::Tolerance(1e-10), 2.0).unwrap();
        prop_assert!(f.rank <= k);
        prop_assert!(f.coefficients().amax() <= 2.0 * (1.0 + 1e-10));
    }

    #[test]
    fn compr_reconstructs_low_rank_rows(
        (m, k) in (1usize..=10).prop_flat_map(|k| (low_rank(30, 16, k), Just(k))),
        offset in 0usize..1000,
    ) {
        let index: Vec<usize> = (offset..offset + m.nrows()).collect();
        let id = compr(&m, &index, 2.0, Rank::Tolerance(1e-13)).unwrap();
        prop_assert!(id.rank() <= k);
        prop_assert!(id.max_coefficient() <= 2.0 * (1.0 + 1e-10));
        let skel = DMatrix::from_fn(id.rank(), m.ncols(), |i, j| m[(id.skeleton[i], j)]);
        let err = (id.to_dense() * skel - &m).norm() / m.norm();
        prop_assert!(err <= 1e-10, "reconstruction error {err:e}");
        let expected: Vec<usize> = id.skeleton.iter().map(|&p| index[p]).collect();
        prop_assert_eq!(id.skeleton_indices(), expected);
    }

    #[test]
    fn eps_rank_is_monotone(m in matrix(15, 10), e1 in -12.0f64..-1.0, e2 in -12.0f64..-1.0) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let r_lo = eps_rank(&m, 10f64.powf(lo)).unwrap();
        let r_hi = eps_rank(&m, 10f64.powf(hi)).unwrap();
        prop_assert!(r_lo >= r_hi);
        prop_assert!(r_lo <= 10);
    }
}

fn square(center: Complex64, half: f64) -> BoundingBox {
    BoundingBox::new(vec![center.re - half, center.im - half], vec![center.re + half, center.im + half])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Entrywise relative error of the truncated expansion between two
    /// `τ`-separated squares never exceeds `(1+τ)τ^r/(1-τ)`.
    #[test]
    fn taylor_truncation_obeys_bound(
        ha in 0.05f64..2.0,
        hb in 0.05f64..2.0,
        ratio in 0.2f64..0.6,
        angle in 0.0f64..std::f64::consts::TAU,
        shift in (-5.0f64..5.0, -5.0f64..5.0),
        xs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
        ys in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
    ) {
        let tau = 0.6;
        let a = Complex64::new(shift.0, shift.1);
        let (da, db) = (ha * std::f64::consts::SQRT_2, hb * std::f64::consts::SQRT_2);
        let b = a + Complex64::from_polar((da + db) / ratio, angle);
        let (ci, cj) = (square(a, ha), square(b, hb));
        let x: Vec<Complex64> = xs.iter().map(|&(u, v)| a + Complex64::new(u * ha, v * ha)).collect();
        let y: Vec<Complex64> = ys.iter().map(|&(u, v)| b + Complex64::new(u * hb, v * hb)).collect();
        for r in [5, 10, 20] {
            let (u, c, v) = taylor_bases(&ci, &cj, &x, &y, r, tau).unwrap();
            let approx = &u * &c * v.transpose();
            let bound = TaylorExpansion::error_bound(tau, r);
            for (p, &xp) in x.iter().enumerate() {
                for (q, &yq) in y.iter().enumerate() {
                    let exact = 1.0 / (xp - yq);
                    let err = (approx[(p, q)] - exact).norm() / exact.norm();
                    prop_assert!(err <= bound * (1.0 + 1e-8) + 1e-14, "r {r}: {err:e} > {bound:e}");
                }
            }
        }
    }
}
