//! Cauchy-like matrices `(W Vᵀ) ∘ C` assembled from a plain Cauchy HSS
//! matrix with diagonal scalings and HSS sums.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smash::bench::cauchy_like_hss;
use smash::kernel::{assemble_dense, cauchy_points, random_generators, CauchyMatrix, Curve, Geometry};
use smash::{ulv_factor, HssMatrix, HssParams, SharedKernel};

fn main() -> smash::Result<()> {
    let n = 1200;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (x, y) = cauchy_points(Geometry::Curve(Curve::Interval), n, 5)?;
    let w = random_generators(n, 2, &mut rng);
    let v = random_generators(n, 2, &mut rng);
    let exact = CauchyMatrix::cauchy_like(&x, &y, w.clone(), v.clone())?;

    let base: SharedKernel = Arc::new(exact.without_weights());
    let plain = HssMatrix::from_kernel(base, &HssParams::default())?;
    let h = cauchy_like_hss(&plain, &w, &v)?;

    let a = assemble_dense(&exact, usize::MAX)?;
    let err = (&a - h.to_dense(usize::MAX)?).norm() / a.norm();
    println!("plain rank {}  cauchy-like rank {}  error {err:.2e}", plain.max_rank(), h.max_rank());

    let b = vec![1.0; n];
    let sol = ulv_factor(&h)?.solve(&b)?;
    let r = &a * nalgebra::DVector::from_vec(sol) - nalgebra::DVector::from_vec(b);
    println!("solve residual {:.2e}", r.norm() / (n as f64).sqrt());
    Ok(())
}
