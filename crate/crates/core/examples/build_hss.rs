//! Compress a Cauchy matrix on random interval points into HSS form and
//! compare it with the dense matrix.
//!
//!     cargo run --release --example build_hss -- 2000

use std::sync::Arc;

use num_complex::Complex64;
use smash::kernel::{assemble_dense, cauchy_points, CauchyMatrix, Geometry};
use smash::{error_bound, BoundInputs, HssMatrix, HssParams, SharedKernel, Structure};

fn main() -> smash::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let (x, y) = cauchy_points(Geometry::Curve(smash::kernel::Curve::Interval), n, 7)?;
    let kernel: SharedKernel = Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0))?);

    let h = HssMatrix::from_kernel(kernel.clone(), &HssParams::default())?;
    println!("levels {}  max rank {}", h.tree().num_levels(), h.max_rank());
    for l in 2..=h.tree().num_levels() {
        println!("  level {l:2}: rank {}", h.max_rank_on_level(l));
    }

    let a = assemble_dense(kernel.as_ref(), usize::MAX)?;
    let err = (&a - h.to_dense(usize::MAX)?).norm() / a.norm();
    let bound = error_bound(&BoundInputs::for_hss(&h), Structure::Hss);
    println!("relative Frobenius error {err:.3e}");
    println!("a priori bound {:.3e} (level resolved {:.3e})", bound.uniform_rank, bound.level_resolved);
    Ok(())
}
