//! Direct solution of a complex Cauchy system on the honeybee curve.

use std::sync::Arc;

use num_complex::Complex64;
use smash::kernel::{cauchy_points, CauchyMatrix, Curve, Geometry};
use smash::{matvec_dense, matvec_nodewise, relative_error, ulv_factor, HssMatrix, HssParams, SharedKernel};

fn main() -> smash::Result<()> {
    let n = 1600;
    let (x, y) = cauchy_points(Geometry::Curve(Curve::Honeybee), n, 3)?;
    let kernel: SharedKernel = Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0))?);
    let h = HssMatrix::from_kernel(kernel.clone(), &HssParams::default())?;
    let f = ulv_factor(&h)?;

    // complex unknowns are stored as interleaved real pairs
    let u: Vec<f64> = (0..h.ncols()).map(|i| 1.0 + (i % 7) as f64).collect();
    let b = matvec_dense(kernel.as_ref(), &u)?;
    let sol = f.solve(&b)?;
    println!("rank {}  residual {:.2e}", h.max_rank(), relative_error(&matvec_nodewise(&h, &sol)?, &b));
    println!("forward error {:.2e}", relative_error(&sol, &u));
    Ok(())
}
