//! Time the nodewise and levelwise products against a dense product.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use smash::kernel::{cauchy_points, CauchyMatrix, Curve, Geometry};
use smash::{matvec_dense, matvec_levelwise, matvec_nodewise, relative_error, HssMatrix, HssParams, SharedKernel};

fn main() -> smash::Result<()> {
    for n in [1000, 2000, 4000, 8000] {
        let (x, y) = cauchy_points(Geometry::Curve(Curve::Interval), n, 1)?;
        let kernel: SharedKernel = Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0))?);
        let mut h = HssMatrix::from_kernel(kernel.clone(), &HssParams::default())?;
        h.materialize();
        let q: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();

        let t = Instant::now();
        let z1 = matvec_nodewise(&h, &q)?;
        let t1 = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let z2 = matvec_levelwise(&h, &q)?;
        let t2 = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let z = matvec_dense(kernel.as_ref(), &q)?;
        let t3 = t.elapsed().as_secs_f64();

        println!(
            "n {n:5}  nodewise {t1:.4}s  levelwise {t2:.4}s  dense {t3:.4}s  err {:.2e}  agree {:.1e}",
            relative_error(&z1, &z),
            relative_error(&z1, &z2)
        );
    }
    Ok(())
}
