//! Save a compressed matrix to disk and load it back against the same kernel.

use std::sync::Arc;

use num_complex::Complex64;
use smash::io::{load_matrix, save_matrix, StoredMatrix};
use smash::kernel::{cauchy_points, CauchyMatrix, Curve, Geometry};
use smash::{matvec_nodewise, HssMatrix, HssParams, SharedKernel};

fn main() -> smash::Result<()> {
    let (x, y) = cauchy_points(Geometry::Curve(Curve::Snail), 800, 2)?;
    let kernel: SharedKernel = Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0))?);
    let h = HssMatrix::from_kernel(kernel.clone(), &HssParams::default())?;

    let path = std::env::temp_dir().join("snail.smsh");
    save_matrix(&path, &StoredMatrix::Hss(h.clone()))?;
    let bytes = std::fs::metadata(&path)?.len();
    let loaded = load_matrix(&path, &[kernel])?;

    let q = vec![1.0; h.ncols()];
    let same = matvec_nodewise(&h, &q)? == matvec_nodewise(loaded.as_hier(), &q)?;
    println!("{} bytes written to {}, identical product: {same}", bytes, path.display());
    std::fs::remove_file(path)?;
    Ok(())
}
