//! H² compression of the Cauchy kernel on a uniform 2D grid.
//!
//!     cargo run --release --example build_h2 -- 40

use std::sync::Arc;

use smash::apply::{matvec_dense, matvec_nodewise, relative_error};
use smash::bench::grid_cauchy;
use smash::{H2Matrix, H2Params, SharedKernel};

fn main() -> smash::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    let kernel: SharedKernel = Arc::new(grid_cauchy(m, 1.0)?);
    let h = H2Matrix::from_kernel(kernel.clone(), &H2Params::default())?;
    println!(
        "{} points, {} levels, {} admissible and {} nearfield blocks, max rank {}",
        m * m,
        h.tree().num_levels(),
        h.couplings().len(),
        h.nearfield().len(),
        h.max_rank()
    );

    let q: Vec<f64> = (0..h.ncols()).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
    let err = relative_error(&matvec_nodewise(&h, &q)?, &matvec_dense(kernel.as_ref(), &q)?);
    println!("matvec relative error {err:.3e}");
    Ok(())
}
