//! Memory of the compressed representation against explicit generators and
//! the dense matrix.

use std::sync::Arc;

use smash::bench::{choose_params, dirichlet_target, DIRICHLET_SOURCE};
use smash::kernel::{Curve, DirichletProblem};
use smash::{storage_report, HssMatrix, SharedKernel};

fn main() -> smash::Result<()> {
    const MB: f64 = 1024.0 * 1024.0;
    for curve in [Curve::RamHead, Curve::Sunflower] {
        let problem = DirichletProblem::new(curve, DIRICHLET_SOURCE, dirichlet_target(curve), 2560)?;
        let kernel: SharedKernel = Arc::new(problem.system()?.0);
        let h = HssMatrix::from_kernel(kernel, &choose_params(1e-10, 1)?.hss_params(50))?;
        let s = storage_report(&h);
        println!(
            "{:10} compressed {:7.2} MB  explicit {:7.2} MB  dense {:7.2} MB",
            curve.to_string(),
            s.compressed as f64 / MB,
            s.dense_generators as f64 / MB,
            s.dense as f64 / MB
        );
        let b = s.breakdown;
        println!(
            "           leaf coef {:.2}  transfer coef {:.2}  indices {:.2}  nearfield {:.2}",
            b.leaf_coefficients as f64 / MB,
            b.transfer_coefficients as f64 / MB,
            b.index_sets as f64 / MB,
            b.nearfield_blocks as f64 / MB
        );
    }
    Ok(())
}
