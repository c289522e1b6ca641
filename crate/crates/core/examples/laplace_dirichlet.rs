//! Interior Dirichlet problem for the Laplace equation via a second-kind
//! double-layer equation, solved with HSS + ULV.
//!
//!     cargo run --release --example laplace_dirichlet -- ramhead

use std::sync::Arc;

use smash::bench::{choose_params, dirichlet_target, DIRICHLET_SOURCE};
use smash::kernel::{Curve, DirichletProblem};
use smash::{ulv_factor, HssMatrix, SharedKernel};

fn main() -> smash::Result<()> {
    let curve: Curve = std::env::args().nth(1).as_deref().unwrap_or("ramhead").parse()?;
    let params = choose_params(1e-10, 1)?.hss_params(50);
    let target = dirichlet_target(curve);
    println!("{curve}: u(x) = log|x - {DIRICHLET_SOURCE:?}| at x = {target:?}");
    for n in [160, 320, 640, 1280] {
        let problem = DirichletProblem::new(curve, DIRICHLET_SOURCE, target, n)?;
        let (dlp, rhs, _) = problem.system()?;
        let kernel: SharedKernel = Arc::new(dlp.clone());
        let h = HssMatrix::from_kernel(kernel, &params)?;
        let sigma = ulv_factor(&h)?.solve(&rhs)?;
        let err = (dlp.potential(&sigma, target)? - problem.exact(target)).abs();
        println!("n {n:5}  rank {:3}  error {err:.3e}", h.max_rank());
    }
    Ok(())
}
