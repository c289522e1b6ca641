//! Compare the HSS skeleton size of the top off-diagonal block with its
//! ε-rank from a dense SVD.

use std::sync::Arc;

use smash::bench::{choose_params, compare_ranks, dirichlet_target, DIRICHLET_SOURCE};
use smash::kernel::{Curve, DirichletProblem};
use smash::{HssMatrix, SharedKernel};

fn main() -> smash::Result<()> {
    let curve = Curve::RamHead;
    let n = 1280;
    let problem = DirichletProblem::new(curve, DIRICHLET_SOURCE, dirichlet_target(curve), n)?;
    let kernel: SharedKernel = Arc::new(problem.system()?.0);
    for eps in [1e-3, 1e-6, 1e-9] {
        let params = choose_params(eps, 1)?.hss_params(50);
        let h = HssMatrix::from_kernel(kernel.clone(), &params)?;
        let c = compare_ranks(&h, kernel.as_ref(), eps, usize::MAX)?;
        println!(
            "eps {eps:.0e}  order {:2}  block {}x{}  eps-rank {:3}  skeleton {:3}",
            params.order, c.block_rows, c.block_cols, c.eps_rank, c.coupling_size
        );
    }
    Ok(())
}
