//! Parameter heuristic and the a priori error bounds it feeds.

use smash::bench::{choose_params, error_bound, BoundInputs};
use smash::lowrank::TaylorExpansion;
use smash::Structure;

fn main() -> smash::Result<()> {
    println!("{:>8} {:>4} {:>5} {:>6} {:>10}", "eps", "dim", "tau", "order", "svd tol");
    for dim in [1, 2] {
        for eps in [1e-3, 1e-6, 1e-8, 1e-10, 1e-12] {
            let p = choose_params(eps, dim)?;
            println!("{eps:8.0e} {dim:4} {:5} {:6} {:10.1e}", p.tau, p.order, p.svd_tol);
        }
    }

    let far = TaylorExpansion::error_bound(0.6, 25);
    println!("\nTaylor truncation at tau 0.6, order 25: {far:.2e}");
    for levels in [3, 5, 8] {
        let inputs = BoundInputs::uniform(25, 2.0, levels, 1e-11, far, 1);
        let hss = error_bound(&inputs, Structure::Hss);
        let h2 = error_bound(&inputs, Structure::H2);
        println!("L = {levels}: HSS {:.2e}  H2 {:.2e}", hss.uniform_rank, h2.uniform_rank);
    }
    Ok(())
}
