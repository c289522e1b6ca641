//! Strong rank-revealing QR and the interpolative decomposition built on it.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smash::lowrank::{compr, srrqr, Rank};

fn main() -> smash::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // 60 x 40 of rank 8
    let a = DMatrix::from_fn(60, 8, |_, _| rng.random::<f64>() - 0.5);
    let b = DMatrix::from_fn(8, 40, |_, _| rng.random::<f64>() - 0.5);
    let m = &a * &b;

    let f = srrqr(&m, Rank::Tolerance(1e-12), 2.0)?;
    let c = f.coefficients();
    println!("srrqr rank {}  swaps {}  max |R11^-1 R12| {:.3}", f.rank, f.swaps, c.amax());

    let index: Vec<usize> = (100..160).collect();
    let id = compr(&m, &index, 2.0, Rank::Tolerance(1e-12))?;
    let rows: Vec<usize> = id.skeleton.clone();
    let skel = DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)]);
    let err = (id.to_dense() * skel - &m).norm() / m.norm();
    println!("skeleton rows {:?}", id.skeleton_indices());
    println!("max coefficient {:.3}  reconstruction error {err:.2e}", id.max_coefficient());
    Ok(())
}
