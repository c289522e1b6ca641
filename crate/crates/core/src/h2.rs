//! H² construction on `2^d`-trees with strong admissibility.
//!
//! Only farfield bases are compressed; nearfield leaf blocks stay as index
//! references into the kernel matrix.

use std::ops::Deref;
use std::sync::Arc;

use crate::cluster::{leaf_sets, Branching, ClusterTree, LeafSets, Structure};
use crate::error::{Result, SmashError};
use crate::generators::{Basis, Block, BlockEntry, HierMatrix};
use crate::hss::{node_indices, skeletonize};
use crate::kernel::SharedKernel;
use crate::lowrank::DEFAULT_S;

#[derive(Debug, Clone, PartialEq)]
pub struct H2Params {
    pub order: usize,
    /// Optional order per level, `level_orders[l - 1]` for level `l`.
    pub level_orders: Vec<usize>,
    pub tau: f64,
    pub s: f64,
    /// Relative pivot cutoff in the interpolative decompositions.
    pub rank_tol: f64,
    /// Points per leaf `ν0` (multiplied by the kernel's rows per point).
    pub leaf_capacity: usize,
}

impl Default for H2Params {
    fn default() -> Self {
        H2Params { order: 22, level_orders: Vec::new(), tau: 0.65, s: DEFAULT_S, rank_tol: 1e-13, leaf_capacity: 50 }
    }
}

impl H2Params {
    pub fn order_at(&self, level: usize) -> usize {
        self.level_orders.get(level.wrapping_sub(1)).copied().unwrap_or(self.order)
    }

    fn check(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(SmashError::invalid(format!("tau = {} outside (0, 1)", self.tau)));
        }
        if self.order == 0 || self.level_orders.contains(&0) {
            return Err(SmashError::invalid("expansion order must be positive"));
        }
        if !(self.s > 1.0) {
            return Err(SmashError::invalid("coefficient bound s must exceed 1"));
        }
        if !(self.rank_tol >= 0.0) {
            return Err(SmashError::invalid("rank tolerance must be nonnegative"));
        }
        if self.leaf_capacity == 0 {
            return Err(SmashError::invalid("leaf capacity must be positive"));
        }
        Ok(())
    }
}

/// H² approximation of a kernel matrix.
#[derive(Debug, Clone)]
pub struct H2Matrix {
    inner: HierMatrix,
    params: H2Params,
    leaves: LeafSets,
}

impl Deref for H2Matrix {
    type Target = HierMatrix;
    fn deref(&self) -> &HierMatrix {
        &self.inner
    }
}

impl H2Matrix {
    /// Builds the `2^d`-tree for `kernel` and compresses it.
    pub fn from_kernel(kernel: SharedKernel, params: &H2Params) -> Result<Self> {
        params.check()?;
        let cap = params.leaf_capacity * kernel.dofs_per_point();
        let tree = ClusterTree::build(kernel.row_points(), kernel.col_points(), cap, Branching::Full)?;
        build_h2(Arc::new(tree), kernel, params)
    }

    pub fn params(&self) -> &H2Params {
        &self.params
    }

    pub fn leaf_sets(&self) -> &LeafSets {
        &self.leaves
    }

    pub fn as_hier(&self) -> &HierMatrix {
        &self.inner
    }

    pub fn into_hier(self) -> HierMatrix {
        self.inner
    }

    pub fn materialize(&mut self) {
        self.inner.materialize();
    }

    pub(crate) fn from_hier(inner: HierMatrix, params: H2Params, tau: f64) -> Result<Self> {
        let leaves = leaf_sets(inner.tree(), tau, Structure::H2)?;
        Ok(H2Matrix { inner, params, leaves })
    }
}

/// Compresses `kernel` on `tree` (any branching) under strong admissibility.
pub fn build_h2(tree: Arc<ClusterTree>, kernel: SharedKernel, params: &H2Params) -> Result<H2Matrix> {
    params.check()?;
    if kernel.nrows() != tree.num_rows() || kernel.ncols() != tree.num_cols() {
        return Err(SmashError::TreeMismatch("tree and kernel sizes differ".into()));
    }
    let leaves = leaf_sets(&tree, params.tau, Structure::H2)?;
    let n = tree.len();
    let mut row_bases = vec![None; n];
    let mut col_bases = vec![None; n];
    let mut row_skel: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut col_skel: Vec<Vec<usize>> = vec![Vec::new(); n];
    for level in (2..=tree.num_levels()).rev() {
        let order = params.order_at(level);
        for &i in tree.level(level) {
            let cell = &tree.node(i).bbox;
            let rows = node_indices(&tree, i, tree.row_indices(i), &row_skel);
            let cols = node_indices(&tree, i, tree.col_indices(i), &col_skel);
            let fr = if rows.is_empty() {
                skeletonize(nalgebra::DMatrix::zeros(0, 0), None, &rows, params.s, params.rank_tol)?
            } else {
                skeletonize(kernel.row_basis(&rows, cell, order)?, None, &rows, params.s, params.rank_tol)?
            };
            let fc = if cols.is_empty() {
                skeletonize(nalgebra::DMatrix::zeros(0, 0), None, &cols, params.s, params.rank_tol)?
            } else {
                skeletonize(kernel.col_basis(&cols, cell, order)?, None, &cols, params.s, params.rank_tol)?
            };
            row_skel[i] = fr.skeleton_indices();
            col_skel[i] = fc.skeleton_indices();
            row_bases[i] = Some(Basis::Interp(fr));
            col_bases[i] = Some(Basis::Interp(fc));
        }
    }
    let couplings = leaves
        .admissible
        .iter()
        .map(|&(i, j)| {
            BlockEntry::new(i, j, Block::Indexed { source: 0, rows: row_skel[i].clone(), cols: col_skel[j].clone() })
        })
        .collect();
    let nearfield = leaves
        .inadmissible
        .iter()
        .map(|&(i, j)| {
            let block =
                Block::Indexed { source: 0, rows: tree.row_indices(i).to_vec(), cols: tree.col_indices(j).to_vec() };
            BlockEntry::new(i, j, block)
        })
        .collect();
    let inner = HierMatrix::from_parts(
        Structure::H2,
        tree,
        vec![kernel],
        row_bases,
        col_bases,
        row_skel,
        col_skel,
        couplings,
        nearfield,
    )?;
    Ok(H2Matrix { inner, params: params.clone(), leaves })
}

/// Dense matrix represented by `h` (test oracle).
pub fn reconstruct_dense_h2(h: &H2Matrix, budget: usize) -> Result<nalgebra::DMatrix<f64>> {
    h.to_dense(budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{PointSet, Role};
    use crate::kernel::{assemble_dense, grid_points, CauchyMatrix, SmoothKernel};
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn grid_cauchy(m: usize) -> SharedKernel {
        let p = grid_points(m, Role::Target).unwrap();
        let q = PointSet::new(2, p.iter().flatten().copied().collect(), Role::Source).unwrap();
        Arc::new(CauchyMatrix::new(&p, &q, Complex64::new(1.0, 0.0)).unwrap())
    }

    #[test]
    fn nearfield_blocks_are_exact() {
        let k = grid_cauchy(20);
        let h = H2Matrix::from_kernel(k.clone(), &H2Params { leaf_capacity: 25, ..Default::default() }).unwrap();
        assert!(!h.nearfield().is_empty());
        for e in h.nearfield() {
            let exact = k.block(h.tree().row_indices(e.row), h.tree().col_indices(e.col));
            assert_eq!(e.to_dense(h.sources()), exact);
        }
    }

    #[test]
    fn grid_cauchy_is_accurate() {
        let k = grid_cauchy(24);
        let params = H2Params { leaf_capacity: 20, ..Default::default() };
        let h = H2Matrix::from_kernel(k.clone(), &params).unwrap();
        assert!(!h.couplings().is_empty());
        let a = assemble_dense(k.as_ref(), usize::MAX).unwrap();
        let err = (&a - h.to_dense(usize::MAX).unwrap()).norm() / a.norm();
        assert!(err < 1e-10, "relative error {err:e}");
        assert!(h.max_coefficient() <= 2.0 + 1e-12);
    }

    #[test]
    fn two_leaf_tree_is_dense() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
        let p = PointSet::from_1d(&xs, Role::Target).unwrap();
        let k: SharedKernel = Arc::new(SmoothKernel::new("exp", p.clone(), p, |x, y| (x[0] - y[0]).exp()));
        let h = H2Matrix::from_kernel(k.clone(), &H2Params { leaf_capacity: 4, tau: 0.5, ..Default::default() }).unwrap();
        assert!(h.couplings().is_empty());
        assert_eq!(h.nearfield().len(), 4);
        let a = assemble_dense(k.as_ref(), usize::MAX).unwrap();
        assert_eq!(h.to_dense(usize::MAX).unwrap(), a);
    }

    #[test]
    fn zero_kernel_gives_zero_matrix() {
        let p = grid_points(12, Role::Target).unwrap();
        let k: SharedKernel = Arc::new(SmoothKernel::new("zero", p.clone(), p, |_, _| 0.0));
        let h = H2Matrix::from_kernel(k, &H2Params { leaf_capacity: 10, order: 9, ..Default::default() }).unwrap();
        assert_eq!(h.to_dense(usize::MAX).unwrap(), DMatrix::zeros(144, 144));
    }
}
