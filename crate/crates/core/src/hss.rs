//! HSS construction on binary cluster trees.
//!
//! Each nonroot node combines an analytic farfield basis with an SVD basis
//! of its nearfield block row, then keeps the rows picked by strong RRQR.
//! Couplings between siblings and the leaf diagonal blocks are stored as
//! index sets into the kernel matrix.

use std::ops::Deref;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cluster::{Branching, ClusterTree, Structure};
use crate::error::{Result, SmashError};
use crate::generators::{Basis, Block, BlockEntry, HierMatrix};
use crate::kernel::SharedKernel;
use crate::lowrank::{compr, truncated_left, InterpolativeFactor, Rank, DEFAULT_S};

/// Construction parameters shared by the HSS and H² builders.
#[derive(Debug, Clone, PartialEq)]
pub struct HssParams {
    /// Expansion order `r` (Taylor terms or interpolation points).
    pub order: usize,
    /// Optional order per level, `level_orders[l - 1]` for level `l`.
    pub level_orders: Vec<usize>,
    /// Separation ratio `τ`.
    pub tau: f64,
    /// Relative truncation of the nearfield SVD.
    pub svd_tol: f64,
    /// Bound on interpolation coefficients.
    pub s: f64,
    /// Relative pivot cutoff in the interpolative decompositions.
    pub rank_tol: f64,
    /// Points per leaf `ν0` (multiplied by the kernel's rows per point).
    pub leaf_capacity: usize,
}

impl Default for HssParams {
    fn default() -> Self {
        HssParams {
            order: 21,
            level_orders: Vec::new(),
            tau: 0.6,
            svd_tol: 1e-9,
            s: DEFAULT_S,
            rank_tol: 1e-9,
            leaf_capacity: 50,
        }
    }
}

impl HssParams {
    pub fn order_at(&self, level: usize) -> usize {
        self.level_orders.get(level.wrapping_sub(1)).copied().unwrap_or(self.order)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(SmashError::invalid(format!("tau = {} outside (0, 1)", self.tau)));
        }
        if self.order == 0 || self.level_orders.contains(&0) {
            return Err(SmashError::invalid("expansion order must be positive"));
        }
        if !(self.s > 1.0) {
            return Err(SmashError::invalid("coefficient bound s must exceed 1"));
        }
        if !(self.svd_tol >= 0.0 && self.rank_tol >= 0.0) {
            return Err(SmashError::invalid("tolerances must be nonnegative"));
        }
        if self.leaf_capacity == 0 {
            return Err(SmashError::invalid("leaf capacity must be positive"));
        }
        Ok(())
    }
}

/// HSS approximation of a kernel matrix.
#[derive(Debug, Clone)]
pub struct HssMatrix {
    inner: HierMatrix,
    params: HssParams,
}

impl Deref for HssMatrix {
    type Target = HierMatrix;
    fn deref(&self) -> &HierMatrix {
        &self.inner
    }
}

impl HssMatrix {
    /// Builds the binary tree for `kernel` and compresses it.
    pub fn from_kernel(kernel: SharedKernel, params: &HssParams) -> Result<Self> {
        params.check()?;
        let cap = params.leaf_capacity * kernel.dofs_per_point();
        let tree = ClusterTree::build(kernel.row_points(), kernel.col_points(), cap, Branching::Alternating)?;
        build_hss(Arc::new(tree), kernel, params)
    }

    /// The zero matrix on `tree`: empty bases, zero diagonal blocks.
    pub fn zeros(tree: Arc<ClusterTree>) -> Result<Self> {
        check_binary(&tree)?;
        let n = tree.len();
        let root = tree.root();
        let mut row_bases = vec![None; n];
        let mut col_bases = vec![None; n];
        let mut couplings = Vec::new();
        let mut nearfield = Vec::new();
        for node in tree.nodes() {
            if node.id != root {
                let (r, c) = if node.is_leaf() { (node.rows.len(), node.cols.len()) } else { (0, 0) };
                row_bases[node.id] = Some(Basis::Dense(DMatrix::zeros(r, 0)));
                col_bases[node.id] = Some(Basis::Dense(DMatrix::zeros(c, 0)));
            }
            for &a in &node.children {
                for &b in &node.children {
                    if a != b {
                        couplings.push(BlockEntry::new(a, b, Block::Dense(DMatrix::zeros(0, 0))));
                    }
                }
            }
            if node.is_leaf() {
                let d = DMatrix::zeros(node.rows.len(), node.cols.len());
                nearfield.push(BlockEntry::new(node.id, node.id, Block::Dense(d)));
            }
        }
        let inner = HierMatrix::from_parts(
            Structure::Hss,
            tree,
            Vec::new(),
            row_bases,
            col_bases,
            vec![Vec::new(); n],
            vec![Vec::new(); n],
            couplings,
            nearfield,
        )?;
        Ok(HssMatrix { inner, params: HssParams::default() })
    }

    /// Wraps a generic representation; the tree must be binary and the
    /// partition must be the HSS one.
    pub fn from_hier(inner: HierMatrix, params: HssParams) -> Result<Self> {
        check_binary(inner.tree())?;
        if inner.structure() != Structure::Hss {
            return Err(SmashError::Unsupported("not an HSS partition".into()));
        }
        Ok(HssMatrix { inner, params })
    }

    pub fn params(&self) -> &HssParams {
        &self.params
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

    /// Coupling `B_i` between node `i` and its sibling.
    pub fn coupling(&self, i: usize) -> Option<&BlockEntry> {
        self.inner.couplings().iter().find(|e| e.row == i)
    }
}

fn check_binary(tree: &ClusterTree) -> Result<()> {
    if tree.max_children() > 2 {
        Err(SmashError::Unsupported("HSS needs a binary tree".into()))
    } else {
        Ok(())
    }
}

/// Index set `ī` of a node: its own indices for a leaf, the children's
/// skeletons otherwise.
pub(crate) fn node_indices(tree: &ClusterTree, i: usize, own: &[usize], skeletons: &[Vec<usize>]) -> Vec<usize> {
    let node = tree.node(i);
    if node.is_leaf() {
        own.to_vec()
    } else {
        node.children.iter().flat_map(|&c| skeletons[c].iter().copied()).collect()
    }
}

/// Horizontal concatenation of equally tall blocks.
fn hcat(blocks: &[DMatrix<f64>], rows: usize) -> DMatrix<f64> {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        out.columns_mut(c0, b.ncols()).copy_from(b);
        c0 += b.ncols();
    }
    out
}

/// Interpolative decomposition of `[farfield, nearfield]` over `index`.
pub(crate) fn skeletonize(
    farfield: DMatrix<f64>,
    nearfield: Option<DMatrix<f64>>,
    index: &[usize],
    s: f64,
    rank_tol: f64,
) -> Result<InterpolativeFactor> {
    let c = match nearfield {
        Some(near) if near.ncols() > 0 => hcat(&[farfield, near], index.len()),
        _ => farfield,
    };
    compr(&c, index, s, Rank::Tolerance(rank_tol))
}

/// SVD basis of a nearfield block row, or `None` when it is empty.
fn nearfield_basis(block: DMatrix<f64>, tol: f64) -> Result<Option<DMatrix<f64>>> {
    if block.is_empty() {
        return Ok(None);
    }
    Ok(Some(truncated_left(&block, tol)?.0))
}

/// Compresses `kernel` on the binary `tree`, level by level from the leaves.
pub fn build_hss(tree: Arc<ClusterTree>, kernel: SharedKernel, params: &HssParams) -> Result<HssMatrix> {
    params.check()?;
    check_binary(&tree)?;
    if kernel.nrows() != tree.num_rows() || kernel.ncols() != tree.num_cols() {
        return Err(SmashError::TreeMismatch("tree and kernel sizes differ".into()));
    }
    let n = tree.len();
    let root = tree.root();
    let near = tree.nearfield_sets(params.tau);
    let mut row_bar: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut col_bar: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in tree.leaves() {
        row_bar[i] = tree.row_indices(i).to_vec();
        col_bar[i] = tree.col_indices(i).to_vec();
    }
    let mut row_bases = vec![None; n];
    let mut col_bases = vec![None; n];
    let mut row_skel: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut col_skel: Vec<Vec<usize>> = vec![Vec::new(); n];

    for level in (2..=tree.num_levels()).rev() {
        let nodes = tree.level(level);
        for &i in nodes {
            row_bar[i] = node_indices(&tree, i, tree.row_indices(i), &row_skel);
            col_bar[i] = node_indices(&tree, i, tree.col_indices(i), &col_skel);
        }
        let order = params.order_at(level);
        for &i in nodes {
            let cell = &tree.node(i).bbox;
            let (rows, cols) = (&row_bar[i], &col_bar[i]);

            let blocks: Vec<DMatrix<f64>> = near[i].iter().map(|&j| kernel.block(rows, &col_bar[j])).collect();
            let s_row = nearfield_basis(hcat(&blocks, rows.len()), params.svd_tol)?;
            // with every other cluster in the nearfield there is no farfield to span
            let has_far = |own: usize, total: usize, len: &dyn Fn(usize) -> usize| {
                own + near[i].iter().map(|&j| len(j)).sum::<usize>() < total
            };
            let far_rows = has_far(tree.row_indices(i).len(), tree.num_rows(), &|j| tree.row_indices(j).len());
            let far_cols = has_far(tree.col_indices(i).len(), tree.num_cols(), &|j| tree.col_indices(j).len());
            let u_far = if rows.is_empty() || !far_cols {
                DMatrix::zeros(rows.len(), 0)
            } else {
                kernel.row_basis(rows, cell, order)?
            };
            let fr = skeletonize(u_far, s_row, rows, params.s, params.rank_tol)?;

            let blocks: Vec<DMatrix<f64>> =
                near[i].iter().map(|&j| kernel.block(&row_bar[j], cols).transpose()).collect();
            let t_col = nearfield_basis(hcat(&blocks, cols.len()), params.svd_tol)?;
            let v_far = if cols.is_empty() || !far_rows {
                DMatrix::zeros(cols.len(), 0)
            } else {
                kernel.col_basis(cols, cell, order)?
            };
            let fc = skeletonize(v_far, t_col, cols, params.s, params.rank_tol)?;

            row_skel[i] = fr.skeleton_indices();
            col_skel[i] = fc.skeleton_indices();
            row_bases[i] = Some(Basis::Interp(fr));
            col_bases[i] = Some(Basis::Interp(fc));
        }
    }

    let mut couplings = Vec::new();
    let mut nearfield = Vec::new();
    for node in tree.nodes() {
        for &a in &node.children {
            for &b in &node.children {
                if a != b {
                    let block = Block::Indexed { source: 0, rows: row_skel[a].clone(), cols: col_skel[b].clone() };
                    couplings.push(BlockEntry::new(a, b, block));
                }
            }
        }
        if node.is_leaf() {
            let block =
                Block::Indexed { source: 0, rows: tree.row_indices(node.id).to_vec(), cols: tree.col_indices(node.id).to_vec() };
            nearfield.push(BlockEntry::new(node.id, node.id, block));
        }
    }
    debug_assert!(row_bases[root].is_none());
    let inner = HierMatrix::from_parts(
        Structure::Hss,
        tree,
        vec![kernel],
        row_bases,
        col_bases,
        row_skel,
        col_skel,
        couplings,
        nearfield,
    )?;
    Ok(HssMatrix { inner, params: params.clone() })
}

/// Sum of two HSS matrices on the same tree: bases side by side, transfers
/// and couplings block diagonal, diagonal blocks added.
pub fn hss_add(a: &HssMatrix, b: &HssMatrix) -> Result<HssMatrix> {
    let tree = a.shared_tree();
    if !Arc::ptr_eq(&tree, &b.shared_tree()) && *tree != *b.tree() {
        return Err(SmashError::TreeMismatch("HSS summands live on different trees".into()));
    }
    let n = tree.len();
    let offset = a.sources().len();
    let mut sources = a.sources().to_vec();
    sources.extend(b.sources().iter().cloned());

    let combine = |ba: &[Option<Basis>], bb: &[Option<Basis>], i: usize| -> Option<Basis> {
        let (x, y) = (ba[i].as_ref()?, bb[i].as_ref()?);
        let node = tree.node(i);
        let (dx, dy) = (x.to_dense(), y.to_dense());
        let (kx, ky) = (x.rank(), y.rank());
        if node.is_leaf() {
            let mut m = DMatrix::zeros(dx.nrows(), kx + ky);
            m.columns_mut(0, kx).copy_from(&dx);
            m.columns_mut(kx, ky).copy_from(&dy);
            return Some(Basis::Dense(m));
        }
        let rank = |bases: &[Option<Basis>], c: usize| bases[c].as_ref().map_or(0, Basis::rank);
        let rows: usize = node.children.iter().map(|&c| rank(ba, c) + rank(bb, c)).sum();
        let mut m = DMatrix::zeros(rows, kx + ky);
        let (mut r0, mut rx, mut ry) = (0, 0, 0);
        for &c in &node.children {
            let (cx, cy) = (rank(ba, c), rank(bb, c));
            m.view_mut((r0, 0), (cx, kx)).copy_from(&dx.rows(rx, cx));
            m.view_mut((r0 + cx, kx), (cy, ky)).copy_from(&dy.rows(ry, cy));
            r0 += cx + cy;
            rx += cx;
            ry += cy;
        }
        Some(Basis::Dense(m))
    };
    let row_bases: Vec<Option<Basis>> = (0..n).map(|i| combine(&a.row_bases, &b.row_bases, i)).collect();
    let col_bases: Vec<Option<Basis>> = (0..n).map(|i| combine(&a.col_bases, &b.col_bases, i)).collect();

    let bmap = b.coupling_map();
    let mut couplings = Vec::new();
    for e in a.couplings() {
        let other = match bmap.get(&(e.row, e.col)) {
            Some(f) => f.block.shifted(offset),
            None => Block::Dense(DMatrix::zeros(b.row_rank(e.row), b.col_rank(e.col))),
        };
        couplings.push(BlockEntry::new(e.row, e.col, Block::BlockDiag(vec![e.block.clone(), other])));
    }
    let mut nearfield = Vec::new();
    for e in a.nearfield() {
        let other = b
            .nearfield()
            .iter()
            .find(|f| f.row == e.row && f.col == e.col)
            .ok_or_else(|| SmashError::TreeMismatch("diagonal blocks differ".into()))?;
        nearfield.push(BlockEntry::new(e.row, e.col, Block::Sum(vec![e.block.clone(), other.block.shifted(offset)])));
    }
    let inner = HierMatrix::from_parts(
        Structure::Hss,
        tree,
        sources,
        row_bases,
        col_bases,
        vec![Vec::new(); n],
        vec![Vec::new(); n],
        couplings,
        nearfield,
    )?;
    Ok(HssMatrix { inner, params: a.params.clone() })
}

/// `diag(dl) · M · diag(dr)` for any nested-basis representation: scales the
/// leaf bases and the nearfield blocks.
pub fn diag_scale_hier(m: &HierMatrix, dl: &[f64], dr: &[f64]) -> Result<HierMatrix> {
    if dl.len() != m.nrows() {
        return Err(SmashError::DimensionMismatch { expected: m.nrows(), got: dl.len() });
    }
    if dr.len() != m.ncols() {
        return Err(SmashError::DimensionMismatch { expected: m.ncols(), got: dr.len() });
    }
    let tree = m.shared_tree();
    let scale_rows = |mat: &mut DMatrix<f64>, idx: &[usize], d: &[f64]| {
        for (a, &i) in idx.iter().enumerate() {
            mat.row_mut(a).scale_mut(d[i]);
        }
    };
    let mut out = m.clone();
    for i in tree.leaves() {
        if let Some(b) = &m.row_bases[i] {
            let mut u = b.to_dense();
            scale_rows(&mut u, tree.row_indices(i), dl);
            out.row_bases[i] = Some(Basis::Dense(u));
            out.row_skeletons[i].clear();
        }
        if let Some(b) = &m.col_bases[i] {
            let mut v = b.to_dense();
            scale_rows(&mut v, tree.col_indices(i), dr);
            out.col_bases[i] = Some(Basis::Dense(v));
            out.col_skeletons[i].clear();
        }
    }
    for e in out.nearfield.iter_mut() {
        let mut d = e.to_dense(&m.sources);
        scale_rows(&mut d, tree.row_indices(e.row), dl);
        for (b, &j) in tree.col_indices(e.col).iter().enumerate() {
            d.column_mut(b).scale_mut(dr[j]);
        }
        e.block = Block::Dense(d);
        e.cache = None;
    }
    Ok(out)
}

pub fn diag_scale(h: &HssMatrix, dl: &[f64], dr: &[f64]) -> Result<HssMatrix> {
    Ok(HssMatrix { inner: diag_scale_hier(&h.inner, dl, dr)?, params: h.params.clone() })
}

/// Dense matrix represented by `h` (test oracle).
pub fn reconstruct_dense_hss(h: &HssMatrix, budget: usize) -> Result<DMatrix<f64>> {
    h.to_dense(budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{PointSet, Role};
    use crate::kernel::{assemble_dense, cauchy_points, CauchyMatrix, Curve, Geometry, SmoothKernel};
    use num_complex::Complex64;

    fn interval_cauchy(n: usize) -> SharedKernel {
        let (x, y) = cauchy_points(Geometry::Curve(Curve::Interval), n, 7).unwrap();
        Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(1.0, 0.0)).unwrap())
    }

    fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / a.norm()
    }

    #[test]
    fn diagonal_blocks_are_exact() {
        let k = interval_cauchy(300);
        let h = HssMatrix::from_kernel(k.clone(), &HssParams::default()).unwrap();
        for e in h.nearfield() {
            let exact = k.block(h.tree().row_indices(e.row), h.tree().col_indices(e.col));
            assert_eq!(e.to_dense(h.sources()), exact);
        }
    }

    #[test]
    fn single_node_tree_is_dense() {
        let k = interval_cauchy(30);
        let h = HssMatrix::from_kernel(k.clone(), &HssParams::default()).unwrap();
        assert_eq!(h.tree().len(), 1);
        let a = assemble_dense(k.as_ref(), usize::MAX).unwrap();
        assert_eq!(reconstruct_dense_hss(&h, usize::MAX).unwrap(), a);
    }

    #[test]
    fn interval_cauchy_reconstruction() {
        let k = interval_cauchy(400);
        let params = HssParams { order: 21, tau: 0.6, svd_tol: 1e-9, rank_tol: 1e-9, ..Default::default() };
        let h = HssMatrix::from_kernel(k.clone(), &params).unwrap();
        let a = assemble_dense(k.as_ref(), usize::MAX).unwrap();
        let err = rel_fro(&a, &reconstruct_dense_hss(&h, usize::MAX).unwrap());
        assert!(err <= 1e-6, "relative error {err:e}");
        assert!(h.max_coefficient() <= 2.0 + 1e-12);
    }

    #[test]
    fn rank_two_kernel_is_exact() {
        let xs: Vec<f64> = (0..256).map(|i| (i as f64 + 0.5) / 256.0).collect();
        let p = PointSet::from_1d(&xs, Role::Target).unwrap();
        let k: SharedKernel = Arc::new(SmoothKernel::new("xy+1", p.clone(), p, |x, y| x[0] * y[0] + 1.0));
        let params = HssParams { order: 4, leaf_capacity: 16, ..Default::default() };
        let h = HssMatrix::from_kernel(k.clone(), &params).unwrap();
        let a = assemble_dense(k.as_ref(), usize::MAX).unwrap();
        assert!(rel_fro(&a, &h.to_dense(usize::MAX).unwrap()) < 1e-12);
        assert!(h.max_rank() <= 4);
    }

    #[test]
    fn nested_basis_identity() {
        let k = interval_cauchy(200);
        let params = HssParams { leaf_capacity: 20, ..Default::default() };
        let h = HssMatrix::from_kernel(k, &params).unwrap();
        let us = h.expanded_row_bases();
        let t = h.tree();
        for node in t.nodes() {
            if node.is_leaf() || node.id == t.root() {
                continue;
            }
            let r = h.row_basis(node.id).unwrap().to_dense();
            let mut off = 0;
            let mut row0 = 0;
            let up = us[node.id].as_ref().unwrap();
            for &c in &node.children {
                let uc = us[c].as_ref().unwrap();
                let part = uc * r.rows(off, uc.ncols());
                let diff = (&part - up.rows(row0, uc.nrows())).norm();
                assert!(diff < 1e-12);
                off += uc.ncols();
                row0 += uc.nrows();
            }
        }
    }

    #[test]
    fn scaling_and_adding_follow_the_dense_operator() {
        let k = interval_cauchy(128);
        let params = HssParams { leaf_capacity: 16, ..Default::default() };
        let h = HssMatrix::from_kernel(k.clone(), &params).unwrap();
        let a = assemble_dense(k.as_ref(), usize::MAX).unwrap();
        let dl: Vec<f64> = (0..128).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let dr: Vec<f64> = (0..128).map(|i| 0.5 + (i as f64 * 0.11).cos().abs()).collect();
        let scaled = diag_scale(&h, &dl, &dr).unwrap();
        let expect = DMatrix::from_fn(128, 128, |i, j| dl[i] * a[(i, j)] * dr[j]);
        let got = scaled.to_dense(usize::MAX).unwrap();
        assert!(rel_fro(&expect, &got) < 1e-8);
        let sum = hss_add(&h, &scaled).unwrap();
        let got = sum.to_dense(usize::MAX).unwrap();
        assert!(rel_fro(&(&a + &expect), &got) < 1e-8);
        let zero = HssMatrix::zeros(h.shared_tree()).unwrap();
        let same = hss_add(&h, &zero).unwrap();
        assert!(rel_fro(&h.to_dense(usize::MAX).unwrap(), &same.to_dense(usize::MAX).unwrap()) < 1e-15);
    }
}
