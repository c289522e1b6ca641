//! Generator storage shared by the HSS and H² formats.
//!
//! Every nonroot node owns a row basis and a column basis. A basis maps the
//! node's skeleton space onto its index set `ī`: the node's own points for a
//! leaf, or the concatenated children skeletons for an inner node, so the
//! same object is a leaf basis `U_i` or a stacked transfer `[R_c1; R_c2; ..]`.
//! Coupling and nearfield blocks are stored as index references into the
//! source kernel matrices and re-evaluated on demand.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cluster::{ClusterTree, Structure};
use crate::error::{Result, SmashError};
use crate::kernel::SharedKernel;
use crate::lowrank::InterpolativeFactor;

/// Node basis in interpolative form `P [I; G]` or as an explicit matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    Interp(InterpolativeFactor),
    Dense(DMatrix<f64>),
}

impl Basis {
    /// Number of columns (the skeleton size).
    pub fn rank(&self) -> usize {
        match self {
            Basis::Interp(f) => f.rank(),
            Basis::Dense(m) => m.ncols(),
        }
    }

    /// Number of rows (`|ī|`).
    pub fn len(&self) -> usize {
        match self {
            Basis::Interp(f) => f.len(),
            Basis::Dense(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Basis::Interp(f) => f.apply(z),
            Basis::Dense(m) => dense_mul(m, z),
        }
    }

    pub fn apply_t(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Basis::Interp(f) => f.apply_t(q),
            Basis::Dense(m) => dense_mul_t(m, q),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Basis::Interp(f) => f.to_dense(),
            Basis::Dense(m) => m.clone(),
        }
    }

    /// Largest interpolation coefficient, `None` for explicit bases.
    pub fn max_coefficient(&self) -> Option<f64> {
        match self {
            Basis::Interp(f) => Some(f.max_coefficient()),
            Basis::Dense(_) => None,
        }
    }
}

pub(crate) fn dense_mul(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += m[(i, j)] * xj;
            }
        }
    }
    y
}

pub(crate) fn dense_mul_t(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.ncols()).map(|j| m.column(j).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// A matrix block of the represented operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    /// `source[rows, cols]`, evaluated from the kernel when needed.
    Indexed { source: usize, rows: Vec<usize>, cols: Vec<usize> },
    Dense(DMatrix<f64>),
    /// Diagonal concatenation, from adding two representations.
    BlockDiag(Vec<Block>),
    /// Entrywise sum of equally shaped blocks.
    Sum(Vec<Block>),
}

impl Block {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Block::Indexed { rows, cols, .. } => (rows.len(), cols.len()),
            Block::Dense(m) => m.shape(),
            Block::BlockDiag(parts) => parts.iter().fold((0, 0), |(r, c), b| {
                let (br, bc) = b.shape();
                (r + br, c + bc)
            }),
            Block::Sum(parts) => parts.first().map(Block::shape).unwrap_or((0, 0)),
        }
    }

    pub fn to_dense(&self, sources: &[SharedKernel]) -> DMatrix<f64> {
        match self {
            Block::Indexed { source, rows, cols } => sources[*source].block(rows, cols),
            Block::Dense(m) => m.clone(),
            Block::BlockDiag(parts) => {
                let (r, c) = self.shape();
                let mut out = DMatrix::zeros(r, c);
                let (mut r0, mut c0) = (0, 0);
                for b in parts {
                    let (br, bc) = b.shape();
                    out.view_mut((r0, c0), (br, bc)).copy_from(&b.to_dense(sources));
                    r0 += br;
                    c0 += bc;
                }
                out
            }
            Block::Sum(parts) => {
                let (r, c) = self.shape();
                parts.iter().fold(DMatrix::zeros(r, c), |acc, b| acc + b.to_dense(sources))
            }
        }
    }

    /// `y += self · x`.
    pub fn apply_add(&self, sources: &[SharedKernel], x: &[f64], y: &mut [f64]) {
        match self {
            Block::Indexed { source, rows, cols } => {
                let k = &sources[*source];
                for (a, &i) in rows.iter().enumerate() {
                    let mut acc = 0.0;
                    for (b, &j) in cols.iter().enumerate() {
                        acc += k.entry(i, j) * x[b];
                    }
                    y[a] += acc;
                }
            }
            Block::Dense(m) => {
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        for (i, yi) in y.iter_mut().enumerate() {
                            *yi += m[(i, j)] * xj;
                        }
                    }
                }
            }
            Block::BlockDiag(parts) => {
                let (mut r0, mut c0) = (0, 0);
                for b in parts {
                    let (br, bc) = b.shape();
                    b.apply_add(sources, &x[c0..c0 + bc], &mut y[r0..r0 + br]);
                    r0 += br;
                    c0 += bc;
                }
            }
            Block::Sum(parts) => {
                for b in parts {
                    b.apply_add(sources, x, y);
                }
            }
        }
    }

    /// Same block with every source id moved by `offset`.
    pub fn shifted(&self, offset: usize) -> Block {
        match self {
            Block::Indexed { source, rows, cols } => {
                Block::Indexed { source: source + offset, rows: rows.clone(), cols: cols.clone() }
            }
            Block::Dense(m) => Block::Dense(m.clone()),
            Block::BlockDiag(parts) => Block::BlockDiag(parts.iter().map(|b| b.shifted(offset)).collect()),
            Block::Sum(parts) => Block::Sum(parts.iter().map(|b| b.shifted(offset)).collect()),
        }
    }

    /// Stored floating point entries and integer indices.
    pub fn storage(&self) -> (usize, usize) {
        match self {
            Block::Indexed { rows, cols, .. } => (0, rows.len() + cols.len()),
            Block::Dense(m) => (m.len(), 0),
            Block::BlockDiag(parts) | Block::Sum(parts) => parts.iter().fold((0, 0), |(f, i), b| {
                let (bf, bi) = b.storage();
                (f + bf, i + bi)
            }),
        }
    }
}

/// A block of the partition: rows of node `row`, columns of node `col`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEntry {
    pub row: usize,
    pub col: usize,
    pub block: Block,
    /// Filled by [`HierMatrix::materialize`].
    pub cache: Option<DMatrix<f64>>,
}

impl BlockEntry {
    pub fn new(row: usize, col: usize, block: Block) -> Self {
        BlockEntry { row, col, block, cache: None }
    }

    pub fn apply_add(&self, sources: &[SharedKernel], x: &[f64], y: &mut [f64]) {
        match &self.cache {
            Some(m) => Block::Dense(m.clone()).apply_add(sources, x, y),
            None => self.block.apply_add(sources, x, y),
        }
    }

    pub fn to_dense(&self, sources: &[SharedKernel]) -> DMatrix<f64> {
        match &self.cache {
            Some(m) => m.clone(),
            None => self.block.to_dense(sources),
        }
    }
}

/// Nested-basis representation bound to a cluster tree.
#[derive(Debug, Clone)]
pub struct HierMatrix {
    pub(crate) structure: Structure,
    pub(crate) tree: Arc<ClusterTree>,
    pub(crate) sources: Vec<SharedKernel>,
    pub(crate) row_bases: Vec<Option<Basis>>,
    pub(crate) col_bases: Vec<Option<Basis>>,
    /// Skeleton row indices `î` per node; empty for explicit bases.
    pub(crate) row_skeletons: Vec<Vec<usize>>,
    pub(crate) col_skeletons: Vec<Vec<usize>>,
    /// Admissible leaves.
    pub(crate) couplings: Vec<BlockEntry>,
    /// Inadmissible leaves.
    pub(crate) nearfield: Vec<BlockEntry>,
}

impl HierMatrix {
    /// Assembles a representation from its parts, checking that every basis
    /// and block has the shape the tree demands.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        structure: Structure,
        tree: Arc<ClusterTree>,
        sources: Vec<SharedKernel>,
        row_bases: Vec<Option<Basis>>,
        col_bases: Vec<Option<Basis>>,
        row_skeletons: Vec<Vec<usize>>,
        col_skeletons: Vec<Vec<usize>>,
        couplings: Vec<BlockEntry>,
        nearfield: Vec<BlockEntry>,
    ) -> Result<Self> {
        let m = HierMatrix {
            structure,
            tree,
            sources,
            row_bases,
            col_bases,
            row_skeletons,
            col_skeletons,
            couplings,
            nearfield,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.tree;
        let n = t.len();
        if self.row_bases.len() != n
            || self.col_bases.len() != n
            || self.row_skeletons.len() != n
            || self.col_skeletons.len() != n
        {
            return Err(SmashError::TreeMismatch("one basis slot per node expected".into()));
        }
        for node in t.nodes() {
            let i = node.id;
            let is_root = i == t.root();
            for (bases, leaf_len) in [(&self.row_bases, node.rows.len()), (&self.col_bases, node.cols.len())] {
                match (&bases[i], is_root) {
                    (Some(_), true) => return Err(SmashError::TreeMismatch("root carries a basis".into())),
                    (None, false) => return Err(SmashError::TreeMismatch(format!("node {i} has no basis"))),
                    (Some(b), false) => {
                        let expect = if node.is_leaf() {
                            leaf_len
                        } else {
                            node.children.iter().map(|&c| bases[c].as_ref().map_or(0, Basis::rank)).sum()
                        };
                        if b.len() != expect {
                            return Err(SmashError::TreeMismatch(format!(
                                "basis of node {i} has {} rows, expected {expect}",
                                b.len()
                            )));
                        }
                    }
                    (None, true) => {}
                }
            }
        }
        for e in &self.couplings {
            let (r, c) = e.block.shape();
            if r != self.row_rank(e.row) || c != self.col_rank(e.col) {
                return Err(SmashError::TreeMismatch(format!("coupling ({}, {}) has wrong shape", e.row, e.col)));
            }
        }
        for e in &self.nearfield {
            let (r, c) = e.block.shape();
            if r != t.node(e.row).rows.len() || c != t.node(e.col).cols.len() {
                return Err(SmashError::TreeMismatch(format!("nearfield ({}, {}) has wrong shape", e.row, e.col)));
            }
        }
        Ok(())
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn shared_tree(&self) -> Arc<ClusterTree> {
        self.tree.clone()
    }

    pub fn sources(&self) -> &[SharedKernel] {
        &self.sources
    }

    pub fn nrows(&self) -> usize {
        self.tree.num_rows()
    }

    pub fn ncols(&self) -> usize {
        self.tree.num_cols()
    }

    pub fn row_basis(&self, i: usize) -> Option<&Basis> {
        self.row_bases[i].as_ref()
    }

    pub fn col_basis(&self, i: usize) -> Option<&Basis> {
        self.col_bases[i].as_ref()
    }

    pub fn row_rank(&self, i: usize) -> usize {
        self.row_bases[i].as_ref().map_or(0, Basis::rank)
    }

    pub fn col_rank(&self, i: usize) -> usize {
        self.col_bases[i].as_ref().map_or(0, Basis::rank)
    }

    pub fn row_skeleton(&self, i: usize) -> &[usize] {
        &self.row_skeletons[i]
    }

    pub fn col_skeleton(&self, i: usize) -> &[usize] {
        &self.col_skeletons[i]
    }

    pub fn couplings(&self) -> &[BlockEntry] {
        &self.couplings
    }

    pub fn nearfield(&self) -> &[BlockEntry] {
        &self.nearfield
    }

    /// Largest skeleton size over all nodes and both sides.
    pub fn max_rank(&self) -> usize {
        (0..self.tree.len()).map(|i| self.row_rank(i).max(self.col_rank(i))).max().unwrap_or(0)
    }

    /// Largest skeleton size among nodes on `level`.
    pub fn max_rank_on_level(&self, level: usize) -> usize {
        self.tree.level(level).iter().map(|&i| self.row_rank(i).max(self.col_rank(i))).max().unwrap_or(0)
    }

    /// Largest `|G|` entry across all interpolative bases.
    pub fn max_coefficient(&self) -> f64 {
        self.row_bases
            .iter()
            .chain(&self.col_bases)
            .flatten()
            .filter_map(Basis::max_coefficient)
            .fold(0.0, f64::max)
    }

    /// Evaluates and caches every coupling and nearfield block.
    pub fn materialize(&mut self) {
        let sources = self.sources.clone();
        for e in self.couplings.iter_mut().chain(self.nearfield.iter_mut()) {
            if e.cache.is_none() {
                e.cache = Some(e.block.to_dense(&sources));
            }
        }
    }

    pub fn is_materialized(&self) -> bool {
        self.couplings.iter().chain(&self.nearfield).all(|e| e.cache.is_some())
    }

    /// Coupling blocks keyed by node pair.
    pub fn coupling_map(&self) -> HashMap<(usize, usize), &BlockEntry> {
        self.couplings.iter().map(|e| ((e.row, e.col), e)).collect()
    }

    /// Explicit bases `U_i` expanded over the node's own rows, for every
    /// nonroot node.
    pub fn expanded_row_bases(&self) -> Vec<Option<DMatrix<f64>>> {
        self.expand(&self.row_bases, true)
    }

    pub fn expanded_col_bases(&self) -> Vec<Option<DMatrix<f64>>> {
        self.expand(&self.col_bases, false)
    }

    fn expand(&self, bases: &[Option<Basis>], rows: bool) -> Vec<Option<DMatrix<f64>>> {
        let t = &self.tree;
        let mut out: Vec<Option<DMatrix<f64>>> = vec![None; t.len()];
        for node in t.nodes() {
            let Some(b) = &bases[node.id] else { continue };
            let dense = b.to_dense();
            out[node.id] = Some(if node.is_leaf() {
                dense
            } else {
                let len = if rows { node.rows.len() } else { node.cols.len() };
                let mut m = DMatrix::zeros(len, b.rank());
                let (mut r0, mut t0) = (0, 0);
                for &c in &node.children {
                    let uc = out[c].as_ref().expect("children come first in postorder");
                    let kc = uc.ncols();
                    let transfer = dense.rows(t0, kc);
                    m.rows_mut(r0, uc.nrows()).copy_from(&(uc * transfer));
                    r0 += uc.nrows();
                    t0 += kc;
                }
                m
            });
        }
        out
    }

    /// Dense matrix of the represented operator in the caller's ordering,
    /// assembled block by block from the partition.
    pub fn to_dense(&self, budget: usize) -> Result<DMatrix<f64>> {
        let (n, m) = (self.nrows(), self.ncols());
        if n.saturating_mul(m) > budget {
            return Err(SmashError::DenseBudget { rows: n, cols: m, budget });
        }
        let t = &self.tree;
        let us = self.expanded_row_bases();
        let vs = self.expanded_col_bases();
        let mut out = DMatrix::zeros(n, m);
        let mut put = |i: usize, j: usize, block: &DMatrix<f64>| {
            for (a, &r) in t.row_indices(i).iter().enumerate() {
                for (b, &c) in t.col_indices(j).iter().enumerate() {
                    out[(r, c)] += block[(a, b)];
                }
            }
        };
        for e in &self.couplings {
            let u = us[e.row].as_ref().expect("coupled node has a basis");
            let v = vs[e.col].as_ref().expect("coupled node has a basis");
            put(e.row, e.col, &(u * e.to_dense(&self.sources) * v.transpose()));
        }
        for e in &self.nearfield {
            put(e.row, e.col, &e.to_dense(&self.sources));
        }
        Ok(out)
    }

    /// Entry counts for storage accounting.
    pub(crate) fn basis_storage(&self) -> BasisStorage {
        let mut s = BasisStorage::default();
        for (i, b) in self.row_bases.iter().enumerate().chain(self.col_bases.iter().enumerate()) {
            let Some(b) = b else { continue };
            let leaf = self.tree.node(i).is_leaf();
            let coefficients = match b {
                Basis::Interp(f) => {
                    s.indices += f.len() + f.rank();
                    f.g.len()
                }
                Basis::Dense(m) => m.len(),
            };
            let dense = b.len() * b.rank();
            if leaf {
                s.leaf_coefficients += coefficients;
                s.leaf_dense += dense;
            } else {
                s.transfer_coefficients += coefficients;
                s.transfer_dense += dense;
            }
        }
        s
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct BasisStorage {
    pub leaf_coefficients: usize,
    pub transfer_coefficients: usize,
    pub indices: usize,
    pub leaf_dense: usize,
    pub transfer_dense: usize,
}
