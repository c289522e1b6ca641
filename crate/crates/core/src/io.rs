//! Vector files and the binary container for compressed matrices.
//!
//! The container stores the cluster tree, the skeleton index sets, the
//! interpolation coefficients and any explicit blocks, all little endian.
//! Kernel entries are never written: blocks given by index pairs are
//! re-evaluated from the kernel passed to [`read_matrix`].

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cluster::{BoundingBox, Branching, ClusterNode, ClusterTree, Structure};
use crate::error::{Result, SmashError};
use crate::generators::{Basis, Block, BlockEntry, HierMatrix};
use crate::h2::{H2Matrix, H2Params};
use crate::hss::{HssMatrix, HssParams};
use crate::kernel::SharedKernel;
use crate::lowrank::InterpolativeFactor;

const MAGIC: &[u8; 4] = b"SMSH";
const VERSION: u32 = 1;

/// Encoding of vector files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorFormat {
    /// One value per line.
    #[default]
    Text,
    /// Raw little-endian `f64`.
    Binary,
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().map_err(|e| SmashError::Format(format!("`{l}`: {e}"))))
        .collect()
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}\n")).collect()
}

pub fn decode_vector(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(SmashError::Format(format!("{} bytes is not a whole number of doubles", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub fn encode_vector(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn read_vector(path: impl AsRef<Path>, format: VectorFormat) -> Result<Vec<f64>> {
    match format {
        VectorFormat::Text => parse_vector(&fs::read_to_string(path)?),
        VectorFormat::Binary => decode_vector(&fs::read(path)?),
    }
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64], format: VectorFormat) -> Result<()> {
    match format {
        VectorFormat::Text => fs::write(path, format_vector(v))?,
        VectorFormat::Binary => fs::write(path, encode_vector(v))?,
    }
    Ok(())
}

/// A matrix read back from a container.
#[derive(Debug, Clone)]
pub enum StoredMatrix {
    Hss(HssMatrix),
    H2(H2Matrix),
}

impl StoredMatrix {
    pub fn as_hier(&self) -> &HierMatrix {
        match self {
            StoredMatrix::Hss(h) => h.as_hier(),
            StoredMatrix::H2(h) => h.as_hier(),
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u64(&mut self, x: usize) {
        self.0.extend_from_slice(&(x as u64).to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn indices(&mut self, v: &[usize]) {
        self.u64(v.len());
        v.iter().for_each(|&x| self.u64(x));
    }
    fn floats(&mut self, v: &[f64]) {
        self.u64(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u64(m.nrows());
        self.u64(m.ncols());
        m.iter().for_each(|&x| self.f64(x));
    }
    fn string(&mut self, s: &str) {
        self.u64(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| SmashError::Format("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| SmashError::Format("integer out of range".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    /// Length prefix, rejected if the remaining data cannot hold it.
    fn len(&mut self, width: usize) -> Result<usize> {
        let n = self.u64()?;
        if n.saturating_mul(width) > self.buf.len() - self.pos {
            return Err(SmashError::Format(format!("length {n} exceeds the data")));
        }
        Ok(n)
    }
    fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let (r, c) = (self.u64()?, self.u64()?);
        let len = r.checked_mul(c).ok_or_else(|| SmashError::Format("matrix too large".into()))?;
        if len.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(SmashError::Format("matrix exceeds the data".into()));
        }
        let data: Vec<f64> = (0..len).map(|_| self.f64()).collect::<Result<_>>()?;
        Ok(DMatrix::from_vec(r, c, data))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.len(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| SmashError::Format(e.to_string()))
    }
}

fn write_tree(w: &mut Writer, t: &ClusterTree) {
    w.u64(t.dim());
    w.u64(t.leaf_capacity());
    w.u8(match t.branching() {
        Branching::Alternating => 0,
        Branching::Full => 1,
    });
    w.indices(t.row_perm());
    w.indices(t.col_perm());
    w.u64(t.len());
    for node in t.nodes() {
        w.u64(node.parent.map_or(0, |p| p + 1));
        w.u64(node.level);
        w.indices(&node.children);
        w.floats(&node.bbox.lo);
        w.floats(&node.bbox.hi);
        for x in [node.rows.start, node.rows.end, node.cols.start, node.cols.end] {
            w.u64(x);
        }
    }
}

fn read_tree(r: &mut Reader) -> Result<ClusterTree> {
    let dim = r.u64()?;
    let cap = r.u64()?;
    let branching = match r.u8()? {
        0 => Branching::Alternating,
        1 => Branching::Full,
        b => return Err(SmashError::Format(format!("branching tag {b}"))),
    };
    let row_perm = r.indices()?;
    let col_perm = r.indices()?;
    let n = r.len(8)?;
    let mut nodes = Vec::with_capacity(n);
    for id in 0..n {
        let parent = r.u64()?.checked_sub(1);
        let level = r.u64()?;
        let children = r.indices()?;
        let lo = r.floats()?;
        let hi = r.floats()?;
        if lo.len() != hi.len() {
            return Err(SmashError::Format(format!("node {id} box corners differ in dimension")));
        }
        let (rs, re, cs, ce) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
        if rs > re || cs > ce {
            return Err(SmashError::Format(format!("node {id} has an inverted range")));
        }
        nodes.push(ClusterNode { id, parent, children, level, bbox: BoundingBox { lo, hi }, rows: rs..re, cols: cs..ce });
    }
    ClusterTree::from_parts(nodes, row_perm, col_perm, cap, branching, dim)
}

fn write_basis(w: &mut Writer, b: &Option<Basis>) {
    match b {
        None => w.u8(0),
        Some(Basis::Interp(f)) => {
            w.u8(1);
            w.indices(&f.index);
            w.indices(&f.skeleton);
            w.indices(&f.redundant);
            w.matrix(&f.g);
        }
        Some(Basis::Dense(m)) => {
            w.u8(2);
            w.matrix(m);
        }
    }
}

fn read_basis(r: &mut Reader) -> Result<Option<Basis>> {
    Ok(match r.u8()? {
        0 => None,
        1 => {
            let f = InterpolativeFactor { index: r.indices()?, skeleton: r.indices()?, redundant: r.indices()?, g: r.matrix()? };
            let n = f.index.len();
            let mut seen = vec![false; n];
            let ok = f.skeleton.len() + f.redundant.len() == n
                && f.g.shape() == (f.redundant.len(), f.skeleton.len())
                && f.skeleton.iter().chain(&f.redundant).all(|&p| p < n && !std::mem::replace(&mut seen[p], true));
            if !ok {
                return Err(SmashError::Format("inconsistent interpolative basis".into()));
            }
            Some(Basis::Interp(f))
        }
        2 => Some(Basis::Dense(r.matrix()?)),
        t => return Err(SmashError::Format(format!("basis tag {t}"))),
    })
}

fn write_block(w: &mut Writer, b: &Block) {
    match b {
        Block::Indexed { source, rows, cols } => {
            w.u8(0);
            w.u64(*source);
            w.indices(rows);
            w.indices(cols);
        }
        Block::Dense(m) => {
            w.u8(1);
            w.matrix(m);
        }
        Block::BlockDiag(parts) | Block::Sum(parts) => {
            w.u8(if matches!(b, Block::BlockDiag(_)) { 2 } else { 3 });
            w.u64(parts.len());
            parts.iter().for_each(|p| write_block(w, p));
        }
    }
}

fn read_block(r: &mut Reader, sources: &[SharedKernel], depth: usize) -> Result<Block> {
    if depth > 64 {
        return Err(SmashError::Format("blocks nested too deeply".into()));
    }
    Ok(match r.u8()? {
        0 => {
            let source = r.u64()?;
            let (rows, cols) = (r.indices()?, r.indices()?);
            let k = sources.get(source).ok_or_else(|| SmashError::Format(format!("source {source} missing")))?;
            if rows.iter().any(|&i| i >= k.nrows()) || cols.iter().any(|&j| j >= k.ncols()) {
                return Err(SmashError::Format("block index outside the kernel".into()));
            }
            Block::Indexed { source, rows, cols }
        }
        1 => Block::Dense(r.matrix()?),
        t @ (2 | 3) => {
            let n = r.len(1)?;
            let parts = (0..n).map(|_| read_block(r, sources, depth + 1)).collect::<Result<Vec<_>>>()?;
            if t == 2 {
                Block::BlockDiag(parts)
            } else {
                let shape = parts.first().map(Block::shape);
                if parts.iter().any(|p| Some(p.shape()) != shape) {
                    return Err(SmashError::Format("summands differ in shape".into()));
                }
                Block::Sum(parts)
            }
        }
        t => return Err(SmashError::Format(format!("block tag {t}"))),
    })
}

fn write_entries(w: &mut Writer, entries: &[BlockEntry]) {
    w.u64(entries.len());
    for e in entries {
        w.u64(e.row);
        w.u64(e.col);
        write_block(w, &e.block);
    }
}

fn read_entries(r: &mut Reader, sources: &[SharedKernel], nodes: usize) -> Result<Vec<BlockEntry>> {
    let n = r.len(17)?;
    (0..n)
        .map(|_| {
            let (row, col) = (r.u64()?, r.u64()?);
            if row >= nodes || col >= nodes {
                return Err(SmashError::Format("block refers to a missing node".into()));
            }
            Ok(BlockEntry::new(row, col, read_block(r, sources, 0)?))
        })
        .collect()
}

fn write_params(w: &mut Writer, order: usize, levels: &[usize], tau: f64, svd_tol: f64, s: f64, rank_tol: f64, cap: usize) {
    w.u64(order);
    w.indices(levels);
    for x in [tau, svd_tol, s, rank_tol] {
        w.f64(x);
    }
    w.u64(cap);
}

/// Serializes `m` (HSS or H²) into the container format.
pub fn encode_matrix(m: &StoredMatrix) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    match m {
        StoredMatrix::Hss(h) => {
            w.u8(0);
            let p = h.params();
            write_params(&mut w, p.order, &p.level_orders, p.tau, p.svd_tol, p.s, p.rank_tol, p.leaf_capacity);
        }
        StoredMatrix::H2(h) => {
            w.u8(1);
            let p = h.params();
            write_params(&mut w, p.order, &p.level_orders, p.tau, 0.0, p.s, p.rank_tol, p.leaf_capacity);
        }
    }
    let h = m.as_hier();
    w.u64(h.sources.len());
    for k in &h.sources {
        w.u64(k.nrows());
        w.u64(k.ncols());
        w.string(&k.name());
    }
    write_tree(&mut w, &h.tree);
    for i in 0..h.tree.len() {
        write_basis(&mut w, &h.row_bases[i]);
        write_basis(&mut w, &h.col_bases[i]);
        w.indices(&h.row_skeletons[i]);
        w.indices(&h.col_skeletons[i]);
    }
    write_entries(&mut w, &h.couplings);
    write_entries(&mut w, &h.nearfield);
    w.0
}

/// Restores a matrix written by [`encode_matrix`]. `kernels` must match the
/// stored kernel shapes and names, in order.
pub fn decode_matrix(bytes: &[u8], kernels: &[SharedKernel]) -> Result<StoredMatrix> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(SmashError::Format("not a compressed matrix file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(SmashError::Format(format!("unsupported version {version}")));
    }
    let kind = match r.u8()? {
        0 => Structure::Hss,
        1 => Structure::H2,
        t => return Err(SmashError::Format(format!("structure tag {t}"))),
    };
    let order = r.u64()?;
    let level_orders = r.indices()?;
    let (tau, svd_tol, s, rank_tol) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let leaf_capacity = r.u64()?;

    let nsrc = r.len(16)?;
    if nsrc != kernels.len() {
        return Err(SmashError::Format(format!("file needs {nsrc} kernels, {} given", kernels.len())));
    }
    for k in kernels {
        let (rows, cols, name) = (r.u64()?, r.u64()?, r.string()?);
        if (rows, cols) != (k.nrows(), k.ncols()) || name != k.name() {
            return Err(SmashError::Format(format!("kernel `{}` does not match stored `{name}`", k.name())));
        }
    }
    let tree = Arc::new(read_tree(&mut r)?);
    let n = tree.len();
    let (mut rb, mut cb, mut rs, mut cs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        rb.push(read_basis(&mut r)?);
        cb.push(read_basis(&mut r)?);
        rs.push(r.indices()?);
        cs.push(r.indices()?);
    }
    let couplings = read_entries(&mut r, kernels, n)?;
    let nearfield = read_entries(&mut r, kernels, n)?;
    if r.pos != bytes.len() {
        return Err(SmashError::Format("trailing data".into()));
    }
    let inner = HierMatrix::from_parts(kind, tree, kernels.to_vec(), rb, cb, rs, cs, couplings, nearfield)?;
    Ok(match kind {
        Structure::Hss => {
            let params = HssParams { order, level_orders, tau, svd_tol, s, rank_tol, leaf_capacity };
            StoredMatrix::Hss(HssMatrix::from_hier(inner, params)?)
        }
        Structure::H2 => {
            let params = H2Params { order, level_orders, tau, s, rank_tol, leaf_capacity };
            StoredMatrix::H2(H2Matrix::from_hier(inner, params, tau)?)
        }
    })
}

pub fn write_matrix(out: &mut impl Write, m: &StoredMatrix) -> Result<()> {
    out.write_all(&encode_matrix(m))?;
    Ok(())
}

pub fn read_matrix(input: &mut impl Read, kernels: &[SharedKernel]) -> Result<StoredMatrix> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    decode_matrix(&buf, kernels)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &StoredMatrix) -> Result<()> {
    fs::write(path, encode_matrix(m))?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>, kernels: &[SharedKernel]) -> Result<StoredMatrix> {
    decode_matrix(&fs::read(path)?, kernels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{PointSet, Role};
    use crate::kernel::{cauchy_points, grid_points, CauchyMatrix, Curve, Geometry};
    use num_complex::Complex64;

    fn interval(n: usize) -> SharedKernel {
        let (x, y) = cauchy_points(Geometry::Curve(Curve::Interval), n, 3).unwrap();
        Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0)).unwrap())
    }

    #[test]
    fn hss_round_trip_is_bit_exact() {
        let k = interval(300);
        let h = HssMatrix::from_kernel(k.clone(), &HssParams { leaf_capacity: 20, ..Default::default() }).unwrap();
        let stored = StoredMatrix::Hss(h);
        let bytes = encode_matrix(&stored);
        let back = decode_matrix(&bytes, &[k]).unwrap();
        assert_eq!(encode_matrix(&back), bytes);
        let (a, b) = (stored.as_hier().to_dense(usize::MAX).unwrap(), back.as_hier().to_dense(usize::MAX).unwrap());
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn h2_round_trip_keeps_kind() {
        let p = grid_points(12, Role::Target).unwrap();
        let q = PointSet::new(2, p.iter().flatten().copied().collect(), Role::Source).unwrap();
        let k: SharedKernel = Arc::new(CauchyMatrix::new(&p, &q, Complex64::new(1.0, 0.0)).unwrap());
        let h = H2Matrix::from_kernel(k.clone(), &H2Params { leaf_capacity: 10, ..Default::default() }).unwrap();
        let bytes = encode_matrix(&StoredMatrix::H2(h));
        assert!(matches!(decode_matrix(&bytes, &[k]).unwrap(), StoredMatrix::H2(_)));
    }

    #[test]
    fn corrupt_data_is_rejected() {
        let k = interval(100);
        let h = HssMatrix::from_kernel(k.clone(), &HssParams { leaf_capacity: 20, ..Default::default() }).unwrap();
        let bytes = encode_matrix(&StoredMatrix::Hss(h));
        assert!(decode_matrix(&bytes[..bytes.len() - 3], &[k.clone()]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_matrix(&bad, &[k.clone()]).is_err());
        assert!(decode_matrix(&bytes, &[interval(101)]).is_err());
        assert!(decode_matrix(&bytes, &[]).is_err());
    }

    #[test]
    fn vectors_round_trip() {
        let v = vec![1.5, -0.0, 1e-300, f64::MAX];
        assert_eq!(decode_vector(&encode_vector(&v)).unwrap(), v);
        assert_eq!(parse_vector(&format_vector(&v)).unwrap(), v);
        assert!(decode_vector(&[0u8; 7]).is_err());
        assert!(parse_vector("1\nx\n").is_err());
    }
}
