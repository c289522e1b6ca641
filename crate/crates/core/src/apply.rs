//! Matrix-vector products with nested-basis representations and the ULV
//! direct solver for HSS matrices.
//!
//! Vectors are always in the caller's ordering of rows and columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SmashError};
use crate::generators::{dense_mul, dense_mul_t, Basis, HierMatrix};
use crate::hss::HssMatrix;
use crate::kernel::KernelMatrix;
use crate::lowrank::full_qr;

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SmashError::DimensionMismatch { expected, got })
    }
}

fn basis(b: &Option<Basis>) -> &Basis {
    b.as_ref().expect("nonroot node has a basis")
}

/// `z = Âq` by an upward pass over the column bases, the coupling
/// products, a downward pass over the row bases and the nearfield blocks.
/// Works on any tree.
pub fn matvec_nodewise(m: &HierMatrix, q: &[f64]) -> Result<Vec<f64>> {
    check_len(m.ncols(), q.len())?;
    let t = m.tree();
    let root = t.root();
    let n = t.len();
    let mut qhat: Vec<Vec<f64>> = vec![Vec::new(); n];
    // postorder ids: children before parents
    for i in 0..n {
        if i == root {
            continue;
        }
        let node = t.node(i);
        let x: Vec<f64> = if node.is_leaf() {
            t.col_indices(i).iter().map(|&j| q[j]).collect()
        } else {
            node.children.iter().flat_map(|&c| qhat[c].iter().copied()).collect()
        };
        qhat[i] = basis(&m.col_bases[i]).apply_t(&x);
    }

    let mut zhat: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; m.row_rank(i)]).collect();
    for e in m.couplings() {
        e.apply_add(m.sources(), &qhat[e.col], &mut zhat[e.row]);
    }

    let mut z = vec![0.0; m.nrows()];
    for i in (0..n).rev() {
        if i == root {
            continue;
        }
        let node = t.node(i);
        let y = basis(&m.row_bases[i]).apply(&zhat[i]);
        if node.is_leaf() {
            for (a, &r) in t.row_indices(i).iter().enumerate() {
                z[r] += y[a];
            }
        } else {
            let mut off = 0;
            for &c in &node.children {
                let k = zhat[c].len();
                for (dst, src) in zhat[c].iter_mut().zip(&y[off..off + k]) {
                    *dst += src;
                }
                off += k;
            }
        }
    }

    for e in m.nearfield() {
        let x: Vec<f64> = t.col_indices(e.col).iter().map(|&j| q[j]).collect();
        let mut y = vec![0.0; t.node(e.row).rows.len()];
        e.apply_add(m.sources(), &x, &mut y);
        for (a, &r) in t.row_indices(e.row).iter().enumerate() {
            z[r] += y[a];
        }
    }
    Ok(z)
}

/// Level-by-level evaluation of the telescoping product. The tree must be
/// perfect, so that every coupling links two nodes on the same level.
pub fn matvec_levelwise(m: &HierMatrix, q: &[f64]) -> Result<Vec<f64>> {
    check_len(m.ncols(), q.len())?;
    let t = m.tree();
    if !t.is_perfect() {
        return Err(SmashError::Unsupported("level-wise product needs a perfect tree".into()));
    }
    if m.couplings().iter().any(|e| t.node(e.row).level != t.node(e.col).level) {
        return Err(SmashError::Unsupported("coupling across levels".into()));
    }
    let depth = t.num_levels();
    let n = t.len();

    // offsets of each node inside its level buffer
    let mut row_off = vec![0; n];
    let mut col_off = vec![0; n];
    let mut row_len = vec![0; depth + 1];
    let mut col_len = vec![0; depth + 1];
    for l in 2..=depth {
        for &i in t.level(l) {
            row_off[i] = row_len[l];
            col_off[i] = col_len[l];
            row_len[l] += m.row_rank(i);
            col_len[l] += m.col_rank(i);
        }
    }

    // q̂^(l) = (V^(l))ᵀ q̂^(l+1), with q̂^(L+1) = q
    let mut qhat: Vec<Vec<f64>> = (0..=depth).map(|l| vec![0.0; col_len[l]]).collect();
    for l in (2..=depth).rev() {
        for &i in t.level(l) {
            let node = t.node(i);
            let x: Vec<f64> = if l == depth {
                t.col_indices(i).iter().map(|&j| q[j]).collect()
            } else {
                node.children.iter().flat_map(|&c| qhat[l + 1][col_off[c]..col_off[c] + m.col_rank(c)].to_vec()).collect()
            };
            let y = basis(&m.col_bases[i]).apply_t(&x);
            qhat[l][col_off[i]..col_off[i] + y.len()].copy_from_slice(&y);
        }
    }

    // ẑ^(l) = B^(l-1) q̂^(l)
    let mut zhat: Vec<Vec<f64>> = (0..=depth).map(|l| vec![0.0; row_len[l]]).collect();
    for e in m.couplings() {
        let l = t.node(e.row).level;
        let x = &qhat[l][col_off[e.col]..col_off[e.col] + m.col_rank(e.col)];
        let (r0, r1) = (row_off[e.row], row_off[e.row] + m.row_rank(e.row));
        e.apply_add(m.sources(), x, &mut zhat[l][r0..r1]);
    }

    // z = B^(L) q + U^(L)(... U^(3)(U^(2) ẑ^(2) + ẑ^(3)) ... + ẑ^(L))
    let mut z = vec![0.0; m.nrows()];
    for l in 2..=depth {
        for &i in t.level(l) {
            let k = m.row_rank(i);
            let y = basis(&m.row_bases[i]).apply(&zhat[l][row_off[i]..row_off[i] + k]);
            let node = t.node(i);
            if l == depth {
                for (a, &r) in t.row_indices(i).iter().enumerate() {
                    z[r] += y[a];
                }
            } else {
                let mut off = 0;
                for &c in &node.children {
                    let kc = m.row_rank(c);
                    for (dst, src) in zhat[l + 1][row_off[c]..row_off[c] + kc].iter_mut().zip(&y[off..off + kc]) {
                        *dst += src;
                    }
                    off += kc;
                }
            }
        }
    }
    for e in m.nearfield() {
        let x: Vec<f64> = t.col_indices(e.col).iter().map(|&j| q[j]).collect();
        let mut y = vec![0.0; t.node(e.row).rows.len()];
        e.apply_add(m.sources(), &x, &mut y);
        for (a, &r) in t.row_indices(e.row).iter().enumerate() {
            z[r] += y[a];
        }
    }
    Ok(z)
}

/// Exact `Aq`, one kernel row at a time, without storing `A`.
pub fn matvec_dense(kernel: &dyn KernelMatrix, q: &[f64]) -> Result<Vec<f64>> {
    check_len(kernel.ncols(), q.len())?;
    Ok((0..kernel.nrows()).map(|i| q.iter().enumerate().map(|(j, &x)| kernel.entry(i, j) * x).sum()).collect())
}

/// Floating point operations of one [`matvec_nodewise`] call.
pub fn matvec_flops(m: &HierMatrix) -> usize {
    let basis_cost = |b: &Basis| match b {
        Basis::Interp(f) => 2 * f.g.len() + f.len(),
        Basis::Dense(d) => 2 * d.len(),
    };
    let bases: usize = m.row_bases.iter().chain(&m.col_bases).flatten().map(basis_cost).sum();
    let blocks: usize = m.couplings().iter().chain(m.nearfield()).map(|e| 2 * e.block.shape().0 * e.block.shape().1).sum();
    bases + blocks
}

/// Relative 2-norm distance `‖a - b‖ / ‖b‖`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Debug, Clone)]
struct UlvNode {
    /// Row rotation; its first `elim` rows are free of off-diagonal coupling.
    qt: DMatrix<f64>,
    /// Column rotation.
    p: DMatrix<f64>,
    elim: usize,
    /// `elim × elim` lower triangular pivot block.
    l: DMatrix<f64>,
    /// Reduced rows against the eliminated columns.
    e1: DMatrix<f64>,
    /// Eliminated rows of the rotated column basis.
    v1: DMatrix<f64>,
    /// Remaining (row, column) counts after elimination.
    reduced: (usize, usize),
}

/// ULV factorization of an HSS matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct UlvFactor {
    nodes: Vec<Option<UlvNode>>,
    /// Column transfers `W` per node (rows split by children).
    transfers: Vec<Option<DMatrix<f64>>>,
    /// `u_red_a · B_ab` for each coupled pair, keyed by row node.
    couplings: Vec<Vec<(usize, DMatrix<f64>)>>,
    root_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    tree: std::sync::Arc<crate::cluster::ClusterTree>,
    nrows: usize,
}

struct Reduced {
    d: DMatrix<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

fn hcat_rows(blocks: &[DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        out.rows_mut(r0, b.nrows()).copy_from(b);
        r0 += b.nrows();
    }
    out
}

const PIVOT_TOL: f64 = 1e-13;

/// Factors `h` bottom up: at each node the rows outside the range of the
/// row basis are rotated to the top and eliminated against an LQ pivot
/// block, and the remaining rows and columns are merged into the parent.
pub fn ulv_factor(h: &HssMatrix) -> Result<UlvFactor> {
    let t = h.shared_tree();
    let n = t.len();
    let root = t.root();
    if h.nrows() != h.ncols() {
        return Err(SmashError::invalid("ULV needs a square matrix"));
    }
    let coupling_map = h.coupling_map();
    let mut reduced: Vec<Option<Reduced>> = (0..n).map(|_| None).collect();
    let mut nodes: Vec<Option<UlvNode>> = vec![None; n];
    let mut transfers: Vec<Option<DMatrix<f64>>> = vec![None; n];
    let mut couplings: Vec<Vec<(usize, DMatrix<f64>)>> = vec![Vec::new(); n];
    let mut root_lu = None;

    for i in 0..n {
        let node = t.node(i);
        let (d, u, v) = if node.is_leaf() {
            let e = h
                .nearfield()
                .iter()
                .find(|e| e.row == i && e.col == i)
                .ok_or_else(|| SmashError::TreeMismatch(format!("leaf {i} has no diagonal block")))?;
            let d = e.to_dense(h.sources());
            let u = h.row_basis(i).map(Basis::to_dense);
            let v = h.col_basis(i).map(Basis::to_dense);
            (d, u, v)
        } else {
            let kids = &node.children;
            let parts: Vec<Reduced> = kids.iter().map(|&c| reduced[c].take().expect("child reduced")).collect();
            let rows: usize = parts.iter().map(|p| p.d.nrows()).sum();
            let cols: usize = parts.iter().map(|p| p.d.ncols()).sum();
            let mut d = DMatrix::zeros(rows, cols);
            let mut r0 = 0;
            for (a, pa) in kids.iter().zip(&parts) {
                let mut c0 = 0;
                for (b, pb) in kids.iter().zip(&parts) {
                    if a == b {
                        d.view_mut((r0, c0), pa.d.shape()).copy_from(&pa.d);
                    } else if let Some(e) = coupling_map.get(&(*a, *b)) {
                        let ub = &pa.u * e.to_dense(h.sources());
                        d.view_mut((r0, c0), (pa.d.nrows(), pb.d.ncols())).copy_from(&(&ub * pb.v.transpose()));
                        couplings[*a].push((*b, ub));
                    }
                    c0 += pb.d.ncols();
                }
                r0 += pa.d.nrows();
            }
            let (u, v) = if i == root {
                (None, None)
            } else {
                let r = h.row_basis(i).map(Basis::to_dense).expect("basis");
                let w = h.col_basis(i).map(Basis::to_dense).expect("basis");
                let (mut ru, mut rv) = (Vec::new(), Vec::new());
                let (mut o_r, mut o_w) = (0, 0);
                for (&c, p) in kids.iter().zip(&parts) {
                    let (kr, kc) = (h.row_rank(c), h.col_rank(c));
                    ru.push(&p.u * r.rows(o_r, kr));
                    rv.push(&p.v * w.rows(o_w, kc));
                    o_r += kr;
                    o_w += kc;
                }
                (Some(hcat_rows(&ru, r.ncols())), Some(hcat_rows(&rv, w.ncols())))
            };
            (d, u, v)
        };
        if !node.is_leaf() && i != root {
            let w = h.col_basis(i).map(Basis::to_dense).expect("basis");
            transfers[i] = Some(w);
        }

        if i == root {
            if d.nrows() != d.ncols() {
                return Err(SmashError::SingularPivot { node: i });
            }
            let scale = d.norm();
            let lu = d.lu();
            let umat = lu.u();
            let tiny = (0..umat.nrows()).any(|k| !(umat[(k, k)].abs() > PIVOT_TOL * scale));
            if tiny && umat.nrows() > 0 {
                return Err(SmashError::SingularPivot { node: i });
            }
            root_lu = Some(lu);
            break;
        }

        let u = u.expect("nonroot basis");
        let v = v.expect("nonroot basis");
        let (mr, mc) = d.shape();
        let kr = u.ncols();
        let (qt, elim) = if mr > kr {
            let (q, _) = full_qr(&u);
            // range of U goes last so the first mr - kr rotated rows vanish
            let mut qp = DMatrix::zeros(mr, mr);
            qp.columns_mut(0, mr - kr).copy_from(&q.columns(kr, mr - kr));
            qp.columns_mut(mr - kr, kr).copy_from(&q.columns(0, kr));
            (qp.transpose(), mr - kr)
        } else {
            (DMatrix::identity(mr, mr), 0)
        };
        if elim > mc {
            return Err(SmashError::SingularPivot { node: i });
        }
        let dh = &qt * &d;
        let top = dh.rows(0, elim).into_owned();
        let (p, l) = if elim > 0 {
            let (p, rt) = full_qr(&top.transpose());
            let l = rt.rows(0, elim).transpose();
            let scale = d.norm();
            if (0..elim).any(|k| !(l[(k, k)].abs() > PIVOT_TOL * scale)) {
                return Err(SmashError::SingularPivot { node: i });
            }
            (p, l)
        } else {
            (DMatrix::identity(mc, mc), DMatrix::zeros(0, 0))
        };
        let bottom = dh.rows(elim, mr - elim) * &p;
        let vh = p.transpose() * &v;
        let uh = (&qt * &u).rows(elim, mr - elim).into_owned();
        let red = Reduced { d: bottom.columns(elim, mc - elim).into_owned(), u: uh, v: vh.rows(elim, mc - elim).into_owned() };
        nodes[i] = Some(UlvNode {
            qt,
            p,
            elim,
            l,
            e1: bottom.columns(0, elim).into_owned(),
            v1: vh.rows(0, elim).into_owned(),
            reduced: (mr - elim, mc - elim),
        });
        reduced[i] = Some(red);
    }
    let root_lu = root_lu.ok_or_else(|| SmashError::TreeMismatch("root not reached".into()))?;
    Ok(UlvFactor { nodes, transfers, couplings, root_lu, tree: t, nrows: h.nrows() })
}

impl UlvFactor {
    /// Solves `Âx = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.nrows, b.len())?;
        let t = &self.tree;
        let n = t.len();
        let root = t.root();
        let mut btil: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut what: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut y1: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut root_y = Vec::new();

        for i in 0..n {
            let node = t.node(i);
            let (bi, wsum) = if node.is_leaf() {
                (t.row_indices(i).iter().map(|&r| b[r]).collect::<Vec<f64>>(), None)
            } else {
                let mut rhs = Vec::new();
                for &a in &node.children {
                    let mut part = btil[a].clone();
                    for (bnode, ub) in &self.couplings[a] {
                        let corr = dense_mul(ub, &what[*bnode]);
                        for (x, c) in part.iter_mut().zip(&corr) {
                            *x -= c;
                        }
                    }
                    rhs.extend(part);
                }
                let wsum = self.transfers[i].as_ref().map(|w| {
                    let mut acc = vec![0.0; w.ncols()];
                    let mut off = 0;
                    for &c in &node.children {
                        let kc = what[c].len();
                        let part = dense_mul_t(&w.rows(off, kc).into_owned(), &what[c]);
                        for (x, p) in acc.iter_mut().zip(&part) {
                            *x += p;
                        }
                        off += kc;
                    }
                    acc
                });
                (rhs, wsum)
            };
            if i == root {
                if !bi.is_empty() {
                    let x = self.root_lu.solve(&DVector::from_vec(bi)).ok_or(SmashError::SingularPivot { node: i })?;
                    root_y = x.as_slice().to_vec();
                }
                break;
            }
            let f = self.nodes[i].as_ref().expect("factored node");
            let bh = dense_mul(&f.qt, &bi);
            let z = if f.elim > 0 {
                let rhs = DVector::from_column_slice(&bh[..f.elim]);
                f.l.solve_lower_triangular(&rhs).ok_or(SmashError::SingularPivot { node: i })?.as_slice().to_vec()
            } else {
                Vec::new()
            };
            let corr = dense_mul(&f.e1, &z);
            btil[i] = bh[f.elim..].iter().zip(&corr).map(|(x, c)| x - c).collect();
            let mut w = dense_mul_t(&f.v1, &z);
            if let Some(ws) = wsum {
                for (x, s) in w.iter_mut().zip(&ws) {
                    *x += s;
                }
            }
            what[i] = w;
            y1[i] = z;
        }

        let mut x = vec![0.0; self.nrows];
        let mut y2: Vec<Vec<f64>> = vec![Vec::new(); n];
        for i in (0..n).rev() {
            let node = t.node(i);
            let local = if i == root {
                root_y.clone()
            } else {
                let f = self.nodes[i].as_ref().expect("factored node");
                let mut full = y1[i].clone();
                full.extend(&y2[i]);
                dense_mul(&f.p, &full)
            };
            if node.is_leaf() {
                for (a, &c) in t.col_indices(i).iter().enumerate() {
                    x[c] = local[a];
                }
            } else {
                let mut off = 0;
                for &c in &node.children {
                    let k = self.nodes[c].as_ref().expect("factored child").reduced.1;
                    y2[c] = local[off..off + k].to_vec();
                    off += k;
                }
            }
        }
        Ok(x)
    }
}

pub fn ulv_solve(f: &UlvFactor, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::h2::{H2Matrix, H2Params};
    use crate::hss::HssParams;
    use crate::kernel::{assemble_dense, cauchy_points, grid_points, CauchyMatrix, Curve, Geometry, SharedKernel};
    use crate::cluster::{PointSet, Role};
    use num_complex::Complex64;
    use std::sync::Arc;

    fn cauchy(geometry: Geometry, n: usize) -> SharedKernel {
        let (x, y) = cauchy_points(geometry, n, 3).unwrap();
        Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(1.0, 0.0)).unwrap())
    }

    fn test_vector(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.3).collect()
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let h = HssMatrix::from_kernel(cauchy(Geometry::Curve(Curve::Interval), 300), &HssParams::default()).unwrap();
        assert!(matvec_nodewise(&h, &vec![0.0; 300]).unwrap().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn hss_matvec_matches_dense() {
        let k = cauchy(Geometry::Curve(Curve::Interval), 512);
        let h = HssMatrix::from_kernel(k.clone(), &HssParams::default()).unwrap();
        let q = test_vector(512);
        let exact = matvec_dense(k.as_ref(), &q).unwrap();
        let got = matvec_nodewise(&h, &q).unwrap();
        assert!(relative_error(&got, &exact) < 1e-8);
        let dense = h.to_dense(usize::MAX).unwrap();
        let via = dense_mul(&dense, &q);
        assert!(relative_error(&got, &via) < 1e-12);
    }

    #[test]
    fn levelwise_agrees_on_perfect_quadtree() {
        let p = grid_points(16, Role::Target).unwrap();
        let y = PointSet::new(2, p.iter().flatten().copied().collect(), Role::Source).unwrap();
        let k: SharedKernel = Arc::new(CauchyMatrix::new(&p, &y, Complex64::new(1.0, 0.0)).unwrap());
        let h = H2Matrix::from_kernel(k, &H2Params { leaf_capacity: 16, ..Default::default() }).unwrap();
        assert!(h.tree().is_perfect());
        let q = test_vector(512);
        let a = matvec_nodewise(&h, &q).unwrap();
        let b = matvec_levelwise(&h, &q).unwrap();
        assert!(relative_error(&b, &a) <= 1e-14);
    }

    #[test]
    fn levelwise_rejects_imperfect_trees() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 / 40.0).powi(3)).collect();
        let p = PointSet::from_1d(&xs, Role::Target).unwrap();
        let k: SharedKernel = Arc::new(CauchyMatrix::new(&p, &p, Complex64::new(1.0, 0.0)).unwrap());
        let h = HssMatrix::from_kernel(k, &HssParams { leaf_capacity: 4, ..Default::default() }).unwrap();
        assert!(!h.tree().is_perfect());
        assert!(matches!(matvec_levelwise(&h, &vec![1.0; 40]), Err(SmashError::Unsupported(_))));
    }

    #[test]
    fn ulv_solves_interval_system() {
        let k = cauchy(Geometry::Curve(Curve::Interval), 600);
        let h = HssMatrix::from_kernel(k, &HssParams::default()).unwrap();
        let f = ulv_factor(&h).unwrap();
        let b = test_vector(600);
        let x = f.solve(&b).unwrap();
        let r = matvec_nodewise(&h, &x).unwrap();
        assert!(relative_error(&r, &b) < 1e-10, "{:e}", relative_error(&r, &b));
    }

    #[test]
    fn ulv_solves_complex_system() {
        let k = cauchy(Geometry::Curve(Curve::Honeybee), 400);
        let h = HssMatrix::from_kernel(k, &HssParams::default()).unwrap();
        let f = ulv_factor(&h).unwrap();
        let b = test_vector(800);
        let x = f.solve(&b).unwrap();
        let r = matvec_nodewise(&h, &x).unwrap();
        assert!(relative_error(&r, &b) < 1e-10, "{:e}", relative_error(&r, &b));
    }

    #[test]
    fn ulv_on_identity_returns_rhs() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let p = PointSet::from_1d(&xs, Role::Target).unwrap();
        let k: SharedKernel = Arc::new(crate::kernel::SmoothKernel::new("id", p.clone(), p, |x, y| {
            if x[0] == y[0] {
                1.0
            } else {
                0.0
            }
        }));
        let h = HssMatrix::from_kernel(k.clone(), &HssParams { leaf_capacity: 8, order: 3, ..Default::default() }).unwrap();
        let a = assemble_dense(k.as_ref(), usize::MAX).unwrap();
        assert_eq!(a, DMatrix::identity(64, 64));
        let b = test_vector(64);
        let x = ulv_factor(&h).unwrap().solve(&b).unwrap();
        assert!(relative_error(&x, &b) < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let p = PointSet::from_1d(&xs, Role::Target).unwrap();
        let k: SharedKernel = Arc::new(crate::kernel::SmoothKernel::new("ones", p.clone(), p, |_, _| 1.0));
        let h = HssMatrix::from_kernel(k, &HssParams { leaf_capacity: 8, order: 3, ..Default::default() }).unwrap();
        assert!(matches!(ulv_factor(&h), Err(SmashError::SingularPivot { .. })));
    }
}
