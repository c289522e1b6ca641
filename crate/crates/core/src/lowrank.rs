//! Farfield expansions and rank-revealing factorizations.
//!
//! * scaled Taylor expansion of `1/(x - y)` between two separated cells,
//! * Chebyshev interpolation bases on boxes and Lagrange bases on discs,
//! * strong rank-revealing QR and the interpolative decomposition built on it,
//! * truncated SVD.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cluster::{well_separated, BoundingBox};
use crate::error::{Result, SmashError};

/// Default bound on the entries of `R11^{-1} R12`.
pub const DEFAULT_S: f64 = 2.0;

/// Pivots below this fraction of the leading one count as zero.
pub const RANK_FLOOR: f64 = 1e-14;

pub type CMatrix = DMatrix<Complex64>;

/// Center of a 1D or 2D cell as a complex number.
pub fn complex_center(cell: &BoundingBox) -> Complex64 {
    let c = cell.center();
    Complex64::new(c[0], c.get(1).copied().unwrap_or(0.0))
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|m| (m as f64).ln()).sum()
}

/// Degenerate expansion of `1/(x - y)` for `x` near `a` and `y` near `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorExpansion {
    pub order: usize,
    pub a: Complex64,
    pub b: Complex64,
    pub delta_a: f64,
    pub delta_b: f64,
}

impl TaylorExpansion {
    pub fn new(a: Complex64, delta_a: f64, b: Complex64, delta_b: f64, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(SmashError::invalid("expansion order must be positive"));
        }
        if a == b {
            return Err(SmashError::invalid("expansion centers coincide"));
        }
        if !(delta_a > 0.0 && delta_b > 0.0) {
            return Err(SmashError::invalid("cell radii must be positive"));
        }
        Ok(TaylorExpansion { order, a, b, delta_a, delta_b })
    }

    /// `ln η_{v,l}` for a cell of radius `delta`.
    pub fn ln_eta(delta: f64, l: usize, order: usize) -> f64 {
        if l == 0 {
            return 0.0;
        }
        let r = order as f64;
        let l = l as f64;
        l * (l.ln() - 1.0 + (2.0 * std::f64::consts::PI * r).ln() / (2.0 * r) - delta.ln())
    }

    pub fn eta(delta: f64, l: usize, order: usize) -> f64 {
        Self::ln_eta(delta, l, order).exp()
    }

    /// `[φ_l(z)]_{l < order}` with `φ_l(z) = η_l z^l / l!`.
    pub fn scaled_monomials(z: Complex64, delta: f64, order: usize) -> Vec<Complex64> {
        let scale = (2.0 * std::f64::consts::PI * order as f64).ln() / (2.0 * order as f64);
        let c = scale.exp() / (std::f64::consts::E * delta);
        let mut out = Vec::with_capacity(order);
        out.push(Complex64::new(1.0, 0.0));
        for l in 1..order {
            let w = z * (c * l as f64);
            let mut p = Complex64::new(1.0, 0.0);
            for m in 1..=l {
                p *= w / m as f64;
            }
            out.push(p);
        }
        out
    }

    pub fn row(&self, x: Complex64) -> Vec<Complex64> {
        Self::scaled_monomials(x - self.a, self.delta_a, self.order)
    }

    pub fn col(&self, y: Complex64) -> Vec<Complex64> {
        Self::scaled_monomials(y - self.b, self.delta_b, self.order)
    }

    /// Coefficient `c_{k,l}`; zero when `l > k`.
    pub fn coefficient(&self, k: usize, l: usize) -> Complex64 {
        if l > k {
            return Complex64::new(0.0, 0.0);
        }
        let mag = ln_factorial(k)
            - Self::ln_eta(self.delta_a, l, self.order)
            - Self::ln_eta(self.delta_b, k - l, self.order);
        let val = (Complex64::new(mag, 0.0) - (self.b - self.a).ln() * (k + 1) as f64).exp();
        if (k - l) % 2 == 0 {
            -val
        } else {
            val
        }
    }

    /// `order × order` coupling with entry `(l, m) = c_{l+m, l}` on and above
    /// the anti-diagonal `l + m < order`.
    pub fn coupling(&self) -> CMatrix {
        let r = self.order;
        CMatrix::from_fn(r, r, |l, m| {
            if l + m < r {
                self.coefficient(l + m, l)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Relative entrywise truncation bound `(1+τ)τ^r/(1-τ)`.
    pub fn error_bound(tau: f64, order: usize) -> f64 {
        (1.0 + tau) * tau.powi(order as i32) / (1.0 - tau)
    }

    pub fn separation_ratio(&self) -> f64 {
        (self.delta_a + self.delta_b) / (self.a - self.b).norm()
    }
}

/// Row basis, coupling and column basis of the Taylor expansion between two
/// well-separated cells: `1/(x - y) ≈ (Û B̂ V̂ᵀ)_{xy}`.
pub fn taylor_bases(
    cell_i: &BoundingBox,
    cell_j: &BoundingBox,
    xs: &[Complex64],
    ys: &[Complex64],
    order: usize,
    tau: f64,
) -> Result<(CMatrix, CMatrix, CMatrix)> {
    if !well_separated(cell_i, cell_j, tau) {
        let dist = (complex_center(cell_i) - complex_center(cell_j)).norm();
        let ratio = if dist > 0.0 { (cell_i.radius() + cell_j.radius()) / dist } else { f64::INFINITY };
        return Err(SmashError::NotSeparated { ratio, tau });
    }
    let t = TaylorExpansion::new(
        complex_center(cell_i),
        cell_i.radius(),
        complex_center(cell_j),
        cell_j.radius(),
        order,
    )?;
    let u = rows_to_matrix(xs.iter().map(|&x| t.row(x)), order);
    let v = rows_to_matrix(ys.iter().map(|&y| t.col(y)), order);
    Ok((u, t.coupling(), v))
}

fn rows_to_matrix(rows: impl Iterator<Item = Vec<Complex64>>, ncols: usize) -> CMatrix {
    let rows: Vec<Vec<Complex64>> = rows.collect();
    CMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Lagrange cardinal functions for the `order`-th roots of unity at `u`
/// (a point of the unit disc in local coordinates).
pub fn disc_lagrange(u: Complex64, order: usize) -> Vec<Complex64> {
    let r = order as f64;
    (0..order)
        .map(|k| {
            let w = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / r);
            // L_k(u) = (1/r) Σ_m (u ω_k^{-1})^m
            let q = u * w;
            let mut p = Complex64::new(1.0, 0.0);
            let mut sum = p;
            for _ in 1..order {
                p *= q;
                sum += p;
            }
            sum / r
        })
        .collect()
}

/// Chebyshev points of the first kind on `[lo, hi]`.
pub fn chebyshev_nodes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    (0..count)
        .map(|k| c + h * ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * count) as f64).cos())
        .collect()
}

fn lagrange_1d(nodes: &[f64], x: f64) -> Vec<f64> {
    if let Some(k) = nodes.iter().position(|&t| t == x) {
        let mut e = vec![0.0; nodes.len()];
        e[k] = 1.0;
        return e;
    }
    (0..nodes.len())
        .map(|k| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != k)
                .map(|(_, &t)| (x - t) / (nodes[k] - t))
                .product()
        })
        .collect()
}

fn chebyshev_t(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = 2.0 * x * b - a;
        a = b;
        b = c;
    }
    b
}

/// Greedy Leja order of `nodes`: each next node maximizes the product of
/// distances to those already chosen.
fn leja_order(nodes: &[f64]) -> Vec<f64> {
    let mut rest = nodes.to_vec();
    let mut out = Vec::with_capacity(nodes.len());
    let first = rest
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    out.push(rest.swap_remove(first));
    while !rest.is_empty() {
        let k = (0..rest.len())
            .max_by(|&p, &q| {
                let f = |t: f64| out.iter().map(|&o| (t - o).abs().ln()).sum::<f64>();
                f(rest[p]).total_cmp(&f(rest[q]))
            })
            .unwrap();
        out.push(rest.swap_remove(k));
    }
    out
}

/// Lagrange interpolation basis on a cell, evaluated at `points`.
///
/// 1D cells use `order` Chebyshev nodes. 2D cells use a `q × q` tensor
/// Chebyshev grid when `order = q²`; otherwise the first `order` tensor
/// nodes in graded total-degree order, paired with the matching polynomial
/// space.
pub fn interp_basis(cell: &BoundingBox, points: &[&[f64]], order: usize) -> Result<DMatrix<f64>> {
    if order == 0 {
        return Err(SmashError::invalid("interpolation order must be positive"));
    }
    let d = cell.dim();
    if (0..d).any(|k| !(cell.width(k) > 0.0)) && order > 1 {
        return Err(SmashError::invalid("degenerate cell gives duplicate interpolation nodes"));
    }
    match d {
        1 => {
            let nodes = chebyshev_nodes(cell.lo[0], cell.hi[0], order);
            let rows: Vec<Vec<f64>> = points.iter().map(|p| lagrange_1d(&nodes, p[0])).collect();
            Ok(DMatrix::from_fn(points.len(), order, |i, k| rows[i][k]))
        }
        2 => {
            let q = (order as f64).sqrt().round() as usize;
            if q * q == order {
                let nx = chebyshev_nodes(cell.lo[0], cell.hi[0], q);
                let ny = chebyshev_nodes(cell.lo[1], cell.hi[1], q);
                let mut out = DMatrix::zeros(points.len(), order);
                for (i, p) in points.iter().enumerate() {
                    let lx = lagrange_1d(&nx, p[0]);
                    let ly = lagrange_1d(&ny, p[1]);
                    for a in 0..q {
                        for b in 0..q {
                            out[(i, a * q + b)] = lx[a] * ly[b];
                        }
                    }
                }
                Ok(out)
            } else {
                trimmed_tensor_basis(cell, points, order)
            }
        }
        _ => Err(SmashError::Unsupported(format!("interpolation in {d} dimensions"))),
    }
}

fn graded_indices(order: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(order);
    let mut total = 0;
    while out.len() < order {
        for a in (0..=total).rev() {
            if out.len() < order {
                out.push((a, total - a));
            }
        }
        total += 1;
    }
    out
}

fn trimmed_tensor_basis(cell: &BoundingBox, points: &[&[f64]], order: usize) -> Result<DMatrix<f64>> {
    let idx = graded_indices(order);
    let m = idx.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0) + 1;
    let nx = leja_order(&chebyshev_nodes(-1.0, 1.0, m));
    let ny = leja_order(&chebyshev_nodes(-1.0, 1.0, m));
    let c = cell.center();
    let h = [0.5 * cell.width(0), 0.5 * cell.width(1)];
    let local = |p: &[f64]| ((p[0] - c[0]) / h[0], (p[1] - c[1]) / h[1]);
    let phi = |x: f64, y: f64| -> Vec<f64> { idx.iter().map(|&(a, b)| chebyshev_t(a, x) * chebyshev_t(b, y)).collect() };
    // rows: nodes, columns: polynomials
    let vander = DMatrix::from_fn(order, order, |node, poly| {
        let (a, b) = idx[node];
        phi(nx[a], ny[b])[poly]
    });
    let lu = vander.transpose().lu();
    let mut out = DMatrix::zeros(points.len(), order);
    for (i, p) in points.iter().enumerate() {
        let (x, y) = local(p);
        let rhs = DMatrix::from_column_slice(order, 1, &phi(x, y));
        // cardinal values ℓ solve Vᵀ ℓ = φ(x)
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| SmashError::invalid("singular interpolation system"))?;
        for k in 0..order {
            out[(i, k)] = sol[k];
        }
    }
    Ok(out)
}

/// Householder QR, optionally with column pivoting.
struct HouseholderQr {
    /// Overwritten matrix: `R` on and above the diagonal, reflectors below.
    qr: DMatrix<f64>,
    betas: Vec<f64>,
    perm: Vec<usize>,
}

impl HouseholderQr {
    /// Factors `a`, stopping after `steps` reflections.
    fn new(mut a: DMatrix<f64>, pivot: bool, steps: usize) -> Self {
        let (m, n) = a.shape();
        let steps = steps.min(m).min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut betas = Vec::with_capacity(steps);
        let mut norms: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
        for j in 0..steps {
            if pivot {
                let p = (j..n).max_by(|&x, &y| norms[x].total_cmp(&norms[y])).unwrap();
                if p != j {
                    a.swap_columns(j, p);
                    norms.swap(j, p);
                    perm.swap(j, p);
                }
            }
            let alpha = a.view((j, j), (m - j, 1)).norm();
            let x0 = a[(j, j)];
            let beta = if alpha == 0.0 {
                0.0
            } else {
                let alpha = if x0 > 0.0 { -alpha } else { alpha };
                let v0 = x0 - alpha;
                a[(j, j)] = v0;
                // reflector v = [v0, x1..] with H = I - β v vᵀ
                let vnorm2 = v0 * v0 + a.view((j + 1, j), (m - j - 1, 1)).norm_squared();
                let beta = 2.0 / vnorm2;
                for c in j + 1..n {
                    let mut dot = 0.0;
                    for i in j..m {
                        dot += a[(i, j)] * a[(i, c)];
                    }
                    let f = beta * dot;
                    for i in j..m {
                        let vij = a[(i, j)];
                        a[(i, c)] -= f * vij;
                    }
                }
                // store normalized reflector tail (v0 = 1) below the diagonal
                for i in j + 1..m {
                    a[(i, j)] /= v0;
                }
                a[(j, j)] = alpha;
                beta * v0 * v0
            };
            betas.push(beta);
            if pivot {
                for c in j + 1..n {
                    norms[c] = a.view((j + 1, c), (m - j - 1, 1)).norm_squared();
                }
            }
        }
        HouseholderQr { qr: a, betas, perm }
    }

    fn r(&self) -> DMatrix<f64> {
        let (m, n) = self.qr.shape();
        DMatrix::from_fn(m, n, |i, j| if i <= j { self.qr[(i, j)] } else { 0.0 })
    }

    fn q(&self) -> DMatrix<f64> {
        let m = self.qr.nrows();
        let mut q = DMatrix::<f64>::identity(m, m);
        for (j, &beta) in self.betas.iter().enumerate().rev() {
            if beta == 0.0 {
                continue;
            }
            for c in 0..m {
                let mut dot = q[(j, c)];
                for i in j + 1..m {
                    dot += self.qr[(i, j)] * q[(i, c)];
                }
                let f = beta * dot;
                q[(j, c)] -= f;
                for i in j + 1..m {
                    q[(i, c)] -= f * self.qr[(i, j)];
                }
            }
        }
        q
    }
}

/// Full Householder QR without pivoting: `a = q r` with `q` square orthogonal
/// and `r` the same shape as `a`.
pub(crate) fn full_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let steps = a.nrows().min(a.ncols());
    let qr = HouseholderQr::new(a.clone(), false, steps);
    (qr.q(), qr.r())
}

/// How the rank of a factorization is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rank {
    /// Exactly this many pivots (fewer if the matrix is numerically deficient).
    Fixed(usize),
    /// Keep pivots with `|R_kk| > tol·|R_00|`.
    Tolerance(f64),
}

/// `M P = Q [R11 R12; 0 R22]` with `|R11⁻¹ R12|_max ≤ s`.
#[derive(Debug, Clone)]
pub struct Srrqr {
    pub perm: Vec<usize>,
    pub rank: usize,
    pub r: DMatrix<f64>,
    pub q: Option<DMatrix<f64>>,
    pub swaps: usize,
}

impl Srrqr {
    pub fn r11(&self) -> DMatrix<f64> {
        self.r.view((0, 0), (self.rank, self.rank)).into_owned()
    }

    pub fn r12(&self) -> DMatrix<f64> {
        self.r.view((0, self.rank), (self.rank, self.r.ncols() - self.rank)).into_owned()
    }

    pub fn r22(&self) -> DMatrix<f64> {
        let (m, n) = self.r.shape();
        self.r.view((self.rank, self.rank), (m - self.rank, n - self.rank)).into_owned()
    }

    /// `R11⁻¹ R12`.
    pub fn coefficients(&self) -> DMatrix<f64> {
        solve_upper(&self.r11(), &self.r12())
    }
}

fn solve_upper(r: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    r.solve_upper_triangular(b).unwrap_or_else(|| DMatrix::from_element(b.nrows(), b.ncols(), f64::NAN))
}

/// Swap limit used by [`srrqr`] unless overridden.
pub fn default_swap_limit(ncols: usize) -> usize {
    20 * ncols + 100
}

/// Strong rank-revealing QR: column-pivoted QR followed by pairwise column
/// swaps until every entry of `R11⁻¹ R12` is at most `s` in magnitude.
pub fn srrqr(m: &DMatrix<f64>, rank: Rank, s: f64) -> Result<Srrqr> {
    srrqr_with(m, rank, s, true, default_swap_limit(m.ncols()))
}

pub fn srrqr_with(m: &DMatrix<f64>, rank: Rank, s: f64, want_q: bool, max_swaps: usize) -> Result<Srrqr> {
    if !(s > 1.0) {
        return Err(SmashError::invalid(format!("swap bound s = {s} must exceed 1")));
    }
    if m.is_empty() || m.iter().all(|&x| x == 0.0) {
        return Err(SmashError::ZeroMatrix);
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(SmashError::invalid("non-finite matrix entry"));
    }
    let (rows, cols) = m.shape();
    let kmax = rows.min(cols);
    if let Rank::Fixed(k) = rank {
        if k == 0 || k > kmax {
            return Err(SmashError::invalid(format!("target rank {k} not in 1..={kmax}")));
        }
    }
    let mut qr = HouseholderQr::new(m.clone(), true, kmax);
    let diag: Vec<f64> = (0..kmax).map(|i| qr.qr[(i, i)].abs()).collect();
    let lead = diag[0];
    let numerical = diag.iter().take_while(|&&d| d > RANK_FLOOR * lead).count().max(1);
    let k = match rank {
        Rank::Fixed(k) => k.min(numerical),
        Rank::Tolerance(tol) => diag.iter().take_while(|&&d| d > tol.max(RANK_FLOOR) * lead).count().max(1),
    };
    let mut perm = qr.perm.clone();
    let mut swaps = 0;
    if k < cols {
        loop {
            let r = qr.r();
            let r11 = r.view((0, 0), (k, k)).into_owned();
            let r12 = r.view((0, k), (k, cols - k)).into_owned();
            let t = solve_upper(&r11, &r12);
            let inv = solve_upper(&r11, &DMatrix::identity(k, k));
            let inv_row_norms: Vec<f64> = (0..k).map(|i| inv.row(i).norm()).collect();
            let gammas: Vec<f64> = (0..cols - k)
                .map(|j| if k < r.nrows() { r.view((k, k + j), (r.nrows() - k, 1)).norm() } else { 0.0 })
                .collect();
            let mut best = (0.0, 0, 0);
            for j in 0..cols - k {
                for i in 0..k {
                    let g = gammas[j] * inv_row_norms[i];
                    let rho = (t[(i, j)] * t[(i, j)] + g * g).sqrt();
                    if rho > best.0 {
                        best = (rho, i, j);
                    }
                }
            }
            if !(best.0 > s) {
                if best.0.is_nan() {
                    return Err(SmashError::invalid("singular leading block in strong RRQR"));
                }
                break;
            }
            if swaps >= max_swaps {
                return Err(SmashError::SwapLimit(max_swaps));
            }
            swaps += 1;
            perm.swap(best.1, k + best.2);
            let permuted = DMatrix::from_fn(rows, cols, |i, j| m[(i, perm[j])]);
            qr = HouseholderQr::new(permuted, false, kmax);
        }
    }
    let r = qr.r();
    Ok(Srrqr { q: want_q.then(|| qr.q()), perm, rank: k, r, swaps })
}

/// Interpolative decomposition `C ≈ P [I; G] C|_skeleton` of the rows of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolativeFactor {
    /// Global indices of the rows of `C` (the set `ī`).
    pub index: Vec<usize>,
    /// Positions (into `index`) of the selected rows.
    pub skeleton: Vec<usize>,
    /// Positions of the remaining rows, in the order of the rows of `g`.
    pub redundant: Vec<usize>,
    /// `(|ī| - k) × k` coefficients.
    pub g: DMatrix<f64>,
}

impl InterpolativeFactor {
    /// Factor that keeps every row.
    pub fn identity(index: Vec<usize>) -> Self {
        let n = index.len();
        InterpolativeFactor { index, skeleton: (0..n).collect(), redundant: Vec::new(), g: DMatrix::zeros(0, n) }
    }

    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Global indices of the skeleton rows (the set `î`).
    pub fn skeleton_indices(&self) -> Vec<usize> {
        self.skeleton.iter().map(|&p| self.index[p]).collect()
    }

    /// `P [I; G] z` for `z` of length `rank`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (t, &p) in self.skeleton.iter().enumerate() {
            out[p] = z[t];
        }
        for (t, &p) in self.redundant.iter().enumerate() {
            out[p] = (0..self.rank()).map(|c| self.g[(t, c)] * z[c]).sum();
        }
        out
    }

    /// `[I; G]ᵀ Pᵀ q` for `q` of length `len`.
    pub fn apply_t(&self, q: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.skeleton.iter().map(|&p| q[p]).collect();
        for (t, &p) in self.redundant.iter().enumerate() {
            let qp = q[p];
            if qp != 0.0 {
                for (c, o) in out.iter_mut().enumerate() {
                    *o += self.g[(t, c)] * qp;
                }
            }
        }
        out
    }

    /// Dense `P [I; G]` (`len × rank`).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len(), self.rank());
        for (t, &p) in self.skeleton.iter().enumerate() {
            out[(p, t)] = 1.0;
        }
        for (t, &p) in self.redundant.iter().enumerate() {
            out.row_mut(p).copy_from(&self.g.row(t));
        }
        out
    }

    pub fn max_coefficient(&self) -> f64 {
        self.g.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Selects a subset of rows of `c` that spans the others with bounded
/// coefficients (strong RRQR on `cᵀ`). `index` names the rows of `c`.
pub fn compr(c: &DMatrix<f64>, index: &[usize], s: f64, rank: Rank) -> Result<InterpolativeFactor> {
    if c.nrows() != index.len() {
        return Err(SmashError::DimensionMismatch { expected: index.len(), got: c.nrows() });
    }
    let n = index.len();
    if n == 0 || c.ncols() == 0 || c.iter().all(|&x| x == 0.0) {
        return Ok(InterpolativeFactor {
            index: index.to_vec(),
            skeleton: Vec::new(),
            redundant: (0..n).collect(),
            g: DMatrix::zeros(n, 0),
        });
    }
    let rank = match rank {
        Rank::Fixed(k) => Rank::Fixed(k.min(n.min(c.ncols()))),
        other => other,
    };
    let f = srrqr_with(&c.transpose(), rank, s, false, default_swap_limit(n))?;
    let k = f.rank;
    let g = f.coefficients().transpose();
    Ok(InterpolativeFactor {
        index: index.to_vec(),
        skeleton: f.perm[..k].to_vec(),
        redundant: f.perm[k..].to_vec(),
        g,
    })
}

/// `M ≈ U diag(σ) Vᵀ` keeping the singular values `σ_i ≥ ε σ_1`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub vt: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * &self.vt
    }
}

fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let (u, vt, s) = (svd.u.unwrap(), svd.v_t.unwrap(), svd.singular_values);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let vt = DMatrix::from_fn(order.len(), vt.ncols(), |i, j| vt[(order[i], j)]);
    (u, order.iter().map(|&k| s[k]).collect(), vt)
}

fn keep_count(sigma: &[f64], eps: f64) -> usize {
    let s1 = sigma.first().copied().unwrap_or(0.0);
    if s1 == 0.0 {
        return if eps == 0.0 { sigma.len() } else { 0 };
    }
    sigma.iter().take_while(|&&s| s >= eps * s1).count()
}

pub fn truncated_svd(m: &DMatrix<f64>, eps: f64) -> Result<TruncatedSvd> {
    if m.is_empty() {
        return Err(SmashError::invalid("empty matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(SmashError::invalid("non-finite matrix entry"));
    }
    let (u, sigma, vt) = sorted_svd(m);
    let k = keep_count(&sigma, eps);
    Ok(TruncatedSvd {
        u: u.columns(0, k).into_owned(),
        sigma: sigma[..k].to_vec(),
        vt: vt.rows(0, k).into_owned(),
    })
}

/// Left factor of [`truncated_svd`] only; wide inputs are first reduced by a
/// QR factorization of their transpose.
pub fn truncated_left(m: &DMatrix<f64>, eps: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if m.is_empty() {
        return Err(SmashError::invalid("empty matrix"));
    }
    let reduced;
    let target = if m.ncols() > 2 * m.nrows() {
        let r = m.transpose().qr().r();
        reduced = r.transpose();
        &reduced
    } else {
        m
    };
    let svd = target.clone().svd(true, false);
    let (u, s) = (svd.u.unwrap(), svd.singular_values);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| s[k]).collect();
    let k = keep_count(&sigma, eps);
    Ok((DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]), sigma[..k].to_vec()))
}

/// Number of singular values `σ_i ≥ ε σ_1`.
pub fn eps_rank(m: &DMatrix<f64>, eps: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.singular_values();
    let mut sigma: Vec<f64> = s.iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    keep_count(&sigma, eps)
}
