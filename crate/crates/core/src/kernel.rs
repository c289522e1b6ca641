//! Kernel matrices: Cauchy and Cauchy-like matrices on the line or in the
//! complex plane, the Nyström discretization of the Laplace double-layer
//! potential on closed curves, and generic smooth kernels.
//!
//! Complex matrices are handled through the real embedding
//! `a ↦ [[Re a, -Im a], [Im a, Re a]]`: a complex point contributes two
//! consecutive rows (columns) and complex vectors are stored interleaved as
//! `[re_0, im_0, re_1, im_1, ...]`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::{BoundingBox, PointSet, Role};
use crate::error::{Result, SmashError};
use crate::lowrank::{complex_center, disc_lagrange, interp_basis, TaylorExpansion};

/// Default limit on the number of entries of any dense matrix we form.
pub const DEFAULT_DENSE_BUDGET: usize = 5120 * 5120;

/// A matrix whose entries come from a kernel function and whose farfield
/// block rows and columns have analytic bases.
pub trait KernelMatrix: Send + Sync + fmt::Debug {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// One point per row (complex points appear twice).
    fn row_points(&self) -> &PointSet;
    fn col_points(&self) -> &PointSet;

    fn entry(&self, i: usize, j: usize) -> f64;

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.entry(rows[a], cols[b]))
    }

    /// Basis for the rows `rows` (all inside `cell`) of any block whose
    /// columns lie in the farfield of `cell`.
    fn row_basis(&self, rows: &[usize], cell: &BoundingBox, order: usize) -> Result<DMatrix<f64>>;

    fn col_basis(&self, cols: &[usize], cell: &BoundingBox, order: usize) -> Result<DMatrix<f64>>;

    /// Rows per geometric point (2 for complex matrices).
    fn dofs_per_point(&self) -> usize {
        1
    }

    fn name(&self) -> String;
}

/// `M(a)` row `c` of the real 2x2 embedding, as seen from the row side.
fn embed_row(a: Complex64, c: usize) -> [f64; 2] {
    if c == 0 {
        [a.re, -a.im]
    } else {
        [a.im, a.re]
    }
}

/// Row `c` of `M(a)ᵀ`, used for column bases.
fn embed_col(a: Complex64, c: usize) -> [f64; 2] {
    if c == 0 {
        [a.re, a.im]
    } else {
        [-a.im, a.re]
    }
}

pub fn embed_vector(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn unembed_vector(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Boundary and auxiliary curves, parametrized over `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    RamHead,
    Sunflower,
    Honeybee,
    /// Archimedean-type spiral `(0.2 + t) e^{4πit}` mapped into the unit square.
    Snail,
    Circle,
    /// The segment `[0, 1] × {0}`.
    Interval,
}

impl FromStr for Curve {
    type Err = SmashError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ramhead" => Ok(Curve::RamHead),
            "sunflower" => Ok(Curve::Sunflower),
            "honeybee" => Ok(Curve::Honeybee),
            "snail" => Ok(Curve::Snail),
            "circle" => Ok(Curve::Circle),
            "interval" => Ok(Curve::Interval),
            _ => Err(SmashError::Unknown { kind: "curve", name: s.to_string() }),
        }
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Curve::RamHead => "ramhead",
            Curve::Sunflower => "sunflower",
            Curve::Honeybee => "honeybee",
            Curve::Snail => "snail",
            Curve::Circle => "circle",
            Curve::Interval => "interval",
        })
    }
}

/// `R(t) e^{iωt}` and its first two derivatives.
fn polar(r: [f64; 3], omega: f64, t: f64) -> [Complex64; 3] {
    let e = Complex64::from_polar(1.0, omega * t);
    let i = Complex64::i();
    [
        e * r[0],
        e * (r[1] + i * omega * r[0]),
        e * (r[2] + i * 2.0 * omega * r[1] - omega * omega * r[0]),
    ]
}

impl Curve {
    pub fn is_closed(&self) -> bool {
        !matches!(self, Curve::Snail | Curve::Interval)
    }

    /// Position, first and second derivative as complex numbers.
    pub fn eval(&self, t: f64) -> [Complex64; 3] {
        let c = |x: f64, y: f64| Complex64::new(x, y);
        match self {
            Curve::RamHead => {
                let (s2, c2) = (2.0 * PI * t).sin_cos();
                let (s4, c4) = (4.0 * PI * t).sin_cos();
                [
                    c(2.0 * c2, 1.0 + s2 - 1.4 * c4.powi(4)),
                    c(-4.0 * PI * s2, 2.0 * PI * c2 + 22.4 * PI * c4.powi(3) * s4),
                    c(
                        -8.0 * PI * PI * c2,
                        -4.0 * PI * PI * s2 + 89.6 * PI * PI * (c4.powi(4) - 3.0 * c4 * c4 * s4 * s4),
                    ),
                ]
            }
            Curve::Sunflower => {
                let w = 40.0 * PI;
                let (s, co) = (w * t).sin_cos();
                polar([1.3 + 1.25 * co, -1.25 * w * s, -1.25 * w * w * co], 2.0 * PI, t)
            }
            Curve::Honeybee => {
                let w = 4.0 * PI;
                let (s, co) = (w * t).sin_cos();
                let rot = Complex64::from_polar(1.0, -PI / 6.0);
                polar([0.5 + s, w * co, -w * w * s], 2.0 * PI, t).map(|z| rot * z)
            }
            Curve::Snail => {
                let scale = 1.0 / 2.4;
                let p = polar([0.2 + t, 1.0, 0.0], 4.0 * PI, t);
                [p[0] * scale + c(0.5, 0.5), p[1] * scale, p[2] * scale]
            }
            Curve::Circle => polar([1.0, 0.0, 0.0], 2.0 * PI, t),
            Curve::Interval => [c(t, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        }
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        let z = self.eval(t)[0];
        [z.re, z.im]
    }

    pub fn derivative(&self, t: f64) -> [f64; 2] {
        let z = self.eval(t)[1];
        [z.re, z.im]
    }

    pub fn second_derivative(&self, t: f64) -> [f64; 2] {
        let z = self.eval(t)[2];
        [z.re, z.im]
    }

    /// Winding number of the curve around `x` (closed curves only).
    pub fn winding_number(&self, x: [f64; 2]) -> Result<i64> {
        if !self.is_closed() {
            return Err(SmashError::invalid(format!("curve {self} is not closed")));
        }
        let z = Complex64::new(x[0], x[1]);
        let m = 8192;
        let mut total = 0.0;
        let mut prev = self.eval(0.0)[0] - z;
        for k in 1..=m {
            let cur = self.eval(k as f64 / m as f64)[0] - z;
            if cur.norm() == 0.0 {
                return Err(SmashError::invalid("point lies on the curve"));
            }
            total += (cur / prev).arg();
            prev = cur;
        }
        Ok((total / (2.0 * PI)).round() as i64)
    }

    pub fn is_interior(&self, x: [f64; 2]) -> Result<bool> {
        Ok(self.winding_number(x)? != 0)
    }
}

/// Cauchy kernel `1/(x - y)` with the value `diag` when `x = y`.
pub fn cauchy(x: Complex64, y: Complex64, diag: Complex64) -> Complex64 {
    if x == y {
        diag
    } else {
        1.0 / (x - y)
    }
}

/// Double-layer kernel `∂Φ(x, r(t))/∂ν |r'(t)|` with `Φ = -log|x - y| / 2π`,
/// for a target `x` off the curve and a source with position `y` and
/// tangent `dy`.
pub fn double_layer(x: Complex64, y: Complex64, dy: Complex64) -> f64 {
    // (x - y)·N / (2π |x - y|²) with N = (dy.im, -dy.re) = -i·dy
    (dy / (x - y)).im / (2.0 * PI)
}

/// Diagonal limit `-c |r'| / 4π` where `c` is the signed curvature.
pub fn double_layer_diagonal(dy: Complex64, ddy: Complex64) -> f64 {
    let cross = dy.re * ddy.im - dy.im * ddy.re;
    -cross / (4.0 * PI * dy.norm_sqr())
}

/// Kernel descriptions accepted by the CLI and the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Cauchy { diag: Complex64 },
    /// `Σ_l diag(w_l) C diag(v_l)` with real generator columns.
    CauchyLike { w: DMatrix<f64>, v: DMatrix<f64> },
    LaplaceDlp { curve: Curve },
}

impl KernelSpec {
    /// Evaluates the underlying kernel. Cauchy-type kernels take points
    /// (1 or 2 coordinates); the double-layer kernel takes parameters `s, t`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        let z = |p: &[f64]| Complex64::new(p[0], p.get(1).copied().unwrap_or(0.0));
        let out = match self {
            KernelSpec::Cauchy { diag } => cauchy(z(x), z(y), *diag),
            KernelSpec::CauchyLike { .. } => {
                if z(x) == z(y) {
                    return Err(SmashError::invalid("Cauchy-like kernel is undefined for x = y"));
                }
                cauchy(z(x), z(y), Complex64::new(0.0, 0.0))
            }
            KernelSpec::LaplaceDlp { curve } => {
                let (s, t) = (x[0], y[0]);
                let [py, dy, ddy] = curve.eval(t);
                if s == t {
                    Complex64::new(double_layer_diagonal(dy, ddy), 0.0)
                } else {
                    Complex64::new(double_layer(curve.eval(s)[0], py, dy), 0.0)
                }
            }
        };
        if !(out.re.is_finite() && out.im.is_finite()) {
            return Err(SmashError::invalid("non-finite kernel value"));
        }
        Ok(out)
    }
}

/// Evaluates a kernel spec at a pair of points or parameters.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Complex64> {
    spec.eval(x, y)
}

fn to_complex(p: &PointSet) -> Vec<Complex64> {
    p.iter().map(|q| Complex64::new(q[0], q.get(1).copied().unwrap_or(0.0))).collect()
}

fn duplicate(p: &PointSet, role: Role) -> PointSet {
    let coords: Vec<f64> = p.iter().flat_map(|q| q.iter().chain(q.iter()).copied()).collect();
    PointSet::new(p.dim(), coords, role).expect("duplicated points stay valid")
}

/// Cauchy or Cauchy-like matrix between points on the real line (1D points)
/// or in the complex plane (2D points, real-embedded).
#[derive(Debug, Clone)]
pub struct CauchyMatrix {
    x: Vec<Complex64>,
    y: Vec<Complex64>,
    complex: bool,
    diag: Complex64,
    weights: Option<(DMatrix<f64>, DMatrix<f64>)>,
    rows: PointSet,
    cols: PointSet,
}

impl CauchyMatrix {
    pub fn new(x: &PointSet, y: &PointSet, diag: Complex64) -> Result<Self> {
        if x.dim() != y.dim() || x.dim() > 2 {
            return Err(SmashError::invalid("Cauchy points must both be 1D (real) or 2D (complex)"));
        }
        let complex = x.dim() == 2;
        if !complex && diag.im != 0.0 {
            return Err(SmashError::invalid("complex diagonal value for a real Cauchy matrix"));
        }
        let (rows, cols) = if complex {
            (duplicate(x, Role::Target), duplicate(y, Role::Source))
        } else {
            (x.clone(), y.clone())
        };
        Ok(CauchyMatrix { x: to_complex(x), y: to_complex(y), complex, diag, weights: None, rows, cols })
    }

    /// Cauchy-like matrix `Σ_l diag(w[:, l]) C diag(v[:, l])`. Coincident
    /// points are rejected.
    pub fn cauchy_like(x: &PointSet, y: &PointSet, w: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != x.len() || v.nrows() != y.len() || w.ncols() != v.ncols() || w.ncols() == 0 {
            return Err(SmashError::invalid("generator shapes do not match the point sets"));
        }
        let mut m = Self::new(x, y, Complex64::new(0.0, 0.0))?;
        let mut xs: Vec<(f64, f64)> = m.x.iter().map(|z| (z.re, z.im)).collect();
        xs.extend(m.y.iter().map(|z| (z.re, z.im)));
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|p| p[0] == p[1]) && m.x.iter().any(|a| m.y.contains(a)) {
            return Err(SmashError::invalid("Cauchy-like points must be pairwise distinct"));
        }
        m.weights = Some((w, v));
        Ok(m)
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    pub fn num_points(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    pub fn weights(&self) -> Option<&(DMatrix<f64>, DMatrix<f64>)> {
        self.weights.as_ref()
    }

    /// The plain Cauchy matrix on the same points.
    pub fn without_weights(&self) -> CauchyMatrix {
        CauchyMatrix { weights: None, ..self.clone() }
    }

    /// Complex entry between point `p` of `X` and point `q` of `Y`.
    pub fn value(&self, p: usize, q: usize) -> Complex64 {
        let c = cauchy(self.x[p], self.y[q], self.diag);
        match &self.weights {
            None => c,
            Some((w, v)) => c * (0..w.ncols()).map(|l| w[(p, l)] * v[(q, l)]).sum::<f64>(),
        }
    }

    fn split(&self, i: usize) -> (usize, usize) {
        if self.complex {
            (i / 2, i % 2)
        } else {
            (i, 0)
        }
    }

    fn basis(
        &self,
        idx: &[usize],
        cell: &BoundingBox,
        order: usize,
        pts: &[Complex64],
        weights: Option<&DMatrix<f64>>,
        embed: fn(Complex64, usize) -> [f64; 2],
    ) -> Result<DMatrix<f64>> {
        let (a, delta) = (complex_center(cell), cell.radius());
        if !(delta > 0.0) {
            return Err(SmashError::invalid("cell has zero radius"));
        }
        let width = if self.complex { 2 * order } else { order };
        let groups = weights.map(|w| w.ncols()).unwrap_or(1);
        let mut out = DMatrix::zeros(idx.len(), width * groups);
        for (row, &i) in idx.iter().enumerate() {
            let (p, c) = self.split(i);
            let phi = TaylorExpansion::scaled_monomials(pts[p] - a, delta, order);
            for g in 0..groups {
                let scale = weights.map(|w| w[(p, g)]).unwrap_or(1.0);
                let base = g * width;
                for (l, &f) in phi.iter().enumerate() {
                    if self.complex {
                        let e = embed(f, c);
                        out[(row, base + 2 * l)] = scale * e[0];
                        out[(row, base + 2 * l + 1)] = scale * e[1];
                    } else {
                        out[(row, base + l)] = scale * f.re;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl KernelMatrix for CauchyMatrix {
    fn nrows(&self) -> usize {
        self.rows.len()
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn row_points(&self) -> &PointSet {
        &self.rows
    }

    fn col_points(&self) -> &PointSet {
        &self.cols
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        let (p, c) = self.split(i);
        let (q, d) = self.split(j);
        let a = self.value(p, q);
        if self.complex {
            embed_row(a, c)[d]
        } else {
            a.re
        }
    }

    fn row_basis(&self, rows: &[usize], cell: &BoundingBox, order: usize) -> Result<DMatrix<f64>> {
        let w = self.weights.as_ref().map(|(w, _)| w);
        self.basis(rows, cell, order, &self.x, w, embed_row)
    }

    fn col_basis(&self, cols: &[usize], cell: &BoundingBox, order: usize) -> Result<DMatrix<f64>> {
        let v = self.weights.as_ref().map(|(_, v)| v);
        self.basis(cols, cell, order, &self.y, v, embed_col)
    }

    fn dofs_per_point(&self) -> usize {
        if self.complex {
            2
        } else {
            1
        }
    }

    fn name(&self) -> String {
        let kind = if self.weights.is_some() { "cauchy-like" } else { "cauchy" };
        let field = if self.complex { "complex" } else { "real" };
        format!("{kind} ({field}, {}x{})", self.x.len(), self.y.len())
    }
}

/// Nyström matrix `K/n - I/2` of the double-layer operator on a closed
/// curve with the `n`-point trapezoidal rule at `t_j = j/n`.
#[derive(Debug, Clone)]
pub struct DlpMatrix {
    curve: Curve,
    pos: Vec<Complex64>,
    der: Vec<Complex64>,
    diag: Vec<f64>,
    points: PointSet,
    cols: PointSet,
}

impl DlpMatrix {
    pub fn new(curve: Curve, n: usize) -> Result<Self> {
        if !curve.is_closed() {
            return Err(SmashError::invalid(format!("curve {curve} is not closed")));
        }
        if n < 8 {
            return Err(SmashError::invalid("need at least 8 quadrature nodes"));
        }
        let evals: Vec<[Complex64; 3]> = (0..n).map(|j| curve.eval(j as f64 / n as f64)).collect();
        let pos: Vec<Complex64> = evals.iter().map(|e| e[0]).collect();
        let coords: Vec<f64> = pos.iter().flat_map(|z| [z.re, z.im]).collect();
        let points = PointSet::new(2, coords.clone(), Role::Target)?;
        Ok(DlpMatrix {
            curve,
            der: evals.iter().map(|e| e[1]).collect(),
            diag: evals.iter().map(|e| double_layer_diagonal(e[1], e[2])).collect(),
            pos,
            points,
            cols: PointSet::new(2, coords, Role::Source)?,
        })
    }

    pub fn curve(&self) -> Curve {
        self.curve
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.len()).map(|j| j as f64 / n).collect()
    }

    /// Kernel value `κ(t_i, t_j)` without the quadrature weight.
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else {
            double_layer(self.pos[i], self.pos[j], self.der[j])
        }
    }

    /// `(1/n) Σ_j κ_x(t_j) σ_j` at a point `x` off the curve.
    pub fn potential(&self, sigma: &[f64], x: [f64; 2]) -> Result<f64> {
        if sigma.len() != self.len() {
            return Err(SmashError::DimensionMismatch { expected: self.len(), got: sigma.len() });
        }
        let z = Complex64::new(x[0], x[1]);
        let sum: f64 = (0..self.len()).map(|j| double_layer(z, self.pos[j], self.der[j]) * sigma[j]).sum();
        Ok(sum / self.len() as f64)
    }
}

impl KernelMatrix for DlpMatrix {
    fn nrows(&self) -> usize {
        self.pos.len()
    }

    fn ncols(&self) -> usize {
        self.pos.len()
    }

    fn row_points(&self) -> &PointSet {
        &self.points
    }

    fn col_points(&self) -> &PointSet {
        &self.cols
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        let k = self.kernel(i, j) / self.len() as f64;
        if i == j {
            k - 0.5
        } else {
            k
        }
    }

    /// `[Re L_k, Im L_k]` for the Lagrange basis on roots of unity of the
    /// disc covering `cell`: the kernel is `Im(ζ' / (z - ζ)) / 2π` and
    /// `1/(z - ζ)` is interpolated in `z`.
    fn row_basis(&self, rows: &[usize], cell: &BoundingBox, order: usize) -> Result<DMatrix<f64>> {
        let (a, rho) = (complex_center(cell), cell.radius());
        if !(rho > 0.0) {
            return Err(SmashError::invalid("cell has zero radius"));
        }
        let mut out = DMatrix::zeros(rows.len(), 2 * order);
        for (r, &i) in rows.iter().enumerate() {
            for (k, l) in disc_lagrange((self.pos[i] - a) / rho, order).into_iter().enumerate() {
                out[(r, 2 * k)] = l.re;
                out[(r, 2 * k + 1)] = l.im;
            }
        }
        Ok(out)
    }

    /// `[Re(ζ' L_k(ζ)), Im(ζ' L_k(ζ))]` with the same disc interpolation in `ζ`.
    fn col_basis(&self, cols: &[usize], cell: &BoundingBox, order: usize) -> Result<DMatrix<f64>> {
        let (b, rho) = (complex_center(cell), cell.radius());
        if !(rho > 0.0) {
            return Err(SmashError::invalid("cell has zero radius"));
        }
        let mut out = DMatrix::zeros(cols.len(), 2 * order);
        for (r, &j) in cols.iter().enumerate() {
            let d = self.der[j] / self.der[j].norm();
            for (k, l) in disc_lagrange((self.pos[j] - b) / rho, order).into_iter().enumerate() {
                let v = d * l;
                out[(r, 2 * k)] = v.re;
                out[(r, 2 * k + 1)] = v.im;
            }
        }
        Ok(out)
    }

    fn name(&self) -> String {
        format!("laplace double layer on {} (n = {})", self.curve, self.len())
    }
}

/// Interior Dirichlet problem with exact solution `log|x - x0|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletProblem {
    pub curve: Curve,
    pub source: [f64; 2],
    pub target: [f64; 2],
    pub n: usize,
}

impl DirichletProblem {
    pub fn new(curve: Curve, source: [f64; 2], target: [f64; 2], n: usize) -> Result<Self> {
        if curve.is_interior(source)? {
            return Err(SmashError::invalid("source point must lie outside the curve"));
        }
        if !curve.is_interior(target)? {
            return Err(SmashError::invalid("evaluation point must lie inside the curve"));
        }
        Ok(DirichletProblem { curve, source, target, n })
    }

    pub fn exact(&self, x: [f64; 2]) -> f64 {
        ((x[0] - self.source[0]).hypot(x[1] - self.source[1])).ln()
    }

    /// System matrix, right-hand side and quadrature nodes.
    pub fn system(&self) -> Result<(DlpMatrix, Vec<f64>, Vec<f64>)> {
        let m = DlpMatrix::new(self.curve, self.n)?;
        let rhs = m.points.iter().map(|p| self.exact([p[0], p[1]])).collect();
        let nodes = m.nodes();
        Ok((m, rhs, nodes))
    }
}

pub fn nystrom_system(problem: &DirichletProblem) -> Result<(DlpMatrix, Vec<f64>, Vec<f64>)> {
    problem.system()
}

/// Real kernel `f(x, y)` smooth away from the diagonal, with tensor
/// Chebyshev bases on both sides.
pub struct SmoothKernel<F> {
    f: F,
    rows: PointSet,
    cols: PointSet,
    name: String,
}

impl<F> fmt::Debug for SmoothKernel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothKernel").field("name", &self.name).finish()
    }
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Send + Sync> SmoothKernel<F> {
    pub fn new(name: impl Into<String>, rows: PointSet, cols: PointSet, f: F) -> Self {
        SmoothKernel { f, rows, cols, name: name.into() }
    }
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Send + Sync> KernelMatrix for SmoothKernel<F> {
    fn nrows(&self) -> usize {
        self.rows.len()
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn row_points(&self) -> &PointSet {
        &self.rows
    }

    fn col_points(&self) -> &PointSet {
        &self.cols
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        (self.f)(self.rows.point(i), self.cols.point(j))
    }

    fn row_basis(&self, rows: &[usize], cell: &BoundingBox, order: usize) -> Result<DMatrix<f64>> {
        let pts: Vec<&[f64]> = rows.iter().map(|&i| self.rows.point(i)).collect();
        interp_basis(cell, &pts, order)
    }

    fn col_basis(&self, cols: &[usize], cell: &BoundingBox, order: usize) -> Result<DMatrix<f64>> {
        let pts: Vec<&[f64]> = cols.iter().map(|&j| self.cols.point(j)).collect();
        interp_basis(cell, &pts, order)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Dense matrix `[κ(x_i, y_j)]` in caller ordering.
pub fn assemble_dense(kernel: &dyn KernelMatrix, budget: usize) -> Result<DMatrix<f64>> {
    let (rows, cols) = (kernel.nrows(), kernel.ncols());
    if rows.saturating_mul(cols) > budget {
        return Err(SmashError::DenseBudget { rows, cols, budget });
    }
    let mut out = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = kernel.entry(i, j);
        }
    }
    Ok(out)
}

/// Point layouts used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// `m × m` uniform grid on `[0, 1]²` viewed as complex numbers.
    Grid,
    /// A curve; `interval` gives real points on `[0, 1]`.
    Curve(Curve),
}

impl FromStr for Geometry {
    type Err = SmashError;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("grid") || s.eq_ignore_ascii_case("grid2d") {
            Ok(Geometry::Grid)
        } else {
            s.parse().map(Geometry::Curve).map_err(|_| SmashError::Unknown { kind: "geometry", name: s.into() })
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Geometry::Grid => f.write_str("grid2d"),
            Geometry::Curve(c) => c.fmt(f),
        }
    }
}

/// `m × m` grid with spacing `1/(m-1)` on the unit square.
pub fn grid_points(m: usize, role: Role) -> Result<PointSet> {
    if m < 2 {
        return Err(SmashError::invalid("grid needs at least 2 points per side"));
    }
    let h = 1.0 / (m - 1) as f64;
    let coords = (0..m).flat_map(|i| (0..m).flat_map(move |j| [i as f64 * h, j as f64 * h])).collect();
    PointSet::new(2, coords, role)
}

/// Interlaced target/source points for the Cauchy-like experiments:
/// `x_k` at `t_k = k/(n+1)` and `y_k` a perturbation of size `1e-7`.
pub fn cauchy_points(geometry: Geometry, n: usize, seed: u64) -> Result<(PointSet, PointSet)> {
    if n == 0 {
        return Err(SmashError::invalid("need at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = |k: usize| (k + 1) as f64 / (n + 1) as f64;
    let mut jitter = move || 1e-7 * rng.random::<f64>();
    match geometry {
        Geometry::Grid => {
            let m = (n as f64).sqrt().round() as usize;
            if m * m != n {
                return Err(SmashError::invalid("grid size must be a perfect square"));
            }
            Ok((grid_points(m, Role::Target)?, grid_points(m, Role::Source)?))
        }
        Geometry::Curve(Curve::Interval) => {
            let xs: Vec<f64> = (0..n).map(t).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| x + jitter()).collect();
            Ok((PointSet::from_1d(&xs, Role::Target)?, PointSet::from_1d(&ys, Role::Source)?))
        }
        Geometry::Curve(Curve::Honeybee) => {
            let c = Curve::Honeybee;
            let xs: Vec<f64> = (0..n).flat_map(|k| c.point(t(k))).collect();
            let ys: Vec<f64> = (0..n).flat_map(|k| c.point(t(k) + jitter())).collect();
            Ok((PointSet::new(2, xs, Role::Target)?, PointSet::new(2, ys, Role::Source)?))
        }
        Geometry::Curve(c) => {
            let xs: Vec<[f64; 2]> = (0..n).map(|k| c.point(t(k))).collect();
            let ys: Vec<f64> = xs.iter().flat_map(|p| [p[0] + jitter(), p[1]]).collect();
            Ok((PointSet::new(2, xs.concat(), Role::Target)?, PointSet::new(2, ys, Role::Source)?))
        }
    }
}

/// `n × p` matrix with entries uniform in `[0, 1)`.
pub fn random_generators(n: usize, p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.random::<f64>())
}

pub type SharedKernel = Arc<dyn KernelMatrix>;

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64], role: Role) -> PointSet {
        PointSet::from_1d(xs, role).unwrap()
    }

    #[test]
    fn cauchy_values() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(cauchy(Complex64::new(2.0, 0.0), one, one), one);
        assert_eq!(cauchy(one, one, one), one);
        let m = CauchyMatrix::new(&line(&[0.0], Role::Target), &line(&[1.0], Role::Source), one).unwrap();
        assert_eq!(assemble_dense(&m, 10).unwrap()[(0, 0)], -1.0);
    }

    #[test]
    fn cauchy_is_antisymmetric() {
        let spec = KernelSpec::Cauchy { diag: Complex64::new(0.0, 0.0) };
        let (x, y) = ([0.3, -1.2], [2.0, 0.7]);
        let a = spec.eval(&x, &y).unwrap();
        let b = spec.eval(&y, &x).unwrap();
        assert!((a + b).norm() < 1e-15);
    }

    #[test]
    fn complex_embedding_reproduces_complex_product() {
        let x = PointSet::new(2, vec![0.0, 0.0, 1.0, 0.5, 0.2, -0.3], Role::Target).unwrap();
        let y = PointSet::new(2, vec![2.0, 1.0, -1.0, 0.4], Role::Source).unwrap();
        let m = CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0)).unwrap();
        let a = assemble_dense(&m, 100).unwrap();
        let u = vec![Complex64::new(0.5, -1.0), Complex64::new(2.0, 0.25)];
        let got = unembed_vector((a * nalgebra::DVector::from_vec(embed_vector(&u))).as_slice());
        for p in 0..3 {
            let want: Complex64 = (0..2).map(|q| m.value(p, q) * u[q]).sum();
            assert!((got[p] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn cauchy_like_with_unit_generators_is_cauchy() {
        let x = line(&[0.1, 0.5, 0.9], Role::Target);
        let y = line(&[0.2, 0.6, 1.0], Role::Source);
        let zero = Complex64::new(0.0, 0.0);
        let plain = assemble_dense(&CauchyMatrix::new(&x, &y, zero).unwrap(), 100).unwrap();
        let like = CauchyMatrix::cauchy_like(&x, &y, DMatrix::from_element(3, 1, 1.0), DMatrix::from_element(3, 1, 1.0))
            .unwrap();
        assert!((assemble_dense(&like, 100).unwrap() - plain).amax() < 1e-15);
    }

    #[test]
    fn cauchy_like_matches_entrywise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y) = cauchy_points(Geometry::Curve(Curve::Interval), 8, 1).unwrap();
        let w = random_generators(8, 2, &mut rng);
        let v = random_generators(8, 2, &mut rng);
        let m = CauchyMatrix::cauchy_like(&x, &y, w.clone(), v.clone()).unwrap();
        let a = assemble_dense(&m, 100).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let mut want = 0.0;
                for l in 0..2 {
                    want += w[(i, l)] * v[(j, l)] / (x.point(i)[0] - y.point(j)[0]);
                }
                assert!((a[(i, j)] - want).abs() <= 1e-15 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dense_budget_is_enforced() {
        let x = line(&[0.0, 1.0, 2.0], Role::Target);
        let m = CauchyMatrix::new(&x, &x, Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(assemble_dense(&m, 8), Err(SmashError::DenseBudget { .. })));
    }

    #[test]
    fn curve_examples() {
        let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12;
        assert!(close(Curve::RamHead.point(0.0), [2.0, -0.4]));
        assert!(close(Curve::Sunflower.point(0.0), [2.55, 0.0]));
        assert!(close(Curve::Honeybee.point(0.0), [0.5 * (PI / 6.0).cos(), -0.25]));
        assert!("blob".parse::<Curve>().is_err());
    }

    #[test]
    fn curve_derivatives_match_differences() {
        let h = 1e-5;
        for c in [Curve::RamHead, Curve::Sunflower, Curve::Honeybee, Curve::Snail, Curve::Circle] {
            for k in 1..10 {
                let t = k as f64 / 10.3;
                let [_, d, dd] = c.eval(t);
                let fd = (c.eval(t + h)[0] - c.eval(t - h)[0]) / (2.0 * h);
                let fdd = (c.eval(t + h)[1] - c.eval(t - h)[1]) / (2.0 * h);
                assert!((fd - d).norm() <= 1e-6 * d.norm().max(1.0) * 1e2, "{c} first derivative");
                assert!((fdd - dd).norm() <= 1e-6 * dd.norm().max(1.0) * 1e2, "{c} second derivative");
            }
        }
    }

    #[test]
    fn circle_double_layer_is_minus_half() {
        let spec = KernelSpec::LaplaceDlp { curve: Curve::Circle };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
            assert!((spec.eval(&[s], &[t]).unwrap().re + 0.5).abs() < 1e-12);
        }
        assert!((spec.eval(&[0.3], &[0.3]).unwrap().re + 0.5).abs() < 1e-14);
    }

    #[test]
    fn double_layer_diagonal_is_the_limit() {
        for c in [Curve::RamHead, Curve::Sunflower] {
            let spec = KernelSpec::LaplaceDlp { curve: c };
            let t = 0.137;
            let diag = spec.eval(&[t], &[t]).unwrap().re;
            let h = 1e-5;
            let near = 0.5 * (spec.eval(&[t + h], &[t]).unwrap().re + spec.eval(&[t - h], &[t]).unwrap().re);
            assert!((diag - near).abs() <= 1e-6 * diag.abs().max(1.0), "{c}: {diag} vs {near}");
        }
    }

    #[test]
    fn circle_nystrom_identities() {
        let p = DirichletProblem::new(Curve::Circle, [2.0, 1.5], [0.1, 0.1], 16).unwrap();
        let (m, rhs, nodes) = p.system().unwrap();
        assert_eq!(nodes.len(), 16);
        let a = assemble_dense(&m, 1000).unwrap();
        for i in 0..16 {
            assert!((a.row(i).sum() + 1.0).abs() < 1e-13);
        }
        assert!(a.iter().all(|x| x.is_finite()));
        assert!((rhs[0] - 3.25f64.sqrt().ln()).abs() < 1e-14);
        let p4 = DirichletProblem::new(Curve::Circle, [2.0, 1.5], [0.0, 0.0], 8).unwrap();
        assert!((p4.system().unwrap().1[0] - 0.58940).abs() < 1e-4);
    }

    #[test]
    fn constant_density_potential() {
        let m = DlpMatrix::new(Curve::Circle, 64).unwrap();
        let sigma = vec![2.5; 64];
        assert!((m.potential(&sigma, [0.2, -0.1]).unwrap() + 2.5).abs() < 1e-12);
        assert_eq!(m.potential(&vec![0.0; 64], [0.2, -0.1]).unwrap(), 0.0);
    }

    #[test]
    fn dirichlet_validates_points() {
        assert!(DirichletProblem::new(Curve::RamHead, [2.0, 1.5], [0.1, 0.1], 64).is_ok());
        assert!(DirichletProblem::new(Curve::RamHead, [0.1, 0.1], [0.1, 0.1], 64).is_err());
        assert!(DirichletProblem::new(Curve::Sunflower, [2.0, 1.5], [1.5, 0.0], 64).is_ok());
        assert!(DlpMatrix::new(Curve::Snail, 64).is_err());
    }

    #[test]
    fn farfield_bases_span_far_blocks() {
        // rows near the origin, columns far away: A = U C for some C
        let check = |k: &dyn KernelMatrix, rows: Vec<usize>, cols: Vec<usize>, cell: BoundingBox, order: usize| {
            let u = k.row_basis(&rows, &cell, order).unwrap();
            let a = k.block(&rows, &cols);
            let svd = u.svd(true, false);
            let smax = svd.singular_values.max();
            let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > 1e-14 * smax).collect();
            let su = svd.u.unwrap();
            let q = DMatrix::from_fn(su.nrows(), keep.len(), |i, k| su[(i, keep[k])]);
            let proj = &q * (q.transpose() * &a);
            assert!((proj - &a).amax() <= 1e-9 * a.amax(), "{}", k.name());
        };
        let xs: Vec<f64> = (0..40).map(|k| k as f64 / 39.0).collect();
        let ys: Vec<f64> = (0..40).map(|k| 3.0 + k as f64 / 39.0).collect();
        let m = CauchyMatrix::new(&line(&xs, Role::Target), &line(&ys, Role::Source), Complex64::new(0.0, 0.0)).unwrap();
        check(&m, (0..40).collect(), (0..40).collect(), BoundingBox::interval(0.0, 1.0), 30);

        let (x, y) = cauchy_points(Geometry::Curve(Curve::Honeybee), 200, 3).unwrap();
        let m = CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0)).unwrap();
        let cell = BoundingBox::new(vec![0.2, -0.5], vec![0.5, -0.2]);
        let rows: Vec<usize> = (0..m.nrows()).filter(|&i| cell.contains(m.row_points().point(i))).collect();
        let cols: Vec<usize> = (0..m.ncols())
            .filter(|&j| {
                let p = m.col_points().point(j);
                (p[0] - 0.35).hypot(p[1] + 0.35) > 1.0
            })
            .collect();
        assert!(!rows.is_empty() && !cols.is_empty());
        check(&m, rows, cols, cell, 20);

        let d = DlpMatrix::new(Curve::RamHead, 400).unwrap();
        let cell = BoundingBox::new(vec![1.5, -0.5], vec![2.1, 0.3]);
        let rows: Vec<usize> = (0..400).filter(|&i| cell.contains(d.row_points().point(i))).collect();
        let cols: Vec<usize> = (0..400)
            .filter(|&j| {
                let p = d.row_points().point(j);
                (p[0] - 1.8).hypot(p[1] + 0.1) > 1.5
            })
            .collect();
        check(&d, rows.clone(), cols.clone(), cell.clone(), 25);
        let v = d.col_basis(&cols, &BoundingBox::new(vec![-2.1, -0.5], vec![0.3, 2.1]), 25).unwrap();
        assert_eq!(v.shape(), (cols.len(), 50));
    }
}
