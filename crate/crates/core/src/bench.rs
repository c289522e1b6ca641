//! Diagnostics and experiments: the parameter heuristic, ε-ranks, a priori
//! error bounds, storage accounting and the benchmark studies behind the
//! `smash experiment` command.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::apply::{matvec_dense, matvec_nodewise, relative_error, ulv_factor};
use crate::cluster::{PointSet, Role, Structure};
use crate::error::{Result, SmashError};
use crate::generators::{Block, HierMatrix};
use crate::h2::{H2Matrix, H2Params};
use crate::hss::{diag_scale, hss_add, HssMatrix, HssParams};
use crate::kernel::{
    assemble_dense, cauchy_points, grid_points, random_generators, CauchyMatrix, Curve, DirichletProblem, Geometry,
    KernelMatrix, SharedKernel, DEFAULT_DENSE_BUDGET,
};
use crate::lowrank::{self, TaylorExpansion, DEFAULT_S};

/// Parameters derived from a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamChoice {
    pub eps: f64,
    pub tau: f64,
    pub order: usize,
    pub svd_tol: f64,
    pub s: f64,
}

impl ParamChoice {
    /// HSS parameters; the interpolative decompositions truncate at `ε_SVD`.
    pub fn hss_params(&self, leaf_capacity: usize) -> HssParams {
        HssParams {
            order: self.order,
            level_orders: Vec::new(),
            tau: self.tau,
            svd_tol: self.svd_tol,
            s: self.s,
            rank_tol: self.svd_tol,
            leaf_capacity,
        }
    }

    /// H² parameters. There is no nearfield SVD, so the pivot cutoff stays
    /// at the library default and all truncation comes from the expansion.
    pub fn h2_params(&self, leaf_capacity: usize) -> H2Params {
        H2Params { order: self.order, tau: self.tau, s: self.s, leaf_capacity, ..H2Params::default() }
    }
}

/// Expansion order and separation ratio for a target relative accuracy
/// `eps`. `dim` is 1 for points on a line or a curve, 2 for planar sets.
pub fn choose_params(eps: f64, dim: usize) -> Result<ParamChoice> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SmashError::invalid(format!("target tolerance {eps} outside (0, 1)")));
    }
    if dim == 0 {
        return Err(SmashError::invalid("dimension must be positive"));
    }
    let tau = if dim == 1 { 0.6 } else { 0.65 };
    let x = eps.ln() / f64::ln(tau);
    let r = if eps < 1e-8 {
        (x - 20.0).floor()
    } else if eps < 1e-6 {
        (x - 15.0).floor()
    } else {
        (x - 10.0).floor()
    };
    Ok(ParamChoice { eps, tau, order: r.max(5.0) as usize, svd_tol: eps / 10.0, s: DEFAULT_S })
}

/// Number of singular values with `σ_i ≥ ε σ_1`.
pub fn eps_rank(m: &DMatrix<f64>, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SmashError::invalid(format!("tolerance {eps} outside (0, 1)")));
    }
    if m.iter().all(|&x| x == 0.0) {
        return Err(SmashError::ZeroMatrix);
    }
    Ok(lowrank::eps_rank(m, eps))
}

/// Inputs of the a priori error bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    /// Rank caps `r^(l)` for levels `1..=L` (`ranks[l - 1]`); the entry for
    /// the root is unused.
    pub ranks: Vec<usize>,
    pub s: f64,
    pub levels: usize,
    pub svd_tol: f64,
    pub far_tol: f64,
    pub dim: usize,
}

impl BoundInputs {
    /// Constant rank `r` on every level.
    pub fn uniform(r: usize, s: f64, levels: usize, svd_tol: f64, far_tol: f64, dim: usize) -> Self {
        BoundInputs { ranks: vec![r; levels], s, levels, svd_tol, far_tol, dim }
    }

    /// Rank caps measured on `m`, made nonincreasing toward the leaves.
    /// `far_tol` should bound the relative farfield error of the expansion
    /// together with the pivot cutoff.
    pub fn measured(m: &HierMatrix, s: f64, svd_tol: f64, far_tol: f64) -> Self {
        let levels = m.tree().num_levels();
        let mut ranks = vec![0; levels];
        let mut cap = 0;
        for l in (1..=levels).rev() {
            cap = cap.max(m.max_rank_on_level(l));
            ranks[l - 1] = cap;
        }
        BoundInputs { ranks, s, levels, svd_tol, far_tol, dim: m.tree().dim().max(1) }
    }

    /// Measured inputs for an HSS matrix built from a Cauchy-type kernel.
    pub fn for_hss(h: &HssMatrix) -> Self {
        let p = h.params();
        let far = far_estimate(p.tau, min_order(p.order, &p.level_orders)).max(p.rank_tol);
        Self::measured(h.as_hier(), p.s, p.svd_tol, far)
    }

    pub fn for_h2(h: &H2Matrix) -> Self {
        let p = h.params();
        let far = far_estimate(p.tau, min_order(p.order, &p.level_orders)).max(p.rank_tol);
        let mut b = Self::measured(h.as_hier(), p.s, 0.0, far);
        b.dim = (h.tree().max_children().max(2) as f64).log2().round() as usize;
        b
    }

    fn rank(&self, l: usize) -> f64 {
        let l = l.min(self.levels);
        self.ranks.get(l.wrapping_sub(1)).copied().unwrap_or(0).max(1) as f64
    }
}

fn min_order(order: usize, level_orders: &[usize]) -> usize {
    level_orders.iter().copied().chain([order]).min().unwrap_or(order)
}

/// Relative farfield truncation of an order-`r` expansion at separation `τ`.
fn far_estimate(tau: f64, order: usize) -> f64 {
    TaylorExpansion::error_bound(tau, order)
}

/// Relative Frobenius error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBound {
    /// Constant-rank bound with `r = max_l r^(l)`.
    pub uniform_rank: f64,
    /// Level-by-level sum using each `r^(l)`.
    pub level_resolved: f64,
}

pub fn error_bound(inputs: &BoundInputs, structure: Structure) -> ErrorBound {
    let big_l = inputs.levels as i32;
    let s = inputs.s;
    let r = inputs.ranks.iter().skip(1).copied().max().unwrap_or(0).max(2) as f64;
    let r_at = |l: usize| inputs.rank(l);
    // (r^(from) ... r^(L))²
    let prod2 = |from: usize| (from..=inputs.levels).map(r_at).product::<f64>().powi(2);
    let sfac = |l: usize| s.powi(2 * big_l - 2 * l as i32 + 2);
    match structure {
        Structure::Hss => {
            let uniform_rank = (2.0 * r * r * s * s).powi(big_l) * (16.0 * inputs.svd_tol + 8.0 * inputs.far_tol);
            let mut c1 = 0.0;
            for l in 2..inputs.levels {
                let e = big_l as f64 + l as f64 / 2.0 + 2.0;
                c1 += e.exp2() * sfac(l) * prod2(l + 1) * r_at(l + 1).powf(1.5) * r_at(l).powf(2.5);
            }
            let mut c2 = 0.0;
            for l in 2..=inputs.levels {
                c2 += f64::from(big_l + 2).exp2() * sfac(l) * prod2(l) * r_at(l + 1);
            }
            ErrorBound { uniform_rank, level_resolved: c1 * inputs.svd_tol + c2 * inputs.far_tol }
        }
        Structure::H2 => {
            let d = inputs.dim as f64;
            let uniform_rank = (d.exp2() * r * r * s * s).powi(big_l) * 8.0 * inputs.far_tol;
            let mut c = 0.0;
            for l in 2..=inputs.levels {
                c += (d * big_l as f64 + 2.0).exp2() * sfac(l) * prod2(l) * r_at(l + 1);
            }
            ErrorBound { uniform_rank, level_resolved: c * inputs.far_tol }
        }
    }
}

/// Bytes needed by the three storage schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StorageReport {
    /// Interpolation coefficients, index sets and diagonal blocks.
    pub compressed: usize,
    /// Dense `U, V, R, W, B` plus diagonal blocks.
    pub dense_generators: usize,
    pub dense: usize,
    pub breakdown: StorageBreakdown,
}

/// Components of the compressed form, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StorageBreakdown {
    /// `G`/`H` blocks of leaf bases.
    pub leaf_coefficients: usize,
    /// `G`/`H` blocks of transfer bases.
    pub transfer_coefficients: usize,
    pub index_sets: usize,
    /// Nearfield blocks (all diagonal blocks for HSS).
    pub nearfield_blocks: usize,
    /// Couplings not representable by skeleton indices (e.g. after sums).
    pub coupling_blocks: usize,
}

const F64_BYTES: usize = 8;
const INDEX_BYTES: usize = 4;

/// Storage of `m` when couplings are kept as skeleton index pairs, compared
/// to storing every generator densely and to the dense matrix.
pub fn storage_report(m: &HierMatrix) -> StorageReport {
    let b = m.basis_storage();
    let block_floats = |block: &Block| match block {
        // skeleton indices are already stored with the bases
        Block::Indexed { .. } => 0,
        other => other.storage().0,
    };
    let nearfield: usize = m.nearfield().iter().map(|e| e.block.shape().0 * e.block.shape().1).sum();
    let coupling: usize = m.couplings().iter().map(|e| block_floats(&e.block)).sum();
    let coupling_dense: usize = m.couplings().iter().map(|e| e.block.shape().0 * e.block.shape().1).sum();
    let breakdown = StorageBreakdown {
        leaf_coefficients: b.leaf_coefficients * F64_BYTES,
        transfer_coefficients: b.transfer_coefficients * F64_BYTES,
        index_sets: b.indices * INDEX_BYTES,
        nearfield_blocks: nearfield * F64_BYTES,
        coupling_blocks: coupling * F64_BYTES,
    };
    let compressed = breakdown.leaf_coefficients
        + breakdown.transfer_coefficients
        + breakdown.index_sets
        + breakdown.nearfield_blocks
        + breakdown.coupling_blocks;
    let dense_generators = (b.leaf_dense + b.transfer_dense + coupling_dense + nearfield) * F64_BYTES;
    StorageReport { compressed, dense_generators, dense: m.nrows() * m.ncols() * F64_BYTES, breakdown }
}

/// `Σ_l diag(w_l) Ĉ diag(v_l)` from a compressed Cauchy matrix `Ĉ`, using
/// only diagonal scaling and HSS addition. `w` and `v` hold one row per
/// point; complex points scale both of their rows.
pub fn cauchy_like_hss(base: &HssMatrix, w: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<HssMatrix> {
    if w.ncols() != v.ncols() || w.ncols() == 0 {
        return Err(SmashError::invalid("generator matrices need the same positive column count"));
    }
    let expand = |g: &DMatrix<f64>, l: usize, len: usize| -> Result<Vec<f64>> {
        if g.nrows() == 0 || len % g.nrows() != 0 {
            return Err(SmashError::DimensionMismatch { expected: len, got: g.nrows() });
        }
        let k = len / g.nrows();
        Ok((0..len).map(|i| g[(i / k, l)]).collect())
    };
    let mut acc: Option<HssMatrix> = None;
    for l in 0..w.ncols() {
        let term = diag_scale(base, &expand(w, l, base.nrows())?, &expand(v, l, base.ncols())?)?;
        acc = Some(match acc {
            None => term,
            Some(a) => hss_add(&a, &term)?,
        });
    }
    Ok(acc.expect("at least one generator column"))
}

/// Named studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Accuracy and timings of H² matvecs on uniform grids.
    H2MatvecScaling,
    /// HSS solve of a Cauchy-like system.
    CauchySolve,
    /// Interior Laplace Dirichlet problem by a double-layer potential.
    LaplaceDirichlet,
    /// ε-rank of the largest off-diagonal block against its coupling size.
    RankStudy,
    /// Compressed, dense-generator and dense storage.
    StorageStudy,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::H2MatvecScaling,
        Experiment::CauchySolve,
        Experiment::LaplaceDirichlet,
        Experiment::RankStudy,
        Experiment::StorageStudy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::H2MatvecScaling => "h2_matvec_scaling",
            Experiment::CauchySolve => "cauchy_solve",
            Experiment::LaplaceDirichlet => "laplace_dirichlet",
            Experiment::RankStudy => "rank_study",
            Experiment::StorageStudy => "storage_study",
        }
    }

    fn default_sizes(&self) -> Vec<usize> {
        match self {
            Experiment::H2MatvecScaling => vec![1600, 6400],
            Experiment::CauchySolve => vec![1600, 3200, 6400, 12800],
            Experiment::LaplaceDirichlet => vec![160, 320, 640, 1280],
            Experiment::RankStudy => vec![1280],
            Experiment::StorageStudy => vec![2560],
        }
    }

    fn default_geometry(&self) -> Geometry {
        match self {
            Experiment::H2MatvecScaling => Geometry::Grid,
            Experiment::CauchySolve => Geometry::Curve(Curve::Interval),
            _ => Geometry::Curve(Curve::RamHead),
        }
    }

    fn default_tolerances(&self) -> Vec<f64> {
        match self {
            Experiment::H2MatvecScaling => vec![1e-7],
            Experiment::CauchySolve => vec![1e-8],
            Experiment::LaplaceDirichlet | Experiment::StorageStudy => vec![1e-10],
            Experiment::RankStudy => vec![1e-3, 1e-6],
        }
    }
}

impl FromStr for Experiment {
    type Err = SmashError;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == key)
            .ok_or_else(|| SmashError::Unknown { kind: "experiment", name: s.to_string() })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings of one experiment run. `None` fields fall back to the values
/// derived from the target tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub sizes: Vec<usize>,
    pub geometry: Geometry,
    /// Target tolerances; all are used by the rank study, the first otherwise.
    pub tolerances: Vec<f64>,
    pub leaf_capacity: usize,
    pub tau: Option<f64>,
    pub order: Option<usize>,
    pub svd_tol: Option<f64>,
    pub seed: u64,
    /// Largest matrix (entries) formed or traversed by the exact oracles.
    pub dense_budget: usize,
    pub repeats: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            sizes: experiment.default_sizes(),
            geometry: experiment.default_geometry(),
            tolerances: experiment.default_tolerances(),
            leaf_capacity: 50,
            tau: None,
            order: None,
            svd_tol: None,
            seed: 0,
            dense_budget: DEFAULT_DENSE_BUDGET,
            repeats: 3,
        }
    }

    fn choice(&self, eps: f64) -> Result<ParamChoice> {
        let dim = if self.geometry == Geometry::Grid { 2 } else { 1 };
        let mut c = choose_params(eps, dim)?;
        if let Some(t) = self.tau {
            c.tau = t;
        }
        if let Some(r) = self.order {
            c.order = r;
        }
        if let Some(e) = self.svd_tol {
            c.svd_tol = e;
        }
        Ok(c)
    }

    fn first_tol(&self) -> Result<f64> {
        self.tolerances.first().copied().ok_or_else(|| SmashError::invalid("no target tolerance given"))
    }

    fn curve(&self) -> Result<Curve> {
        match self.geometry {
            Geometry::Curve(c) if c != Curve::Interval => Ok(c),
            g => Err(SmashError::invalid(format!("{} needs a closed curve, not {g}", self.experiment))),
        }
    }
}

/// Table of results; absent values are `null` (empty in CSV).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentReport { experiment: name.into(), columns: Vec::new(), rows: Vec::new() }
    }

    /// Appends a row; the first row fixes the column names and order.
    pub fn push(&mut self, row: Vec<(&str, Value)>) {
        if self.columns.is_empty() {
            self.columns = row.iter().map(|(k, _)| k.to_string()).collect();
        }
        assert!(row.iter().map(|(k, _)| *k).eq(self.columns.iter().map(String::as_str)), "row columns differ from the report header");
        self.rows.push(row.into_iter().map(|(_, v)| v).collect());
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric value at `row`, `None` when absent.
    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(name)?)?.as_f64()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::Null => String::new(),
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Array of objects, one per row.
    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().cloned()).collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// JSON number, `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn int(x: usize) -> Value {
    Value::from(x)
}

/// Runs `f` `reps` times and returns the last result with the median time.
pub fn median_time<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut times = Vec::with_capacity(reps.max(1));
    let mut last = None;
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        last = Some(f()?);
        times.push(t0.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok((last.expect("at least one run"), times[times.len() / 2]))
}

fn within(budget: usize, rows: usize, cols: usize) -> bool {
    rows.checked_mul(cols).is_some_and(|e| e <= budget)
}

/// `1/(x - y)` on an `m × m` grid with `d` on the diagonal.
pub fn grid_cauchy(m: usize, diag: f64) -> Result<CauchyMatrix> {
    let p = grid_points(m, Role::Target)?;
    let q = PointSet::new(2, p.iter().flatten().copied().collect(), Role::Source)?;
    CauchyMatrix::new(&p, &q, Complex64::new(diag, 0.0))
}

/// Evaluation point used for the interior Dirichlet problems.
pub fn dirichlet_target(curve: Curve) -> [f64; 2] {
    if curve == Curve::Sunflower {
        [1.5, 0.0]
    } else {
        [0.1, 0.1]
    }
}

/// Exterior source of the exact solution `log|x - x0|`.
pub const DIRICHLET_SOURCE: [f64; 2] = [2.0, 1.5];

/// Largest point count for which condition numbers are computed.
const COND_LIMIT: usize = 1280;

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.sizes.is_empty() {
        return Err(SmashError::invalid("no problem sizes given"));
    }
    match config.experiment {
        Experiment::H2MatvecScaling => h2_matvec_scaling(config),
        Experiment::CauchySolve => cauchy_solve(config),
        Experiment::LaplaceDirichlet => laplace_dirichlet(config),
        Experiment::RankStudy => rank_study(config),
        Experiment::StorageStudy => storage_study(config),
    }
}

fn h2_matvec_scaling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.geometry != Geometry::Grid {
        return Err(SmashError::invalid("h2_matvec_scaling runs on the uniform grid"));
    }
    let choice = cfg.choice(cfg.first_tol()?)?;
    let params = choice.h2_params(cfg.leaf_capacity);
    let mut report = ExperimentReport::new(cfg.experiment.name());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for &n in &cfg.sizes {
        let m = (n as f64).sqrt().round() as usize;
        if m * m != n {
            return Err(SmashError::invalid(format!("grid size {n} is not a perfect square")));
        }
        let kernel: SharedKernel = Arc::new(grid_cauchy(m, 1.0)?);
        let (h, t_constr) = median_time(cfg.repeats, || H2Matrix::from_kernel(kernel.clone(), &params))?;
        let q: Vec<f64> = (0..kernel.ncols()).map(|_| rng.random::<f64>()).collect();
        let (z, t_matvec) = median_time(cfg.repeats, || matvec_nodewise(h.as_hier(), &q))?;
        let relerr = if within(cfg.dense_budget, kernel.nrows(), kernel.ncols()) {
            Some(relative_error(&z, &matvec_dense(kernel.as_ref(), &q)?))
        } else {
            None
        };
        report.push(vec![
            ("n", int(n)),
            ("relerr", opt(relerr)),
            ("t_constr", num(t_constr)),
            ("t_matvec", num(t_matvec)),
            ("max_rank", int(h.max_rank())),
            ("levels", int(h.tree().num_levels())),
            ("order", int(params.order)),
            ("tau", num(params.tau)),
            ("leaf_cap", int(params.leaf_capacity)),
            ("seed", Value::from(cfg.seed)),
        ]);
    }
    Ok(report)
}

fn cauchy_solve(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let choice = cfg.choice(cfg.first_tol()?)?;
    let params = choice.hss_params(cfg.leaf_capacity);
    let mut report = ExperimentReport::new(cfg.experiment.name());
    for &n in &cfg.sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ n as u64);
        let (x, y) = cauchy_points(cfg.geometry, n, rng.random())?;
        let w = random_generators(x.len(), 2, &mut rng);
        let v = random_generators(y.len(), 2, &mut rng);
        let exact = CauchyMatrix::cauchy_like(&x, &y, w.clone(), v.clone())?;
        let base: SharedKernel = Arc::new(exact.without_weights());
        let (h, t_constr) = median_time(cfg.repeats, || {
            let plain = HssMatrix::from_kernel(base.clone(), &params)?;
            cauchy_like_hss(&plain, &w, &v)
        })?;
        let (f, t_factor) = median_time(cfg.repeats, || ulv_factor(&h))?;
        let u: Vec<f64> = (0..exact.ncols()).map(|_| rng.random::<f64>()).collect();
        let oracle = within(cfg.dense_budget, exact.nrows(), exact.ncols());
        let b = if oracle { matvec_dense(&exact, &u)? } else { matvec_nodewise(h.as_hier(), &u)? };
        let (uh, t_solve) = median_time(cfg.repeats, || f.solve(&b))?;
        let residual = relative_error(&matvec_nodewise(h.as_hier(), &uh)?, &b);
        let forward = oracle.then(|| relative_error(&uh, &u));
        report.push(vec![
            ("n", int(n)),
            ("geometry", Value::from(cfg.geometry.to_string())),
            ("t_constr", num(t_constr)),
            ("t_factor", num(t_factor)),
            ("t_solve", num(t_solve)),
            ("forward_error", opt(forward)),
            ("residual", num(residual)),
            ("max_rank", int(h.max_rank())),
            ("order", int(params.order)),
            ("tau", num(params.tau)),
            ("svd_tol", num(params.svd_tol)),
            ("leaf_cap", int(params.leaf_capacity)),
            ("seed", Value::from(cfg.seed)),
        ]);
    }
    Ok(report)
}

fn laplace_dirichlet(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let curve = cfg.curve()?;
    let choice = cfg.choice(cfg.first_tol()?)?;
    let params = choice.hss_params(cfg.leaf_capacity);
    let mut report = ExperimentReport::new(cfg.experiment.name());
    for &n in &cfg.sizes {
        let problem = DirichletProblem::new(curve, DIRICHLET_SOURCE, dirichlet_target(curve), n)?;
        let (a, rhs, _) = problem.system()?;
        let kernel: SharedKernel = Arc::new(a.clone());
        let (h, t_constr) = median_time(cfg.repeats, || HssMatrix::from_kernel(kernel.clone(), &params))?;
        let (f, t_factor) = median_time(cfg.repeats, || ulv_factor(&h))?;
        let (sigma, t_solve) = median_time(cfg.repeats, || f.solve(&rhs))?;
        let x = problem.target;
        let error = (a.potential(&sigma, x)? - problem.exact(x)).abs();
        let (max_err, cond) = if within(cfg.dense_budget, n, n) {
            let dense = assemble_dense(&a, cfg.dense_budget)?;
            let max_err = (&dense - h.to_dense(cfg.dense_budget)?).amax();
            let cond = (n <= COND_LIMIT).then(|| {
                let s = dense.singular_values();
                s.max() / s.min()
            });
            (Some(max_err), cond)
        } else {
            (None, None)
        };
        report.push(vec![
            ("n", int(n)),
            ("curve", Value::from(curve.to_string())),
            ("error", num(error)),
            ("max_err", opt(max_err)),
            ("cond", opt(cond)),
            ("t_constr", num(t_constr)),
            ("t_factor", num(t_factor)),
            ("t_solve", num(t_solve)),
            ("max_rank", int(h.max_rank())),
            ("levels", int(h.tree().num_levels())),
            ("order", int(params.order)),
            ("tau", num(params.tau)),
            ("svd_tol", num(params.svd_tol)),
            ("leaf_cap", int(params.leaf_capacity)),
            ("seed", Value::from(cfg.seed)),
        ]);
    }
    Ok(report)
}

/// Exact ε-rank of the block between the root's two children, and the
/// size of the corresponding coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankComparison {
    pub block_rows: usize,
    pub block_cols: usize,
    pub eps_rank: usize,
    pub coupling_size: usize,
}

pub fn compare_ranks(h: &HssMatrix, kernel: &dyn KernelMatrix, eps: f64, budget: usize) -> Result<RankComparison> {
    let t = h.tree();
    let children = &t.node(t.root()).children;
    if children.len() != 2 {
        return Err(SmashError::Unsupported("root needs two children".into()));
    }
    let (a, b) = (children[0], children[1]);
    let (rows, cols) = (t.row_indices(a), t.col_indices(b));
    if !within(budget, rows.len(), cols.len()) {
        return Err(SmashError::DenseBudget { rows: rows.len(), cols: cols.len(), budget });
    }
    let block = kernel.block(rows, cols);
    Ok(RankComparison {
        block_rows: rows.len(),
        block_cols: cols.len(),
        eps_rank: eps_rank(&block, eps)?,
        coupling_size: h.row_rank(a).max(h.col_rank(b)),
    })
}

fn rank_study(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let curve = cfg.curve()?;
    let mut report = ExperimentReport::new(cfg.experiment.name());
    for &n in &cfg.sizes {
        let problem = DirichletProblem::new(curve, DIRICHLET_SOURCE, dirichlet_target(curve), n)?;
        let kernel: SharedKernel = Arc::new(problem.system()?.0);
        for &eps in &cfg.tolerances {
            let params = cfg.choice(eps)?.hss_params(cfg.leaf_capacity);
            let h = HssMatrix::from_kernel(kernel.clone(), &params)?;
            let (r_eps, size) = match compare_ranks(&h, kernel.as_ref(), eps, cfg.dense_budget) {
                Ok(c) => (Some(c.eps_rank), c.coupling_size),
                Err(SmashError::DenseBudget { .. }) => {
                    let (a, b) = (h.tree().node(h.tree().root()).children[0], h.tree().node(h.tree().root()).children[1]);
                    (None, h.row_rank(a).max(h.col_rank(b)))
                }
                Err(e) => return Err(e),
            };
            report.push(vec![
                ("n", int(n)),
                ("curve", Value::from(curve.to_string())),
                ("eps", num(eps)),
                ("block_size", int(n / 2)),
                ("eps_rank", r_eps.map_or(Value::Null, int)),
                ("coupling_size", int(size)),
                ("order", int(params.order)),
                ("tau", num(params.tau)),
                ("svd_tol", num(params.svd_tol)),
                ("leaf_cap", int(params.leaf_capacity)),
                ("seed", Value::from(cfg.seed)),
            ]);
        }
    }
    Ok(report)
}

fn storage_study(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let curve = cfg.curve()?;
    let mut report = ExperimentReport::new(cfg.experiment.name());
    const MB: f64 = 1024.0 * 1024.0;
    for &n in &cfg.sizes {
        let problem = DirichletProblem::new(curve, DIRICHLET_SOURCE, dirichlet_target(curve), n)?;
        let kernel: SharedKernel = Arc::new(problem.system()?.0);
        for &eps in &cfg.tolerances {
            let params = cfg.choice(eps)?.hss_params(cfg.leaf_capacity);
            let h = HssMatrix::from_kernel(kernel.clone(), &params)?;
            let s = storage_report(h.as_hier());
            report.push(vec![
                ("n", int(n)),
                ("curve", Value::from(curve.to_string())),
                ("eps_far", num(eps)),
                ("svd_tol", num(params.svd_tol)),
                ("dense_mb", num(s.dense as f64 / MB)),
                ("hss0_mb", num(s.dense_generators as f64 / MB)),
                ("compressed_mb", num(s.compressed as f64 / MB)),
                ("ratio_hss0", num(s.compressed as f64 / s.dense_generators as f64)),
                ("ratio_dense", num(s.compressed as f64 / s.dense as f64)),
                ("leaf_coef_mb", num(s.breakdown.leaf_coefficients as f64 / MB)),
                ("transfer_coef_mb", num(s.breakdown.transfer_coefficients as f64 / MB)),
                ("index_mb", num(s.breakdown.index_sets as f64 / MB)),
                ("nearfield_mb", num(s.breakdown.nearfield_blocks as f64 / MB)),
                ("max_rank", int(h.max_rank())),
                ("order", int(params.order)),
                ("tau", num(params.tau)),
                ("leaf_cap", int(params.leaf_capacity)),
                ("seed", Value::from(cfg.seed)),
            ]);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_heuristic_rows() {
        let c = choose_params(1e-7, 2).unwrap();
        assert_eq!((c.tau, c.order), (0.65, 22));
        assert_eq!(choose_params(1e-8, 1).unwrap().order, 21);
        assert_eq!(choose_params(1e-10, 1).unwrap().order, 25);
        assert!((choose_params(1e-10, 1).unwrap().svd_tol - 1e-11).abs() < 1e-24);
        assert_eq!(choose_params(0.5, 1).unwrap().order, 5);
        assert!(choose_params(1.0, 1).is_err());
    }

    #[test]
    fn eps_rank_cases() {
        assert_eq!(eps_rank(&DMatrix::identity(6, 6), 0.5).unwrap(), 6);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.5, 1e-4]));
        assert_eq!(eps_rank(&d, 1e-3).unwrap(), 2);
        assert!(matches!(eps_rank(&DMatrix::zeros(3, 3), 0.1), Err(SmashError::ZeroMatrix)));
    }

    #[test]
    fn bound_formula_values() {
        let zero = BoundInputs::uniform(2, 2.0, 1, 0.0, 0.0, 1);
        assert_eq!(error_bound(&zero, Structure::Hss).uniform_rank, 0.0);
        let b = BoundInputs::uniform(2, 2.0, 2, 1e-12, 1e-10, 1);
        let got = error_bound(&b, Structure::Hss).uniform_rank;
        assert!((got - 1024.0 * 8.16e-10).abs() < 1e-18, "{got:e}");
        for structure in [Structure::Hss, Structure::H2] {
            let b = BoundInputs::uniform(20, 2.0, 6, 1e-9, 1e-8, 2);
            let e = error_bound(&b, structure);
            assert!(e.level_resolved <= e.uniform_rank);
        }
    }

    #[test]
    fn report_csv_marks_absent_values() {
        let mut r = ExperimentReport::new("t");
        r.push(vec![("n", int(4)), ("x", Value::Null), ("y", num(0.5))]);
        assert_eq!(r.to_csv(), "n,x,y\n4,,0.5\n");
        assert_eq!(r.value(0, "y"), Some(0.5));
        assert_eq!(r.value(0, "x"), None);
        assert_eq!(r.to_json()[0]["n"], 4);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("nope".parse::<Experiment>().is_err());
    }
}
