use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use smash::apply::{matvec_dense, matvec_nodewise, relative_error, ulv_factor};
use smash::bench::{
    cauchy_like_hss, choose_params, dirichlet_target, error_bound, grid_cauchy, median_time, num, opt, run_experiment,
    storage_report, BoundInputs, Experiment, ExperimentConfig, ExperimentReport, DIRICHLET_SOURCE,
};
use smash::io::{read_vector, save_matrix, write_vector, StoredMatrix, VectorFormat};
use smash::kernel::{
    assemble_dense, cauchy_points, random_generators, CauchyMatrix, Curve, DirichletProblem, Geometry, KernelMatrix,
    DEFAULT_DENSE_BUDGET,
};
use smash::{H2Matrix, H2Params, HssMatrix, HssParams, SharedKernel, SmashError, Structure};

#[derive(Parser)]
#[command(name = "smash", version, about = "Hierarchical compression of kernel matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a kernel matrix and report ranks, storage and accuracy.
    Build {
        #[command(flatten)]
        common: Common,
        /// Write the compressed matrix to this container file.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Multiply the compressed matrix with a vector.
    Matvec {
        #[command(flatten)]
        common: Common,
        /// Input vector (random when absent).
        #[arg(long)]
        vector: Option<PathBuf>,
        /// Write the product here.
        #[arg(long)]
        result: Option<PathBuf>,
        /// Vector files are raw little-endian doubles instead of text.
        #[arg(long)]
        binary: bool,
    },
    /// Solve a linear system with the HSS ULV factorization.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Right-hand side (by default `A u` for a random `u`, or the
        /// Dirichlet data for `laplace-dlp`).
        #[arg(long)]
        rhs: Option<PathBuf>,
        #[arg(long)]
        result: Option<PathBuf>,
        #[arg(long)]
        binary: bool,
        /// Largest accepted relative residual.
        #[arg(long, default_value_t = 1e-9)]
        max_residual: f64,
    },
    /// Run one of the benchmark studies.
    Experiment {
        /// h2_matvec_scaling, cauchy_solve, laplace_dirichlet, rank_study or storage_study
        name: String,
        #[command(flatten)]
        common: Common,
        /// Timing repetitions (the median is reported).
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Cauchy,
    CauchyLike,
    LaplaceDlp,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Interval,
    Grid2d,
    Ramhead,
    Sunflower,
    Honeybee,
    Snail,
    Circle,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Interval => Geometry::Curve(Curve::Interval),
            GeometryArg::Grid2d => Geometry::Grid,
            GeometryArg::Ramhead => Geometry::Curve(Curve::RamHead),
            GeometryArg::Sunflower => Geometry::Curve(Curve::Sunflower),
            GeometryArg::Honeybee => Geometry::Curve(Curve::Honeybee),
            GeometryArg::Snail => Geometry::Curve(Curve::Snail),
            GeometryArg::Circle => Geometry::Curve(Curve::Circle),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StructureArg {
    Hss,
    H2,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "cauchy")]
    kernel: KernelKind,
    #[arg(long, value_enum)]
    geometry: Option<GeometryArg>,
    /// Number of points (comma separated list for experiments).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_enum, default_value = "hss")]
    structure: StructureArg,
    /// Target accuracy; sets τ, the order and ε_SVD (comma separated list
    /// for the rank and storage studies).
    #[arg(long, value_delimiter = ',')]
    tol: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    leaf_cap: usize,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    svd_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest dense matrix (entries) the exact oracles may touch.
    #[arg(long, default_value_t = DEFAULT_DENSE_BUDGET)]
    dense_budget: usize,
    /// Report destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

/// A report plus an optional numerical violation; the report is written
/// either way.
type Outcome = std::result::Result<(ExperimentReport, Option<String>), SmashError>;

/// Kernel of the requested problem plus what the solvers need to check it.
struct Problem {
    kernel: SharedKernel,
    geometry: Geometry,
    dirichlet: Option<DirichletProblem>,
    /// Cauchy-like generators, applied on top of a plain Cauchy HSS matrix.
    generators: Option<(SharedKernel, nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>)>,
}

impl Common {
    fn geometry(&self) -> Geometry {
        match (self.geometry, self.kernel) {
            (Some(g), _) => g.into(),
            (None, KernelKind::LaplaceDlp) => Geometry::Curve(Curve::RamHead),
            (None, _) => Geometry::Curve(Curve::Interval),
        }
    }

    fn single_n(&self) -> std::result::Result<usize, SmashError> {
        match self.n.as_slice() {
            [] => Ok(1600),
            [n] => Ok(*n),
            _ => Err(SmashError::InvalidInput("give a single --n".into())),
        }
    }

    fn dim(&self) -> usize {
        if self.geometry() == Geometry::Grid {
            2
        } else {
            1
        }
    }

    fn hss_params(&self) -> smash::Result<HssParams> {
        let mut p = match self.tol.first() {
            Some(&eps) => choose_params(eps, self.dim())?.hss_params(self.leaf_cap),
            None => HssParams { leaf_capacity: self.leaf_cap, ..HssParams::default() },
        };
        if let Some(t) = self.tau {
            p.tau = t;
        }
        if let Some(r) = self.order {
            p.order = r;
        }
        if let Some(e) = self.svd_tol {
            p.svd_tol = e;
            p.rank_tol = e;
        }
        Ok(p)
    }

    fn h2_params(&self) -> smash::Result<H2Params> {
        let mut p = match self.tol.first() {
            Some(&eps) => choose_params(eps, self.dim())?.h2_params(self.leaf_cap),
            None => H2Params { leaf_capacity: self.leaf_cap, ..H2Params::default() },
        };
        if let Some(t) = self.tau {
            p.tau = t;
        }
        if let Some(r) = self.order {
            p.order = r;
        }
        Ok(p)
    }

    fn problem(&self) -> smash::Result<Problem> {
        let n = self.single_n()?;
        let geometry = self.geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.kernel {
            KernelKind::Cauchy => {
                let kernel: SharedKernel = if geometry == Geometry::Grid {
                    let m = (n as f64).sqrt().round() as usize;
                    if m * m != n {
                        return Err(SmashError::InvalidInput(format!("grid size {n} is not a perfect square")));
                    }
                    Arc::new(grid_cauchy(m, 1.0)?)
                } else {
                    let (x, y) = cauchy_points(geometry, n, self.seed)?;
                    Arc::new(CauchyMatrix::new(&x, &y, Complex64::new(0.0, 0.0))?)
                };
                Ok(Problem { kernel, geometry, dirichlet: None, generators: None })
            }
            KernelKind::CauchyLike => {
                let (x, y) = cauchy_points(geometry, n, rng.random())?;
                let w = random_generators(x.len(), 2, &mut rng);
                let v = random_generators(y.len(), 2, &mut rng);
                let exact = CauchyMatrix::cauchy_like(&x, &y, w.clone(), v.clone())?;
                let base: SharedKernel = Arc::new(exact.without_weights());
                Ok(Problem { kernel: Arc::new(exact), geometry, dirichlet: None, generators: Some((base, w, v)) })
            }
            KernelKind::LaplaceDlp => {
                let Geometry::Curve(curve) = geometry else {
                    return Err(SmashError::InvalidInput("laplace-dlp needs a closed curve".into()));
                };
                if curve == Curve::Interval {
                    return Err(SmashError::InvalidInput("laplace-dlp needs a closed curve".into()));
                }
                let problem = DirichletProblem::new(curve, DIRICHLET_SOURCE, dirichlet_target(curve), n)?;
                let kernel: SharedKernel = Arc::new(problem.system()?.0);
                Ok(Problem { kernel, geometry, dirichlet: Some(problem), generators: None })
            }
        }
    }

    fn emit(&self, report: &ExperimentReport) -> smash::Result<()> {
        let text = if self.json {
            let mut s = serde_json::to_string_pretty(&report.to_json())?;
            s.push('\n');
            s
        } else {
            report.to_csv()
        };
        match &self.out {
            Some(path) => fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

enum Built {
    Hss(HssMatrix),
    H2(H2Matrix),
}

impl Built {
    fn hier(&self) -> &smash::HierMatrix {
        match self {
            Built::Hss(h) => h.as_hier(),
            Built::H2(h) => h.as_hier(),
        }
    }

    fn bound(&self) -> smash::bench::ErrorBound {
        match self {
            Built::Hss(h) => error_bound(&BoundInputs::for_hss(h), Structure::Hss),
            Built::H2(h) => error_bound(&BoundInputs::for_h2(h), Structure::H2),
        }
    }
}

fn build(common: &Common, problem: &Problem) -> smash::Result<(Built, f64)> {
    match common.structure {
        StructureArg::Hss => {
            let params = common.hss_params()?;
            let (h, t) = median_time(1, || match &problem.generators {
                Some((base, w, v)) => cauchy_like_hss(&HssMatrix::from_kernel(base.clone(), &params)?, w, v),
                None => HssMatrix::from_kernel(problem.kernel.clone(), &params),
            })?;
            Ok((Built::Hss(h), t))
        }
        StructureArg::H2 => {
            let params = common.h2_params()?;
            let (h, t) = median_time(1, || H2Matrix::from_kernel(problem.kernel.clone(), &params))?;
            Ok((Built::H2(h), t))
        }
    }
}

fn structure_name(s: StructureArg) -> &'static str {
    match s {
        StructureArg::Hss => "hss",
        StructureArg::H2 => "h2",
    }
}

fn kernel_name(k: KernelKind) -> &'static str {
    match k {
        KernelKind::Cauchy => "cauchy",
        KernelKind::CauchyLike => "cauchy-like",
        KernelKind::LaplaceDlp => "laplace-dlp",
    }
}

fn within(budget: usize, k: &dyn KernelMatrix) -> bool {
    k.nrows().checked_mul(k.ncols()).is_some_and(|e| e <= budget)
}

fn header(common: &Common, problem: &Problem, m: &Built) -> Vec<(&'static str, Value)> {
    let h = m.hier();
    vec![
        ("kernel", Value::from(kernel_name(common.kernel))),
        ("geometry", Value::from(problem.geometry.to_string())),
        ("structure", Value::from(structure_name(common.structure))),
        ("n", Value::from(common.n.first().copied().unwrap_or(1600))),
        ("rows", Value::from(h.nrows())),
        ("levels", Value::from(h.tree().num_levels())),
        ("max_rank", Value::from(h.max_rank())),
    ]
}

fn echo(common: &Common) -> smash::Result<Vec<(&'static str, Value)>> {
    let (order, tau) = match common.structure {
        StructureArg::Hss => {
            let p = common.hss_params()?;
            (p.order, p.tau)
        }
        StructureArg::H2 => {
            let p = common.h2_params()?;
            (p.order, p.tau)
        }
    };
    let svd = match common.structure {
        StructureArg::Hss => num(common.hss_params()?.svd_tol),
        StructureArg::H2 => Value::Null,
    };
    Ok(vec![
        ("order", Value::from(order)),
        ("tau", num(tau)),
        ("svd_tol", svd),
        ("leaf_cap", Value::from(common.leaf_cap)),
        ("seed", Value::from(common.seed)),
    ])
}

fn cmd_build(common: &Common, save: Option<&PathBuf>) -> Outcome {
    let problem = common.problem()?;
    let (m, t_constr) = build(common, &problem)?;
    let h = m.hier();
    let storage = storage_report(h);
    let bound = m.bound();
    let relerr = if within(common.dense_budget, problem.kernel.as_ref()) {
        let a = assemble_dense(problem.kernel.as_ref(), common.dense_budget)?;
        Some((&a - h.to_dense(common.dense_budget)?).norm() / a.norm())
    } else {
        None
    };
    if let Some(path) = save {
        let stored = match &m {
            Built::Hss(x) => StoredMatrix::Hss(x.clone()),
            Built::H2(x) => StoredMatrix::H2(x.clone()),
        };
        save_matrix(path, &stored)?;
    }
    let mut row = header(common, &problem, &m);
    row.extend([
        ("t_constr", num(t_constr)),
        ("relerr_fro", opt(relerr)),
        ("bound_level", num(bound.level_resolved)),
        ("bound_uniform", num(bound.uniform_rank)),
        ("compressed_bytes", Value::from(storage.compressed)),
        ("hss0_bytes", Value::from(storage.dense_generators)),
        ("dense_bytes", Value::from(storage.dense)),
    ]);
    row.extend(echo(common)?);
    let mut report = ExperimentReport::new("build");
    report.push(row);
    // the bounds are only meaningful for Cauchy-type expansions
    let violation = match (relerr, common.kernel) {
        (Some(e), KernelKind::Cauchy | KernelKind::CauchyLike) if e > bound.uniform_rank => {
            Some(format!("relative error {e:e} exceeds the a priori bound {:e}", bound.uniform_rank))
        }
        _ => None,
    };
    Ok((report, violation))
}

fn vector_format(binary: bool) -> VectorFormat {
    if binary {
        VectorFormat::Binary
    } else {
        VectorFormat::Text
    }
}

fn cmd_matvec(common: &Common, vector: Option<&PathBuf>, result: Option<&PathBuf>, binary: bool) -> Outcome {
    let problem = common.problem()?;
    let (m, t_constr) = build(common, &problem)?;
    let h = m.hier();
    let q = match vector {
        Some(path) => read_vector(path, vector_format(binary))?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed.wrapping_add(1));
            (0..h.ncols()).map(|_| rng.random::<f64>()).collect()
        }
    };
    let (z, t_matvec) = median_time(3, || matvec_nodewise(h, &q))?;
    let relerr = if within(common.dense_budget, problem.kernel.as_ref()) {
        Some(relative_error(&z, &matvec_dense(problem.kernel.as_ref(), &q)?))
    } else {
        None
    };
    if let Some(path) = result {
        write_vector(path, &z, vector_format(binary))?;
    }
    let mut row = header(common, &problem, &m);
    row.extend([("t_constr", num(t_constr)), ("t_matvec", num(t_matvec)), ("relerr", opt(relerr))]);
    row.extend(echo(common)?);
    let mut report = ExperimentReport::new("matvec");
    report.push(row);
    Ok((report, None))
}

fn cmd_solve(common: &Common, rhs: Option<&PathBuf>, result: Option<&PathBuf>, binary: bool, max_residual: f64) -> Outcome {
    if matches!(common.structure, StructureArg::H2) {
        return Err(SmashError::Unsupported("the direct solver needs --structure hss".into()));
    }
    let problem = common.problem()?;
    let (m, t_constr) = build(common, &problem)?;
    let Built::Hss(h) = &m else { unreachable!("checked above") };
    let (f, t_factor) = median_time(1, || ulv_factor(h))?;
    let mut exact_u = None;
    let b = match (rhs, &problem.dirichlet) {
        (Some(path), _) => read_vector(path, vector_format(binary))?,
        (None, Some(d)) => d.system()?.1,
        (None, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed.wrapping_add(1));
            let u: Vec<f64> = (0..h.ncols()).map(|_| rng.random::<f64>()).collect();
            let b = if within(common.dense_budget, problem.kernel.as_ref()) {
                matvec_dense(problem.kernel.as_ref(), &u)?
            } else {
                matvec_nodewise(h.as_hier(), &u)?
            };
            exact_u = Some(u);
            b
        }
    };
    let (x, t_solve) = median_time(1, || f.solve(&b))?;
    let residual = relative_error(&matvec_nodewise(h.as_hier(), &x)?, &b);
    let forward = exact_u.map(|u| relative_error(&x, &u));
    let pointwise = match &problem.dirichlet {
        Some(d) if rhs.is_none() => {
            let (dlp, _, _) = d.system()?;
            Some((dlp.potential(&x, d.target)? - d.exact(d.target)).abs())
        }
        _ => None,
    };
    if let Some(path) = result {
        write_vector(path, &x, vector_format(binary))?;
    }
    let mut row = header(common, &problem, &m);
    row.extend([
        ("t_constr", num(t_constr)),
        ("t_factor", num(t_factor)),
        ("t_solve", num(t_solve)),
        ("residual", num(residual)),
        ("forward_error", opt(forward)),
        ("pointwise_error", opt(pointwise)),
    ]);
    row.extend(echo(common)?);
    let mut report = ExperimentReport::new("solve");
    report.push(row);
    let violation = (!(residual <= max_residual)).then(|| format!("residual {residual:e} exceeds {max_residual:e}"));
    Ok((report, violation))
}

fn cmd_experiment(name: &str, common: &Common, repeats: usize) -> Outcome {
    let experiment: Experiment = name.parse()?;
    let mut config = ExperimentConfig::new(experiment);
    if let Some(g) = common.geometry {
        config.geometry = g.into();
    }
    if !common.n.is_empty() {
        config.sizes = common.n.clone();
    }
    if !common.tol.is_empty() {
        config.tolerances = common.tol.clone();
    }
    config.leaf_capacity = common.leaf_cap;
    config.tau = common.tau;
    config.order = common.order;
    config.svd_tol = common.svd_tol;
    config.seed = common.seed;
    config.dense_budget = common.dense_budget;
    config.repeats = repeats;
    Ok((run_experiment(&config)?, None))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, outcome) = match &cli.command {
        Command::Build { common, save } => (common, cmd_build(common, save.as_ref())),
        Command::Matvec { common, vector, result, binary } => {
            (common, cmd_matvec(common, vector.as_ref(), result.as_ref(), *binary))
        }
        Command::Solve { common, rhs, result, binary, max_residual } => {
            (common, cmd_solve(common, rhs.as_ref(), result.as_ref(), *binary, *max_residual))
        }
        Command::Experiment { name, common, repeats } => (common, cmd_experiment(name, common, *repeats)),
    };
    match outcome {
        Ok((report, violation)) => {
            if let Err(e) = common.emit(&report) {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
            match violation {
                Some(msg) => {
                    eprintln!("numerical failure: {msg}");
                    ExitCode::from(3)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
