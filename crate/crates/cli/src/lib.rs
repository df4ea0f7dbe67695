//! Driver for `seqhom-core`: configuration files, the solve, spectral and
//! bench runs, and their output files.

pub mod config;
pub mod output;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use seqhom_core::fem::{build_mesh, interpolate, ProblemInstance};
use seqhom_core::homotopy::{kkt_residual, prolongate_iterate, solve_with_clock, Clock, HomotopyContext, Iterate, NoClock};
use seqhom_core::saddle::{KrylovKind, PreconditionerVariant};
use seqhom_core::spectral::{generate, iteration_study, run_trial, sample_spec, Regime};

pub use config::{parse_config, parse_config_str, ConfigError, Mode, RunConfig, Target};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Io { path: PathBuf, source: io::Error },
    Core(seqhom_core::Error),
}

impl CliError {
    /// 3 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io { .. } | CliError::Core(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<seqhom_core::Error> for CliError {
    fn from(e: seqhom_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_at(path))
}

/// `SEQHOM_THREADS` must be a positive integer when set. The solver is
/// single-threaded, so the value is only checked.
pub fn check_threads(value: Option<&str>) -> Result<(), ConfigError> {
    match value {
        None => Ok(()),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(()),
            _ => Err(ConfigError {
                line: None,
                message: format!("SEQHOM_THREADS must be a positive integer, got '{v}'"),
            }),
        },
    }
}

struct WallClock(Instant);

impl Clock for WallClock {
    fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

pub fn build_instance(cfg: &RunConfig, n: usize) -> Result<ProblemInstance, CliError> {
    let mesh = build_mesh(cfg.dim, n)?;
    let nodes = mesh.num_nodes();
    let target = match cfg.target {
        Target::Constant(v) => vec![v; nodes],
        Target::Sine => interpolate(&mesh, |x| x.iter().map(|c| (std::f64::consts::PI * c).sin()).product()),
    };
    Ok(ProblemInstance::new(
        mesh,
        cfg.params,
        vec![cfg.q_lower; nodes],
        vec![cfg.q_upper; nodes],
        target,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iterations: usize,
    pub trials: usize,
    pub total_krylov_iterations: usize,
    pub max_step_iterations: usize,
    pub median_step_iterations: f64,
    pub lambda: f64,
    pub kkt_residual: f64,
    pub wall_ms: f64,
}

fn median(mut v: Vec<usize>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        0.5 * (v[m - 1] + v[m]) as f64
    }
}

/// Solves on every level, coarsest first, warm-starting each from the
/// previous one. Writes `iterations.csv`, the fields and `summary.txt` for
/// the finest level into `cfg.output`; coarser logs go to
/// `iterations_n<size>.csv`.
pub fn run_solve(cfg: &RunConfig) -> Result<SolveReport, CliError> {
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let start = Instant::now();
    let mut prev: Option<(ProblemInstance, Iterate)> = None;
    let mut report = None;
    for (lvl, &n) in cfg.levels.iter().enumerate() {
        let inst = build_instance(cfg, n)?;
        let z0 = match &prev {
            Some((coarse, z)) => prolongate_iterate(coarse, &inst, z)?,
            None => Iterate::zeros(inst.num_nodes()),
        };
        let out = if cfg.wall_clock {
            solve_with_clock(&inst, &cfg.solver, z0, &WallClock(Instant::now()))?
        } else {
            solve_with_clock(&inst, &cfg.solver, z0, &NoClock)?
        };
        let last = lvl + 1 == cfg.levels.len();
        let log = if last {
            dir.join("iterations.csv")
        } else {
            dir.join(format!("iterations_n{n}.csv"))
        };
        write(&log, &output::iterations_csv(&out.records))?;
        if last {
            let ctx = HomotopyContext::new(&inst, &cfg.solver)?;
            let steps: Vec<usize> = out.records.iter().map(|r| r.krylov_iters_step).collect();
            let r = SolveReport {
                converged: out.converged,
                outer_iterations: out.outer_iterations,
                trials: out.records.len(),
                total_krylov_iterations: out.total_krylov_iterations,
                max_step_iterations: steps.iter().copied().max().unwrap_or(0),
                median_step_iterations: median(steps),
                lambda: out.lambda,
                kkt_residual: kkt_residual(&ctx, &out.z)?,
                wall_ms: if cfg.wall_clock { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
            };
            for (name, v) in [("q", &out.z.q), ("u", &out.z.u), ("y", &out.z.y)] {
                output::write_field(dir, &inst.mesh, name, v).map_err(io_at(dir))?;
            }
            write(&dir.join("summary.txt"), &summary(cfg, &r))?;
            report = Some(r);
        }
        prev = Some((inst, out.z));
    }
    Ok(report.expect("levels are non-empty"))
}

fn summary(cfg: &RunConfig, r: &SolveReport) -> String {
    format!(
        "dim: {}\nn: {}\nvariant: {}\nkrylov: {}\nconverged: {}\nouter_iterations: {}\ntrials: {}\n\
         total_krylov_iterations: {}\nmax_step_iterations: {}\nmedian_step_iterations: {}\n\
         final_lambda: {:e}\nkkt_residual: {:e}\nwall_ms: {:.1}\n",
        cfg.dim,
        cfg.n(),
        cfg.solver.variant,
        cfg.solver.krylov,
        r.converged,
        r.outer_iterations,
        r.trials,
        r.total_krylov_iterations,
        r.max_step_iterations,
        r.median_step_iterations,
        r.lambda,
        r.kkt_residual,
        r.wall_ms
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub trials: usize,
    pub violations: usize,
    /// Block-triangular trials whose GMRES run needed more than three steps.
    pub gmres_failures: usize,
}

impl SpectralReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.gmres_failures == 0
    }
}

pub const SPECTRAL_HEADER: &str = "regime,seed,n1,n2,n3,min_eig,max_eig,violations,max_excess,gmres_iters";

/// Random instances for every regime and `cfg.spectral.seeds` seeds from
/// `cfg.seed`; one row per instance in `spectral.csv`.
pub fn run_spectral(cfg: &RunConfig) -> Result<SpectralReport, CliError> {
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let sc = &cfg.spectral;
    let mut csv = format!("{SPECTRAL_HEADER}\n");
    let mut rep = SpectralReport {
        trials: 0,
        violations: 0,
        gmres_failures: 0,
    };
    for regime in Regime::ALL {
        for seed in cfg.seed..cfg.seed + sc.seeds as u64 {
            let t = run_trial(regime, sc.dims, seed, sc.slack)?;
            let gmres = if regime == Regime::BlockTriangular {
                let blocks = generate(&sample_spec(regime, sc.dims, seed)?)?;
                let st = iteration_study(&blocks, seed, 1e-12, 50)?;
                if !(st.gmres_pl.converged && st.gmres_pl.iterations <= 3) {
                    rep.gmres_failures += 1;
                }
                st.gmres_pl.iterations.to_string()
            } else {
                String::new()
            };
            rep.trials += 1;
            rep.violations += usize::from(t.violations > 0);
            csv.push_str(&format!(
                "{},{},{},{},{},{:e},{:e},{},{:e},{}\n",
                regime.name(),
                seed,
                t.spec.n1,
                t.spec.n2,
                t.spec.n3,
                t.min_eig,
                t.max_eig,
                t.violations,
                t.max_excess,
                gmres
            ));
        }
    }
    write(&dir.join("spectral.csv"), &csv)?;
    Ok(rep)
}

pub const BENCH_HEADER: &str =
    "variant,krylov,converged,outer_iterations,trials,total_krylov_iterations,max_step_iterations,median_step_iterations,wall_ms";

/// One solve per variant into `<output>/<variant>/`, plus `bench.csv`.
/// Returns whether every run converged.
pub fn run_bench(cfg: &RunConfig, variants: &[PreconditionerVariant]) -> Result<bool, CliError> {
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut csv = format!("{BENCH_HEADER}\n");
    let mut all = true;
    for &v in variants {
        let mut c = cfg.clone();
        c.solver.variant = v;
        if v == PreconditionerVariant::BlockTriangularFree {
            c.solver.krylov = KrylovKind::Gmres;
        }
        c.output = dir.join(v.name());
        let start = Instant::now();
        let r = run_solve(&c)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        all &= r.converged;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.1}\n",
            v,
            c.solver.krylov,
            r.converged,
            r.outer_iterations,
            r.trials,
            r.total_krylov_iterations,
            r.max_step_iterations,
            r.median_step_iterations,
            ms
        ));
    }
    write(&dir.join("bench.csv"), &csv)?;
    Ok(all)
}

/// Runs whatever `cfg.mode` asks for. `Ok(false)` means the run finished
/// but did not converge or found interval violations.
pub fn run(cfg: &RunConfig) -> Result<bool, CliError> {
    match cfg.mode {
        Mode::Solve => run_solve(cfg).map(|r| r.converged),
        Mode::Spectral => run_spectral(cfg).map(|r| r.passed()),
        Mode::BenchSweep => run_bench(cfg, &cfg.bench_variants),
    }
}
