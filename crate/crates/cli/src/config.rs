//! `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys may appear at most
//! once. Every key has a default, so an empty file describes the hard 2D
//! benchmark on a 40 x 40 mesh.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use seqhom_core::fem::ProblemParams;
use seqhom_core::homotopy::SolverConfig;
use seqhom_core::saddle::{KrylovKind, PreconditionerVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Spectral,
    BenchSweep,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "solve" => Ok(Mode::Solve),
            "spectral" => Ok(Mode::Spectral),
            "bench" | "bench-sweep" => Ok(Mode::BenchSweep),
            _ => Err(format!("unknown mode '{s}' (expected solve, spectral or bench-sweep)")),
        }
    }
}

/// Desired state `u_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Constant(f64),
    /// Product of `sin(pi x_i)` over the coordinates.
    Sine,
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "sine" {
            return Ok(Target::Sine);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Target::Constant(v)),
            _ => Err(format!("target must be a finite number or 'sine', got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConfig {
    pub seeds: usize,
    pub dims: (usize, usize, usize),
    /// Absolute slack on the interval endpoints.
    pub slack: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            seeds: 200,
            dims: (40, 25, 15),
            slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub dim: usize,
    /// Elements per side of each warm-start level, coarsest first; the last
    /// entry is the mesh of the final solve.
    pub levels: Vec<usize>,
    pub params: ProblemParams,
    pub q_lower: f64,
    pub q_upper: f64,
    pub target: Target,
    pub solver: SolverConfig,
    pub output: PathBuf,
    /// First seed of the spectral sweep.
    pub seed: u64,
    /// Fill `wall_ms` in the iteration log; off by default so that logs are
    /// byte-for-byte reproducible.
    pub wall_clock: bool,
    pub spectral: SpectralConfig,
    pub bench_variants: Vec<PreconditionerVariant>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Solve,
            dim: 2,
            levels: vec![40],
            params: ProblemParams::default(),
            q_lower: -50.0,
            q_upper: 50.0,
            target: Target::Constant(1.0),
            solver: SolverConfig::default(),
            output: PathBuf::from("out"),
            seed: 0,
            wall_clock: false,
            spectral: SpectralConfig::default(),
            bench_variants: vec![PreconditionerVariant::MatchingSchur, PreconditionerVariant::DecompositionFree],
        }
    }
}

impl RunConfig {
    pub fn n(&self) -> usize {
        *self.levels.last().expect("at least one level")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_str(&text)
}

fn value<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("malformed value '{v}': {e}"))
}

fn finite(v: &str) -> Result<f64, String> {
    let x: f64 = value(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got '{v}'"))
    }
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn usize_list(v: &str) -> Result<Vec<usize>, String> {
    v.split(',').map(|s| value::<usize>(s.trim())).collect()
}

/// Parses three comma-separated block sizes.
pub fn parse_dims(v: &str) -> Result<(usize, usize, usize), String> {
    match usize_list(v)?.as_slice() {
        &[a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected three sizes n1,n2,n3, got '{v}'")),
    }
}

/// Parses a comma-separated list of preconditioner names.
pub fn parse_variants(v: &str) -> Result<Vec<PreconditionerVariant>, String> {
    v.split(',')
        .map(|s| s.trim().parse::<PreconditionerVariant>().map_err(|e| e.to_string()))
        .collect()
}

const KEYS: &[&str] = &[
    "mode",
    "dim",
    "n",
    "levels",
    "a",
    "b",
    "gamma",
    "rho",
    "q_lower",
    "q_upper",
    "target",
    "theta_ref",
    "theta_max",
    "lambda_red",
    "lambda_inc",
    "k_p",
    "k_i",
    "lambda_term",
    "lambda_min",
    "lambda_init",
    "tol",
    "kappa_min",
    "kappa_max",
    "lambda_r0",
    "lambda_r1",
    "krylov_maxit",
    "max_outer",
    "max_trials",
    "riesz_tol",
    "riesz_maxit",
    "variant",
    "solver",
    "chebyshev_steps",
    "chebyshev_lower",
    "chebyshev_upper",
    "output",
    "seed",
    "wall_clock",
    "spectral_seeds",
    "spectral_dims",
    "spectral_slack",
    "bench_variants",
];

fn assign(cfg: &mut RunConfig, cheb: &mut (Option<f64>, Option<f64>), key: &str, v: &str) -> Result<(), String> {
    let s = &mut cfg.solver;
    match key {
        "mode" => cfg.mode = value(v)?,
        "dim" => {
            cfg.dim = value(v)?;
            if cfg.dim != 2 && cfg.dim != 3 {
                return Err(format!("dim must be 2 or 3, got {}", cfg.dim));
            }
        }
        "n" => cfg.levels = vec![value(v)?],
        "levels" => cfg.levels = usize_list(v)?,
        "a" => cfg.params.a = finite(v)?,
        "b" => cfg.params.b = finite(v)?,
        "gamma" => cfg.params.gamma = finite(v)?,
        "rho" => cfg.params.rho = finite(v)?,
        "q_lower" => cfg.q_lower = value(v)?,
        "q_upper" => cfg.q_upper = value(v)?,
        "target" => cfg.target = value(v)?,
        "theta_ref" => s.theta_ref = finite(v)?,
        "theta_max" => s.theta_max = finite(v)?,
        "lambda_red" => s.lambda_red = finite(v)?,
        "lambda_inc" => s.lambda_inc = finite(v)?,
        "k_p" => s.k_p = finite(v)?,
        "k_i" => s.k_i = finite(v)?,
        "lambda_term" => s.lambda_term = finite(v)?,
        "lambda_min" => s.lambda_min = finite(v)?,
        "lambda_init" => s.lambda_init = finite(v)?,
        "tol" => s.tol = finite(v)?,
        "kappa_min" => s.kappa_min = finite(v)?,
        "kappa_max" => s.kappa_max = finite(v)?,
        "lambda_r0" => s.lambda_r0 = finite(v)?,
        "lambda_r1" => s.lambda_r1 = finite(v)?,
        "krylov_maxit" => s.krylov_maxit = value(v)?,
        "max_outer" => s.max_outer = value(v)?,
        "max_trials" => s.max_trials = value(v)?,
        "riesz_tol" => s.riesz_tol = finite(v)?,
        "riesz_maxit" => s.riesz_maxit = value(v)?,
        "variant" => s.variant = v.parse::<PreconditionerVariant>().map_err(|e| e.to_string())?,
        "solver" => s.krylov = v.parse::<KrylovKind>().map_err(|e| e.to_string())?,
        "chebyshev_steps" => s.precond.chebyshev_steps = value(v)?,
        "chebyshev_lower" => cheb.0 = Some(finite(v)?),
        "chebyshev_upper" => cheb.1 = Some(finite(v)?),
        "output" => cfg.output = PathBuf::from(v),
        "seed" => cfg.seed = value(v)?,
        "wall_clock" => cfg.wall_clock = boolean(v)?,
        "spectral_seeds" => cfg.spectral.seeds = value(v)?,
        "spectral_dims" => cfg.spectral.dims = parse_dims(v)?,
        "spectral_slack" => cfg.spectral.slack = finite(v)?,
        "bench_variants" => cfg.bench_variants = parse_variants(v)?,
        _ => unreachable!("key list and match arms disagree"),
    }
    Ok(())
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut cheb = (None, None);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, v) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, v) = (key.trim(), v.trim());
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::at(line, format!("unknown key '{key}'")));
        };
        if v.is_empty() {
            return Err(ConfigError::at(line, format!("missing value for '{key}'")));
        }
        if let Some(prev) = seen.insert(known, line) {
            return Err(ConfigError::at(line, format!("'{key}' already set on line {prev}")));
        }
        if (known == "n" && seen.contains_key("levels")) || (known == "levels" && seen.contains_key("n")) {
            return Err(ConfigError::at(line, "set either 'n' or 'levels', not both"));
        }
        assign(&mut cfg, &mut cheb, known, v).map_err(|m| ConfigError::at(line, m))?;
    }
    if cfg.solver.variant == PreconditionerVariant::BlockTriangularFree && !seen.contains_key("solver") {
        cfg.solver.krylov = KrylovKind::Gmres;
    }
    if !seen.contains_key("rho") {
        cfg.params.rho = if cfg.dim == 3 { 1e-3 } else { 1e-1 };
    }
    cfg.solver.precond.chebyshev_bounds = match cheb {
        (None, None) => None,
        (lo, hi) => {
            let (dlo, dhi) = if cfg.dim == 3 { (0.5, 2.5) } else { (0.5, 2.0) };
            Some((lo.unwrap_or(dlo), hi.unwrap_or(dhi)))
        }
    };
    validate(&cfg, &seen)?;
    Ok(cfg)
}

// Attributes a cross-key failure to the latest line that set one of the
// keys the message names, or one of `extra`.
fn blame(seen: &HashMap<&str, usize>, message: &str, extra: &[&str]) -> ConfigError {
    let lower = message.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .collect();
    let line = KEYS
        .iter()
        .filter(|k| words.contains(k) || extra.contains(k))
        .filter_map(|k| seen.get(k).copied())
        .max();
    ConfigError {
        line,
        message: message.to_string(),
    }
}

fn validate(cfg: &RunConfig, seen: &HashMap<&str, usize>) -> Result<(), ConfigError> {
    if let Err(e) = cfg.solver.validate() {
        let msg = e.to_string();
        let extra: &[&str] = if msg.contains("GMRES") {
            &["variant", "solver"]
        } else if msg.contains("Chebyshev") || msg.contains("chebyshev") {
            &["chebyshev_steps", "chebyshev_lower", "chebyshev_upper"]
        } else if msg.contains("caps") {
            &["krylov_maxit", "max_outer", "max_trials", "riesz_maxit"]
        } else {
            &[]
        };
        return Err(blame(seen, &msg, extra));
    }
    let p = cfg.params;
    if !(p.a > 0.0 && p.b >= 0.0 && p.gamma > 0.0 && p.rho >= 0.0) {
        return Err(blame(seen, "need a > 0, b >= 0, gamma > 0 and rho >= 0", &["a", "b", "gamma", "rho"]));
    }
    if !(cfg.q_lower < cfg.q_upper) {
        return Err(blame(seen, "need q_lower < q_upper", &["q_lower", "q_upper"]));
    }
    let levels_key = ["n", "levels"];
    if cfg.levels.is_empty() || cfg.levels.iter().any(|&n| n < 2) {
        return Err(blame(seen, "mesh sizes must be at least 2", &levels_key));
    }
    if cfg.levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(blame(seen, "each level must double the previous one", &levels_key));
    }
    if cfg.spectral.seeds == 0 {
        return Err(blame(seen, "spectral_seeds must be positive", &["spectral_seeds"]));
    }
    let (n1, n2, n3) = cfg.spectral.dims;
    if n1 == 0 || n2 == 0 || n3 == 0 || n3 > n2 || n1.max(n2) > seqhom_core::spectral::MAX_BLOCK_DIM {
        return Err(blame(
            seen,
            "spectral_dims need 0 < n1, 0 < n3 <= n2 and sizes at most 200",
            &["spectral_dims"],
        ));
    }
    if !(cfg.spectral.slack >= 0.0) {
        return Err(blame(seen, "spectral_slack must be >= 0", &["spectral_slack"]));
    }
    if cfg.bench_variants.is_empty() {
        return Err(blame(seen, "bench_variants must not be empty", &["bench_variants"]));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config_str("# nothing\n\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.n(), 40);
        assert_eq!(cfg.params.gamma, 1e-6);
        assert_eq!(cfg.solver.tol, 1e-5);
    }

    #[test]
    fn values_round_trip() {
        let cfg = parse_config_str("gamma = 1e-6\nvariant = matching-schur # inline\nlevels = 10, 20,40\n").unwrap();
        assert_eq!(cfg.params.gamma, 1e-6);
        assert_eq!(cfg.solver.variant, PreconditionerVariant::MatchingSchur);
        assert_eq!(cfg.levels, vec![10, 20, 40]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config_str("a = 1\nfoo = 2\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("unknown key"));
        let e = parse_config_str("\n\ntheta_max = 1.5\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("theta_max < 1"), "{e}");
        let cfg = parse_config_str("variant = block-triangular-free").unwrap();
        assert_eq!(cfg.solver.krylov, KrylovKind::Gmres);
        let e = parse_config_str("tol = abc\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = parse_config_str("variant = block-triangular-free\nsolver = minres\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_config_str("a = 1\nb = 2\nk_i = -1\nn = 8\n").unwrap_err();
        assert_eq!(e.line, Some(3), "{e}");
        let e = parse_config_str("n = 8\nn = 16\n").unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn rho_default_follows_dimension() {
        assert_eq!(parse_config_str("dim = 3\nn = 4").unwrap().params.rho, 1e-3);
        assert_eq!(parse_config_str("dim = 3\nrho = 0.5").unwrap().params.rho, 0.5);
    }
}
