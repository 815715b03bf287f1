//! Named experiments. Each returns an [`ExperimentReport`] whose checks
//! decide the process exit code.

use std::sync::Arc;

use iskak_core::error::{GridError, SolverError};
use iskak_core::spectral::{PeriodicGrid, RealField};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::report::ExperimentReport;

mod consistency;
mod conservation;
mod convergence;
mod dispersion;
mod dtn;
mod elliptic;
mod simulate;

pub use consistency::run_consistency;
pub use conservation::run_conservation;
pub use convergence::run_convergence;
pub use dispersion::run_dispersion;
pub use dtn::run_dtn;
pub use elliptic::run_elliptic_suite;
pub use simulate::run_simulate;

/// Environment variable capping the worker threads of δ sweeps.
pub const THREADS_ENV: &str = "ISKAK_THREADS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("config names experiment `{config}` but `{requested}` was requested")]
    Mismatch { config: &'static str, requested: &'static str },
    #[error("{THREADS_ENV} must be a positive integer, got `{0}`")]
    Threads(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn thread_pool() -> Result<rayon::ThreadPool, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or(ExperimentError::Threads(raw))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| ExperimentError::Pool(e.to_string()))
}

pub fn run_experiment(exp: Experiment, cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    if let Some(named) = cfg.experiment {
        if named != exp {
            return Err(ExperimentError::Mismatch { config: named.name(), requested: exp.name() });
        }
    }
    cfg.validate()?;
    thread_pool()?.install(|| match exp {
        Experiment::Dispersion => run_dispersion(cfg),
        Experiment::Convergence => run_convergence(cfg),
        Experiment::Consistency => run_consistency(cfg),
        Experiment::Conservation => run_conservation(cfg),
        Experiment::Simulate => run_simulate(cfg),
        Experiment::EllipticSuite => run_elliptic_suite(cfg),
        Experiment::Dtn => run_dtn(cfg),
    })
}

/// Runs `f` for every δ of the config on the current pool, in δ order.
fn sweep<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(f64) -> Result<T, ExperimentError> + Sync,
) -> Result<Vec<T>, ExperimentError> {
    cfg.deltas().par_iter().map(|&d| f(d)).collect::<Vec<_>>().into_iter().collect()
}

fn grid(cfg: &ExperimentConfig) -> Result<Arc<PeriodicGrid>, ExperimentError> {
    Ok(PeriodicGrid::new(cfg.grid.n_points, cfg.grid.length)?)
}

fn base_wavenumber(cfg: &ExperimentConfig) -> f64 {
    2.0 * std::f64::consts::PI / cfg.grid.length * f64::from(cfg.initial.wavenumber)
}

/// Configured `(η₀, φ)` profile.
fn initial_fields(cfg: &ExperimentConfig, g: &Arc<PeriodicGrid>) -> (RealField, RealField) {
    let k = base_wavenumber(cfg);
    let eta = RealField::from_fn(g, |x| cfg.initial.amplitude * (k * x).cos());
    let phi = RealField::from_fn(g, |x| cfg.initial.phi_amplitude * (k * x).sin());
    (eta, phi)
}

fn is_rest(cfg: &ExperimentConfig) -> bool {
    cfg.initial.amplitude == 0.0 && cfg.initial.phi_amplitude == 0.0
}

fn profile_note(cfg: &ExperimentConfig) -> String {
    format!(
        "initial profile: eta0 = {} cos({} x'), phi = {} sin({} x'), x' = 2 pi x / L, L = {}, N = {}",
        cfg.initial.amplitude,
        cfg.initial.wavenumber,
        cfg.initial.phi_amplitude,
        cfg.initial.wavenumber,
        cfg.grid.length,
        cfg.grid.n_points
    )
}

fn fit_note(cfg: &ExperimentConfig) -> String {
    format!(
        "fit rule: OLS on (log delta, log error); rows with error < {:e} (10 x noise floor {:e}) are excluded; slopes need >= 3 rows",
        10.0 * cfg.fit.noise_floor,
        cfg.fit.noise_floor
    )
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn min_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::INFINITY, f64::min)
}
