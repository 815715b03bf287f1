//! Time integration of the Isobe–Kakinuma model.
//!
//! The state `(η, φ₀, φ₁)` is advanced with classical RK4. Each stage gets
//! `∂ₜη` from the mass equation and `(∂ₜφ₀, ∂ₜφ₁)` from the coupled elliptic
//! pair obtained by differentiating the constraint in time.

use crate::error::SolverError;
use crate::operators::{
    coef_a, constraint_residual, energy, f1_nonlinear, f2_forcing, solve_elliptic_pair,
    solve_initial_data, CgSettings, DepthCoefs, EllipticRhs, IkState,
};
use crate::spectral::RealField;

/// Max-norm threshold beyond which a run is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;
/// Default CFL factor on the unit gravity-wave speed.
pub const DEFAULT_CFL_FACTOR: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct IkDerivative {
    pub eta_t: RealField,
    pub phi0_t: RealField,
    pub phi1_t: RealField,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Reproject onto the constraint every this many steps (0 = never).
    pub reproject_every: usize,
    /// Record diagnostics every this many steps (0 = only start and end).
    pub record_every: usize,
    pub cfl_factor: f64,
    pub cg: CgSettings,
    /// Keep a state snapshot at every recorded time.
    pub keep_trajectory: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 5e-4,
            reproject_every: 0,
            record_every: 10,
            cfl_factor: DEFAULT_CFL_FACTOR,
            cg: CgSettings::default(),
            keep_trajectory: false,
        }
    }
}

impl SimConfig {
    /// Checks `dt > 0`, `t_end >= 0` and the CFL guard for the given spacing.
    pub fn validate(&self, spacing: f64) -> Result<(), SolverError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.dt > self.cfl_factor * spacing {
            return Err(SolverError::InvalidConfig(format!(
                "dt = {} exceeds the CFL limit {} x {}",
                self.dt, self.cfl_factor, spacing
            )));
        }
        Ok(())
    }

    /// Number of steps and the step size actually used so that the run
    /// lands exactly on `t_end`.
    pub fn schedule(&self) -> (usize, f64) {
        let steps = (self.t_end / self.dt).round().max(0.0) as usize;
        if steps == 0 {
            (0, self.dt)
        } else {
            (steps, self.t_end / steps as f64)
        }
    }

    pub fn should_record(&self, step: usize, total: usize) -> bool {
        step == 0 || step == total || (self.record_every > 0 && step.is_multiple_of(self.record_every))
    }
}

/// One row of run diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticSample {
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub constraint_max: f64,
    pub min_h: f64,
    pub min_a: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub samples: Vec<DiagnosticSample>,
}

impl Diagnostics {
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.samples.first().map_or(0.0, |s| s.mass);
        self.samples.iter().fold(0.0, |acc, s| acc.max((s.mass - m0).abs()))
    }

    /// `max |E(t) - E(0)|`, relative to `E(0)` when it is nonzero.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples.first().map_or(0.0, |s| s.energy);
        let drift = self.samples.iter().fold(0.0_f64, |acc, s| acc.max((s.energy - e0).abs()));
        if e0 != 0.0 {
            drift / e0.abs()
        } else {
            drift
        }
    }

    pub fn max_constraint(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, s| acc.max(s.constraint_max))
    }

    pub fn min_h(&self) -> f64 {
        self.samples.iter().fold(f64::INFINITY, |acc, s| acc.min(s.min_h))
    }

    pub fn min_a(&self) -> f64 {
        self.samples.iter().fold(f64::INFINITY, |acc, s| acc.min(s.min_a))
    }
}

/// Result of [`run`]. A failed run keeps everything recorded before the
/// failure.
#[derive(Debug, Clone)]
pub struct IkRun {
    pub state: IkState,
    pub time: f64,
    pub steps_taken: usize,
    pub diagnostics: Diagnostics,
    pub trajectory: Vec<(f64, IkState)>,
    pub failure: Option<SolverError>,
}

/// `∂ₜη = -∇·(H∇φ₀ + (1/3)δ²H³∇φ₁)`
pub fn eta_rhs(s: &IkState) -> RealField {
    let d2 = s.delta * s.delta;
    let h = s.eta.map(|e| 1.0 + e);
    let h3 = s.eta.map(|e| (1.0 + e).powi(3));
    let flux = h
        .dealiased_product(&s.phi0.dx())
        .axpy(d2 / 3.0, &h3.dealiased_product(&s.phi1.dx()));
    -&flux.dx()
}

/// Time derivatives of the full state.
pub fn time_derivatives(s: &IkState, cg: &CgSettings) -> Result<IkDerivative, SolverError> {
    let eta_t = eta_rhs(s);
    let d = s.depth();
    let rhs = EllipticRhs {
        f1: -&f1_nonlinear(s),
        f2: f2_forcing(s, &eta_t),
        f3: RealField::zeros(s.grid()),
    };
    let sol = solve_elliptic_pair(s.delta, &d, &rhs, cg)?;
    Ok(IkDerivative { eta_t, phi0_t: sol.psi0, phi1_t: sol.psi1 })
}

fn advance(s: &IkState, k: &IkDerivative, h: f64) -> IkState {
    IkState {
        eta: s.eta.axpy(h, &k.eta_t),
        phi0: s.phi0.axpy(h, &k.phi0_t),
        phi1: s.phi1.axpy(h, &k.phi1_t),
        delta: s.delta,
    }
}

/// Classical four-stage Runge–Kutta step.
pub fn rk4_step(s: &IkState, dt: f64, cg: &CgSettings) -> Result<IkState, SolverError> {
    let k1 = time_derivatives(s, cg)?;
    let k2 = time_derivatives(&advance(s, &k1, 0.5 * dt), cg)?;
    let k3 = time_derivatives(&advance(s, &k2, 0.5 * dt), cg)?;
    let k4 = time_derivatives(&advance(s, &k3, dt), cg)?;
    let combine = |a: &RealField, b: &RealField, c: &RealField, d: &RealField, base: &RealField| {
        let vals = base
            .values()
            .iter()
            .zip(a.values())
            .zip(b.values())
            .zip(c.values())
            .zip(d.values())
            .map(|((((&y, &a), &b), &c), &d)| y + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d))
            .collect();
        RealField::from_values(base.grid(), vals)
    };
    Ok(IkState {
        eta: combine(&k1.eta_t, &k2.eta_t, &k3.eta_t, &k4.eta_t, &s.eta),
        phi0: combine(&k1.phi0_t, &k2.phi0_t, &k3.phi0_t, &k4.phi0_t, &s.phi0),
        phi1: combine(&k1.phi1_t, &k2.phi1_t, &k3.phi1_t, &k4.phi1_t, &s.phi1),
        delta: s.delta,
    })
}

/// Restores the constraint keeping `η` and the surface potential fixed.
pub fn reproject(s: &IkState, cg: &CgSettings) -> Result<IkState, SolverError> {
    let phi = s.surface_potential();
    let sol = solve_initial_data(&s.eta, &phi, s.delta, cg)?;
    Ok(IkState { eta: s.eta.clone(), phi0: sol.psi0, phi1: sol.psi1, delta: s.delta })
}

/// Model state built from water-wave data `(η, φ)`.
pub fn initial_state(eta: &RealField, phi: &RealField, delta: f64, cg: &CgSettings) -> Result<IkState, SolverError> {
    let sol = solve_initial_data(eta, phi, delta, cg)?;
    IkState::new(eta.clone(), sol.psi0, sol.psi1, delta)
}

pub fn sample(s: &IkState, time: f64, cg: &CgSettings) -> Result<DiagnosticSample, SolverError> {
    let d = time_derivatives(s, cg)?;
    Ok(DiagnosticSample {
        time,
        mass: s.eta.integrate(),
        energy: energy(s),
        constraint_max: constraint_residual(s).max_abs(),
        min_h: DepthCoefs::from_eta(&s.eta).min_depth(),
        min_a: coef_a(s, &d.phi1_t).min(),
    })
}

fn blown_up(s: &IkState) -> Option<f64> {
    let m = s.max_norm();
    (!m.is_finite() || m > BLOWUP_THRESHOLD).then_some(m)
}

/// Steps `initial` to `cfg.t_end`, recording diagnostics on the way.
pub fn run(initial: &IkState, cfg: &SimConfig) -> Result<IkRun, SolverError> {
    cfg.validate(initial.grid().spacing())?;
    let (steps, dt) = cfg.schedule();
    let mut out = IkRun {
        state: initial.clone(),
        time: 0.0,
        steps_taken: 0,
        diagnostics: Diagnostics::default(),
        trajectory: Vec::new(),
        failure: None,
    };
    let record = |out: &mut IkRun| -> Result<(), SolverError> {
        let smp = sample(&out.state, out.time, &cfg.cg)?;
        out.diagnostics.samples.push(smp);
        if cfg.keep_trajectory {
            out.trajectory.push((out.time, out.state.clone()));
        }
        Ok(())
    };
    if let Err(e) = record(&mut out) {
        out.failure = Some(e);
        return Ok(out);
    }
    for step in 1..=steps {
        let next = rk4_step(&out.state, dt, &cfg.cg).and_then(|mut next| {
            if cfg.reproject_every > 0 && step % cfg.reproject_every == 0 {
                next = reproject(&next, &cfg.cg)?;
            }
            match blown_up(&next) {
                Some(max_norm) => Err(SolverError::BlowUp { max_norm, time: step as f64 * dt }),
                None => Ok(next),
            }
        });
        match next {
            Ok(next) => {
                out.state = next;
                out.time = step as f64 * dt;
                out.steps_taken = step;
            }
            Err(e) => {
                out.failure = Some(e);
                return Ok(out);
            }
        }
        if cfg.should_record(step, steps) {
            if let Err(e) = record(&mut out) {
                out.failure = Some(e);
                return Ok(out);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{seeded_rng, smooth_field};
    use crate::spectral::PeriodicGrid;
    use std::sync::Arc;

    fn grid() -> Arc<PeriodicGrid> {
        PeriodicGrid::standard(32).unwrap()
    }

    fn wave(g: &Arc<PeriodicGrid>, amp: f64, delta: f64) -> IkState {
        let eta = RealField::from_fn(g, |x| amp * x.cos());
        initial_state(&eta, &RealField::zeros(g), delta, &CgSettings::default()).unwrap()
    }

    fn diff(a: &IkState, b: &IkState) -> f64 {
        (&a.eta - &b.eta)
            .max_abs()
            .max((&a.phi0 - &b.phi0).max_abs())
            .max((&a.phi1 - &b.phi1).max_abs())
    }

    #[test]
    fn eta_rhs_examples() {
        let g = grid();
        assert_eq!(eta_rhs(&IkState::rest(&g, 0.3)).max_abs(), 0.0);
        let z = RealField::zeros(&g);
        let c = RealField::from_fn(&g, f64::cos);
        let s = IkState::new(z.clone(), c.clone(), z, 0.3).unwrap();
        assert!((&eta_rhs(&s) - &c).max_abs() < 1e-13);
        let mut rng = seeded_rng(4);
        let s = IkState::new(
            smooth_field(&g, &mut rng, 4, 0.3),
            smooth_field(&g, &mut rng, 4, 1.0),
            smooth_field(&g, &mut rng, 4, 1.0),
            0.5,
        )
        .unwrap();
        assert!(eta_rhs(&s).integrate().abs() < 1e-13);
    }

    #[test]
    fn derivatives_of_rest_and_of_a_still_bump() {
        let g = grid();
        let cg = CgSettings::default();
        let d = time_derivatives(&IkState::rest(&g, 0.3), &cg).unwrap();
        assert_eq!(d.eta_t.max_abs() + d.phi0_t.max_abs() + d.phi1_t.max_abs(), 0.0);

        let (eps, delta) = (1e-6, 0.4);
        let z = RealField::zeros(&g);
        let eta = RealField::from_fn(&g, |x| eps * x.cos());
        let s = IkState::new(eta, z.clone(), z, delta).unwrap();
        let d = time_derivatives(&s, &cg).unwrap();
        assert_eq!(d.eta_t.max_abs(), 0.0);
        let amp = -eps * (1.0 - delta * delta / 10.0) / (1.0 + 0.4 * delta * delta);
        let expect = RealField::from_fn(&g, |x| amp * x.cos());
        assert!((&d.phi0_t - &expect).max_abs() < 10.0 * eps * eps);
    }

    #[test]
    fn first_equation_of_derivative_system_holds() {
        let g = grid();
        let s = wave(&g, 0.2, 0.5);
        let s = IkState { phi0: s.phi0.axpy(0.3, &RealField::from_fn(&g, |x| (2.0 * x).sin())), ..s };
        let s = reproject(&s, &CgSettings::default()).unwrap();
        let d = time_derivatives(&s, &CgSettings::default()).unwrap();
        let h2 = s.eta.map(|e| (1.0 + e).powi(2));
        let lhs = d.phi0_t.axpy(s.delta * s.delta, &h2.pointwise(&d.phi1_t));
        assert!((&lhs + &f1_nonlinear(&s)).max_abs() < 1e-8);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let g = grid();
        let rest = IkState::rest(&g, 0.3);
        let next = rk4_step(&rest, 0.01, &CgSettings::default()).unwrap();
        assert_eq!(diff(&rest, &next), 0.0);
    }

    #[test]
    fn step_conserves_mass_and_reverses() {
        let g = grid();
        let cg = CgSettings::default();
        let s = wave(&g, 0.1, 0.3);
        let m0 = s.eta.integrate();
        let mut errs = Vec::new();
        for dt in [0.04, 0.02] {
            let fwd = rk4_step(&s, dt, &cg).unwrap();
            assert!((fwd.eta.integrate() - m0).abs() < 1e-12);
            let back = rk4_step(&fwd, -dt, &cg).unwrap();
            errs.push(diff(&s, &back));
        }
        // local error of forward-then-back is O(dt^5): halving gives ~32x
        let ratio = errs[0] / errs[1];
        assert!(ratio > 20.0, "reversal error ratio {ratio} ({errs:?})");
    }

    #[test]
    fn reprojection_examples() {
        let g = grid();
        let cg = CgSettings::default();
        let s = wave(&g, 0.1, 0.3);
        let s = IkState { phi0: RealField::from_fn(&g, |x| 0.05 * x.sin()), ..s };
        let s = reproject(&s, &cg).unwrap();
        let again = reproject(&s, &cg).unwrap();
        assert!(diff(&s, &again) < 1e-9);

        let rest = IkState::rest(&g, 0.3);
        assert_eq!(diff(&rest, &reproject(&rest, &cg).unwrap()), 0.0);

        let bumped = IkState { phi1: s.phi1.axpy(1.0, &RealField::from_fn(&g, f64::cos)), ..s.clone() };
        assert!(constraint_residual(&bumped).max_abs() > 0.5);
        let fixed = reproject(&bumped, &cg).unwrap();
        assert!(constraint_residual(&fixed).max_abs() < 1e-8);
        assert!((&fixed.surface_potential() - &bumped.surface_potential()).max_abs() < 1e-10);
        assert_eq!(fixed.eta.values(), bumped.eta.values());
    }

    #[test]
    fn config_validation_and_schedule() {
        let cfg = SimConfig { dt: 0.1, ..SimConfig::default() };
        assert!(cfg.validate(0.1).is_err());
        assert!(SimConfig { dt: -1.0, ..SimConfig::default() }.validate(1.0).is_err());
        let cfg = SimConfig { t_end: 1.0, dt: 0.3, ..SimConfig::default() };
        let (n, dt) = cfg.schedule();
        assert_eq!(n, 3);
        assert!((dt * 3.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rest_run_is_flat() {
        let g = grid();
        let cfg = SimConfig { t_end: 1.0, dt: 0.05, record_every: 5, ..SimConfig::default() };
        let out = run(&IkState::rest(&g, 0.3), &cfg).unwrap();
        assert!(out.failure.is_none());
        assert_eq!(out.state.max_norm(), 0.0);
        assert_eq!(out.diagnostics.samples.len(), 5);
        assert_eq!(out.diagnostics.max_mass_drift(), 0.0);
        assert_eq!(out.diagnostics.min_a(), 1.0);
    }

    #[test]
    fn blowup_is_reported_with_partial_diagnostics() {
        let g = grid();
        let mut s = wave(&g, 0.1, 0.3);
        s.phi0 = s.phi0.axpy(1.0, &RealField::constant(&g, 2.0 * BLOWUP_THRESHOLD));
        let cfg = SimConfig { t_end: 0.2, dt: 0.05, record_every: 1, ..SimConfig::default() };
        let out = run(&s, &cfg).unwrap();
        assert!(matches!(out.failure, Some(SolverError::BlowUp { .. })));
        assert_eq!(out.diagnostics.samples.len(), 1);
        assert_eq!(out.steps_taken, 0);
    }
}
