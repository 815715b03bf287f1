//! End-to-end runs of the IK model against the water-wave reference.

use iskak_core::dtn_ww::{ww_run, DtnBackend, WwState};
use iskak_core::ik_solver::{initial_state, run, SimConfig};
use iskak_core::operators::{constraint_residual, CgSettings};
use iskak_core::{PeriodicGrid, RealField};

fn short_run() -> SimConfig {
    SimConfig { t_end: 0.2, dt: 1e-3, reproject_every: 10, record_every: 50, keep_trajectory: true, ..SimConfig::default() }
}

fn ik_ww_gap(delta: f64) -> f64 {
    let g = PeriodicGrid::standard(64).unwrap();
    let eta = RealField::from_fn(&g, |x| 0.05 * x.cos());
    let phi = RealField::zeros(&g);
    let sim = short_run();
    let ik = run(&initial_state(&eta, &phi, delta, &CgSettings::default()).unwrap(), &sim).unwrap();
    let ww = ww_run(&WwState::new(eta, phi, delta).unwrap(), &sim, &DtnBackend::Exact { n_z: 16 }).unwrap();
    assert!(ik.failure.is_none() && ww.failure.is_none());
    assert_eq!(ik.trajectory.len(), ww.trajectory.len());
    ik.trajectory
        .iter()
        .zip(&ww.trajectory)
        .map(|((_, s), (_, w))| (&s.eta - &w.eta).l2_norm())
        .fold(0.0, f64::max)
}

#[test]
fn ik_tracks_water_waves_at_sixth_order() {
    let (coarse, fine) = (ik_ww_gap(0.4), ik_ww_gap(0.2));
    assert!(coarse < 1e-7, "{coarse:e}");
    let rate = (coarse / fine).log2();
    assert!(rate > 5.0, "observed rate {rate}");
}

#[test]
fn reprojected_run_keeps_constraint_and_invariants() {
    let g = PeriodicGrid::standard(64).unwrap();
    let eta = RealField::from_fn(&g, |x| 0.1 * (2.0 * x).cos());
    let phi = RealField::from_fn(&g, |x| 0.05 * x.sin());
    let r = run(&initial_state(&eta, &phi, 0.3, &CgSettings::default()).unwrap(), &short_run()).unwrap();
    assert!(r.failure.is_none());
    assert!(constraint_residual(&r.state).max_abs() < 1e-9);
    let d = &r.diagnostics;
    assert!(d.max_mass_drift() < 1e-13);
    assert!(d.max_energy_drift() < 1e-8);
    assert!(d.min_h() >= 0.89 && d.min_a() > 0.5);
}

#[test]
fn linear_standing_wave_has_dispersion_frequency() {
    let (eps, delta) = (1e-5, 0.3_f64);
    let omega = (delta.tanh() / delta).sqrt();
    let g = PeriodicGrid::standard(32).unwrap();
    let phi = RealField::from_fn(&g, |x| eps * x.cos());
    let sim = SimConfig { t_end: 2.0, dt: 5e-3, record_every: 1, keep_trajectory: true, ..SimConfig::default() };
    let r = ww_run(&WwState::new(RealField::zeros(&g), phi, delta).unwrap(), &sim, &DtnBackend::Exact { n_z: 16 }).unwrap();
    let coef = |s: &WwState| s.phi.values()[0];
    // First zero of φ(0, t) = ε cos(ωt), linearly interpolated.
    let w = r.trajectory.windows(2).find(|w| coef(&w[0].1) > 0.0 && coef(&w[1].1) <= 0.0).unwrap();
    let (t0, a0, t1, a1) = (w[0].0, coef(&w[0].1), w[1].0, coef(&w[1].1));
    let zero = t0 + (t1 - t0) * a0 / (a0 - a1);
    let measured = std::f64::consts::FRAC_PI_2 / zero;
    assert!((measured / omega - 1.0).abs() < 1e-3, "{measured} vs {omega}");
}

#[test]
fn water_wave_run_conserves_mass_and_hamiltonian() {
    let g = PeriodicGrid::standard(64).unwrap();
    let sim = SimConfig { t_end: 1.0, dt: 1e-3, record_every: 100, ..SimConfig::default() };
    let backend = DtnBackend::Exact { n_z: 16 };
    let rest = ww_run(&WwState::rest(&g, 0.2), &sim, &backend).unwrap();
    assert_eq!(rest.state.max_norm(), 0.0);

    let eta = RealField::from_fn(&g, |x| 0.05 * x.cos());
    let r = ww_run(&WwState::new(eta, RealField::zeros(&g), 0.2).unwrap(), &sim, &backend).unwrap();
    assert!(r.failure.is_none());
    assert!(r.max_mass_drift() <= 1e-10);
    assert!(r.max_hamiltonian_drift() <= 1e-6, "{:e}", r.max_hamiltonian_drift());
}
