use iskak_core::dtn_ww::{ww_run, DtnBackend, WwRun, WwState};
use iskak_core::ik_solver::{initial_state, run, IkRun};

use super::{fit_note, grid, initial_fields, is_rest, max_of, min_of, profile_note, sweep, ExperimentError};
use crate::config::{Experiment, ExperimentConfig};
use crate::fit::fit_loglog;
use crate::report::{num, ExperimentReport};

struct Leg {
    delta: f64,
    times: Vec<f64>,
    err_eta: Vec<f64>,
    err_phix: Vec<f64>,
    control: Vec<f64>,
    failures: Vec<String>,
    mass: [f64; 3],
    min_h: f64,
    min_a: f64,
}

fn failure_of(label: &str, f: &Option<iskak_core::SolverError>) -> Option<String> {
    f.as_ref().map(|e| format!("{label}: {e}"))
}

fn leg(cfg: &ExperimentConfig, delta: f64) -> Result<Leg, ExperimentError> {
    let g = grid(cfg)?;
    let (eta, phi) = initial_fields(cfg, &g);
    let sim = cfg.sim(true);
    let ik: IkRun = run(&initial_state(&eta, &phi, delta, &cfg.cg())?, &sim)?;
    let ww0 = WwState::new(eta, phi, delta)?;
    let ww: WwRun = ww_run(&ww0, &sim, &cfg.backend())?;
    let ctrl = if cfg.checks.control { Some(ww_run(&ww0, &sim, &DtnBackend::Series { order: 0 })?) } else { None };

    let mut n = ik.trajectory.len().min(ww.trajectory.len());
    if let Some(c) = &ctrl {
        n = n.min(c.trajectory.len());
    }
    let mut leg = Leg {
        delta,
        times: Vec::with_capacity(n),
        err_eta: Vec::with_capacity(n),
        err_phix: Vec::with_capacity(n),
        control: Vec::with_capacity(n),
        failures: Vec::new(),
        mass: [
            ik.diagnostics.max_mass_drift(),
            ww.max_mass_drift(),
            ctrl.as_ref().map_or(0.0, WwRun::max_mass_drift),
        ],
        min_h: ik.diagnostics.min_h().min(ww.min_h()),
        min_a: ik.diagnostics.min_a(),
    };
    leg.failures.extend(failure_of("ik", &ik.failure));
    leg.failures.extend(failure_of("ww", &ww.failure));
    if let Some(c) = &ctrl {
        leg.failures.extend(failure_of("control", &c.failure));
    }
    for i in 0..n {
        let (t, s) = &ik.trajectory[i];
        let (tw, w) = &ww.trajectory[i];
        debug_assert!((t - tw).abs() <= 1e-12 * t.max(1.0));
        leg.times.push(*t);
        leg.err_eta.push((&w.eta - &s.eta).l2_norm());
        leg.err_phix.push((&w.phi.dx() - &s.surface_potential().dx()).l2_norm());
        leg.control.push(ctrl.as_ref().map_or(f64::NAN, |c| (&w.eta - &c.trajectory[i].1.eta).l2_norm()));
    }
    Ok(leg)
}

/// Sweeps δ, comparing IK against the exact-DtN water-wave reference
/// (and a shallow-water control) along a shared time grid.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let legs = sweep(cfg, |d| leg(cfg, d))?;
    let backend = cfg.backend().label();
    let mut report = ExperimentReport::new(
        Experiment::Convergence,
        &["delta", "n_points", "dt", "backend", "time", "err_eta", "err_phix", "control_err"],
    );
    for l in &legs {
        for i in 0..l.times.len() {
            report.push_row(vec![
                num(l.delta),
                cfg.grid.n_points.to_string(),
                num(cfg.time.dt),
                backend.clone(),
                num(l.times[i]),
                num(l.err_eta[i]),
                num(l.err_phix[i]),
                num(l.control[i]),
            ]);
        }
    }
    report.note(profile_note(cfg));
    report.note(format!(
        "time: t_end = {}, dt = {}, reproject every {} steps, reference backend {backend}",
        cfg.time.t_end, cfg.time.dt, cfg.time.reproject_every
    ));
    report.note("errors are L2 norms, maximized over the recorded times");
    let deltas: Vec<f64> = legs.iter().map(|l| l.delta).collect();
    let e_eta: Vec<f64> = legs.iter().map(|l| max_of(l.err_eta.iter().copied())).collect();
    let e_phix: Vec<f64> = legs.iter().map(|l| max_of(l.err_phix.iter().copied())).collect();
    let e_ctrl: Vec<f64> = legs.iter().map(|l| max_of(l.control.iter().copied().filter(|x| x.is_finite()))).collect();
    for (i, l) in legs.iter().enumerate() {
        report.note(format!(
            "delta = {}: max err_eta {:.4e}, max err_phix {:.4e}, control {:.4e}, mass drift ik {:.2e} ww {:.2e} control {:.2e}",
            l.delta, e_eta[i], e_phix[i], e_ctrl[i], l.mass[0], l.mass[1], l.mass[2]
        ));
    }

    let failures: Vec<&String> = legs.iter().flat_map(|l| &l.failures).collect();
    report.check(
        "legs completed",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} delta legs ran to t_end", legs.len())
        } else {
            failures.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
        },
    );

    if is_rest(cfg) {
        let worst = max_of(e_eta.iter().chain(&e_phix).copied());
        report.note("rest state: no slope is fitted");
        report.check(
            "rest preserved",
            worst <= cfg.checks.rest_tol,
            format!("max error {worst:.3e} (tol {:e})", cfg.checks.rest_tol),
        );
    } else {
        report.note(fit_note(cfg));
        let fit = fit_loglog(&deltas, &e_eta, cfg.fit.noise_floor);
        report.fits.push(("eta_error".into(), fit));
        report.fits.push(("phix_error".into(), fit_loglog(&deltas, &e_phix, cfg.fit.noise_floor)));
        report.check(
            "error slope",
            fit.slope().is_some_and(|s| s >= cfg.checks.min_slope),
            format!("{} (need >= {})", fit.describe(), cfg.checks.min_slope),
        );
        if cfg.checks.control {
            let cf = fit_loglog(&deltas, &e_ctrl, cfg.fit.noise_floor);
            report.fits.push(("control_eta_error".into(), cf));
            report.check(
                "control slope",
                cf.slope().is_some_and(|s| s <= cfg.checks.control_max_slope),
                format!("{} (need <= {})", cf.describe(), cfg.checks.control_max_slope),
            );
        }
    }

    let mass = max_of(legs.iter().flat_map(|l| l.mass));
    report.check("mass conservation", mass <= cfg.checks.mass_tol, format!("max drift {mass:.3e} (tol {:e})", cfg.checks.mass_tol));
    let min_h = min_of(legs.iter().map(|l| l.min_h));
    report.check("min depth", min_h >= cfg.checks.min_depth, format!("min H {min_h:.4} (need >= {})", cfg.checks.min_depth));
    let min_a = min_of(legs.iter().map(|l| l.min_a));
    report.check("min a", min_a >= cfg.checks.min_a, format!("min a {min_a:.4} (need >= {})", cfg.checks.min_a));
    Ok(report)
}
