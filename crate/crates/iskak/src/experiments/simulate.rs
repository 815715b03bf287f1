use iskak_core::dtn_ww::{ww_run, WwState};
use iskak_core::ik_solver::{initial_state, run};
use iskak_core::spectral::RealField;

use super::{grid, initial_fields, max_of, min_of, profile_note, sweep, ExperimentError};
use crate::config::{Experiment, ExperimentConfig, SimModel};
use crate::report::{num, ExperimentReport};

struct Snapshot {
    time: f64,
    eta: RealField,
    phi: RealField,
    phi0: Option<RealField>,
    phi1: Option<RealField>,
}

struct Outcome {
    delta: f64,
    snapshots: Vec<Snapshot>,
    mass: f64,
    energy: f64,
    min_h: f64,
    min_a: Option<f64>,
    failure: Option<String>,
}

fn simulate(cfg: &ExperimentConfig, delta: f64) -> Result<Outcome, ExperimentError> {
    let g = grid(cfg)?;
    let (eta, phi) = initial_fields(cfg, &g);
    let sim = cfg.sim(true);
    Ok(match cfg.simulate.model {
        SimModel::Ik => {
            let r = run(&initial_state(&eta, &phi, delta, &cfg.cg())?, &sim)?;
            Outcome {
                delta,
                mass: r.diagnostics.max_mass_drift(),
                energy: r.diagnostics.max_energy_drift(),
                min_h: r.diagnostics.min_h(),
                min_a: Some(r.diagnostics.min_a()),
                failure: r.failure.map(|e| e.to_string()),
                snapshots: r
                    .trajectory
                    .into_iter()
                    .map(|(time, s)| Snapshot {
                        time,
                        phi: s.surface_potential(),
                        eta: s.eta,
                        phi0: Some(s.phi0),
                        phi1: Some(s.phi1),
                    })
                    .collect(),
            }
        }
        SimModel::Ww => {
            let r = ww_run(&WwState::new(eta, phi, delta)?, &sim, &cfg.backend())?;
            Outcome {
                delta,
                mass: r.max_mass_drift(),
                energy: r.max_hamiltonian_drift(),
                min_h: r.min_h(),
                min_a: None,
                failure: r.failure.map(|e| e.to_string()),
                snapshots: r
                    .trajectory
                    .into_iter()
                    .map(|(time, s)| Snapshot { time, eta: s.eta, phi: s.phi, phi0: None, phi1: None })
                    .collect(),
            }
        }
    })
}

/// Plain runs with full snapshot export.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let outcomes = sweep(cfg, |d| simulate(cfg, d))?;
    let (model, backend) = match cfg.simulate.model {
        SimModel::Ik => ("ik", "ik".to_string()),
        SimModel::Ww => ("ww", cfg.backend().label()),
    };
    let mut report = ExperimentReport::new(
        Experiment::Simulate,
        &["delta", "n_points", "dt", "backend", "time", "x", "eta", "phi", "phi0", "phi1"],
    );
    let g = grid(cfg)?;
    let xs: Vec<f64> = g.points().collect();
    let opt = |f: &Option<RealField>, i: usize| f.as_ref().map_or(String::new(), |f| num(f.values()[i]));
    for o in &outcomes {
        for s in &o.snapshots {
            for (i, x) in xs.iter().enumerate() {
                report.push_row(vec![
                    num(o.delta),
                    cfg.grid.n_points.to_string(),
                    num(cfg.time.dt),
                    backend.clone(),
                    num(s.time),
                    num(*x),
                    num(s.eta.values()[i]),
                    num(s.phi.values()[i]),
                    opt(&s.phi0, i),
                    opt(&s.phi1, i),
                ]);
            }
        }
        report.note(format!(
            "delta = {}: {} snapshots, mass drift {:.3e}, energy drift {:.3e}, min H {:.4}{}",
            o.delta,
            o.snapshots.len(),
            o.mass,
            o.energy,
            o.min_h,
            o.min_a.map_or(String::new(), |a| format!(", min a {a:.4}"))
        ));
    }
    report.note(profile_note(cfg));
    report.note(format!("model {model}, t_end = {}, dt = {}, snapshot every {} steps", cfg.time.t_end, cfg.time.dt, cfg.time.record_every));

    let failed: Vec<String> =
        outcomes.iter().filter_map(|o| o.failure.as_ref().map(|f| format!("delta={}: {f}", o.delta))).collect();
    report.check(
        "runs completed",
        failed.is_empty(),
        if failed.is_empty() { format!("{} runs reached t_end", outcomes.len()) } else { failed.join("; ") },
    );
    let mass = max_of(outcomes.iter().map(|o| o.mass));
    report.check("mass conservation", mass <= cfg.checks.mass_tol, format!("max drift {mass:.3e} (tol {:e})", cfg.checks.mass_tol));
    let min_h = min_of(outcomes.iter().map(|o| o.min_h));
    report.check("min depth", min_h >= cfg.checks.min_depth, format!("min H {min_h:.4} (need >= {})", cfg.checks.min_depth));
    if cfg.simulate.model == SimModel::Ik {
        let min_a = min_of(outcomes.iter().filter_map(|o| o.min_a));
        report.check("min a", min_a >= cfg.checks.min_a, format!("min a {min_a:.4} (need >= {})", cfg.checks.min_a));
    }
    Ok(report)
}
