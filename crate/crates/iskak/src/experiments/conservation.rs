use iskak_core::ik_solver::{initial_state, run, IkRun, SimConfig};
use iskak_core::operators::IkState;

use super::{grid, initial_fields, is_rest, max_of, min_of, profile_note, sweep, ExperimentError};
use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, ExperimentReport};

struct Summary {
    kind: &'static str,
    delta: f64,
    dt: f64,
    reproject_every: usize,
    steps: usize,
    mass: f64,
    energy: f64,
    constraint: f64,
    min_h: f64,
    min_a: f64,
    failure: Option<String>,
}

impl Summary {
    fn new(kind: &'static str, delta: f64, sim: &SimConfig, r: &IkRun) -> Self {
        let d = &r.diagnostics;
        Self {
            kind,
            delta,
            dt: sim.schedule().1,
            reproject_every: sim.reproject_every,
            steps: r.steps_taken,
            mass: d.max_mass_drift(),
            energy: d.max_energy_drift(),
            constraint: d.max_constraint(),
            min_h: d.min_h(),
            min_a: d.min_a(),
            failure: r.failure.as_ref().map(|e| e.to_string()),
        }
    }
}

fn runs_for(cfg: &ExperimentConfig, delta: f64) -> Result<Vec<Summary>, ExperimentError> {
    let g = grid(cfg)?;
    let sim = cfg.sim(false);
    let mut out = Vec::new();
    out.push(Summary::new("rest", delta, &sim, &run(&IkState::rest(&g, delta), &sim)?));
    if is_rest(cfg) {
        return Ok(out);
    }
    let (eta, phi) = initial_fields(cfg, &g);
    let s0 = initial_state(&eta, &phi, delta, &cfg.cg())?;
    out.push(Summary::new("main", delta, &sim, &run(&s0, &sim)?));

    // Halving pair without reprojection, sampled at the same instants.
    let coarse = SimConfig { reproject_every: 0, ..sim.clone() };
    let fine = SimConfig { dt: sim.dt / 2.0, record_every: 2 * sim.record_every, ..coarse.clone() };
    out.push(Summary::new("halving_dt", delta, &coarse, &run(&s0, &coarse)?));
    out.push(Summary::new("halving_dt/2", delta, &fine, &run(&s0, &fine)?));
    Ok(out)
}

/// Mass, energy and constraint bookkeeping of IK runs, including the
/// fourth-order energy-drift halving test.
pub fn run_conservation(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let runs: Vec<Summary> = sweep(cfg, |d| runs_for(cfg, d))?.into_iter().flatten().collect();
    let mut report = ExperimentReport::new(
        Experiment::Conservation,
        &[
            "delta",
            "n_points",
            "dt",
            "backend",
            "run",
            "reproject_every",
            "steps",
            "mass_drift",
            "energy_drift",
            "constraint_max",
            "min_h",
            "min_a",
            "failure",
        ],
    );
    for r in &runs {
        report.push_row(vec![
            num(r.delta),
            cfg.grid.n_points.to_string(),
            num(r.dt),
            "ik".into(),
            r.kind.into(),
            r.reproject_every.to_string(),
            r.steps.to_string(),
            num(r.mass),
            num(r.energy),
            num(r.constraint),
            num(r.min_h),
            num(r.min_a),
            r.failure.clone().unwrap_or_default(),
        ]);
    }
    report.note(profile_note(cfg));
    report.note(format!("time: t_end = {}, dt = {}, reproject every {} steps", cfg.time.t_end, cfg.time.dt, cfg.time.reproject_every));
    report.note("energy drift is max |E(t) - E(0)| / |E(0)| (absolute when E(0) = 0)");

    let failed: Vec<String> =
        runs.iter().filter_map(|r| r.failure.as_ref().map(|f| format!("{} delta={}: {f}", r.kind, r.delta))).collect();
    report.check(
        "runs completed",
        failed.is_empty(),
        if failed.is_empty() { format!("{} runs reached t_end", runs.len()) } else { failed.join("; ") },
    );

    let of = |kind: &'static str| runs.iter().filter(move |r| r.kind == kind);
    let rest = max_of(of("rest").map(|r| r.energy.max(r.mass)));
    report.check(
        "rest drift",
        rest <= cfg.checks.drift_rest_tol,
        format!("max energy/mass drift at rest {rest:.3e} (tol {:e})", cfg.checks.drift_rest_tol),
    );
    let mass = max_of(runs.iter().map(|r| r.mass));
    report.check("mass conservation", mass <= cfg.checks.mass_tol, format!("max drift {mass:.3e} (tol {:e})", cfg.checks.mass_tol));

    if !is_rest(cfg) {
        let c = max_of(of("main").map(|r| r.constraint));
        report.check(
            "constraint",
            c <= cfg.checks.constraint_tol,
            format!("max constraint residual {c:.3e} with reprojection (tol {:e})", cfg.checks.constraint_tol),
        );
        let mut worst: Option<(f64, f64)> = None;
        for (a, b) in of("halving_dt").zip(of("halving_dt/2")) {
            let ratio = a.energy / b.energy;
            report.note(format!(
                "delta = {}: energy drift {:.4e} (dt {}) -> {:.4e} (dt {}), ratio {ratio:.3}",
                a.delta, a.energy, a.dt, b.energy, b.dt
            ));
            let dev = if ratio.is_finite() { (ratio - cfg.checks.ratio_target).abs() } else { f64::INFINITY };
            if worst.is_none_or(|(d, _)| dev > d) {
                worst = Some((dev, ratio));
            }
        }
        let (ok, detail) = match worst {
            Some((dev, ratio)) => (
                dev <= cfg.checks.ratio_tol,
                format!("worst ratio {ratio:.3} (target {} +/- {})", cfg.checks.ratio_target, cfg.checks.ratio_tol),
            ),
            None => (false, "no halving pair".into()),
        };
        report.check("energy drift halving", ok, detail);
    }

    let min_h = min_of(runs.iter().map(|r| r.min_h));
    report.check("min depth", min_h >= cfg.checks.min_depth, format!("min H {min_h:.4} (need >= {})", cfg.checks.min_depth));
    let min_a = min_of(runs.iter().map(|r| r.min_a));
    report.check("min a", min_a >= cfg.checks.min_a, format!("min a {min_a:.4} (need >= {})", cfg.checks.min_a));
    Ok(report)
}
