use iskak_core::consistency::residual_fields;
use iskak_core::dtn_ww::DtnBackend;
use iskak_core::ik_solver::initial_state;

use super::{grid, initial_fields, is_rest, max_of, min_of, profile_note, sweep, ExperimentError};
use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, ExperimentReport};

#[derive(Clone, Copy)]
struct Row {
    delta: f64,
    r1: f64,
    r2: f64,
    r5_max: f64,
    r9: f64,
    gap: f64,
}

fn evaluate(cfg: &ExperimentConfig, delta: f64) -> Result<Row, ExperimentError> {
    let g = grid(cfg)?;
    let (eta, phi) = initial_fields(cfg, &g);
    let s = initial_state(&eta, &phi, delta, &cfg.cg())?;
    let f = residual_fields(&s, &cfg.backend(), &cfg.cg())?;
    Ok(Row {
        delta,
        r1: f.r1.l2_norm(),
        r2: f.r2.l2_norm(),
        r5_max: f.big_r5.max_abs(),
        r9: f.big_r9.l2_norm(),
        gap: (&f.r1 - &(&f.big_r5 - &f.big_r9)).max_abs(),
    })
}

fn band(xs: &[f64]) -> f64 {
    let lo = min_of(xs.iter().copied());
    if lo > 0.0 {
        max_of(xs.iter().copied()) / lo
    } else {
        f64::INFINITY
    }
}

/// δ⁻⁶-normalized residuals of the IK solution inserted into the
/// water-wave equations.
pub fn run_consistency(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let rows = sweep(cfg, |d| evaluate(cfg, d))?;
    let backend = cfg.backend().label();
    let mut report = ExperimentReport::new(
        Experiment::Consistency,
        &["delta", "n_points", "backend", "r1_norm", "r2_norm", "r5_max", "r9_norm", "identity_gap"],
    );
    for r in &rows {
        report.push_row(vec![
            num(r.delta),
            cfg.grid.n_points.to_string(),
            backend.clone(),
            num(r.r1),
            num(r.r2),
            num(r.r5_max),
            num(r.r9),
            num(r.gap),
        ]);
    }
    report.note(profile_note(cfg));
    report.note("r1, r2 are L2 norms of the residuals divided by delta^6");

    let r1: Vec<f64> = rows.iter().map(|r| r.r1).collect();
    let r2: Vec<f64> = rows.iter().map(|r| r.r2).collect();
    if is_rest(cfg) {
        let worst = max_of(r1.iter().chain(&r2).copied());
        report.check(
            "rest residuals vanish",
            worst <= cfg.checks.rest_tol,
            format!("max residual {worst:.3e} (tol {:e})", cfg.checks.rest_tol),
        );
    } else {
        for (name, xs) in [("r1 bounded", &r1), ("r2 bounded", &r2)] {
            let b = band(xs);
            report.check(
                name,
                b <= cfg.checks.band_factor,
                format!(
                    "range [{:.4e}, {:.4e}], max/min {b:.3} (need <= {})",
                    min_of(xs.iter().copied()),
                    max_of(xs.iter().copied()),
                    cfg.checks.band_factor
                ),
            );
        }
    }

    let target = cfg.checks.identity_delta;
    let (ok, detail) = if !matches!(cfg.backend(), DtnBackend::Exact { .. }) {
        (false, "requires the exact DtN backend".to_string())
    } else {
        let row = match rows.iter().find(|r| (r.delta - target).abs() <= 1e-12) {
            Some(r) => *r,
            None => evaluate(cfg, target)?,
        };
        let scale = row.r5_max.max(1.0);
        (
            row.gap <= cfg.checks.identity_tol * scale,
            format!(
                "max |r1 - (R5 - R9)| = {:.3e} at delta = {target}, |R5|max = {:.3e} (tol {:e} x max(1, |R5|max))",
                row.gap, row.r5_max, cfg.checks.identity_tol
            ),
        )
    };
    report.check("identity r1 = R5 - R9", ok, detail);
    Ok(report)
}
