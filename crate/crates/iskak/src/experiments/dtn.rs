use iskak_core::dtn_ww::{dtn_exact, dtn_series, flat_dtn_symbol, DtnBackend};
use iskak_core::random::{seeded_rng, smooth_field};
use iskak_core::spectral::RealField;

use super::{fit_note, grid, initial_fields, max_of, min_of, profile_note, sweep, ExperimentError};
use crate::config::{Experiment, ExperimentConfig};
use crate::fit::fit_loglog;
use crate::report::{num, ExperimentReport};

const ORDERS: [usize; 3] = [0, 1, 2];

struct Row {
    delta: f64,
    err: [f64; 3],
    r9: f64,
    flat_err: f64,
    flat_modes: usize,
    nz_change: f64,
    symmetry_gap: f64,
    symmetry_scale: f64,
    min_energy: f64,
}

fn evaluate(cfg: &ExperimentConfig, n_z: usize, delta: f64) -> Result<Row, ExperimentError> {
    let g = grid(cfg)?;
    let (eta, phi) = initial_fields(cfg, &g);

    let exact = dtn_exact(&eta, &phi, delta, n_z)?;
    let mut err = [0.0; 3];
    for (e, &k) in err.iter_mut().zip(&ORDERS) {
        *e = (&exact - &dtn_series(&eta, &phi, delta, k)?).l2_norm();
    }
    let r9 = err[2] / delta.powi(6);

    // Flat surface: each resolved mode against the closed-form multiplier.
    let flat = RealField::zeros(&g);
    let base = 2.0 * std::f64::consts::PI / cfg.grid.length;
    let mut flat_err: f64 = 0.0;
    let mut flat_modes = 0;
    for j in 1..=cfg.grid.n_points / 3 {
        let k = base * j as f64;
        if delta * k > n_z as f64 / 3.0 {
            break;
        }
        let mode = RealField::from_fn(&g, |x| (k * x).cos());
        let lam = dtn_exact(&flat, &mode, delta, n_z)?;
        flat_err = flat_err.max((&lam - &mode.scale(flat_dtn_symbol(delta, k))).max_abs());
        flat_modes += 1;
    }

    // Curved surface: vertical refinement, symmetry, positivity.
    let mut rng = seeded_rng(cfg.seed ^ delta.to_bits());
    let p = smooth_field(&g, &mut rng, 6, 1.0);
    let q = smooth_field(&g, &mut rng, 6, 1.0);
    let lp = dtn_exact(&eta, &p, delta, n_z)?;
    let lq = dtn_exact(&eta, &q, delta, n_z)?;
    let nz_change = (&lp - &dtn_exact(&eta, &p, delta, 2 * n_z)?).max_abs();
    let a = lp.inner(&q);
    let symmetry_gap = (a - p.inner(&lq)).abs();
    let min_energy = lp.inner(&p).min(lq.inner(&q));
    Ok(Row {
        delta,
        err,
        r9,
        flat_err,
        flat_modes,
        nz_change,
        symmetry_gap,
        symmetry_scale: a.abs().max(1.0),
        min_energy,
    })
}

/// Exact DtN operator against its truncated δ-expansions, plus checks of the
/// strip solver itself.
pub fn run_dtn(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let n_z = cfg.dtn.n_z;
    let rows = sweep(cfg, |d| evaluate(cfg, n_z, d))?;
    let mut report = ExperimentReport::new(
        Experiment::Dtn,
        &[
            "delta",
            "n_points",
            "n_z",
            "err_k0",
            "err_k1",
            "err_k2",
            "r9_norm",
            "flat_max_err",
            "flat_modes",
            "nz_change",
            "symmetry_gap",
            "min_energy",
        ],
    );
    for r in &rows {
        report.push_row(vec![
            num(r.delta),
            cfg.grid.n_points.to_string(),
            n_z.to_string(),
            num(r.err[0]),
            num(r.err[1]),
            num(r.err[2]),
            num(r.r9),
            num(r.flat_err),
            r.flat_modes.to_string(),
            num(r.nz_change),
            num(r.symmetry_gap),
            num(r.min_energy),
        ]);
    }
    report.note(profile_note(cfg));
    report.note(format!(
        "exact backend {}; resolved flat modes: |j| <= N/3 and delta |k| <= n_z/3",
        DtnBackend::Exact { n_z }.label()
    ));
    report.note("err_kK = L2 norm of (exact - order-K expansion)");
    report.note(fit_note(cfg));

    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    for (i, &k) in ORDERS.iter().enumerate() {
        let ys: Vec<f64> = rows.iter().map(|r| r.err[i]).collect();
        let fit = fit_loglog(&deltas, &ys, cfg.fit.noise_floor);
        let target = (2 * k + 2) as f64;
        report.check(
            format!("order {k} slope"),
            fit.slope().is_some_and(|s| (s - target).abs() <= cfg.checks.slope_tol),
            format!("{} (target {target} +/- {})", fit.describe(), cfg.checks.slope_tol),
        );
        report.fits.push((format!("order_{k}_error"), fit));
    }

    let r9: Vec<f64> = rows.iter().map(|r| r.r9).collect();
    let lo = min_of(r9.iter().copied());
    let hi = max_of(r9.iter().copied());
    report.check(
        "R9 bounded",
        lo > 0.0 && hi / lo <= cfg.checks.band_factor,
        format!("delta^-6 scaled remainder in [{lo:.4e}, {hi:.4e}] (max/min need <= {})", cfg.checks.band_factor),
    );

    let flat = max_of(rows.iter().map(|r| r.flat_err));
    let modes: usize = rows.iter().map(|r| r.flat_modes).sum();
    report.check(
        "flat exactness",
        modes > 0 && flat <= cfg.checks.flat_tol,
        format!("max error {flat:.3e} over {modes} resolved (delta, mode) pairs (tol {:e})", cfg.checks.flat_tol),
    );
    let change = max_of(rows.iter().map(|r| r.nz_change));
    report.check(
        "vertical refinement",
        change <= cfg.checks.nz_change_tol,
        format!("max change {change:.3e} from n_z = {n_z} to {} (tol {:e})", 2 * n_z, cfg.checks.nz_change_tol),
    );
    let worst = rows
        .iter()
        .map(|r| r.symmetry_gap / r.symmetry_scale)
        .fold(0.0_f64, f64::max);
    report.check(
        "symmetry",
        worst <= cfg.checks.dtn_symmetry_tol,
        format!(
            "max |(G p, q) - (p, G q)| / max(1, |(G p, q)|) = {worst:.3e} (tol {:e})",
            cfg.checks.dtn_symmetry_tol
        ),
    );
    let energy = min_of(rows.iter().map(|r| r.min_energy));
    report.check("positivity", energy > 0.0, format!("min (G p, p) = {energy:.4e}"));
    Ok(report)
}
