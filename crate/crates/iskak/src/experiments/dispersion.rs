use iskak_core::consistency::dispersion_table;

use super::ExperimentError;
use crate::config::{Experiment, ExperimentConfig};
use crate::fit::fit_loglog;
use crate::report::{num, ExperimentReport};

pub fn run_dispersion(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let d = &cfg.dispersion;
    let mut xs: Vec<f64> = if d.points >= 2 {
        let (a, b) = (d.x_min.ln(), d.x_max.ln());
        (0..d.points).map(|i| (a + (b - a) * i as f64 / (d.points - 1) as f64).exp()).collect()
    } else {
        vec![d.x_min]
    };
    xs.extend(d.extra_x.iter().copied());
    xs.push(d.reference_x);
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());

    let table = dispersion_table(&xs);
    let in_range = |x: f64| x >= d.x_min * (1.0 - 1e-12) && x <= d.x_max * (1.0 + 1e-12);
    let mut report = ExperimentReport::new(Experiment::Dispersion, &["x", "c_ik2", "c_ww2", "diff", "in_fit"]);
    let (mut fx, mut fy) = (Vec::new(), Vec::new());
    for row in &table {
        let used = in_range(row.x) && row.diff.abs() >= 10.0 * cfg.fit.noise_floor;
        if in_range(row.x) {
            fx.push(row.x);
            fy.push(row.diff.abs());
        }
        report.push_row(vec![num(row.x), num(row.c_ik2), num(row.c_ww2), num(row.diff), used.to_string()]);
    }
    let fit = fit_loglog(&fx, &fy, cfg.fit.noise_floor);
    report.note(format!("fit range: x in [{}, {}]", d.x_min, d.x_max));
    report.note(format!(
        "fit rule: OLS on (log x, log |diff|); rows with |diff| < {:e} are excluded",
        10.0 * cfg.fit.noise_floor
    ));
    report.fits.push(("dispersion_gap".into(), fit));

    let slope_ok = fit.slope().is_some_and(|s| (s - d.slope_target).abs() <= cfg.checks.slope_tol);
    report.check(
        "dispersion slope",
        slope_ok,
        format!("{} (target {} +/- {})", fit.describe(), d.slope_target, cfg.checks.slope_tol),
    );
    let at_ref = table.iter().find(|r| (r.x - d.reference_x).abs() <= 1e-12 * d.reference_x.abs());
    let (ok, detail) = match at_ref {
        Some(r) => {
            let rel = (r.diff - d.reference_value).abs() / d.reference_value.abs();
            (
                rel <= d.reference_rel_tol,
                format!(
                    "diff at x = {} is {:.6e}, reference {:e}, relative deviation {:.3e} (tol {})",
                    d.reference_x, r.diff, d.reference_value, rel, d.reference_rel_tol
                ),
            )
        }
        None => (false, "reference row missing".to_string()),
    };
    report.check("reference gap", ok, detail);
    Ok(report)
}
