use iskak_core::operators::{
    elliptic_pair_residuals, op_l1, op_l11, op_l12, op_l22, solve_elliptic_pair, DepthCoefs, EllipticRhs,
};
use iskak_core::random::{seeded_rng, smooth_depth, smooth_field};
use iskak_core::spectral::RealField;

use super::{grid, max_of, min_of, ExperimentError};
use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, ExperimentReport};

fn symmetry_gap(a: &RealField, b: &RealField, la: &RealField, lb: &RealField) -> f64 {
    (la.inner(b) - a.inner(lb)).abs() / (la.l2_norm() * b.l2_norm()).max(f64::MIN_POSITIVE)
}

/// Randomized checks of the elliptic operators and of the coupled-pair
/// solver.
pub fn run_elliptic_suite(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let g = grid(cfg)?;
    let e = &cfg.elliptic;
    let cg = cfg.cg();
    let deltas = cfg.deltas();
    let mut rng = seeded_rng(cfg.seed);
    let mut report = ExperimentReport::new(Experiment::EllipticSuite, &["kind", "trial", "delta", "n_points", "value", "aux"]);
    let n = cfg.grid.n_points.to_string();
    let row = |report: &mut ExperimentReport, kind: &str, trial: usize, delta: f64, value: f64, aux: f64| {
        report.push_row(vec![kind.into(), trial.to_string(), num(delta), n.clone(), num(value), num(aux)]);
    };

    let (mut coercive, mut c_min) = (0, f64::INFINITY);
    let (mut sym_worst, mut res_worst, mut min_depth) = (0.0_f64, 0.0_f64, f64::INFINITY);
    for t in 0..e.trials {
        let delta = deltas[t % deltas.len()];
        let d2 = delta * delta;
        let d = DepthCoefs::from_depth(smooth_depth(&g, &mut rng, e.modes, e.h_floor));
        min_depth = min_depth.min(d.min_depth());
        let psi = smooth_field(&g, &mut rng, e.modes, 1.0);
        let chi = smooth_field(&g, &mut rng, e.modes, 1.0);

        let l1 = op_l1(delta, &d, &psi);
        let c = l1.inner(&psi) / (psi.inner(&psi) + d2 * psi.dx().l2_norm().powi(2));
        if c > 0.0 {
            coercive += 1;
        }
        c_min = c_min.min(c);
        row(&mut report, "coercivity", t, delta, c, d.min_depth());

        let sym = [
            symmetry_gap(&psi, &chi, &op_l11(&d, &psi), &op_l11(&d, &chi)),
            symmetry_gap(&psi, &chi, &op_l12(&d, &psi), &op_l12(&d, &chi)),
            symmetry_gap(&psi, &chi, &op_l22(delta, &d, &psi), &op_l22(delta, &d, &chi)),
            symmetry_gap(&psi, &chi, &l1, &op_l1(delta, &d, &chi)),
        ];
        let s = max_of(sym);
        sym_worst = sym_worst.max(s);
        row(&mut report, "symmetry", t, delta, s, 0.0);

        let rhs = EllipticRhs {
            f1: smooth_field(&g, &mut rng, e.modes, 1.0),
            f2: smooth_field(&g, &mut rng, e.modes, 1.0),
            f3: smooth_field(&g, &mut rng, e.modes, 1.0),
        };
        let sol = solve_elliptic_pair(delta, &d, &rhs, &cg)?;
        let (r1, r2) = elliptic_pair_residuals(delta, &d, &rhs, &sol.psi0, &sol.psi1);
        let r = r1.max_abs().max(r2.max_abs());
        res_worst = res_worst.max(r);
        row(&mut report, "backsub", t, delta, r, sol.iterations as f64);
    }
    report.check(
        "coercivity",
        e.trials > 0 && coercive == e.trials,
        format!(
            "{coercive}/{} trials with (L1 psi, psi) > 0, min c = {c_min:.4e}, min H = {min_depth:.3}",
            e.trials
        ),
    );
    report.check(
        "operator symmetry",
        sym_worst <= cfg.checks.symmetry_tol,
        format!("max relative gap {sym_worst:.3e} over L11, L12, L22, L1 (tol {:e})", cfg.checks.symmetry_tol),
    );
    report.check(
        "back-substitution",
        res_worst <= cfg.checks.residual_tol,
        format!("max residual {res_worst:.3e} over {} solves (tol {:e})", e.trials, cfg.checks.residual_tol),
    );

    // Flat bottom: single-mode closed form.
    let flat = DepthCoefs::from_depth(RealField::constant(&g, 1.0));
    let base = 2.0 * std::f64::consts::PI / cfg.grid.length;
    let mut cf_worst = 0.0_f64;
    for &delta in &deltas {
        for &m in &e.closed_form_modes {
            let k = base * f64::from(m);
            let dk2 = delta * delta * k * k;
            let mode = RealField::from_fn(&g, |x| (k * x).cos());
            let sol = solve_elliptic_pair(delta, &flat, &EllipticRhs::from_f1(mode.clone()), &cg)?;
            let denom = 1.0 + 0.4 * dk2;
            let err0 = (&sol.psi0 - &mode.scale((1.0 - dk2 / 10.0) / denom)).max_abs();
            let err1 = (&sol.psi1 - &mode.scale(0.5 * k * k / denom)).max_abs();
            let err = err0.max(err1);
            cf_worst = cf_worst.max(err);
            row(&mut report, "closed-form", m as usize, delta, err, k);
        }
    }
    report.check(
        "closed form",
        cf_worst <= cfg.checks.closed_form_tol,
        format!("max error {cf_worst:.3e} on flat single modes (tol {:e})", cfg.checks.closed_form_tol),
    );

    // Estimate shape: the ratio of solution to data norms stays delta-uniform.
    let per = (e.trials / e.estimate_deltas.len().max(1)).max(1);
    let mut constants = Vec::new();
    for &delta in &e.estimate_deltas {
        let d2 = delta * delta;
        let mut c_delta = 0.0_f64;
        for t in 0..per {
            let d = DepthCoefs::from_depth(smooth_depth(&g, &mut rng, e.modes, e.h_floor));
            let rhs = EllipticRhs {
                f1: smooth_field(&g, &mut rng, e.modes, 1.0),
                f2: smooth_field(&g, &mut rng, e.modes, 1.0),
                f3: smooth_field(&g, &mut rng, e.modes, 1.0),
            };
            let sol = solve_elliptic_pair(delta, &d, &rhs, &cg)?;
            let sq = |f: &RealField| f.l2_norm().powi(2);
            let lhs = sq(&sol.psi0.dx()) + d2 * sq(&sol.psi1) + d2 * d2 * sq(&sol.psi1.dx());
            let data = sq(&rhs.f1.dx()) + sq(&rhs.f3) + d2 * sq(&rhs.f2);
            let c = lhs / data;
            c_delta = c_delta.max(c);
            row(&mut report, "estimate", t, delta, c, data);
        }
        report.note(format!("estimate constant at delta = {delta}: {c_delta:.4e}"));
        constants.push(c_delta);
    }
    let spread = (max_of(constants.iter().copied()) / min_of(constants.iter().copied())).log10();
    report.check(
        "estimate shape",
        spread.is_finite() && spread <= cfg.checks.estimate_decades,
        format!(
            "log10(max C / min C) = {spread:.3} over delta in {:?} (need <= {})",
            e.estimate_deltas, cfg.checks.estimate_decades
        ),
    );
    report.note(format!("seed {}, {} trials, depth floor {}, {} Fourier modes", cfg.seed, e.trials, e.h_floor, e.modes));
    Ok(report)
}
