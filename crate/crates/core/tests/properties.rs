//! Randomized properties of the spectral layer, the IK operators and the
//! DtN operators.

use std::sync::Arc;

use approx::assert_relative_eq;
use iskak_core::dtn_ww::{dtn_exact, lambda0, lambda1, lambda2};
use iskak_core::operators::{op_l1, op_l11, op_l12, op_l22, DepthCoefs};
use iskak_core::random::{seeded_rng, smooth_depth, smooth_field};
use iskak_core::{Multiplier, PeriodicGrid, RealField};
use proptest::prelude::*;

fn grid(n: usize) -> Arc<PeriodicGrid> {
    PeriodicGrid::standard(n).unwrap()
}

fn fields(seed: u64, n: usize, count: usize) -> (Arc<PeriodicGrid>, Vec<RealField>) {
    let g = grid(n);
    let mut rng = seeded_rng(seed);
    let fs = (0..count).map(|_| smooth_field(&g, &mut rng, 6, 1.0)).collect();
    (g, fs)
}

fn asym(a: &RealField, b: &RealField, la: &RealField, lb: &RealField) -> f64 {
    (la.inner(b) - a.inner(lb)).abs() / (la.l2_norm() * b.l2_norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval(seed in any::<u64>()) {
        let (g, f) = fields(seed, 64, 1);
        let n = g.n_points() as f64;
        let spec_energy: f64 = f[0].spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
        let physical: f64 = f[0].values().iter().map(|v| v * v).sum();
        assert_relative_eq!(spec_energy, physical, max_relative = 1e-12);
    }

    #[test]
    fn derivatives_integrate_to_zero(seed in any::<u64>()) {
        let (_, f) = fields(seed, 64, 1);
        prop_assert!(f[0].dx().integrate().abs() < 1e-12);
        prop_assert!(f[0].dxx().integrate().abs() < 1e-11);
        // Integration by parts on the torus.
        let (a, b) = (f[0].dx().inner(&f[0]), f[0].dxx().inner(&f[0]));
        prop_assert!(a.abs() < 1e-11);
        assert_relative_eq!(b, -f[0].dx().inner(&f[0].dx()), max_relative = 1e-11);
    }

    #[test]
    fn multipliers_commute(seed in any::<u64>(), delta in 0.05f64..1.0) {
        let (g, f) = fields(seed, 64, 1);
        let tanh = Multiplier::from_symbol(&g, |k| if k == 0.0 { 0.0 } else { k * (delta * k).tanh() / delta });
        let lap = Multiplier::from_symbol(&g, |k| -k * k);
        let ab = tanh.apply(&lap.apply(&f[0]));
        let ba = lap.apply(&tanh.apply(&f[0]));
        prop_assert!((&ab - &ba).max_abs() < 1e-10 * ab.max_abs().max(1.0));
        prop_assert!((&lap.apply(&f[0]) - &f[0].dxx()).max_abs() < 1e-10);
    }

    #[test]
    fn ik_operators_symmetric_and_l1_positive(seed in any::<u64>(), delta in 0.05f64..0.6) {
        let g = grid(64);
        let mut rng = seeded_rng(seed);
        let d = DepthCoefs::from_depth(smooth_depth(&g, &mut rng, 6, 0.5));
        let p = smooth_field(&g, &mut rng, 6, 1.0);
        let q = smooth_field(&g, &mut rng, 6, 1.0);
        prop_assert!(asym(&p, &q, &op_l11(&d, &p), &op_l11(&d, &q)) < 1e-12);
        prop_assert!(asym(&p, &q, &op_l12(&d, &p), &op_l12(&d, &q)) < 1e-12);
        prop_assert!(asym(&p, &q, &op_l22(delta, &d, &p), &op_l22(delta, &d, &q)) < 1e-12);
        prop_assert!(asym(&p, &q, &op_l1(delta, &d, &p), &op_l1(delta, &d, &q)) < 1e-12);
        let norm = p.inner(&p) + delta * delta * p.dx().inner(&p.dx());
        prop_assert!(op_l1(delta, &d, &p).inner(&p) > 0.1 * norm);
    }

    #[test]
    fn expansion_terms_are_symmetric(seed in any::<u64>()) {
        let g = grid(64);
        let mut rng = seeded_rng(seed);
        let eta = smooth_field(&g, &mut rng, 4, 0.3);
        let p = smooth_field(&g, &mut rng, 6, 1.0);
        let q = smooth_field(&g, &mut rng, 6, 1.0);
        for op in [lambda0, lambda1, lambda2] {
            prop_assert!(asym(&p, &q, &op(&eta, &p), &op(&eta, &q)) < 1e-9);
        }
        // Order 0 is nonnegative: (Λ⁽⁰⁾p, p) = ‖√H p_x‖².
        prop_assert!(lambda0(&eta, &p).inner(&p) >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn exact_dtn_symmetric_positive(seed in any::<u64>(), delta in 0.1f64..0.5) {
        let g = grid(64);
        let mut rng = seeded_rng(seed);
        let eta = smooth_field(&g, &mut rng, 4, 0.3);
        let p = smooth_field(&g, &mut rng, 6, 1.0);
        let q = smooth_field(&g, &mut rng, 6, 1.0);
        let lp = dtn_exact(&eta, &p, delta, 16).unwrap();
        let lq = dtn_exact(&eta, &q, delta, 16).unwrap();
        prop_assert!(asym(&p, &q, &lp, &lq) < 1e-9);
        prop_assert!(lp.inner(&p) > 0.0);
        // Mass flux: the DtN image has zero mean.
        prop_assert!(lp.integrate().abs() < 1e-10);
    }
}
