//! Remainder chain showing that IK solutions satisfy the water-wave
//! equations up to `O(δ⁶)`, and the linear dispersion comparison.
//!
//! Naming: `big_r(k)` style remainders are returned as arrays indexed from
//! `R₁`; the residuals `r₁`, `r₂` are the δ⁻⁶-scaled defects of the two
//! water-wave equations.

use crate::dtn_ww::{dtn_apply, lambda0, lambda1, lambda2, DtnBackend};
use crate::error::SolverError;
use crate::ik_solver::{time_derivatives, IkDerivative};
use crate::operators::{CgSettings, IkState};
use crate::spectral::RealField;

/// `½Δ(H²f) - (1/10)H²Δf`
fn r_step(h2: &RealField, f: &RealField) -> RealField {
    h2.pointwise(f).dxx().scale(0.5).axpy(-0.1, &h2.pointwise(&f.dxx()))
}

/// `[R₁, R₂, R₃, R₄, R₅]`
pub fn remainders_r1_to_r5(s: &IkState) -> [RealField; 5] {
    let h2 = s.eta.map(|e| (1.0 + e).powi(2));
    let h3 = s.eta.map(|e| (1.0 + e).powi(3));
    let r1 = r_step(&h2, &s.phi1);
    let r2 = r_step(&h2, &r1);
    let lift = |f: &RealField| h3.pointwise(f).dxx().scale(2.0 / 3.0);
    let r3 = lift(&s.phi1);
    let r4 = lift(&r1);
    let r5 = lift(&r2);
    [r1, r2, r3, r4, r5]
}

/// `R₆`, the remainder of the Bernoulli equation rewritten in `(η, φ)`.
pub fn remainder_r6(s: &IkState, d: &IkDerivative) -> RealField {
    let h = s.eta.map(|e| 1.0 + e);
    let h2 = h.pointwise(&h);
    let [r1, r2, r3, r4, _] = remainders_r1_to_r5(s);
    let phi = s.surface_potential();
    let lap = phi.dxx();
    let ex = s.eta.dx();
    let grad_eta2 = ex.pointwise(&ex);
    let mid = h2.pointwise(&lap).dxx().scale(0.5).axpy(-0.1, &h2.pointwise(&lap.dxx()));
    let adv = d.eta_t.axpy(1.0, &ex.pointwise(&phi.dx()));

    let first = (&(-&lap.pointwise(&r4)) - &mid.pointwise(&r3)).axpy(2.0, &adv.pointwise(&r2));
    let second = lap
        .pointwise(&r2)
        .axpy(1.0, &mid.pointwise(&r1))
        .axpy(-2.0, &s.phi1.pointwise(&r2))
        .axpy(1.0, &grad_eta2.pointwise(&lap.axpy(-2.0, &s.phi1)).pointwise(&r1));
    &h.pointwise(&first) + &h2.pointwise(&second)
}

/// `[R₇, R₈, R₉]` from a precomputed `Λφ`.
pub fn dtn_remainders(eta: &RealField, phi: &RealField, delta: f64, lam: &RealField) -> [RealField; 3] {
    let d2 = delta * delta;
    let l0 = lambda0(eta, phi);
    let l1 = lambda1(eta, phi);
    let l2 = lambda2(eta, phi);
    let r7 = (lam - &l0).scale(1.0 / d2);
    let r8 = (&r7 - &l1).scale(1.0 / d2);
    let r9 = (&r8 - &l2).scale(1.0 / d2);
    [r7, r8, r9]
}

/// `R₁₀`, the remainder of the expanded water-wave Bernoulli nonlinearity.
pub fn remainder_r10(eta: &RealField, phi: &RealField, delta: f64, lam: &RealField) -> RealField {
    let d2 = delta * delta;
    let [r7, r8, _] = dtn_remainders(eta, phi, delta, lam);
    let ex = eta.dx();
    let g2 = ex.pointwise(&ex);
    let cross = ex.pointwise(&phi.dx());
    let q = lam + &cross;
    let l0 = lambda0(eta, phi);
    let sum = l0.axpy(1.0, lam).axpy(2.0, &cross);
    let head = g2
        .pointwise(&g2)
        .pointwise(&q.pointwise(&q))
        .zip_map(&g2, |v, g| 0.5 * v / (1.0 + d2 * g));
    head.axpy(-0.5, &g2.pointwise(&sum).pointwise(&r7))
        .axpy(0.5, &sum.pointwise(&r8))
        .axpy(0.5, &lambda1(eta, phi).pointwise(&r7))
}

/// Pointwise residual fields of one consistency evaluation.
#[derive(Debug, Clone)]
pub struct ConsistencyFields {
    pub r1: RealField,
    pub r2: RealField,
    pub big_r5: RealField,
    pub big_r9: RealField,
    pub lambda: RealField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub delta: f64,
    pub r1_norm: f64,
    pub r2_norm: f64,
    /// `‖r₁ - (R₅ - R₉)‖∞`
    pub identity_gap: f64,
    /// `‖R₅‖∞`, the scale against which `identity_gap` is judged.
    pub r5_max: f64,
}

impl ConsistencyReport {
    pub fn identity_holds(&self, tol: f64) -> bool {
        self.identity_gap <= tol * self.r5_max.max(1.0)
    }
}

/// `∂ₜφ` of the reconstructed surface potential `φ = φ₀ + δ²H²φ₁`.
pub fn surface_potential_rate(s: &IkState, d: &IkDerivative) -> RealField {
    let d2 = s.delta * s.delta;
    let h = s.eta.map(|e| 1.0 + e);
    let h2 = h.pointwise(&h);
    let h_rate = h.pointwise(&d.eta_t).pointwise(&s.phi1).scale(2.0);
    d.phi0_t.axpy(d2, &h_rate.axpy(1.0, &h2.pointwise(&d.phi1_t)))
}

pub fn residual_fields(s: &IkState, backend: &DtnBackend, cg: &CgSettings) -> Result<ConsistencyFields, SolverError> {
    let d = time_derivatives(s, cg)?;
    let delta = s.delta;
    let d2 = delta * delta;
    let scale = 1.0 / (d2 * d2 * d2);
    let phi = s.surface_potential();
    let lam = dtn_apply(backend, &s.eta, &phi, delta)?;

    let r1 = (&d.eta_t - &lam).scale(scale);

    let ex = s.eta.dx();
    let px = phi.dx();
    let q = &lam + &ex.pointwise(&px);
    let defect = surface_potential_rate(s, &d)
        .axpy(1.0, &s.eta)
        .axpy(0.5, &px.pointwise(&px))
        .axpy(-d2, &q.pointwise(&q).zip_map(&ex, |v, e| v / (2.0 * (1.0 + d2 * e * e))));
    let r2 = defect.scale(scale);

    let [_, _, _, _, big_r5] = remainders_r1_to_r5(s);
    let [_, _, big_r9] = dtn_remainders(&s.eta, &phi, delta, &lam);
    Ok(ConsistencyFields { r1, r2, big_r5, big_r9, lambda: lam })
}

/// δ⁻⁶-normalized residual norms and the `r₁ = R₅ - R₉` cross-check.
pub fn residuals(s: &IkState, backend: &DtnBackend, cg: &CgSettings) -> Result<ConsistencyReport, SolverError> {
    let f = residual_fields(s, backend, cg)?;
    let gap = (&f.r1 - &(&f.big_r5 - &f.big_r9)).max_abs();
    Ok(ConsistencyReport {
        delta: s.delta,
        r1_norm: f.r1.l2_norm(),
        r2_norm: f.r2.l2_norm(),
        identity_gap: gap,
        r5_max: f.big_r5.max_abs(),
    })
}

/// Max-norm gap between `Λ⁽²⁾φ` and its unsymmetrized form
/// `-(1/6)Δ(H³Δ(H²Δφ)) + (1/30)Δ(H⁵Δ²φ)`.
pub fn symmetric_form_gap(eta: &RealField, phi: &RealField) -> f64 {
    let h2 = eta.map(|e| (1.0 + e).powi(2));
    let h3 = eta.map(|e| (1.0 + e).powi(3));
    let h5 = eta.map(|e| (1.0 + e).powi(5));
    let lap = phi.dxx();
    let plain = h3
        .pointwise(&h2.pointwise(&lap).dxx())
        .dxx()
        .scale(-1.0 / 6.0)
        .axpy(1.0 / 30.0, &h5.pointwise(&lap.dxx()).dxx());
    (&plain - &lambda2(eta, phi)).max_abs()
}

/// IK phase speed squared `(1 + x²/15)/(1 + 2x²/5)` at `x = δk`.
pub fn c_ik_squared(x: f64) -> f64 {
    let x2 = x * x;
    (1.0 + x2 / 15.0) / (1.0 + 0.4 * x2)
}

/// Water-wave phase speed squared `tanh(x)/x`.
pub fn c_ww_squared(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tanh() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRow {
    pub x: f64,
    pub c_ik2: f64,
    pub c_ww2: f64,
    pub diff: f64,
}

pub fn dispersion_table(xs: &[f64]) -> Vec<DispersionRow> {
    xs.iter()
        .map(|&x| {
            let c_ik2 = c_ik_squared(x);
            let c_ww2 = c_ww_squared(x);
            DispersionRow { x, c_ik2, c_ww2, diff: c_ik2 - c_ww2 }
        })
        .collect()
}
