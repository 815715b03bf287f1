//! Differential operators, nonlinear terms and energies of the
//! Isobe–Kakinuma model, and the CG solve for the coupled potential pair.
//!
//! Linear operators use plain pointwise products so that their discrete
//! versions stay exactly symmetric; genuinely nonlinear terms go through the
//! 2/3-rule product.

use std::sync::Arc;

use crate::error::SolverError;
use crate::spectral::{Multiplier, PeriodicGrid, RealField};

/// Default lower guard on the water depth `H = 1 + η`.
pub const DEFAULT_H_MIN: f64 = 0.1;
/// Default relative residual target of the CG solve.
pub const DEFAULT_CG_TOL: f64 = 1e-12;
/// Default CG iteration cap.
pub const DEFAULT_CG_MAX_ITER: usize = 500;

/// Phase point `(η, φ₀, φ₁)` of the model at shallowness `δ`.
#[derive(Debug, Clone)]
pub struct IkState {
    pub eta: RealField,
    pub phi0: RealField,
    pub phi1: RealField,
    pub delta: f64,
}

impl IkState {
    pub fn new(eta: RealField, phi0: RealField, phi1: RealField, delta: f64) -> Result<Self, SolverError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(SolverError::InvalidConfig(format!("delta must lie in (0, 1], got {delta}")));
        }
        assert!(eta.grid().same_as(phi0.grid()) && eta.grid().same_as(phi1.grid()));
        Ok(Self { eta, phi0, phi1, delta })
    }

    /// Still water with a flat surface.
    pub fn rest(grid: &Arc<PeriodicGrid>, delta: f64) -> Self {
        let z = RealField::zeros(grid);
        Self { eta: z.clone(), phi0: z.clone(), phi1: z, delta }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        self.eta.grid()
    }

    pub fn depth(&self) -> DepthCoefs {
        DepthCoefs::from_eta(&self.eta)
    }

    /// Surface potential `φ = φ₀ + δ²H²φ₁`.
    pub fn surface_potential(&self) -> RealField {
        let d = self.depth();
        self.phi0.axpy(self.delta * self.delta, &d.h2.pointwise(&self.phi1))
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.phi0.is_finite() && self.phi1.is_finite()
    }

    pub fn max_norm(&self) -> f64 {
        self.eta.max_abs().max(self.phi0.max_abs()).max(self.phi1.max_abs())
    }
}

/// Depth `H = 1 + η`, its powers and slope.
#[derive(Debug, Clone)]
pub struct DepthCoefs {
    pub h: RealField,
    pub h2: RealField,
    pub h3: RealField,
    pub h4: RealField,
    pub h5: RealField,
    pub h7: RealField,
    /// `∂ₓη = ∂ₓH`
    pub h_x: RealField,
}

impl DepthCoefs {
    pub fn from_eta(eta: &RealField) -> Self {
        Self::from_depth(eta.map(|e| 1.0 + e))
    }

    pub fn from_depth(h: RealField) -> Self {
        let h_x = h.dx();
        Self {
            h2: h.map(|v| v.powi(2)),
            h3: h.map(|v| v.powi(3)),
            h4: h.map(|v| v.powi(4)),
            h5: h.map(|v| v.powi(5)),
            h7: h.map(|v| v.powi(7)),
            h_x,
            h,
        }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        self.h.grid()
    }

    pub fn min_depth(&self) -> f64 {
        self.h.min()
    }

    pub fn check(&self, h_min: f64) -> Result<(), SolverError> {
        let min_depth = self.min_depth();
        if min_depth < h_min || !min_depth.is_finite() {
            Err(SolverError::DepthTooSmall { min_depth, h_min })
        } else {
            Ok(())
        }
    }
}

/// `-∂ₓ(c ∂ₓψ)`
fn neg_div_coef_grad(coef: &RealField, psi: &RealField) -> RealField {
    -&coef.pointwise(&psi.dx()).dx()
}

/// `L₁₁ψ = -∇·(H∇ψ)`
pub fn op_l11(d: &DepthCoefs, psi: &RealField) -> RealField {
    neg_div_coef_grad(&d.h, psi)
}

/// `L₁₂ψ = -∇·(H³/3 ∇ψ)`
pub fn op_l12(d: &DepthCoefs, psi: &RealField) -> RealField {
    neg_div_coef_grad(&d.h3, psi).scale(1.0 / 3.0)
}

/// `L₂₂ψ = -δ²∇·(H⁵/5 ∇ψ) + (4/3)H³ψ`
pub fn op_l22(delta: f64, d: &DepthCoefs, psi: &RealField) -> RealField {
    let d2 = delta * delta;
    neg_div_coef_grad(&d.h5, psi)
        .scale(d2 / 5.0)
        .axpy(4.0 / 3.0, &d.h3.pointwise(psi))
}

/// `L₁ψ = δ²(H²L₁₁ - L₁₂)(H²ψ) + (L₂₂ - δ²H²L₁₂)ψ`, the operator left after
/// eliminating `ψ₀` from the coupled pair.
pub fn op_l1(delta: f64, d: &DepthCoefs, psi: &RealField) -> RealField {
    let d2 = delta * delta;
    let u = d.h2.pointwise(psi);
    let first = &d.h2.pointwise(&op_l11(d, &u)) - &op_l12(d, &u);
    let second = op_l22(delta, d, psi).axpy(-d2, &d.h2.pointwise(&op_l12(d, psi)));
    second.axpy(d2, &first)
}

/// `(2/3)Δφ₀ + (2/15)δ²H²Δφ₁ + (4/3)φ₁`, which vanishes on admissible states.
pub fn constraint_residual(s: &IkState) -> RealField {
    let d2 = s.delta * s.delta;
    let h2 = s.eta.map(|e| (1.0 + e).powi(2));
    s.phi0
        .dxx()
        .scale(2.0 / 3.0)
        .axpy(2.0 * d2 / 15.0, &h2.pointwise(&s.phi1.dxx()))
        .axpy(4.0 / 3.0, &s.phi1)
}

/// Horizontal velocity at the surface, `u = ∇φ₀ + δ²H²∇φ₁`.
pub fn surface_velocity(s: &IkState) -> RealField {
    let h2 = s.eta.map(|e| (1.0 + e).powi(2));
    s.phi0
        .dx()
        .axpy(s.delta * s.delta, &h2.dealiased_product(&s.phi1.dx()))
}

/// Bernoulli-type source
/// `F₁ = η + ½|∇φ₀|² + δ²H²∇φ₀·∇φ₁ + ½δ⁴H⁴|∇φ₁|² + 2δ²H²φ₁²`.
pub fn f1_nonlinear(s: &IkState) -> RealField {
    let d2 = s.delta * s.delta;
    let h = s.eta.map(|e| 1.0 + e);
    let h2 = h.dealiased_product(&h);
    let h4 = h2.dealiased_product(&h2);
    let p0 = s.phi0.dx();
    let p1 = s.phi1.dx();
    let cross = h2.dealiased_product(&p0.dealiased_product(&p1));
    let grad1 = h4.dealiased_product(&p1.dealiased_product(&p1));
    let pot = h2.dealiased_product(&s.phi1.dealiased_product(&s.phi1));
    s.eta
        .axpy(0.5, &p0.dealiased_product(&p0))
        .axpy(d2, &cross)
        .axpy(0.5 * d2 * d2, &grad1)
        .axpy(2.0 * d2, &pot)
}

/// `F₂ = (4/15)δ²H⁴ ∂ₜη Δφ₁`
pub fn f2_forcing(s: &IkState, eta_t: &RealField) -> RealField {
    let d2 = s.delta * s.delta;
    let h4 = s.eta.map(|e| (1.0 + e).powi(4));
    h4.dealiased_product(&eta_t.dealiased_product(&s.phi1.dxx()))
        .scale(4.0 * d2 / 15.0)
}

/// Sign function
/// `a = 1 + 2δ²H∂ₜφ₁ + 2δ²H∇φ₀·∇φ₁ + 2δ⁴H³|∇φ₁|² + 4δ²Hφ₁²`.
pub fn coef_a(s: &IkState, phi1_t: &RealField) -> RealField {
    let d2 = s.delta * s.delta;
    let h = s.eta.map(|e| 1.0 + e);
    let h3 = s.eta.map(|e| (1.0 + e).powi(3));
    let p0 = s.phi0.dx();
    let p1 = s.phi1.dx();
    let inner = phi1_t
        .axpy(1.0, &p0.dealiased_product(&p1))
        .axpy(2.0, &s.phi1.dealiased_product(&s.phi1))
        .scale(2.0 * d2);
    let grad = h3.dealiased_product(&p1.dealiased_product(&p1)).scale(2.0 * d2 * d2);
    (&h.dealiased_product(&inner) + &grad).map(|v| 1.0 + v)
}

/// Kinetic part `½∫∫|∇Φ|² + δ⁻²|∂_zΦ|²` of the energy for the vertical
/// profile `Φ = φ₀ + δ²z²φ₁` integrated over `0 < z < H`.
fn kinetic(delta: f64, h: &RealField, phi0: &RealField, phi1: &RealField) -> f64 {
    let d2 = delta * delta;
    let p0 = phi0.dx();
    let p1 = phi1.dx();
    let density: Vec<f64> = h
        .values()
        .iter()
        .zip(p0.values().iter().zip(p1.values()))
        .zip(phi1.values())
        .map(|((&h, (&a, &b)), &c)| {
            let h3 = h * h * h;
            h * a * a
                + 2.0 / 3.0 * d2 * h3 * a * b
                + 0.2 * d2 * d2 * h3 * h * h * b * b
                + 4.0 / 3.0 * d2 * h3 * c * c
        })
        .collect();
    0.5 * RealField::from_values(h.grid(), density).integrate()
}

/// Total energy: potential `½‖η‖²` plus the kinetic energy of the
/// quadratic vertical profile.
pub fn energy(s: &IkState) -> f64 {
    let h = s.eta.map(|e| 1.0 + e);
    0.5 * s.eta.inner(&s.eta) + kinetic(s.delta, &h, &s.phi0, &s.phi1)
}

/// Flat-state quadratic energy `½(A₀(D)U, U)`.
pub fn linearized_energy(s: &IkState) -> f64 {
    let one = RealField::constant(s.grid(), 1.0);
    0.5 * s.eta.inner(&s.eta) + kinetic(s.delta, &one, &s.phi0, &s.phi1)
}

/// `E₁(U) = E(U) + (2/5)δ² E(∂ₓU)` with `E` the flat-state energy.
pub fn linearized_energy_e1(s: &IkState) -> f64 {
    let dxs = IkState {
        eta: s.eta.dx(),
        phi0: s.phi0.dx(),
        phi1: s.phi1.dx(),
        delta: s.delta,
    };
    linearized_energy(s) + 0.4 * s.delta * s.delta * linearized_energy(&dxs)
}

/// Right-hand side `(f₁, f₂, f₃)` of the coupled elliptic pair.
#[derive(Debug, Clone)]
pub struct EllipticRhs {
    pub f1: RealField,
    pub f2: RealField,
    pub f3: RealField,
}

impl EllipticRhs {
    /// Data of the initial-value relation: `f₁ = φ`, `f₂ = f₃ = 0`.
    pub fn from_f1(f1: RealField) -> Self {
        let z = RealField::zeros(f1.grid());
        Self { f2: z.clone(), f3: z, f1 }
    }
}

/// CG controls for [`solve_elliptic_pair`].
#[derive(Debug, Clone, Copy)]
pub struct CgSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub h_min: f64,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { tol: DEFAULT_CG_TOL, max_iter: DEFAULT_CG_MAX_ITER, h_min: DEFAULT_H_MIN }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub psi0: RealField,
    pub psi1: RealField,
    pub iterations: usize,
    /// Final relative residual of the `L₁` equation.
    pub residual: f64,
}

/// Solves
///
/// ```text
/// ψ₀ + δ²H²ψ₁ = f₁
/// H²(L₁₁ψ₀ + δ²L₁₂ψ₁) = L₁₂ψ₀ + L₂₂ψ₁ + f₂ + ∇·f₃
/// ```
///
/// by eliminating `ψ₀` and running preconditioned CG on the symmetric
/// positive operator `L₁`.
pub fn solve_elliptic_pair(
    delta: f64,
    d: &DepthCoefs,
    rhs: &EllipticRhs,
    settings: &CgSettings,
) -> Result<EllipticSolution, SolverError> {
    d.check(settings.h_min)?;
    let d2 = delta * delta;
    let f1x = rhs.f1.dx();
    let flux = d.h3.pointwise(&f1x).scale(2.0 / 3.0).axpy(1.0, &rhs.f3);
    let b = &(&(-&flux.dx()) + &d.h2.pointwise(&d.h_x.pointwise(&f1x)).scale(2.0)) - &rhs.f2;
    let cg = conjugate_gradient(delta, d, &b, settings)?;
    let psi0 = rhs.f1.axpy(-d2, &d.h2.pointwise(&cg.solution));
    Ok(EllipticSolution { psi0, psi1: cg.solution, iterations: cg.iterations, residual: cg.residual })
}

/// Residuals of both equations of the coupled pair for a candidate solution,
/// evaluated directly from `L₁₁`, `L₁₂`, `L₂₂`.
pub fn elliptic_pair_residuals(
    delta: f64,
    d: &DepthCoefs,
    rhs: &EllipticRhs,
    psi0: &RealField,
    psi1: &RealField,
) -> (RealField, RealField) {
    let d2 = delta * delta;
    let first = &psi0.axpy(d2, &d.h2.pointwise(psi1)) - &rhs.f1;
    let lhs = d.h2.pointwise(&op_l11(d, psi0).axpy(d2, &op_l12(d, psi1)));
    let rhs2 = &(&op_l12(d, psi0) + &op_l22(delta, d, psi1)) + &(&rhs.f2 + &rhs.f3.dx());
    (first, &lhs - &rhs2)
}

/// Initial potentials `(φ₀, φ₁)` matching the surface potential `φ` and the
/// constraint on the surface `η₀`.
pub fn solve_initial_data(
    eta0: &RealField,
    phi: &RealField,
    delta: f64,
    settings: &CgSettings,
) -> Result<EllipticSolution, SolverError> {
    let d = DepthCoefs::from_eta(eta0);
    solve_elliptic_pair(delta, &d, &EllipticRhs::from_f1(phi.clone()), settings)
}

struct CgOutcome {
    solution: RealField,
    iterations: usize,
    residual: f64,
}

/// Flat-state symbol of `L₁`: `(8/15)δ²k² + 4/3`.
pub fn flat_l1_symbol(delta: f64, k: f64) -> f64 {
    8.0 / 15.0 * delta * delta * k * k + 4.0 / 3.0
}

fn conjugate_gradient(
    delta: f64,
    d: &DepthCoefs,
    b: &RealField,
    settings: &CgSettings,
) -> Result<CgOutcome, SolverError> {
    let grid = d.grid();
    let b_norm = b.l2_norm();
    if b_norm == 0.0 {
        return Ok(CgOutcome { solution: RealField::zeros(grid), iterations: 0, residual: 0.0 });
    }
    // Flat symbol sandwiched between H^{-3/2} scalings: equals the flat
    // symbol when H ≡ 1 and tracks the (4/3)H³ mass term otherwise.
    let flat = Multiplier::from_symbol(grid, |k| 1.0 / flat_l1_symbol(delta, k));
    let scaling = d.h.map(|h| h.powf(-1.5));
    let precond = |r: &RealField| scaling.pointwise(&flat.apply(&scaling.pointwise(r)));

    let mut x = RealField::zeros(grid);
    let mut r = b.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z);
    let mut residual = 1.0;
    for it in 1..=settings.max_iter {
        let ap = op_l1(delta, d, &p);
        let alpha = rz / p.inner(&ap);
        x = x.axpy(alpha, &p);
        r = r.axpy(-alpha, &ap);
        residual = r.l2_norm() / b_norm;
        if residual <= settings.tol {
            return Ok(CgOutcome { solution: x, iterations: it, residual });
        }
        z = precond(&r);
        let rz_new = r.inner(&z);
        p = z.axpy(rz_new / rz, &p);
        rz = rz_new;
    }
    Err(SolverError::NonConvergence { iterations: settings.max_iter, residual })
}
