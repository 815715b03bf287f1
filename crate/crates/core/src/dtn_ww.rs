//! Dirichlet-to-Neumann operator and the Zakharov–Craig–Sulem water-wave
//! equations.
//!
//! The exact operator flattens the fluid layer `-1 < z < η` onto the strip
//! `-1 < z < 0` and solves the resulting variable-coefficient Laplace problem
//! with Fourier collocation in `x` and Chebyshev–Gauss–Lobatto collocation in
//! `z`. The flux is read off from the depth-averaged horizontal velocity,
//! which keeps `Λφ` in exact divergence form.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::error::SolverError;
use crate::ik_solver::{SimConfig, BLOWUP_THRESHOLD};
use crate::operators::DEFAULT_H_MIN;
use crate::spectral::{PeriodicGrid, RealField};

/// Relative residual target of the strip solve.
pub const STRIP_TOL: f64 = 1e-12;
/// Residual below which a stagnating solve is accepted as converged.
pub const STAGNATION_TOL: f64 = 1e-9;
const GMRES_RESTART: usize = 40;
const GMRES_MAX_ITER: usize = 600;

/// How `Λ(η, δ)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtnBackend {
    /// Strip solve with `n_z + 1` Chebyshev nodes in the vertical.
    Exact { n_z: usize },
    /// Truncated shallow-water expansion `Σ_{k≤order} δ^{2k} Λ⁽ᵏ⁾`.
    Series { order: usize },
}

impl DtnBackend {
    pub fn validate(&self) -> Result<(), SolverError> {
        match *self {
            DtnBackend::Exact { n_z } if n_z < 8 => {
                Err(SolverError::InvalidConfig(format!("n_z must be >= 8, got {n_z}")))
            }
            DtnBackend::Series { order } if order > 2 => {
                Err(SolverError::InvalidConfig(format!("series order must be 0, 1 or 2, got {order}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DtnBackend::Exact { n_z } => format!("exact(n_z={n_z})"),
            DtnBackend::Series { order } => format!("series(K={order})"),
        }
    }
}

fn depth(eta: &RealField) -> RealField {
    eta.map(|e| 1.0 + e)
}

/// `Λ⁽⁰⁾ψ = -∇·(H∇ψ)`
pub fn lambda0(eta: &RealField, psi: &RealField) -> RealField {
    -&depth(eta).pointwise(&psi.dx()).dx()
}

/// `Λ⁽¹⁾ψ = -(1/3)Δ(H³Δψ)`
pub fn lambda1(eta: &RealField, psi: &RealField) -> RealField {
    let h3 = eta.map(|e| (1.0 + e).powi(3));
    h3.pointwise(&psi.dxx()).dxx().scale(-1.0 / 3.0)
}

/// `Λ⁽²⁾ψ = -(1/15)Δ(H³Δ(H²Δψ)) - (1/15)Δ(H²Δ(H³Δψ)) + (1/5)Δ(|∇η|²H³Δψ)`
pub fn lambda2(eta: &RealField, psi: &RealField) -> RealField {
    let h2 = eta.map(|e| (1.0 + e).powi(2));
    let h3 = eta.map(|e| (1.0 + e).powi(3));
    let ex = eta.dx();
    let lap = psi.dxx();
    let a = h3.pointwise(&h2.pointwise(&lap).dxx()).dxx();
    let b = h2.pointwise(&h3.pointwise(&lap).dxx()).dxx();
    let c = ex.pointwise(&ex).pointwise(&h3).pointwise(&lap).dxx();
    (&a + &b).scale(-1.0 / 15.0).axpy(0.2, &c)
}

/// `Σ_{k≤order} δ^{2k} Λ⁽ᵏ⁾(η)φ`
pub fn dtn_series(eta: &RealField, phi: &RealField, delta: f64, order: usize) -> Result<RealField, SolverError> {
    DtnBackend::Series { order }.validate()?;
    let d2 = delta * delta;
    let mut out = lambda0(eta, phi);
    if order >= 1 {
        out = out.axpy(d2, &lambda1(eta, phi));
    }
    if order >= 2 {
        out = out.axpy(d2 * d2, &lambda2(eta, phi));
    }
    Ok(out)
}

/// Exact `Λ(η, δ)φ` from the strip solve.
pub fn dtn_exact(eta: &RealField, phi: &RealField, delta: f64, n_z: usize) -> Result<RealField, SolverError> {
    Ok(StripSolver::new(n_z)?.solve(eta, phi, delta, None)?.lambda)
}

/// Dispatches on the backend.
pub fn dtn_apply(backend: &DtnBackend, eta: &RealField, phi: &RealField, delta: f64) -> Result<RealField, SolverError> {
    match *backend {
        DtnBackend::Exact { n_z } => dtn_exact(eta, phi, delta, n_z),
        DtnBackend::Series { order } => dtn_series(eta, phi, delta, order),
    }
}

/// Chebyshev–Gauss–Lobatto nodes on `[-1, 0]` with differentiation and
/// Clenshaw–Curtis quadrature. Node 0 is the surface `z = 0`, node `n_z` the
/// bottom `z = -1`.
#[derive(Debug, Clone)]
pub struct ChebyshevStrip {
    n_z: usize,
    nodes: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    weights: Vec<f64>,
}

impl ChebyshevStrip {
    pub fn new(n_z: usize) -> Self {
        let n = n_z;
        let pi = std::f64::consts::PI;
        let s: Vec<f64> = (0..=n).map(|j| (pi * j as f64 / n as f64).cos()).collect();
        let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
        let mut d = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=n {
                if i != j {
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    d[(i, j)] = c(i) / c(j) * sign / (s[i] - s[j]);
                }
            }
        }
        for i in 0..=n {
            let row_sum: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
            d[(i, i)] = -row_sum;
        }
        // z = (s - 1)/2 so d/dz = 2 d/ds
        let d1 = d * 2.0;
        let d2 = &d1 * &d1;
        let nodes = s.iter().map(|&v| 0.5 * (v - 1.0)).collect();
        let weights = clenshaw_curtis(n).into_iter().map(|w| 0.5 * w).collect();
        Self { n_z, nodes, d1, d2, weights }
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }
}

/// Clenshaw–Curtis weights on `[-1, 1]` for the nodes `cos(πj/n)`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    let mut w = vec![0.0; n + 1];
    let theta: Vec<f64> = (0..=n).map(|j| pi * j as f64 / n as f64).collect();
    let nf = n as f64;
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
    }
    for j in 1..n {
        let mut v = 1.0;
        if n.is_multiple_of(2) {
            for k in 1..n / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta[j]).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            v -= (nf * theta[j]).cos() / (nf * nf - 1.0);
        } else {
            for k in 1..=(n - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta[j]).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        w[j] = 2.0 * v / nf;
    }
    w
}

/// Potential on the flattened strip, stored nodally: `values[j * n_x + i]`
/// is `Φ̃(x_i, z_j)` with `z_0 = 0` the surface.
#[derive(Debug, Clone)]
pub struct SigmaSolution {
    pub n_x: usize,
    pub n_z: usize,
    pub values: Vec<f64>,
}

impl SigmaSolution {
    pub fn level(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_x..(j + 1) * self.n_x]
    }

    pub fn surface(&self) -> &[f64] {
        self.level(0)
    }

    /// `∂_zΦ̃` at the bottom node.
    pub fn bottom_normal_derivative(&self, strip: &ChebyshevStrip) -> Vec<f64> {
        let n = self.n_z;
        (0..self.n_x)
            .map(|i| (0..=n).map(|m| strip.d1[(n, m)] * self.values[m * self.n_x + i]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct StripOutput {
    pub lambda: RealField,
    pub sigma: SigmaSolution,
    pub iterations: usize,
    pub residual: f64,
}

/// Reusable exact DtN evaluator for a fixed vertical resolution.
#[derive(Debug, Clone)]
pub struct StripSolver {
    strip: ChebyshevStrip,
    h_min: f64,
}

impl StripSolver {
    pub fn new(n_z: usize) -> Result<Self, SolverError> {
        DtnBackend::Exact { n_z }.validate()?;
        Ok(Self { strip: ChebyshevStrip::new(n_z), h_min: DEFAULT_H_MIN })
    }

    pub fn with_h_min(mut self, h_min: f64) -> Self {
        self.h_min = h_min;
        self
    }

    pub fn strip(&self) -> &ChebyshevStrip {
        &self.strip
    }

    /// Solves the strip problem for `Φ̃ = φ + δ²χ` and returns `Λφ`.
    /// `guess` is an optional starting value for the interior correction `χ`
    /// (levels `1..=n_z`, as returned in a previous [`StripOutput`]).
    pub fn solve(
        &self,
        eta: &RealField,
        phi: &RealField,
        delta: f64,
        guess: Option<&[f64]>,
    ) -> Result<StripOutput, SolverError> {
        let grid = eta.grid();
        let h = depth(eta);
        let min_depth = h.min();
        if min_depth.is_nan() || min_depth < self.h_min {
            return Err(SolverError::DepthTooSmall { min_depth, h_min: self.h_min });
        }
        let problem = StripProblem::new(&self.strip, grid, &h, &eta.dx(), delta)?;
        let n_x = grid.n_points();
        let n_z = self.strip.n_z;

        // interior rows: -H²φ_xx; bottom row: 0
        let forcing = h.pointwise(&h).pointwise(&phi.dxx());
        let mut b = vec![0.0; n_z * n_x];
        for j in 1..n_z {
            let row = &mut b[(j - 1) * n_x..j * n_x];
            row.iter_mut().zip(forcing.values()).for_each(|(r, &f)| *r = -f);
        }
        let (chi, iterations, residual) = gmres(&problem, &b, guess)?;

        // full correction field with the surface level pinned at zero
        let mut full = vec![0.0; (n_z + 1) * n_x];
        full[n_x..].copy_from_slice(&chi);
        let chi_x = dx_levels(grid, &full, n_z + 1);
        let chi_z = problem.apply_cheb(&self.strip.d1, &full);
        let ex = eta.dx();
        let mut vbar = vec![0.0; n_x];
        for j in 0..=n_z {
            let w = self.strip.weights[j];
            let zp1 = self.strip.nodes[j] + 1.0;
            for (i, v) in vbar.iter_mut().enumerate() {
                let k = j * n_x + i;
                *v += w * (chi_x[k] - zp1 * ex.values()[i] / h.values()[i] * chi_z[k]);
            }
        }
        let correction = h.pointwise(&RealField::from_values(grid, vbar)).dx();
        let lambda = lambda0(eta, phi).axpy(-delta * delta, &correction);

        let d2 = delta * delta;
        let values = (0..=n_z)
            .flat_map(|j| {
                let full = &full;
                phi.values().iter().enumerate().map(move |(i, &p)| p + d2 * full[j * n_x + i])
            })
            .collect();
        Ok(StripOutput {
            lambda,
            sigma: SigmaSolution { n_x, n_z, values },
            iterations,
            residual,
        })
    }
}

/// Discrete strip operator for the correction `χ` (levels `1..=n_z`).
struct StripProblem<'a> {
    strip: &'a ChebyshevStrip,
    grid: &'a Arc<PeriodicGrid>,
    h: Vec<f64>,
    ex: Vec<f64>,
    delta2: f64,
    /// LU factors of the mean-depth operator, one per `|k|` index.
    precond: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<'a> StripProblem<'a> {
    fn new(
        strip: &'a ChebyshevStrip,
        grid: &'a Arc<PeriodicGrid>,
        h: &RealField,
        ex: &RealField,
        delta: f64,
    ) -> Result<Self, SolverError> {
        let n = strip.n_z;
        let delta2 = delta * delta;
        let h2_mean = h.pointwise(h).mean();
        let k = grid.wavenumbers();
        let mut precond = Vec::with_capacity(grid.nyquist() + 1);
        for &km in &k[..=grid.nyquist()] {
            let shift = delta2 * h2_mean * km * km;
            let mut a = DMatrix::<f64>::zeros(n, n);
            for r in 1..n {
                for c in 1..=n {
                    a[(r - 1, c - 1)] = strip.d2[(r, c)];
                }
                a[(r - 1, r - 1)] -= shift;
            }
            for c in 1..=n {
                a[(n - 1, c - 1)] = strip.d1[(n, c)];
            }
            let lu = a.lu();
            if !lu.is_invertible() {
                return Err(SolverError::SingularSystem);
            }
            precond.push(lu);
        }
        Ok(Self {
            strip,
            grid,
            h: h.values().to_vec(),
            ex: ex.values().to_vec(),
            delta2,
            precond,
        })
    }

    fn n_x(&self) -> usize {
        self.grid.n_points()
    }

    /// `out[j] = Σ_m mat[j][m] field[m]` for full-level fields.
    fn apply_cheb(&self, mat: &DMatrix<f64>, field: &[f64]) -> Vec<f64> {
        let n_x = self.n_x();
        let levels = self.strip.n_z + 1;
        let mut out = vec![0.0; levels * n_x];
        for j in 0..levels {
            let dst = &mut out[j * n_x..(j + 1) * n_x];
            for m in 0..levels {
                let c = mat[(j, m)];
                if c == 0.0 {
                    continue;
                }
                let src = &field[m * n_x..(m + 1) * n_x];
                dst.iter_mut().zip(src).for_each(|(d, &s)| *d += c * s);
            }
        }
        out
    }

    fn apply(&self, chi: &[f64]) -> Vec<f64> {
        let n_x = self.n_x();
        let n = self.strip.n_z;
        let mut full = vec![0.0; (n + 1) * n_x];
        full[n_x..].copy_from_slice(chi);
        let fx = dx_levels(self.grid, &full, n + 1);
        let fz = self.apply_cheb(&self.strip.d1, &full);
        let fzz = self.apply_cheb(&self.strip.d2, &full);
        let mut qx = vec![0.0; (n + 1) * n_x];
        let mut qz = vec![0.0; (n + 1) * n_x];
        for j in 0..=n {
            let zp1 = self.strip.nodes[j] + 1.0;
            for i in 0..n_x {
                let k = j * n_x + i;
                let (h, ex) = (self.h[i], self.ex[i]);
                qx[k] = h * fx[k] - zp1 * ex * fz[k];
                qz[k] = -zp1 * ex * fx[k] + zp1 * zp1 * ex * ex / h * fz[k];
            }
        }
        let qx_x = dx_levels(self.grid, &qx, n + 1);
        let qz_z = self.apply_cheb(&self.strip.d1, &qz);
        let mut out = vec![0.0; n * n_x];
        for j in 1..n {
            for i in 0..n_x {
                let k = j * n_x + i;
                out[(j - 1) * n_x + i] = fzz[k] + self.delta2 * self.h[i] * (qx_x[k] + qz_z[k]);
            }
        }
        let bottom = n * n_x;
        out[(n - 1) * n_x..].copy_from_slice(&fz[bottom..bottom + n_x]);
        out
    }

    #[allow(clippy::needless_range_loop)]
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let n_x = self.n_x();
        let n = self.strip.n_z;
        let mut spec: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let mut buf: Vec<Complex64> =
                    r[j * n_x..(j + 1) * n_x].iter().map(|&v| Complex64::new(v, 0.0)).collect();
                self.grid.forward_in_place(&mut buf);
                buf
            })
            .collect();
        let mut re = DVector::<f64>::zeros(n);
        let mut im = DVector::<f64>::zeros(n);
        for m in 0..n_x {
            let lu = &self.precond[m.min(n_x - m)];
            for j in 0..n {
                re[j] = spec[j][m].re;
                im[j] = spec[j][m].im;
            }
            lu.solve_mut(&mut re);
            lu.solve_mut(&mut im);
            for j in 0..n {
                spec[j][m] = Complex64::new(re[j], im[j]);
            }
        }
        let mut out = Vec::with_capacity(n * n_x);
        for mut buf in spec {
            self.grid.inverse_in_place(&mut buf);
            out.extend(buf.iter().map(|c| c.re));
        }
        out
    }
}

/// Spectral x-derivative of each of `levels` stacked rows, two rows per
/// complex transform.
fn dx_levels(grid: &Arc<PeriodicGrid>, field: &[f64], levels: usize) -> Vec<f64> {
    let n_x = grid.n_points();
    let ny = grid.nyquist();
    let k = grid.wavenumbers();
    let mut out = vec![0.0; levels * n_x];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_x];
    let mut j = 0;
    while j < levels {
        let a = &field[j * n_x..(j + 1) * n_x];
        let pair = j + 1 < levels;
        for i in 0..n_x {
            let b = if pair { field[(j + 1) * n_x + i] } else { 0.0 };
            buf[i] = Complex64::new(a[i], b);
        }
        grid.forward_in_place(&mut buf);
        for (m, c) in buf.iter_mut().enumerate() {
            *c = if m == ny { Complex64::new(0.0, 0.0) } else { *c * Complex64::new(0.0, k[m]) };
        }
        grid.inverse_in_place(&mut buf);
        for i in 0..n_x {
            out[j * n_x + i] = buf[i].re;
            if pair {
                out[(j + 1) * n_x + i] = buf[i].im;
            }
        }
        j += 2;
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES.
fn gmres(problem: &StripProblem<'_>, b: &[f64], guess: Option<&[f64]>) -> Result<(Vec<f64>, usize, f64), SolverError> {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let mut total = 0;
    let mut rel = f64::INFINITY;
    let mut previous = f64::INFINITY;
    while total < GMRES_MAX_ITER {
        let ax = problem.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / b_norm;
        // a restart cycle that no longer halves the residual has hit roundoff
        if rel <= STRIP_TOL || (rel <= STAGNATION_TOL && rel > 0.5 * previous) {
            return Ok((x, total, rel));
        }
        previous = rel;
        let m = GMRES_RESTART;
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for k in 0..m {
            let z = problem.precondition(&basis[k]);
            let mut w = problem.apply(&z);
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                hess[i][k] = hik;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hik * vi);
            }
            let wn = norm(&w);
            hess[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let den = hess[k][k].hypot(hess[k + 1][k]);
            cs[k] = hess[k][k] / den;
            sn[k] = hess[k + 1][k] / den;
            hess[k][k] = den;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            used = k + 1;
            total += 1;
            rel = g[k + 1].abs() / b_norm;
            if rel <= 0.1 * STRIP_TOL || wn == 0.0 || total >= GMRES_MAX_ITER {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            update.iter_mut().zip(v).for_each(|(u, vi)| *u += yi * vi);
        }
        let dz = problem.precondition(&update);
        x.iter_mut().zip(&dz).for_each(|(xi, di)| *xi += di);
    }
    let ax = problem.apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let final_rel = norm(&r) / b_norm;
    if final_rel <= STRIP_TOL {
        Ok((x, total, final_rel))
    } else {
        Err(SolverError::NonConvergence { iterations: total, residual: final_rel.min(rel.max(final_rel)) })
    }
}

/// Surface elevation and potential trace `(η, φ)` of the full problem.
#[derive(Debug, Clone)]
pub struct WwState {
    pub eta: RealField,
    pub phi: RealField,
    pub delta: f64,
}

impl WwState {
    pub fn new(eta: RealField, phi: RealField, delta: f64) -> Result<Self, SolverError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(SolverError::InvalidConfig(format!("delta must lie in (0, 1], got {delta}")));
        }
        assert!(eta.grid().same_as(phi.grid()));
        Ok(Self { eta, phi, delta })
    }

    pub fn rest(grid: &Arc<PeriodicGrid>, delta: f64) -> Self {
        Self { eta: RealField::zeros(grid), phi: RealField::zeros(grid), delta }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        self.eta.grid()
    }

    pub fn max_norm(&self) -> f64 {
        self.eta.max_abs().max(self.phi.max_abs())
    }
}

/// Stateful right-hand side: keeps the previous strip correction as a warm
/// start for the next exact solve.
#[derive(Debug, Clone)]
pub struct ZcsOperator {
    backend: DtnBackend,
    strip: Option<StripSolver>,
    warm: Option<Vec<f64>>,
}

impl ZcsOperator {
    pub fn new(backend: DtnBackend) -> Result<Self, SolverError> {
        backend.validate()?;
        let strip = match backend {
            DtnBackend::Exact { n_z } => Some(StripSolver::new(n_z)?),
            DtnBackend::Series { .. } => None,
        };
        Ok(Self { backend, strip, warm: None })
    }

    pub fn backend(&self) -> DtnBackend {
        self.backend
    }

    pub fn dtn(&mut self, eta: &RealField, phi: &RealField, delta: f64) -> Result<RealField, SolverError> {
        match (&self.strip, self.backend) {
            (Some(strip), _) => {
                let out = strip.solve(eta, phi, delta, self.warm.as_deref())?;
                let n_x = out.sigma.n_x;
                let d2 = delta * delta;
                // recover χ on levels 1..=n_z from Φ̃ = φ + δ²χ
                let chi: Vec<f64> = (n_x..out.sigma.values.len())
                    .map(|k| (out.sigma.values[k] - phi.values()[k % n_x]) / d2)
                    .collect();
                self.warm = Some(chi);
                Ok(out.lambda)
            }
            (None, DtnBackend::Series { order }) => dtn_series(eta, phi, delta, order),
            (None, DtnBackend::Exact { .. }) => unreachable!("exact backend always carries a strip solver"),
        }
    }

    /// `(∂ₜη, ∂ₜφ)` of the water-wave equations.
    pub fn rhs(&mut self, s: &WwState) -> Result<(RealField, RealField), SolverError> {
        let lam = self.dtn(&s.eta, &s.phi, s.delta)?;
        let phi_t = bernoulli_rhs(&s.eta, &s.phi, &lam, s.delta);
        Ok((lam, phi_t))
    }
}

/// `-η - ½|∇φ|² + δ²(Λφ + ∇η·∇φ)² / (2(1 + δ²|∇η|²))`
pub fn bernoulli_rhs(eta: &RealField, phi: &RealField, lam: &RealField, delta: f64) -> RealField {
    let d2 = delta * delta;
    let ex = eta.dx();
    let px = phi.dx();
    let q = lam.axpy(1.0, &ex.dealiased_product(&px));
    let num = q.dealiased_product(&q);
    let den = ex.dealiased_product(&ex);
    let ratio = num.zip_map(&den, |n, e| n / (2.0 * (1.0 + d2 * e))).truncated();
    (-eta).axpy(-0.5, &px.dealiased_product(&px)).axpy(d2, &ratio)
}

/// One-shot form of [`ZcsOperator::rhs`].
pub fn zcs_rhs(s: &WwState, backend: &DtnBackend) -> Result<(RealField, RealField), SolverError> {
    ZcsOperator::new(*backend)?.rhs(s)
}

/// `½∫(φΛφ + η²)`
pub fn hamiltonian(s: &WwState, lam: &RealField) -> f64 {
    0.5 * (s.phi.inner(lam) + s.eta.inner(&s.eta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WwSample {
    pub time: f64,
    pub mass: f64,
    pub hamiltonian: f64,
    pub min_h: f64,
}

#[derive(Debug, Clone)]
pub struct WwRun {
    pub state: WwState,
    pub time: f64,
    pub steps_taken: usize,
    pub samples: Vec<WwSample>,
    pub trajectory: Vec<(f64, WwState)>,
    pub failure: Option<SolverError>,
}

impl WwRun {
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.samples.first().map_or(0.0, |s| s.mass);
        self.samples.iter().fold(0.0, |acc, s| acc.max((s.mass - m0).abs()))
    }

    pub fn max_hamiltonian_drift(&self) -> f64 {
        let e0 = self.samples.first().map_or(0.0, |s| s.hamiltonian);
        let d = self.samples.iter().fold(0.0_f64, |acc, s| acc.max((s.hamiltonian - e0).abs()));
        if e0 != 0.0 {
            d / e0.abs()
        } else {
            d
        }
    }

    pub fn min_h(&self) -> f64 {
        self.samples.iter().fold(f64::INFINITY, |acc, s| acc.min(s.min_h))
    }
}

/// RK4 step of the water-wave equations.
pub fn ww_step(op: &mut ZcsOperator, s: &WwState, dt: f64) -> Result<WwState, SolverError> {
    let shifted = |k: &(RealField, RealField), h: f64| WwState {
        eta: s.eta.axpy(h, &k.0),
        phi: s.phi.axpy(h, &k.1),
        delta: s.delta,
    };
    let k1 = op.rhs(s)?;
    let k2 = op.rhs(&shifted(&k1, 0.5 * dt))?;
    let k3 = op.rhs(&shifted(&k2, 0.5 * dt))?;
    let k4 = op.rhs(&shifted(&k3, dt))?;
    let combine = |base: &RealField, a: &RealField, b: &RealField, c: &RealField, d: &RealField| {
        let vals = (0..base.len())
            .map(|i| {
                base.values()[i]
                    + dt / 6.0 * (a.values()[i] + 2.0 * b.values()[i] + 2.0 * c.values()[i] + d.values()[i])
            })
            .collect();
        RealField::from_values(base.grid(), vals)
    };
    Ok(WwState {
        eta: combine(&s.eta, &k1.0, &k2.0, &k3.0, &k4.0),
        phi: combine(&s.phi, &k1.1, &k2.1, &k3.1, &k4.1),
        delta: s.delta,
    })
}

/// Steps the water-wave equations to `cfg.t_end` with the same schedule and
/// CFL policy as the model solver. `reproject_every` and the CG settings in
/// `cfg` are ignored.
pub fn ww_run(initial: &WwState, cfg: &SimConfig, backend: &DtnBackend) -> Result<WwRun, SolverError> {
    cfg.validate(initial.grid().spacing())?;
    let mut op = ZcsOperator::new(*backend)?;
    let (steps, dt) = cfg.schedule();
    let mut out = WwRun {
        state: initial.clone(),
        time: 0.0,
        steps_taken: 0,
        samples: Vec::new(),
        trajectory: Vec::new(),
        failure: None,
    };
    let record = |out: &mut WwRun, op: &mut ZcsOperator| -> Result<(), SolverError> {
        let s = &out.state;
        let lam = op.dtn(&s.eta, &s.phi, s.delta)?;
        out.samples.push(WwSample {
            time: out.time,
            mass: s.eta.integrate(),
            hamiltonian: hamiltonian(s, &lam),
            min_h: 1.0 + s.eta.min(),
        });
        if cfg.keep_trajectory {
            out.trajectory.push((out.time, s.clone()));
        }
        Ok(())
    };
    if let Err(e) = record(&mut out, &mut op) {
        out.failure = Some(e);
        return Ok(out);
    }
    for step in 1..=steps {
        let next = ww_step(&mut op, &out.state, dt).and_then(|next| {
            let m = next.max_norm();
            if !m.is_finite() || m > BLOWUP_THRESHOLD {
                Err(SolverError::BlowUp { max_norm: m, time: step as f64 * dt })
            } else {
                Ok(next)
            }
        });
        match next {
            Ok(next) => {
                out.state = next;
                out.time = step as f64 * dt;
                out.steps_taken = step;
            }
            Err(e) => {
                out.failure = Some(e);
                return Ok(out);
            }
        }
        if cfg.should_record(step, steps) {
            if let Err(e) = record(&mut out, &mut op) {
                out.failure = Some(e);
                return Ok(out);
            }
        }
    }
    Ok(out)
}

/// Flat-bottom, flat-surface symbol `k tanh(δk)/δ`.
pub fn flat_dtn_symbol(delta: f64, k: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * (delta * k).tanh() / delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{seeded_rng, smooth_field};

    fn grid(n: usize) -> Arc<PeriodicGrid> {
        PeriodicGrid::standard(n).unwrap()
    }

    #[test]
    fn chebyshev_pieces_are_exact_on_polynomials() {
        let s = ChebyshevStrip::new(12);
        // ∫_{-1}^0 z^4 dz = 1/5
        let q: f64 = s.nodes().iter().zip(s.weights()).map(|(z, w)| w * z.powi(4)).sum();
        assert!((q - 0.2).abs() < 1e-14);
        let f: Vec<f64> = s.nodes().iter().map(|z| z.powi(3)).collect();
        for (i, z) in s.nodes().iter().enumerate() {
            let df: f64 = (0..=12).map(|m| s.d1[(i, m)] * f[m]).sum();
            assert!((df - 3.0 * z * z).abs() < 1e-11);
        }
    }

    #[test]
    fn flat_symbols_of_the_expansion() {
        let g = grid(32);
        let z = RealField::zeros(&g);
        for k in [1.0, 2.0, 3.0] {
            let psi = RealField::from_fn(&g, |x| (k * x).cos());
            assert!((&lambda0(&z, &psi) - &psi.scale(k * k)).max_abs() < 1e-10);
            assert!((&lambda1(&z, &psi) - &psi.scale(-k.powi(4) / 3.0)).max_abs() < 1e-9);
            assert!((&lambda2(&z, &psi) - &psi.scale(2.0 * k.powi(6) / 15.0)).max_abs() < 1e-8);
        }
        let c = RealField::from_fn(&g, f64::cos);
        let s = dtn_series(&z, &c, 0.3, 2).unwrap();
        assert!((&s - &c.scale(0.97108)).max_abs() < 1e-12);
        assert!(dtn_series(&z, &c, 0.3, 3).is_err());
        let e = RealField::from_fn(&g, |x| 0.1 * x.sin());
        assert_eq!(dtn_series(&e, &c, 0.3, 0).unwrap().values(), lambda0(&e, &c).values());
    }

    #[test]
    fn exact_flat_dtn_matches_tanh_symbol() {
        let g = grid(32);
        let z = RealField::zeros(&g);
        let c = RealField::from_fn(&g, f64::cos);
        let lam = dtn_exact(&z, &c, 0.5, 16).unwrap();
        assert!((&lam - &c.scale(0.924_234_314_5)).max_abs() < 1e-9);
        assert!((flat_dtn_symbol(0.5, 1.0) - 0.924_234_314_5).abs() < 1e-10);
        let one = RealField::constant(&g, 1.0);
        assert!(dtn_exact(&z, &one, 0.5, 16).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn exact_dtn_matches_harmonic_oracle_on_curved_surface() {
        // Φ = cos(kx) cosh(kδ(z+1)) solves δ²Φ_xx + Φ_zz = 0 with Φ_z(-1) = 0.
        let g = grid(64);
        let (k, delta) = (1.0, 0.3);
        let eta = RealField::from_fn(&g, |x| 0.1 * (x + 0.3).cos() + 0.05 * (2.0 * x).sin());
        let h = eta.map(|e| 1.0 + e);
        let phi = RealField::from_values(
            &g,
            g.points().zip(h.values()).map(|(x, &hh)| (k * x).cos() * (k * delta * hh).cosh()).collect(),
        );
        let ex = eta.dx();
        let expect: Vec<f64> = g
            .points()
            .zip(h.values().iter().zip(ex.values()))
            .map(|(x, (&hh, &e))| {
                k / delta * (k * x).cos() * (k * delta * hh).sinh() + e * k * (k * x).sin() * (k * delta * hh).cosh()
            })
            .collect();
        let lam = dtn_exact(&eta, &phi, delta, 16).unwrap();
        let err = (&lam - &RealField::from_values(&g, expect)).max_abs();
        assert!(err < 1e-9, "error {err}");
    }

    #[test]
    fn sigma_solution_satisfies_boundary_conditions() {
        let g = grid(32);
        let mut rng = seeded_rng(21);
        let eta = smooth_field(&g, &mut rng, 4, 0.1);
        let phi = smooth_field(&g, &mut rng, 4, 1.0);
        let solver = StripSolver::new(16).unwrap();
        let out = solver.solve(&eta, &phi, 0.4, None).unwrap();
        let surf = out.sigma.surface();
        assert!(surf.iter().zip(phi.values()).all(|(a, b)| (a - b).abs() < 1e-9));
        let bottom = out.sigma.bottom_normal_derivative(solver.strip());
        assert!(bottom.iter().all(|v| v.abs() < 1e-9));
        assert!(out.lambda.integrate().abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let g = grid(16);
        let eta = RealField::from_fn(&g, |x| 0.95 * x.cos());
        let phi = RealField::from_fn(&g, f64::cos);
        assert!(matches!(dtn_exact(&eta, &phi, 0.3, 16), Err(SolverError::DepthTooSmall { .. })));
        assert!(dtn_exact(&RealField::zeros(&g), &phi, 0.3, 4).is_err());
    }

    #[test]
    fn zcs_rhs_of_rest_and_small_wave() {
        let g = grid(32);
        let backend = DtnBackend::Exact { n_z: 16 };
        let (a, b) = zcs_rhs(&WwState::rest(&g, 0.3), &backend).unwrap();
        assert_eq!(a.max_abs() + b.max_abs(), 0.0);

        let (eps, delta, k) = (1e-6, 0.3, 2.0);
        let phi = RealField::from_fn(&g, |x| eps * (k * x).cos());
        let s = WwState::new(RealField::zeros(&g), phi.clone(), delta).unwrap();
        let (eta_t, phi_t) = zcs_rhs(&s, &backend).unwrap();
        assert!((&eta_t - &phi.scale(flat_dtn_symbol(delta, k))).max_abs() < 1e-9 * eps);
        assert!(phi_t.max_abs() < 10.0 * eps * eps);
    }
}
