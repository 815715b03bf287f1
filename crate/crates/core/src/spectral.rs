//! Periodic 1-D pseudo-spectral toolkit.
//!
//! Fields live in physical space on a uniform grid over `[0, L)`; transforms
//! are taken on demand through FFT plans owned by the grid.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::GridError;

/// Uniform periodic grid with cached FFT plans.
pub struct PeriodicGrid {
    n_points: usize,
    length: f64,
    spacing: f64,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n_points", &self.n_points)
            .field("length", &self.length)
            .finish()
    }
}

impl PeriodicGrid {
    /// Smallest grid accepted.
    pub const MIN_POINTS: usize = 8;

    pub fn new(n_points: usize, length: f64) -> Result<Arc<Self>, GridError> {
        if n_points < Self::MIN_POINTS || !n_points.is_multiple_of(2) {
            return Err(GridError::BadPointCount(n_points));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::BadLength(length));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        let base = 2.0 * std::f64::consts::PI / length;
        let wavenumbers = (0..n_points)
            .map(|j| base * signed_index(j, n_points) as f64)
            .collect();
        Ok(Arc::new(Self {
            n_points,
            length,
            spacing: length / n_points as f64,
            wavenumbers,
            forward,
            inverse,
        }))
    }

    /// The usual `[0, 2π)` grid.
    pub fn standard(n_points: usize) -> Result<Arc<Self>, GridError> {
        Self::new(n_points, 2.0 * std::f64::consts::PI)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Angular wavenumbers in FFT order (`0, 1, .., N/2, -N/2+1, .., -1` times `2π/L`).
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index of the Nyquist mode.
    pub fn nyquist(&self) -> usize {
        self.n_points / 2
    }

    /// Largest `|j|` kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n_points / 3
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| i as f64 * self.spacing)
    }

    /// Unnormalized forward DFT of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n_points);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT, normalized, keeping the real part.
    pub fn inverse(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.n_points);
        self.inverse.process(&mut coeffs);
        let scale = 1.0 / self.n_points as f64;
        coeffs.into_iter().map(|c| c.re * scale).collect()
    }

    /// In-place complex transforms for callers that batch their own buffers.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n_points as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    pub fn same_as(&self, other: &PeriodicGrid) -> bool {
        std::ptr::eq(self, other) || (self.n_points == other.n_points && self.length == other.length)
    }
}

/// FFT index `j` mapped to the symmetric range `(-N/2, N/2]`.
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Real grid function on a [`PeriodicGrid`].
#[derive(Clone)]
pub struct RealField {
    grid: Arc<PeriodicGrid>,
    values: Vec<f64>,
}

impl fmt::Debug for RealField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealField")
            .field("n_points", &self.values.len())
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl RealField {
    pub fn from_values(grid: &Arc<PeriodicGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_points(), "field length does not match grid");
        Self { grid: Arc::clone(grid), values }
    }

    pub fn zeros(grid: &Arc<PeriodicGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<PeriodicGrid>, value: f64) -> Self {
        Self::from_values(grid, vec![value; grid.n_points()])
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(grid: &Arc<PeriodicGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(grid, grid.points().map(f).collect())
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_grid(&self, other: &RealField) {
        assert!(self.grid.same_as(&other.grid), "fields live on different grids");
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Self {
        self.check_grid(other);
        Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Plain pointwise product (no dealiasing). Used inside linear operators.
    pub fn pointwise(&self, other: &RealField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &RealField) -> Self {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        self.grid.forward(&self.values)
    }

    pub fn from_spectrum(grid: &Arc<PeriodicGrid>, coeffs: Vec<Complex64>) -> Self {
        Self::from_values(grid, grid.inverse(coeffs))
    }

    /// Spectral derivative of the given order. The Nyquist mode is dropped
    /// for every order so that repeated first derivatives agree with a
    /// single higher-order call.
    pub fn deriv(&self, order: u32) -> Result<Self, GridError> {
        if order == 0 {
            return Err(GridError::ZeroDerivativeOrder);
        }
        let mut spec = self.spectrum();
        let ny = self.grid.nyquist();
        let i_pow = Complex64::i().powu(order);
        for (j, (c, &k)) in spec.iter_mut().zip(self.grid.wavenumbers()).enumerate() {
            if j == ny {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= i_pow * k.powi(order as i32);
            }
        }
        Ok(Self::from_spectrum(&self.grid, spec))
    }

    /// First derivative.
    pub fn dx(&self) -> Self {
        self.deriv(1).expect("order 1 is valid")
    }

    /// Second derivative (1-D Laplacian).
    pub fn dxx(&self) -> Self {
        self.deriv(2).expect("order 2 is valid")
    }

    /// Product with the 2/3-rule truncation applied to the result.
    pub fn dealiased_product(&self, other: &RealField) -> Self {
        self.check_grid(other);
        let raw = self.pointwise(other);
        raw.truncated()
    }

    /// Zeroes every mode with `|j| > N/3`.
    pub fn truncated(&self) -> Self {
        let mut spec = self.spectrum();
        let n = self.grid.n_points();
        let cut = self.grid.dealias_cutoff() as i64;
        for (j, c) in spec.iter_mut().enumerate() {
            if signed_index(j, n).abs() > cut {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Self::from_spectrum(&self.grid, spec)
    }

    pub fn integrate(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn inner(&self, other: &RealField) -> f64 {
        self.check_grid(other);
        self.grid.spacing() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Sobolev norm with symbol `(1 + k²)^{s/2}`.
    pub fn hs_norm(&self, s: f64) -> f64 {
        assert!(s >= 0.0, "Sobolev index must be nonnegative");
        let n = self.grid.n_points() as f64;
        let total: f64 = self
            .spectrum()
            .iter()
            .zip(self.grid.wavenumbers())
            .map(|(c, &k)| (1.0 + k * k).powf(s) * c.norm_sqr())
            .sum();
        (self.grid.length() * total / (n * n)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Add for &RealField {
    type Output = RealField;
    fn add(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &RealField {
    type Output = RealField;
    fn sub(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Neg for &RealField {
    type Output = RealField;
    fn neg(self) -> RealField {
        self.map(|v| -v)
    }
}

impl Mul<&RealField> for f64 {
    type Output = RealField;
    fn mul(self, rhs: &RealField) -> RealField {
        rhs.scale(self)
    }
}

/// Fourier multiplier given by its symbol on the grid wavenumbers.
#[derive(Debug, Clone)]
pub struct Multiplier {
    grid: Arc<PeriodicGrid>,
    symbol: Vec<f64>,
}

impl Multiplier {
    /// Builds the multiplier from a function of the (signed) wavenumber.
    pub fn from_symbol(grid: &Arc<PeriodicGrid>, symbol: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            symbol: grid.wavenumbers().iter().map(|&k| symbol(k)).collect(),
        }
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn apply(&self, f: &RealField) -> RealField {
        assert!(self.grid.same_as(f.grid()), "multiplier and field live on different grids");
        let mut spec = f.spectrum();
        for (c, &m) in spec.iter_mut().zip(&self.symbol) {
            *c *= m;
        }
        RealField::from_spectrum(&self.grid, spec)
    }
}

/// Free-function form of [`Multiplier::apply`].
pub fn apply_multiplier(m: &Multiplier, f: &RealField) -> RealField {
    m.apply(f)
}
