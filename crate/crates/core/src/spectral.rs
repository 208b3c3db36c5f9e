//! Sampled spectral functions and integral kernels on a [`FrequencyGrid`].
//!
//! Quadrature convention: every integral over frequency is a plain Riemann sum
//! with weight `grid.step()`. Kernel entries hold the continuum values
//! `K(omega_i, omega_j)`; the weight is applied when a kernel acts on a
//! function, never stored in the entries.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Complex function of frequency sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitude {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl SpectralAmplitude {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite spectral sample".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(omega_i)`.
    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.omegas().map(f).collect();
        Self { grid, values }
    }

    pub(crate) fn from_parts(grid: FrequencyGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.step()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize a zero function".into()));
        }
        self.values.iter_mut().for_each(|v| *v /= norm);
        Ok(self)
    }

    /// Spectral intensity `|f(omega)|^2` at every grid point.
    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Largest `|f(omega_i) - sign * f(omega_mirror(i))|`; `sign = 1` measures
    /// departure from even parity, `sign = -1` from odd parity.
    pub fn parity_defect(&self, sign: f64) -> f64 {
        (0..self.values.len())
            .map(|i| (self.values[i] - self.values[self.grid.mirror(i)] * sign).norm())
            .fold(0.0, f64::max)
    }

    /// Number of sign changes of the real part, ignoring samples below
    /// `floor` times the peak magnitude.
    pub fn sign_changes(&self, floor: f64) -> usize {
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut last = 0.0f64;
        let mut changes = 0;
        for v in &self.values {
            if v.re.abs() <= floor * peak {
                continue;
            }
            if last != 0.0 && v.re.signum() != last {
                changes += 1;
            }
            last = v.re.signum();
        }
        changes
    }
}

/// `<f, g> = sum_i conj(f_i) g_i * step`.
pub fn inner_product(f: &SpectralAmplitude, g: &SpectralAmplitude) -> Result<Complex64> {
    f.grid.ensure_same(&g.grid, "inner product")?;
    let sum: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(sum * f.grid.step())
}

/// Normalized Hermite function `h_n(x)` for all orders `0..=n_max` at one point,
/// by the stable three-term recurrence.
pub(crate) fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(h0);
    if n_max >= 1 {
        out.push(std::f64::consts::SQRT_2 * x * h0);
    }
    for k in 2..=n_max {
        let kf = k as f64;
        let next = (2.0 / kf).sqrt() * x * out[k - 1] - ((kf - 1.0) / kf).sqrt() * out[k - 2];
        out.push(next);
    }
    out
}

/// Full-span width a grid should have to hold Hermite mode `n` of width
/// `tau_s`: six rms widths `sqrt(n + 1/2) / tau_s`.
pub fn hermite_span_requirement(n: usize, tau_s: f64) -> f64 {
    6.0 * (n as f64 + 0.5).sqrt() / tau_s
}

/// Default span for a grid that must resolve Hermite modes up to `n_max`.
pub fn mode_basis_span(tau_s: f64, n_max: usize) -> f64 {
    let turning = (2.0 * n_max as f64 + 1.0).sqrt();
    (2.0 * (turning + 6.0)).max(8.0) / tau_s
}

/// Hermite function of order `n` with spectral width set by `tau_s` (fs),
/// centered on the grid center:
/// `sqrt(tau_s) h_n(tau_s (omega - center))`, renormalized on the grid.
///
/// Sign convention: positive as `omega` goes to `+inf` (physicists' Hermite
/// polynomials with positive leading coefficient).
pub fn hermite_mode(n: usize, tau_s: f64, grid: &FrequencyGrid) -> Result<SpectralAmplitude> {
    if !(tau_s > 0.0) || !tau_s.is_finite() {
        return Err(Error::InvalidParameter(format!("tau_s must be positive, got {tau_s}")));
    }
    let needed = hermite_span_requirement(n, tau_s);
    if grid.span() < needed {
        log::warn!(
            "grid span {:.4} rad/fs is narrower than {:.4} rad/fs needed for Hermite mode {n}",
            grid.span(),
            needed
        );
    }
    let values = grid
        .offsets()
        .map(|x| Complex64::new(tau_s.sqrt() * hermite_functions(n, tau_s * x)[n], 0.0))
        .collect();
    SpectralAmplitude::from_parts(*grid, values).normalized()
}

/// Square integral kernel `K(omega, omega')` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    grid: FrequencyGrid,
    entries: DMatrix<Complex64>,
}

impl KernelMatrix {
    pub fn new(grid: FrequencyGrid, entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != grid.len() || entries.ncols() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{}x{} kernel on a {}-point grid",
                entries.nrows(),
                entries.ncols(),
                grid.len()
            )));
        }
        Ok(Self { grid, entries })
    }

    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let entries = DMatrix::from_fn(grid.len(), grid.len(), |i, j| f(grid.omega(i), grid.omega(j)));
        Self { grid, entries }
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            entries: DMatrix::zeros(grid.len(), grid.len()),
        }
    }

    /// Discrete delta kernel `delta_ij / step`, whose action is the identity.
    pub fn identity(grid: FrequencyGrid) -> Self {
        let d = Complex64::new(1.0 / grid.step(), 0.0);
        let mut entries = DMatrix::zeros(grid.len(), grid.len());
        entries.fill_diagonal(d);
        Self { grid, entries }
    }

    /// Builds a kernel from its dimensionless quadrature-weighted matrix
    /// (`entries * step`).
    pub fn from_weighted(grid: FrequencyGrid, weighted: DMatrix<Complex64>) -> Result<Self> {
        let inv = 1.0 / grid.step();
        Self::new(grid, weighted * Complex64::new(inv, 0.0))
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    /// `entries * step`: the matrix of the discretized operator.
    pub fn weighted(&self) -> DMatrix<Complex64> {
        &self.entries * Complex64::new(self.grid.step(), 0.0)
    }

    /// `(K f)_i = sum_j K_ij f_j * step`.
    pub fn apply(&self, f: &SpectralAmplitude) -> Result<SpectralAmplitude> {
        self.grid.ensure_same(f.grid(), "kernel action")?;
        let h = self.grid.step();
        let values = (0..self.grid.len())
            .map(|i| {
                self.entries
                    .row(i)
                    .iter()
                    .zip(f.values())
                    .map(|(k, v)| k * v)
                    .sum::<Complex64>()
                    * h
            })
            .collect();
        Ok(SpectralAmplitude::from_parts(self.grid, values))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |K_ij - K_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in (j + 1)..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).norm());
            }
        }
        worst
    }

    /// `sum_ij |K_ij|^2 * step^2`.
    pub fn double_integral_sqr(&self) -> f64 {
        let h = self.grid.step();
        self.entries.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn basis_grid(tau_s: f64) -> FrequencyGrid {
        make_grid(2.35, mode_basis_span(tau_s, 10), 256).unwrap()
    }

    #[test]
    fn normalized_mode_has_unit_self_overlap() {
        let g = basis_grid(5.0);
        let f = hermite_mode(3, 5.0, &g).unwrap();
        assert!((inner_product(&f, &f).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_orthonormal_up_to_ten() {
        let tau = 12.0;
        let g = basis_grid(tau);
        let modes: Vec<_> = (0..=10).map(|n| hermite_mode(n, tau, &g).unwrap()).collect();
        for (m, a) in modes.iter().enumerate() {
            for (n, b) in modes.iter().enumerate() {
                let expect = if m == n { 1.0 } else { 0.0 };
                let got = inner_product(a, b).unwrap();
                assert!((got - expect).norm() < 1e-8, "<{m},{n}> = {got}");
            }
        }
        assert!(inner_product(&modes[0], &modes[1]).unwrap().norm() < 1e-10);
    }

    #[test]
    fn hermite_parity_is_exact() {
        let g = basis_grid(3.0);
        for n in 0..=10 {
            let f = hermite_mode(n, 3.0, &g).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(f.parity_defect(sign), 0.0, "mode {n}");
        }
    }

    #[test]
    fn ground_mode_is_gaussian_with_one_over_tau_width() {
        let tau = 4.0;
        let g = make_grid(1.0, 4.0, 257).unwrap();
        let f = hermite_mode(0, tau, &g).unwrap();
        assert_eq!(f.sign_changes(0.0), 0);
        let peak = f.values()[128].re;
        // intensity falls to 1/e at a detuning of 1/tau (16 steps of 1/64)
        let idx = 128 + (1.0 / tau / g.step()).round() as usize;
        assert!((g.offset(idx) - 1.0 / tau).abs() < 1e-12);
        assert!((f.values()[idx].re / peak - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn odd_mode_vanishes_at_center() {
        let g = make_grid(1.0, 4.0, 257).unwrap();
        let f = hermite_mode(1, 4.0, &g).unwrap();
        assert_eq!(f.values()[128].re, 0.0);
        assert!(f.values()[200].re > 0.0);
    }

    #[test]
    fn fourth_mode_has_four_nodes() {
        // H_4(x) = 16x^4 - 48x^2 + 12 has four real roots
        let g = basis_grid(2.0);
        let f = hermite_mode(4, 2.0, &g).unwrap();
        assert_eq!(f.sign_changes(1e-9), 4);
        assert!((f.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_kernel_acts_as_identity() {
        let g = basis_grid(2.0);
        let f = hermite_mode(2, 2.0, &g).unwrap();
        let out = KernelMatrix::identity(g).apply(&f).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = hermite_mode(0, 2.0, &make_grid(1.0, 8.0, 64).unwrap()).unwrap();
        let b = hermite_mode(0, 2.0, &make_grid(1.0, 8.0, 65).unwrap()).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #[test]
        fn inner_product_conjugate_symmetric(
            re in proptest::collection::vec(-1.0f64..1.0, 32),
            im in proptest::collection::vec(-1.0f64..1.0, 32),
            shift in 0usize..32,
        ) {
            let g = make_grid(0.0, 3.0, 32).unwrap();
            let f: Vec<_> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
            let mut h = f.clone();
            h.rotate_left(shift);
            h.iter_mut().for_each(|v| *v = v.conj() * Complex64::new(0.3, -1.2));
            let f = SpectralAmplitude::new(g, f).unwrap();
            let h = SpectralAmplitude::new(g, h).unwrap();
            let fg = inner_product(&f, &h).unwrap();
            let gf = inner_product(&h, &f).unwrap();
            prop_assert!((fg - gf.conj()).norm() < 1e-12);
        }
    }
}
