//! Closed-form Gaussian model of a weakly pumped amplifier: Gaussian
//! biphoton kernel, its singular values and Hermite characteristic modes,
//! and the expansion of a Gaussian local oscillator in those modes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{GreenPair, GreenSource, Picture};
use crate::grid::FrequencyGrid;
use crate::spectral::{hermite_mode, KernelMatrix, SpectralAmplitude};

/// Mean photon numbers at or above this value are outside the perturbative
/// validity domain of the model.
pub const PERTURBATIVE_LIMIT: f64 = 0.1;

/// Default number of even overlap coefficients kept by [`analytic_overlaps`].
pub const DEFAULT_OVERLAP_TERMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianModelParams {
    /// Pump central frequency (rad/fs).
    pub omega_p: f64,
    /// Pump bandwidth, i.e. width of the frequency anticorrelation (rad/fs).
    pub delta: f64,
    /// Phase-matching bandwidth (rad/fs).
    pub big_delta: f64,
    /// Mean total photon number.
    pub photon_number: f64,
}

impl GaussianModelParams {
    pub fn new(omega_p: f64, delta: f64, big_delta: f64, photon_number: f64) -> Result<Self> {
        if !(omega_p > 0.0 && omega_p.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega_p must be positive, got {omega_p}")));
        }
        if !(delta > 0.0 && big_delta.is_finite() && delta <= big_delta) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < delta <= Delta, got delta = {delta}, Delta = {big_delta}"
            )));
        }
        if !(photon_number > 0.0 && photon_number.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "photon number must be positive, got {photon_number}"
            )));
        }
        let p = Self { omega_p, delta, big_delta, photon_number };
        if let Some(w) = p.validity_warning() {
            log::warn!("{w}");
        }
        Ok(p)
    }

    /// Parameters with correlation parameter `r = ln sqrt(Delta / delta)` and
    /// mode width `tau_s` (fs).
    pub fn from_r(omega_p: f64, r: f64, tau_s: f64, photon_number: f64) -> Result<Self> {
        if !(r >= 0.0 && tau_s > 0.0) {
            return Err(Error::InvalidParameter(format!("need r >= 0 and tau_s > 0, got r = {r}, tau_s = {tau_s}")));
        }
        let geo = std::f64::consts::SQRT_2 / tau_s;
        Self::new(omega_p, geo * (-r).exp(), geo * r.exp(), photon_number)
    }

    pub fn r(&self) -> f64 {
        0.5 * (self.big_delta / self.delta).ln()
    }

    /// Width parameter of the Hermite characteristic modes, `sqrt(2 / (delta Delta))`.
    pub fn tau_s(&self) -> f64 {
        (2.0 / (self.delta * self.big_delta)).sqrt()
    }

    /// `r' = ln(delta_lo / sqrt(delta Delta))`.
    pub fn r_prime(&self, delta_lo: f64) -> f64 {
        (delta_lo / (self.delta * self.big_delta).sqrt()).ln()
    }

    pub fn delta_lo_for(&self, r_prime: f64) -> f64 {
        (self.delta * self.big_delta).sqrt() * r_prime.exp()
    }

    pub fn validity_warning(&self) -> Option<String> {
        (self.photon_number >= PERTURBATIVE_LIMIT).then(|| {
            format!(
                "photon number {} is outside the perturbative domain (< {PERTURBATIVE_LIMIT})",
                self.photon_number
            )
        })
    }

    fn check_grid(&self, grid: &FrequencyGrid) -> Result<()> {
        let half = self.omega_p / 2.0;
        if (grid.center() - half).abs() > grid.step() {
            return Err(Error::GridMismatch(format!(
                "grid center {} is not within one step of omega_p / 2 = {half}",
                grid.center()
            )));
        }
        Ok(())
    }

    /// Detunings from `omega_p / 2`; equal to the grid offsets when the grid is
    /// centered exactly.
    fn detunings(&self, grid: &FrequencyGrid) -> Vec<f64> {
        let shift = grid.center() - self.omega_p / 2.0;
        grid.offsets().map(|x| x + shift).collect()
    }
}

/// Identity `C` and Gaussian `S` kernels of the model.
pub fn gaussian_kernels(p: &GaussianModelParams, grid: &FrequencyGrid) -> Result<GreenPair> {
    p.check_grid(grid)?;
    let x = p.detunings(grid);
    let amp = (2.0 * p.photon_number / (std::f64::consts::PI * p.delta * p.big_delta)).sqrt();
    let (d2, bd2) = (2.0 * p.delta * p.delta, 2.0 * p.big_delta * p.big_delta);
    let n = grid.len();
    let entries = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let sum = x[i] + x[j];
        let diff = x[i] - x[j];
        Complex64::new(amp * (-sum * sum / d2 - diff * diff / bd2).exp(), 0.0)
    });
    GreenPair::new(
        KernelMatrix::identity(*grid),
        KernelMatrix::new(*grid, entries)?,
        Picture::MidpointCompensated,
        GreenSource::Gaussian(*p),
    )
}

/// `sinh zeta_n = sqrt(N) tanh^n(r) / cosh(r)`.
pub fn gaussian_sinh_zeta(p: &GaussianModelParams, n: usize) -> f64 {
    let r = p.r();
    p.photon_number.sqrt() * r.tanh().powi(n as i32) / r.cosh()
}

/// Squeezing parameter of characteristic mode `n`, the exact inverse
/// hyperbolic sine of the model's singular value.
pub fn gaussian_zeta(p: &GaussianModelParams, n: usize) -> f64 {
    gaussian_sinh_zeta(p, n).asinh()
}

/// Characteristic mode `n`: the Hermite function of width `tau_s`.
pub fn gaussian_mode(p: &GaussianModelParams, n: usize, grid: &FrequencyGrid) -> Result<SpectralAmplitude> {
    p.check_grid(grid)?;
    hermite_mode(n, p.tau_s(), grid)
}

/// Gaussian local oscillator of bandwidth `delta_lo`, normalized on the grid.
pub fn lo_profile(p: &GaussianModelParams, delta_lo: f64, grid: &FrequencyGrid) -> Result<SpectralAmplitude> {
    if !(delta_lo > 0.0 && delta_lo.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta_LO must be positive, got {delta_lo}")));
    }
    p.check_grid(grid)?;
    let amp = (2.0 / (delta_lo * std::f64::consts::PI.sqrt())).sqrt();
    let values = p
        .detunings(grid)
        .into_iter()
        .map(|x| Complex64::new(amp * (-(x * x) / (delta_lo * delta_lo)).exp(), 0.0))
        .collect();
    SpectralAmplitude::new(*grid, values)?.normalized()
}

/// Expansion coefficients of a Gaussian local oscillator in the
/// characteristic modes.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapSeries {
    pub r_prime: f64,
    /// `M_0, M_1, ..., M_{2 m_max}`; odd entries are zero.
    pub coefficients: Vec<f64>,
    /// `1 - sum M_n^2`, the weight beyond the truncation.
    pub truncation_defect: f64,
}

/// `M_{2m} = sqrt((2m)!) / (2^m m!) tanh^m(r') / sqrt(cosh r')`, `M_{2m+1} = 0`.
///
/// The factorial ratio is built by the recurrence
/// `M_{2m} = M_{2m-2} tanh(r') sqrt((2m - 1) / (2m))`, which never forms a
/// factorial and stays finite for any `m`.
pub fn analytic_overlaps(p: &GaussianModelParams, delta_lo: f64, m_max: usize) -> OverlapSeries {
    let r_prime = p.r_prime(delta_lo);
    let t = r_prime.tanh();
    let mut coefficients = Vec::with_capacity(2 * m_max + 1);
    let mut even = 1.0 / r_prime.cosh().sqrt();
    coefficients.push(even);
    for m in 1..=m_max {
        let mf = m as f64;
        even *= t * ((2.0 * mf - 1.0) / (2.0 * mf)).sqrt();
        coefficients.push(0.0);
        coefficients.push(even);
    }
    let weight: f64 = coefficients.iter().map(|c| c * c).sum();
    OverlapSeries {
        r_prime,
        coefficients,
        truncation_defect: 1.0 - weight,
    }
}
