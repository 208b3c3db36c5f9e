//! Quadrature noise seen by a homodyne detector with a given local
//! oscillator, and the quantum efficiency that explains its departure from
//! minimum uncertainty.

use num_complex::Complex64;

use crate::bloch_messiah::SqueezerDecomposition;
use crate::error::{Error, Result};
use crate::gaussian::{analytic_overlaps, gaussian_sinh_zeta, GaussianModelParams};
use crate::spectral::{inner_product, SpectralAmplitude};

/// Vacuum quadrature variance.
pub const VACUUM: f64 = 0.25;
/// Largest `|Im(M_n e^{-i theta})|` tolerated when overlaps must share a phase.
pub const ALIGNMENT_TOL: f64 = 1e-6;
const NORM_TOL: f64 = 1e-6;
const BOUND_TOL: f64 = 1e-12;
const MAX_ADAPTIVE_TERMS: usize = 50_000_000;

/// `(e^{2 zeta} / 4, e^{-2 zeta} / 4)`.
pub fn mode_quadratures(zeta: f64) -> (f64, f64) {
    (0.25 * (2.0 * zeta).exp(), 0.25 * (-2.0 * zeta).exp())
}

/// Noise reduction in dB relative to vacuum, `-10 log10(4 q)`.
pub fn squeezing_db(q: f64) -> f64 {
    -10.0 * (q / VACUUM).log10()
}

/// Detected variances together with their excess over vacuum,
/// `plus = 4 q_+ - 1`, `minus = 4 q_- - 1`, accumulated term by term so that
/// weak squeezing keeps its relative precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratures {
    pub q_plus: f64,
    pub q_minus: f64,
    plus: f64,
    minus: f64,
    /// `plus + minus = 4 sum |M|^2 sinh^2 zeta`.
    sum: f64,
}

impl Quadratures {
    fn from_terms(terms: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut acc = Accumulator::default();
        terms.for_each(|(w, z)| acc.add(w, z));
        acc.finish()
    }

    pub fn eta(&self) -> f64 {
        efficiency_from_excess(self.plus, self.minus, self.sum)
    }
}

#[derive(Default)]
struct Accumulator {
    plus: f64,
    minus: f64,
    sum: f64,
}

impl Accumulator {
    fn add(&mut self, weight: f64, zeta: f64) {
        self.plus += weight * (2.0 * zeta).exp_m1();
        self.minus += weight * (-2.0 * zeta).exp_m1();
        self.sum += 4.0 * weight * zeta.sinh().powi(2);
    }

    fn finish(self) -> Quadratures {
        Quadratures {
            q_plus: VACUUM * (1.0 + self.plus),
            q_minus: VACUUM * (1.0 + self.minus),
            plus: self.plus,
            minus: self.minus,
            sum: self.sum,
        }
    }
}

fn efficiency_from_excess(plus: f64, minus: f64, sum: f64) -> f64 {
    if sum <= 0.0 {
        // vacuum: 0/0, any channel leaves it unchanged
        return 1.0;
    }
    -plus * minus / sum
}

/// Quantum efficiency of a beamsplitter-loss channel that maps a pure
/// squeezed state onto variances `(q_plus, q_minus)`:
/// `eta = (1 - 4 q_+)(1 - 4 q_-) / (2 - 4 q_+ - 4 q_-)`.
pub fn quantum_efficiency(q_plus: f64, q_minus: f64) -> Result<f64> {
    if !(q_minus > 0.0 && q_plus >= q_minus && q_plus.is_finite()) {
        return Err(Error::UnphysicalVariances(format!(
            "need q_plus >= q_minus > 0, got {q_plus}, {q_minus}"
        )));
    }
    if q_plus * q_minus < VACUUM * VACUUM - BOUND_TOL {
        return Err(Error::UnphysicalVariances(format!(
            "q_plus q_minus = {} is below the vacuum bound 1/16",
            q_plus * q_minus
        )));
    }
    let (plus, minus) = (4.0 * q_plus - 1.0, 4.0 * q_minus - 1.0);
    Ok(efficiency_from_excess(plus, minus, plus + minus))
}

/// Overlaps `M_n = <psi_n, lo>` with the output modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub overlaps: Vec<Complex64>,
    /// `1 - sum |M_n|^2`, clamped at zero.
    pub unmatched_fraction: f64,
}

pub fn project_lo(lo: &SpectralAmplitude, d: &SqueezerDecomposition) -> Result<Projection> {
    d.grid().ensure_same(lo.grid(), "local oscillator")?;
    let norm = lo.norm_sqr();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Unnormalized(norm));
    }
    let overlaps = d
        .output_modes
        .iter()
        .map(|psi| inner_product(psi, lo))
        .collect::<Result<Vec<_>>>()?;
    let weight: f64 = overlaps.iter().map(|m| m.norm_sqr()).sum();
    Ok(Projection {
        overlaps,
        unmatched_fraction: (1.0 - weight).max(0.0),
    })
}

/// Checks that all overlaps share one phase modulo pi; returns that phase.
pub fn common_phase(overlaps: &[Complex64]) -> Result<f64> {
    let Some(lead) = overlaps.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return Ok(0.0);
    };
    let theta = lead.arg();
    let rot = Complex64::from_polar(1.0, -theta);
    for (mode, m) in overlaps.iter().enumerate() {
        let defect = (m * rot).im.abs();
        if defect > ALIGNMENT_TOL {
            return Err(Error::PhaseAlignment { mode, defect });
        }
    }
    Ok(theta)
}

/// `<Q_+-^2> = 1/4 [sum |M_n|^2 e^{+-2 zeta_n} + unmatched]`, the unmatched
/// weight of the local oscillator coupling to vacuum. With `aligned` the
/// overlaps must share a common phase, which is what lets one LO phase pick
/// out the squeezed quadrature of every mode at once.
pub fn detected_quadratures(overlaps: &[Complex64], zetas: &[f64], aligned: bool) -> Result<Quadratures> {
    if overlaps.len() > zetas.len() {
        return Err(Error::InconsistentInputs(format!(
            "{} overlaps but only {} squeezing parameters",
            overlaps.len(),
            zetas.len()
        )));
    }
    if zetas.iter().any(|z| !(*z >= 0.0)) {
        return Err(Error::InvalidParameter("squeezing parameters must be nonnegative".into()));
    }
    if aligned {
        common_phase(overlaps)?;
    }
    Ok(Quadratures::from_terms(
        overlaps.iter().zip(zetas).map(|(m, z)| (m.norm_sqr(), *z)),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneResult {
    pub overlaps: Vec<Complex64>,
    pub q_plus: f64,
    pub q_minus: f64,
    pub eta: f64,
    pub unmatched_fraction: f64,
    /// `-10 log10(4 q_minus)`.
    pub squeezing_db: f64,
    pub antisqueezing_db: f64,
}

/// Projects `lo` on the output modes of `d` and evaluates the detected noise.
pub fn homodyne(lo: &SpectralAmplitude, d: &SqueezerDecomposition, aligned: bool) -> Result<HomodyneResult> {
    let projection = project_lo(lo, d)?;
    let q = detected_quadratures(&projection.overlaps, &d.zetas, aligned)?;
    Ok(HomodyneResult {
        eta: q.eta(),
        squeezing_db: squeezing_db(q.q_minus),
        antisqueezing_db: -squeezing_db(q.q_plus),
        q_plus: q.q_plus,
        q_minus: q.q_minus,
        overlaps: projection.overlaps,
        unmatched_fraction: projection.unmatched_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub r_prime: f64,
    /// LO bandwidth (rad/fs).
    pub delta_lo: f64,
    pub q_plus: f64,
    pub q_minus: f64,
    pub eta: f64,
    /// Number of even modes summed.
    pub terms: usize,
    /// LO weight beyond the summed modes.
    pub truncation: f64,
}

/// Detected noise of the Gaussian model for a Gaussian LO with `r'`.
///
/// With `m_max = Some(m)` exactly the even modes `0, 2, ..., 2m` are summed.
/// With `None` the series runs until the geometric bound on the remaining
/// terms is below 1e-18 of the accumulated sums, which for `r, |r'|` around 6
/// takes about 1e6 terms.
pub fn gaussian_detection(p: &GaussianModelParams, r_prime: f64, m_max: Option<usize>) -> SweepPoint {
    let delta_lo = p.delta_lo_for(r_prime);
    let (point, terms, weight) = match m_max {
        Some(m) => {
            let series = analytic_overlaps(p, delta_lo, m);
            let zetas = (0..=2 * m).map(|n| gaussian_sinh_zeta(p, n).asinh());
            let q = Quadratures::from_terms(series.coefficients.iter().map(|c| c * c).zip(zetas));
            (q, m + 1, 1.0 - series.truncation_defect)
        }
        None => adaptive_series(p, r_prime),
    };
    SweepPoint {
        r_prime,
        delta_lo,
        q_plus: point.q_plus,
        q_minus: point.q_minus,
        eta: point.eta(),
        terms,
        truncation: (1.0 - weight).max(0.0),
    }
}

fn adaptive_series(p: &GaussianModelParams, r_prime: f64) -> (Quadratures, usize, f64) {
    let t_lo = r_prime.tanh();
    let t = p.r().tanh();
    let ratio = t_lo * t_lo * t * t;
    let mut m_coef = 1.0 / r_prime.cosh().sqrt();
    let mut sinh = gaussian_sinh_zeta(p, 0);
    let mut weight = 0.0;
    let mut q = Accumulator::default();
    let (mut acc, mut m) = (0.0f64, 0usize);
    loop {
        let w = m_coef * m_coef;
        let z = sinh.asinh();
        q.add(w, z);
        weight += w;
        let contribution = w * z;
        acc += contribution;
        let tail = if ratio < 1.0 { contribution / (1.0 - ratio) } else { f64::INFINITY };
        if contribution == 0.0 || tail < 1e-18 * acc || m >= MAX_ADAPTIVE_TERMS {
            break;
        }
        m += 1;
        let mf = m as f64;
        m_coef *= t_lo * ((2.0 * mf - 1.0) / (2.0 * mf)).sqrt();
        sinh *= t * t;
    }
    (q.finish(), m + 1, weight)
}

/// `eta(r')` of the Gaussian model at each requested `r'`.
pub fn efficiency_sweep(p: &GaussianModelParams, r_primes: &[f64], m_max: Option<usize>) -> Vec<SweepPoint> {
    use rayon::prelude::*;
    r_primes.par_iter().map(|&rp| gaussian_detection(p, rp, m_max)).collect()
}

/// Efficiency when the LO has the pump bandwidth (`r' = -r`), as a function
/// of `r`. Only `r` and `N` matter; the mode width is arbitrary.
pub fn master_laser_curve(omega_p: f64, photon_number: f64, rs: &[f64], m_max: Option<usize>) -> Result<Vec<(f64, f64)>> {
    use rayon::prelude::*;
    rs.par_iter()
        .map(|&r| {
            let p = GaussianModelParams::from_r(omega_p, r, 1.0, photon_number)?;
            Ok((r, gaussian_detection(&p, -r, m_max).eta))
        })
        .collect()
}
