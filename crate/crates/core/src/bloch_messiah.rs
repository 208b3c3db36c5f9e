//! Joint decomposition of Green functions into independent single-mode
//! squeezers, the symmetric (Takagi) factorization of a biphoton amplitude,
//! and checks of the Bogoliubov constraints.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_mode, gaussian_zeta, GaussianModelParams};
use crate::green::{GreenPair, GreenSource, Picture};
use crate::grid::FrequencyGrid;
use crate::linalg::{matmul, max_abs, max_abs_diff, polar_unitary, svd_sorted, takagi, Op, ONE};
use crate::spectral::{KernelMatrix, SpectralAmplitude};

/// Constraint defects above this abort a decomposition.
pub const CONSTRAINT_ERROR: f64 = 1e-3;
/// Constraint defects above this are logged.
pub const CONSTRAINT_WARNING: f64 = 1e-5;
/// Singular values below this fraction of the largest are treated as zero.
pub const ZERO_FLOOR: f64 = 1e-12;
/// Default relative gap below which neighbouring singular values are
/// treated as one cluster.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

const PAIRING_FLOOR: f64 = 1e-6;
const PAIRING_LEAK_LIMIT: f64 = 1e-2;
const NOISE_MARGIN: f64 = 10.0;
const SYMMETRY_LIMIT: f64 = 1e-8;

/// Max-entry defects of `C S^T = (C S^T)^T` and `C C^dag - S S^dag = 1`,
/// evaluated on the quadrature-weighted (dimensionless) matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub symmetry: f64,
    pub unitarity: f64,
}

impl ConstraintReport {
    pub fn max(&self) -> f64 {
        self.symmetry.max(self.unitarity)
    }
}

pub fn verify_constraints(g: &GreenPair) -> ConstraintReport {
    let (c, s) = (g.c.weighted(), g.s.weighted());
    let cst = matmul(&c, Op::None, &s, Op::Transpose);
    let symmetry = max_abs_diff(&cst, &cst.transpose());
    let mut u = matmul(&c, Op::None, &c, Op::Adjoint) - matmul(&s, Op::None, &s, Op::Adjoint);
    for i in 0..u.nrows() {
        u[(i, i)] -= ONE;
    }
    ConstraintReport {
        symmetry,
        unitarity: max_abs(&u),
    }
}

/// Max-entry differences between the input kernels and the kernels rebuilt
/// from the full set of squeezers (quadrature-weighted, dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub c: f64,
    pub s: f64,
}

/// `C(w, w') = sum cosh(zeta_n) psi_n^*(w) phi_n(w')`,
/// `S(w, w') = sum sinh(zeta_n) psi_n^*(w) phi_n^*(w')`.
#[derive(Debug, Clone)]
pub struct SqueezerDecomposition {
    grid: FrequencyGrid,
    /// Leading squeezing parameters, descending.
    pub zetas: Vec<f64>,
    pub output_modes: Vec<SpectralAmplitude>,
    pub input_modes: Vec<SpectralAmplitude>,
    pub residuals: Residuals,
    pub constraints: Option<ConstraintReport>,
    pub picture: Picture,
    // Columns are sqrt(step) * conj(psi_n) and sqrt(step) * phi_n for every
    // mode used in the reconstruction, not only the reported ones.
    p: DMatrix<Complex64>,
    w: DMatrix<Complex64>,
    all_zetas: Vec<f64>,
}

impl SqueezerDecomposition {
    fn from_basis(
        grid: FrequencyGrid,
        p: DMatrix<Complex64>,
        w: DMatrix<Complex64>,
        all_zetas: Vec<f64>,
        n_modes: usize,
        picture: Picture,
    ) -> Self {
        let root = grid.step().sqrt();
        let column = |m: &DMatrix<Complex64>, j: usize, conj: bool| {
            let values = m
                .column(j)
                .iter()
                .map(|v| if conj { v.conj() / root } else { v / root })
                .collect();
            SpectralAmplitude::from_parts(grid, values)
        };
        Self {
            grid,
            zetas: all_zetas[..n_modes].to_vec(),
            output_modes: (0..n_modes).map(|j| column(&p, j, true)).collect(),
            input_modes: (0..n_modes).map(|j| column(&w, j, false)).collect(),
            residuals: Residuals::default(),
            constraints: None,
            picture,
            p,
            w,
            all_zetas,
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.zetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zetas.is_empty()
    }

    /// Squeezing parameters of every mode in the reconstruction basis.
    pub fn all_zetas(&self) -> &[f64] {
        &self.all_zetas
    }

    /// Number of modes with `zeta > fraction * zeta_0`.
    pub fn count_above(&self, fraction: f64) -> usize {
        let lead = self.all_zetas.first().copied().unwrap_or(0.0);
        self.all_zetas.iter().filter(|z| **z > fraction * lead).count()
    }

    /// Weighted `(C, S)` rebuilt from the reconstruction basis.
    fn rebuild(&self) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let scaled = |f: fn(f64) -> f64| {
            let mut m = self.p.clone();
            for (j, z) in self.all_zetas.iter().enumerate() {
                m.column_mut(j).scale_mut(f(*z));
            }
            m
        };
        let c = matmul(&scaled(f64::cosh), Op::None, &self.w, Op::Transpose);
        let s = matmul(&scaled(f64::sinh), Op::None, &self.w, Op::Adjoint);
        (c, s)
    }

    /// Green functions of the independent-squeezer model.
    pub fn reconstruct(&self) -> Result<GreenPair> {
        let (c, s) = self.rebuild();
        GreenPair::new(
            KernelMatrix::from_weighted(self.grid, c)?,
            KernelMatrix::from_weighted(self.grid, s)?,
            self.picture,
            GreenSource::Reconstructed,
        )
    }

    /// Analytic squeezers of the Gaussian model: `zeta_n` from the closed
    /// form and Hermite modes, with `psi_n = phi_n = i^n H_n` for odd `n`
    /// carrying the factor `i` so that `S` has the sign pattern of the model
    /// kernel.
    pub fn from_gaussian_model(p: &GaussianModelParams, grid: &FrequencyGrid, n_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > grid.len() {
            return Err(Error::InvalidParameter(format!(
                "n_modes must lie in 1..={}, got {n_modes}",
                grid.len()
            )));
        }
        let root = grid.step().sqrt();
        let mut modes = DMatrix::zeros(grid.len(), n_modes);
        let mut zetas = Vec::with_capacity(n_modes);
        for n in 0..n_modes {
            let phase = if n % 2 == 1 { Complex64::new(0.0, 1.0) } else { ONE };
            let h = gaussian_mode(p, n, grid)?;
            for (i, v) in h.values().iter().enumerate() {
                modes[(i, n)] = phase * v * root;
            }
            zetas.push(gaussian_zeta(p, n));
        }
        let conj = modes.map(|v| v.conj());
        Ok(Self::from_basis(*grid, conj, modes, zetas, n_modes, Picture::MidpointCompensated))
    }
}

fn clusters(sigma: &[f64], floor: f64, tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=sigma.len() {
        let split = k == sigma.len()
            || (sigma[k - 1] >= floor) != (sigma[k] >= floor)
            || (sigma[k - 1] >= floor && sigma[k - 1] - sigma[k] > tol * sigma[k - 1]);
        if split {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// Index of the first sample whose magnitude is within a relative 1e-6 of the
/// largest; stable under rounding noise between mirror-image peaks.
fn reference_sample(v: impl Iterator<Item = Complex64> + Clone) -> usize {
    let peak = v.clone().map(|x| x.norm()).fold(0.0, f64::max);
    v.clone().position(|x| x.norm() >= (1.0 - 1e-6) * peak).unwrap_or(0)
}

/// Bloch-Messiah decomposition of a Green-function pair.
///
/// The SVD of the weighted `S` supplies `sinh zeta_n` and candidate modes.
/// Inside each cluster of (nearly) equal singular values the pairing is fixed
/// by a Takagi factorization of the restriction of `C`, so that both kernels
/// are diagonal in the same mode pairs. Modes whose singular value is below
/// the precision to which `S` agrees with `C` (ten times the constraint
/// defect over `sinh zeta_0`, capped at `1e-6 sinh zeta_0`), including the
/// unsqueezed ones, are paired through the unitary part of `C` on their
/// subspace.
///
/// Phase convention: the only freedom left is a common sign of `psi_n` and
/// `phi_n`; it is chosen so that the largest sample of `psi_n` has a positive
/// real part (positive imaginary part if the real part vanishes). Zero
/// squeezers are rotated so that their largest sample is real and positive.
pub fn decompose(g: &GreenPair, n_modes: usize, tol: f64) -> Result<SqueezerDecomposition> {
    let n = g.grid().len();
    if n_modes == 0 || n_modes > n {
        return Err(Error::InvalidParameter(format!("n_modes must lie in 1..={n}, got {n_modes}")));
    }
    if !(tol >= 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("cluster tolerance must lie in [0, 1), got {tol}")));
    }
    let report = verify_constraints(g);
    if report.max() > CONSTRAINT_ERROR {
        return Err(Error::ConstraintViolation {
            symmetry: report.symmetry,
            unitarity: report.unitarity,
            limit: CONSTRAINT_ERROR,
        });
    }
    if report.max() > CONSTRAINT_WARNING {
        log::warn!(
            "Green functions violate the Bogoliubov constraints by {:.2e}; decomposition is approximate",
            report.max()
        );
    }

    let (c, s) = (g.c.weighted(), g.s.weighted());
    let (mut p, sigma, mut w) = svd_sorted(&s);
    let floor = ZERO_FLOOR * sigma[0];
    let zetas: Vec<f64> = sigma.iter().map(|&x| if x >= floor && x > 0.0 { x.asinh() } else { 0.0 }).collect();
    // S is only consistent with C up to about defect / sigma_0; below that its
    // singular vectors carry no pairing information and the modes are paired
    // through C alone
    let noise = if sigma[0] > 0.0 { NOISE_MARGIN * report.max() / sigma[0] } else { 0.0 };
    let tail = floor.max(noise.min(PAIRING_FLOOR * sigma[0]));

    for range in clusters(&sigma, tail, tol) {
        let (start, k) = (range.start, range.len());
        let pc = p.columns(start, k).into_owned();
        let wbar = w.columns(start, k).map(|v| v.conj());
        let cw = matmul(&c, Op::None, &wbar, Op::None);
        let gm = matmul(&pc, Op::Adjoint, &cw, Op::None);
        let zero = !(sigma[start] >= tail && sigma[start] > 0.0);

        if !zero && sigma[start] >= PAIRING_FLOOR * sigma[0] {
            let leak = max_abs(&(&cw - matmul(&pc, Op::None, &gm, Op::None))) / max_abs(&cw).max(f64::MIN_POSITIVE);
            if leak > PAIRING_LEAK_LIMIT {
                return Err(Error::ClusterPairing { start, leak });
            }
        }

        if zero {
            let q = polar_unitary(&gm);
            let wc = matmul(&w.columns(start, k).into_owned(), Op::None, &q, Op::Transpose);
            w.columns_mut(start, k).copy_from(&wc);
            for j in start..start + k {
                let idx = reference_sample(p.column(j).iter().map(|v| v.conj()));
                let v = p[(idx, j)].conj();
                if v.norm() > 0.0 {
                    // keeps p w^T while making the reference sample of psi real positive
                    let rot = v / v.norm();
                    p.column_mut(j).iter_mut().for_each(|v| *v *= rot);
                    w.column_mut(j).iter_mut().for_each(|v| *v *= rot.conj());
                }
            }
            continue;
        }

        let sym = (&gm + gm.transpose()) * Complex64::new(0.5, 0.0);
        let (_, y) = takagi(&sym);
        let new_p = matmul(&pc, Op::None, &y, Op::None);
        let new_w = matmul(&w.columns(start, k).into_owned(), Op::None, &y, Op::None);
        p.columns_mut(start, k).copy_from(&new_p);
        w.columns_mut(start, k).copy_from(&new_w);

        for j in start..start + k {
            let idx = reference_sample(p.column(j).iter().map(|v| v.conj()));
            let v = p[(idx, j)].conj();
            let flip = if v.re.abs() < 1e-9 * v.norm() { v.im < 0.0 } else { v.re < 0.0 };
            if flip {
                p.column_mut(j).neg_mut();
                w.column_mut(j).neg_mut();
            }
        }
    }

    let mut d = SqueezerDecomposition::from_basis(*g.grid(), p, w, zetas, n_modes, g.picture);
    let (rc, rs) = d.rebuild();
    d.residuals = Residuals {
        c: max_abs_diff(&rc, &c),
        s: max_abs_diff(&rs, &s),
    };
    d.constraints = Some(report);
    Ok(d)
}

/// `Psi(w, w') = sum zeta_n psi_n^*(w) psi_n^*(w')`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    pub modes: Vec<SpectralAmplitude>,
    /// Max-entry error of the weighted reconstruction.
    pub residual: f64,
}

/// Symmetric factorization of a biphoton amplitude with a single mode family.
pub fn takagi_biphoton(psi: &KernelMatrix) -> Result<SchmidtDecomposition> {
    let scale = psi.max_abs();
    let asym = if scale > 0.0 { psi.asymmetry() / scale } else { 0.0 };
    if asym > SYMMETRY_LIMIT {
        return Err(Error::AsymmetricKernel(asym));
    }
    let grid = *psi.grid();
    let n = grid.len();
    let m = psi.weighted();
    let (u, sigma, v) = svd_sorted(&m);
    let floor = ZERO_FLOOR * sigma[0];
    let mut y = DMatrix::zeros(n, n);
    for range in clusters(&sigma, floor, DEFAULT_CLUSTER_TOL) {
        let (start, k) = (range.start, range.len());
        let uc = u.columns(start, k).into_owned();
        if !(sigma[start] >= floor && sigma[start] > 0.0) {
            y.columns_mut(start, k).copy_from(&uc);
            continue;
        }
        let vbar = v.columns(start, k).map(|x| x.conj());
        let x = matmul(&uc, Op::Adjoint, &vbar, Op::None);
        let sym = (&x + x.transpose()) * Complex64::new(0.5, 0.0);
        let (_, z) = takagi(&sym);
        y.columns_mut(start, k).copy_from(&matmul(&uc, Op::None, &z, Op::None));
    }
    for j in 0..n {
        let idx = reference_sample(y.column(j).iter().map(|v| v.conj()));
        let v = y[(idx, j)].conj();
        let flip = if v.re.abs() < 1e-9 * v.norm() { v.im < 0.0 } else { v.re < 0.0 };
        if flip {
            y.column_mut(j).neg_mut();
        }
    }
    let coefficients: Vec<f64> = sigma.iter().map(|&s| if s >= floor { s } else { 0.0 }).collect();
    let mut scaled = y.clone();
    for (j, c) in coefficients.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*c);
    }
    let rebuilt = matmul(&scaled, Op::None, &y, Op::Transpose);
    let residual = max_abs_diff(&rebuilt, &m);
    let root = grid.step().sqrt();
    let modes = (0..n)
        .map(|j| SpectralAmplitude::from_parts(grid, y.column(j).iter().map(|v| v.conj() / root).collect()))
        .collect();
    Ok(SchmidtDecomposition {
        coefficients,
        modes,
        residual,
    })
}

/// Per-mode `min_phi || psi_n - e^{i phi} phi_n^* ||`.
pub fn time_reversal_check(d: &SqueezerDecomposition) -> Vec<f64> {
    let h = d.grid.step();
    d.output_modes
        .iter()
        .zip(&d.input_modes)
        .map(|(psi, phi)| {
            let overlap: Complex64 = psi.values().iter().zip(phi.values()).map(|(a, b)| a * b).sum();
            let rot = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
            let sq: f64 = psi
                .values()
                .iter()
                .zip(phi.values())
                .map(|(a, b)| (a - rot * b.conj()).norm_sqr())
                .sum();
            (sq * h).sqrt()
        })
        .collect()
}

/// Upper end of the pump-strength range over which the squeezing-length
/// scaling law is asserted.
pub const SCALING_RANGE_LIMIT: f64 = 15.0;
/// Relative spread of `zeta_n L_NL` accepted as the scaling law holding.
pub const SCALING_SPREAD_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezingLength {
    pub mode: usize,
    /// Least-squares `Lambda_n` (mm) of `zeta_n = Lambda_n / L_NL` through the origin.
    pub lambda: f64,
    /// `zeta_n L_NL` at each strength used in the fit (mm).
    pub samples: Vec<f64>,
    /// `(max - min) / mean` of the samples.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub strengths: Vec<f64>,
    pub excluded: Vec<f64>,
    pub modes: Vec<SqueezingLength>,
    /// All strengths lie within the validated range.
    pub within_range: bool,
    /// Every mode's spread is below [`SCALING_SPREAD_LIMIT`].
    pub scaling_holds: bool,
}

/// Fits `zeta_n = Lambda_n / L_NL` across pump strengths `L / L_NL` for a
/// crystal of length `length` (mm). Strengths above [`SCALING_RANGE_LIMIT`]
/// are reported and left out of the fit.
pub fn squeezing_lengths(
    inputs: &[(f64, &SqueezerDecomposition)],
    length: f64,
    n_modes: usize,
) -> Result<ScalingReport> {
    let Some((_, first)) = inputs.first() else {
        return Err(Error::InconsistentInputs("no decompositions given".into()));
    };
    if !(length > 0.0) {
        return Err(Error::InvalidParameter(format!("crystal length must be positive, got {length}")));
    }
    for (strength, d) in inputs {
        if !(*strength > 0.0 && strength.is_finite()) {
            return Err(Error::InvalidParameter(format!("pump strength must be positive, got {strength}")));
        }
        if d.grid != first.grid || d.picture != first.picture {
            return Err(Error::InconsistentInputs("decompositions differ in grid or picture".into()));
        }
    }
    let mut strengths: Vec<f64> = inputs.iter().map(|(s, _)| *s).collect();
    strengths.sort_by(f64::total_cmp);
    if strengths.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InconsistentInputs("pump strengths must be distinct".into()));
    }
    let (used, excluded): (Vec<_>, Vec<_>) = inputs.iter().partition(|(s, _)| *s <= SCALING_RANGE_LIMIT);
    let excluded: Vec<f64> = excluded.iter().map(|(s, _)| *s).collect();
    if !excluded.is_empty() {
        log::warn!("strengths {excluded:?} exceed L/L_NL = {SCALING_RANGE_LIMIT} and are excluded from the fit");
    }
    if used.len() < 3 {
        return Err(Error::InconsistentInputs(format!(
            "at least 3 strengths up to {SCALING_RANGE_LIMIT} are needed, got {}",
            used.len()
        )));
    }
    let available = used.iter().map(|(_, d)| d.len()).min().unwrap_or(0);
    if n_modes == 0 || n_modes > available {
        return Err(Error::InvalidParameter(format!("n_modes must lie in 1..={available}, got {n_modes}")));
    }
    let modes = (0..n_modes)
        .map(|n| {
            // zeta = Lambda * x with x = 1 / L_NL = strength / length
            let xs: Vec<f64> = used.iter().map(|(s, _)| s / length).collect();
            let zs: Vec<f64> = used.iter().map(|(_, d)| d.zetas[n]).collect();
            let lambda = xs.iter().zip(&zs).map(|(x, z)| x * z).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
            let samples: Vec<f64> = xs.iter().zip(&zs).map(|(x, z)| z / x).collect();
            let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            let spread = if mean > 0.0 { (hi - lo) / mean } else { 0.0 };
            SqueezingLength {
                mode: n,
                lambda,
                samples,
                spread,
            }
        })
        .collect::<Vec<_>>();
    let scaling_holds = modes.iter().all(|m| m.spread < SCALING_SPREAD_LIMIT);
    Ok(ScalingReport {
        strengths: used.iter().map(|(s, _)| *s).collect(),
        within_range: excluded.is_empty(),
        excluded,
        modes,
        scaling_holds,
    })
}
