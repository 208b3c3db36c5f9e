//! Green functions of a pumped dispersive χ(2) waveguide from the coupled
//! propagation equations for monochromatic components.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};
use crate::green::{Convergence, GreenPair, GreenSource, Picture};
use crate::grid::{make_grid, FrequencyGrid};
use crate::linalg::{max_abs, par_matmul_into};
use crate::spectral::KernelMatrix;

pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-6;
/// Edge-to-peak ratio of the coupling envelope targeted by [`SpanPolicy::Auto`].
pub const EDGE_RATIO_TARGET: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MediumSpec {
    /// Crystal length (mm).
    pub length: f64,
    /// Nonlinear length (mm); `f64::INFINITY` switches the pump off.
    pub nonlinear_length: f64,
    pub signal: DispersionModel,
    pub pump: DispersionModel,
}

impl MediumSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter(format!("crystal length must be positive, got {}", self.length)));
        }
        if !(self.nonlinear_length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nonlinear length must be positive, got {}",
                self.nonlinear_length
            )));
        }
        Ok(())
    }

    /// `L / L_NL`.
    pub fn strength(&self) -> f64 {
        self.length / self.nonlinear_length
    }
}

/// Gaussian pump pulse, `E_p(omega) ~ exp(-tau_p^2 (omega - omega_p)^2 / 2)`,
/// with an optional quadratic spectral phase `chirp (omega - omega_p)^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpPulse {
    /// Central frequency (rad/fs).
    pub omega_p: f64,
    /// Duration (fs).
    pub tau_p: f64,
    /// Group-delay dispersion of the pump at the crystal midpoint (fs^2).
    pub chirp: f64,
}

impl PumpPulse {
    pub fn new(omega_p: f64, tau_p: f64) -> Result<Self> {
        if !(omega_p > 0.0 && omega_p.is_finite() && tau_p > 0.0 && tau_p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pump needs positive omega_p and tau_p, got {omega_p} rad/fs, {tau_p} fs"
            )));
        }
        Ok(Self { omega_p, tau_p, chirp: 0.0 })
    }

    pub fn with_chirp(self, chirp: f64) -> Self {
        Self { chirp, ..self }
    }

    /// Pump-side grid matching the sum frequencies of a signal grid.
    pub fn grid_for(signal: &FrequencyGrid) -> FrequencyGrid {
        signal.sum_grid()
    }
}

/// Pump spectral amplitude rescaled so that the unchirped spectrum integrates
/// to one.
pub fn pump_spectrum(pump: &PumpPulse, omega: f64) -> Complex64 {
    let x = omega - pump.omega_p;
    let amp = pump.tau_p / (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * (pump.tau_p * x).powi(2)).exp();
    Complex64::from_polar(amp, 0.5 * pump.chirp * x * x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub steps: usize,
    pub convergence_tol: f64,
    /// Number of input columns re-propagated with half the step size.
    pub probe_columns: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            convergence_tol: DEFAULT_CONVERGENCE_TOL,
            probe_columns: 8,
        }
    }
}

/// Coupling data on the signal grid: `K_ij(z) = g_ij exp(i dk_ij z)`.
struct Coupling {
    n: usize,
    amplitude: Vec<Complex64>,
    dk: Vec<f64>,
}

impl Coupling {
    fn new(medium: &MediumSpec, pump: &PumpPulse, grid: &FrequencyGrid) -> Result<Self> {
        let n = grid.len();
        let sum = grid.sum_grid();
        let k = medium.signal.k_many(grid.omegas())?;
        let kp = medium.pump.k_many(sum.omegas())?;
        let scale = grid.step() / medium.nonlinear_length;
        // pump phase is flat at the crystal midpoint
        let e: Vec<Complex64> = sum
            .omegas()
            .zip(&kp)
            .map(|(w, kp)| scale * pump_spectrum(pump, w) * Complex64::from_polar(1.0, -kp * medium.length / 2.0))
            .collect();
        let mut amplitude = Vec::with_capacity(n * n);
        let mut dk = Vec::with_capacity(n * n);
        // column-major, matching nalgebra storage
        for j in 0..n {
            for i in 0..n {
                amplitude.push(e[i + j]);
                dk.push(kp[i + j] - k[i] - k[j]);
            }
        }
        Ok(Self { n, amplitude, dk })
    }

    fn at(&self, z: f64) -> DMatrix<Complex64> {
        let data = self
            .amplitude
            .par_iter()
            .zip(self.dk.par_iter())
            .map(|(g, dk)| g * Complex64::from_polar(1.0, dk * z))
            .collect::<Vec<_>>();
        DMatrix::from_vec(self.n, self.n, data)
    }
}

/// `[A | B] -> [conj B | conj A]`.
fn swap_conj(x: &DMatrix<Complex64>, y: &mut DMatrix<Complex64>) {
    let m = x.ncols() / 2;
    for j in 0..m {
        for i in 0..x.nrows() {
            y[(i, j)] = x[(i, j + m)].conj();
            y[(i, j + m)] = x[(i, j)].conj();
        }
    }
}

/// `x += a * k`.
fn add_scaled(x: &mut DMatrix<Complex64>, a: f64, k: &DMatrix<Complex64>) {
    x.iter_mut().zip(k.iter()).for_each(|(x, k)| *x += k * a);
}

/// Classical RK4 for `X' = K(z) swap_conj(X)` from z = 0 to `length`.
fn integrate(
    x0: DMatrix<Complex64>,
    length: f64,
    steps: usize,
    mut kernel: impl FnMut(f64) -> DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let (rows, cols) = x0.shape();
    let dz = length / steps as f64;
    let mut x = x0;
    let mut y = DMatrix::zeros(rows, cols);
    let mut stage = x.clone();
    let mut k = [
        DMatrix::zeros(rows, cols),
        DMatrix::zeros(rows, cols),
        DMatrix::zeros(rows, cols),
        DMatrix::zeros(rows, cols),
    ];
    let mut k_next = kernel(0.0);
    for s in 0..steps {
        let z = s as f64 * dz;
        let k_start = k_next;
        let k_mid = kernel(z + 0.5 * dz);
        k_next = kernel(z + dz);

        swap_conj(&x, &mut y);
        par_matmul_into(&k_start, &y, &mut k[0]);
        stage.copy_from(&x);
        add_scaled(&mut stage, 0.5 * dz, &k[0]);

        swap_conj(&stage, &mut y);
        par_matmul_into(&k_mid, &y, &mut k[1]);
        stage.copy_from(&x);
        add_scaled(&mut stage, 0.5 * dz, &k[1]);

        swap_conj(&stage, &mut y);
        par_matmul_into(&k_mid, &y, &mut k[2]);
        stage.copy_from(&x);
        add_scaled(&mut stage, dz, &k[2]);

        swap_conj(&stage, &mut y);
        par_matmul_into(&k_next, &y, &mut k[3]);

        let w = dz / 6.0;
        add_scaled(&mut x, w, &k[0]);
        add_scaled(&mut x, 2.0 * w, &k[1]);
        add_scaled(&mut x, 2.0 * w, &k[2]);
        add_scaled(&mut x, w, &k[3]);
    }
    x
}

fn probe_indices(n: usize, count: usize) -> Vec<usize> {
    let count = count.clamp(2, n);
    let mut cols: Vec<usize> = (0..count).map(|i| i * (n - 1) / (count - 1)).collect();
    cols.push(n / 2);
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// Solves the propagation equations for unit monochromatic inputs and returns
/// the weighted Green functions in the interaction picture (`Picture::Raw`).
///
/// Columns of `C` and `S` are assembled by propagating the fundamental
/// solution `[A | B]` with `a(L) = A a(0) + B a(0)^*`. A subset of columns is
/// re-propagated with half the step size; the relative change is attached as
/// convergence metadata and checked against `opts.convergence_tol`.
pub fn solve_green_functions(
    medium: &MediumSpec,
    pump: &PumpPulse,
    grid: &FrequencyGrid,
    opts: &SolverOptions,
) -> Result<GreenPair> {
    medium.validate()?;
    if opts.steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let n = grid.len();
    let coupling = Coupling::new(medium, pump, grid)?;

    let mut x0 = DMatrix::zeros(n, 2 * n);
    x0.view_mut((0, 0), (n, n)).fill_with_identity();
    let x = integrate(x0, medium.length, opts.steps, |z| coupling.at(z));

    let probes = probe_indices(n, opts.probe_columns);
    let max_change = if medium.nonlinear_length.is_infinite() {
        0.0
    } else {
        let m = probes.len();
        let mut p0 = DMatrix::zeros(n, 2 * m);
        for (c, &j) in probes.iter().enumerate() {
            p0[(j, c)] = Complex64::new(1.0, 0.0);
        }
        let fine = integrate(p0, medium.length, 2 * opts.steps, |z| coupling.at(z));
        let mut coarse = DMatrix::zeros(n, 2 * m);
        for (c, &j) in probes.iter().enumerate() {
            coarse.set_column(c, &x.column(j));
            coarse.set_column(c + m, &x.column(j + n));
        }
        let scale = max_abs(&fine).max(1.0);
        (fine - coarse).iter().map(|d| d.norm()).fold(0.0, f64::max) / scale
    };
    if max_change > 10.0 * opts.convergence_tol {
        return Err(Error::NonConvergence {
            change: max_change,
            limit: 10.0 * opts.convergence_tol,
        });
    }
    if max_change > opts.convergence_tol {
        log::warn!(
            "step halving changed Green functions by {max_change:.2e} (tolerance {:.1e}); consider more steps",
            opts.convergence_tol
        );
    }

    let a = x.columns(0, n).into_owned();
    let b = x.columns(n, n).into_owned();
    GreenPair::new(
        KernelMatrix::from_weighted(*grid, a)?,
        KernelMatrix::from_weighted(*grid, b)?,
        Picture::Raw,
        GreenSource::Propagation {
            medium: medium.clone(),
            pump: *pump,
            convergence: Convergence {
                steps: opts.steps,
                probe_columns: probes,
                max_change,
            },
        },
    )
}

/// Refers input and output planes to the crystal midpoint:
/// `C'(w, w') = e^{ik(w)L/2} C(w, w') e^{-ik(w')L/2}` and
/// `S'(w, w') = e^{ik(w)L/2} S(w, w') e^{ik(w')L/2}`.
pub fn compensate_linear_phase(g: &GreenPair) -> Result<GreenPair> {
    if g.picture == Picture::MidpointCompensated {
        return Err(Error::DoubleCompensation);
    }
    let GreenSource::Propagation { medium, .. } = &g.source else {
        return Err(Error::InconsistentInputs(
            "linear-phase compensation needs the medium the Green functions were solved for".into(),
        ));
    };
    let k = medium.signal.k_many(g.grid().omegas())?;
    let phase: Vec<Complex64> = k.iter().map(|k| Complex64::from_polar(1.0, k * medium.length / 2.0)).collect();
    let n = g.grid().len();
    let c = DMatrix::from_fn(n, n, |i, j| phase[i] * g.c.entries()[(i, j)] * phase[j].conj());
    let s = DMatrix::from_fn(n, n, |i, j| phase[i] * g.s.entries()[(i, j)] * phase[j]);
    GreenPair::new(
        KernelMatrix::new(*g.grid(), c)?,
        KernelMatrix::new(*g.grid(), s)?,
        Picture::MidpointCompensated,
        g.source.clone(),
    )
}

/// Largest `|E_p(w + w') sinc(dk L / 2)|` on the outer rows of the grid,
/// relative to its overall maximum. This is the shape of the weak-pump `S`.
pub fn coupling_edge_ratio(medium: &MediumSpec, pump: &PumpPulse, grid: &FrequencyGrid) -> Result<f64> {
    let n = grid.len();
    let k = medium.signal.k_many(grid.omegas())?;
    let sum = grid.sum_grid();
    let kp = medium.pump.k_many(sum.omegas())?;
    let envelope = |i: usize, j: usize| {
        let x = 0.5 * (kp[i + j] - k[i] - k[j]) * medium.length;
        let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
        (pump_spectrum(pump, sum.omega(i + j)).norm() * sinc).abs()
    };
    let peak = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| envelope(i, j)).fold(0.0, f64::max);
    let edge = (0..n)
        .flat_map(|j| [(0, j), (n - 1, j)])
        .map(|(i, j)| envelope(i, j))
        .fold(0.0, f64::max);
    Ok(if peak > 0.0 { edge / peak } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpanPolicy {
    /// Fixed span (rad/fs).
    Fixed(f64),
    /// Start from `initial` and widen by 25% until the coupling envelope at
    /// the grid edge drops below [`EDGE_RATIO_TARGET`] or `max` is reached.
    Auto { initial: f64, max: f64 },
}

/// Signal grid centered at `omega_p / 2` according to `policy`.
pub fn signal_grid(medium: &MediumSpec, pump: &PumpPulse, n_points: usize, policy: SpanPolicy) -> Result<FrequencyGrid> {
    let center = pump.omega_p / 2.0;
    match policy {
        SpanPolicy::Fixed(span) => make_grid(center, span, n_points),
        SpanPolicy::Auto { initial, max } => {
            let mut span = initial;
            loop {
                let grid = make_grid(center, span, n_points)?;
                let ratio = coupling_edge_ratio(medium, pump, &grid)?;
                if ratio < EDGE_RATIO_TARGET {
                    return Ok(grid);
                }
                if span >= max {
                    log::warn!(
                        "coupling at the grid edge is {ratio:.2e} of its peak at the maximum span {span:.3} rad/fs"
                    );
                    return Ok(grid);
                }
                span = (1.25 * span).min(max);
                log::warn!("widening signal grid to {span:.3} rad/fs (edge ratio {ratio:.2e})");
            }
        }
    }
}
