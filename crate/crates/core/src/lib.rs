//! Multimode squeezing in a pumped χ(2) waveguide: Green functions of the
//! propagation equations, their decomposition into independent squeezers,
//! the closed-form Gaussian model, and homodyne detection of the result.

pub mod bloch_messiah;
pub mod dispersion;
pub mod error;
pub mod gaussian;
pub mod green;
pub mod grid;
mod linalg;
pub mod homodyne;
pub mod propagation;
pub mod spectral;
pub mod store;

pub use bloch_messiah::{
    decompose, squeezing_lengths, takagi_biphoton, time_reversal_check, verify_constraints, ConstraintReport,
    Residuals, ScalingReport, SchmidtDecomposition, SqueezerDecomposition, SqueezingLength,
};
pub use dispersion::{DispersionModel, Medium, Polarization, Sellmeier};
pub use error::{Error, Result};
pub use gaussian::{analytic_overlaps, gaussian_kernels, gaussian_mode, gaussian_zeta, lo_profile, GaussianModelParams};
pub use green::{Convergence, GreenPair, GreenSource, Picture};
pub use grid::{make_grid, FrequencyGrid};
pub use homodyne::{
    detected_quadratures, efficiency_sweep, homodyne, mode_quadratures, project_lo, quantum_efficiency, HomodyneResult,
};
pub use propagation::{
    compensate_linear_phase, pump_spectrum, solve_green_functions, MediumSpec, PumpPulse, SolverOptions, SpanPolicy,
};
pub use spectral::{hermite_mode, inner_product, KernelMatrix, SpectralAmplitude};
