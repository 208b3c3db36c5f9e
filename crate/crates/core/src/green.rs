use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gaussian::GaussianModelParams;
use crate::grid::FrequencyGrid;
use crate::propagation::{MediumSpec, PumpPulse};
use crate::spectral::KernelMatrix;

/// Reference planes of a [`GreenPair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Picture {
    /// Interaction picture: input at the crystal entrance, output at the exit
    /// with the linear propagation phase `exp(i k(omega) L)` removed.
    Raw,
    /// Input and output both referred to the crystal midpoint by free
    /// propagation.
    MidpointCompensated,
}

impl Picture {
    pub fn tag(self) -> &'static str {
        match self {
            Picture::Raw => "raw",
            Picture::MidpointCompensated => "midpoint-compensated",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "raw" => Some(Picture::Raw),
            "midpoint-compensated" => Some(Picture::MidpointCompensated),
            _ => None,
        }
    }
}

/// Step-halving diagnostics attached by the propagation solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub steps: usize,
    pub probe_columns: Vec<usize>,
    /// Largest change of a probed weighted entry between `steps` and
    /// `2 * steps`, relative to `max(1, largest probed entry)`.
    pub max_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GreenSource {
    Gaussian(GaussianModelParams),
    Propagation {
        medium: MediumSpec,
        pump: PumpPulse,
        convergence: Convergence,
    },
    Reconstructed,
    /// Read back from a container; carries the stored metadata text.
    Stored(String),
}

/// Bogoliubov kernels `C(omega, omega')`, `S(omega, omega')` of
/// `a_out(w) = int dw' [C(w, w') a_in(w') + S(w, w') a_in(w')^dagger]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenPair {
    pub c: KernelMatrix,
    pub s: KernelMatrix,
    pub picture: Picture,
    pub source: GreenSource,
}

impl GreenPair {
    pub fn new(c: KernelMatrix, s: KernelMatrix, picture: Picture, source: GreenSource) -> Result<Self> {
        c.grid().ensure_same(s.grid(), "C and S kernels")?;
        Ok(Self { c, s, picture, source })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.c.grid()
    }

    /// Identity `C`, zero `S`.
    pub fn vacuum(grid: FrequencyGrid) -> Self {
        Self {
            c: KernelMatrix::identity(grid),
            s: KernelMatrix::zeros(grid),
            picture: Picture::Raw,
            source: GreenSource::Reconstructed,
        }
    }
}
