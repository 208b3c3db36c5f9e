//! Wavenumber models `k(omega)` in rad/mm for frequencies in rad/fs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in mm/fs.
pub const SPEED_OF_LIGHT: f64 = 2.99792458e-4;

const BUILTIN_DATASET: &str = include_str!("../data/dispersion.toml");

/// Vacuum wavelength in micrometres.
pub fn wavelength_um(omega: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / omega * 1e3
}

/// Angular frequency in rad/fs of a vacuum wavelength given in nanometres.
pub fn omega_from_nm(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (lambda_nm * 1e-6)
}

/// `n^2 = a + sum b / (lambda^2 - c) - ir * lambda^2`, lambda in micrometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sellmeier {
    pub a: f64,
    #[serde(default)]
    pub terms: Vec<[f64; 2]>,
    #[serde(default)]
    pub ir: f64,
}

impl Sellmeier {
    pub fn n_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        self.a + self.terms.iter().map(|[b, c]| b / (l2 - c)).sum::<f64>() - self.ir * l2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DispersionModel {
    Isotropic(Sellmeier),
    /// Uniaxial crystal; `theta` (rad) is the angle between the wave vector
    /// and the optic axis, used for the extraordinary polarization.
    Uniaxial {
        ordinary: Sellmeier,
        extraordinary: Sellmeier,
        polarization: Polarization,
        theta: f64,
    },
    /// `k(omega) = sum_j coefficients[j] (omega - omega_ref)^j / j!`, with
    /// coefficients in rad/mm, fs/mm, fs^2/mm, ...
    Taylor { omega_ref: f64, coefficients: Vec<f64> },
}

impl DispersionModel {
    pub fn refractive_index(&self, omega: f64) -> Option<f64> {
        let lambda = wavelength_um(omega);
        let n2 = match self {
            DispersionModel::Isotropic(s) => s.n_squared(lambda),
            DispersionModel::Uniaxial {
                ordinary,
                extraordinary,
                polarization,
                theta,
            } => {
                let no2 = ordinary.n_squared(lambda);
                match polarization {
                    Polarization::Ordinary => no2,
                    Polarization::Extraordinary => {
                        let ne2 = extraordinary.n_squared(lambda);
                        let (s, c) = theta.sin_cos();
                        1.0 / (c * c / no2 + s * s / ne2)
                    }
                }
            }
            DispersionModel::Taylor { .. } => return None,
        };
        Some(n2.sqrt())
    }

    pub fn k(&self, omega: f64) -> Result<f64> {
        let fail = |reason: String| Error::Dispersion { omega, reason };
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(fail("frequency must be positive".into()));
        }
        let k = match self {
            DispersionModel::Taylor { omega_ref, coefficients } => {
                let x = omega - omega_ref;
                let mut term = 1.0;
                let mut k = 0.0;
                for (j, c) in coefficients.iter().enumerate() {
                    if j > 0 {
                        term *= x / j as f64;
                    }
                    k += c * term;
                }
                k
            }
            _ => {
                let n = self.refractive_index(omega).unwrap();
                if !(n > 0.0) {
                    return Err(fail(format!(
                        "refractive index is not real at {:.4} um",
                        wavelength_um(omega)
                    )));
                }
                n * omega / SPEED_OF_LIGHT
            }
        };
        if k.is_finite() {
            Ok(k)
        } else {
            Err(fail("wavenumber is not finite".into()))
        }
    }

    pub fn k_many(&self, omegas: impl IntoIterator<Item = f64>) -> Result<Vec<f64>> {
        omegas.into_iter().map(|w| self.k(w)).collect()
    }

    /// Vanishing wavenumber, i.e. no linear propagation phase.
    pub fn none() -> Self {
        DispersionModel::Taylor {
            omega_ref: 0.0,
            coefficients: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    #[serde(default)]
    pub description: String,
    /// Wavelength range (um) over which the coefficients were fitted.
    #[serde(default)]
    pub valid_um: Option<[f64; 2]>,
    pub ordinary: Sellmeier,
    #[serde(default)]
    pub extraordinary: Option<Sellmeier>,
}

impl Medium {
    /// Collinear type-I geometry: signal and idler ordinary, pump
    /// extraordinary at `theta`.
    pub fn type_one(&self, theta: f64) -> Result<(DispersionModel, DispersionModel)> {
        let extraordinary = self
            .extraordinary
            .clone()
            .ok_or_else(|| Error::InvalidParameter("type-I geometry needs a uniaxial medium".into()))?;
        let uniaxial = |polarization| DispersionModel::Uniaxial {
            ordinary: self.ordinary.clone(),
            extraordinary: extraordinary.clone(),
            polarization,
            theta,
        };
        Ok((uniaxial(Polarization::Ordinary), uniaxial(Polarization::Extraordinary)))
    }

    /// Angle (rad) at which `k_p(omega_p) = 2 k(omega_p / 2)` in the type-I
    /// geometry.
    pub fn type_one_angle(&self, omega_p: f64) -> Result<f64> {
        let ext = self
            .extraordinary
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("type-I geometry needs a uniaxial medium".into()))?;
        let (lp, ls) = (wavelength_um(omega_p), wavelength_um(omega_p / 2.0));
        let inv_s = 1.0 / self.ordinary.n_squared(ls);
        let inv_o = 1.0 / self.ordinary.n_squared(lp);
        let inv_e = 1.0 / ext.n_squared(lp);
        let sin2 = (inv_s - inv_o) / (inv_e - inv_o);
        if !(0.0..=1.0).contains(&sin2) {
            return Err(Error::InvalidParameter(format!(
                "no type-I phase matching for a {:.1} nm pump",
                lp * 1e3
            )));
        }
        Ok(sin2.sqrt().asin())
    }

    pub fn check_range(&self, omegas: &[f64]) {
        if let Some([lo, hi]) = self.valid_um {
            for &w in omegas {
                let l = wavelength_um(w);
                if l < lo || l > hi {
                    log::warn!("{l:.4} um lies outside the fitted range [{lo}, {hi}] um of the dispersion data");
                    return;
                }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetUnits {
    wavelength: String,
    b: String,
    c: String,
    ir: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Dataset {
    units: DatasetUnits,
    media: BTreeMap<String, Medium>,
}

/// Parses a dispersion dataset (TOML text with a `[units]` table and media
/// under `[media.<name>]`).
pub fn parse_dataset(text: &str) -> Result<BTreeMap<String, Medium>> {
    let data: Dataset = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let u = &data.units;
    if (u.wavelength.as_str(), u.b.as_str(), u.c.as_str(), u.ir.as_str()) != ("um", "1", "um^2", "um^-2") {
        return Err(Error::Format(format!(
            "unsupported dataset units {u:?}; expected wavelength = \"um\", b = \"1\", c = \"um^2\", ir = \"um^-2\""
        )));
    }
    Ok(data.media)
}

pub fn builtin_media() -> BTreeMap<String, Medium> {
    parse_dataset(BUILTIN_DATASET).expect("bundled dispersion dataset is valid")
}

pub fn builtin_medium(name: &str) -> Result<Medium> {
    builtin_media()
        .remove(&name.to_ascii_lowercase())
        .ok_or_else(|| Error::InvalidParameter(format!("unknown medium `{name}`")))
}
