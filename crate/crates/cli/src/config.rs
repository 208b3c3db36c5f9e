//! Run configuration. Every physical quantity is spelled with its unit in the
//! key name; unknown keys are rejected.

use std::path::{Path, PathBuf};

use opa_core::dispersion::{builtin_medium, omega_from_nm};
use opa_core::{GaussianModelParams, Medium, MediumSpec, PumpPulse, Sellmeier, SolverOptions, SpanPolicy};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub medium: Option<MediumConfig>,
    pub pump: Option<PumpConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub scaling: Option<ScalingConfig>,
    pub gaussian: Option<GaussianConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    /// Name of a bundled dispersion dataset entry.
    pub dataset: Option<String>,
    pub inline: Option<InlineMedium>,
    pub length_mm: f64,
    /// Pump polarization angle to the optic axis; defaults to the type-I
    /// phase-matching angle at the pump wavelength.
    pub theta_deg: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineMedium {
    /// Must be "um": the Sellmeier coefficients take the wavelength in micrometres.
    pub wavelength_unit: String,
    pub valid_um: Option<[f64; 2]>,
    pub ordinary: Sellmeier,
    pub extraordinary: Option<Sellmeier>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    pub wavelength_nm: f64,
    pub duration_fs: f64,
    #[serde(default)]
    pub chirp_fs2: f64,
    /// `L / L_NL`; zero switches the pump off.
    pub strength: Option<f64>,
    pub nonlinear_length_mm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub span_rad_per_fs: Option<f64>,
    pub auto_span: Option<AutoSpan>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 256,
            span_rad_per_fs: None,
            auto_span: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoSpan {
    pub initial_rad_per_fs: f64,
    pub max_rad_per_fs: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub steps: usize,
    pub convergence_tol: f64,
    pub probe_columns: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            steps: d.steps,
            convergence_tol: d.convergence_tol,
            probe_columns: d.probe_columns,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub n_modes: usize,
    pub cluster_tol: f64,
    pub lo: Option<LoConfig>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            n_modes: 12,
            cluster_tol: opa_core::bloch_messiah::DEFAULT_CLUSTER_TOL,
            lo: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoConfig {
    /// Gaussian LO `exp(-x^2 / delta_lo^2)` centered at half the pump frequency.
    pub delta_lo_rad_per_fs: Option<f64>,
    /// CSV with columns `omega_rad_per_fs,re,im` sampled on the signal grid.
    pub file: Option<PathBuf>,
    /// Require the overlaps to share one phase, so that a single LO phase
    /// detects the squeezed quadrature of every mode; `false` skips the check.
    #[serde(default = "yes")]
    pub aligned: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub strengths: Vec<f64>,
    #[serde(default = "five")]
    pub n_modes: usize,
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub pump_wavelength_nm: f64,
    pub photon_number: f64,
    pub delta_rad_per_fs: Option<f64>,
    pub big_delta_rad_per_fs: Option<f64>,
    pub r: Option<f64>,
    pub tau_s_fs: Option<f64>,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default)]
    pub r_prime_sweep: Option<Sweep>,
    /// `r` values of the pump-bandwidth LO curve (`r' = -r`).
    #[serde(default)]
    pub r_sweep: Option<Sweep>,
    /// Photon number used for the pump-bandwidth LO curve.
    #[serde(default = "tiny_photon_number")]
    pub r_sweep_photon_number: f64,
}

fn default_modes() -> usize {
    10
}

fn tiny_photon_number() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub threads: Option<usize>,
    /// Also write gnuplot scripts next to the CSV files.
    pub gnuplot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            threads: None,
            gnuplot: false,
        }
    }
}

/// Parsed configuration together with the SHA-256 of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config `{}`: {e}", path.display())))?;
    let mut loaded = parse(&text)?;
    loaded.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(loaded)
}

pub fn parse(text: &str) -> Result<LoadedConfig, CliError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(LoadedConfig {
        config,
        hash: hex::encode(Sha256::digest(text.as_bytes())),
        base_dir: PathBuf::new(),
    })
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        if let Some(m) = &self.medium {
            if m.dataset.is_some() == m.inline.is_some() {
                return Err(bad("[medium] needs exactly one of `dataset` or `inline`"));
            }
            if let Some(i) = &m.inline {
                if i.wavelength_unit != "um" {
                    return Err(bad(format!(
                        "[medium.inline] wavelength_unit must be \"um\", got \"{}\"",
                        i.wavelength_unit
                    )));
                }
            }
        }
        if let Some(p) = &self.pump {
            if p.strength.is_some() == p.nonlinear_length_mm.is_some() {
                return Err(bad("[pump] needs exactly one of `strength` or `nonlinear_length_mm`"));
            }
        }
        if self.grid.span_rad_per_fs.is_some() && self.grid.auto_span.is_some() {
            return Err(bad("[grid] takes either `span_rad_per_fs` or `auto_span`, not both"));
        }
        if let Some(lo) = &self.analysis.lo {
            if lo.delta_lo_rad_per_fs.is_some() == lo.file.is_some() {
                return Err(bad("[analysis.lo] needs exactly one of `delta_lo_rad_per_fs` or `file`"));
            }
        }
        if let Some(g) = &self.gaussian {
            let widths = g.delta_rad_per_fs.is_some() && g.big_delta_rad_per_fs.is_some();
            let shape = g.r.is_some() && g.tau_s_fs.is_some();
            let any_width = g.delta_rad_per_fs.is_some() || g.big_delta_rad_per_fs.is_some();
            let any_shape = g.r.is_some() || g.tau_s_fs.is_some();
            if !((widths && !any_shape) || (shape && !any_width)) {
                return Err(bad(
                    "[gaussian] needs either `delta_rad_per_fs` + `big_delta_rad_per_fs` or `r` + `tau_s_fs`",
                ));
            }
        }
        if self.output.threads == Some(0) {
            return Err(bad("[output] threads must be at least 1"));
        }
        Ok(())
    }

    pub fn medium(&self) -> Result<&MediumConfig, CliError> {
        self.medium.as_ref().ok_or_else(|| bad("this command needs a [medium] section"))
    }

    pub fn pump(&self) -> Result<&PumpConfig, CliError> {
        self.pump.as_ref().ok_or_else(|| bad("this command needs a [pump] section"))
    }

    pub fn omega_p(&self) -> Result<f64, CliError> {
        Ok(omega_from_nm(self.pump()?.wavelength_nm))
    }

    pub fn pump_pulse(&self) -> Result<PumpPulse, CliError> {
        let p = self.pump()?;
        Ok(PumpPulse::new(omega_from_nm(p.wavelength_nm), p.duration_fs)?.with_chirp(p.chirp_fs2))
    }

    /// Medium with the configured pump strength.
    pub fn medium_spec(&self) -> Result<MediumSpec, CliError> {
        let p = self.pump()?;
        let length = self.medium()?.length_mm;
        let nonlinear_length = match (p.strength, p.nonlinear_length_mm) {
            (Some(s), None) => strength_to_length(s, length)?,
            (None, Some(l)) => l,
            _ => unreachable!("validated"),
        };
        self.medium_spec_with(nonlinear_length)
    }

    pub fn medium_spec_for_strength(&self, strength: f64) -> Result<MediumSpec, CliError> {
        let length = self.medium()?.length_mm;
        self.medium_spec_with(strength_to_length(strength, length)?)
    }

    fn medium_spec_with(&self, nonlinear_length: f64) -> Result<MediumSpec, CliError> {
        let m = self.medium()?;
        let data = match (&m.dataset, &m.inline) {
            (Some(name), None) => builtin_medium(name)?,
            (None, Some(i)) => Medium {
                description: "inline".into(),
                valid_um: i.valid_um,
                ordinary: i.ordinary.clone(),
                extraordinary: i.extraordinary.clone(),
            },
            _ => unreachable!("validated"),
        };
        let theta = match m.theta_deg {
            Some(deg) => deg.to_radians(),
            None => data.type_one_angle(self.omega_p()?)?,
        };
        let (signal, pump) = data.type_one(theta)?;
        let spec = MediumSpec {
            length: m.length_mm,
            nonlinear_length,
            signal,
            pump,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn span_policy(&self) -> SpanPolicy {
        match (&self.grid.span_rad_per_fs, &self.grid.auto_span) {
            (_, Some(a)) => SpanPolicy::Auto {
                initial: a.initial_rad_per_fs,
                max: a.max_rad_per_fs,
            },
            (Some(span), None) => SpanPolicy::Fixed(*span),
            (None, None) => SpanPolicy::Fixed(DEFAULT_SPAN),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            steps: self.solver.steps,
            convergence_tol: self.solver.convergence_tol,
            probe_columns: self.solver.probe_columns,
        }
    }

    pub fn gaussian_params(&self) -> Result<GaussianModelParams, CliError> {
        let g = self.gaussian.as_ref().ok_or_else(|| bad("this command needs a [gaussian] section"))?;
        let omega_p = omega_from_nm(g.pump_wavelength_nm);
        let p = match (g.delta_rad_per_fs, g.big_delta_rad_per_fs, g.r, g.tau_s_fs) {
            (Some(d), Some(bd), None, None) => GaussianModelParams::new(omega_p, d, bd, g.photon_number)?,
            (None, None, Some(r), Some(tau)) => GaussianModelParams::from_r(omega_p, r, tau, g.photon_number)?,
            _ => unreachable!("validated"),
        };
        Ok(p)
    }
}

/// Default signal span (rad/fs) for the 400 nm BBO reference setup.
pub const DEFAULT_SPAN: f64 = 2.0;

fn strength_to_length(strength: f64, length: f64) -> Result<f64, CliError> {
    if strength == 0.0 {
        Ok(f64::INFINITY)
    } else if strength > 0.0 && strength.is_finite() {
        Ok(length / strength)
    } else {
        Err(bad(format!("pump strength must be non-negative, got {strength}")))
    }
}
