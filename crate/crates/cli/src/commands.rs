use std::path::{Path, PathBuf};

use num_complex::Complex64;
use opa_core::bloch_messiah::SCALING_RANGE_LIMIT;
use opa_core::gaussian::gaussian_sinh_zeta;
use opa_core::homodyne::{gaussian_detection, master_laser_curve, squeezing_db};
use opa_core::propagation::signal_grid;
use opa_core::spectral::mode_basis_span;
use opa_core::store::{decode_green, encode_green};
use opa_core::{
    compensate_linear_phase, decompose, efficiency_sweep, gaussian_kernels, homodyne, make_grid, solve_green_functions,
    squeezing_lengths, time_reversal_check, verify_constraints, ConstraintReport, FrequencyGrid, GreenPair,
    GreenSource, SpectralAmplitude, SqueezerDecomposition,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LoadedConfig, RunConfig, Sweep};
use crate::output::{Outputs, Table};
use crate::CliError;

/// Constraint deviation accepted by `--verify`.
pub const VERIFY_LIMIT: f64 = 1e-6;
/// Mode defects above this are flagged in the decomposition output.
pub const DEFECT_FLAG: f64 = 1e-3;

const DEFAULT_R_PRIME_SWEEP: Sweep = Sweep {
    start: -2.0,
    stop: 2.0,
    points: 41,
};

pub struct Context {
    pub loaded: LoadedConfig,
    pub out: PathBuf,
    pub green: Option<PathBuf>,
    pub verify: bool,
}

impl Context {
    fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    fn outputs(&self, command: &str) -> Outputs {
        Outputs::new(&self.out, command, &self.loaded.hash)
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.loaded.base_dir.join(path)
        }
    }
}

/// Metadata stored alongside saved Green functions.
#[derive(Debug, Serialize, Deserialize)]
struct GreenMeta {
    provenance: String,
    config_sha256: String,
    strength: f64,
    length_mm: f64,
}

struct Solved {
    green: GreenPair,
    /// `L / L_NL` and crystal length (mm) when known.
    strength: Option<(f64, f64)>,
    hash: Option<String>,
}

fn solve(cfg: &RunConfig, strength: Option<f64>) -> Result<Solved, CliError> {
    let medium = match strength {
        Some(s) => cfg.medium_spec_for_strength(s)?,
        None => cfg.medium_spec()?,
    };
    let pump = cfg.pump_pulse()?;
    let grid = signal_grid(&medium, &pump, cfg.grid.n_points, cfg.span_policy())?;
    let raw = solve_green_functions(&medium, &pump, &grid, &cfg.solver_options())?;
    Ok(Solved {
        green: compensate_linear_phase(&raw)?,
        strength: Some((medium.strength(), medium.length)),
        hash: None,
    })
}

fn gaussian_grid(cfg: &RunConfig) -> Result<FrequencyGrid, CliError> {
    let p = cfg.gaussian_params()?;
    let n_modes = cfg.gaussian.as_ref().map_or(10, |g| g.n_modes);
    let span = cfg
        .grid
        .span_rad_per_fs
        .unwrap_or_else(|| mode_basis_span(p.tau_s(), n_modes));
    let grid = make_grid(p.omega_p / 2.0, span, cfg.grid.n_points)?;
    if grid.step() > 0.5 * p.delta {
        log::warn!(
            "grid step {:.3e} rad/fs does not resolve the model's narrow width delta = {:.3e} rad/fs; raise n_points",
            grid.step(),
            p.delta
        );
    }
    Ok(grid)
}

/// Green functions for commands that accept a saved file, a propagation
/// config, or (without a medium) the Gaussian model.
fn green_for(ctx: &Context) -> Result<Solved, CliError> {
    if let Some(path) = &ctx.green {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read Green functions `{}`: {e}", path.display())))?;
        let green = decode_green(&bytes).map_err(|e| CliError::Input(format!("`{}`: {e}", path.display())))?;
        let meta = match &green.source {
            GreenSource::Stored(text) => serde_json::from_str::<GreenMeta>(text).ok(),
            _ => None,
        };
        return Ok(Solved {
            strength: meta.as_ref().map(|m| (m.strength, m.length_mm)),
            hash: Some(opa_hash(&bytes)),
            green,
        });
    }
    let cfg = ctx.config();
    if cfg.medium.is_none() && cfg.gaussian.is_some() {
        let p = cfg.gaussian_params()?;
        return Ok(Solved {
            green: gaussian_kernels(&p, &gaussian_grid(cfg)?)?,
            strength: None,
            hash: None,
        });
    }
    solve(cfg, None)
}

fn opa_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

fn verify(label: &str, report: ConstraintReport) -> Result<(), CliError> {
    println!(
        "{label}: symmetry defect {:.3e}, unitarity defect {:.3e} (limit {VERIFY_LIMIT:.0e})",
        report.symmetry, report.unitarity
    );
    if report.max() > VERIFY_LIMIT {
        return Err(CliError::Numerical(format!(
            "{label}: Bogoliubov constraints violated by {:.3e}",
            report.max()
        )));
    }
    Ok(())
}

fn finish(ctx: &Context, outputs: Outputs) -> Result<(), CliError> {
    for path in outputs.commit(ctx.config().output.gnuplot)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn constraint_comments(t: &mut Table, r: &ConstraintReport) {
    t.comment(format!("symmetry_defect: {:e}", r.symmetry));
    t.comment(format!("unitarity_defect: {:e}", r.unitarity));
}

pub fn green(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config();
    let solved = solve(cfg, None)?;
    let g = &solved.green;
    let report = verify_constraints(g);
    if ctx.verify {
        return verify("green", report);
    }
    let (strength, length) = solved.strength.expect("propagation sets the strength");
    let grid = *g.grid();
    let mut out = ctx.outputs("green");

    let mut summary = Table::new(
        "green_summary.csv",
        &[
            "strength",
            "length_mm",
            "n_points",
            "span_rad_per_fs",
            "symmetry_defect",
            "unitarity_defect",
            "probe_change",
            "max_abs_c",
            "max_abs_s",
        ],
    );
    let probe_change = match &g.source {
        GreenSource::Propagation { convergence, .. } => convergence.max_change,
        _ => f64::NAN,
    };
    summary.comment(format!("picture: {}", g.picture.tag()));
    summary.row(vec![
        strength,
        length,
        grid.len() as f64,
        grid.span(),
        report.symmetry,
        report.unitarity,
        probe_change,
        g.c.max_abs(),
        g.s.max_abs(),
    ]);
    out.add_table(&summary)?;

    for (name, kernel) in [("c_abs.csv", &g.c), ("s_abs.csv", &g.s)] {
        let peak = kernel.max_abs();
        let mut t = Table::new(name, &["omega_rad_per_fs", "omega_prime_rad_per_fs", "abs"]);
        t.comment(format!(
            "contour_levels: 0.2, 0.4, 0.6 of max = {}, {}, {}",
            0.2 * peak,
            0.4 * peak,
            0.6 * peak
        ));
        let m = kernel.entries();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                t.row(vec![grid.omega(i), grid.omega(j), m[(i, j)].norm()]);
            }
        }
        out.add_table(&t)?;
        out.plot(format!(
            "set title '{name}'\nset contour base\nset cntrparam levels discrete {}, {}, {}\nsplot '{name}' using 1:2:3 with lines",
            0.2 * peak,
            0.4 * peak,
            0.6 * peak
        ));
    }

    let meta = GreenMeta {
        provenance: out.provenance(),
        config_sha256: ctx.loaded.hash.clone(),
        strength,
        length_mm: length,
    };
    let meta = serde_json::to_string(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    out.add_raw("green.bin", encode_green(g, &meta));
    println!(
        "L/L_NL = {strength}: symmetry defect {:.3e}, unitarity defect {:.3e}",
        report.symmetry, report.unitarity
    );
    finish(ctx, out)
}

fn mode_parity(mode: &SpectralAmplitude) -> (f64, f64) {
    let even = mode.parity_defect(1.0);
    let odd = mode.parity_defect(-1.0);
    let peak = mode.values().iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if even <= odd {
        (1.0, even / peak)
    } else {
        (-1.0, odd / peak)
    }
}

pub fn decompose_cmd(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config();
    let solved = green_for(ctx)?;
    if ctx.verify {
        return verify("decompose", verify_constraints(&solved.green));
    }
    let d = decompose(&solved.green, cfg.analysis.n_modes, cfg.analysis.cluster_tol)?;
    let mut out = ctx.outputs("decompose");
    if let Some(h) = &solved.hash {
        out.note(format!("green_sha256: {h}"));
    }
    let model = match (&solved.green.source, ctx.green.is_none()) {
        (GreenSource::Gaussian(p), true) => Some(*p),
        _ => None,
    };
    let reversal = time_reversal_check(&d);
    let compensated = d.picture == opa_core::Picture::MidpointCompensated;

    let mut columns = vec![
        "n",
        "zeta",
        "sinh2_zeta",
        "squeezing_db",
        "antisqueezing_db",
        "parity",
        "parity_defect",
        "time_reversal_defect",
    ];
    if solved.strength.is_some() {
        columns.push("lambda_mm");
    }
    if model.is_some() {
        columns.push("zeta_model");
    }
    let mut t = Table::new("modes.csv", &columns);
    if let Some(r) = &d.constraints {
        constraint_comments(&mut t, r);
    }
    t.comment(format!("residual_c: {:e}", d.residuals.c));
    t.comment(format!("residual_s: {:e}", d.residuals.s));
    t.comment(format!("picture: {}", d.picture.tag()));
    if let Some((s, l)) = solved.strength {
        t.comment(format!("strength: {s}"));
        t.comment(format!("length_mm: {l}"));
    }
    for (n, z) in d.zetas.iter().enumerate() {
        let (parity, defect) = mode_parity(&d.output_modes[n]);
        if defect > DEFECT_FLAG {
            t.comment(format!("flag: mode {n} parity defect {defect:.3e}"));
            log::warn!("mode {n} departs from definite parity by {defect:.3e}");
        }
        if compensated && reversal[n] > DEFECT_FLAG {
            t.comment(format!("flag: mode {n} time-reversal defect {:.3e}", reversal[n]));
            log::warn!("mode {n}: input and output modes are not time reverses ({:.3e})", reversal[n]);
        }
        let mut row = vec![
            n as f64,
            *z,
            z.sinh().powi(2),
            squeezing_db(0.25 * (-2.0 * z).exp()),
            -squeezing_db(0.25 * (2.0 * z).exp()),
            parity,
            defect,
            reversal[n],
        ];
        if let Some((s, l)) = solved.strength {
            // zeta = Lambda / L_NL
            row.push(if s > 0.0 { z * l / s } else { f64::NAN });
        }
        if let Some(p) = &model {
            row.push(gaussian_sinh_zeta(p, n).asinh());
        }
        t.row(row);
    }
    out.add_table(&t)?;

    let mut cols: Vec<String> = vec!["omega_rad_per_fs".into()];
    cols.extend((0..d.len()).map(|n| format!("psi{n}_intensity")));
    cols.extend((0..d.len()).map(|n| format!("phi{n}_intensity")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut profiles = Table::new("profiles.csv", &col_refs);
    let psi: Vec<Vec<f64>> = d.output_modes.iter().map(|m| m.intensity()).collect();
    let phi: Vec<Vec<f64>> = d.input_modes.iter().map(|m| m.intensity()).collect();
    for (i, w) in d.grid().omegas().enumerate() {
        let mut row = vec![w];
        row.extend(psi.iter().map(|v| v[i]));
        row.extend(phi.iter().map(|v| v[i]));
        profiles.row(row);
    }
    out.add_table(&profiles)?;
    out.plot(format!(
        "set title 'output mode intensities'\nplot for [k=2:{}] 'profiles.csv' using 1:k with lines",
        1 + d.len().min(4)
    ));
    finish(ctx, out)
}

pub fn scaling(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config();
    let sc = cfg
        .scaling
        .as_ref()
        .ok_or_else(|| CliError::Input("this command needs a [scaling] section".into()))?;
    let (used, excluded): (Vec<f64>, Vec<f64>) = sc.strengths.iter().partition(|s| **s <= SCALING_RANGE_LIMIT);
    if let Some(s) = used.iter().find(|s| !(**s > 0.0)) {
        return Err(CliError::Input(format!("scaling strengths must be positive, got {s}")));
    }
    let mut distinct = used.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(CliError::Input(format!(
            "scaling needs at least 3 distinct strengths up to L/L_NL = {SCALING_RANGE_LIMIT}, got {:?}",
            used
        )));
    }
    if !excluded.is_empty() {
        log::warn!(
            "strengths {excluded:?} exceed L/L_NL = {SCALING_RANGE_LIMIT}, where the scaling law is not asserted; they are left out of the fit"
        );
    }
    let n_modes = sc.n_modes.max(1);
    let solved: Vec<Solved> = distinct
        .par_iter()
        .map(|s| solve(cfg, Some(*s)))
        .collect::<Result<_, _>>()?;
    if ctx.verify {
        for (s, g) in distinct.iter().zip(&solved) {
            verify(&format!("L/L_NL = {s}"), verify_constraints(&g.green))?;
        }
        return Ok(());
    }
    let decomps: Vec<SqueezerDecomposition> = solved
        .par_iter()
        .map(|g| decompose(&g.green, n_modes.max(cfg.analysis.n_modes), cfg.analysis.cluster_tol))
        .collect::<Result<_, _>>()?;
    let inputs: Vec<(f64, &SqueezerDecomposition)> = distinct.iter().copied().zip(&decomps).collect();
    let length = cfg.medium()?.length_mm;
    let report = squeezing_lengths(&inputs, length, n_modes)?;

    let mut out = ctx.outputs("scaling");
    if !excluded.is_empty() {
        out.note(format!(
            "warning: strengths {excluded:?} above {SCALING_RANGE_LIMIT} excluded from the fit"
        ));
    }
    let mut cols: Vec<String> = vec!["n".into(), "lambda_mm".into(), "spread".into()];
    cols.extend(report.strengths.iter().map(|s| format!("zeta_lnl_mm_at_{s}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("scaling.csv", &col_refs);
    let decreasing = report.modes.windows(2).all(|w| w[1].lambda < w[0].lambda);
    t.comment(format!("scaling_holds: {}", report.scaling_holds));
    t.comment(format!("lambda_strictly_decreasing: {decreasing}"));
    for m in &report.modes {
        let mut row = vec![m.mode as f64, m.lambda, m.spread];
        row.extend(&m.samples);
        t.row(row);
    }
    out.add_table(&t)?;

    let mut zt = Table::new("zetas.csv", &["strength", "n", "zeta"]);
    for (s, d) in &inputs {
        for (n, z) in d.zetas.iter().enumerate() {
            zt.row(vec![*s, n as f64, *z]);
        }
    }
    out.add_table(&zt)?;
    out.plot("set title 'squeezing lengths'\nplot 'scaling.csv' using 1:2 with linespoints");
    println!(
        "scaling law {} (max spread {:.2}%)",
        if report.scaling_holds { "holds" } else { "violated" },
        100.0 * report.modes.iter().map(|m| m.spread).fold(0.0, f64::max)
    );
    finish(ctx, out)
}

fn lo_from_file(path: &Path, grid: &FrequencyGrid) -> Result<SpectralAmplitude, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read LO file `{}`: {e}", path.display())))?;
    let mut omegas = Vec::new();
    let mut values = Vec::new();
    for record in reader.deserialize::<(f64, f64, f64)>() {
        let (w, re, im) = record.map_err(|e| CliError::Input(format!("LO file `{}`: {e}", path.display())))?;
        omegas.push(w);
        values.push(Complex64::new(re, im));
    }
    let tol = 1e-9 * grid.step();
    let matches = omegas.len() == grid.len() && omegas.iter().zip(grid.omegas()).all(|(a, b)| (a - b).abs() <= tol);
    if !matches {
        return Err(CliError::Input(format!(
            "LO file `{}` is not sampled on the signal grid ({} points from {} to {} rad/fs)",
            path.display(),
            grid.len(),
            grid.first(),
            grid.last()
        )));
    }
    Ok(SpectralAmplitude::new(*grid, values)?.normalized()?)
}

fn gaussian_lo(grid: &FrequencyGrid, center: f64, delta_lo: f64) -> Result<SpectralAmplitude, CliError> {
    if !(delta_lo > 0.0 && delta_lo.is_finite()) {
        return Err(CliError::Input(format!("delta_lo_rad_per_fs must be positive, got {delta_lo}")));
    }
    let lo = SpectralAmplitude::from_fn(*grid, |w| {
        let x = (w - center) / delta_lo;
        Complex64::new((-x * x).exp(), 0.0)
    });
    Ok(lo.normalized()?)
}

fn efficiency_table(name: &str, cfg: &RunConfig, sweep: Sweep) -> Result<Table, CliError> {
    let p = cfg.gaussian_params()?;
    let points = efficiency_sweep(&p, &sweep.values(), None);
    let mut t = Table::new(
        name,
        &["r_prime", "delta_lo_rad_per_fs", "q_plus", "q_minus", "eta", "terms", "truncation"],
    );
    t.comment(format!("r: {}", p.r()));
    t.comment(format!("tau_s_fs: {}", p.tau_s()));
    t.comment(format!("photon_number: {}", p.photon_number));
    for s in points {
        t.row(vec![s.r_prime, s.delta_lo, s.q_plus, s.q_minus, s.eta, s.terms as f64, s.truncation]);
    }
    Ok(t)
}

fn master_laser_table(cfg: &RunConfig, sweep: Sweep) -> Result<Table, CliError> {
    let g = cfg.gaussian.as_ref().expect("checked by caller");
    let omega_p = cfg.gaussian_params()?.omega_p;
    let curve = master_laser_curve(omega_p, g.r_sweep_photon_number, &sweep.values(), None)?;
    let mut t = Table::new("master_laser.csv", &["r", "eta"]);
    t.comment("local oscillator with the pump bandwidth: r_prime = -r");
    t.comment(format!("photon_number: {}", g.r_sweep_photon_number));
    for (r, eta) in curve {
        t.row(vec![r, eta]);
    }
    Ok(t)
}

fn analytic_outputs(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = ctx.config();
    let g = cfg.gaussian.as_ref().expect("checked by caller");
    let sweep = g.r_prime_sweep.unwrap_or(DEFAULT_R_PRIME_SWEEP);
    out.add_table(&efficiency_table("efficiency.csv", cfg, sweep)?)?;
    out.plot("set title 'quantum efficiency'\nplot 'efficiency.csv' using 1:5 with lines");
    if let Some(rs) = g.r_sweep {
        out.add_table(&master_laser_table(cfg, rs)?)?;
        out.plot("set title 'pump-bandwidth LO'\nplot 'master_laser.csv' using 1:2 with lines");
    }
    Ok(())
}

pub fn homodyne_cmd(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config();
    let numerical = cfg.analysis.lo.is_some() || cfg.medium.is_some() || ctx.green.is_some();
    if !numerical {
        if cfg.gaussian.is_none() {
            return Err(CliError::Input(
                "homodyne needs a [gaussian] section or an [analysis.lo] with Green functions".into(),
            ));
        }
        if ctx.verify {
            let p = cfg.gaussian_params()?;
            return verify("gaussian", verify_constraints(&gaussian_kernels(&p, &gaussian_grid(cfg)?)?));
        }
        let mut out = ctx.outputs("homodyne");
        analytic_outputs(ctx, &mut out)?;
        return finish(ctx, out);
    }

    let lo_cfg = cfg
        .analysis
        .lo
        .as_ref()
        .ok_or_else(|| CliError::Input("numerical homodyne needs an [analysis.lo] section".into()))?;
    let solved = green_for(ctx)?;
    if ctx.verify {
        return verify("homodyne", verify_constraints(&solved.green));
    }
    let grid = *solved.green.grid();
    let lo = match (&lo_cfg.file, lo_cfg.delta_lo_rad_per_fs) {
        (Some(f), None) => lo_from_file(&ctx.resolve(f), &grid)?,
        (None, Some(dl)) => gaussian_lo(&grid, grid.center(), dl)?,
        _ => unreachable!("validated"),
    };
    let d = decompose(&solved.green, cfg.analysis.n_modes, cfg.analysis.cluster_tol)?;
    let r = homodyne(&lo, &d, lo_cfg.aligned)?;

    let mut out = ctx.outputs("homodyne");
    if let Some(h) = &solved.hash {
        out.note(format!("green_sha256: {h}"));
    }
    let mut t = Table::new(
        "homodyne.csv",
        &[
            "q_plus",
            "q_minus",
            "eta",
            "unmatched_fraction",
            "squeezing_db",
            "antisqueezing_db",
        ],
    );
    t.comment(format!("aligned: {}", lo_cfg.aligned));
    if let Some(dl) = lo_cfg.delta_lo_rad_per_fs {
        t.comment(format!("delta_lo_rad_per_fs: {dl}"));
    }
    t.row(vec![r.q_plus, r.q_minus, r.eta, r.unmatched_fraction, r.squeezing_db, r.antisqueezing_db]);
    out.add_table(&t)?;
    let mut ov = Table::new("overlaps.csv", &["n", "zeta", "re", "im", "abs"]);
    for (n, (c, z)) in r.overlaps.iter().zip(&d.zetas).enumerate() {
        ov.row(vec![n as f64, *z, c.re, c.im, c.norm()]);
    }
    out.add_table(&ov)?;
    println!("eta = {:.6}, squeezing {:.3} dB", r.eta, r.squeezing_db);
    finish(ctx, out)
}

pub fn gaussian(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config();
    let p = cfg.gaussian_params()?;
    if ctx.verify {
        return verify("gaussian", verify_constraints(&gaussian_kernels(&p, &gaussian_grid(cfg)?)?));
    }
    let n_modes = cfg.gaussian.as_ref().map_or(10, |g| g.n_modes);
    let mut out = ctx.outputs("gaussian");
    let mut t = Table::new("gaussian_modes.csv", &["n", "zeta", "sinh2_zeta", "squeezing_db"]);
    t.comment(format!("r: {}", p.r()));
    t.comment(format!("tau_s_fs: {}", p.tau_s()));
    t.comment(format!("delta_rad_per_fs: {}", p.delta));
    t.comment(format!("big_delta_rad_per_fs: {}", p.big_delta));
    t.comment(format!("photon_number: {}", p.photon_number));
    if let Some(w) = p.validity_warning() {
        t.comment(format!("warning: {w}"));
    }
    for n in 0..n_modes {
        let z = gaussian_sinh_zeta(&p, n).asinh();
        t.row(vec![n as f64, z, z.sinh().powi(2), squeezing_db(0.25 * (-2.0 * z).exp())]);
    }
    out.add_table(&t)?;
    analytic_outputs(ctx, &mut out)?;
    // r' = 0 is the LO matched to the leading mode
    let matched = gaussian_detection(&p, 0.0, None);
    println!("eta at r' = 0: {:.6}", matched.eta);
    finish(ctx, out)
}
