//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits nonzero if any fails.
//!
//! Run with `cargo test -p opa-core --test acceptance`.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use opa_core::bloch_messiah::DEFAULT_CLUSTER_TOL;
use opa_core::dispersion::{builtin_medium, omega_from_nm};
use opa_core::gaussian::gaussian_sinh_zeta;
use opa_core::homodyne::{efficiency_sweep, master_laser_curve, mode_quadratures};
use opa_core::spectral::mode_basis_span;
use opa_core::*;

const LENGTH_MM: f64 = 1.0;
const TAU_P_FS: f64 = 26.0;
const PUMP_NM: f64 = 400.0;
const N_POINTS: usize = 256;
const SPAN: f64 = 2.0;
const STEPS: usize = 200;
const N_MODES: usize = 12;

struct Solved {
    raw: GreenPair,
    decomposition: SqueezerDecomposition,
    seconds: f64,
}

#[derive(Default)]
struct Cache {
    solved: BTreeMap<String, Solved>,
}

fn medium(strength: f64) -> MediumSpec {
    let bbo = builtin_medium("bbo").unwrap();
    let wp = omega_from_nm(PUMP_NM);
    let (signal, pump) = bbo.type_one(bbo.type_one_angle(wp).unwrap()).unwrap();
    MediumSpec {
        length: LENGTH_MM,
        nonlinear_length: LENGTH_MM / strength,
        signal,
        pump,
    }
}

fn pump(chirp: f64) -> PumpPulse {
    PumpPulse::new(omega_from_nm(PUMP_NM), TAU_P_FS).unwrap().with_chirp(chirp)
}

fn grid() -> FrequencyGrid {
    make_grid(omega_from_nm(PUMP_NM) / 2.0, SPAN, N_POINTS).unwrap()
}

impl Cache {
    fn get(&mut self, strength: f64, chirp: f64) -> &Solved {
        let key = format!("{strength}/{chirp}");
        self.solved.entry(key).or_insert_with(|| {
            let start = Instant::now();
            let opts = SolverOptions {
                steps: STEPS,
                ..Default::default()
            };
            let raw = solve_green_functions(&medium(strength), &pump(chirp), &grid(), &opts).unwrap();
            let seconds = start.elapsed().as_secs_f64();
            let compensated = compensate_linear_phase(&raw).unwrap();
            let decomposition = decompose(&compensated, N_MODES, DEFAULT_CLUSTER_TOL).unwrap();
            println!("    (L/L_NL = {strength}, chirp = {chirp} fs^2: solved in {seconds:.1} s)");
            Solved {
                raw,
                decomposition,
                seconds,
            }
        })
    }
}

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian_plateau(_: &mut Cache) -> Outcome {
    let start = Instant::now();
    let p = GaussianModelParams::from_r(omega_from_nm(PUMP_NM), 3.0, 10.0, 0.01).unwrap();
    let points = efficiency_sweep(&p, &[-2.0, -1.0, 0.0, 1.0, 2.0], None);
    let seconds = start.elapsed().as_secs_f64();
    let worst = points.iter().map(|p| p.eta).fold(f64::INFINITY, f64::min);
    check(
        worst > 0.99 && seconds < 1.0,
        format!("min eta over r' in {{-2..2}} = {worst:.5}, {seconds:.3} s"),
    )
}

fn master_laser_asymptote(_: &mut Cache) -> Outcome {
    let start = Instant::now();
    let rs: Vec<f64> = (1..=24).map(|i| 0.25 * i as f64).collect();
    let curve = master_laser_curve(omega_from_nm(PUMP_NM), 1e-12, &rs, None).map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    let last = curve.last().unwrap().1;
    let decreasing = curve.windows(2).all(|w| w[1].1 < w[0].1) && curve[0].1 < 1.0;
    check(
        (last - 0.86).abs() <= 0.02 && decreasing && seconds < 5.0,
        format!(
            "eta(0.25) = {:.5}, eta(6) = {last:.6}, strictly decreasing: {decreasing}, {seconds:.2} s",
            curve[0].1
        ),
    )
}

fn overlap_oracle(_: &mut Cache) -> Outcome {
    let p = GaussianModelParams::from_r(omega_from_nm(PUMP_NM), 1.0, 10.0, 0.01).unwrap();
    let grid = make_grid(p.omega_p / 2.0, 140.0 / p.tau_s(), 4096).map_err(|e| e.to_string())?;
    let modes: Vec<_> = (0..=20).map(|n| gaussian_mode(&p, n, &grid).unwrap()).collect();
    let (mut even, mut odd) = (0.0f64, 0.0f64);
    for r_prime in [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0] {
        let delta_lo = p.delta_lo_for(r_prime);
        let lo = lo_profile(&p, delta_lo, &grid).unwrap();
        let analytic = analytic_overlaps(&p, delta_lo, 10);
        for (n, mode) in modes.iter().enumerate() {
            let numeric = inner_product(mode, &lo).unwrap();
            if n % 2 == 0 {
                even = even.max((numeric - analytic.coefficients[n]).norm());
            } else {
                odd = odd.max(numeric.norm());
            }
        }
    }
    check(
        even < 1e-6 && odd < 1e-10,
        format!("max |M_2m - quadrature| = {even:.2e}, max |M_odd| = {odd:.2e}"),
    )
}

fn photon_number_sum_rule(_: &mut Cache) -> Outcome {
    let mut closed = 0.0f64;
    for r in [0.3, 1.0, 2.0] {
        let p = GaussianModelParams::from_r(omega_from_nm(PUMP_NM), r, 10.0, 0.01).unwrap();
        let sum: f64 = (0..20000).map(|n| gaussian_sinh_zeta(&p, n).powi(2)).sum();
        closed = closed.max((sum - 0.01).abs());
    }
    let p = GaussianModelParams::from_r(omega_from_nm(PUMP_NM), 1.0, 10.0, 0.01).unwrap();
    let grid = make_grid(p.omega_p / 2.0, mode_basis_span(p.tau_s(), 20), 256).unwrap();
    let s = gaussian_kernels(&p, &grid).unwrap().s;
    let discrete = (s.double_integral_sqr() - 0.01).abs() / 0.01;
    check(
        closed < 1e-10 && discrete < 0.01,
        format!("|sum sinh^2 - N| = {closed:.1e}, discrete double integral off by {:.3}%", 100.0 * discrete),
    )
}

fn constraint_suite(cache: &mut Cache) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for strength in [0.1, 1.0, 10.0] {
        let s = cache.get(strength, 0.0);
        let r = verify_constraints(&s.raw);
        ok &= r.symmetry < 1e-6 && r.unitarity < 1e-6 && s.seconds < 300.0;
        lines.push(format!("{strength}: {:.1e}/{:.1e} in {:.0} s", r.symmetry, r.unitarity, s.seconds));
    }
    check(ok, lines.join(", "))
}

fn born_oracle(cache: &mut Cache) -> Outcome {
    let strength = 0.1;
    let m = medium(strength);
    let p = pump(0.0);
    let g = grid();
    let n = g.len();
    // first-order perturbation theory in the interaction picture
    let k: Vec<f64> = g.omegas().map(|w| m.signal.k(w).unwrap()).collect();
    let born = |i: usize, j: usize| {
        let sum = g.omega(i) + g.omega(j);
        let kp = m.pump.k(sum).unwrap();
        let dk = kp - k[i] - k[j];
        let x = dk * m.length / 2.0;
        let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
        let ep = TAU_P_FS / (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * (TAU_P_FS * (sum - p.omega_p)).powi(2)).exp();
        Complex64::from_polar(ep * m.length * sinc / m.nonlinear_length, -kp * m.length / 2.0 + x)
    };
    let s = cache.get(strength, 0.0).raw.s.entries().clone();
    let (mut err, mut peak) = (0.0f64, 0.0f64);
    for j in 0..n {
        for i in 0..n {
            let b = born(i, j);
            err = err.max((s[(i, j)] - b).norm());
            peak = peak.max(b.norm());
        }
    }
    check(err / peak < 0.02, format!("relative max-entry error {:.2e}", err / peak))
}

fn round_trip(cache: &mut Cache) -> Outcome {
    let d = &cache.get(10.0, 0.0).decomposition;
    let again = decompose(&d.reconstruct().unwrap(), N_MODES, DEFAULT_CLUSTER_TOL).map_err(|e| e.to_string())?;
    let drift = d.zetas.iter().zip(&again.zetas).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(
        d.residuals.c < 1e-5 && d.residuals.s < 1e-5 && drift < 1e-8,
        format!(
            "residuals C {:.1e}, S {:.1e}; zeta drift on re-decomposition {drift:.1e}",
            d.residuals.c, d.residuals.s
        ),
    )
}

fn gaussian_oracle(_: &mut Cache) -> Outcome {
    let p = GaussianModelParams::from_r(omega_from_nm(PUMP_NM), 1.0, 10.0, 0.01).unwrap();
    let grid = make_grid(p.omega_p / 2.0, mode_basis_span(p.tau_s(), 10), 256).unwrap();
    let d = decompose(&gaussian_kernels(&p, &grid).unwrap(), 8, DEFAULT_CLUSTER_TOL).map_err(|e| e.to_string())?;
    let (mut dz, mut overlap) = (0.0f64, 1.0f64);
    for n in 0..=5 {
        dz = dz.max((d.zetas[n] - gaussian_zeta(&p, n)).abs());
        let h = gaussian_mode(&p, n, &grid).unwrap();
        overlap = overlap.min(inner_product(&h, &d.output_modes[n]).unwrap().norm());
        overlap = overlap.min(inner_product(&h, &d.input_modes[n]).unwrap().norm());
    }
    check(
        dz < 1e-4 && overlap > 0.999,
        format!("max |zeta - closed form| = {dz:.1e}, min Hermite overlap = {overlap:.6}"),
    )
}

fn scaling_law(cache: &mut Cache) -> Outcome {
    let strengths = [0.5, 5.0, 15.0];
    for s in strengths {
        cache.get(s, 0.0);
    }
    let inputs: Vec<(f64, &SqueezerDecomposition)> = strengths
        .iter()
        .map(|&s| (s, &cache.solved[&format!("{s}/0")].decomposition))
        .collect();
    let report = squeezing_lengths(&inputs, LENGTH_MM, 5).map_err(|e| e.to_string())?;
    let spread = report.modes.iter().map(|m| m.spread).fold(0.0, f64::max);
    let lambdas: Vec<f64> = report.modes.iter().map(|m| m.lambda).collect();
    let decreasing = lambdas.windows(2).all(|w| w[1] < w[0]);
    check(
        spread < 0.05 && decreasing,
        format!(
            "max spread {:.2}%, Lambda_0..4 = [{}] mm",
            100.0 * spread,
            lambdas.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn time_reversal(cache: &mut Cache) -> Outcome {
    let flat = time_reversal_check(&cache.get(1.0, 0.0).decomposition);
    let chirped = time_reversal_check(&cache.get(1.0, 2000.0).decomposition);
    let worst_flat = flat[..=5].iter().copied().fold(0.0, f64::max);
    let worst_chirped = chirped[..=5].iter().copied().fold(0.0, f64::max);
    check(
        worst_flat < 1e-3 && worst_chirped >= 10.0 * worst_flat,
        format!("flat pump max defect {worst_flat:.1e}, chirped pump {worst_chirped:.1e}"),
    )
}

fn efficiency_inversion(_: &mut Cache) -> Outcome {
    let mut worst = 0.0f64;
    for eta0 in [0.1, 0.5, 0.9] {
        for zeta in [0.5, 1.0, 2.0] {
            let (a, b) = mode_quadratures(zeta);
            let q_plus = eta0 * a + (1.0 - eta0) * 0.25;
            let q_minus = eta0 * b + (1.0 - eta0) * 0.25;
            let eta = quantum_efficiency(q_plus, q_minus).map_err(|e| e.to_string())?;
            worst = worst.max((eta - eta0).abs());
        }
    }
    check(worst < 1e-10, format!("max |eta - eta0| = {worst:.1e}"))
}

fn profile_stability(cache: &mut Cache) -> Outcome {
    let weak = cache.get(0.1, 0.0).decomposition.output_modes[0].intensity();
    let strong = cache.get(1.0, 0.0).decomposition.output_modes[0].intensity();
    let peak = weak.iter().copied().fold(0.0, f64::max);
    let diff = weak.iter().zip(&strong).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(diff < 0.05 * peak, format!("max |d|psi_0|^2| = {:.2}% of peak", 100.0 * diff / peak))
}

fn main() {
    let criteria: [(&str, fn(&mut Cache) -> Outcome); 12] = [
        ("1 Gaussian efficiency plateau (r = 3)", gaussian_plateau),
        ("2 master-laser asymptote", master_laser_asymptote),
        ("3 overlap formula vs quadrature", overlap_oracle),
        ("4 photon-number sum rule", photon_number_sum_rule),
        ("5 Bogoliubov constraints of solver output", constraint_suite),
        ("6 first-order Born kernel", born_oracle),
        ("7 Bloch-Messiah round trip", round_trip),
        ("8 Gaussian-model decomposition", gaussian_oracle),
        ("9 squeezing-length scaling", scaling_law),
        ("10 time reversal of mode pairs", time_reversal),
        ("11 efficiency of a loss channel", efficiency_inversion),
        ("12 mode-profile stability", profile_stability),
    ];
    let mut cache = Cache::default();
    let mut failed = 0;
    for (name, run) in criteria {
        match run(&mut cache) {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
