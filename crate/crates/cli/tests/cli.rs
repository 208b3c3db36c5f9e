use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BBO: &str = r#"
[medium]
dataset = "bbo"
length_mm = 1.0

[pump]
wavelength_nm = 400.0
duration_fs = 26.0
strength = STRENGTH

[grid]
n_points = 48
span_rad_per_fs = 2.0

[analysis]
n_modes = 4
"#;

fn bbo(strength: f64) -> String {
    BBO.replace("STRENGTH", &strength.to_string())
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn opa(&self, args: &[&str]) -> Output {
        let config = self.dir.path().join("run.toml");
        let out = self.out();
        Command::new(env!("CARGO_BIN_EXE_opa"))
            .args(args)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--threads", "2"])
            .output()
            .unwrap()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV written by the CLI, skipping comments and the column header.
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn header_value(text: &str, key: &str) -> Option<String> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(&format!("{key}: ")).map(str::to_string))
}

#[test]
fn green_reference_run_meets_constraints() {
    let run = Run::new(&bbo(1.0));
    let o = run.opa(&["green"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = run.read("green_summary.csv");
    let cols: Vec<&str> = summary.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
    let row = &rows(&summary)[0];
    let col = |name: &str| row[cols.iter().position(|c| *c == name).unwrap()];
    assert!(col("symmetry_defect") < 1e-6 && col("unitarity_defect") < 1e-6);
    assert_eq!(header_value(&summary, "picture").as_deref(), Some("midpoint-compensated"));
    let s = run.read("s_abs.csv");
    assert!(header_value(&s, "contour_levels").unwrap().starts_with("0.2, 0.4, 0.6 of max"));
    assert_eq!(rows(&s).len(), 48 * 48);
    assert!(run.out().join("green.bin").exists());
}

#[test]
fn zero_pump_gives_vanishing_s() {
    let run = Run::new(&bbo(0.0));
    let o = run.opa(&["green"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(rows(&run.read("s_abs.csv")).iter().all(|r| r[2] == 0.0));
    let g = opa_core::store::load_green(&run.out().join("green.bin")).unwrap();
    assert!(g.s.entries().iter().all(|v| v.re == 0.0 && v.im == 0.0));
}

#[test]
fn unit_less_key_is_rejected_without_output() {
    let run = Run::new(&bbo(1.0).replace("length_mm", "length"));
    let o = run.opa(&["green"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("length"));
    assert!(!run.out().exists());
}

#[test]
fn strength_and_nonlinear_length_are_exclusive() {
    let run = Run::new(&bbo(1.0).replace("strength = 1", "strength = 1\nnonlinear_length_mm = 1.0"));
    assert_eq!(code(&run.opa(&["green"])), 2);
    assert!(!run.out().exists());
}

#[test]
fn zero_modes_is_an_error() {
    let run = Run::new(&bbo(1.0).replace("n_modes = 4", "n_modes = 0"));
    let o = run.opa(&["decompose"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_modes"));
    assert!(!run.out().exists());
}

#[test]
fn decompose_from_saved_green_functions() {
    let run = Run::new(&bbo(1.0));
    assert_eq!(code(&run.opa(&["green"])), 0);
    let green = run.out().join("green.bin");
    let o = run.opa(&["decompose", "--green", green.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let modes = run.read("modes.csv");
    assert!(header_value(&modes, "green_sha256").is_some());
    let table = rows(&modes);
    assert_eq!(table.len(), 4);
    for w in table.windows(2) {
        assert!(w[1][1] <= w[0][1]);
    }
    // flat pump: each output mode is the time reverse of its input mode
    assert!(table.iter().all(|r| r[7] < 1e-6));
    // lambda = zeta L_NL with L_NL = 1 mm
    assert!(table.iter().all(|r| (r[8] - r[1]).abs() < 1e-12));
    let residual: f64 = header_value(&modes, "residual_c").unwrap().parse().unwrap();
    assert!(residual < 1e-5);
}

#[test]
fn gaussian_config_decomposition_matches_closed_form() {
    let config = "[gaussian]\npump_wavelength_nm = 400.0\nphoton_number = 0.01\nr = 1.0\ntau_s_fs = 10.0\n\n[grid]\nn_points = 160\n\n[analysis]\nn_modes = 6\n";
    let run = Run::new(config);
    let o = run.opa(&["decompose"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = rows(&run.read("modes.csv"));
    for r in &table {
        // zeta column against the model column
        assert!((r[1] - r[8]).abs() < 1e-4, "{r:?}");
        assert!(r[6] < 1e-8, "parity defect {r:?}");
    }
}

#[test]
fn scaling_needs_three_strengths() {
    let run = Run::new(&format!("{}\n[scaling]\nstrengths = [1.0]\n", bbo(1.0)));
    let o = run.opa(&["scaling"]);
    assert_eq!(code(&o), 2);
    assert!(!run.out().exists());
}

#[test]
fn scaling_excludes_strengths_beyond_the_validated_range() {
    let config = format!("{}\n[scaling]\nstrengths = [0.5, 1.0, 2.0, 30.0]\nn_modes = 3\n", bbo(1.0));
    let run = Run::new(&config);
    let o = run.opa(&["scaling"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("[30.0]"));
    let text = run.read("scaling.csv");
    assert!(text.contains("# warning: strengths [30.0]"));
    let columns = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(!columns.contains("_at_30"));
    let table = rows(&text);
    assert_eq!(table.len(), 3);
    for r in &table {
        assert!(r[2] < 0.05, "spread {r:?}");
    }
}

#[test]
fn gaussian_efficiency_curves() {
    let config = "[gaussian]\npump_wavelength_nm = 400.0\nphoton_number = 0.01\nr = 3.0\ntau_s_fs = 20.0\nr_prime_sweep = { start = -1.9, stop = 1.9, points = 39 }\nr_sweep = { start = 0.25, stop = 6.0, points = 24 }\n";
    let run = Run::new(config);
    let o = run.opa(&["homodyne"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(rows(&run.read("efficiency.csv")).iter().all(|r| r[4] > 0.99));
    let curve = rows(&run.read("master_laser.csv"));
    assert!((curve.last().unwrap()[1] - 0.86).abs() < 0.02);
    assert!(curve.windows(2).all(|w| w[1][1] < w[0][1]));
}

fn write_lo(path: &Path, omegas: impl Iterator<Item = f64>) {
    let mut text = String::from("omega_rad_per_fs,re,im\n");
    for w in omegas {
        let x: f64 = (w - 2.354) / 0.05;
        text.push_str(&format!("{w},{},0\n", (-x * x).exp()));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn lo_file_on_the_wrong_grid_is_rejected() {
    let config = format!("{}\n[analysis.lo]\nfile = \"lo.csv\"\naligned = false\n", bbo(1.0));
    let run = Run::new(&config);
    assert_eq!(code(&run.opa(&["green"])), 0);
    let green = run.out().join("green.bin");
    let g = opa_core::store::load_green(&green).unwrap();
    let grid = *g.grid();

    write_lo(&run.dir.path().join("lo.csv"), (0..40).map(|i| grid.omega(i)));
    let o = run.opa(&["homodyne", "--green", green.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("signal grid"));

    write_lo(&run.dir.path().join("lo.csv"), grid.omegas());
    let o = run.opa(&["homodyne", "--green", green.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = &rows(&run.read("homodyne.csv"))[0];
    assert!(r[2] > 0.0 && r[2] <= 1.0);
}

#[test]
fn phase_alignment_failure_is_a_numerical_error() {
    let config = format!("{}\n[analysis.lo]\ndelta_lo_rad_per_fs = 0.05\n", bbo(1.0));
    let run = Run::new(&config);
    let o = run.opa(&["homodyne"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("common phase"));
    assert!(!run.out().exists());
}

#[test]
fn verify_reports_without_writing() {
    let run = Run::new(&bbo(1.0));
    let o = run.opa(&["green", "--verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("unitarity defect"));
    assert!(!run.out().exists());
}

#[test]
fn outputs_are_deterministic() {
    let run = Run::new(&bbo(1.0));
    let read_all = |run: &Run| {
        ["green_summary.csv", "c_abs.csv", "s_abs.csv", "green.bin"]
            .map(|f| fs::read(run.out().join(f)).unwrap())
    };
    assert_eq!(code(&run.opa(&["green"])), 0);
    let first = read_all(&run);
    assert_eq!(code(&run.opa(&["green"])), 0);
    assert_eq!(first, read_all(&run));
    let hash = header_value(&String::from_utf8_lossy(&first[0]), "config_sha256").unwrap();
    assert_eq!(hash.len(), 64);
}
