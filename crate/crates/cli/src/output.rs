//! Plot-ready CSV files with a commented provenance header.

use std::path::{Path, PathBuf};

use opa_core::store::write_atomic;

use crate::CliError;

pub const UNITS: &str = "omega rad/fs, time fs, length mm, kernels 1/(rad/fs), mode intensities 1/(rad/fs), noise variances in vacuum units of 1/4";

/// Collects output files in memory; nothing touches the disk until
/// [`Outputs::commit`], so a failing run leaves no partial results.
pub struct Outputs {
    dir: PathBuf,
    command: String,
    config_hash: String,
    files: Vec<(String, Vec<u8>)>,
    gnuplot: Vec<String>,
    notes: Vec<String>,
}

pub struct Table {
    pub name: String,
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn row(&mut self, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, config_hash: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            config_hash: config_hash.into(),
            files: Vec::new(),
            gnuplot: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Global header lines (warnings, input hashes) added to every file.
    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    fn header(&self) -> String {
        let mut h = format!(
            "# opa {} {}\n# config_sha256: {}\n# units: {}\n",
            self.command,
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            UNITS
        );
        for n in &self.notes {
            h.push_str(&format!("# {n}\n"));
        }
        h
    }

    pub fn add_table(&mut self, t: &Table) -> Result<(), CliError> {
        let mut body = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut body);
            w.write_record(&t.columns).map_err(csv_error)?;
            for r in &t.rows {
                w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_error)?;
            }
            w.flush()?;
        }
        let mut text = self.header();
        for c in &t.comments {
            text.push_str(&format!("# {c}\n"));
        }
        let mut bytes = text.into_bytes();
        bytes.extend_from_slice(&body);
        self.files.push((t.name.clone(), bytes));
        Ok(())
    }

    pub fn add_raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Records a gnuplot snippet plotting columns of a table.
    pub fn plot(&mut self, script: impl Into<String>) {
        self.gnuplot.push(script.into());
    }

    pub fn provenance(&self) -> String {
        format!(
            "opa {} {}; config_sha256 {}",
            self.command,
            env!("CARGO_PKG_VERSION"),
            self.config_hash
        )
    }

    pub fn commit(mut self, gnuplot: bool) -> Result<Vec<PathBuf>, CliError> {
        if gnuplot && !self.gnuplot.is_empty() {
            let mut script = self.header();
            script.push_str("set datafile separator ','\nset key autotitle columnhead\n");
            for s in &self.gnuplot {
                script.push_str(s);
                script.push('\n');
            }
            let name = format!("{}.gp", self.command);
            self.files.push((name, script.into_bytes()));
        }
        std::fs::create_dir_all(&self.dir)?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            write_atomic(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}
