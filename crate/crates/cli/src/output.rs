//! Deterministic CSV output: a `#` metadata block, a header, then rows with
//! floats in `{:.16e}` (17 significant digits).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// File-name friendly timestep, e.g. `0.05`.
pub fn tau_tag(tau: f64) -> String {
    format!("{tau}")
}

pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, metadata: &[(&str, String)]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        let mut w = CsvWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        for (key, value) in metadata {
            w.line(&format!("# {key}: {value}"))?;
        }
        Ok(w)
    }

    pub fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.out, "{text}").map_err(|e| CliError::Io(format!("write to {}: {e}", self.path.display())))
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<(), CliError> {
        let joined = fields.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(",");
        self.line(&joined)
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.out
            .flush()
            .map_err(|e| CliError::Io(format!("write to {}: {e}", self.path.display())))?;
        Ok(self.path)
    }
}

/// Standard metadata block shared by every CSV.
pub fn metadata(kind: &str, scheme: &str, tau: Option<f64>, potential: &str, hash: &str) -> Vec<(&'static str, String)> {
    let mut m = vec![("symsplit", kind.to_string()), ("scheme", scheme.to_string())];
    if let Some(t) = tau {
        m.push(("tau", float(t)));
    }
    m.push(("potential", potential.to_string()));
    m.push(("version", env!("CARGO_PKG_VERSION").to_string()));
    m.push(("config_hash", hash.to_string()));
    m
}

/// `q0..q{n-1}` then `p0..p{n-1}`.
pub fn state_columns(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).chain((0..n).map(|i| format!("p{i}"))).collect()
}
