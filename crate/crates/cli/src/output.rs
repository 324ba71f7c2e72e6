//! Deterministic output plumbing: config hashes, atomic writes, CSV
//! formatting and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 over the command name, every input file and every option that
/// changes the numbers; rendered as the first 16 hex digits.
#[derive(Clone)]
pub struct ConfigHash {
    hasher: Sha256,
}

impl ConfigHash {
    pub fn new(command: &str) -> Self {
        let mut h = ConfigHash { hasher: Sha256::new() };
        h.update("command", command.as_bytes());
        h
    }

    /// Length-prefixed, so distinct field sequences cannot collide.
    pub fn update(&mut self, label: &str, bytes: &[u8]) {
        for part in [label.as_bytes(), bytes] {
            self.hasher.update((part.len() as u64).to_le_bytes());
            self.hasher.update(part);
        }
    }

    pub fn option(&mut self, label: &str, value: impl std::fmt::Debug) {
        self.update(label, format!("{value:?}").as_bytes());
    }

    pub fn merge(&mut self, other: &ConfigHash) {
        let digest = other.hex();
        self.update("merged", digest.as_bytes());
    }

    pub fn hex(&self) -> String {
        let digest = self.hasher.clone().finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Write via a temporary file in the target directory and rename over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Validation(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::Validation(format!("cannot write {}: {e}", path.display())));
    }
    Ok(())
}

/// Write to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("output serializes");
    bytes.push(b'\n');
    bytes
}

pub fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub fn csv_finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner()
        .map_err(|e| CliError::Validation(format!("csv: {}", e.error())))
}

/// Shortest round-trip decimal; exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Decimal scientific notation of `e^{ln_x}`, valid far below the `f64`
/// range.
pub fn sci_from_ln(ln_x: f64) -> String {
    if !ln_x.is_finite() {
        return if ln_x == f64::NEG_INFINITY { "0".into() } else { "inf".into() };
    }
    let log10 = ln_x / std::f64::consts::LN_10;
    let mut exponent = log10.floor();
    let mut mantissa = 10f64.powf(log10 - exponent);
    if format!("{mantissa:.12}").starts_with("10") {
        mantissa /= 10.0;
        exponent += 1.0;
    }
    format!("{mantissa:.12}e{}", exponent as i64)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_paths: Vec<String>,
    pub output_paths: Vec<String>,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub config_hash: String,
    pub wall_clock_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let mut a = ConfigHash::new("gke");
        a.update("config", b"{}");
        let mut b = ConfigHash::new("gke");
        b.update("config", b"{}");
        assert_eq!(a.hex(), b.hex());
        assert_eq!(a.hex().len(), 16);
        b.option("stencil", 16);
        assert_ne!(a.hex(), b.hex());
        let mut c = ConfigHash::new("gke");
        c.update("confi", b"g{}");
        assert_ne!(a.hex(), c.hex());
    }

    #[test]
    fn scientific_from_log() {
        assert_eq!(sci_from_ln(0.0), "1.000000000000e0");
        assert_eq!(sci_from_ln(-(10f64.ln())), "1.000000000000e-1");
        let s = sci_from_ln(-16384.0);
        assert!(s.ends_with("e-7116"), "{s}");
        assert_eq!(sci_from_ln(f64::NEG_INFINITY), "0");
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(3.5e-12), "3.5e-12");
        assert_eq!(num(-2e20), "-2e20");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(30.0), "30");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
