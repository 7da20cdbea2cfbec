//! File helpers shared by every artifact writer.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `bytes` to `path` atomically: a temporary file in the same
/// directory is written, flushed and renamed over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

/// Formats `v` as a plain decimal with `digits` significant digits.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{}", if v == 0.0 { 0.0 } else { v });
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can carry into a new leading digit (9.99.. -> 10.0); one more
    // pass at the new magnitude keeps the digit count exact.
    let reparsed: f64 = s.parse().unwrap_or(v);
    let m2 = reparsed.abs().log10().floor() as i64;
    if m2 != magnitude && reparsed != 0.0 {
        let decimals = (digits as i64 - 1 - m2).max(0) as usize;
        return format!("{v:.decimals$}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0, 9), "0");
        assert_eq!(fmt_sig(123.456789012, 9), "123.456789");
        assert_eq!(fmt_sig(0.000123456789012, 9), "0.000123456789");
        assert_eq!(fmt_sig(499.99999999, 9), "500.000000");
        assert_eq!(fmt_sig(-2.5, 9), "-2.50000000");
    }

    #[test]
    fn sig_formatting_is_idempotent() {
        for v in [1.0 / 3.0, 499.123456789123, 1e-7 * 7.123456789, 250.0, 0.5] {
            let once: f64 = fmt_sig(v, 9).parse().unwrap();
            let twice: f64 = fmt_sig(once, 9).parse().unwrap();
            assert_eq!(once.to_bits(), twice.to_bits());
        }
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
    }
}
