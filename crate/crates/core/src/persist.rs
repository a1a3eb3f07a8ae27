//! Shared text-format helpers and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, ScatterError};

/// Write `bytes` to `path` by writing a sibling temporary file and renaming
/// it over the target, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| ScatterError::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// 17 significant digits; round-trips every finite `f64` exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_complex(v: Complex64) -> String {
    format!("{} {}", fmt_f64(v.re), fmt_f64(v.im))
}

pub fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| ScatterError::Format(format!("cannot parse {what} from {s:?}")))
}

pub fn parse_complex(line: &str) -> Result<Complex64> {
    let mut it = line.split_whitespace();
    let (re, im) = match (it.next(), it.next(), it.next()) {
        (Some(re), Some(im), None) => (re, im),
        _ => {
            return Err(ScatterError::Format(format!(
                "expected two numbers per entry line, got {line:?}"
            )))
        }
    };
    Ok(Complex64::new(parse_f64(re, "real part")?, parse_f64(im, "imaginary part")?))
}

/// `key value` header lines, in order.
pub struct HeaderReader<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
}

impl<'a> HeaderReader<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().peekable(),
        }
    }

    fn next_content(&mut self) -> Option<&'a str> {
        loop {
            let line = self.lines.next()?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some(t);
        }
    }

    pub fn expect_magic(&mut self, magic: &str) -> Result<()> {
        match self.lines.next() {
            Some(l) if l.trim() == magic => Ok(()),
            other => Err(ScatterError::Format(format!(
                "expected first line {magic:?}, got {other:?}"
            ))),
        }
    }

    pub fn value(&mut self, key: &str) -> Result<&'a str> {
        let line = self
            .next_content()
            .ok_or_else(|| ScatterError::Format(format!("missing header key {key}")))?;
        let (k, v) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        if k != key {
            return Err(ScatterError::Format(format!(
                "expected header key {key}, found {k}"
            )));
        }
        Ok(v.trim())
    }

    pub fn f64(&mut self, key: &str) -> Result<f64> {
        let v = self.value(key)?;
        parse_f64(v, key)
    }

    pub fn usize(&mut self, key: &str) -> Result<usize> {
        let v = self.value(key)?;
        v.parse()
            .map_err(|_| ScatterError::Format(format!("cannot parse {key} from {v:?}")))
    }

    /// Remaining non-empty lines.
    pub fn rest(self) -> impl Iterator<Item = &'a str> {
        self.lines.map(str::trim).filter(|l| !l.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0, -0.0] {
            let back = parse_f64(&fmt_f64(v), "v").unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
