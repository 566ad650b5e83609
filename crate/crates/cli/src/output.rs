//! Deterministic file output: float formatting at full round-trip
//! precision, a minimal CSV builder, and atomic writes (temp + rename) so
//! concurrent sweep items never expose partial files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;

use crate::config::{runtime, Failure};

/// 17 significant digits; round-trips every finite f64 and never depends
/// on the locale. Infinities and NaN format as `inf` / `NaN`.
pub fn fmt_float(x: f64) -> String {
    format!("{:.16e}", x)
}

/// CSV accumulator. Cells are numbers or plain tokens, never quoted; the
/// writer asserts the column count instead.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Csv { buf, columns: header.len() }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let mut n = 0;
        for (i, cell) in cells.into_iter().enumerate() {
            debug_assert!(!cell.contains(',') && !cell.contains('\n'), "cell needs quoting");
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{cell}");
            n += 1;
        }
        debug_assert_eq!(n, self.columns, "row width");
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

/// Writes via a sibling temp file and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let attempt = || -> anyhow::Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let name = path
            .file_name()
            .ok_or_else(|| anyhow::anyhow!("no file name in {}", path.display()))?;
        let tmp = path.with_file_name(format!(
            ".{}.tmp-{}",
            name.to_string_lossy(),
            std::process::id()
        ));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    };
    attempt()
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .context("serializing JSON sidecar")
        .map_err(runtime)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
