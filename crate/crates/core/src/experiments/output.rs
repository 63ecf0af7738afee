//! Result files: CSV tables, gridded field arrays and JSON documents.
//!
//! Gridded arrays are CSV with `#`-prefixed `key: value` header lines
//! (`field`, `axes`, one `<axis>_range` per axis, `shape`, plus anything the
//! caller adds) followed by one row per leading index: a 2D `R x Z` slice has
//! `shape[0]` rows of `shape[1]` values, a 3D `R x Z x zeta` array has
//! `shape[0] * shape[1]` rows of `shape[2]` values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// Axis of a gridded array: `n` points from `lo` to `hi` inclusive, or
/// cell centres when `centred`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridAxis {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub centred: bool,
}

impl GridAxis {
    pub fn nodes(name: &'static str, lo: f64, hi: f64, n: usize) -> Self {
        Self {
            name,
            lo,
            hi,
            n,
            centred: false,
        }
    }

    pub fn centred(name: &'static str, lo: f64, hi: f64, n: usize) -> Self {
        Self {
            name,
            lo,
            hi,
            n,
            centred: true,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.n as f64;
        (0..self.n)
            .map(|i| {
                if self.centred {
                    self.lo + (i as f64 + 0.5) / n * (self.hi - self.lo)
                } else if self.n == 1 {
                    self.lo
                } else {
                    self.lo + i as f64 / (n - 1.0) * (self.hi - self.lo)
                }
            })
            .collect()
    }
}

/// Writes into one run directory and remembers what it wrote.
#[derive(Debug)]
pub struct Output {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl Output {
    /// `None` discards everything (used by tests that only want metrics).
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn path(&mut self, name: &str) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        self.written.push(name.to_owned());
        Some(dir.join(name))
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let Some(path) = self.path(name) else {
            return Ok(());
        };
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Gridded array over `axes` (2 or 3 of them), values with the last axis
    /// fastest.
    pub fn grid(&mut self, name: &str, field: &str, axes: &[GridAxis], extra: &[(&str, String)], values: &[f64]) -> Result<()> {
        let Some(path) = self.path(name) else {
            return Ok(());
        };
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "# field: {field}")?;
        let names: Vec<&str> = axes.iter().map(|a| a.name).collect();
        writeln!(f, "# axes: {}", names.join(","))?;
        for a in axes {
            let kind = if a.centred { "centred" } else { "nodes" };
            writeln!(f, "# {}_range: {},{},{kind}", a.name, a.lo, a.hi)?;
        }
        let shape: Vec<String> = axes.iter().map(|a| a.n.to_string()).collect();
        writeln!(f, "# shape: {}", shape.join(","))?;
        for (k, v) in extra {
            writeln!(f, "# {k}: {v}")?;
        }
        let row = axes.last().map_or(1, |a| a.n);
        for chunk in values.chunks(row) {
            let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", line.join(","))?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let Some(path) = self.path(name) else {
            return Ok(());
        };
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let Some(path) = self.path(name) else {
            return Ok(());
        };
        fs::write(path, text)?;
        Ok(())
    }

    /// Full path for a file written by someone else (e.g. MatrixMarket).
    pub fn external(&mut self, name: &str) -> Option<PathBuf> {
        self.path(name)
    }
}

/// Reads a gridded array back: header entries and values.
pub fn read_grid(path: &Path) -> Result<(Vec<(String, String)>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut header = Vec::new();
    let mut values = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix("# ") {
            if let Some((k, v)) = h.split_once(": ") {
                header.push((k.to_owned(), v.to_owned()));
            }
        } else if !line.is_empty() {
            for v in line.split(',') {
                values.push(
                    v.parse()
                        .map_err(|_| crate::error::Error::Config(format!("bad value `{v}` in {}", path.display())))?,
                );
            }
        }
    }
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Output::new(Some(dir.path())).unwrap();
        let axes = [GridAxis::nodes("R", 0.0, 2.0, 3), GridAxis::nodes("Z", -1.0, 1.5, 2)];
        let v = [0.5, -1.25, 3.0, 1e-300, 0.1, 7.0];
        out.grid("s.csv", "phi", &axes, &[("zeta", "0".into())], &v).unwrap();
        let (h, back) = read_grid(&dir.path().join("s.csv")).unwrap();
        assert_eq!(back, v);
        assert!(h.contains(&("shape".into(), "3,2".into())));
        assert!(h.contains(&("R_range".into(), "0,2,nodes".into())));
        assert_eq!(out.written(), ["s.csv"]);
    }

    #[test]
    fn axis_points() {
        assert_eq!(GridAxis::nodes("x", 0.0, 1.0, 3).points(), vec![0.0, 0.5, 1.0]);
        assert_eq!(GridAxis::centred("x", 0.0, 1.0, 2).points(), vec![0.25, 0.75]);
    }
}
