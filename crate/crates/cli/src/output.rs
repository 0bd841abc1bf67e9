//! File output: CSV tables with 12 significant digits, JSON documents and the
//! separate timing record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use imex_tvd::metrics::fmt12;
use serde::Serialize;

/// Column-oriented CSV builder with LF line endings.
pub struct Csv {
    text: String,
    width: usize,
}

pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")), width: header.len() }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.width);
        let parts: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::Num(v) => fmt12(v),
                Cell::Int(v) => v.to_string(),
                Cell::Text(s) => s,
                Cell::Empty => String::new(),
            })
            .collect();
        self.text.push_str(&parts.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Collects artifacts of one command under an output directory.
pub struct Artifacts {
    dir: PathBuf,
    timings: BTreeMap<String, f64>,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), timings: BTreeMap::new(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: &Csv) -> Result<()> {
        self.text(name, csv.as_str())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    /// Runs `f` and records its wall time under `label`.
    pub fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.timings.insert(label.to_string(), t0.elapsed().as_secs_f64());
        out
    }

    /// Writes `timing.json` and lists the artifacts on stdout.
    pub fn finish(mut self) -> Result<()> {
        if !self.timings.is_empty() {
            let t = std::mem::take(&mut self.timings);
            let mut body = serde_json::to_string_pretty(&t)?;
            body.push('\n');
            std::fs::write(self.dir.join("timing.json"), body)?;
        }
        for p in &self.written {
            println!("wrote {}", p.display());
        }
        Ok(())
    }
}

/// File-name-safe form of a scheme name.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}
