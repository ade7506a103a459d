//! Density tables on a time grid, with CSV and JSON serialization.
//!
//! CSV layout: `#`-prefixed `key=value` metadata lines, a `t,g_hat,flags`
//! header, then one row per grid point. Floats are written with 17
//! significant digits so they read back bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FptError, Result};

/// Evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    /// `points` equally spaced values from `t_min` to `t_max` inclusive.
    Range { t_min: f64, t_max: f64, points: usize },
    Explicit(Vec<f64>),
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        match self {
            GridSpec::Range { t_min, t_max, points } => {
                let (a, b, n) = (*t_min, *t_max, *points);
                if !(a > 0.0) || !b.is_finite() || !(b > a) {
                    return Err(FptError::domain(format!(
                        "grid needs 0 < t_min < t_max, got [{a}, {b}]"
                    )));
                }
                if n < 2 {
                    return Err(FptError::domain("grid needs at least 2 points"));
                }
                let h = (b - a) / (n - 1) as f64;
                Ok((0..n)
                    .map(|i| if i == n - 1 { b } else { a + h * i as f64 })
                    .collect())
            }
            GridSpec::Explicit(ts) => {
                if ts.is_empty() {
                    return Err(FptError::domain("grid is empty"));
                }
                if ts.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                    return Err(FptError::domain("grid points must be finite and > 0"));
                }
                if ts.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(FptError::domain("grid must be strictly increasing"));
                }
                Ok(ts.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PdfSource {
    Approximant,
    Simulation,
    Reference,
}

impl PdfSource {
    fn as_str(self) -> &'static str {
        match self {
            PdfSource::Approximant => "approximant",
            PdfSource::Simulation => "simulation",
            PdfSource::Reference => "reference",
        }
    }
}

impl FromStr for PdfSource {
    type Err = FptError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approximant" => Ok(PdfSource::Approximant),
            "simulation" => Ok(PdfSource::Simulation),
            "reference" => Ok(PdfSource::Reference),
            other => Err(FptError::Parse(format!("unknown table source '{other}'"))),
        }
    }
}

/// Per-row flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowFlag {
    Ok,
    /// Value is negative.
    Negative,
    /// Value was negative and has been set to zero.
    Clipped,
}

impl RowFlag {
    fn as_str(self) -> &'static str {
        match self {
            RowFlag::Ok => "ok",
            RowFlag::Negative => "negative",
            RowFlag::Clipped => "clipped",
        }
    }
}

impl FromStr for RowFlag {
    type Err = FptError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(RowFlag::Ok),
            "negative" => Ok(RowFlag::Negative),
            "clipped" => Ok(RowFlag::Clipped),
            other => Err(FptError::Parse(format!("unknown row flag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

/// A density sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfTable {
    pub source: PdfSource,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub flags: Vec<RowFlag>,
    pub negative_count: usize,
    pub clipped: bool,
    /// Whatever produced the table: fitted parameters, sample sizes, …
    pub params: BTreeMap<String, f64>,
    /// Path of the run manifest, if one was written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

impl PdfTable {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, source: PdfSource) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(FptError::domain(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.is_empty() {
            return Err(FptError::domain("empty table"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FptError::domain("table grid must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FptError::domain("table values must be finite"));
        }
        let flags: Vec<RowFlag> = values
            .iter()
            .map(|v| if *v < 0.0 { RowFlag::Negative } else { RowFlag::Ok })
            .collect();
        let negative_count = flags.iter().filter(|f| **f == RowFlag::Negative).count();
        Ok(PdfTable {
            source,
            grid,
            values,
            flags,
            negative_count,
            clipped: false,
            params: BTreeMap::new(),
            manifest: None,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Sets negative values to zero. `negative_count` keeps the original count.
    pub fn clip_negative(&mut self) {
        for (v, f) in self.values.iter_mut().zip(self.flags.iter_mut()) {
            if *v < 0.0 {
                *v = 0.0;
                *f = RowFlag::Clipped;
            }
        }
        self.clipped = true;
    }

    /// Linear interpolation; zero outside the grid.
    pub fn interpolate(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t < g[0] || t > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|x| *x <= t);
        if i == 0 {
            return self.values[0];
        }
        if i >= g.len() {
            return self.values[g.len() - 1];
        }
        let (t0, t1) = (g[i - 1], g[i]);
        let w = (t - t0) / (t1 - t0);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# source={}", self.source.as_str());
        let _ = writeln!(out, "# negative_count={}", self.negative_count);
        let _ = writeln!(out, "# clipped={}", self.clipped);
        for (k, v) in &self.params {
            let _ = writeln!(out, "# param.{k}={v:.16e}");
        }
        if let Some(m) = &self.manifest {
            let _ = writeln!(out, "# manifest={m}");
        }
        out.push_str("t,g_hat,flags\n");
        for ((t, v), f) in self.grid.iter().zip(&self.values).zip(&self.flags) {
            let _ = writeln!(out, "{t:.16e},{v:.16e},{}", f.as_str());
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut source = PdfSource::Approximant;
        let mut clipped = false;
        let mut params = BTreeMap::new();
        let mut manifest = None;
        let mut negative_count = None;
        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut flags = Vec::new();
        let mut seen_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| FptError::Parse(format!("line {}: {msg}", lineno + 1));
            if let Some(meta) = line.strip_prefix('#') {
                let Some((k, v)) = meta.trim().split_once('=') else {
                    continue;
                };
                let (k, v) = (k.trim(), v.trim());
                match k {
                    "source" => source = v.parse()?,
                    "clipped" => clipped = v.parse().map_err(|_| bad(format!("bad clipped '{v}'")))?,
                    "negative_count" => {
                        negative_count =
                            Some(v.parse().map_err(|_| bad(format!("bad negative_count '{v}'")))?)
                    }
                    "manifest" => manifest = Some(v.to_string()),
                    _ => {
                        if let Some(name) = k.strip_prefix("param.") {
                            let x: f64 = v.parse().map_err(|_| bad(format!("bad number '{v}'")))?;
                            params.insert(name.to_string(), x);
                        }
                    }
                }
                continue;
            }
            if !seen_header {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() < 2 || cols[0] != "t" || cols[1] != "g_hat" {
                    return Err(bad(format!("expected header 't,g_hat,flags', got '{line}'")));
                }
                seen_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() < 2 {
                return Err(bad(format!("expected at least 2 columns, got '{line}'")));
            }
            let t: f64 = cols[0].parse().map_err(|_| bad(format!("bad t '{}'", cols[0])))?;
            let v: f64 = cols[1].parse().map_err(|_| bad(format!("bad g_hat '{}'", cols[1])))?;
            let f = match cols.get(2) {
                Some(s) if !s.is_empty() => s.parse()?,
                _ if v < 0.0 => RowFlag::Negative,
                _ => RowFlag::Ok,
            };
            grid.push(t);
            values.push(v);
            flags.push(f);
        }
        if !seen_header {
            return Err(FptError::Parse("missing 't,g_hat,flags' header".into()));
        }
        let mut table = PdfTable::new(grid, values, source)?;
        table.flags = flags;
        table.clipped = clipped;
        if let Some(n) = negative_count {
            table.negative_count = n;
        }
        table.params = params;
        table.manifest = manifest;
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: PdfTable =
            serde_json::from_str(text).map_err(|e| FptError::Parse(format!("table JSON: {e}")))?;
        if table.grid.len() != table.values.len() || table.grid.len() != table.flags.len() {
            return Err(FptError::Parse("table JSON: array lengths differ".into()));
        }
        if table.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FptError::Parse("table JSON: grid not increasing".into()));
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path, format: TableFormat) -> Result<()> {
        let text = match format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Json => self.to_json(),
        };
        std::fs::write(path, text).map_err(|source| FptError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Reads a table, choosing the format from the extension.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| FptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        match TableFormat::from_path(path) {
            TableFormat::Csv => Self::from_csv(&text),
            TableFormat::Json => Self::from_json(&text),
        }
    }
}
