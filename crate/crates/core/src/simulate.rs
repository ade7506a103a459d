//! Milstein Monte Carlo for first-passage times, empirical densities and
//! comparison against an approximant.
//!
//! Every path draws from its own ChaCha8 stream, keyed by `(seed, path)`, so
//! a sample is a pure function of the configuration whatever the number of
//! worker threads.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FptError, Result};
use crate::feller::{fpt_mean_variance_closed, FellerParams, SeriesControl};
use crate::table::{GridSpec, PdfSource, PdfTable};

/// Fraction of censored paths above which a sample carries a warning.
pub const CENSORING_WARNING: f64 = 0.5;
/// Minimum number of uncensored times for a density estimate.
pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Histogram,
    GaussianKde,
}

impl FromStr for Estimator {
    type Err = FptError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "histogram" => Ok(Estimator::Histogram),
            "kde" | "gaussian-kde" => Ok(Estimator::GaussianKde),
            other => Err(FptError::Parse(format!(
                "unknown estimator '{other}' (expected histogram or gaussian-kde)"
            ))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Histogram => "histogram",
            Estimator::GaussianKde => "gaussian-kde",
        })
    }
}

/// Smoothing rule: bin width for histograms, kernel width for the KDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Silverman's rule for the KDE, Freedman–Diaconis for histograms.
    Silverman,
    Fixed(f64),
}

impl FromStr for Bandwidth {
    type Err = FptError;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("silverman") {
            return Ok(Bandwidth::Silverman);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
            _ => Err(FptError::Parse(format!(
                "bandwidth must be 'silverman' or a positive number, got '{s}'"
            ))),
        }
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bandwidth::Silverman => f.write_str("silverman"),
            Bandwidth::Fixed(h) => write!(f, "{h}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    /// Censoring horizon; `None` means `20 · E[T]`.
    pub t_max: Option<f64>,
    pub seed: u64,
    pub estimator: Estimator,
    pub bandwidth: Bandwidth,
    /// Worker threads; `None` uses rayon's default pool.
    pub workers: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-2,
            n_paths: 10_000,
            t_max: None,
            seed: 0,
            estimator: Estimator::GaussianKde,
            bandwidth: Bandwidth::Silverman,
            workers: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(FptError::domain(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(FptError::domain("n_paths must be >= 1"));
        }
        if let Some(t) = self.t_max {
            if !(t > self.dt) || !t.is_finite() {
                return Err(FptError::domain(format!("t_max must exceed dt, got {t}")));
            }
        }
        if self.workers == Some(0) {
            return Err(FptError::domain("workers must be >= 1"));
        }
        Ok(())
    }

    /// The horizon actually used for `p`.
    pub fn resolve_t_max(&self, p: &FellerParams) -> Result<f64> {
        match self.t_max {
            Some(t) => Ok(t),
            None => {
                let (c1, _) = fpt_mean_variance_closed(p, &SeriesControl::default())?;
                let t = 20.0 * c1;
                if !(t > self.dt) {
                    return Err(FptError::domain(format!(
                        "default horizon 20·E[T] = {t} does not exceed dt"
                    )));
                }
                Ok(t)
            }
        }
    }
}

/// One step of the Milstein scheme without any domain handling. The square
/// root is taken of `max(y − c, 0)`.
fn milstein_raw(y: f64, p: &FellerParams, dt: f64, dw: f64) -> f64 {
    let q = p.sigma * p.sigma;
    y + (-p.tau * y + p.mu) * dt + p.sigma * (y - p.c).max(0.0).sqrt() * dw + 0.25 * q * (dw * dw - dt)
}

/// `Y_{n} = Y + (−τY + μ)Δt + σ√(Y − c) ΔW + ¼σ²(ΔW² − Δt)`, reflected at
/// `c` when the step lands below it.
pub fn milstein_step(y: f64, p: &FellerParams, dt: f64, dw: f64) -> f64 {
    reflect(milstein_raw(y, p, dt, dw), p.c).0
}

fn reflect(y: f64, c: f64) -> (f64, bool) {
    if y < c {
        (2.0 * c - y, true)
    } else {
        (y, false)
    }
}

/// Sampled first-passage times. Censored paths report `t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptSample {
    pub times: Vec<f64>,
    pub censored: Vec<bool>,
    pub censored_count: usize,
    /// Steps that landed below `c` and were reflected.
    pub reflections: u64,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Statistics of the uncensored times; NaN when undefined.
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub warnings: Vec<String>,
}

struct PathOutcome {
    steps: Option<u64>,
    reflections: u64,
}

fn simulate_path(p: &FellerParams, dt: f64, max_steps: u64, seed: u64, index: u64) -> PathOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let sqdt = dt.sqrt();
    let mut y = p.y0;
    let mut reflections = 0;
    for n in 1..=max_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        let (next, hit) = reflect(milstein_raw(y, p, dt, sqdt * z), p.c);
        reflections += hit as u64;
        y = next;
        if y >= p.threshold {
            return PathOutcome { steps: Some(n), reflections };
        }
    }
    PathOutcome { steps: None, reflections }
}

/// Simulates `n_paths` paths from `y0` and records the first grid time with
/// `Y ≥ S`.
pub fn sample_fpt(p: &FellerParams, cfg: &SimConfig) -> Result<FptSample> {
    cfg.validate()?;
    p.validate()?;
    p.require_upcrossing()?;
    let t_max = cfg.resolve_t_max(p)?;
    let dt = cfg.dt;
    // guard against t_max/dt landing a hair below an integer
    let max_steps = (t_max / dt * (1.0 + 1e-12)).floor() as u64;
    if max_steps == 0 {
        return Err(FptError::domain("t_max shorter than one step"));
    }
    let run = || -> Vec<PathOutcome> {
        (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| simulate_path(p, dt, max_steps, cfg.seed, i))
            .collect()
    };
    let outcomes = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| FptError::domain(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut times = Vec::with_capacity(outcomes.len());
    let mut censored = Vec::with_capacity(outcomes.len());
    let mut reflections = 0;
    for o in &outcomes {
        reflections += o.reflections;
        match o.steps {
            Some(n) => {
                times.push(n as f64 * dt);
                censored.push(false);
            }
            None => {
                times.push(t_max);
                censored.push(true);
            }
        }
    }
    let censored_count = censored.iter().filter(|c| **c).count();
    let (mean, variance, skewness) = sample_stats(
        times
            .iter()
            .zip(&censored)
            .filter(|(_, c)| !**c)
            .map(|(t, _)| *t),
    );
    let mut warnings = Vec::new();
    let frac = censored_count as f64 / cfg.n_paths as f64;
    if frac > CENSORING_WARNING {
        warnings.push(format!(
            "{censored_count} of {} paths ({:.1}%) censored at t_max = {t_max}",
            cfg.n_paths,
            100.0 * frac
        ));
    }
    if reflections > 0 {
        warnings.push(format!("{reflections} steps reflected at c; consider a smaller dt"));
    }
    Ok(FptSample {
        times,
        censored,
        censored_count,
        reflections,
        dt,
        t_max,
        seed: cfg.seed,
        mean,
        variance,
        skewness,
        warnings,
    })
}

fn sample_stats(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64) {
    let n = xs.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n;
    let (m2, m3) = xs.fold((0.0, 0.0), |(a, b), x| {
        let d = x - mean;
        (a + d * d, b + d * d * d)
    });
    let variance = if n > 1.0 { m2 / (n - 1.0) } else { f64::NAN };
    let pop_var = m2 / n;
    let skewness = if pop_var > 0.0 { (m3 / n) / pop_var.powf(1.5) } else { f64::NAN };
    (mean, variance, skewness)
}

impl FptSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn uncensored(&self) -> impl Iterator<Item = f64> + '_ {
        self.times
            .iter()
            .zip(&self.censored)
            .filter(|(_, c)| !**c)
            .map(|(t, _)| *t)
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored_count as f64 / self.times.len() as f64
    }

    /// Standard error of the uncensored sample mean.
    pub fn standard_error(&self) -> f64 {
        (self.variance / (self.len() - self.censored_count) as f64).sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dt={:.16e}", self.dt);
        let _ = writeln!(out, "# t_max={:.16e}", self.t_max);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# n_paths={}", self.times.len());
        let _ = writeln!(out, "# censored_count={}", self.censored_count);
        let _ = writeln!(out, "# reflections={}", self.reflections);
        let _ = writeln!(out, "# mean={:.16e}", self.mean);
        let _ = writeln!(out, "# variance={:.16e}", self.variance);
        let _ = writeln!(out, "# skewness={:.16e}", self.skewness);
        for w in &self.warnings {
            let _ = writeln!(out, "# warning={w}");
        }
        out.push_str("path,t,censored\n");
        for (i, (t, c)) in self.times.iter().zip(&self.censored).enumerate() {
            let _ = writeln!(out, "{i},{t:.16e},{}", *c as u8);
        }
        out
    }

    /// JSON form. NaN statistics are written as `null`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sample serializes")
    }
}

/// Density estimate from a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPdf {
    pub table: PdfTable,
    pub estimator: Estimator,
    /// Kernel width (KDE) or bin width (histogram).
    pub bandwidth: f64,
    pub censored_fraction: f64,
    /// Histogram bin edges; empty for the KDE.
    pub bin_edges: Vec<f64>,
    /// Histogram densities, one per bin; empty for the KDE.
    pub bin_density: Vec<f64>,
}

impl EmpiricalPdf {
    /// Exact integral of the histogram; trapezoid on the table otherwise.
    pub fn integral(&self) -> f64 {
        if self.bin_density.is_empty() {
            self.table.integral()
        } else {
            self.bin_edges
                .windows(2)
                .zip(&self.bin_density)
                .map(|(e, d)| (e[1] - e[0]) * d)
                .sum()
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Histogram (Freedman–Diaconis bins) or Gaussian KDE (Silverman bandwidth)
/// normalized by the total number of paths, so the estimate carries mass
/// `1 − censored fraction`.
///
/// Without a grid the histogram is reported at bin centres and the KDE on
/// 512 points spanning the data.
pub fn empirical_pdf(
    sample: &FptSample,
    estimator: Estimator,
    bandwidth: Bandwidth,
    grid: Option<&GridSpec>,
) -> Result<EmpiricalPdf> {
    let mut xs: Vec<f64> = sample.uncensored().collect();
    if xs.len() < MIN_SAMPLES {
        return Err(FptError::domain(format!(
            "density estimate needs at least {MIN_SAMPLES} uncensored samples, got {}",
            xs.len()
        )));
    }
    xs.sort_by(f64::total_cmp);
    let n_total = sample.len() as f64;
    let iqr = quantile(&xs, 0.75) - quantile(&xs, 0.25);
    let nu = xs.len() as f64;
    let (_, var, _) = sample_stats(xs.iter().copied());
    let sd = var.sqrt();
    let censored_fraction = sample.censored_fraction();

    match estimator {
        Estimator::Histogram => {
            let rule = match bandwidth {
                Bandwidth::Fixed(h) => h,
                Bandwidth::Silverman => 2.0 * iqr / nu.cbrt(),
            };
            if !(rule > 0.0) {
                return Err(FptError::domain("degenerate sample: zero spread"));
            }
            // Times sit on the lattice n·dt; bins hold a whole number of
            // lattice points and edges sit between them.
            let dt = sample.dt;
            let per_bin = (rule / dt).ceil().max(1.0);
            let width = per_bin * dt;
            let first = ((xs[0] / dt).round() - 0.5) * dt;
            let n_bins = (((xs[xs.len() - 1] - first) / width).floor() as usize) + 1;
            let edges: Vec<f64> = (0..=n_bins).map(|i| first + i as f64 * width).collect();
            let mut counts = vec![0usize; n_bins];
            for x in &xs {
                let b = (((x - first) / width).floor() as usize).min(n_bins - 1);
                counts[b] += 1;
            }
            let density: Vec<f64> = counts.iter().map(|c| *c as f64 / (n_total * width)).collect();
            let (grid_pts, values) = match grid {
                None => (
                    edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect::<Vec<_>>(),
                    density.clone(),
                ),
                Some(g) => {
                    let pts = g.points()?;
                    let vals = pts
                        .iter()
                        .map(|t| {
                            if *t < edges[0] || *t >= edges[n_bins] {
                                0.0
                            } else {
                                density[(((t - first) / width).floor() as usize).min(n_bins - 1)]
                            }
                        })
                        .collect();
                    (pts, vals)
                }
            };
            let mut table = PdfTable::new(grid_pts, values, PdfSource::Simulation)?;
            table.params.insert("bin_width".into(), width);
            table.params.insert("n_paths".into(), n_total);
            table.params.insert("censored_fraction".into(), censored_fraction);
            Ok(EmpiricalPdf {
                table,
                estimator,
                bandwidth: width,
                censored_fraction,
                bin_edges: edges,
                bin_density: density,
            })
        }
        Estimator::GaussianKde => {
            let h = match bandwidth {
                Bandwidth::Fixed(h) => h,
                Bandwidth::Silverman => {
                    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
                    0.9 * spread * nu.powf(-0.2)
                }
            };
            if !(h > 0.0) {
                return Err(FptError::domain("degenerate sample: zero spread"));
            }
            let pts = match grid {
                Some(g) => g.points()?,
                None => {
                    let lo = (xs[0] - 3.0 * h).max(sample.dt);
                    let hi = xs[xs.len() - 1] + 3.0 * h;
                    GridSpec::Range { t_min: lo, t_max: hi, points: 512 }.points()?
                }
            };
            let norm = 1.0 / (n_total * h * (2.0 * std::f64::consts::PI).sqrt());
            let reach = 8.0 * h;
            let values: Vec<f64> = pts
                .iter()
                .map(|t| {
                    let lo = xs.partition_point(|x| *x < t - reach);
                    let hi = xs.partition_point(|x| *x <= t + reach);
                    let s: f64 = xs[lo..hi]
                        .iter()
                        .map(|x| {
                            let u = (t - x) / h;
                            (-0.5 * u * u).exp()
                        })
                        .sum();
                    s * norm
                })
                .collect();
            let mut table = PdfTable::new(pts, values, PdfSource::Simulation)?;
            table.params.insert("bandwidth".into(), h);
            table.params.insert("n_paths".into(), n_total);
            table.params.insert("censored_fraction".into(), censored_fraction);
            Ok(EmpiricalPdf {
                table,
                estimator,
                bandwidth: h,
                censored_fraction,
                bin_edges: Vec::new(),
                bin_density: Vec::new(),
            })
        }
    }
}

/// Pointwise comparison of an approximant table against an empirical one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub t_cut: f64,
    /// Approximant grid points inside the empirical support.
    pub grid: Vec<f64>,
    pub approx: Vec<f64>,
    pub empirical: Vec<f64>,
    pub abs_error: Vec<f64>,
    /// `max |ĝ − g_emp|` over `t ≥ t_cut`.
    pub sup_error: f64,
    pub sup_at: f64,
    /// Trapezoidal `∫ |ĝ − g_emp|` over the common grid.
    pub l1: f64,
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# t_cut={:.16e}", self.t_cut);
        let _ = writeln!(out, "# sup_error={:.16e}", self.sup_error);
        let _ = writeln!(out, "# sup_at={:.16e}", self.sup_at);
        let _ = writeln!(out, "# l1={:.16e}", self.l1);
        out.push_str("t,approx,empirical,abs_error\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.grid[i], self.approx[i], self.empirical[i], self.abs_error[i]
            );
        }
        out
    }
}

/// Compares on the approximant's grid, interpolating the empirical table
/// linearly. Only grid points inside the empirical support are used.
pub fn compare(approx: &PdfTable, empirical: &PdfTable, t_cut: f64) -> Result<ComparisonReport> {
    if !(t_cut >= 0.0) {
        return Err(FptError::domain(format!("t_cut must be >= 0, got {t_cut}")));
    }
    let lo = empirical.grid[0];
    let hi = empirical.grid[empirical.len() - 1];
    let mut grid = Vec::new();
    let mut a = Vec::new();
    let mut e = Vec::new();
    for (t, v) in approx.grid.iter().zip(&approx.values) {
        if *t >= lo && *t <= hi {
            grid.push(*t);
            a.push(*v);
            e.push(empirical.interpolate(*t));
        }
    }
    if grid.is_empty() {
        return Err(FptError::domain(format!(
            "disjoint supports: approximant on [{}, {}], empirical on [{lo}, {hi}]",
            approx.grid[0],
            approx.grid[approx.len() - 1]
        )));
    }
    let abs_error: Vec<f64> = a.iter().zip(&e).map(|(x, y)| (x - y).abs()).collect();
    let (mut sup_error, mut sup_at) = (0.0, f64::NAN);
    for (t, d) in grid.iter().zip(&abs_error) {
        if *t >= t_cut && *d >= sup_error {
            sup_error = *d;
            sup_at = *t;
        }
    }
    let l1 = grid
        .windows(2)
        .zip(abs_error.windows(2))
        .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
        .sum();
    Ok(ComparisonReport {
        t_cut,
        grid,
        approx: a,
        empirical: e,
        abs_error,
        sup_error,
        sup_at,
        l1,
    })
}

/// Least-squares slope of `ln P(T > t)` against `t`, fitted at the sorted
/// uncensored times whose empirical survival lies in `[lo, hi]`. Censored
/// paths count as surviving. Returns `None` with fewer than 10 points.
pub fn tail_log_survival_slope(sample: &FptSample, lo: f64, hi: f64) -> Option<f64> {
    let mut xs: Vec<f64> = sample.uncensored().collect();
    xs.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            let surv = (n - (i + 1) as f64) / n;
            (surv >= lo && surv <= hi && surv > 0.0).then(|| (*t, surv.ln()))
        })
        .collect();
    if pts.len() < 10 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
