//! Laguerre-Gamma polynomial approximation of a density on `(0, ∞)` from its
//! moments.
//!
//! ```text
//! ĝ(t) = β (βt)^α e^{−βt} Σ_{k=0}^{n} A_k L_k^{(α)}(βt)
//! A_k  = Σ_{j=0}^{k} C(k, j) (−β)^j E[T^j] / Γ(α + j + 1)
//! ```
//!
//! With `β = c_1/c_2` and `α = c_1²/c_2 − 1` the gamma reference has the
//! target's mean and variance, and `A_1 = A_2 = 0`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::cumulants::{moments_from_cumulants_recursive, CumulantVector, MomentVector};
use crate::error::{FptError, Result};
use crate::sum::CompensatedSum;
use crate::table::{GridSpec, PdfSource, PdfTable};

/// Truncation degree used when none is given.
pub const DEFAULT_DEGREE: usize = 5;

/// Generalized Laguerre polynomial `L_k^{(α)}(t)` by the three-term recurrence.
pub fn laguerre(k: usize, alpha: f64, t: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - t;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - t) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `L_0^{(α)}(t), …, L_n^{(α)}(t)`.
pub fn laguerre_all(n: usize, alpha: f64, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(1.0 + alpha - t);
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - t) * out[j] - (jf + alpha) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Gamma reference density `β^{α+1} t^α e^{−βt} / Γ(α+1)`.
pub fn gamma_density(alpha: f64, beta: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    ((alpha + 1.0) * beta.ln() + alpha * t.ln() - beta * t - ln_gamma(alpha + 1.0)).exp()
}

/// Gamma parameters fitted by matching the first two cumulants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentMatch {
    pub alpha: f64,
    pub beta: f64,
    /// `β < 2/E[T]`, equivalently `2 c_2 > c_1²`.
    pub beta_bound_ok: bool,
    /// `−1 < α < 1`; equivalent to the β bound under matching.
    pub alpha_in_range: bool,
    /// `α ≥ 1`: the reference gamma has a mode.
    pub mode_defined: bool,
}

/// `β = c_1/c_2`, `α = c_1²/c_2 − 1`.
pub fn match_parameters(c: &CumulantVector) -> Result<MomentMatch> {
    let c1 = c.mean();
    let c2 = c
        .variance()
        .ok_or_else(|| FptError::domain("moment matching needs two cumulants"))?;
    if !(c2 > 0.0) {
        return Err(FptError::domain(format!("moment matching needs c2 > 0, got {c2}")));
    }
    if !(c1 > 0.0) {
        return Err(FptError::domain(format!("moment matching needs c1 > 0, got {c1}")));
    }
    let beta = c1 / c2;
    let alpha = c1 * c1 / c2 - 1.0;
    Ok(MomentMatch {
        alpha,
        beta,
        beta_bound_ok: 2.0 * c2 > c1 * c1,
        alpha_in_range: alpha > -1.0 && alpha < 1.0,
        mode_defined: alpha >= 1.0,
    })
}

/// Coefficient polynomials `A_k(y) = k!/Γ(α+1+k) · L_k^{(α)}(y)` for
/// `k = 0..=n`, as coefficient vectors in powers of `y`.
///
/// They obey `A_{k+1} = ((2k+1+α−y) A_k − k A_{k−1}) / (α+k+1)` with
/// `A_0 = 1/Γ(α+1)`.
fn coefficient_polynomials(alpha: f64, n: usize) -> Vec<Vec<f64>> {
    let a0 = (-ln_gamma(alpha + 1.0)).exp();
    let mut polys: Vec<Vec<f64>> = vec![vec![a0]];
    if n == 0 {
        return polys;
    }
    // A_1 = (α+1−y) A_0 / (α+1)
    polys.push(vec![a0, -a0 / (alpha + 1.0)]);
    for k in 1..n {
        let kf = k as f64;
        let denom = alpha + kf + 1.0;
        let cur = &polys[k];
        let prev = &polys[k - 1];
        let mut next = vec![0.0; k + 2];
        for (j, &cj) in cur.iter().enumerate() {
            next[j] += (2.0 * kf + 1.0 + alpha) * cj / denom;
            next[j + 1] -= cj / denom;
        }
        for (j, &pj) in prev.iter().enumerate() {
            next[j] -= kf * pj / denom;
        }
        polys.push(next);
    }
    polys
}

/// Coefficients with the ratio `max_j |summand_j| / |A_k|` for each `k`.
fn coefficients_with_condition(
    m: &MomentVector,
    alpha: f64,
    beta: f64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(alpha > -1.0) {
        return Err(FptError::domain(format!("alpha must be > -1, got {alpha}")));
    }
    if !(beta > 0.0) {
        return Err(FptError::domain(format!("beta must be > 0, got {beta}")));
    }
    if m.order() < n {
        return Err(FptError::domain(format!(
            "degree {n} needs {n} moments, got {}",
            m.order()
        )));
    }
    let moments = m.with_unit();
    let scaled: Vec<f64> = moments
        .iter()
        .enumerate()
        .map(|(j, mj)| beta.powi(j as i32) * mj)
        .collect();
    let polys = coefficient_polynomials(alpha, n);
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut condition = Vec::with_capacity(n + 1);
    for poly in &polys {
        let mut acc = CompensatedSum::new();
        let mut largest = 0.0f64;
        for (j, &pj) in poly.iter().enumerate() {
            let term = pj * scaled[j];
            largest = largest.max(term.abs());
            acc.add(term);
        }
        let value = acc.value();
        coeffs.push(value);
        condition.push(if value != 0.0 {
            largest / value.abs()
        } else {
            f64::INFINITY
        });
    }
    Ok((coeffs, condition))
}

/// `A_0, …, A_n` by applying the moment functional `y^j ↦ β^j E[T^j]` to the
/// coefficient polynomials built with the Laguerre recurrence.
pub fn coefficients(m: &MomentVector, alpha: f64, beta: f64, n: usize) -> Result<Vec<f64>> {
    coefficients_with_condition(m, alpha, beta, n).map(|(c, _)| c)
}

/// Conditioning and admissibility flags carried by an approximant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxDiagnostics {
    /// `β < 2/E[T]`; `None` when the mean is unknown.
    pub beta_bound_ok: Option<bool>,
    pub alpha_in_range: bool,
    pub mode_defined: bool,
    /// `max_j |summand_j| / |A_k|` per coefficient; large values mean the
    /// coefficient came out of heavy cancellation.
    pub cancellation: Vec<f64>,
}

/// A built approximant `ĝ`. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaguerreGammaApprox {
    alpha: f64,
    beta: f64,
    coeffs: Vec<f64>,
    diagnostics: ApproxDiagnostics,
}

impl LaguerreGammaApprox {
    /// From raw moments and a chosen reference `(α, β)`.
    pub fn from_moments(m: &MomentVector, alpha: f64, beta: f64, n: usize) -> Result<Self> {
        let (coeffs, cancellation) = coefficients_with_condition(m, alpha, beta, n)?;
        let mean = m.get(1).unwrap_or(f64::NAN);
        Ok(LaguerreGammaApprox {
            alpha,
            beta,
            coeffs,
            diagnostics: ApproxDiagnostics {
                beta_bound_ok: mean.is_finite().then(|| beta < 2.0 / mean),
                alpha_in_range: alpha > -1.0 && alpha < 1.0,
                mode_defined: alpha >= 1.0,
                cancellation,
            },
        })
    }

    /// Moment-matched approximant of degree `n` from cumulants `c_1..c_n`
    /// (at least two).
    pub fn from_cumulants(c: &CumulantVector, n: usize) -> Result<Self> {
        let fit = match_parameters(c)?;
        if c.order() < n {
            return Err(FptError::domain(format!(
                "degree {n} needs {n} cumulants, got {}",
                c.order()
            )));
        }
        let m = moments_from_cumulants_recursive(c);
        Self::from_moments(&m, fit.alpha, fit.beta, n)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `A_0..A_n`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn diagnostics(&self) -> &ApproxDiagnostics {
        &self.diagnostics
    }

    /// `ĝ(t)` for `t > 0`; may be negative.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(FptError::domain(format!("approximant needs t > 0, got {t}")));
        }
        let w = self.beta * t;
        let ls = laguerre_all(self.degree(), self.alpha, w);
        let poly: CompensatedSum = self.coeffs.iter().zip(&ls).map(|(a, l)| a * l).collect();
        let weight = (self.beta.ln() + self.alpha * w.ln() - w).exp();
        Ok(weight * poly.value())
    }

    /// The gamma reference `φ_{α,β}(t)`.
    pub fn reference_density(&self, t: f64) -> f64 {
        gamma_density(self.alpha, self.beta, t)
    }

    /// Normalized coefficients `a_k = E[Q_k(βT)] = (−1)^k A_k (Γ(α+1)Γ(α+1+k)/k!)^{1/2}`.
    pub fn orthonormal_coefficients(&self) -> Vec<f64> {
        let lg = ln_gamma(self.alpha + 1.0);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let ln_fact_k = ln_gamma(k as f64 + 1.0);
                let norm = (0.5 * (lg + ln_gamma(self.alpha + 1.0 + k as f64) - ln_fact_k)).exp();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * a * norm
            })
            .collect()
    }
}

/// Advisory report on the admissibility of the expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `β < 2/c_1`.
    pub beta_bound_ok: bool,
    pub alpha_in_range: bool,
    pub mode_defined: bool,
    /// `a_0..a_n`, see [`LaguerreGammaApprox::orthonormal_coefficients`].
    pub normalized_coefficients: Vec<f64>,
    /// Least-squares slope of `ln |a_k|` against `k` over the nonzero
    /// coefficients with `k ≥ 3`; negative means decaying.
    pub decay_slope: Option<f64>,
    /// `Σ_{k≤n} |a_k|`, the partial Parseval sum.
    pub partial_abs_sum: f64,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.beta_bound_ok && self.alpha_in_range
    }
}

/// Sufficient-condition diagnostics. Never blocks evaluation.
pub fn check_conditions(approx: &LaguerreGammaApprox, c: &CumulantVector) -> ConditionReport {
    let c1 = c.mean();
    let beta_bound_ok = approx.beta < 2.0 / c1;
    let alpha = approx.alpha;
    let a = approx.orthonormal_coefficients();
    let scale = a[0].abs();
    let points: Vec<(f64, f64)> = a
        .iter()
        .enumerate()
        .skip(3)
        .filter(|(_, v)| v.abs() > 1e-12 * scale)
        .map(|(k, v)| (k as f64, v.abs().ln()))
        .collect();
    let decay_slope = (points.len() >= 2).then(|| {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let mut notes = Vec::new();
    if !beta_bound_ok {
        notes.push(format!(
            "beta = {} >= 2/E[T] = {}: the density ratio is not square-integrable",
            approx.beta,
            2.0 / c1
        ));
    }
    if alpha < 1.0 {
        notes.push(format!(
            "alpha = {alpha} < 1: the reference gamma has no mode; shape near t = 0 is not matched"
        ));
    }
    if let Some(slope) = decay_slope {
        if slope >= 0.0 {
            notes.push(format!("normalized coefficients do not decay (slope {slope})"));
        }
    }
    ConditionReport {
        beta_bound_ok,
        alpha_in_range: alpha > -1.0 && alpha < 1.0,
        mode_defined: alpha >= 1.0,
        partial_abs_sum: a.iter().map(|v| v.abs()).sum(),
        normalized_coefficients: a,
        decay_slope,
        notes,
    }
}

/// Samples `ĝ` on a grid. With `clip` negative values are set to zero
/// (no renormalization) and the table is marked as clipped.
pub fn build_pdf_table(approx: &LaguerreGammaApprox, grid: &GridSpec, clip: bool) -> Result<PdfTable> {
    let points = grid.points()?;
    let mut values = Vec::with_capacity(points.len());
    for &t in &points {
        values.push(approx.evaluate(t)?);
    }
    let mut table = PdfTable::new(points, values, PdfSource::Approximant)?;
    table.params.insert("alpha".into(), approx.alpha);
    table.params.insert("beta".into(), approx.beta);
    table.params.insert("degree".into(), approx.degree() as f64);
    for (k, a) in approx.coeffs.iter().enumerate() {
        table.params.insert(format!("A{k}"), *a);
    }
    if clip {
        table.clip_negative();
    }
    Ok(table)
}
