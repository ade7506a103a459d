//! First-passage-time cumulants and moments of the Feller (CIR) diffusion
//!
//! ```text
//! dY_t = (−τ Y_t + μ) dt + σ √(Y_t − c) dW_t,   Y_0 = y0,
//! T    = inf{ t ≥ 0 : Y_t ≥ S }.
//! ```
//!
//! The Laplace transform of the density of `T` is a ratio of two Kummer
//! functions in the scaled variables `A = 2τ(y0−c)/σ²`, `B = 2τ(S−c)/σ²`.
//! Taking its logarithm as a formal power series gives every cumulant in
//! closed form:
//!
//! ```text
//! c_k(T)  = (−1/τ)^k [c*_k(A) − c*_k(B)]
//! c*_k(y) = P_k(h_1(y), …, h_k(y))
//! h_j(y)  = j! Σ_{n≥j} [n, j] yⁿ / (n! ⟨s⟩_n)
//! ```
//!
//! with `P_k` the logarithmic partition polynomial and `[n, j]` the unsigned
//! Stirling numbers of the first kind. All the infinite series here share a
//! stopping rule, see [`SeriesControl`].

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::combinatorics::{
    bell_complete_all, binomial, harmonic, log_partition_polys, NormalizedStirlingRows,
};
use crate::cumulants::{CumulantVector, MomentVector, TruncationInfo};
use crate::error::{FptError, Result};
use crate::sum::CompensatedSum;

/// Largest exponent kept unscaled; beyond it the series run in log space.
const DIRECT_LOG_LIMIT: f64 = 600.0;
/// `ln(f64::MAX)`, roughly.
const LN_MAX: f64 = 709.0;

/// Coefficients and boundary data of the Feller process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FellerParams {
    /// Drift level μ.
    pub mu: f64,
    /// Mean-reversion rate τ > 0.
    pub tau: f64,
    /// Volatility scale σ > 0.
    pub sigma: f64,
    /// Lower endpoint c ≤ 0 of the state space.
    pub c: f64,
    /// Starting point.
    pub y0: f64,
    /// Threshold S.
    pub threshold: f64,
}

fn invalid(invariant: &'static str, detail: String) -> FptError {
    FptError::InvalidParams { invariant, detail }
}

impl FellerParams {
    /// Validates and builds a parameter set.
    ///
    /// `y0 == S` is accepted as the degenerate case `T = 0`; callers that
    /// need a proper upcrossing problem check [`FellerParams::is_degenerate`].
    pub fn new(mu: f64, tau: f64, sigma: f64, c: f64, y0: f64, threshold: f64) -> Result<Self> {
        let p = FellerParams {
            mu,
            tau,
            sigma,
            c,
            y0,
            threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu, self.tau, self.sigma, self.c, self.y0, self.threshold];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("finite parameters", format!("{self:?}")));
        }
        if !(self.tau > 0.0) {
            return Err(invalid("tau > 0", format!("tau = {}", self.tau)));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma > 0", format!("sigma = {}", self.sigma)));
        }
        if self.c > 0.0 {
            return Err(invalid("c <= 0", format!("c = {}", self.c)));
        }
        if !(self.y0 > self.c) {
            return Err(invalid("c < y0", format!("c = {}, y0 = {}", self.c, self.y0)));
        }
        if self.y0 > self.threshold {
            return Err(invalid(
                "y0 < S",
                format!("y0 = {}, S = {}", self.y0, self.threshold),
            ));
        }
        if !(self.shape() > 0.0) {
            return Err(invalid(
                "s = 2(mu - c tau)/sigma^2 > 0",
                format!("s = {}", self.shape()),
            ));
        }
        Ok(())
    }

    /// Rejects the degenerate `y0 == S` case.
    pub fn require_upcrossing(&self) -> Result<()> {
        if self.is_degenerate() {
            return Err(invalid(
                "y0 < S",
                format!("y0 = {}, S = {}", self.y0, self.threshold),
            ));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.y0 >= self.threshold
    }

    /// `s = 2(μ − cτ)/σ²`.
    pub fn shape(&self) -> f64 {
        2.0 * (self.mu - self.c * self.tau) / (self.sigma * self.sigma)
    }

    /// `2τ(w − c)/σ²`.
    pub fn scaled(&self, w: f64) -> f64 {
        2.0 * self.tau * (w - self.c) / (self.sigma * self.sigma)
    }

    /// `A = 2τ(y0 − c)/σ²`.
    pub fn scaled_start(&self) -> f64 {
        self.scaled(self.y0)
    }

    /// `B = 2τ(S − c)/σ²`.
    pub fn scaled_threshold(&self) -> f64 {
        self.scaled(self.threshold)
    }

    pub fn with_start(&self, y0: f64) -> Result<Self> {
        FellerParams::new(self.mu, self.tau, self.sigma, self.c, y0, self.threshold)
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        FellerParams::new(self.mu, self.tau, self.sigma, self.c, self.y0, threshold)
    }
}

/// Shifted gamma law of `Y_∞` in the absence of a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryLaw {
    pub shape: f64,
    /// `σ² / (2τ)`.
    pub scale: f64,
    pub location: f64,
    /// `μ / τ`.
    pub asymptotic_mean: f64,
}

impl StationaryLaw {
    pub fn mean(&self) -> f64 {
        self.location + self.shape * self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Suprathreshold,
    Subthreshold,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// `c` cannot be reached in finite time (`s ≥ 1`).
    Entrance,
    NonEntrance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub boundary: Boundary,
    pub regime: Regime,
    pub stationary: StationaryLaw,
}

/// Boundary type, regime and stationary law, with the default threshold
/// tolerance `|μ/τ − S| ≤ 1e-12 · max(1, |S|)`.
pub fn classify(p: &FellerParams) -> Classification {
    classify_with_tolerance(p, 1e-12)
}

pub fn classify_with_tolerance(p: &FellerParams, rel_tol: f64) -> Classification {
    let s = p.shape();
    let asymptotic_mean = p.mu / p.tau;
    let gap = asymptotic_mean - p.threshold;
    let regime = if gap.abs() <= rel_tol * p.threshold.abs().max(1.0) {
        Regime::Threshold
    } else if gap > 0.0 {
        Regime::Suprathreshold
    } else {
        Regime::Subthreshold
    };
    Classification {
        boundary: if s >= 1.0 {
            Boundary::Entrance
        } else {
            Boundary::NonEntrance
        },
        regime,
        stationary: StationaryLaw {
            shape: s,
            scale: p.sigma * p.sigma / (2.0 * p.tau),
            location: p.c,
            asymptotic_mean,
        },
    }
}

/// Stopping policy shared by every infinite series in this module.
///
/// A series stops once `|term| ≤ rel_tol·|partial sum| + abs_floor` holds for
/// `consecutive` terms in a row past the peak of its terms, and fails with
/// [`FptError::Truncation`] if that has not happened after `max_terms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub max_terms: usize,
    pub consecutive: usize,
    /// Neumaier-compensated partial sums.
    pub compensated: bool,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            rel_tol: 1e-15,
            abs_floor: 0.0,
            max_terms: 10_000,
            consecutive: 3,
            compensated: true,
        }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(FptError::domain("series tolerance must be > 0"));
        }
        if self.max_terms < 10 {
            return Err(FptError::domain("series term cap must be >= 10"));
        }
        if !(self.abs_floor >= 0.0) {
            return Err(FptError::domain("series absolute floor must be >= 0"));
        }
        Ok(())
    }

    fn small(&self, term: f64, sum: f64) -> bool {
        term.abs() <= self.rel_tol * sum.abs() + self.abs_floor
    }
}

/// A series value with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    /// Geometric bound on the neglected tail, in the units of `value`.
    pub tail: f64,
}

#[derive(Debug, Clone, Copy)]
enum Acc {
    Plain(f64),
    Compensated(CompensatedSum),
}

impl Acc {
    fn new(compensated: bool) -> Self {
        if compensated {
            Acc::Compensated(CompensatedSum::new())
        } else {
            Acc::Plain(0.0)
        }
    }

    fn add(&mut self, x: f64) {
        match self {
            Acc::Plain(s) => *s += x,
            Acc::Compensated(c) => c.add(x),
        }
    }

    fn value(&self) -> f64 {
        match self {
            Acc::Plain(s) => *s,
            Acc::Compensated(c) => c.value(),
        }
    }
}

fn tail_bound(last: f64, prev: f64) -> f64 {
    let ratio = if prev != 0.0 { (last / prev).abs() } else { 0.0 };
    if ratio < 1.0 {
        last.abs() * ratio / (1.0 - ratio)
    } else {
        last.abs()
    }
}

fn finish(scaled_sum: f64, log_scale: f64, what: &'static str) -> Result<f64> {
    if scaled_sum == 0.0 {
        return Ok(0.0);
    }
    let ln = scaled_sum.abs().ln() + log_scale;
    if ln > LN_MAX {
        return Err(FptError::Overflow(what));
    }
    Ok(scaled_sum * log_scale.exp())
}

/// Terms `t_n` of a hypergeometric-type series given by consecutive ratios,
/// optionally rescaled by `exp(−L)` when their magnitude would overflow.
struct ScaledTerms<F: Fn(usize) -> f64> {
    ratio: F,
    log_scale: f64,
    in_log_space: bool,
    n: usize,
    term: f64,
    ln_abs: f64,
    negative: bool,
}

impl<F: Fn(usize) -> f64> ScaledTerms<F> {
    /// `ratio(n) = t_{n+1} / t_n`, `t_0 = 1`. `peak_hint` bounds where the
    /// terms stop growing.
    fn new(ratio: F, peak_hint: usize, max_terms: usize) -> Self {
        // largest ln|t_n| up to the peak region
        let mut ln = 0.0f64;
        let mut best = 0.0f64;
        let scan = peak_hint.min(max_terms) + 2;
        for n in 0..scan {
            let r = ratio(n);
            if r == 0.0 {
                break;
            }
            ln += r.abs().ln();
            best = best.max(ln);
        }
        let in_log_space = best > DIRECT_LOG_LIMIT;
        let log_scale = if in_log_space { best } else { 0.0 };
        ScaledTerms {
            ratio,
            log_scale,
            in_log_space,
            n: 0,
            term: (-log_scale).exp(),
            ln_abs: 0.0,
            negative: false,
        }
    }

    /// Current scaled term `t_n e^{−L}`.
    fn current(&self) -> f64 {
        self.term
    }

    fn advance(&mut self) {
        let r = (self.ratio)(self.n);
        self.n += 1;
        if self.in_log_space {
            if r == 0.0 {
                self.ln_abs = f64::NEG_INFINITY;
            } else {
                self.ln_abs += r.abs().ln();
                if r < 0.0 {
                    self.negative = !self.negative;
                }
            }
            let mag = (self.ln_abs - self.log_scale).exp();
            self.term = if self.negative { -mag } else { mag };
        } else {
            self.term *= r;
        }
    }
}

/// Kummer's function `₁F₁(a; b; y) = Σ ⟨a⟩_n/⟨b⟩_n · yⁿ/n!`.
pub fn kummer_1f1(a: f64, b: f64, y: f64, ctl: &SeriesControl) -> Result<SeriesValue> {
    let (scaled, log_scale, terms, tail) = kummer_scaled(a, b, y, ctl)?;
    Ok(SeriesValue {
        value: finish(scaled, log_scale, "Kummer function")?,
        terms,
        tail: tail * log_scale.exp(),
    })
}

/// `(Σ t_n e^{−L}, L, terms, scaled tail)`.
fn kummer_scaled(a: f64, b: f64, y: f64, ctl: &SeriesControl) -> Result<(f64, f64, usize, f64)> {
    ctl.validate()?;
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(FptError::domain(format!(
            "Kummer parameter b = {b} is a nonpositive integer"
        )));
    }
    if !y.is_finite() || !a.is_finite() || !b.is_finite() {
        return Err(FptError::domain("Kummer arguments must be finite"));
    }
    let ratio = |n: usize| {
        let n = n as f64;
        (a + n) / (b + n) * y / (n + 1.0)
    };
    let peak = (y.abs() + a.abs() + b.abs()).ceil() as usize + 1;
    let mut terms = ScaledTerms::new(ratio, peak, ctl.max_terms);
    let mut acc = Acc::new(ctl.compensated);
    let mut quiet = 0;
    let mut prev = 0.0;
    for n in 0..ctl.max_terms {
        let t = terms.current();
        acc.add(t);
        if t == 0.0 && n > 0 && a.fract() == 0.0 && a <= 0.0 {
            // terminating polynomial
            return Ok((acc.value(), terms.log_scale, n + 1, 0.0));
        }
        if n >= peak && ctl.small(t, acc.value()) {
            quiet += 1;
            if quiet >= ctl.consecutive {
                return Ok((acc.value(), terms.log_scale, n + 1, tail_bound(t, prev)));
            }
        } else {
            quiet = 0;
        }
        prev = t;
        terms.advance();
    }
    Err(FptError::Truncation {
        series: "Kummer series",
        terms: ctl.max_terms,
        tail: tail_bound(terms.current(), prev) * terms.log_scale.exp(),
    })
}

/// Laplace transform of the first-passage-time density,
/// `g̃(z) = ₁F₁(z/τ; s; A) / ₁F₁(z/τ; s; B)`.
pub fn laplace_fpt(z: f64, p: &FellerParams, ctl: &SeriesControl) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(FptError::domain(format!("Laplace argument must be >= 0, got {z}")));
    }
    let a = z / p.tau;
    let s = p.shape();
    let (num, ln_num, _, _) = kummer_scaled(a, s, p.scaled_start(), ctl)?;
    let (den, ln_den, _, _) = kummer_scaled(a, s, p.scaled_threshold(), ctl)?;
    Ok(num / den * (ln_num - ln_den).exp())
}

/// `h_1(y), …, h_k(y)` with shared diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HVector {
    pub values: Vec<f64>,
    pub terms: usize,
    /// Per-order tail bound.
    pub tail: Vec<f64>,
}

/// All of `h_1(y), …, h_k(y)` in one pass over `n`.
///
/// Each term is `j! · ([n, j]/n!) · yⁿ/⟨s⟩_n`; the normalised Stirling
/// numbers come from [`NormalizedStirlingRows`] and the power weight is
/// carried incrementally, in log space if it would overflow.
pub fn h_vector(k: usize, y: f64, s: f64, ctl: &SeriesControl) -> Result<HVector> {
    ctl.validate()?;
    if k == 0 {
        return Err(FptError::domain("h-series order must be >= 1"));
    }
    if !(y >= 0.0) || !y.is_finite() {
        return Err(FptError::domain(format!("h-series argument must be >= 0, got {y}")));
    }
    if !(s > 0.0) {
        return Err(FptError::domain(format!("h-series needs s > 0, got {s}")));
    }
    if y == 0.0 {
        return Ok(HVector {
            values: vec![0.0; k],
            terms: 0,
            tail: vec![0.0; k],
        });
    }
    let fact: Vec<f64> = (0..=k)
        .scan(1.0, |f, j| {
            if j > 0 {
                *f *= j as f64;
            }
            Some(*f)
        })
        .collect();
    // w_n = yⁿ/⟨s⟩_n, ratio y/(s+n)
    let peak = (y - s).max(0.0).ceil() as usize + 1;
    let mut weights = ScaledTerms::new(|n| y / (s + n as f64), peak, ctl.max_terms);
    let mut stirling = NormalizedStirlingRows::new(k);
    let mut acc: Vec<Acc> = vec![Acc::new(ctl.compensated); k];
    let mut last = vec![0.0; k];
    let mut prev = vec![0.0; k];
    let mut quiet = 0;
    // n = 0 contributes nothing for j >= 1
    for n in 1..=ctl.max_terms {
        weights.advance();
        stirling.advance();
        let w = weights.current();
        let row = stirling.current();
        let mut all_small = true;
        for j in 1..=k.min(n) {
            let t = fact[j] * row[j] * w;
            acc[j - 1].add(t);
            prev[j - 1] = last[j - 1];
            last[j - 1] = t;
            if !ctl.small(t, acc[j - 1].value()) {
                all_small = false;
            }
        }
        if n < k {
            all_small = false;
        }
        if n > peak && all_small {
            quiet += 1;
            if quiet >= ctl.consecutive {
                let scale = weights.log_scale;
                let values = acc
                    .iter()
                    .map(|a| finish(a.value(), scale, "h-series"))
                    .collect::<Result<Vec<_>>>()?;
                let tail = (0..k)
                    .map(|j| tail_bound(last[j], prev[j]) * scale.exp())
                    .collect();
                return Ok(HVector {
                    values,
                    terms: n,
                    tail,
                });
            }
        } else {
            quiet = 0;
        }
    }
    let worst = (0..k)
        .map(|j| tail_bound(last[j], prev[j]))
        .fold(0.0, f64::max);
    Err(FptError::Truncation {
        series: "h-series",
        terms: ctl.max_terms,
        tail: worst * weights.log_scale.exp(),
    })
}

/// `h_j(y) = j! Σ_{n≥j} [n, j] yⁿ / (n! ⟨s⟩_n)`.
pub fn h_series(j: usize, y: f64, s: f64, ctl: &SeriesControl) -> Result<SeriesValue> {
    let h = h_vector(j, y, s, ctl)?;
    Ok(SeriesValue {
        value: h.values[j - 1],
        terms: h.terms,
        tail: h.tail[j - 1],
    })
}

/// `c*_1(w), …, c*_k(w)` at the scaled argument `y = 2τ(w − c)/σ²`.
pub fn c_star_vector_scaled(k: usize, y: f64, s: f64, ctl: &SeriesControl) -> Result<(Vec<f64>, HVector)> {
    let h = h_vector(k, y, s, ctl)?;
    Ok((log_partition_polys(&h.values), h))
}

/// `c*_k(w) = P_k[h_1(y), …, h_k(y)]`, `y = 2τ(w − c)/σ²`.
pub fn c_star(k: usize, w: f64, p: &FellerParams, ctl: &SeriesControl) -> Result<f64> {
    if !(w > p.c) {
        return Err(FptError::domain(format!(
            "c* needs w > c, got w = {w}, c = {}",
            p.c
        )));
    }
    let (cs, _) = c_star_vector_scaled(k, p.scaled(w), p.shape(), ctl)?;
    Ok(cs[k - 1])
}

/// Relative size below which `c*_k(y0) − c*_k(S)` is flagged as cancelled.
pub const CANCELLATION_THRESHOLD: f64 = 1e-10;

/// FPT cumulants `c_1(T), …, c_K(T)`.
pub fn fpt_cumulants(order: usize, p: &FellerParams, ctl: &SeriesControl) -> Result<CumulantVector> {
    if order == 0 {
        return Err(FptError::domain("cumulant order must be >= 1"));
    }
    let s = p.shape();
    let (start, h_start) = c_star_vector_scaled(order, p.scaled_start(), s, ctl)?;
    let (thresh, h_thresh) = c_star_vector_scaled(order, p.scaled_threshold(), s, ctl)?;
    let mut values = Vec::with_capacity(order);
    let mut info = TruncationInfo::default();
    let mut factor = 1.0;
    for k in 1..=order {
        factor *= -1.0 / p.tau;
        let diff = start[k - 1] - thresh[k - 1];
        if diff.abs() < CANCELLATION_THRESHOLD * thresh[k - 1].abs() {
            info.cancellation.push(k);
            info.warnings.push(format!(
                "c{k}: c*(y0) - c*(S) cancels to {diff:e} against {:e}",
                thresh[k - 1]
            ));
        }
        values.push(factor * diff);
        info.terms_used.push(h_start.terms.max(h_thresh.terms));
        info.tail_estimate
            .push((h_start.tail[k - 1] + h_thresh.tail[k - 1]) * factor.abs());
    }
    if !p.is_degenerate() {
        if !(values[0] > 0.0) {
            info.warnings.push(format!("c1 = {} is not positive", values[0]));
        }
        if order >= 2 && !(values[1] > 0.0) {
            info.warnings.push(format!("c2 = {} is not positive", values[1]));
        }
    }
    Ok(CumulantVector::new(values)?.with_truncation(info))
}

/// `Σ_n b_n` and `Σ_n [2 H_{n−1} b_n − Σ_{k=1}^{n−1} b_k b_{n−k}]` with
/// `b_n = yⁿ / (n ⟨s⟩_n)`, i.e. `c*_1(y)` and `c*_2(y)` from the explicit
/// coefficients.
fn closed_first_two(y: f64, s: f64, ctl: &SeriesControl) -> Result<(f64, f64, usize)> {
    if y == 0.0 {
        return Ok((0.0, 0.0, 0));
    }
    let ln_peak: f64 = (0..((y - s).max(0.0).ceil() as usize + 1))
        .map(|k| (y / (s + k as f64)).ln().max(0.0))
        .sum();
    if 2.0 * ln_peak > DIRECT_LOG_LIMIT {
        return Err(FptError::Overflow("closed-form variance series"));
    }
    let peak = (y - s).max(0.0).ceil() as usize + 1;
    let mut b = vec![0.0]; // b[0] unused
    let mut weight = 1.0; // yⁿ/⟨s⟩_n
    let mut first = Acc::new(ctl.compensated);
    let mut second = Acc::new(ctl.compensated);
    let mut quiet = 0;
    for n in 1..=ctl.max_terms {
        weight *= y / (s + (n - 1) as f64);
        let bn = weight / n as f64;
        b.push(bn);
        let conv: CompensatedSum = (1..n).map(|k| b[k] * b[n - k]).collect();
        let t2 = 2.0 * harmonic(n - 1) * bn - conv.value();
        first.add(bn);
        second.add(t2);
        if n > 2 * peak && ctl.small(bn, first.value()) && ctl.small(t2, second.value()) {
            quiet += 1;
            if quiet >= ctl.consecutive {
                return Ok((first.value(), second.value(), n));
            }
        } else {
            quiet = 0;
        }
    }
    Err(FptError::Truncation {
        series: "closed-form mean/variance series",
        terms: ctl.max_terms,
        tail: b.last().copied().unwrap_or(0.0),
    })
}

/// Mean and variance of `T` from the explicit coefficient series
/// `a_{1,n} = 1/(n⟨s⟩_n)` and `a_{2,n} = 2 H_{n−1}/(n⟨s⟩_n) − Σ_k a_{1,k} a_{1,n−k}`,
/// independent of the Stirling table and of `P_k`.
pub fn fpt_mean_variance_closed(p: &FellerParams, ctl: &SeriesControl) -> Result<(f64, f64)> {
    ctl.validate()?;
    let s = p.shape();
    let (a1, a2, _) = closed_first_two(p.scaled_start(), s, ctl)?;
    let (b1, b2, _) = closed_first_two(p.scaled_threshold(), s, ctl)?;
    let tau = p.tau;
    Ok((-(a1 - b1) / tau, (a2 - b2) / (tau * tau)))
}

/// Classical mean first-passage-time series in gamma-function form,
///
/// ```text
/// E[T] = (S − y0)/(μ − τc)
///      + (1/τ) Σ_{n≥2} sⁿ Γ(s) / (n Γ(s+n)) · [(S−c)ⁿ − (y0−c)ⁿ] / (μ/τ − c)ⁿ.
/// ```
pub fn mean_fpt_series(p: &FellerParams, ctl: &SeriesControl) -> Result<SeriesValue> {
    ctl.validate()?;
    let s = p.shape();
    let level = p.mu / p.tau - p.c;
    let rho_s = (p.threshold - p.c) / level;
    let rho_0 = (p.y0 - p.c) / level;
    let ln_gamma_s = ln_gamma(s);
    let mut acc = Acc::new(ctl.compensated);
    let mut quiet = 0;
    let mut prev = 0.0;
    let peak = (rho_s * s).ceil() as usize + 2;
    for n in 2..ctl.max_terms {
        let nf = n as f64;
        let ln_coef = nf * s.ln() + ln_gamma_s - ln_gamma(s + nf) - nf.ln();
        let t = (ln_coef + nf * rho_s.ln()).exp() - (ln_coef + nf * rho_0.ln()).exp();
        acc.add(t);
        if n > peak && ctl.small(t, acc.value()) {
            quiet += 1;
            if quiet >= ctl.consecutive {
                let value = (p.threshold - p.y0) / (p.mu - p.tau * p.c) + acc.value() / p.tau;
                return Ok(SeriesValue {
                    value,
                    terms: n,
                    tail: tail_bound(t, prev) / p.tau,
                });
            }
        } else {
            quiet = 0;
        }
        prev = t;
    }
    Err(FptError::Truncation {
        series: "mean first-passage-time series",
        terms: ctl.max_terms,
        tail: prev.abs(),
    })
}

/// Raw moments `E[T^k]` by the binomial-type expansion
///
/// ```text
/// E[T^k] = (−1)^k/τ^k Σ_i C(k,i) Y_{k−i}[c*(y0)] Y_i[−c*(S)].
/// ```
///
/// The cumulant recursion gives the same numbers; see
/// [`crate::cumulants::moments_from_cumulants_recursive`].
pub fn fpt_moments(order: usize, p: &FellerParams, ctl: &SeriesControl) -> Result<MomentVector> {
    if order == 0 {
        return Err(FptError::domain("moment order must be >= 1"));
    }
    let s = p.shape();
    let (start, _) = c_star_vector_scaled(order, p.scaled_start(), s, ctl)?;
    let (thresh, _) = c_star_vector_scaled(order, p.scaled_threshold(), s, ctl)?;
    let neg_thresh: Vec<f64> = thresh.iter().map(|v| -v).collect();
    let y_start = bell_complete_all(&start);
    let y_thresh = bell_complete_all(&neg_thresh);
    let mut moments = Vec::with_capacity(order);
    let mut factor = 1.0;
    for k in 1..=order {
        factor *= -1.0 / p.tau;
        let acc: CompensatedSum = (0..=k)
            .map(|i| binomial(k, i) * y_start[k - i] * y_thresh[i])
            .collect();
        moments.push(factor * acc.value());
    }
    MomentVector::new(moments)
}

/// `n`-th unit-step difference of `u ↦ ₁F₁(u; s; y)` at `u = 0`, stepping
/// towards negative `u`:
///
/// ```text
/// ∇ⁿ ₁F₁(u; s; y)|₀ = Σ_{i=0}^{n} (−1)^i C(n, i) ₁F₁(−i; s; y) = yⁿ / ⟨s⟩_n.
/// ```
///
/// Only this direction makes the identity exact, because
/// `⟨u⟩_m = (−1)^m (−u)_m` turns rising factorials into falling ones, which
/// unit differences annihilate. Every `₁F₁(−i; s; y)` is a terminating
/// polynomial, so no series truncation is involved.
pub fn forward_difference_check(n: usize, s: f64, y: f64, ctl: &SeriesControl) -> Result<f64> {
    if n == 0 {
        return Err(FptError::domain("difference order must be >= 1"));
    }
    let mut acc = CompensatedSum::new();
    for i in 0..=n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * binomial(n, i) * kummer_1f1(-(i as f64), s, y, ctl)?.value);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::rising_factorial;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    fn example1() -> FellerParams {
        FellerParams::new(0.9, 1.0 / 1.5, 1.0, 0.0, 0.2, 1.0).unwrap()
    }

    #[test]
    fn parameter_validation_names_invariant() {
        let err = FellerParams::new(0.9, 1.0, 1.0, 0.0, 1.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("y0 < S"), "{err}");
        let err = FellerParams::new(0.9, -1.0, 1.0, 0.0, 0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("tau > 0"));
        let err = FellerParams::new(0.9, 1.0, 0.0, 0.0, 0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("sigma > 0"));
        let err = FellerParams::new(0.9, 1.0, 1.0, 0.1, 0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("c <= 0"));
        let err = FellerParams::new(0.9, 1.0, 1.0, 0.0, -0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("c < y0"));
        let err = FellerParams::new(-0.9, 1.0, 1.0, 0.0, 0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("s ="));
        let p = FellerParams::new(0.9, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(p.is_degenerate());
        assert!(p.require_upcrossing().is_err());
    }

    #[test]
    fn scaled_arguments() {
        let p = FellerParams::new(3.0, 0.2, 1.2, -10.0, 0.0, 10.0).unwrap();
        assert!(rel_err(p.scaled_start(), 2.0 * 0.2 * 10.0 / 1.44) < 1e-15);
        assert!(rel_err(p.scaled_threshold(), 2.0 * 0.2 * 20.0 / 1.44) < 1e-15);
        assert!(p.scaled_start() < p.scaled_threshold());
    }

    #[test]
    fn classification_examples() {
        let ex2 = FellerParams::new(3.0, 0.2, 1.2, -10.0, 0.0, 10.0).unwrap();
        let cl = classify(&ex2);
        assert_eq!(cl.regime, Regime::Suprathreshold);
        assert!(rel_err(cl.stationary.mean(), 15.0) < 1e-14);

        let cl = classify(&example1());
        assert!(rel_err(cl.stationary.shape, 1.8) < 1e-15);
        assert_eq!(cl.boundary, Boundary::Entrance);

        let at = FellerParams::new(1.0, 0.5, 1.0, 0.0, 0.5, 2.0).unwrap();
        assert_eq!(classify(&at).regime, Regime::Threshold);
        let below = FellerParams::new(1.0, 0.5, 1.0, 0.0, 0.5, 3.0).unwrap();
        assert_eq!(classify(&below).regime, Regime::Subthreshold);

        let rough = FellerParams::new(0.2, 1.0, 1.0, 0.0, 0.1, 1.0).unwrap();
        assert_eq!(classify(&rough).boundary, Boundary::NonEntrance);
    }

    #[test]
    fn stationary_mean_identity() {
        for p in [
            example1(),
            FellerParams::new(4.0, 0.2, 2.0, -10.0, 0.0, 10.0).unwrap(),
            FellerParams::new(0.005, 0.25, 0.1, 0.0, 0.01, 0.02).unwrap(),
        ] {
            let st = classify(&p).stationary;
            assert!(rel_err(st.mean(), st.asymptotic_mean) < 1e-14);
        }
    }

    #[test]
    fn kummer_trivial_values() {
        let ctl = SeriesControl::default();
        assert_eq!(kummer_1f1(0.0, 2.7, 3.0, &ctl).unwrap().value, 1.0);
        assert_eq!(kummer_1f1(1.3, 2.7, 0.0, &ctl).unwrap().value, 1.0);
        for y in [0.5, 2.0] {
            let v = kummer_1f1(1.0, 1.0, y, &ctl).unwrap();
            assert!(rel_err(v.value, y.exp()) < 1e-15, "y={y}");
            assert!(v.tail <= 1e-15 * v.value);
        }
        assert!(kummer_1f1(1.0, -2.0, 1.0, &ctl).is_err());
    }

    #[test]
    fn kummer_polynomial_case() {
        // ₁F₁(-2; b; y) = 1 - 2y/b + y²/(b(b+1))
        let ctl = SeriesControl::default();
        let (b, y) = (1.5, 3.0);
        let v = kummer_1f1(-2.0, b, y, &ctl).unwrap().value;
        assert!(rel_err(v, 1.0 - 2.0 * y / b + y * y / (b * (b + 1.0))) < 1e-14);
    }

    #[test]
    fn kummer_large_argument_in_log_space() {
        // ₁F₁(a; a; y) = e^y
        let ctl = SeriesControl::default();
        let v = kummer_1f1(2.5, 2.5, 650.0, &ctl).unwrap();
        assert!(rel_err(v.value, 650f64.exp()) < 1e-11, "{}", v.value);
        assert!(matches!(
            kummer_1f1(2.5, 2.5, 800.0, &ctl),
            Err(FptError::Overflow(_))
        ));
    }

    #[test]
    fn kummer_truncation_error() {
        let ctl = SeriesControl {
            max_terms: 10,
            ..SeriesControl::default()
        };
        assert!(matches!(
            kummer_1f1(1.0, 1.0, 30.0, &ctl),
            Err(FptError::Truncation { .. })
        ));
    }

    #[test]
    fn series_control_validation() {
        let bad = SeriesControl {
            max_terms: 5,
            ..SeriesControl::default()
        };
        assert!(bad.validate().is_err());
        let bad = SeriesControl {
            rel_tol: 0.0,
            ..SeriesControl::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn laplace_at_zero_is_one() {
        let ctl = SeriesControl::default();
        assert_eq!(laplace_fpt(0.0, &example1(), &ctl).unwrap(), 1.0);
        assert!(laplace_fpt(-1.0, &example1(), &ctl).is_err());
    }

    #[test]
    fn laplace_decreasing_on_grid() {
        let ctl = SeriesControl::default();
        let p = example1();
        let mean = fpt_cumulants(1, &p, &ctl).unwrap().mean();
        let zmax = 50.0 / mean;
        let mut prev = 1.0;
        for i in 1..=50 {
            let z = zmax * i as f64 / 50.0;
            let v = laplace_fpt(z, &p, &ctl).unwrap();
            assert!(v > 0.0 && v < prev, "z={z} v={v}");
            prev = v;
        }
    }

    #[test]
    fn h_series_vanishes_at_origin() {
        let ctl = SeriesControl::default();
        for j in 1..=5 {
            assert_eq!(h_series(j, 0.0, 2.7, &ctl).unwrap().value, 0.0);
        }
    }

    #[test]
    fn h1_matches_explicit_coefficients() {
        let ctl = SeriesControl::default();
        for &(y, s) in &[(0.5, 2.7), (2.0, 1.0), (5.56, 8.33), (12.0, 0.4)] {
            let h1 = h_series(1, y, s, &ctl).unwrap();
            let direct: f64 = (1..400)
                .map(|n| y.powi(n) / (n as f64 * rising_factorial(s, n as usize)))
                .take_while(|t| t.is_finite())
                .sum();
            assert!(rel_err(h1.value, direct) < 1e-13, "y={y} s={s}");
            assert!(h1.tail <= 1e-14 * h1.value);
        }
    }

    #[test]
    fn h2_matches_harmonic_form() {
        let ctl = SeriesControl::default();
        let (y, s) = (3.0, 1.7);
        let h2 = h_series(2, y, s, &ctl).unwrap().value;
        let direct: f64 = (2..200)
            .map(|n| 2.0 * harmonic(n - 1) * y.powi(n as i32) / (n as f64 * rising_factorial(s, n)))
            .sum();
        assert!(rel_err(h2, direct) < 1e-13);
    }

    #[test]
    fn h_series_rejects_bad_input() {
        let ctl = SeriesControl::default();
        assert!(h_series(1, -1.0, 2.0, &ctl).is_err());
        assert!(h_series(1, 1.0, -2.0, &ctl).is_err());
        assert!(h_vector(0, 1.0, 2.0, &ctl).is_err());
    }

    #[test]
    fn h_series_large_argument_log_space() {
        // h_1(y) ≈ Σ yⁿ/(n⟨s⟩_n); check log space against direct for a
        // moderately large y where both are usable.
        let ctl = SeriesControl::default();
        let (y, s) = (300.0, 2.0);
        let h1 = h_series(1, y, s, &ctl).unwrap().value;
        let mut w = 1.0;
        let mut sum = 0.0;
        for n in 1..2000 {
            w *= y / (s + (n - 1) as f64);
            sum += w / n as f64;
        }
        assert!(rel_err(h1, sum) < 1e-12, "{h1} vs {sum}");
        assert!(h_series(1, 1000.0, 2.0, &ctl).is_err());
    }

    #[test]
    fn c_star_cases() {
        let ctl = SeriesControl::default();
        let p = example1();
        let w = 0.7;
        let y = p.scaled(w);
        let h = h_vector(2, y, p.shape(), &ctl).unwrap();
        assert_eq!(c_star(1, w, &p, &ctl).unwrap(), h.values[0]);
        let c2 = c_star(2, w, &p, &ctl).unwrap();
        assert!(rel_err(c2, h.values[1] - h.values[0] * h.values[0]) < 1e-15);
        for k in 1..=4 {
            let near = c_star(k, p.c + 1e-13, &p, &ctl).unwrap();
            assert!(near.abs() < 1e-12, "k={k} {near}");
        }
        assert!(c_star(1, p.c, &p, &ctl).is_err());
    }

    #[test]
    fn cumulants_vanish_at_threshold() {
        let ctl = SeriesControl::default();
        let p = example1().with_start(1.0).unwrap();
        let c = fpt_cumulants(4, &p, &ctl).unwrap();
        assert!(c.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(fpt_mean_variance_closed(&p, &ctl).unwrap(), (0.0, 0.0));
        let close = example1().with_start(1.0 - 1e-9).unwrap();
        let c = fpt_cumulants(4, &close, &ctl).unwrap();
        assert!(c.as_slice().iter().all(|v| v.abs() < 1e-7), "{:?}", c.as_slice());
    }

    #[test]
    fn example1_cumulants_against_reference() {
        // high-precision Taylor expansion of log g̃(z)
        let reference = [
            1.21993981333,
            0.930630604228,
            1.72191593872,
            4.87850835007,
            18.5029534516,
        ];
        let c = fpt_cumulants(5, &example1(), &SeriesControl::default()).unwrap();
        for (k, r) in reference.iter().enumerate() {
            assert!(rel_err(c.as_slice()[k], *r) < 1e-10, "k={}", k + 1);
        }
        assert!(c.truncation.warnings.is_empty());
        assert!(c.truncation.cancellation.is_empty());
    }

    #[test]
    fn theorem_and_closed_forms_agree() {
        let ctl = SeriesControl::default();
        let p = example1();
        let c = fpt_cumulants(2, &p, &ctl).unwrap();
        let (m, v) = fpt_mean_variance_closed(&p, &ctl).unwrap();
        assert!(rel_err(c.as_slice()[0], m) < 1e-12);
        assert!(rel_err(c.as_slice()[1], v) < 1e-10);
        let series = mean_fpt_series(&p, &ctl).unwrap();
        assert!(rel_err(series.value, m) < 1e-12);
    }

    #[test]
    fn binomial_moments_agree_with_recursion() {
        let ctl = SeriesControl::default();
        let p = example1();
        let m = fpt_moments(5, &p, &ctl).unwrap();
        let rec = crate::cumulants::moments_from_cumulants_recursive(&fpt_cumulants(5, &p, &ctl).unwrap());
        for k in 1..=5 {
            assert!(rel_err(m.get(k).unwrap(), rec.get(k).unwrap()) < 1e-9, "k={k}");
        }
        let m1 = fpt_moments(1, &p, &ctl).unwrap();
        assert!(rel_err(m1.get(1).unwrap(), fpt_cumulants(1, &p, &ctl).unwrap().mean()) < 1e-14);
    }

    #[test]
    fn forward_differences() {
        let ctl = SeriesControl::default();
        for &(s, y) in &[(2.7, 1.333), (1.0, 0.5), (8.33, 5.56)] {
            let d1 = forward_difference_check(1, s, y, &ctl).unwrap();
            assert!(rel_err(d1, y / s) < 1e-13);
        }
        assert_eq!(forward_difference_check(3, 2.0, 0.0, &ctl).unwrap(), 0.0);
        let d2 = forward_difference_check(2, 2.0, 1.0, &ctl).unwrap();
        assert!((d2 - 1.0 / 6.0).abs() < 1e-14, "{d2}");
        assert!(forward_difference_check(0, 2.0, 1.0, &ctl).is_err());
    }

    #[test]
    fn mean_increases_with_threshold() {
        let ctl = SeriesControl::default();
        let base = example1();
        let mut prev = 0.0;
        for i in 0..15 {
            let s = 0.3 + 0.15 * i as f64;
            let c1 = fpt_cumulants(1, &base.with_threshold(s).unwrap(), &ctl).unwrap().mean();
            assert!(c1 > prev, "S={s}");
            prev = c1;
        }
    }

    #[test]
    fn time_rescaling() {
        // Doubling (τ, μ, σ²) runs the process twice as fast: c_k scales by 2^{-k}.
        let ctl = SeriesControl::default();
        let p = FellerParams::new(4.0, 0.2, 2.0, -10.0, 0.0, 10.0).unwrap();
        let fast = FellerParams::new(8.0, 0.4, 2.0 * 2f64.sqrt(), -10.0, 0.0, 10.0).unwrap();
        let c = fpt_cumulants(4, &p, &ctl).unwrap();
        let f = fpt_cumulants(4, &fast, &ctl).unwrap();
        for k in 1..=4 {
            let expected = c.as_slice()[k - 1] / 2f64.powi(k as i32);
            assert!(rel_err(f.as_slice()[k - 1], expected) < 1e-11, "k={k}");
        }
    }

    #[test]
    fn cancellation_is_flagged() {
        let ctl = SeriesControl::default();
        let p = example1().with_start(1.0 - 1e-13).unwrap();
        let c = fpt_cumulants(3, &p, &ctl).unwrap();
        assert!(!c.truncation.cancellation.is_empty());
    }
}
