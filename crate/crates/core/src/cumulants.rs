//! Conversions between raw moments and cumulants of a positive random
//! variable.
//!
//! The Laplace transform of a density has Taylor coefficients
//! `g̃_k = (-1)^k E[T^k]`, and its formal cumulants are `(-1)^k c_k(T)`.
//! That sign bookkeeping lives here and nowhere else: callers only ever see
//! raw moments `E[T^k]` and cumulants `c_k(T)`.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{bell_complete_all, binomial, log_partition_polys};
use crate::error::{FptError, Result};
use crate::sum::CompensatedSum;

/// Raw moments `m_1..m_K`; `m_0 = 1` is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector(Vec<f64>);

impl MomentVector {
    pub fn new(moments: Vec<f64>) -> Result<Self> {
        if moments.is_empty() {
            return Err(FptError::domain("moment vector must have order >= 1"));
        }
        Ok(MomentVector(moments))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// `m_j` for `j = 0..=K`.
    pub fn get(&self, j: usize) -> Option<f64> {
        match j {
            0 => Some(1.0),
            _ => self.0.get(j - 1).copied(),
        }
    }

    /// `m_1..m_K`.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `m_0..m_K` with the leading 1.
    pub fn with_unit(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.0.iter().copied()).collect()
    }
}

/// Diagnostics recorded when cumulants come from truncated series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    /// Series terms used per order (0 when not series-based).
    pub terms_used: Vec<usize>,
    /// Estimated absolute tail per order.
    pub tail_estimate: Vec<f64>,
    /// Orders whose value came out of a near-total cancellation.
    pub cancellation: Vec<usize>,
    /// Human-readable diagnostics (non-positive mean/variance, cancellation).
    pub warnings: Vec<String>,
}

/// Cumulants `c_1..c_K` with truncation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantVector {
    values: Vec<f64>,
    pub truncation: TruncationInfo,
}

impl CumulantVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FptError::domain("cumulant vector must have order >= 1"));
        }
        Ok(CumulantVector {
            values,
            truncation: TruncationInfo::default(),
        })
    }

    pub fn with_truncation(mut self, truncation: TruncationInfo) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// `c_k`, 1-based.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values[0]
    }

    pub fn variance(&self) -> Option<f64> {
        self.get(2)
    }
}

/// Cumulants from raw moments, `c_k = (-1)^k P_k(-m_1, m_2, -m_3, …)`.
pub fn cumulants_from_moments(m: &MomentVector) -> Result<CumulantVector> {
    let laplace = laplace_coefficients(m);
    let formal = log_partition_polys(&laplace);
    let values = formal
        .iter()
        .enumerate()
        .map(|(i, &c)| alternate(i + 1) * c)
        .collect();
    CumulantVector::new(values)
}

/// Taylor coefficients `g̃_k = (-1)^k m_k` of the Laplace transform.
fn laplace_coefficients(m: &MomentVector) -> Vec<f64> {
    m.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| alternate(i + 1) * v)
        .collect()
}

fn alternate(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Moments as complete Bell polynomials of the cumulants,
/// `m_k = Y_k(c_1, …, c_k)`.
pub fn moments_from_cumulants_bell(c: &CumulantVector) -> MomentVector {
    let ys = bell_complete_all(c.as_slice());
    MomentVector(ys[1..].to_vec())
}

/// Moments via `m_k = c_k + Σ_{i=1}^{k-1} C(k-1, i-1) c_i m_{k-i}`.
pub fn moments_from_cumulants_recursive(c: &CumulantVector) -> MomentVector {
    let cs = c.as_slice();
    let mut m: Vec<f64> = Vec::with_capacity(cs.len());
    for k in 1..=cs.len() {
        let mut acc = CompensatedSum::new();
        acc.add(cs[k - 1]);
        for i in 1..k {
            acc.add(binomial(k - 1, i - 1) * cs[i - 1] * m[k - i - 1]);
        }
        m.push(acc.value());
    }
    MomentVector(m)
}

/// Skewness `c_3 / c_2^{3/2}` and excess kurtosis `c_4 / c_2^2`.
pub fn standardized_shape(c: &CumulantVector) -> Result<(f64, f64)> {
    if c.order() < 4 {
        return Err(FptError::domain(format!(
            "shape statistics need 4 cumulants, got {}",
            c.order()
        )));
    }
    let c2 = c.as_slice()[1];
    if !(c2 > 0.0) {
        return Err(FptError::domain(format!(
            "shape statistics need c2 > 0, got {c2}"
        )));
    }
    let c3 = c.as_slice()[2];
    let c4 = c.as_slice()[3];
    Ok((c3 / c2.powf(1.5), c4 / (c2 * c2)))
}
