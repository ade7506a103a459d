//! Combinatorial building blocks for the cumulant algebra.
//!
//! Unsigned Stirling numbers of the first kind, rising factorials, harmonic
//! numbers, partial and complete exponential Bell polynomials, and the
//! logarithmic and general partition polynomials. Everything is evaluated in
//! double precision; the Stirling triangle additionally keeps an exact `u64`
//! copy of the rows that fit (n ≤ 20).

use std::sync::{OnceLock, RwLock};

use statrs::function::gamma::ln_gamma;

use crate::error::{FptError, Result};
use crate::sum::CompensatedSum;

/// Largest row of the Stirling triangle representable in double precision
/// (row sums are n!, and 171! overflows).
pub const STIRLING_MAX_N: usize = 170;

/// Largest row whose entries all fit in a `u64` (21! does not).
pub const STIRLING_EXACT_MAX_N: usize = 20;

/// Triangle of unsigned Stirling numbers of the first kind `[n, j]`.
///
/// Built with `[n+1, j] = [n, j-1] + n [n, j]` and grown on demand.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    rows: Vec<Vec<f64>>,
    exact: Vec<Vec<u64>>,
}

impl StirlingTable {
    /// A table holding rows `0..=max_n`.
    pub fn new(max_n: usize) -> Result<Self> {
        let mut table = StirlingTable {
            rows: vec![vec![1.0]],
            exact: vec![vec![1]],
        };
        table.grow_to(max_n)?;
        Ok(table)
    }

    pub fn max_n(&self) -> usize {
        self.rows.len() - 1
    }

    /// Extends the table so that it contains row `n`.
    pub fn grow_to(&mut self, n: usize) -> Result<()> {
        if n > STIRLING_MAX_N {
            return Err(FptError::domain(format!(
                "Stirling row {n} exceeds double-precision horizon {STIRLING_MAX_N}"
            )));
        }
        while self.max_n() < n {
            let m = self.max_n();
            let prev = &self.rows[m];
            let mut next = vec![0.0; m + 2];
            for j in 1..=m + 1 {
                let left = prev[j - 1];
                let here = if j <= m { prev[j] } else { 0.0 };
                next[j] = left + m as f64 * here;
            }
            if m < STIRLING_EXACT_MAX_N {
                let prev = &self.exact[m];
                let mut next_exact = vec![0u64; m + 2];
                for j in 1..=m + 1 {
                    let here = if j <= m { prev[j] } else { 0 };
                    next_exact[j] = prev[j - 1] + m as u64 * here;
                }
                self.exact.push(next_exact);
            }
            self.rows.push(next);
        }
        Ok(())
    }

    /// `[n, j]` in double precision.
    pub fn get(&self, n: usize, j: usize) -> Result<f64> {
        if j > n {
            return Err(FptError::domain(format!("Stirling index j={j} > n={n}")));
        }
        if n > self.max_n() {
            return Err(FptError::domain(format!(
                "Stirling row {n} beyond table size {}",
                self.max_n()
            )));
        }
        Ok(self.rows[n][j])
    }

    /// `[n, j]` as an exact integer, available for `n ≤ 20`.
    pub fn exact(&self, n: usize, j: usize) -> Option<u64> {
        self.exact.get(n).and_then(|row| row.get(j)).copied()
    }

    pub fn row(&self, n: usize) -> Option<&[f64]> {
        self.rows.get(n).map(Vec::as_slice)
    }
}

fn shared_table() -> &'static RwLock<StirlingTable> {
    static TABLE: OnceLock<RwLock<StirlingTable>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(StirlingTable::new(STIRLING_EXACT_MAX_N).expect("row 20")))
}

/// `[n, j]` from a process-wide table that grows lazily up to
/// [`STIRLING_MAX_N`].
pub fn stirling_first_unsigned(n: usize, j: usize) -> Result<f64> {
    if j > n {
        return Err(FptError::domain(format!("Stirling index j={j} > n={n}")));
    }
    {
        let table = shared_table().read().expect("stirling table lock");
        if n <= table.max_n() {
            return table.get(n, j);
        }
    }
    let mut table = shared_table().write().expect("stirling table lock");
    table.grow_to(n)?;
    table.get(n, j)
}

/// Rows of `[n, j] / n!` for `j = 1..=k`, advancing one `n` at a time.
///
/// The normalised numbers stay in `[0, 1]`, so the sequence can be run to any
/// length without overflow, unlike the raw triangle.
#[derive(Debug, Clone)]
pub struct NormalizedStirlingRows {
    n: usize,
    // index j = 0..=k; entry 0 is [n,0]/n!
    row: Vec<f64>,
}

impl NormalizedStirlingRows {
    /// Starts at `n = 0` for columns up to `k`.
    pub fn new(k: usize) -> Self {
        let mut row = vec![0.0; k + 1];
        row[0] = 1.0;
        NormalizedStirlingRows { n: 0, row }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `[n, j] / n!` for the current `n`, `j = 0..=k`.
    pub fn current(&self) -> &[f64] {
        &self.row
    }

    /// Moves to row `n + 1`.
    pub fn advance(&mut self) {
        let n = self.n as f64;
        let inv = 1.0 / (n + 1.0);
        for j in (1..self.row.len()).rev() {
            self.row[j] = (self.row[j - 1] + n * self.row[j]) * inv;
        }
        self.row[0] = 0.0;
        self.n += 1;
    }
}

/// Rising factorial `⟨a⟩_n = a (a+1) ⋯ (a+n-1)` with `⟨a⟩_0 = 1`.
pub fn rising_factorial(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (a + i as f64))
}

/// `ln ⟨a⟩_n` for `a > 0`.
pub fn ln_rising_factorial(a: f64, n: usize) -> Result<f64> {
    if !(a > 0.0) {
        return Err(FptError::domain(format!(
            "log rising factorial needs a > 0, got {a}"
        )));
    }
    if n <= 64 {
        let s: CompensatedSum = (0..n).map(|i| (a + i as f64).ln()).collect();
        Ok(s.value())
    } else {
        Ok(ln_gamma(a + n as f64) - ln_gamma(a))
    }
}

/// Harmonic number `H_n = 1 + 1/2 + ⋯ + 1/n`, `H_0 = 0`.
pub fn harmonic(n: usize) -> f64 {
    let s: CompensatedSum = (1..=n).map(|i| 1.0 / i as f64).collect();
    s.value()
}

/// Binomial coefficient as a double; exact while intermediate values stay
/// below 2^53.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Full table `B[n][j]` of partial Bell polynomials for `0 ≤ j ≤ n ≤ k`,
/// using `B_{n,j} = Σ_{i=1}^{n-j+1} C(n-1, i-1) x_i B_{n-i, j-1}`.
///
/// `x[i-1]` holds `x_i`; only the first `k` entries are read.
pub fn bell_partial_table(k: usize, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    if x.len() < k {
        return Err(FptError::domain(format!(
            "Bell table of order {k} needs {k} arguments, got {}",
            x.len()
        )));
    }
    let mut table = vec![vec![0.0; k + 1]; k + 1];
    table[0][0] = 1.0;
    for n in 1..=k {
        for j in 1..=n {
            let mut acc = CompensatedSum::new();
            for i in 1..=n - j + 1 {
                let lower = table[n - i][j - 1];
                if lower != 0.0 {
                    acc.add(binomial(n - 1, i - 1) * x[i - 1] * lower);
                }
            }
            table[n][j] = acc.value();
        }
    }
    Ok(table)
}

/// Partial exponential Bell polynomial `B_{k,j}(x_1, …, x_{k-j+1})`.
pub fn bell_partial(k: usize, j: usize, x: &[f64]) -> Result<f64> {
    if j > k {
        return Err(FptError::domain(format!("Bell index j={j} > k={k}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    if j == 0 {
        return Ok(0.0);
    }
    let needed = k - j + 1;
    if x.len() < needed {
        return Err(FptError::domain(format!(
            "B_{{{k},{j}}} needs {needed} arguments, got {}",
            x.len()
        )));
    }
    // Only x_1..x_{k-j+1} enter; pad the rest so the table builder is happy.
    let mut padded = x[..needed].to_vec();
    padded.resize(k, 0.0);
    Ok(bell_partial_table(k, &padded)?[k][j])
}

/// Complete Bell polynomials `Y_0, …, Y_k` where `k = y.len()`.
pub fn bell_complete_all(y: &[f64]) -> Vec<f64> {
    let k = y.len();
    let mut out = Vec::with_capacity(k + 1);
    out.push(1.0);
    for n in 0..k {
        // Y_{n+1} = Σ_{i=0}^{n} C(n, i) Y_{n-i} y_{i+1}
        let acc: CompensatedSum = (0..=n)
            .map(|i| binomial(n, i) * out[n - i] * y[i])
            .collect();
        out.push(acc.value());
    }
    out
}

/// Complete Bell polynomial `Y_k(y_1, …, y_k)`, with `Y_0 = 1`.
pub fn bell_complete(k: usize, y: &[f64]) -> Result<f64> {
    if y.len() < k {
        return Err(FptError::domain(format!(
            "Y_{k} needs {k} arguments, got {}",
            y.len()
        )));
    }
    Ok(bell_complete_all(&y[..k])[k])
}

/// Logarithmic partition polynomials `P_1, …, P_k` where `k = x.len()`.
///
/// `P_1 = x_1`, `P_k = x_k − Σ_{r=1}^{k-1} C(k-1, r) x_r P_{k-r}`.
pub fn log_partition_polys(x: &[f64]) -> Vec<f64> {
    let k = x.len();
    // p[m] holds P_m; p[0] unused
    let mut p = vec![0.0; k + 1];
    for m in 1..=k {
        let mut acc = CompensatedSum::new();
        acc.add(x[m - 1]);
        for r in 1..m {
            acc.add(-binomial(m - 1, r) * x[r - 1] * p[m - r]);
        }
        p[m] = acc.value();
    }
    p.remove(0);
    p
}

/// Logarithmic partition polynomial `P_k(x_1, …, x_k)`.
pub fn log_partition_poly(k: usize, x: &[f64]) -> Result<f64> {
    if k == 0 {
        return Err(FptError::domain("P_k is defined for k >= 1"));
    }
    if x.len() < k {
        return Err(FptError::domain(format!(
            "P_{k} needs {k} arguments, got {}",
            x.len()
        )));
    }
    Ok(log_partition_polys(&x[..k])[k - 1])
}

/// General partition polynomial `G_k(a; x) = Σ_j a_j B_{k,j}(x)`.
///
/// `a[j-1]` holds `a_j`. With `a_j = 1` this is `Y_k`; with
/// `a_j = (-1)^{j-1} (j-1)!` it is `P_k`.
pub fn general_partition_poly(k: usize, a: &[f64], x: &[f64]) -> Result<f64> {
    if k == 0 {
        return Err(FptError::domain("G_k is defined for k >= 1"));
    }
    if a.len() < k || x.len() < k {
        return Err(FptError::domain(format!(
            "G_{k} needs {k} coefficients and {k} arguments, got {} and {}",
            a.len(),
            x.len()
        )));
    }
    let table = bell_partial_table(k, x)?;
    let acc: CompensatedSum = (1..=k).map(|j| a[j - 1] * table[k][j]).collect();
    Ok(acc.value())
}
