#![allow(dead_code)]

use feller_fpt::feller::FellerParams;

pub fn example1() -> FellerParams {
    FellerParams::new(0.9, 1.0 / 1.5, 1.0, 0.0, 0.2, 1.0).unwrap()
}

pub fn example2() -> FellerParams {
    FellerParams::new(3.0, 0.2, 1.2, -10.0, 0.0, 10.0).unwrap()
}

/// Example 2 with σ = 2, μ = 4.
pub fn example2_sigma2() -> FellerParams {
    FellerParams::new(4.0, 0.2, 2.0, -10.0, 0.0, 10.0).unwrap()
}

pub fn example3() -> FellerParams {
    FellerParams::new(0.02 * 0.25, 0.25, 0.1, 0.0, 0.01, 0.02).unwrap()
}

pub fn examples() -> [(&'static str, FellerParams); 3] {
    [("example1", example1()), ("example2", example2()), ("example3", example3())]
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// `∫_0^∞ f(w) dw` by the exp-sinh rule. Copes with integrable endpoint
/// singularities such as `w^α`, `α > −1`.
pub fn integrate_half_line(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / 64.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let (lo, hi) = ((-6.0 / h) as i64, (4.5 / h) as i64);
    for i in lo..=hi {
        let u = i as f64 * h;
        let w = (half_pi * u.sinh()).exp();
        if w == 0.0 || !w.is_finite() {
            continue;
        }
        let v = f(w);
        if v != 0.0 {
            sum += v * w * half_pi * u.cosh();
        }
    }
    sum * h
}

/// Taylor coefficients `a_0..a_{2m}` of `f` at 0 from samples at `i·h`,
/// `i = −m..m`, by solving the Vandermonde system.
pub fn taylor_from_samples(f: impl Fn(f64) -> f64, h: f64, m: usize) -> Vec<f64> {
    let n = 2 * m + 1;
    let nodes: Vec<f64> = (0..n).map(|i| i as f64 - m as f64).collect();
    let mut a: Vec<Vec<f64>> = nodes
        .iter()
        .map(|x| {
            let mut row: Vec<f64> = (0..n).map(|j| x.powi(j as i32)).collect();
            row.push(f(x * h));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    (0..n).map(|j| a[j][n] / a[j][j] / h.powi(j as i32)).collect()
}

#[test]
fn quadrature_on_gamma_integrals() {
    for alpha in [-0.5, -0.34, 0.0, 0.6, 3.2] {
        let v = integrate_half_line(|w| w.powf(alpha) * (-w).exp());
        let g = statrs::function::gamma::gamma(alpha + 1.0);
        assert!(rel_err(v, g) < 1e-13, "alpha={alpha}: {v} vs {g}");
    }
}

#[test]
fn taylor_of_exponential() {
    let a = taylor_from_samples(|x| (2.0 * x).exp(), 0.05, 6);
    let mut fact = 1.0;
    for (j, aj) in a.iter().enumerate().take(5) {
        if j > 0 {
            fact *= j as f64;
        }
        assert!(rel_err(*aj, 2f64.powi(j as i32) / fact) < 1e-9, "j={j}");
    }
}
