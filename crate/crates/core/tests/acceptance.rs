//! Acceptance suite: one PASS/FAIL line per criterion, with sub-checks.
//! Exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use feller_fpt::combinatorics::*;
use feller_fpt::cumulants::*;
use feller_fpt::feller::*;
use feller_fpt::laguerre::*;
use feller_fpt::simulate::*;
use feller_fpt::table::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pinned tolerances and budgets.
mod tol {
    pub const COMBINATORIAL: f64 = 1e-12;
    pub const ROUND_TRIP: f64 = 1e-10;
    pub const THEOREM_VS_CLOSED: f64 = 1e-10;
    pub const MOMENTS: f64 = 1e-9;
    pub const NUMERIC_DERIVATIVE: f64 = 1e-6;
    pub const MEAN_SERIES: f64 = 1e-10;
    pub const KUMMER_DERIVATIVE: f64 = 1e-6;
    /// Absolute: an n-th difference of O(1) values cannot be relatively
    /// accurate when the result is tiny.
    pub const DIFFERENCE: f64 = 1e-9;
    pub const MATCHED_COEFF: f64 = 1e-12;
    pub const NORMALIZATION: f64 = 1e-8;
    pub const APPROX_MOMENTS: f64 = 1e-6;
    pub const ALPHA: f64 = 0.01;
    pub const SUP_ERROR: f64 = 0.05;
    pub const MEAN_SE: f64 = 3.0;
    pub const TAIL_SLOPE: f64 = 0.20;
}

const SEED: u64 = 20_240_601;

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

struct Outcome {
    id: &'static str,
    title: &'static str,
    budget: Duration,
    elapsed: Duration,
    checks: Vec<Check>,
}

impl Outcome {
    fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.elapsed <= self.budget
    }
}

fn run(id: &'static str, title: &'static str, budget_s: u64, f: impl FnOnce() -> Vec<Check>) -> Outcome {
    let start = Instant::now();
    let checks = f();
    Outcome { id, title, budget: Duration::from_secs(budget_s), elapsed: start.elapsed(), checks }
}

fn criterion1() -> Vec<Check> {
    let mut out = Vec::new();
    let mut row_ok = true;
    let mut first_ok = true;
    let mut second_ok = true;
    let mut fact: u64 = 1;
    for n in 1..=20u64 {
        let prev_fact = fact;
        fact *= n;
        let sum: u64 = (0..=n as usize).map(|j| stirling_exact(n as usize, j)).sum();
        row_ok &= sum == fact;
        first_ok &= stirling_exact(n as usize, 1) == prev_fact;
        if n >= 2 {
            let v = stirling_first_unsigned(n as usize, 2).unwrap();
            second_ok &= rel_err(v, prev_fact as f64 * harmonic(n as usize - 1)) <= tol::COMBINATORIAL;
        }
    }
    out.push(check("Stirling row sums = n!, n ≤ 20 (exact)", row_ok, ""));
    out.push(check("[n,1] = (n−1)!, n ≤ 20 (exact)", first_ok, ""));
    out.push(check("[n,2] = (n−1)! H_{n−1}, n ≤ 20", second_ok, format!("rel ≤ {:e}", tol::COMBINATORIAL)));

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_g: f64 = 0.0;
    for _ in 0..20 {
        let a: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let (a1, a2, a3, a4, a5) = (a[0], a[1], a[2], a[3], a[4]);
        let (x1, x2, x3, x4, x5) = (x[0], x[1], x[2], x[3], x[4]);
        let rows = [
            a1 * x1,
            a1 * x2 + a2 * x1 * x1,
            a1 * x3 + 3.0 * a2 * x2 * x1 + a3 * x1.powi(3),
            a1 * x4 + 4.0 * a2 * x3 * x1 + 3.0 * a2 * x2 * x2 + 6.0 * a3 * x2 * x1 * x1 + a4 * x1.powi(4),
            a1 * x5
                + 5.0 * a2 * x4 * x1
                + 10.0 * a2 * x3 * x2
                + 10.0 * a3 * x3 * x1 * x1
                + 15.0 * a3 * x2 * x2 * x1
                + 10.0 * a4 * x2 * x1.powi(3)
                + a5 * x1.powi(5),
        ];
        for (k, expected) in rows.iter().enumerate() {
            let g = general_partition_poly(k + 1, &a, &x).unwrap();
            worst_g = worst_g.max(rel_err(g, *expected));
        }
    }
    out.push(check(
        "explicit partition polynomials k ≤ 5, 20 random points",
        worst_g <= tol::COMBINATORIAL,
        format!("max rel err {worst_g:.2e}"),
    ));

    // Laguerre: explicit rising-factorial form vs recurrence. Relative to the
    // sum of absolute terms, since random points may sit near a root.
    let mut worst_l: f64 = 0.0;
    for _ in 0..20 {
        let alpha = rng.random_range(-0.9..3.0);
        let t = rng.random_range(0.0..10.0);
        let all = laguerre_all(5, alpha, t);
        for (k, lk) in all.iter().enumerate() {
            let fact: f64 = (1..=k).map(|v| v as f64).product();
            let terms: Vec<f64> = (0..=k)
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(k, j) * rising_factorial(alpha + 1.0 + j as f64, k - j) * t.powi(j as i32) / fact
                })
                .collect();
            let explicit: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|v| v.abs()).sum();
            worst_l = worst_l.max((lk - explicit).abs() / scale);
        }
    }
    out.push(check(
        "explicit Laguerre polynomials k ≤ 5, 20 random points",
        worst_l <= tol::COMBINATORIAL,
        format!("max rel err {worst_l:.2e} (relative to Σ|terms|)"),
    ));
    out
}

fn stirling_exact(n: usize, j: usize) -> u64 {
    StirlingTable::new(n).unwrap().exact(n, j).unwrap()
}

fn criterion2() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let (mut bell_vs_rec, mut round_trip): (f64, f64) = (0.0, 0.0);
    for k in 1..=8 {
        for _ in 0..50 {
            let c: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cv = CumulantVector::new(c.clone()).unwrap();
            let a = moments_from_cumulants_bell(&cv);
            let b = moments_from_cumulants_recursive(&cv);
            for j in 1..=k {
                let (x, y) = (a.get(j).unwrap(), b.get(j).unwrap());
                bell_vs_rec = bell_vs_rec.max((x - y).abs() / x.abs().max(y.abs()).max(1.0));
            }
            for m in [&a, &b] {
                let back = cumulants_from_moments(m).unwrap();
                for j in 0..k {
                    round_trip = round_trip.max((back.as_slice()[j] - c[j]).abs() / c[j].abs().max(1.0));
                }
            }
        }
    }
    vec![
        check(
            "Bell route vs recursion, K ≤ 8, 400 random vectors",
            bell_vs_rec <= tol::ROUND_TRIP,
            format!("max rel err {bell_vs_rec:.2e}"),
        ),
        check(
            "log-polynomial inversion recovers cumulants",
            round_trip <= tol::ROUND_TRIP,
            format!("max rel err {round_trip:.2e}"),
        ),
    ]
}

fn criterion3() -> Vec<Check> {
    let ctl = SeriesControl::default();
    let mut out = Vec::new();
    for (name, p) in [
        ("example1", example1()),
        ("example2", example2()),
        ("example2-sigma2", example2_sigma2()),
        ("example3", example3()),
    ] {
        let c = fpt_cumulants(5, &p, &ctl).unwrap();
        let (c1, c2) = fpt_mean_variance_closed(&p, &ctl).unwrap();
        let e_closed = rel_err(c.mean(), c1).max(rel_err(c.variance().unwrap(), c2));
        out.push(check(
            format!("{name}: theorem cumulants vs closed mean/variance"),
            e_closed <= tol::THEOREM_VS_CLOSED,
            format!("{e_closed:.2e}"),
        ));

        let m = fpt_moments(5, &p, &ctl).unwrap();
        let r = moments_from_cumulants_recursive(&c);
        let e_mom = (1..=5).map(|j| rel_err(m.get(j).unwrap(), r.get(j).unwrap())).fold(0.0, f64::max);
        out.push(check(
            format!("{name}: binomial-Bell moments vs recursion"),
            e_mom <= tol::MOMENTS,
            format!("{e_mom:.2e}"),
        ));

        // one-sided fourth-order difference; the transform is taken for z ≥ 0
        let h = 1e-3 / c.mean();
        let g = |k: f64| laplace_fpt(k * h, &p, &ctl).unwrap();
        let d = (-25.0 * g(0.0) + 48.0 * g(1.0) - 36.0 * g(2.0) + 16.0 * g(3.0) - 3.0 * g(4.0)) / (12.0 * h);
        let e_lt = rel_err(c.mean(), -d);
        out.push(check(
            format!("{name}: c1 vs −dg̃/dz at 0"),
            e_lt <= tol::NUMERIC_DERIVATIVE,
            format!("{e_lt:.2e}"),
        ));

        let series = mean_fpt_series(&p, &ctl).unwrap().value;
        let e_ser = rel_err(c.mean(), series);
        out.push(check(
            format!("{name}: c1 vs mean-FPT series"),
            e_ser <= tol::MEAN_SERIES,
            format!("{e_ser:.2e}"),
        ));
    }
    out
}

fn criterion4() -> Vec<Check> {
    let ctl = SeriesControl::default();
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for s in [1.8, 2.0 * 5.0 / 1.44] {
        for y in [0.5, 2.0, 5.56] {
            let taylor = taylor_from_samples(|u| kummer_1f1(u, s, y, &ctl).unwrap().value, 0.3, 10);
            let hv = h_vector(4, y, s, &ctl).unwrap();
            let mut fact = 1.0;
            for k in 1..=4 {
                fact *= k as f64;
                worst = worst.max(rel_err(hv.values[k - 1], fact * taylor[k]));
            }
        }
    }
    out.push(check(
        "h_k(y) vs ∂^k/∂u^k ₁F₁(u;s;y) at 0, k ≤ 4, y ∈ {0.5, 2, 5.56}",
        worst <= tol::KUMMER_DERIVATIVE,
        format!("max rel err {worst:.2e}"),
    ));

    let mut worst_d: f64 = 0.0;
    for s in [1.8, 2.0 * 5.0 / 1.44] {
        for y in [0.5, 2.0, 5.56] {
            for n in 1..=5 {
                let lhs = forward_difference_check(n, s, y, &ctl).unwrap();
                let rhs = y.powi(n as i32) / rising_factorial(s, n);
                worst_d = worst_d.max((lhs - rhs).abs());
            }
        }
    }
    out.push(check(
        "unit-step difference identity yⁿ/⟨s⟩_n, n ≤ 5 (backward form)",
        worst_d <= tol::DIFFERENCE,
        format!("max abs err {worst_d:.2e}"),
    ));
    out
}

fn criterion5() -> Vec<Check> {
    let ctl = SeriesControl::default();
    let mut out = Vec::new();
    for (name, p) in examples() {
        let c = fpt_cumulants(5, &p, &ctl).unwrap();
        let approx = LaguerreGammaApprox::from_cumulants(&c, 5).unwrap();
        let a = approx.coefficients();
        let zeroed = a[1].abs() < tol::MATCHED_COEFF * a[0] && a[2].abs() < tol::MATCHED_COEFF * a[0];
        out.push(check(
            format!("{name}: |A1|, |A2| < 1e-12·A0"),
            zeroed,
            format!("A1={:.1e} A2={:.1e} A0={:.4}", a[1], a[2], a[0]),
        ));
        let g = |t: f64| approx.evaluate(t).unwrap();
        let mass = integrate_half_line(g);
        out.push(check(
            format!("{name}: ∫ĝ = 1"),
            (mass - 1.0).abs() <= tol::NORMALIZATION,
            format!("|∫ĝ − 1| = {:.2e}", (mass - 1.0).abs()),
        ));
        let m = moments_from_cumulants_recursive(&c);
        let worst = (1..=5)
            .map(|j| rel_err(integrate_half_line(|t| t.powi(j as i32) * g(t)), m.get(j).unwrap()))
            .fold(0.0, f64::max);
        out.push(check(
            format!("{name}: moments of ĝ match m1..m5"),
            worst <= tol::APPROX_MOMENTS,
            format!("max rel err {worst:.2e}"),
        ));
    }
    out
}

fn criterion6() -> Vec<Check> {
    let ctl = SeriesControl::default();
    let alpha_of = |p: &FellerParams| {
        let c = fpt_cumulants(2, p, &ctl).unwrap();
        match_parameters(&c).unwrap().alpha
    };
    let a3 = alpha_of(&example3());
    let a2 = alpha_of(&example2_sigma2());
    vec![
        check("example3: α = −0.34 ± 0.01", (a3 + 0.34).abs() <= tol::ALPHA, format!("α = {a3:.6}")),
        check("example2-sigma2: α = 0.07 ± 0.01", (a2 - 0.07).abs() <= tol::ALPHA, format!("α = {a2:.6}")),
    ]
}

/// Criteria 7 and 8 share one simulation.
fn criteria7_8() -> (Vec<Check>, Vec<Check>) {
    let ctl = SeriesControl::default();
    let p = example1();
    let c = fpt_cumulants(5, &p, &ctl).unwrap();
    let cfg = SimConfig { dt: 1e-2, n_paths: 10_000, seed: SEED, ..Default::default() };
    let sample = sample_fpt(&p, &cfg).unwrap();
    let approx = LaguerreGammaApprox::from_cumulants(&c, 5).unwrap();
    let t_cut = 2.0 * cfg.dt;
    let grid = GridSpec::Range { t_min: t_cut, t_max: 8.0 * c.mean(), points: 800 };
    let table = build_pdf_table(&approx, &grid, false).unwrap();
    let emp = empirical_pdf(&sample, cfg.estimator, cfg.bandwidth, None).unwrap();
    let report = compare(&table, &emp.table, t_cut).unwrap();
    let z = (sample.mean - c.mean()) / sample.standard_error();
    let c7 = vec![
        check(
            "sup |ĝ − g_sim| over t > t_cut = 2·dt below 0.05",
            report.sup_error < tol::SUP_ERROR,
            format!(
                "sup = {:.4} at t = {:.3} (KDE bandwidth {:.4}), L1 = {:.4}",
                report.sup_error, report.sup_at, emp.bandwidth, report.l1
            ),
        ),
        check(
            "simulated mean within 3 standard errors of c1",
            z.abs() <= tol::MEAN_SE,
            format!("mean = {:.5}, c1 = {:.5}, SE = {:.5}, z = {z:.2}", sample.mean, c.mean(), sample.standard_error()),
        ),
    ];
    let slope = tail_log_survival_slope(&sample, 0.01, 0.1).unwrap_or(f64::NAN);
    let target = -1.0 / c.mean();
    let rel = ((slope - target) / target).abs();
    let c8 = vec![check(
        "log-survival slope (survival in [0.01, 0.1]) within 20% of −1/c1",
        rel <= tol::TAIL_SLOPE,
        format!("slope = {slope:.4}, −1/c1 = {target:.4}, rel diff = {:.1}%", 100.0 * rel),
    )];
    (c7, c8)
}

fn criterion9() -> Vec<Check> {
    let p = example1();
    let csv = |w: usize| {
        let cfg = SimConfig { n_paths: 10_000, seed: SEED, workers: Some(w), ..Default::default() };
        sample_fpt(&p, &cfg).unwrap().to_csv()
    };
    let one = csv(1);
    let two = csv(2);
    let eight = csv(8);
    vec![check(
        "sample CSV byte-identical under 1, 2 and 8 workers",
        one == two && two == eight,
        format!("{} bytes", one.len()),
    )]
}

fn main() {
    let mut outcomes = vec![
        run("1", "combinatorial identities", 1, criterion1),
        run("2", "moment/cumulant round trip", 1, criterion2),
        run("3", "consistency triangle", 5, criterion3),
        run("4", "Kummer derivative and difference identities", 1, criterion4),
        run("5", "approximant structure", 5, criterion5),
        run("6", "α at the example parameters", 5, criterion6),
    ];
    let start = Instant::now();
    let (c7, c8) = criteria7_8();
    let shared = start.elapsed();
    outcomes.push(Outcome { id: "7", title: "end-to-end Example 1", budget: Duration::from_secs(60), elapsed: shared, checks: c7 });
    outcomes.push(Outcome { id: "8", title: "tail law", budget: Duration::from_secs(60), elapsed: shared, checks: c8 });
    outcomes.push(run("9", "reproducibility across workers", 60, criterion9));

    let mut failed = 0;
    for o in &outcomes {
        let status = if o.pass() { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {}: {} ({:.2} s, budget {} s)",
            o.id,
            o.title,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs()
        );
        for c in &o.checks {
            let mark = if c.pass { "ok  " } else { "FAIL" };
            if c.detail.is_empty() {
                println!("    {mark} {}", c.name);
            } else {
                println!("    {mark} {} — {}", c.name, c.detail);
            }
        }
        if !o.pass() {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
