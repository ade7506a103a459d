use std::fmt::Write as _;

use feller_fpt::cumulants::standardized_shape;
use feller_fpt::feller::{classify, fpt_cumulants, fpt_moments, FellerParams, Regime, SeriesControl};
use feller_fpt::laguerre::{build_pdf_table, check_conditions, LaguerreGammaApprox, DEFAULT_DEGREE};
use feller_fpt::simulate::{
    compare as compare_tables, empirical_pdf, sample_fpt, Bandwidth, Estimator, SimConfig, MIN_SAMPLES,
};
use feller_fpt::table::{GridSpec, PdfTable};
use serde_json::{json, Value};

use crate::manifest::{ensure_dir, Manifest};
use crate::settings::Settings;
use crate::{ApproxArgs, CliError, CompareArgs, CumulantsArgs, Format, GridArgs, ModelArgs, SimulateArgs};

const DEFAULT_GRID_POINTS: usize = 400;

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn load_settings(model: &ModelArgs) -> Result<Settings, CliError> {
    let mut s = Settings::load(model.params.as_deref())?;
    s.set("mu", model.mu);
    s.set("tau", model.tau);
    s.set("sigma", model.sigma);
    s.set("c", model.c);
    s.set("y0", model.y0);
    s.set("S", model.threshold);
    Ok(s)
}

fn feller_params(s: &Settings) -> Result<FellerParams, CliError> {
    let p = FellerParams::new(
        s.require("mu")?,
        s.require("tau")?,
        s.require("sigma")?,
        s.get("c")?.unwrap_or(0.0),
        s.require("y0")?,
        s.require("S")?,
    )
    .map_err(CliError::input)?;
    p.require_upcrossing().map_err(CliError::input)?;
    Ok(p)
}

fn params_json(p: &FellerParams) -> Value {
    json!({
        "mu": p.mu, "tau": p.tau, "sigma": p.sigma, "c": p.c, "y0": p.y0, "S": p.threshold,
    })
}

fn echo_params(table: &mut PdfTable, p: &FellerParams) {
    for (k, v) in [
        ("mu", p.mu),
        ("tau", p.tau),
        ("sigma", p.sigma),
        ("c", p.c),
        ("y0", p.y0),
        ("S", p.threshold),
    ] {
        table.params.insert(k.to_string(), v);
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Suprathreshold => "suprathreshold",
        Regime::Subthreshold => "subthreshold",
        Regime::Threshold => "threshold",
    }
}

fn grid_settings(s: &mut Settings, g: &GridArgs) {
    s.set("grid_min", g.grid_min);
    s.set("grid_max", g.grid_max);
    s.set("grid_points", g.grid_points);
}

fn grid_spec(s: &Settings, default_min: f64, default_max: f64) -> Result<GridSpec, CliError> {
    let grid = GridSpec::Range {
        t_min: s.get("grid_min")?.unwrap_or(default_min),
        t_max: s.get("grid_max")?.unwrap_or(default_max),
        points: s.get("grid_points")?.unwrap_or(DEFAULT_GRID_POINTS),
    };
    grid.points().map_err(CliError::input)?;
    Ok(grid)
}

fn grid_json(g: &GridSpec) -> Value {
    match g {
        GridSpec::Range { t_min, t_max, points } => json!({ "t_min": t_min, "t_max": t_max, "points": points }),
        GridSpec::Explicit(ts) => json!(ts),
    }
}

fn series_control(rel_tol: Option<f64>, max_terms: Option<usize>) -> Result<SeriesControl, CliError> {
    let mut ctl = SeriesControl::default();
    if let Some(t) = rel_tol {
        ctl.rel_tol = t;
    }
    if let Some(n) = max_terms {
        ctl.max_terms = n;
    }
    ctl.validate().map_err(CliError::input)?;
    Ok(ctl)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn table_text(table: &mut PdfTable, manifest: &Manifest, format: Format) -> String {
    table.manifest = Some(manifest.file_name());
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    }
}

pub fn cumulants(args: CumulantsArgs) -> Result<(), CliError> {
    let mut s = load_settings(&args.model)?;
    s.set("order", args.order);
    let p = feller_params(&s)?;
    let order: usize = s.get("order")?.unwrap_or(5);
    if order == 0 {
        return Err(CliError::Usage("--order must be >= 1".into()));
    }
    let ctl = series_control(args.rel_tol, args.max_terms)?;
    ensure_dir(&args.output.out)?;

    let c = fpt_cumulants(order, &p, &ctl).map_err(CliError::compute)?;
    let m = fpt_moments(order, &p, &ctl).map_err(CliError::compute)?;
    let class = classify(&p);
    let shape = standardized_shape(&c).ok();
    let info = &c.truncation;

    let mut manifest = Manifest::new("cumulants", &args.output.out);
    manifest.config("params", params_json(&p));
    manifest.config("order", order);
    manifest.config("series", json!({ "rel_tol": ctl.rel_tol, "max_terms": ctl.max_terms, "compensated": ctl.compensated }));

    let name = format!("cumulants.{}", ext(args.output.format));
    let text = match args.output.format {
        Format::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# manifest={}", manifest.file_name());
            let _ = writeln!(out, "# regime={}", regime_name(class.regime));
            let _ = writeln!(out, "# shape_s={:.16e}", p.shape());
            if let Some((skew, kurt)) = shape {
                let _ = writeln!(out, "# skewness={skew:.16e}");
                let _ = writeln!(out, "# excess_kurtosis={kurt:.16e}");
            }
            for w in &info.warnings {
                let _ = writeln!(out, "# warning={w}");
            }
            out.push_str("k,cumulant,moment,terms_used,tail_estimate,cancellation\n");
            for k in 1..=order {
                let _ = writeln!(
                    out,
                    "{k},{:.16e},{:.16e},{},{:.3e},{}",
                    c.get(k).unwrap(),
                    m.get(k).unwrap(),
                    info.terms_used[k - 1],
                    info.tail_estimate[k - 1],
                    info.cancellation.contains(&k) as u8
                );
            }
            out
        }
        Format::Json => {
            let doc = json!({
                "manifest": manifest.file_name(),
                "params": params_json(&p),
                "shape_s": p.shape(),
                "regime": regime_name(class.regime),
                "cumulants": c.as_slice(),
                "moments": m.as_slice(),
                "skewness": shape.map(|x| x.0),
                "excess_kurtosis": shape.map(|x| x.1),
                "terms_used": info.terms_used,
                "tail_estimate": info.tail_estimate,
                "cancellation": info.cancellation,
                "warnings": info.warnings,
            });
            serde_json::to_string_pretty(&doc).unwrap() + "\n"
        }
    };
    manifest.emit(&name, &text)?;
    manifest.result("c1", c.mean());
    manifest.result("warnings", info.warnings.clone());
    let path = manifest.finish()?;
    warn_all(&info.warnings);

    println!("regime: {}, s = {}", regime_name(class.regime), p.shape());
    for k in 1..=order {
        println!("c{k} = {:.12e}   m{k} = {:.12e}", c.get(k).unwrap(), m.get(k).unwrap());
    }
    println!("wrote {} and {}", args.output.out.join(&name).display(), path.display());
    Ok(())
}

pub fn approx(args: ApproxArgs) -> Result<(), CliError> {
    let mut s = load_settings(&args.model)?;
    grid_settings(&mut s, &args.grid);
    let p = feller_params(&s)?;
    let orders = if !args.order.is_empty() {
        args.order.clone()
    } else {
        vec![s.get("order")?.unwrap_or(DEFAULT_DEGREE)]
    };
    if let Some(bad) = orders.iter().find(|n| **n < 2) {
        return Err(CliError::Usage(format!("--order must be >= 2, got {bad}")));
    }
    let ctl = SeriesControl::default();
    let k = *orders.iter().max().unwrap();
    ensure_dir(&args.output.out)?;

    let c = fpt_cumulants(k, &p, &ctl).map_err(CliError::compute)?;
    warn_all(&c.truncation.warnings);
    let grid = grid_spec(&s, 1e-3 * c.mean(), 6.0 * c.mean())?;

    let mut manifest = Manifest::new("approx", &args.output.out);
    manifest.config("params", params_json(&p));
    manifest.config("orders", orders.clone());
    manifest.config("grid", grid_json(&grid));
    manifest.config("clip", args.clip);

    let mut summaries = Vec::new();
    for &n in &orders {
        let approx = LaguerreGammaApprox::from_cumulants(&c, n).map_err(CliError::compute)?;
        let report = check_conditions(&approx, &c);
        let mut table = build_pdf_table(&approx, &grid, args.clip).map_err(CliError::compute)?;
        echo_params(&mut table, &p);
        let name = format!("approx_n{n}.{}", ext(args.output.format));
        let text = table_text(&mut table, &manifest, args.output.format);
        manifest.emit(&name, &text)?;

        let diag = json!({
            "manifest": manifest.file_name(),
            "degree": n,
            "alpha": approx.alpha(),
            "beta": approx.beta(),
            "coefficients": approx.coefficients(),
            "diagnostics": approx.diagnostics(),
            "conditions": report,
            "negative_count": table.negative_count,
        });
        let diag_name = format!("approx_n{n}_diagnostics.json");
        manifest.emit(&diag_name, &(serde_json::to_string_pretty(&diag).unwrap() + "\n"))?;

        for note in &report.notes {
            eprintln!("note (n={n}): {note}");
        }
        if table.negative_count > 0 {
            eprintln!("note (n={n}): {} negative density values{}", table.negative_count, if args.clip { " clipped to 0" } else { "" });
        }
        println!(
            "n = {n}: alpha = {:.6}, beta = {:.6}, A = {:?}",
            approx.alpha(),
            approx.beta(),
            approx.coefficients()
        );
        summaries.push(json!({ "degree": n, "alpha": approx.alpha(), "beta": approx.beta(), "negative_count": table.negative_count }));
    }
    manifest.result("approximants", summaries);
    let path = manifest.finish()?;
    println!("wrote {} files to {} ({})", orders.len() * 2, args.output.out.display(), path.display());
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut s = load_settings(&args.model)?;
    s.set("n_paths", args.paths);
    s.set("dt", args.dt);
    s.set("t_max", args.tmax);
    s.set("seed", args.seed);
    s.set("estimator", args.estimator.clone());
    s.set("bandwidth", args.bandwidth.clone());
    s.set("workers", args.workers);
    grid_settings(&mut s, &args.grid);
    let p = feller_params(&s)?;

    let defaults = SimConfig::default();
    let estimator = match s.raw("estimator") {
        Some(v) => v.parse::<Estimator>().map_err(CliError::input)?,
        None => defaults.estimator,
    };
    let bandwidth = match s.raw("bandwidth") {
        Some(v) => v.parse::<Bandwidth>().map_err(CliError::input)?,
        None => defaults.bandwidth,
    };
    let cfg = SimConfig {
        dt: s.get("dt")?.unwrap_or(defaults.dt),
        n_paths: s.get("n_paths")?.unwrap_or(defaults.n_paths),
        t_max: s.get("t_max")?,
        seed: s.get("seed")?.unwrap_or(defaults.seed),
        estimator,
        bandwidth,
        workers: s.get("workers")?,
    };
    cfg.validate().map_err(CliError::input)?;
    let t_max = cfg.resolve_t_max(&p).map_err(CliError::compute)?;
    let grid = if s.raw("grid_min").is_some() || s.raw("grid_max").is_some() || s.raw("grid_points").is_some() {
        Some(grid_spec(&s, 2.0 * cfg.dt, t_max)?)
    } else {
        None
    };
    ensure_dir(&args.output.out)?;

    let sample = sample_fpt(&p, &cfg).map_err(CliError::compute)?;
    warn_all(&sample.warnings);
    let uncensored = sample.len() - sample.censored_count;
    let emp = if uncensored >= MIN_SAMPLES {
        Some(empirical_pdf(&sample, cfg.estimator, cfg.bandwidth, grid.as_ref()).map_err(CliError::compute)?)
    } else {
        eprintln!("warning: only {uncensored} uncensored paths (< {MIN_SAMPLES}); no density estimate written");
        None
    };

    let mut manifest = Manifest::new("simulate", &args.output.out);
    manifest.config("params", params_json(&p));
    manifest.config(
        "simulation",
        json!({
            "dt": cfg.dt, "n_paths": cfg.n_paths, "t_max": t_max, "seed": cfg.seed,
            "estimator": cfg.estimator.to_string(), "bandwidth": cfg.bandwidth.to_string(),
        }),
    );
    if let Some(g) = &grid {
        manifest.config("grid", grid_json(g));
    }

    let sample_name = format!("sample.{}", ext(args.output.format));
    let sample_text = match args.output.format {
        Format::Csv => format!("# manifest={}\n{}", manifest.file_name(), sample.to_csv()),
        Format::Json => {
            let mut v = serde_json::to_value(&sample).unwrap();
            v["manifest"] = json!(manifest.file_name());
            serde_json::to_string_pretty(&v).unwrap() + "\n"
        }
    };
    manifest.emit(&sample_name, &sample_text)?;

    let mut written = vec![sample_name];
    if let Some(emp) = &emp {
        let mut table = emp.table.clone();
        echo_params(&mut table, &p);
        table.params.insert("dt".into(), cfg.dt);
        table.params.insert("seed".into(), cfg.seed as f64);
        table.params.insert("t_max".into(), t_max);
        let emp_name = format!("empirical.{}", ext(args.output.format));
        let text = table_text(&mut table, &manifest, args.output.format);
        manifest.emit(&emp_name, &text)?;
        written.push(emp_name);
    }

    let se = sample.standard_error();
    manifest.result(
        "sample",
        json!({
            "mean": finite(sample.mean), "variance": finite(sample.variance), "skewness": finite(sample.skewness),
            "standard_error": finite(se), "censored_count": sample.censored_count,
            "reflections": sample.reflections, "bandwidth": emp.as_ref().map(|e| e.bandwidth), "warnings": sample.warnings,
        }),
    );
    let path = manifest.finish()?;
    println!(
        "{} paths, {} censored, mean FPT = {:.6} ± {:.6} (SE)",
        sample.len(),
        sample.censored_count,
        sample.mean,
        se
    );
    if let Some(emp) = &emp {
        println!("{} bandwidth = {:.4}", cfg.estimator, emp.bandwidth);
    }
    println!("wrote {} to {} ({})", written.join(", "), args.output.out.display(), path.display());
    Ok(())
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn compare(args: CompareArgs) -> Result<(), CliError> {
    let approx = PdfTable::read(&args.approx).map_err(CliError::input)?;
    let empirical = PdfTable::read(&args.empirical).map_err(CliError::input)?;
    let t_cut = args
        .t_cut
        .or_else(|| empirical.params.get("dt").map(|dt| 2.0 * dt))
        .unwrap_or(0.0);
    ensure_dir(&args.output.out)?;
    let report = compare_tables(&approx, &empirical, t_cut).map_err(CliError::input)?;

    let mut manifest = Manifest::new("compare", &args.output.out);
    manifest.config("approx", args.approx.display().to_string());
    manifest.config("empirical", args.empirical.display().to_string());
    manifest.config("t_cut", t_cut);

    let name = format!("compare.{}", ext(args.output.format));
    let text = match args.output.format {
        Format::Csv => format!("# manifest={}\n{}", manifest.file_name(), report.to_csv()),
        Format::Json => {
            let mut v = serde_json::to_value(&report).unwrap();
            v["manifest"] = json!(manifest.file_name());
            v["sup_at"] = finite(report.sup_at);
            serde_json::to_string_pretty(&v).unwrap() + "\n"
        }
    };
    manifest.emit(&name, &text)?;
    manifest.result(
        "summary",
        json!({ "sup_error": report.sup_error, "sup_at": finite(report.sup_at), "l1": report.l1, "points": report.grid.len() }),
    );
    let path = manifest.finish()?;
    println!(
        "sup |error| over t >= {t_cut} = {:.6} at t = {:.4}; L1 = {:.6} ({} points)",
        report.sup_error,
        report.sup_at,
        report.l1,
        report.grid.len()
    );
    println!("wrote {} ({})", args.output.out.join(&name).display(), path.display());
    Ok(())
}
