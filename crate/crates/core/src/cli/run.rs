//! Command-line entry point shared by the `hjlab` binary and the tests.
//!
//! Exit status: 0 on success, 2 when a report assertion fails, 1 on usage,
//! configuration or runtime errors. Diagnostics go to stderr; data goes to
//! files under the output directory:
//!
//! - `<driver>.json`: `schema_version`, `driver`, `environment`, `config`
//!   (the full echo), `pass`, `warnings`, `report`.
//! - `<driver>*.csv`: plotting series, columns named in the header row.
//! - `timing.json`: wall-clock seconds per stage, kept apart from the report.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use super::cache::{fnv1a64, TableCache};
use super::config::{parse_config, Driver, ExperimentConfig, Format, SlackSpec};
use super::io;
use crate::experiments::{
    a7_equivalence, defect_experiment, diluted_experiment, optimality_case, rate_experiment, Assertion, Scenario, Slack,
    Timings, SCHEMA_VERSION,
};
use crate::geometry::UnitCellGeometry;
use crate::hj_solver::Record;
use crate::Result;

#[derive(Parser, Debug)]
#[command(name = "hjlab", version, about = "Homogenization experiments for Hamilton-Jacobi equations on perforated domains")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cache directory (overrides the config).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Field output format (overrides the config).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Treat warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Slab,
    Both,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Solve the Dirichlet or state-constraint problem at one epsilon.
    Solve,
    /// Evaluate the cell metric at the configured query.
    Metric,
    /// Build (or load) the effective tables.
    Tables,
    /// Convergence rate sweep against the homogenized limit.
    Rate,
    /// Reference lower-bound case at u(0, T).
    Optimality,
    /// Shrinking holes against the hole-free problem.
    Diluted,
    /// Perforation with missing holes.
    Defect,
    /// Dirichlet against state constraint.
    #[command(name = "a7check")]
    A7check,
    /// Version, cache location and catalog.
    Info,
}

impl Cmd {
    fn driver(self) -> Option<Driver> {
        Some(match self {
            Cmd::Solve => Driver::Solve,
            Cmd::Metric => Driver::Metric,
            Cmd::Tables => Driver::Tables,
            Cmd::Rate => Driver::Rate,
            Cmd::Optimality => Driver::Optimality,
            Cmd::Diluted => Driver::Diluted,
            Cmd::Defect => Driver::Defect,
            Cmd::A7check => Driver::A7check,
            Cmd::Info => return None,
        })
    }
}

/// What a driver produced.
struct Outcome {
    report: Value,
    files: Vec<(String, Vec<u8>)>,
    assertions: Vec<Assertion>,
    warnings: Vec<String>,
    summary: String,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialized; --threads ignored");
        }
    }
    let Some(driver) = cli.cmd.driver() else {
        return info(&cli);
    };
    let Some(path) = &cli.config else {
        eprintln!("error: --config PATH is required for `{}`", driver.name());
        return 1;
    };
    let mut cfg = match load_config(path, driver) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return 1;
        }
    };
    if let Some(o) = &cli.out {
        cfg.io.out = o.clone();
    }
    if let Some(c) = &cli.cache {
        cfg.io.cache = c.clone();
    }
    if let Some(f) = cli.format {
        cfg.io.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Slab => Format::Slab,
            FormatArg::Both => Format::Both,
        };
    }
    let cache = TableCache::new(&cfg.io.cache);
    let mut timings = Timings::default();
    let outcome = match execute(driver, &cfg, &cache, &mut timings) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {} failed: {e}", driver.name());
            return 1;
        }
    };
    let pass = outcome.assertions.iter().all(|a| a.pass);
    if let Err(e) = emit(driver, &cfg, &outcome, pass, &timings) {
        eprintln!("error: writing results: {e}");
        return 1;
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for a in outcome.assertions.iter().filter(|a| !a.pass) {
        eprintln!("FAIL {}: {}", a.name, a.detail);
    }
    eprintln!(
        "{}: {} [{}; {} assertion(s), results in {}]",
        driver.name(),
        outcome.summary,
        if pass { "pass" } else { "FAIL" },
        outcome.assertions.len(),
        cfg.io.out.display()
    );
    if cli.strict && !outcome.warnings.is_empty() {
        eprintln!("error: --strict and {} warning(s)", outcome.warnings.len());
        return 1;
    }
    if pass {
        0
    } else {
        2
    }
}

fn load_config(path: &Path, driver: Driver) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg = parse_config(&text)?;
    cfg.check_for(driver)?;
    Ok(cfg)
}

fn info(cli: &Cli) -> i32 {
    let cache = cli.cache.clone().unwrap_or_else(|| PathBuf::from(".hjlab-cache"));
    println!("hjlab {}", env!("CARGO_PKG_VERSION"));
    println!("cache: {}", cache.display());
    println!("drivers: {}", Driver::ALL.map(|d| d.name()).join(", "));
    println!("potentials: bump, bump(amp, inner, outer), zero, const(c), trig(amp), or an expression in x1, x2");
    println!("data: a constant or an expression in x1, x2 (and y1, y2 for b)");
    println!("functions: sin cos exp sqrt abs (1), min max (2), smoothstep (3); constant pi");
    println!("dilution: off, zero, linear, sqrt, or a fixed factor in [0, 1]");
    println!("formats: csv, slab, both");
    0
}

fn slack(cfg: &ExperimentConfig, cache: &TableCache, timings: &mut Timings) -> Result<Slack> {
    match cfg.slack {
        SlackSpec::Fixed(s) => Ok(s),
        SlackSpec::Calibrate => {
            let t0 = std::time::Instant::now();
            let r = cache.slack(&cfg.scenario.numerics)?;
            timings.0.push(("slack".into(), t0.elapsed().as_secs_f64()));
            Ok(r.slack)
        }
    }
}

fn tables(scn: &Scenario, cache: &TableCache, timings: &mut Timings) -> Result<crate::metric::EffectiveTables> {
    let t0 = std::time::Instant::now();
    let t = cache.tables(scn, scn.numerics.k)?;
    timings.0.push((format!("tables k={}", scn.numerics.k), t0.elapsed().as_secs_f64()));
    Ok(t)
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}

fn execute(driver: Driver, cfg: &ExperimentConfig, cache: &TableCache, timings: &mut Timings) -> Result<Outcome> {
    let scn = &cfg.scenario;
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let (report, assertions, summary) = match driver {
        Driver::Solve => {
            let eps = cfg.epsilon.expect("checked by check_for");
            let t0 = std::time::Instant::now();
            let f = scn.solve(eps, cfg.problem, Record::Times(scn.numerics.times().to_vec()))?;
            timings.0.push(("solve".into(), t0.elapsed().as_secs_f64()));
            let last = f.final_slice();
            let admissible = || (0..f.grid.len()).filter(|&i| f.classes[i].is_admissible()).map(|i| last[i]);
            let min = admissible().fold(f64::INFINITY, f64::min);
            let max = admissible().fold(f64::NEG_INFINITY, f64::max);
            let at_origin = f.value([0.0, 0.0], scn.numerics.horizon).ok();
            if cfg.io.format.csv() {
                files.push(("field.csv".into(), io::field_csv(&f).into_bytes()));
            }
            if cfg.io.format.slab() {
                files.push(("field.slab".into(), io::field_slab(&f)));
            }
            let summary = format!("{}x{} nodes, {} steps, final range [{min:.6}, {max:.6}]", f.grid.nx, f.grid.ny, f.steps);
            let report = json!({
                "epsilon": eps,
                "problem": f.problem,
                "h": f.grid.h,
                "dt": f.dt,
                "steps": f.steps,
                "nx": f.grid.nx,
                "ny": f.grid.ny,
                "origin": f.grid.origin,
                "recorded_steps": f.slices.iter().map(|s| s.step).collect::<Vec<_>>(),
                "final_min": min,
                "final_max": max,
                "u_origin_final": at_origin,
            });
            (report, Vec::new(), summary)
        }
        Driver::Metric => {
            let q = cfg.query.expect("checked by check_for");
            let m = scn.metric()?;
            let r = m.mtilde(&q)?;
            let mstar = m.mstar(&q)?;
            let mbar = m.mbar_star(&q, scn.numerics.k)?;
            warnings.extend(r.warnings.iter().cloned());
            let summary = format!("mtilde {:.6}, mstar {:.6}, mbar_star(k={}) {:.6}", r.cost, mstar, mbar.k, mbar.value);
            files.push((
                "metric-path.csv".into(),
                csv("x1,x2", r.path.iter().map(|p| format!("{:?},{:?}", p[0], p[1]))),
            ));
            let report = json!({
                "query": {"tau": q.tau, "t": q.t, "y": q.y, "x": q.x},
                "lattice": m.canonical(),
                "mtilde": r.cost,
                "snap": r.snap,
                "mstar": mstar,
                "mbar_star": mbar,
            });
            (report, Vec::new(), summary)
        }
        Driver::Tables => {
            let t = tables(scn, cache, timings)?;
            let k0 = scn.model.k0();
            let sandwich = t.sandwich_violation(k0);
            let l0 = t.lbar([0.0, 0.0])?;
            let h0 = t.effective_hamiltonian([0.0, 0.0])?;
            let convexity = t.convexity_defect();
            files.push(("tables.csv".into(), t.to_csv().into_bytes()));
            let summary = format!("k={} Lbar(0) {l0:.6}, Hbar(0) {h0:.6}, sandwich violation {sandwich:.3e}", t.k);
            let report = json!({
                "key": t.key,
                "hash": format!("{:016x}", fnv1a64(t.key.as_bytes())),
                "k": t.k,
                "h": t.h,
                "dt": t.dt,
                "spacing": t.spacing,
                "radius": t.radius,
                "lbar_origin": l0,
                "hbar_origin": h0,
                "sandwich_violation": sandwich,
                "convexity_defect": convexity,
            });
            (report, Vec::new(), summary)
        }
        Driver::Rate => {
            let eps = cfg.epsilons();
            let t = tables(scn, cache, timings)?;
            let s = slack(cfg, cache, timings)?;
            let fine = eps.iter().copied().fold(f64::INFINITY, f64::min);
            let h = scn.numerics.spacing(fine);
            let floor = s.eval(h, h / scn.model.m0(), None);
            let r = rate_experiment(scn, &eps, &t, floor, timings)?;
            warnings.extend(r.notices.iter().cloned());
            files.push((
                "rate.csv".into(),
                csv(
                    "epsilon,h,dt,error",
                    r.points.iter().map(|p| format!("{:?},{:?},{:?},{:?}", p.epsilon, p.h, p.dt, p.error)),
                ),
            ));
            let summary = match r.slope {
                Some(sl) => format!("slope {sl:.4}, ratios {:?}", r.ratios),
                None => "slope not fitted".into(),
            };
            (to_value(&r)?, r.assertions.clone(), summary)
        }
        Driver::Optimality => {
            let eps = cfg.epsilons();
            let t = tables(scn, cache, timings)?;
            let s = slack(cfg, cache, timings)?;
            let r = optimality_case(scn, &eps, &t, &s, timings)?;
            files.push((
                "optimality.csv".into(),
                csv(
                    "epsilon,h,dt,value,floor,slack,ratio",
                    r.rows.iter().map(|w| {
                        format!("{:?},{:?},{:?},{:?},{:?},{:?},{:?}", w.epsilon, w.h, w.dt, w.value, w.floor, w.slack, w.ratio)
                    }),
                ),
            ));
            files.push((
                "optimality-paths.csv".into(),
                csv(
                    "epsilon,x1,x2,t",
                    r.rows.iter().flat_map(|w| {
                        w.path.iter().map(move |(x, t)| format!("{:?},{:?},{:?},{:?}", w.epsilon, x[0], x[1], t))
                    }),
                ),
            ));
            let vals: Vec<String> = r.rows.iter().map(|w| format!("{:.5}", w.value)).collect();
            let summary = format!("u(0,T) = [{}], limit {:.3e}", vals.join(", "), r.limit_value);
            (to_value(&r)?, r.assertions.clone(), summary)
        }
        Driver::Diluted => {
            let eps = cfg.epsilons();
            let mut free = scn.clone();
            free.cell = UnitCellGeometry::empty();
            let t = tables(&free, cache, timings)?;
            let r = diluted_experiment(scn, &eps, &t, timings)?;
            files.push((
                "diluted.csv".into(),
                csv(
                    "epsilon,eta,error,bound_term,sandwich_violation",
                    r.rows.iter().map(|w| {
                        format!("{:?},{:?},{:?},{:?},{:?}", w.epsilon, w.eta, w.error, w.bound_term, w.sandwich_violation)
                    }),
                ),
            ));
            let summary = format!("fitted C {:.4}", r.fitted_c);
            (to_value(&r)?, r.assertions.clone(), summary)
        }
        Driver::Defect => {
            let eps = cfg.epsilon.expect("checked by check_for");
            let t = tables(scn, cache, timings)?;
            let r = defect_experiment(scn, eps, &t, timings)?;
            files.push((
                "defect-profile.csv".into(),
                csv("x1,x2,gap", r.profile.iter().map(|p| format!("{:?},{:?},{:?}", p.x[0], p.x[1], p.gap))),
            ));
            let summary = format!("error {:.4e}, fitted C {:.4}", r.error, r.fitted_c);
            (to_value(&r)?, r.assertions.clone(), summary)
        }
        Driver::A7check => {
            let eps = cfg.epsilon.expect("checked by check_for");
            let s = slack(cfg, cache, timings)?;
            let r = a7_equivalence(scn, eps, &s, timings)?;
            warnings.extend(r.notice.iter().cloned());
            let summary = format!("max difference {:.3e} (tolerance {:.3e})", r.max_difference, r.tolerance);
            (to_value(&r)?, r.assertions.clone(), summary)
        }
    };
    Ok(Outcome { report, files, assertions, warnings, summary })
}

fn emit(driver: Driver, cfg: &ExperimentConfig, o: &Outcome, pass: bool, timings: &Timings) -> Result<()> {
    let out = &cfg.io.out;
    std::fs::create_dir_all(out)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "driver": driver.name(),
        "environment": {
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "os": std::env::consts::OS,
            "arch": std::env::consts::ARCH,
        },
        "config": cfg.echo(),
        "pass": pass,
        "warnings": o.warnings,
        "report": o.report,
    });
    io::write(&out.join(format!("{}.json", driver.name())), serde_json::to_string_pretty(&doc)?)?;
    for (name, bytes) in &o.files {
        io::write(&out.join(name), bytes)?;
    }
    io::write(&out.join("timing.json"), serde_json::to_string_pretty(timings)?)?;
    Ok(())
}

