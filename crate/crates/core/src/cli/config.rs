//! Line-based run configuration.
//!
//! ```text
//! file    := line*
//! line    := blank | comment | header | entry
//! comment := '#' any*
//! header  := '[' name ']'
//! entry   := key '=' value
//! ```
//!
//! Sections are `geometry`, `hole` (repeatable, one disc each), `model`,
//! `data`, `numerics`, `experiment` and `io`. Numbers may be written as
//! constant expressions (`1/16`), lists as `[a, b, c]`, and integer pairs as
//! `[[i, j], [k, l]]`. Keys may appear once per section instance; unknown
//! sections and keys are errors. All errors are collected before returning.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use super::expr::{parse_expression, Domain, Expr, Var};
use crate::dynamics::{estimate_lipschitz, BoundaryData, DataFn, Hamiltonian, LagrangianModel, ModelOptions, Potential};
use crate::experiments::{Dilution, Numerics, Scenario, Slack};
use crate::geometry::{CellIndex, Hole, UnitCellGeometry};
use crate::hj_solver::Problem;
use crate::metric::MetricQuery;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Driver {
    Solve,
    Metric,
    Tables,
    Rate,
    Optimality,
    Diluted,
    Defect,
    A7check,
}

impl Driver {
    pub const ALL: [Driver; 8] = [
        Driver::Solve,
        Driver::Metric,
        Driver::Tables,
        Driver::Rate,
        Driver::Optimality,
        Driver::Diluted,
        Driver::Defect,
        Driver::A7check,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Driver::Solve => "solve",
            Driver::Metric => "metric",
            Driver::Tables => "tables",
            Driver::Rate => "rate",
            Driver::Optimality => "optimality",
            Driver::Diluted => "diluted",
            Driver::Defect => "defect",
            Driver::A7check => "a7check",
        }
    }

    pub fn from_name(s: &str) -> Option<Driver> {
        Driver::ALL.into_iter().find(|d| d.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Slab,
    Both,
}

impl Format {
    pub fn from_name(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "slab" => Some(Format::Slab),
            "both" => Some(Format::Both),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Slab => "slab",
            Format::Both => "both",
        }
    }

    pub fn csv(self) -> bool {
        self != Format::Slab
    }

    pub fn slab(self) -> bool {
        self != Format::Csv
    }
}

/// Where tolerance budgets come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlackSpec {
    /// Calibrate on the hole-free quadratic case (cached).
    Calibrate,
    Fixed(Slack),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IoConfig {
    pub out: PathBuf,
    pub cache: PathBuf,
    pub format: Format,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub driver: Option<Driver>,
    pub epsilon_list: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub problem: Problem,
    pub query: Option<MetricQuery>,
    pub slack: SlackSpec,
    pub io: IoConfig,
}

const KEYS: &[(&str, &[&str])] = &[
    ("geometry", &["dilution", "defects"]),
    ("hole", &["center", "radius"]),
    ("model", &["potential", "drift", "m0", "k0", "c1", "a7"]),
    ("data", &["g", "b", "lip_g", "lip_b", "bbar_samples"]),
    (
        "numerics",
        &[
            "h",
            "h_ratio",
            "dt_policy",
            "ndir",
            "nrad",
            "k",
            "nodes_per_unit",
            "move_radius",
            "vmax",
            "table_spacing",
            "table_radius",
            "slack",
        ],
    ),
    ("experiment", &["driver", "epsilon_list", "epsilon", "horizon", "window", "wrap", "problem", "query"]),
    ("io", &["out", "cache", "format"]),
];

struct Entry {
    line: usize,
    value: String,
}

#[derive(Default)]
struct Section {
    entries: BTreeMap<String, Entry>,
}

struct Raw {
    sections: BTreeMap<String, Section>,
    holes: Vec<(usize, Section)>,
}

fn lex_sections(text: &str, errs: &mut Vec<String>) -> Raw {
    let mut raw = Raw { sections: BTreeMap::new(), holes: Vec::new() };
    let mut current: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let ln = n + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errs.push(format!("line {ln}: unterminated section header"));
                continue;
            };
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                errs.push(format!("line {ln}: unknown section [{name}]"));
                current = None;
                continue;
            }
            if name == "hole" {
                raw.holes.push((ln, Section::default()));
            } else if raw.sections.contains_key(name) {
                errs.push(format!("line {ln}: section [{name}] repeated"));
            } else {
                raw.sections.insert(name.to_string(), Section::default());
            }
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errs.push(format!("line {ln}: expected `key = value`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = current.as_deref() else {
            errs.push(format!("line {ln}: `{key}` outside any section"));
            continue;
        };
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            errs.push(format!("line {ln}: unknown key `{key}` in [{sec}]"));
            continue;
        }
        if value.is_empty() {
            errs.push(format!("line {ln}: `{key}` has no value"));
            continue;
        }
        let section = if sec == "hole" {
            &mut raw.holes.last_mut().unwrap().1
        } else {
            raw.sections.get_mut(sec).unwrap()
        };
        if section.entries.contains_key(key) {
            errs.push(format!("line {ln}: `{key}` repeated in [{sec}]"));
            continue;
        }
        section.entries.insert(key.to_string(), Entry { line: ln, value: value.to_string() });
    }
    raw
}

fn is_constant(e: &Expr) -> bool {
    ![Var::X1, Var::X2, Var::T, Var::Y1, Var::Y2].into_iter().any(|v| e.uses(v))
}

fn number(s: &str) -> std::result::Result<f64, String> {
    if let Ok(v) = s.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    let e = parse_expression(s).map_err(|e| e.to_string())?;
    if !is_constant(&e) {
        return Err(format!("`{s}` is not a constant"));
    }
    let v = e.eval(&Default::default());
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Splits `[a, b, c]` at top-level commas.
fn list(s: &str) -> std::result::Result<Vec<String>, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("expected a list `[...]`, got `{s}`"))?;
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in inner.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if c == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    } else if !out.is_empty() {
        return Err("empty list element".into());
    }
    Ok(out)
}

fn nonnegative(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if v < 0.0 {
        return Err(format!("`{s}` must be nonnegative"));
    }
    Ok(v)
}

fn numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    list(s)?.iter().map(|x| number(x)).collect()
}

fn integer(s: &str) -> std::result::Result<i64, String> {
    let v = number(s)?;
    if v.fract() != 0.0 || v.abs() > 1e15 {
        return Err(format!("`{s}` is not an integer"));
    }
    Ok(v as i64)
}

fn positive_count(s: &str) -> std::result::Result<usize, String> {
    let v = integer(s)?;
    if v < 1 {
        return Err(format!("`{s}` must be a positive integer"));
    }
    Ok(v as usize)
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn auto_or(s: &str) -> std::result::Result<Option<f64>, String> {
    if s == "auto" {
        Ok(None)
    } else {
        number(s).map(Some)
    }
}

fn call_args<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

pub fn parse_potential(s: &str) -> std::result::Result<Potential, String> {
    let args = |inner: &str| numbers(&format!("[{inner}]"));
    Ok(match s {
        "bump" => Potential::reference_bump(),
        "zero" => Potential::Constant(0.0),
        _ => {
            if let Some(a) = call_args(s, "bump") {
                match args(a)?.as_slice() {
                    &[amp, inner, outer] if 0.0 <= inner && inner < outer && outer <= 0.5 => {
                        Potential::Bump { amp, inner, outer }
                    }
                    _ => return Err("bump(amp, inner, outer) needs 0 <= inner < outer <= 1/2".into()),
                }
            } else if let Some(a) = call_args(s, "const") {
                match args(a)?.as_slice() {
                    &[c] => Potential::Constant(c),
                    _ => return Err("const(c) takes one argument".into()),
                }
            } else if let Some(a) = call_args(s, "trig") {
                match args(a)?.as_slice() {
                    &[amp] => Potential::Trig { amp },
                    _ => return Err("trig(amp) takes one argument".into()),
                }
            } else {
                let e = parse_expression(s).map_err(|e| e.to_string())?;
                if e.uses(Var::T) || e.uses(Var::Y1) || e.uses(Var::Y2) {
                    return Err("a potential expression may use x1 and x2 only".into());
                }
                e.screen(&Domain::new(0.5, 0.0)).map_err(|e| e.to_string())?;
                if is_constant(&e) {
                    Potential::Constant(e.eval(&Default::default()))
                } else {
                    Potential::Expr(Arc::new(e))
                }
            }
        }
    })
}

fn render_potential(p: &Potential) -> String {
    match p {
        Potential::Constant(c) => format!("const({c:?})"),
        Potential::Bump { amp, inner, outer } => format!("bump({amp:?}, {inner:?}, {outer:?})"),
        Potential::Trig { amp } => format!("trig({amp:?})"),
        Potential::Expr(e) => e.unparse(),
    }
}

fn parse_data(s: &str, radius: f64, horizon: f64) -> std::result::Result<DataFn, String> {
    let e = parse_expression(s).map_err(|e| e.to_string())?;
    if e.uses(Var::T) {
        return Err("data may not depend on t".into());
    }
    e.screen(&Domain::new(radius, horizon)).map_err(|e| e.to_string())?;
    Ok(if is_constant(&e) { DataFn::Const(e.eval(&Default::default())) } else { DataFn::Expr(Arc::new(e)) })
}

fn render_data(d: &DataFn) -> String {
    match d {
        DataFn::Const(c) => format!("{c:?}"),
        DataFn::Expr(e) => e.unparse(),
        DataFn::Func { name, .. } => name.clone(),
    }
}

fn render_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

fn render_auto(v: Option<f64>) -> String {
    v.map_or("auto".into(), |x| format!("{x:?}"))
}

struct Reader<'a> {
    section: &'a str,
    entries: Option<&'a Section>,
    errs: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn get<T>(&mut self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Option<T> {
        let e = self.entries?.entries.get(key)?;
        match f(&e.value) {
            Ok(v) => Some(v),
            Err(m) => {
                self.errs.push(format!("line {}: [{}] {key}: {m}", e.line, self.section));
                None
            }
        }
    }
}

/// Parses and validates a configuration. Driver-specific checks run when the
/// file names a driver; [`ExperimentConfig::check_for`] runs them otherwise.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut errs = Vec::new();
    let raw = lex_sections(text, &mut errs);
    let sec = |name: &str| raw.sections.get(name);

    let mut holes = Vec::new();
    for (ln, h) in &raw.holes {
        let mut r = Reader { section: "hole", entries: Some(h), errs: &mut errs };
        let center = r.get("center", |s| match numbers(s)?.as_slice() {
            &[a, b] => Ok([a, b]),
            _ => Err("center needs two coordinates".into()),
        });
        let radius = r.get("radius", number);
        match (center, radius) {
            (Some(c), Some(rad)) => holes.push(Hole::disc(c, rad)),
            _ => {
                if !h.entries.contains_key("center") || !h.entries.contains_key("radius") {
                    errs.push(format!("line {ln}: [hole] needs both center and radius"));
                }
            }
        }
    }
    let cell = match UnitCellGeometry::new(holes) {
        Ok(c) => Some(c),
        Err(e) => {
            errs.push(format!("[hole] {e}"));
            None
        }
    };

    let mut r = Reader { section: "geometry", entries: sec("geometry"), errs: &mut errs };
    let dilution = r
        .get("dilution", |s| {
            Ok(match s {
                "off" => Dilution::Off,
                "zero" => Dilution::Zero,
                "linear" => Dilution::Linear,
                "sqrt" => Dilution::Sqrt,
                _ => {
                    let v = number(s).map_err(|_| format!("expected off, zero, linear, sqrt or a number, got `{s}`"))?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err("a fixed dilution must lie in [0, 1]".into());
                    }
                    Dilution::Fixed(v)
                }
            })
        })
        .unwrap_or(Dilution::Off);
    let defects: BTreeSet<CellIndex> = r
        .get("defects", |s| {
            list(s)?
                .iter()
                .map(|p| match list(p)?.as_slice() {
                    [a, b] => Ok([integer(a)?, integer(b)?]),
                    _ => Err(format!("defect `{p}` is not an integer pair")),
                })
                .collect()
        })
        .unwrap_or_default();

    let mut nm = Numerics::default();
    let mut r = Reader { section: "experiment", entries: sec("experiment"), errs: &mut errs };
    let driver = r.get("driver", |s| Driver::from_name(s).ok_or_else(|| format!("unknown driver `{s}`")));
    let epsilon_list = r.get("epsilon_list", |s| {
        let v = numbers(s)?;
        if v.is_empty() || v.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err("epsilons must lie in (0, 1]".into());
        }
        Ok(v)
    });
    let epsilon = r.get("epsilon", |s| {
        let e = number(s)?;
        if e > 0.0 && e <= 1.0 {
            Ok(e)
        } else {
            Err("epsilon must lie in (0, 1]".into())
        }
    });
    let pos = |s: &str| {
        let v = number(s)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(format!("`{s}` must be positive"))
        }
    };
    if let Some(v) = r.get("horizon", pos) {
        nm.horizon = v;
    }
    if let Some(v) = r.get("window", pos) {
        nm.window = v;
    }
    if let Some(v) = r.get("wrap", boolean) {
        nm.wrap = v;
    }
    let problem = r
        .get("problem", |s| match s {
            "dirichlet" => Ok(Problem::Dirichlet),
            "state_constraint" => Ok(Problem::StateConstraint),
            _ => Err(format!("expected dirichlet or state_constraint, got `{s}`")),
        })
        .unwrap_or(Problem::Dirichlet);
    let query = r.get("query", |s| match numbers(s)?.as_slice() {
        &[tau, t, y1, y2, x1, x2] if t > tau => Ok(MetricQuery::new(tau, t, [y1, y2], [x1, x2])),
        &[_, _, _, _, _, _] => Err("query needs t > tau".into()),
        _ => Err("query is [tau, t, y1, y2, x1, x2]".into()),
    });

    let mut r = Reader { section: "numerics", entries: sec("numerics"), errs: &mut errs };
    if let Some(v) = r.get("h", auto_or) {
        match v {
            Some(h) if h <= 0.0 => r.errs.push("[numerics] h: must be positive".into()),
            _ => nm.h = v,
        }
    }
    if let Some(v) = r.get("h_ratio", pos) {
        nm.h_ratio = v;
    }
    r.get("dt_policy", |s| if s == "cfl" { Ok(()) } else { Err(format!("only `cfl` is supported, got `{s}`")) });
    if let Some(v) = r.get("ndir", positive_count) {
        nm.ndir = v;
    }
    if let Some(v) = r.get("nrad", positive_count) {
        nm.nrad = v;
    }
    if let Some(v) = r.get("k", positive_count) {
        nm.k = v;
    }
    if let Some(v) = r.get("nodes_per_unit", positive_count) {
        nm.nodes_per_unit = v;
    }
    if let Some(v) = r.get("move_radius", pos) {
        nm.move_radius = v;
    }
    if let Some(v) = r.get("vmax", auto_or) {
        nm.vmax = v;
    }
    if let Some(v) = r.get("table_spacing", pos) {
        nm.table_spacing = v;
    }
    if let Some(v) = r.get("table_radius", auto_or) {
        nm.table_radius = v;
    }
    let slack = r
        .get("slack", |s| {
            if s == "calibrate" {
                return Ok(SlackSpec::Calibrate);
            }
            match numbers(&format!("[{s}]"))?.as_slice() {
                &[a, b, c] if a >= 0.0 && b >= 0.0 && c >= 0.0 => Ok(SlackSpec::Fixed(Slack { a, b, c })),
                _ => Err("slack is `calibrate` or three nonnegative numbers `a, b, c`".into()),
            }
        })
        .unwrap_or(SlackSpec::Calibrate);

    let mut r = Reader { section: "model", entries: sec("model"), errs: &mut errs };
    let potential = r.get("potential", parse_potential).unwrap_or(Potential::Constant(0.0));
    let drift = r
        .get("drift", |s| match numbers(s)?.as_slice() {
            &[a, b] => Ok([a, b]),
            _ => Err("drift needs two components".into()),
        })
        .unwrap_or([0.0, 0.0]);
    let m0 = r.get("m0", pos);
    let k0 = r.get("k0", nonnegative);
    let c1 = r.get("c1", nonnegative);
    let a7 = r.get("a7", boolean);
    let a7_line = sec("model").and_then(|s| s.entries.get("a7")).map(|e| e.line);

    let reach = nm.window + m0.unwrap_or(4.0) * nm.horizon + 2.0;
    let mut r = Reader { section: "data", entries: sec("data"), errs: &mut errs };
    let g = r.get("g", |s| parse_data(s, reach, nm.horizon)).unwrap_or(DataFn::Const(0.0));
    let b = r.get("b", |s| parse_data(s, reach, nm.horizon)).unwrap_or(DataFn::Const(1.0));
    let lip = |d: &DataFn, s: &str| -> std::result::Result<f64, String> {
        let v = number(s)?;
        if v < 0.0 {
            return Err("Lipschitz constants are nonnegative".into());
        }
        if matches!(d, DataFn::Const(_)) && v != 0.0 {
            return Err("constant data has Lipschitz constant 0".into());
        }
        Ok(v)
    };
    let lip_g = r.get("lip_g", |s| lip(&g, s));
    let lip_b = r.get("lip_b", |s| lip(&b, s));
    let samples = r.get("bbar_samples", positive_count);
    let lip_g = lip_g.unwrap_or_else(|| match &g {
        DataFn::Const(_) => 0.0,
        d => estimate_lipschitz(|x| d.eval(x, [0.0, 0.0]), reach, 1.0 / 64.0),
    });
    let lip_b = lip_b.unwrap_or_else(|| match &b {
        DataFn::Const(_) => 0.0,
        d => estimate_lipschitz(|x| d.eval(x, x), reach, 1.0 / 64.0),
    });
    let mut data = BoundaryData::new(g, b, lip_g, lip_b);
    if let Some(n) = samples {
        data.bbar_samples = n;
    }

    let model = match LagrangianModel::new(
        Hamiltonian::Quadratic { potential, drift },
        ModelOptions { k0, c1, m0, lip_g },
    ) {
        Ok(m) => Some(m),
        Err(e) => {
            errs.push(format!("[model] {e}"));
            None
        }
    };
    if let (Some(m), Some(flag)) = (&model, a7) {
        if m.satisfies_a7() != flag {
            errs.push(format!(
                "line {}: [model] a7 = {flag} but the model {} the boundary assumption",
                a7_line.unwrap_or(0),
                if m.satisfies_a7() { "satisfies" } else { "does not satisfy" }
            ));
        }
    }

    let mut r = Reader { section: "io", entries: sec("io"), errs: &mut errs };
    let out = r.get("out", |s| Ok(PathBuf::from(s))).unwrap_or_else(|| PathBuf::from("out"));
    let cache = r.get("cache", |s| Ok(PathBuf::from(s))).unwrap_or_else(|| PathBuf::from(".hjlab-cache"));
    let format = r
        .get("format", |s| Format::from_name(s).ok_or_else(|| format!("expected csv, slab or both, got `{s}`")))
        .unwrap_or(Format::Csv);

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let cfg = ExperimentConfig {
        scenario: Scenario { cell: cell.unwrap(), model: model.unwrap(), data, dilution, defects, numerics: nm },
        driver,
        epsilon_list,
        epsilon,
        problem,
        query,
        slack,
        io: IoConfig { out, cache, format },
    };
    if let Some(d) = driver {
        cfg.check_for(d)?;
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Cross-field checks for running `driver`.
    pub fn check_for(&self, driver: Driver) -> Result<()> {
        let mut errs = Vec::new();
        if let Some(d) = self.driver {
            if d != driver {
                errs.push(format!("[experiment] driver: the file names `{}` but `{}` was requested", d.name(), driver.name()));
            }
        }
        let needs_list = matches!(driver, Driver::Rate | Driver::Diluted);
        let needs_eps = matches!(driver, Driver::Solve | Driver::Defect | Driver::A7check);
        if needs_list && self.epsilon_list.is_none() {
            errs.push(format!("[experiment] epsilon_list: required by the {} driver", driver.name()));
        }
        if needs_eps && self.epsilon.is_none() {
            errs.push(format!("[experiment] epsilon: required by the {} driver", driver.name()));
        }
        if driver == Driver::Metric && self.query.is_none() {
            errs.push("[experiment] query: required by the metric driver".into());
        }
        if driver == Driver::Rate {
            for &e in self.epsilon_list.iter().flatten() {
                let h = self.scenario.numerics.spacing(e);
                if h > e / 8.0 + 1e-15 {
                    errs.push(format!("[numerics] h: h <= epsilon/8 required (h = {h}, epsilon = {e})"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Epsilons used by list drivers; the reference sweep when unset.
    pub fn epsilons(&self) -> Vec<f64> {
        self.epsilon_list.clone().unwrap_or_else(Scenario::reference_epsilons)
    }

    /// Every key with its effective value. Parsing the echo yields the same
    /// configuration.
    pub fn echo(&self) -> String {
        let s = &self.scenario;
        let nm = &s.numerics;
        let mut o = String::new();
        let mut put = |line: String| {
            o.push_str(&line);
            o.push('\n');
        };
        put("[geometry]".into());
        put(format!(
            "dilution = {}",
            match s.dilution {
                Dilution::Off => "off".into(),
                Dilution::Zero => "zero".into(),
                Dilution::Linear => "linear".into(),
                Dilution::Sqrt => "sqrt".into(),
                Dilution::Fixed(v) => format!("{v:?}"),
            }
        ));
        let d: Vec<String> = s.defects.iter().map(|c| format!("[{}, {}]", c[0], c[1])).collect();
        put(format!("defects = [{}]", d.join(", ")));
        for h in s.cell.holes() {
            let Hole::Disc { center, radius } = h else {
                put("# a custom hole has no config form".into());
                continue;
            };
            put(String::new());
            put("[hole]".into());
            put(format!("center = {}", render_list(center)));
            put(format!("radius = {radius:?}"));
        }
        put(String::new());
        put("[model]".into());
        let (drift, potential) = match s.model.hamiltonian_kind() {
            Hamiltonian::Quadratic { potential, drift } => (*drift, render_potential(potential)),
            Hamiltonian::Custom { name, .. } => ([0.0, 0.0], name.clone()),
        };
        put(format!("potential = {potential}"));
        put(format!("drift = {}", render_list(&drift)));
        put(format!("m0 = {:?}", s.model.m0()));
        put(format!("k0 = {:?}", s.model.k0()));
        put(format!("c1 = {:?}", s.model.c1()));
        put(format!("a7 = {}", s.model.satisfies_a7()));
        put(String::new());
        put("[data]".into());
        put(format!("g = {}", render_data(&s.data.g)));
        put(format!("b = {}", render_data(&s.data.b)));
        put(format!("lip_g = {:?}", s.data.lip_g));
        put(format!("lip_b = {:?}", s.data.lip_b));
        put(format!("bbar_samples = {}", s.data.bbar_samples));
        put(String::new());
        put("[numerics]".into());
        put(format!("h = {}", render_auto(nm.h)));
        put(format!("h_ratio = {:?}", nm.h_ratio));
        put("dt_policy = cfl".into());
        put(format!("ndir = {}", nm.ndir));
        put(format!("nrad = {}", nm.nrad));
        put(format!("k = {}", nm.k));
        put(format!("nodes_per_unit = {}", nm.nodes_per_unit));
        put(format!("move_radius = {:?}", nm.move_radius));
        put(format!("vmax = {}", render_auto(nm.vmax)));
        put(format!("table_spacing = {:?}", nm.table_spacing));
        put(format!("table_radius = {}", render_auto(nm.table_radius)));
        put(format!(
            "slack = {}",
            match self.slack {
                SlackSpec::Calibrate => "calibrate".into(),
                SlackSpec::Fixed(k) => format!("{:?}, {:?}, {:?}", k.a, k.b, k.c),
            }
        ));
        put(String::new());
        put("[experiment]".into());
        if let Some(d) = self.driver {
            put(format!("driver = {}", d.name()));
        }
        if let Some(l) = &self.epsilon_list {
            put(format!("epsilon_list = {}", render_list(l)));
        }
        if let Some(e) = self.epsilon {
            put(format!("epsilon = {e:?}"));
        }
        put(format!("horizon = {:?}", nm.horizon));
        put(format!("window = {:?}", nm.window));
        put(format!("wrap = {}", nm.wrap));
        put(format!(
            "problem = {}",
            match self.problem {
                Problem::Dirichlet => "dirichlet",
                Problem::StateConstraint => "state_constraint",
            }
        ));
        if let Some(q) = &self.query {
            put(format!("query = {}", render_list(&[q.tau, q.t, q.y[0], q.y[1], q.x[0], q.x[1]])));
        }
        put(String::new());
        put("[io]".into());
        put(format!("out = {}", self.io.out.display()));
        put(format!("cache = {}", self.io.cache.display()));
        put(format!("format = {}", self.io.format.name()));
        o
    }
}
