//! Sectioned `key = value` run files.
//!
//! ```text
//! [domain]
//! x0 = 1
//! x1 = 1000
//!
//! [coefficients]
//! g = x*(1001 - x)/10
//! w = (x - 1)^1.17/1000
//! q = ln(x)
//! beta = 1e-3
//! g_scale = 0.5        # optional multipliers, default 1
//!
//! [numerics]           # optional; used for classification
//! n = 2000
//! grading = geometric
//!
//! [simulation]         # optional
//! cfl = 0.9
//! epsilon = 1e-4
//! window = 2, 4        # in units of Gamma(x1)
//! ```
//!
//! `#` starts a comment. Every key is optional except the domain and `g`,
//! `w`, `q`; `beta` defaults to `0`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::expr::{self, Var};
use crate::model::CoefficientSet;
use crate::quad::{Grading, DEFAULT_ORDER};
use crate::simulator::{InitialCondition, InitialProfile, Integrator, SimulationConfig, TimeStep};
use crate::spectral::DEFAULT_MARGINAL_TOL;

/// Default tolerance on `|rate - lambda0| / |lambda0|` for end-to-end checks.
pub const DEFAULT_RATE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub n: usize,
    pub grading: Grading,
    pub quad_order: usize,
    pub tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            n: 2000,
            grading: Grading::Geometric,
            quad_order: DEFAULT_ORDER,
            tol: DEFAULT_MARGINAL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSection {
    pub config: SimulationConfig,
    pub rate_tolerance: f64,
    /// Whether the file set an amplitude cap explicitly.
    pub explicit_cap: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            config: SimulationConfig::default(),
            rate_tolerance: DEFAULT_RATE_TOLERANCE,
            explicit_cap: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub coefficients: CoefficientSet,
    pub numerics: Numerics,
    pub simulation: Option<SimulationSection>,
}

#[derive(Debug)]
struct Entry {
    line: usize,
    value: String,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

const KNOWN: &[(&str, &[&str])] = &[
    ("domain", &["x0", "x1"]),
    (
        "coefficients",
        &["g", "w", "q", "beta", "g_scale", "q_scale", "w_scale"],
    ),
    ("numerics", &["n", "grading", "quad_order", "tol"]),
    (
        "simulation",
        &[
            "n",
            "grading",
            "dt",
            "cfl",
            "t_end",
            "ic",
            "epsilon",
            "window",
            "integrator",
            "record_stride",
            "snapshot_stride",
            "amplitude_cap",
            "rate_tolerance",
        ],
    ),
];

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn split(text: &str) -> Result<Sections> {
    let mut sections = Sections::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?
                .trim()
                .to_string();
            if !KNOWN.iter().any(|(s, _)| *s == name) {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(&name) {
                return Err(err(line, format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let section = current
            .as_ref()
            .ok_or_else(|| err(line, "key outside of any section"))?;
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, "expected 'key = value'"))?;
        let key = key.trim();
        let allowed = KNOWN
            .iter()
            .find(|(s, _)| s == section)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(err(line, format!("unknown key '{key}' in [{section}]")));
        }
        let map = sections.get_mut(section).expect("section inserted above");
        if map.contains_key(key) {
            return Err(err(line, format!("duplicate key '{key}'")));
        }
        map.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    Ok(sections)
}

struct Section<'a> {
    name: &'static str,
    header_line: usize,
    map: Option<&'a BTreeMap<String, Entry>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.map.and_then(|m| m.get(key))
    }

    fn required(&self, key: &str) -> Result<&'a Entry> {
        self.get(key).ok_or_else(|| {
            err(
                self.header_line,
                format!("missing key '{key}' in [{}]", self.name),
            )
        })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| err(e.line, format!("invalid value '{}' for '{key}'", e.value))),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        let v = self.parse::<f64>(key)?;
        if let (Some(v), Some(e)) = (v, self.get(key)) {
            if !v.is_finite() {
                return Err(err(e.line, format!("'{key}' must be finite")));
            }
        }
        Ok(v)
    }

    fn required_real(&self, key: &str) -> Result<f64> {
        self.required(key)?;
        Ok(self.real(key)?.expect("key checked above"))
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        let v = self.real(key)?;
        if let (Some(v), Some(e)) = (v, self.get(key)) {
            if v <= 0.0 {
                return Err(err(e.line, format!("'{key}' must be positive")));
            }
        }
        Ok(v)
    }
}

fn header_line(text: &str, name: &str) -> usize {
    text.lines()
        .position(|l| {
            l.trim().trim_start_matches('[').starts_with(name) && l.trim().starts_with('[')
        })
        .map_or(1, |i| i + 1)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let sections = split(text)?;
        let section = |name: &'static str| Section {
            name,
            header_line: header_line(text, name),
            map: sections.get(name),
        };

        let domain = section("domain");
        if domain.map.is_none() {
            return Err(err(1, "missing section [domain]"));
        }
        let x0 = domain.required_real("x0")?;
        let x1 = domain.required_real("x1")?;

        let coef = section("coefficients");
        if coef.map.is_none() {
            return Err(err(1, "missing section [coefficients]"));
        }
        let parse_expr = |key: &str, vars: &[Var]| -> Result<expr::Expr> {
            let e = coef.required(key)?;
            expr::parse(&e.value, vars).map_err(|source| err(e.line, format!("'{key}': {source}")))
        };
        let g = parse_expr("g", &[Var::X])?;
        let w = parse_expr("w", &[Var::X])?;
        let q = parse_expr("q", &[Var::X])?;
        let beta = match coef.get("beta") {
            Some(_) => parse_expr("beta", &[Var::X, Var::Y])?,
            None => expr::parse("0", &[]).expect("literal zero parses"),
        };
        let domain_line = domain.header_line;
        let cs = CoefficientSet::from_exprs(x0, x1, g, w, q, beta)
            .map_err(|e| err(domain_line, e.to_string()))?;
        let scales = (
            coef.positive("g_scale")?.unwrap_or(1.0),
            coef.positive("q_scale")?.unwrap_or(1.0),
            coef.positive("w_scale")?.unwrap_or(1.0),
        );
        let coefficients = cs.with_scales(scales.0, scales.1, scales.2)?;

        let num = section("numerics");
        let mut numerics = Numerics::default();
        if let Some(n) = num.parse::<usize>("n")? {
            numerics.n = n;
        }
        if let Some(g) = num.parse::<Grading>("grading")? {
            numerics.grading = g;
        }
        if let Some(o) = num.parse::<usize>("quad_order")? {
            numerics.quad_order = o;
        }
        if let Some(t) = num.positive("tol")? {
            numerics.tol = t;
        }

        let sim = section("simulation");
        let simulation = match sim.map {
            None => None,
            Some(_) => Some(parse_simulation(&sim)?),
        };
        Ok(RunConfig {
            coefficients,
            numerics,
            simulation,
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text =
            std::str::from_utf8(&bytes).map_err(|e| err(1, format!("config is not UTF-8: {e}")))?;
        Ok((Self::parse(text)?, bytes))
    }
}

fn parse_simulation(sim: &Section<'_>) -> Result<SimulationSection> {
    let mut out = SimulationSection::default();
    let cfg = &mut out.config;
    if let Some(n) = sim.parse::<usize>("n")? {
        cfg.n = n;
    }
    if let Some(g) = sim.parse::<Grading>("grading")? {
        cfg.grading = g;
    }
    match (sim.positive("dt")?, sim.positive("cfl")?) {
        (Some(_), Some(_)) => {
            return Err(err(
                sim.get("cfl").map_or(1, |e| e.line),
                "give either 'dt' or 'cfl', not both",
            ));
        }
        (Some(dt), None) => cfg.time_step = TimeStep::Fixed(dt),
        (None, Some(c)) => {
            if c > 1.0 {
                return Err(err(
                    sim.get("cfl").map_or(1, |e| e.line),
                    "'cfl' must be in (0, 1]",
                ));
            }
            cfg.time_step = TimeStep::Cfl(c);
        }
        (None, None) => {}
    }
    cfg.t_end = sim.positive("t_end")?;
    if let Some(e) = sim.get("ic") {
        let ex = expr::parse(&e.value, &[Var::X])
            .map_err(|source| err(e.line, format!("'ic': {source}")))?;
        cfg.initial.profile = InitialProfile::Expr(ex);
    }
    if let Some(eps) = sim.real("epsilon")? {
        if eps < 0.0 {
            return Err(err(
                sim.get("epsilon").map_or(1, |e| e.line),
                "'epsilon' must be >= 0",
            ));
        }
        cfg.initial = InitialCondition {
            epsilon: eps,
            ..cfg.initial.clone()
        };
    }
    if let Some(e) = sim.get("window") {
        let parts: Vec<f64> = e
            .value
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(e.line, "'window' must be two numbers 'a, b'"))?;
        match parts[..] {
            [a, b] if a >= 0.0 && b > a && b.is_finite() => cfg.rate_window = (a, b),
            _ => return Err(err(e.line, "'window' must be two numbers 0 <= a < b")),
        }
    }
    if let Some(e) = sim.get("integrator") {
        cfg.integrator = e
            .value
            .parse::<Integrator>()
            .map_err(|x| err(e.line, x.to_string()))?;
    }
    cfg.record_stride = sim.parse::<usize>("record_stride")?.filter(|&s| s > 0);
    if let Some(s) = sim.parse::<usize>("snapshot_stride")? {
        cfg.snapshot_stride = s;
    }
    if let Some(c) = sim.positive("amplitude_cap")? {
        cfg.amplitude_cap = Some(c);
        out.explicit_cap = true;
    }
    if let Some(t) = sim.positive("rate_tolerance")? {
        out.rate_tolerance = t;
    }
    Ok(out)
}
