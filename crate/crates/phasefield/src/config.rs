//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` comments, unknown keys rejected. The format is
//! deliberately trivial so configurations stay hand-writable and diffable.

use crate::error::{Error, Result};
use crate::mesh::Rect;
use crate::steppers::ac::AcScheme;
use crate::steppers::ch::ChScheme;
use crate::steppers::SolverConfig;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    AllenCahn,
    CahnHilliard,
}

impl Equation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Equation::AllenCahn => "allen-cahn",
            Equation::CahnHilliard => "cahn-hilliard",
        }
    }
}

/// Scheme selection, resolved against the equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeChoice {
    Ac(AcScheme),
    Ch(ChScheme),
}

impl SchemeChoice {
    pub fn as_str(&self) -> String {
        match self {
            SchemeChoice::Ac(s) => match s {
                AcScheme::Fis => "fis".into(),
                AcScheme::FisEnergyMin => "fis-energymin".into(),
                AcScheme::Css => "css".into(),
                AcScheme::SemiImplicit => "semi-implicit".into(),
                AcScheme::StabSemiImplicit { .. } => "stab-semi-implicit".into(),
                AcScheme::FisLumped => "fis-lumped".into(),
                AcScheme::CssLumped => "css-lumped".into(),
                AcScheme::Scn => "scn".into(),
                AcScheme::Mcn => "mcn".into(),
                AcScheme::McnEnergyMin => "mcn-energymin".into(),
                AcScheme::CssMcn => "css-mcn".into(),
                AcScheme::Bdf2 { .. } => "bdf2".into(),
                AcScheme::Css2 => "css2".into(),
                AcScheme::ConvexifiedFis { .. } => "convexified-fis".into(),
            },
            SchemeChoice::Ch(s) => match s {
                ChScheme::Fis => "fis".into(),
                ChScheme::Css => "css".into(),
                ChScheme::Mcn => "mcn".into(),
                ChScheme::FisEnergyMin => "fis-energymin".into(),
                ChScheme::McnEnergyMin => "mcn-energymin".into(),
                ChScheme::ConvexifiedEnergyMin { .. } => "convexified-energymin".into(),
            },
        }
    }
}

/// Initial nodal state of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Smooth circular interface of radius `r0` centered at the origin, with
    /// transition width set by the run's `epsilon`.
    Circle { r0: f64, epsilon: f64 },
    /// Seeded uniform nodal values in `[-amplitude, amplitude]`.
    Random { seed: u64, amplitude: f64 },
    /// One nodal value per line.
    File { path: PathBuf },
}

impl InitialCondition {
    pub fn as_str(&self) -> String {
        match self {
            InitialCondition::Circle { r0, .. } => format!("circle({r0})"),
            InitialCondition::Random { seed, amplitude } => format!("random({seed}, {amplitude})"),
            InitialCondition::File { path } => format!("file({})", path.display()),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            InitialCondition::Random { seed, .. } => *seed,
            _ => 0,
        }
    }
}

/// Time-step schedule: a uniform step with a count, or an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Uniform { k: f64, steps: usize },
    Explicit(Vec<f64>),
}

impl Schedule {
    pub fn steps(&self) -> Vec<f64> {
        match self {
            Schedule::Uniform { k, steps } => vec![*k; *steps],
            Schedule::Explicit(ks) => ks.clone(),
        }
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub equation: Equation,
    pub scheme: SchemeChoice,
    pub epsilon: f64,
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub schedule: Schedule,
    pub initial: InitialCondition,
    pub output_dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub solver: SolverConfig,
}

impl RunConfig {
    /// Canonical echo of the parsed configuration, used for the run manifest
    /// (and therefore byte-stable).
    pub fn echo(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("equation = {}\n", self.equation.as_str()));
        out.push_str(&format!("scheme = {}\n", self.scheme.as_str()));
        match self.scheme {
            SchemeChoice::Ac(AcScheme::StabSemiImplicit { s })
            | SchemeChoice::Ac(AcScheme::Bdf2 { s }) => {
                out.push_str(&format!("s = {s}\n"));
            }
            SchemeChoice::Ac(AcScheme::ConvexifiedFis { delta })
            | SchemeChoice::Ch(ChScheme::ConvexifiedEnergyMin { delta }) => {
                out.push_str(&format!("delta = {delta}\n"));
            }
            _ => {}
        }
        out.push_str(&format!("epsilon = {}\n", self.epsilon));
        out.push_str(&format!(
            "domain = {},{},{},{}\n",
            self.domain.x0, self.domain.y0, self.domain.x1, self.domain.y1
        ));
        out.push_str(&format!("nx = {}\n", self.nx));
        out.push_str(&format!("ny = {}\n", self.ny));
        match &self.schedule {
            Schedule::Uniform { k, steps } => {
                out.push_str(&format!("k = {k}\nsteps = {steps}\n"));
            }
            Schedule::Explicit(ks) => {
                let list: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                out.push_str(&format!("k_list = {}\n", list.join(",")));
            }
        }
        out.push_str(&format!("initial = {}\n", self.initial.as_str()));
        out.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        if !self.snapshot_times.is_empty() {
            let list: Vec<String> = self.snapshot_times.iter().map(|t| t.to_string()).collect();
            out.push_str(&format!("snapshot_times = {}\n", list.join(",")));
        }
        out
    }
}

const KNOWN_KEYS: &[&str] = &[
    "equation",
    "scheme",
    "epsilon",
    "k",
    "k_list",
    "steps",
    "nx",
    "ny",
    "domain",
    "initial",
    "output_dir",
    "snapshot_times",
    "s",
    "delta",
    "newton_tol",
    "newton_max_iters",
    "linear_tol",
    "linear_max_iters",
    "lbfgs_tol",
    "lbfgs_memory",
    "lbfgs_max_iters",
];

struct RawConfig {
    values: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    fn get(&self, key: &str) -> Option<&(usize, String)> {
        self.values.get(key)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some((line, text)) => text.parse().map(Some).map_err(|_| {
                Error::Config(format!(
                    "line {line}: key '{key}': cannot parse '{text}' as {}",
                    std::any::type_name::<T>()
                ))
            }),
        }
    }

    fn parse_positive(&self, key: &str) -> Result<Option<f64>> {
        match self.parse::<f64>(key)? {
            Some(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
            Some(v) => {
                let line = self.get(key).map(|(l, _)| *l).unwrap_or(0);
                Err(Error::Config(format!(
                    "line {line}: key '{key}': value {v} must be positive and finite"
                )))
            }
            None => Ok(None),
        }
    }
}

fn split_raw(text: &str) -> Result<RawConfig> {
    let mut values = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {line_no}: expected 'key = value', got '{line}'"
            )));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {line_no}: unknown key '{key}'")));
        }
        if values.insert(key.clone(), (line_no, value)).is_some() {
            return Err(Error::Config(format!(
                "line {line_no}: duplicate key '{key}'"
            )));
        }
    }
    Ok(RawConfig { values })
}

fn parse_float_list(key: &str, line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "line {line}: key '{key}': cannot parse '{s}' as a number"
                ))
            })
        })
        .collect()
}

fn parse_initial(line: usize, text: &str, epsilon: f64) -> Result<InitialCondition> {
    let err = |msg: &str| Error::Config(format!("line {line}: key 'initial': {msg}"));
    let open = text.find('(').ok_or_else(|| {
        err("expected circle(R0), random(seed, amplitude) or file(path)")
    })?;
    if !text.ends_with(')') {
        return Err(err("missing closing parenthesis"));
    }
    let kind = text[..open].trim();
    let args = &text[open + 1..text.len() - 1];
    match kind {
        "circle" => {
            let r0: f64 = args
                .trim()
                .parse()
                .map_err(|_| err("circle radius must be a number"))?;
            if r0 <= 0.0 {
                return Err(err("circle radius must be positive"));
            }
            Ok(InitialCondition::Circle { r0, epsilon })
        }
        "random" => {
            let parts: Vec<&str> = args.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(err("random takes (seed, amplitude)"));
            }
            let seed: u64 = parts[0]
                .parse()
                .map_err(|_| err("random seed must be a nonnegative integer"))?;
            let amplitude: f64 = parts[1]
                .parse()
                .map_err(|_| err("random amplitude must be a number"))?;
            if amplitude <= 0.0 {
                return Err(err("random amplitude must be positive"));
            }
            Ok(InitialCondition::Random { seed, amplitude })
        }
        "file" => Ok(InitialCondition::File {
            path: PathBuf::from(args.trim()),
        }),
        other => Err(err(&format!("unknown initial condition '{other}'"))),
    }
}

fn parse_scheme(
    equation: Equation,
    line: usize,
    name: &str,
    s: Option<f64>,
    delta: Option<f64>,
) -> Result<SchemeChoice> {
    let need_delta = |delta: Option<f64>| {
        delta.ok_or_else(|| {
            Error::Config(format!(
                "line {line}: scheme '{name}' requires the 'delta' key"
            ))
        })
    };
    match equation {
        Equation::AllenCahn => {
            let scheme = match name {
                "fis" => AcScheme::Fis,
                "fis-energymin" => AcScheme::FisEnergyMin,
                "css" => AcScheme::Css,
                "semi-implicit" => AcScheme::SemiImplicit,
                "stab-semi-implicit" => AcScheme::StabSemiImplicit { s: s.unwrap_or(1.0) },
                "fis-lumped" => AcScheme::FisLumped,
                "css-lumped" => AcScheme::CssLumped,
                "scn" => AcScheme::Scn,
                "mcn" => AcScheme::Mcn,
                "mcn-energymin" => AcScheme::McnEnergyMin,
                "css-mcn" => AcScheme::CssMcn,
                "bdf2" => AcScheme::Bdf2 { s: s.unwrap_or(10.0) },
                "css2" => AcScheme::Css2,
                "convexified-fis" => AcScheme::ConvexifiedFis {
                    delta: need_delta(delta)?,
                },
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: unknown allen-cahn scheme '{other}'"
                    )))
                }
            };
            Ok(SchemeChoice::Ac(scheme))
        }
        Equation::CahnHilliard => {
            let scheme = match name {
                "fis" => ChScheme::Fis,
                "css" => ChScheme::Css,
                "mcn" => ChScheme::Mcn,
                "fis-energymin" => ChScheme::FisEnergyMin,
                "mcn-energymin" => ChScheme::McnEnergyMin,
                "convexified-energymin" => ChScheme::ConvexifiedEnergyMin {
                    delta: need_delta(delta)?,
                },
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: unknown cahn-hilliard scheme '{other}'"
                    )))
                }
            };
            Ok(SchemeChoice::Ch(scheme))
        }
    }
}

/// Parses and validates a flat `key = value` configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw = split_raw(text)?;

    let has_k_list = raw.get("k_list").is_some();
    let mut missing: Vec<&str> = Vec::new();
    for key in ["equation", "scheme", "epsilon", "nx", "ny", "initial", "output_dir"] {
        if raw.get(key).is_none() {
            missing.push(key);
        }
    }
    if !has_k_list {
        for key in ["k", "steps"] {
            if raw.get(key).is_none() {
                missing.push(key);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }

    let (eq_line, eq_text) = raw.get("equation").unwrap().clone();
    let equation = match eq_text.as_str() {
        "allen-cahn" => Equation::AllenCahn,
        "cahn-hilliard" => Equation::CahnHilliard,
        other => {
            return Err(Error::Config(format!(
                "line {eq_line}: unknown equation '{other}' (allen-cahn or cahn-hilliard)"
            )))
        }
    };

    let epsilon = raw.parse_positive("epsilon")?.unwrap();
    let s = raw.parse_positive("s")?;
    let delta = match raw.parse::<f64>("delta")? {
        Some(d) if d >= 0.0 => Some(d),
        Some(d) => {
            return Err(Error::Config(format!(
                "key 'delta': value {d} must be nonnegative"
            )))
        }
        None => None,
    };

    let (scheme_line, scheme_text) = raw.get("scheme").unwrap().clone();
    let scheme = parse_scheme(equation, scheme_line, &scheme_text, s, delta)?;

    let nx: usize = raw.parse("nx")?.unwrap();
    let ny: usize = raw.parse("ny")?.unwrap();
    if nx == 0 || ny == 0 {
        return Err(Error::Config("nx and ny must be at least 1".into()));
    }

    let domain = match raw.get("domain") {
        None => Rect::symmetric(),
        Some((line, text)) => {
            let vals = parse_float_list("domain", *line, text)?;
            if vals.len() != 4 {
                return Err(Error::Config(format!(
                    "line {line}: key 'domain': expected x0,y0,x1,y1"
                )));
            }
            let r = Rect::new(vals[0], vals[1], vals[2], vals[3]);
            if r.x1 <= r.x0 || r.y1 <= r.y0 {
                return Err(Error::Config(format!(
                    "line {line}: key 'domain': rectangle is empty"
                )));
            }
            r
        }
    };

    let schedule = if has_k_list {
        let (line, text) = raw.get("k_list").unwrap();
        let ks = parse_float_list("k_list", *line, text)?;
        if ks.is_empty() {
            return Err(Error::Config(format!(
                "line {line}: key 'k_list': schedule is empty"
            )));
        }
        if let Some(bad) = ks.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::Config(format!(
                "line {line}: key 'k_list': step {bad} must be positive"
            )));
        }
        if raw.get("k").is_some() || raw.get("steps").is_some() {
            return Err(Error::Config(
                "give either k_list or k with steps, not both".into(),
            ));
        }
        Schedule::Explicit(ks)
    } else {
        let k = raw.parse_positive("k")?.unwrap();
        let steps: usize = raw.parse("steps")?.unwrap();
        if steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        Schedule::Uniform { k, steps }
    };

    let (init_line, init_text) = raw.get("initial").unwrap().clone();
    let initial = parse_initial(init_line, &init_text, epsilon)?;

    let output_dir = PathBuf::from(&raw.get("output_dir").unwrap().1);

    let snapshot_times = match raw.get("snapshot_times") {
        None => Vec::new(),
        Some((line, text)) => parse_float_list("snapshot_times", *line, text)?,
    };

    let mut solver = SolverConfig::default();
    if let Some(v) = raw.parse_positive("newton_tol")? {
        solver.newton.tol = v;
    }
    if let Some(v) = raw.parse::<usize>("newton_max_iters")? {
        solver.newton.max_iters = v;
    }
    if let Some(v) = raw.parse_positive("linear_tol")? {
        solver.newton.linear_tol = v;
    }
    if let Some(v) = raw.parse::<usize>("linear_max_iters")? {
        solver.newton.linear_max_iters = v;
    }
    if let Some(v) = raw.parse_positive("lbfgs_tol")? {
        solver.lbfgs.tol = v;
    }
    if let Some(v) = raw.parse::<usize>("lbfgs_memory")? {
        if v == 0 {
            return Err(Error::Config("lbfgs_memory must be at least 1".into()));
        }
        solver.lbfgs.memory = v;
    }
    if let Some(v) = raw.parse::<usize>("lbfgs_max_iters")? {
        solver.lbfgs.max_iters = v;
    }

    Ok(RunConfig {
        equation,
        scheme,
        epsilon,
        domain,
        nx,
        ny,
        schedule,
        initial,
        output_dir,
        snapshot_times,
        solver,
    })
}

/// Replaces (or appends) one `key = value` assignment in a configuration
/// text; used by the sweep driver.
pub fn override_key(text: &str, key: &str, value: &str) -> String {
    let mut out = String::new();
    let mut replaced = false;
    for raw in text.lines() {
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let is_target = stripped
            .split_once('=')
            .map(|(k, _)| k.trim().eq_ignore_ascii_case(key))
            .unwrap_or(false);
        if is_target {
            out.push_str(&format!("{key} = {value}\n"));
            replaced = true;
        } else {
            out.push_str(raw);
            out.push('\n');
        }
    }
    if !replaced {
        out.push_str(&format!("{key} = {value}\n"));
    }
    out
}
