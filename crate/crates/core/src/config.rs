//! Run configuration: a flat TOML document with the sections `[flow]`,
//! `[grid]`, `[initial]` and `[output]`.
//!
//! ```toml
//! [flow]
//! n = 2
//! p = 1.0
//! F = "mean"              # mean | gauss_root | sigma2_root
//! cone = "mean_halfspace" # optional; forced to positive_cone when p > 1
//! t_end = 10.0
//! cfl = 0.2
//!
//! [grid]
//! mode = "axisymmetric"   # spherical_ode | axisymmetric | full2d
//! resolution = 64
//!
//! [initial]
//! kind = "legendre"       # constant | legendre | table
//! r0 = 1.0
//! l = 2
//! amplitude = 0.1
//! # path = "u0.txt"       # table: one value per node, '#' comments
//! # osc_sweep = [0.005, 0.02]
//!
//! [output]
//! dir = "out"
//! cadence = 0.05
//! snapshot_times = [0.0, 10.0]
//! seed = 0
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use crate::curvature::CurvatureKind;
use crate::flow::{default_cone, FlowParams};
use crate::hypersurface::CurvatureCone;
use crate::sphere::GridMode;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error{}: {message}", at(*line))]
    Syntax { line: Option<usize>, message: String },
    #[error("unknown section [{section}]{}", at(*line))]
    UnknownSection { section: String, line: Option<usize> },
    #[error("unknown key {section}.{key}{}", at(*line))]
    UnknownKey { section: String, key: String, line: Option<usize> },
    #[error("{key}: expected {expected}{}", at(*line))]
    TypeMismatch { key: String, expected: &'static str, line: Option<usize> },
    #[error("missing required key {key}")]
    MissingKey { key: String },
    #[error("{key}: {message}{}", at(*line))]
    ConstraintViolation { key: String, message: String, line: Option<usize> },
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

/// Where the initial radial function comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    Constant { r0: f64 },
    Legendre { r0: f64, l: u32, amplitude: f64 },
    Table { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub flow: FlowParams,
    pub initial: InitialSpec,
    /// Initial oscillations for a pinching sweep; empty for a single run.
    pub osc_sweep: Vec<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

const SECTIONS: [(&str, &[&str]); 4] = [
    ("flow", &["n", "p", "F", "cone", "t_end", "cfl"]),
    ("grid", &["mode", "resolution"]),
    ("initial", &["kind", "r0", "l", "amplitude", "path", "osc_sweep"]),
    ("output", &["dir", "cadence", "snapshot_times", "seed"]),
];

pub const DEFAULT_OUT_DIR: &str = "hicf-out";

/// 1-based line of `key` inside `[section]`, found by scanning the text.
fn line_of(text: &str, section: &str, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if key.is_none() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if let Some(key) = key {
            if current == section {
                if let Some((k, _)) = line.split_once('=') {
                    if k.trim().trim_matches('"') == key {
                        return Some(i + 1);
                    }
                }
            }
        }
    }
    None
}

struct Reader<'a> {
    text: &'a str,
    doc: &'a Table,
}

impl<'a> Reader<'a> {
    fn get(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.doc.get(section).and_then(|s| s.as_table()).and_then(|t| t.get(key))
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        line_of(self.text, section, Some(key))
    }

    fn mismatch(&self, section: &str, key: &str, expected: &'static str) -> ConfigError {
        ConfigError::TypeMismatch { key: format!("{section}.{key}"), expected, line: self.line(section, key) }
    }

    fn violation(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::ConstraintViolation {
            key: format!("{section}.{key}"),
            message: message.into(),
            line: self.line(section, key),
        }
    }

    fn float(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.mismatch(section, key, "a number")),
        }
    }

    fn uint(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.mismatch(section, key, "a non-negative integer")),
        }
    }

    fn string(&self, section: &str, key: &str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.mismatch(section, key, "a string")),
        }
    }

    fn floats(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.mismatch(section, key, "an array of numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.mismatch(section, key, "an array of numbers")),
        }
    }

    fn parsed<T>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: std::str::FromStr<Err = String>,
    {
        self.string(section, key)?
            .map(|s| s.parse::<T>().map_err(|m| self.violation(section, key, m)))
            .transpose()
    }

    fn required<T>(&self, section: &str, key: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::MissingKey { key: format!("{section}.{key}") })
    }
}

fn check_structure(text: &str, doc: &Table) -> Result<(), ConfigError> {
    for (name, value) in doc {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            let line = line_of(text, name, None).or_else(|| line_of(text, "", Some(name)));
            return Err(ConfigError::UnknownSection { section: name.clone(), line });
        };
        let Some(table) = value.as_table() else {
            return Err(ConfigError::TypeMismatch {
                key: name.clone(),
                expected: "a section",
                line: line_of(text, "", Some(name)),
            });
        };
        for key in table.keys() {
            if !keys.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    section: name.clone(),
                    key: key.clone(),
                    line: line_of(text, name, Some(key)),
                });
            }
        }
    }
    Ok(())
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Table = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1)),
        message: e.message().to_string(),
    })?;
    check_structure(text, &doc)?;
    let r = Reader { text, doc: &doc };

    let n = r.required("flow", "n", r.uint("flow", "n")?)? as usize;
    let p = r.required("flow", "p", r.float("flow", "p")?)?;
    let function: CurvatureKind = r.required("flow", "F", r.parsed("flow", "F")?)?;
    if n < 2 {
        return Err(r.violation("flow", "n", "dimension must be at least 2"));
    }
    if !(p > 0.0) {
        return Err(r.violation("flow", "p", "power must be positive"));
    }
    let cone = match r.parsed::<CurvatureCone>("flow", "cone")? {
        Some(c) => {
            if p > 1.0 && c != CurvatureCone::PositiveCone {
                return Err(r.violation(
                    "flow",
                    "cone",
                    format!("p = {p} > 1 requires cone = \"positive_cone\" (Γ₊), got {c}"),
                ));
            }
            c
        }
        None => default_cone(function, n, p),
    };

    let mut flow = FlowParams::new(n, p, function);
    flow.cone = cone;
    if let Some(t) = r.float("flow", "t_end")? {
        flow.t_end = t;
    }
    if let Some(c) = r.float("flow", "cfl")? {
        flow.cfl = c;
    }
    if let Some(m) = r.parsed::<GridMode>("grid", "mode")? {
        flow.mode = m;
    }
    if let Some(res) = r.uint("grid", "resolution")? {
        flow.resolution = res as usize;
    }
    if let Some(c) = r.float("output", "cadence")? {
        flow.cadence = c;
    }
    if let Some(ts) = r.floats("output", "snapshot_times")? {
        flow.snapshot_times = ts;
    }
    flow.validate().map_err(|e| {
        let msg = e.to_string();
        let key = ["cone", "t_end", "cfl", "cadence", "snapshot_times", "F"]
            .into_iter()
            .find(|k| msg.contains(k))
            .unwrap_or("flow");
        let section = match key {
            "cadence" | "snapshot_times" => "output",
            _ => "flow",
        };
        r.violation(section, key, msg)
    })?;
    if flow.mode == GridMode::Full2d && n != 2 {
        return Err(r.violation("grid", "mode", "full2d grids exist only for n = 2"));
    }
    if flow.mode != GridMode::SphericalOde && flow.resolution < crate::sphere::MIN_RESOLUTION {
        return Err(r.violation("grid", "resolution", "resolution must be at least 8"));
    }

    let kind = r.required("initial", "kind", r.string("initial", "kind")?)?;
    let initial = match kind {
        "constant" => InitialSpec::Constant { r0: r.required("initial", "r0", r.float("initial", "r0")?)? },
        "legendre" => InitialSpec::Legendre {
            r0: r.required("initial", "r0", r.float("initial", "r0")?)?,
            l: r.required("initial", "l", r.uint("initial", "l")?)? as u32,
            amplitude: r.required("initial", "amplitude", r.float("initial", "amplitude")?)?,
        },
        "table" => InitialSpec::Table { path: r.required("initial", "path", r.string("initial", "path")?)?.into() },
        other => {
            return Err(r.violation("initial", "kind", format!("unknown initial condition {other:?}")));
        }
    };
    match &initial {
        InitialSpec::Constant { r0 } | InitialSpec::Legendre { r0, .. } if !(*r0 > 0.0) => {
            return Err(r.violation("initial", "r0", "initial radius must be positive"));
        }
        InitialSpec::Legendre { l, .. } if !(2..=4).contains(l) => {
            return Err(r.violation("initial", "l", "Legendre degree must be 2, 3 or 4"));
        }
        InitialSpec::Legendre { .. } if flow.mode == GridMode::SphericalOde => {
            return Err(r.violation("initial", "kind", "the spherical_ode grid only carries constant data"));
        }
        _ => {}
    }
    let osc_sweep = r.floats("initial", "osc_sweep")?.unwrap_or_default();
    if !osc_sweep.is_empty() && !matches!(initial, InitialSpec::Legendre { .. }) {
        return Err(r.violation("initial", "osc_sweep", "a sweep needs a legendre initial condition"));
    }
    if osc_sweep.iter().any(|&o| !(o > 0.0)) {
        return Err(r.violation("initial", "osc_sweep", "oscillations must be positive"));
    }

    Ok(RunConfig {
        flow,
        initial,
        osc_sweep,
        out_dir: r.string("output", "dir")?.unwrap_or(DEFAULT_OUT_DIR).into(),
        seed: r.uint("output", "seed")?.unwrap_or(0),
    })
}

fn list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

impl RunConfig {
    /// Serialises to the document format accepted by [`parse_config`].
    pub fn to_toml(&self) -> String {
        let f = &self.flow;
        let mut s = String::new();
        let _ = writeln!(s, "[flow]");
        let _ = writeln!(s, "n = {}", f.n);
        let _ = writeln!(s, "p = {:?}", f.p);
        let _ = writeln!(s, "F = \"{}\"", f.function);
        let _ = writeln!(s, "cone = \"{}\"", f.cone);
        let _ = writeln!(s, "t_end = {:?}", f.t_end);
        let _ = writeln!(s, "cfl = {:?}", f.cfl);
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "mode = \"{}\"", f.mode);
        let _ = writeln!(s, "resolution = {}", f.resolution);
        let _ = writeln!(s, "\n[initial]");
        match &self.initial {
            InitialSpec::Constant { r0 } => {
                let _ = writeln!(s, "kind = \"constant\"\nr0 = {r0:?}");
            }
            InitialSpec::Legendre { r0, l, amplitude } => {
                let _ = writeln!(s, "kind = \"legendre\"\nr0 = {r0:?}\nl = {l}\namplitude = {amplitude:?}");
            }
            InitialSpec::Table { path } => {
                let _ = writeln!(s, "kind = \"table\"\npath = {:?}", path.display().to_string());
            }
        }
        if !self.osc_sweep.is_empty() {
            let _ = writeln!(s, "osc_sweep = {}", list(&self.osc_sweep));
        }
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {:?}", self.out_dir.display().to_string());
        let _ = writeln!(s, "cadence = {:?}", f.cadence);
        let _ = writeln!(s, "snapshot_times = {}", list(&f.snapshot_times));
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}
