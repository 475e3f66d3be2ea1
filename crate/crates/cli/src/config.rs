//! Experiment configuration: flat `key = value` lines grouped under
//! `[section]` headers.
//!
//! ```text
//! command = simulate
//! seed = 7
//!
//! [model]
//! family = sine
//! beta = 2
//!
//! [init]
//! n = 16
//!
//! [run]
//! T = 1
//! dt = 1e-3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ibmsim::analysis::{Intensity, StationarityOptions, TailKind, TailParams};
use ibmsim::io::fmt_f64;
use ibmsim::models::{build_model, Configuration, Domain, KernelSpec, ModelSpec, PairTable, PotentialModel, Window};
use ibmsim::pointfields::{parse_config_csv, sample_ensemble, GibbsOptions, Precision, Sampler};
use ibmsim::sde::Scheme;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation { field: field.to_string(), message: message.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sample,
    Simulate,
    IfcCheck,
    Conditions,
    Stationarity,
    ReportData,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Sample,
        Command::Simulate,
        Command::IfcCheck,
        Command::Conditions,
        Command::Stationarity,
        Command::ReportData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Simulate => "simulate",
            Command::IfcCheck => "ifc-check",
            Command::Conditions => "conditions",
            Command::Stationarity => "stationarity",
            Command::ReportData => "report-data",
        }
    }

    fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Word,
    Text,
    Real,
    Int,
    UInt,
    Reals,
    UInts,
}

/// Every accepted (section, key) pair in output order; "" is the preamble.
const SCHEMA: &[(&str, &str, Kind)] = &[
    ("", "command", Kind::Word),
    ("", "seed", Kind::UInt),
    ("", "out", Kind::Text),
    ("model", "family", Kind::Word),
    ("model", "beta", Kind::Real),
    ("model", "alpha", Kind::Real),
    ("model", "a_exp", Kind::Int),
    ("model", "dim", Kind::UInt),
    ("model", "domain", Kind::Word),
    ("model", "pair_r", Kind::Reals),
    ("model", "pair_psi", Kind::Reals),
    ("init", "source", Kind::Word),
    ("init", "n", Kind::UInt),
    ("init", "spacing", Kind::Real),
    ("init", "path", Kind::Text),
    ("sampler", "kind", Kind::Word),
    ("sampler", "kernel", Kind::Word),
    ("sampler", "window", Kind::Word),
    ("sampler", "lo", Kind::Reals),
    ("sampler", "hi", Kind::Reals),
    ("sampler", "center", Kind::Reals),
    ("sampler", "radius", Kind::Real),
    ("sampler", "half", Kind::Reals),
    ("sampler", "n", Kind::UInt),
    ("sampler", "precision", Kind::Word),
    ("sampler", "intensity", Kind::Real),
    ("sampler", "count", Kind::UInt),
    ("sampler", "sweeps", Kind::UInt),
    ("sampler", "step", Kind::Real),
    ("run", "T", Kind::Real),
    ("run", "dt", Kind::Real),
    ("run", "scheme", Kind::Word),
    ("run", "runs", Kind::UInt),
    ("run", "ms", Kind::UInts),
    ("run", "exit_radius", Kind::Real),
    ("conditions", "kind", Kind::Word),
    ("conditions", "rho1", Kind::Word),
    ("conditions", "lambda", Kind::Real),
    ("conditions", "dim", Kind::UInt),
    ("conditions", "table_x", Kind::Reals),
    ("conditions", "table_values", Kind::Reals),
    ("conditions", "r", Kind::Real),
    ("conditions", "R", Kind::Real),
    ("conditions", "T", Kind::Real),
    ("conditions", "c", Kind::Real),
    ("stationarity", "radius", Kind::Real),
    ("stationarity", "bins", Kind::UInt),
    ("stationarity", "pair_max", Kind::Real),
    ("stationarity", "pair_bins", Kind::UInt),
    ("stationarity", "bootstrap", Kind::UInt),
    ("stationarity", "min_separation", Kind::Real),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Word(String),
    Text(String),
    Real(f64),
    Int(i64),
    UInt(u64),
    Reals(Vec<f64>),
    UInts(Vec<u64>),
}

fn list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

impl Value {
    fn parse(kind: Kind, s: &str) -> std::result::Result<Value, String> {
        let real = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
        let uint = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("`{t}` is not a nonnegative integer"));
        Ok(match kind {
            Kind::Word => {
                if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
                    return Err(format!("`{s}` is not a plain word"));
                }
                Value::Word(s.to_string())
            }
            Kind::Text => {
                if s.is_empty() {
                    return Err("empty value".into());
                }
                Value::Text(s.to_string())
            }
            Kind::Real => Value::Real(real(s)?),
            Kind::Int => Value::Int(s.parse().map_err(|_| format!("`{s}` is not an integer"))?),
            Kind::UInt => Value::UInt(uint(s)?),
            Kind::Reals => Value::Reals(list(s).into_iter().map(real).collect::<std::result::Result<_, _>>()?),
            Kind::UInts => Value::UInts(list(s).into_iter().map(uint).collect::<std::result::Result<_, _>>()?),
        })
    }

    fn render(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        match self {
            Value::Word(s) | Value::Text(s) => s.clone(),
            Value::Real(v) => fmt_f64(*v),
            Value::Int(v) => v.to_string(),
            Value::UInt(v) => v.to_string(),
            Value::Reals(v) => join(v.iter().map(|x| fmt_f64(*x)).collect()),
            Value::UInts(v) => join(v.iter().map(|x| x.to_string()).collect()),
        }
    }
}

/// A parsed and validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    values: BTreeMap<(String, String), Value>,
}

fn kind_of(section: &str, key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(s, k, _)| *s == section && *k == key).map(|e| e.2)
}

/// Parses and validates a configuration. Keys outside the schema, repeated
/// keys and malformed values are parse errors; values out of range or
/// inconsistent with the command are validation errors.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut section = String::new();
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
            continue;
        }
        let err = |message: String| ConfigError::Parse { line, message };
        if let Some(rest) = t.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err(format!("unterminated section header `{t}`")))?.trim();
            if !SCHEMA.iter().any(|(s, _, _)| *s == name && !name.is_empty()) {
                return Err(err(format!("unknown section `{name}`")));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = t.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{t}`")))?;
        let (k, v) = (k.trim(), v.trim());
        let kind = kind_of(&section, k).ok_or_else(|| match section.as_str() {
            "" => err(format!("unknown key `{k}`")),
            s => err(format!("unknown key `{k}` in [{s}]")),
        })?;
        let value = Value::parse(kind, v).map_err(|m| err(format!("{k}: {m}")))?;
        if values.insert((section.clone(), k.to_string()), value).is_some() {
            return Err(err(format!("duplicate key `{k}`")));
        }
    }
    let command = match values.get(&(String::new(), "command".to_string())) {
        Some(Value::Word(w)) => {
            Command::parse(w).ok_or_else(|| ConfigError::invalid("command", format!("unknown command `{w}`")))?
        }
        _ => return Err(ConfigError::invalid("command", "missing")),
    };
    let seed = match values.get(&(String::new(), "seed".to_string())) {
        Some(Value::UInt(s)) => *s,
        _ => 0,
    };
    let cfg = ExperimentConfig { command, seed, values };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Canonical text form; `parse_config(&c.serialize()) == Ok(c)`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, _) in SCHEMA {
            let Some(v) = self.values.get(&(section.to_string(), key.to_string())) else { continue };
            if *section != current {
                out.push_str(&format!("\n[{section}]\n"));
                current = section;
            }
            out.push_str(&format!("{key} = {}\n", v.render()));
        }
        out
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.values.get(&(section.to_string(), key.to_string()))
    }

    /// Sets a value, checked against the schema but not re-validated.
    pub fn set(&mut self, section: &str, key: &str, value: Value) -> Result<()> {
        let kind = kind_of(section, key).ok_or_else(|| ConfigError::invalid(key, "not in the schema"))?;
        let ok = matches!(
            (kind, &value),
            (Kind::Word, Value::Word(_))
                | (Kind::Text, Value::Text(_))
                | (Kind::Real, Value::Real(_))
                | (Kind::Int, Value::Int(_))
                | (Kind::UInt, Value::UInt(_))
                | (Kind::Reals, Value::Reals(_))
                | (Kind::UInts, Value::UInts(_))
        );
        if !ok {
            return Err(ConfigError::invalid(key, "wrong value type"));
        }
        match (section, key, &value) {
            ("", "seed", Value::UInt(s)) => self.seed = *s,
            ("", "command", Value::Word(w)) => {
                self.command = Command::parse(w).ok_or_else(|| ConfigError::invalid("command", w.clone()))?
            }
            _ => {}
        }
        self.values.insert((section.to_string(), key.to_string()), value);
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.values.insert((String::new(), "seed".into()), Value::UInt(seed));
        self
    }

    pub fn out(&self) -> Option<&str> {
        match self.get("", "out") {
            Some(Value::Text(s)) => Some(s),
            _ => None,
        }
    }

    fn has_section(&self, section: &str) -> bool {
        self.values.keys().any(|(s, _)| s == section)
    }

    fn word(&self, s: &str, k: &str) -> Option<&str> {
        match self.get(s, k) {
            Some(Value::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn real(&self, s: &str, k: &str) -> Option<f64> {
        match self.get(s, k) {
            Some(Value::Real(v)) => Some(*v),
            _ => None,
        }
    }

    fn uint(&self, s: &str, k: &str) -> Option<u64> {
        match self.get(s, k) {
            Some(Value::UInt(v)) => Some(*v),
            _ => None,
        }
    }

    fn reals(&self, s: &str, k: &str) -> Option<&[f64]> {
        match self.get(s, k) {
            Some(Value::Reals(v)) => Some(v),
            _ => None,
        }
    }

    fn text(&self, s: &str, k: &str) -> Option<&str> {
        match self.get(s, k) {
            Some(Value::Text(v)) => Some(v),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let needs = |section: &str| -> Result<()> {
            if self.has_section(section) {
                Ok(())
            } else {
                Err(ConfigError::invalid(section, format!("`{}` needs a [{section}] section", self.command)))
            }
        };
        match self.command {
            Command::Sample => {
                needs("sampler")?;
                self.sampler()?;
                self.runs(1)?;
            }
            Command::Simulate | Command::IfcCheck => {
                self.model()?;
                self.check_init()?;
                self.t_end()?;
                self.dt()?;
                self.scheme()?;
                if self.command == Command::IfcCheck {
                    self.ms()?;
                }
            }
            Command::Conditions => {
                needs("conditions")?;
                self.tail()?;
            }
            Command::Stationarity => {
                self.model()?;
                needs("sampler")?;
                self.sampler()?;
                self.stationarity_options()?;
            }
            Command::ReportData => {
                self.model()?;
                needs("sampler")?;
                self.sampler()?;
                self.check_init()?;
                self.t_end()?;
                self.dt()?;
                self.scheme()?;
                self.ms()?;
                self.runs(1)?;
                self.exit_radius()?;
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<PotentialModel> {
        if !self.has_section("model") {
            return Err(ConfigError::invalid("model", format!("`{}` needs a [model] section", self.command)));
        }
        let family = self.word("model", "family").ok_or_else(|| ConfigError::invalid("model.family", "missing"))?;
        let beta = self.real("model", "beta").ok_or_else(|| ConfigError::invalid("model.beta", "missing"))?;
        let mut spec = ModelSpec::new(family, beta);
        spec.alpha = self.real("model", "alpha");
        spec.a_exp = match self.get("model", "a_exp") {
            Some(Value::Int(a)) => Some(*a),
            _ => None,
        };
        spec.dim = self.uint("model", "dim").map(|d| d as usize);
        spec.domain = match self.word("model", "domain") {
            None => None,
            Some("full_space") => Some(Domain::FullSpace),
            Some("half_line") => Some(Domain::HalfLine),
            Some(w) => return Err(ConfigError::invalid("model.domain", format!("`{w}`, expected full_space or half_line"))),
        };
        match (self.reals("model", "pair_r"), self.reals("model", "pair_psi")) {
            (Some(r), Some(psi)) => spec.pair_table = Some(PairTable { r: r.to_vec(), psi: psi.to_vec() }),
            (None, None) => {}
            _ => return Err(ConfigError::invalid("model.pair_r", "pair_r and pair_psi go together")),
        }
        build_model(&spec).map_err(|e| {
            use ibmsim::Error as E;
            let field = match &e {
                E::UnknownFamily(_) => "model.family".to_string(),
                E::AlphaOutOfRange(_) => "model.alpha".to_string(),
                E::RieszExponentInvalid { .. } => "model.a_exp".to_string(),
                E::DimensionMismatch(_) => "model.dim".to_string(),
                E::InvalidParameter { name, .. } => format!("model.{name}"),
                _ => "model".to_string(),
            };
            ConfigError::invalid(&field, e.to_string())
        })
    }

    fn positive(&self, s: &str, k: &str, default: Option<f64>) -> Result<f64> {
        let field = if s.is_empty() { k.to_string() } else { format!("{s}.{k}") };
        let v = self.real(s, k).or(default).ok_or_else(|| ConfigError::invalid(&field, "missing"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(ConfigError::invalid(&field, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn t_end(&self) -> Result<f64> {
        self.positive("run", "T", None)
    }

    pub fn dt(&self) -> Result<f64> {
        let dt = self.positive("run", "dt", None)?;
        let t = self.t_end()?;
        let m = (t / dt).round();
        if m < 1.0 || (m * dt - t).abs() > 1e-9 * t {
            return Err(ConfigError::invalid("run.dt", format!("T = {t} is not a multiple of dt = {dt}")));
        }
        Ok(dt)
    }

    pub fn scheme(&self) -> Result<Option<Scheme>> {
        match self.word("run", "scheme") {
            None => Ok(None),
            Some("plain") => Ok(Some(Scheme::Plain)),
            Some("tamed") => Ok(Some(Scheme::Tamed)),
            Some(w) => Err(ConfigError::invalid("run.scheme", format!("`{w}`, expected plain or tamed"))),
        }
    }

    pub fn runs(&self, default: u64) -> Result<usize> {
        let r = self.uint("run", "runs").unwrap_or(default);
        if r == 0 {
            return Err(ConfigError::invalid("run.runs", "must be at least 1"));
        }
        Ok(r as usize)
    }

    pub fn exit_radius(&self) -> Result<Option<f64>> {
        match self.real("run", "exit_radius") {
            None => Ok(None),
            Some(r) if r >= 0.0 && r.is_finite() => Ok(Some(r)),
            Some(r) => Err(ConfigError::invalid("run.exit_radius", format!("{r}"))),
        }
    }

    /// IFC sizes; each must be in [1, N).
    pub fn ms(&self) -> Result<Vec<usize>> {
        let ms = match self.get("run", "ms") {
            Some(Value::UInts(v)) if !v.is_empty() => v.iter().map(|m| *m as usize).collect::<Vec<_>>(),
            _ => return Err(ConfigError::invalid("run.ms", "missing")),
        };
        let n = self.init_count()?;
        if let Some(&m) = ms.iter().find(|&&m| m == 0 || m >= n) {
            return Err(ConfigError::invalid("run.ms", format!("m = {m} outside [1, {n})")));
        }
        Ok(ms)
    }

    fn init_source(&self) -> Result<&str> {
        match self.word("init", "source").unwrap_or("lattice") {
            s @ ("lattice" | "sampler" | "file") => Ok(s),
            w => Err(ConfigError::invalid("init.source", format!("`{w}`, expected lattice, sampler or file"))),
        }
    }

    fn init_count(&self) -> Result<usize> {
        match self.uint("init", "n") {
            Some(n) if n >= 1 => Ok(n as usize),
            Some(_) => Err(ConfigError::invalid("init.n", "N must be at least 1")),
            None if self.init_source()? == "file" => Ok(usize::MAX),
            None => Err(ConfigError::invalid("init.n", "missing")),
        }
    }

    fn check_init(&self) -> Result<()> {
        let m = self.model()?;
        match self.init_source()? {
            "lattice" => {
                self.init_count()?;
                self.positive("init", "spacing", Some(1.0))?;
                if m.dim != 1 {
                    return Err(ConfigError::invalid("init.source", "lattice starts are one-dimensional"));
                }
            }
            "sampler" => {
                self.init_count()?;
                let s = self.sampler()?;
                if sampler_dim(&s) != m.dim {
                    return Err(ConfigError::invalid("sampler", "sampler and model dimensions differ"));
                }
            }
            _ => {
                let p = self.text("init", "path").ok_or_else(|| ConfigError::invalid("init.path", "missing"))?;
                if !Path::new(p).is_file() {
                    return Err(ConfigError::invalid("init.path", format!("{p}: no such file")));
                }
            }
        }
        Ok(())
    }

    /// Initial configuration: the first N canonical points of the source.
    pub fn init_config(&self, seed: u64) -> std::result::Result<Configuration, ibmsim::Error> {
        let m = self.model().map_err(|e| ibmsim::Error::Precondition(e.to_string()))?;
        let whole = if m.domain == Domain::HalfLine { Window::HalfLine } else { Window::Whole { dim: m.dim } };
        let c = match self.init_source().map_err(|e| ibmsim::Error::Precondition(e.to_string()))? {
            "lattice" => {
                let n = self.uint("init", "n").unwrap_or(1) as usize;
                let h = self.real("init", "spacing").unwrap_or(1.0);
                let pts: Vec<f64> = if m.domain == Domain::HalfLine {
                    (0..n).map(|i| (i + 1) as f64 * h).collect()
                } else {
                    (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * h).collect()
                };
                Configuration::from_points_1d(&pts, whole.clone())?
            }
            "sampler" => {
                let s = self.sampler().map_err(|e| ibmsim::Error::Precondition(e.to_string()))?;
                let e = sample_ensemble(&s, 1, seed)?;
                let n = self.uint("init", "n").unwrap_or(1) as usize;
                let c = &e.configs[0];
                if c.len() < n {
                    return Err(ibmsim::Error::Precondition(format!("sampler drew {} < N = {n} points", c.len())));
                }
                c.truncate_canonical(n)
            }
            _ => {
                let p = self.text("init", "path").unwrap_or_default();
                let text = std::fs::read_to_string(p)?;
                let c = parse_config_csv(&text, m.dim, whole.clone())?;
                match self.uint("init", "n") {
                    Some(n) => c.truncate_canonical(n as usize),
                    None => c,
                }
            }
        };
        c.with_window(whole)
    }

    fn window(&self) -> Result<Window> {
        let field = "sampler.window";
        let kind = self.word("sampler", "window").ok_or_else(|| ConfigError::invalid(field, "missing"))?;
        let need = |k: &str| self.reals("sampler", k).ok_or_else(|| ConfigError::invalid(&format!("sampler.{k}"), "missing"));
        let w = match kind {
            "interval" => {
                let (lo, hi) = (need("lo")?, need("hi")?);
                if lo.len() != 1 || hi.len() != 1 {
                    return Err(ConfigError::invalid("sampler.lo", "an interval has one lo and one hi"));
                }
                Window::Interval { lo: lo[0], hi: hi[0] }
            }
            "box" => Window::Box { lo: need("lo")?.to_vec(), hi: need("hi")?.to_vec() },
            "ball" => {
                let radius = self.positive("sampler", "radius", None)?;
                Window::Ball { center: need("center")?.to_vec(), radius }
            }
            "periodic" => Window::PeriodicBox { half: need("half")?.to_vec() },
            w => {
                return Err(ConfigError::invalid(field, format!("`{w}`, expected interval, box, ball or periodic")))
            }
        };
        let ok = match &w {
            Window::Interval { lo, hi } => lo < hi,
            Window::Box { lo, hi } => !lo.is_empty() && lo.len() == hi.len() && lo.iter().zip(hi).all(|(a, b)| a < b),
            Window::Ball { center, .. } => !center.is_empty(),
            Window::PeriodicBox { half } => !half.is_empty() && half.iter().all(|h| *h > 0.0),
            _ => true,
        };
        if !ok || !w.volume().is_finite() {
            return Err(ConfigError::invalid(field, "empty or inconsistent bounds"));
        }
        Ok(w)
    }

    pub fn sampler(&self) -> Result<Sampler> {
        let kind = self.word("sampler", "kind").ok_or_else(|| ConfigError::invalid("sampler.kind", "missing"))?;
        Ok(match kind {
            "dpp" => {
                let kernel = match self.word("sampler", "kernel").unwrap_or("sine") {
                    "sine" => KernelSpec::sine(),
                    "ginibre" => KernelSpec::ginibre(),
                    w => return Err(ConfigError::invalid("sampler.kernel", format!("`{w}`, expected sine or ginibre"))),
                };
                let window = self.window()?;
                let fits = match (kernel.dim(), &window) {
                    (1, Window::Interval { .. }) => true,
                    (2, Window::Ball { center, .. }) => center.iter().all(|c| *c == 0.0) && center.len() == 2,
                    _ => false,
                };
                if !fits {
                    return Err(ConfigError::invalid(
                        "sampler.window",
                        "sine needs an interval, ginibre a disk centered at the origin",
                    ));
                }
                Sampler::Dpp { kernel, window, options: None }
            }
            "ginibre_matrix" => {
                let n = self.uint("sampler", "n").ok_or_else(|| ConfigError::invalid("sampler.n", "missing"))?;
                let precision = match self.word("sampler", "precision").unwrap_or("f64") {
                    "f64" => Precision::F64,
                    "f32" => Precision::F32,
                    w => return Err(ConfigError::invalid("sampler.precision", format!("`{w}`"))),
                };
                if n == 0 {
                    return Err(ConfigError::invalid("sampler.n", "must be at least 1"));
                }
                Sampler::GinibreMatrix { n: n as usize, precision }
            }
            "poisson" => {
                let intensity = self.positive("sampler", "intensity", Some(1.0))?;
                Sampler::Poisson { intensity, window: self.window()? }
            }
            "gibbs" => {
                let model = self.model()?;
                let window = self.window()?;
                if !matches!(window, Window::PeriodicBox { .. }) || window.dim() != model.dim {
                    return Err(ConfigError::invalid("sampler.window", "gibbs needs a periodic box of the model dimension"));
                }
                let count = self.uint("sampler", "count").ok_or_else(|| ConfigError::invalid("sampler.count", "missing"))?;
                let sweeps = self.uint("sampler", "sweeps").unwrap_or(500);
                let step = self.positive("sampler", "step", Some(GibbsOptions::default().step))?;
                Sampler::Gibbs {
                    model,
                    window,
                    count: count as usize,
                    sweeps: sweeps as usize,
                    options: Some(GibbsOptions { step, ..Default::default() }),
                }
            }
            w => {
                return Err(ConfigError::invalid(
                    "sampler.kind",
                    format!("`{w}`, expected dpp, ginibre_matrix, poisson or gibbs"),
                ))
            }
        })
    }

    pub fn tail(&self) -> Result<(TailKind, Intensity, TailParams)> {
        let kind = match self.word("conditions", "kind").unwrap_or("A8a") {
            "A8a" | "a8a" => TailKind::A8a,
            "A5b" | "a5b" => TailKind::A5b,
            w => return Err(ConfigError::invalid("conditions.kind", format!("`{w}`, expected A5b or A8a"))),
        };
        let rho = match self.word("conditions", "rho1").ok_or_else(|| ConfigError::invalid("conditions.rho1", "missing"))? {
            "constant" => {
                let lambda = self.real("conditions", "lambda").unwrap_or(1.0);
                let dim = self.uint("conditions", "dim").unwrap_or(1) as usize;
                if !(lambda >= 0.0 && lambda.is_finite()) || dim == 0 {
                    return Err(ConfigError::invalid("conditions.lambda", "need lambda >= 0 and dim >= 1"));
                }
                Intensity::Constant { lambda, dim }
            }
            "ginibre" => Intensity::Ginibre,
            "airy_left" => Intensity::AiryLeft,
            "tabulated" => {
                let x = self.reals("conditions", "table_x").unwrap_or_default().to_vec();
                let values = self.reals("conditions", "table_values").unwrap_or_default().to_vec();
                let ok = x.len() >= 2
                    && x.len() == values.len()
                    && x.windows(2).all(|w| w[1] > w[0])
                    && values.iter().all(|v| *v >= 0.0 && v.is_finite());
                if !ok {
                    return Err(ConfigError::invalid(
                        "conditions.table_x",
                        "need matching increasing table_x and nonnegative table_values",
                    ));
                }
                Intensity::Tabulated { x, values }
            }
            w => {
                return Err(ConfigError::invalid(
                    "conditions.rho1",
                    format!("`{w}`, expected constant, ginibre, airy_left or tabulated"),
                ))
            }
        };
        let d = TailParams::default();
        let nonneg = |k: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(ConfigError::invalid(&format!("conditions.{k}"), format!("{v}")))
            }
        };
        let params = TailParams {
            r: nonneg("r", self.real("conditions", "r").unwrap_or(d.r))?,
            big_r: nonneg("R", self.real("conditions", "R").unwrap_or(d.big_r))?,
            t: self.positive("conditions", "T", Some(d.t))?,
            c: self.positive("conditions", "c", Some(d.c))?,
        };
        Ok((kind, rho, params))
    }

    pub fn stationarity_options(&self) -> Result<StationarityOptions> {
        let d = StationarityOptions::default();
        let t_end = match self.real("run", "T") {
            Some(t) if t >= 0.0 && t.is_finite() => t,
            Some(t) => return Err(ConfigError::invalid("run.T", format!("must be nonnegative, got {t}"))),
            None => d.t_end,
        };
        let dt = self.positive("run", "dt", Some(d.dt))?;
        let runs = self.runs(d.runs as u64)?;
        if runs < 10 {
            return Err(ConfigError::invalid("run.runs", "stationarity needs at least 10 runs"));
        }
        let count = |k: &str, default: usize| -> Result<usize> {
            match self.uint("stationarity", k).unwrap_or(default as u64) {
                0 => Err(ConfigError::invalid(&format!("stationarity.{k}"), "must be at least 1")),
                v => Ok(v as usize),
            }
        };
        let o = StationarityOptions {
            t_end,
            dt,
            runs,
            seed: self.seed,
            radius: self.positive("stationarity", "radius", Some(d.radius))?,
            bins: count("bins", d.bins)?,
            pair_max: self.positive("stationarity", "pair_max", Some(d.pair_max))?,
            pair_bins: count("pair_bins", d.pair_bins)?,
            bootstrap: count("bootstrap", d.bootstrap)?.max(2),
            min_separation: match self.real("stationarity", "min_separation") {
                None => None,
                Some(v) if v > 0.0 => Some(v),
                Some(v) => return Err(ConfigError::invalid("stationarity.min_separation", format!("{v}"))),
            },
        };
        if t_end > 0.0 {
            let m = (t_end / dt).round();
            if (m * dt - t_end).abs() > 1e-9 * t_end {
                return Err(ConfigError::invalid("run.dt", "T is not a multiple of dt"));
            }
        }
        Ok(o)
    }
}

pub(crate) fn sampler_dim(s: &Sampler) -> usize {
    match s {
        Sampler::Dpp { kernel, .. } => kernel.dim(),
        Sampler::GinibreMatrix { .. } => 2,
        Sampler::Poisson { window, .. } => window.dim(),
        Sampler::Gibbs { model, .. } => model.dim,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "command = simulate\nseed = 7\n[model]\nfamily = sine\nbeta = 2\n[init]\nn = 16\n[run]\nT = 1\ndt = 1e-3\n";

    #[test]
    fn minimal_simulate_config() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.command, Command::Simulate);
        assert_eq!(c.seed, 7);
        assert_eq!(c.dt().unwrap(), 1e-3);
        assert_eq!(c.init_config(0).unwrap().len(), 16);
    }

    #[test]
    fn negative_dt_names_the_field() {
        let e = parse_config(&MINIMAL.replace("dt = 1e-3", "dt = -1")).unwrap_err();
        assert!(matches!(e, ConfigError::Validation { ref field, .. } if field == "run.dt"), "{e}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = MINIMAL.replace("beta = 2", "beta = 2\ngamma = 3");
        assert!(matches!(parse_config(&text), Err(ConfigError::Parse { line: 6, .. })));
        assert!(matches!(parse_config("command = simulate\n[nope]\n"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(parse_config("command simulate\n"), Err(ConfigError::Parse { line: 1, .. })));
        let dup = MINIMAL.replace("beta = 2", "beta = 2\nbeta = 3");
        assert!(matches!(parse_config(&dup), Err(ConfigError::Parse { line: 6, .. })));
        let bad = MINIMAL.replace("beta = 2", "beta = two");
        assert!(matches!(parse_config(&bad), Err(ConfigError::Parse { line: 5, .. })));
    }

    #[test]
    fn model_errors_map_to_fields() {
        let bessel = MINIMAL.replace("family = sine", "family = bessel\nalpha = 0.5\ndomain = half_line");
        let e = parse_config(&bessel).unwrap_err();
        assert!(matches!(e, ConfigError::Validation { ref field, .. } if field == "model.alpha"), "{e}");
        let riesz = MINIMAL.replace("family = sine", "family = riesz\na_exp = 2\ndim = 3");
        let e = parse_config(&riesz).unwrap_err();
        assert!(matches!(e, ConfigError::Validation { ref field, .. } if field == "model.a_exp"), "{e}");
        let e = parse_config(&MINIMAL.replace("n = 16", "n = 0")).unwrap_err();
        assert!(matches!(e, ConfigError::Validation { ref field, .. } if field == "init.n"), "{e}");
    }

    #[test]
    fn missing_paths_fail_at_parse() {
        let text = MINIMAL.replace("n = 16", "source = file\npath = /nonexistent/init.csv");
        let e = parse_config(&text).unwrap_err();
        assert!(matches!(e, ConfigError::Validation { ref field, .. } if field == "init.path"), "{e}");
    }

    #[test]
    fn conditions_and_sampler_sections() {
        let c = parse_config("command = conditions\n[conditions]\nkind = A8a\nrho1 = constant\nlambda = 1\n").unwrap();
        let (kind, rho, p) = c.tail().unwrap();
        assert_eq!(kind, TailKind::A8a);
        assert_eq!(rho, Intensity::Constant { lambda: 1.0, dim: 1 });
        assert_eq!(p, TailParams::default());
        let s = parse_config("command = sample\n[sampler]\nkind = dpp\nwindow = interval\nlo = 0\nhi = 20\n[run]\nruns = 3\n")
            .unwrap();
        assert_eq!(s.runs(1).unwrap(), 3);
        assert!(matches!(s.sampler().unwrap(), Sampler::Dpp { .. }));
        let bad = "command = sample\n[sampler]\nkind = dpp\nkernel = ginibre\nwindow = interval\nlo = 0\nhi = 20\n";
        assert!(matches!(parse_config(bad), Err(ConfigError::Validation { .. })));
        assert!(matches!(parse_config("command = sample\n"), Err(ConfigError::Validation { .. })));
    }

    fn word(options: &'static [&'static str]) -> impl Strategy<Value = Value> {
        proptest::sample::select(options).prop_map(|s| Value::Word(s.to_string()))
    }

    fn real(lo: f64, hi: f64) -> impl Strategy<Value = Value> {
        (lo..hi).prop_map(Value::Real)
    }

    /// Random valid configurations over the commands that need no files.
    fn config_text() -> impl Strategy<Value = String> {
        let dt = proptest::sample::select(&[1e-3, 2e-3, 5e-3, 1e-2][..]);
        let steps = 1u32..500;
        let family = proptest::sample::select(&["sine", "lj", "riesz"][..]);
        let cmd = proptest::sample::select(&["simulate", "ifc-check", "conditions", "sample", "stationarity"][..]);
        (cmd, any::<u64>(), family, 0.1f64..5.0, dt, steps, 10u64..40, 0.3f64..2.0, (0.0f64..5.0, 0.1f64..4.0))
            .prop_map(|(cmd, seed, family, beta, dt, steps, n, spacing, (r, c))| {
                let mut s = format!("command = {cmd}\nseed = {seed}\n");
                match cmd {
                    "conditions" => {
                        s += &format!(
                            "[conditions]\nkind = A5b\nrho1 = constant\nlambda = {}\nr = {}\nc = {}\n",
                            fmt_f64(beta),
                            fmt_f64(r),
                            fmt_f64(c)
                        );
                    }
                    "sample" => {
                        s += &format!(
                            "[sampler]\nkind = poisson\nintensity = {}\nwindow = box\nlo = 0, {}\nhi = {}, 3\n[run]\nruns = {n}\n",
                            fmt_f64(beta),
                            fmt_f64(-r),
                            fmt_f64(spacing)
                        );
                    }
                    _ => {
                        let t = dt * steps as f64;
                        let extra = if family == "riesz" { "a_exp = 3\n" } else { "" };
                        s += &format!(
                            "[model]\nfamily = {family}\nbeta = {}\n{extra}[init]\nn = {n}\nspacing = {}\n[run]\nT = {}\ndt = {}\nruns = {n}\nms = 1, {}\n",
                            fmt_f64(beta),
                            fmt_f64(spacing),
                            fmt_f64(t),
                            fmt_f64(dt),
                            n - 1
                        );
                        if cmd == "stationarity" {
                            s += "[sampler]\nkind = poisson\nwindow = interval\nlo = -5\nhi = 5\n";
                        }
                    }
                }
                s
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn serialize_then_parse_is_identity(text in config_text()) {
            let c = parse_config(&text).unwrap();
            let again = parse_config(&c.serialize()).unwrap();
            prop_assert_eq!(&again, &c);
            prop_assert_eq!(again.serialize(), c.serialize());
        }

        #[test]
        fn values_render_and_parse_back(v in prop_oneof![
            real(-1e300, 1e300),
            real(-1e-300, 1e-300),
            any::<i64>().prop_map(Value::Int),
            proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..5).prop_map(Value::Reals),
            proptest::collection::vec(any::<u64>(), 0..5).prop_map(Value::UInts),
            word(&["sine", "ifc-check", "f32"]),
        ]) {
            let kind = match &v {
                Value::Real(_) => Kind::Real,
                Value::Int(_) => Kind::Int,
                Value::Reals(_) => Kind::Reals,
                Value::UInts(_) => Kind::UInts,
                _ => Kind::Word,
            };
            prop_assert_eq!(Value::parse(kind, &v.render()).unwrap(), v);
        }
    }
}
