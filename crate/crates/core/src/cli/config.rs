//! Run configuration: TOML sections of `key = value` lines layered over an
//! optional compiled-in preset.
//!
//! ```toml
//! preset = "example1"          # optional base
//!
//! [model]
//! alpha_m1 = 1.5
//! r = 5
//! lambda = 1.0                 # default 1.0
//!
//! [jump]
//! scale = 0.5                  # nu(x) = scale * x
//!
//! [experiment]
//! T = 1
//! h_list = ["2^-5", "2^-6"]    # numbers or "a^b", "a*b^c", "a/b"
//! h_exact = "2^-14"
//! n_paths = 10000
//! reference = "bem"
//! schemes = ["tem", "pem", "bem"]
//! seed = 2025
//! kappa = 0.125                # PEM projection exponent
//!
//! [simulate]
//! h = "2^-10"
//! paths = 1
//! schemes = ["tem"]
//!
//! [check]
//! h_list = ["2^-5", "2^-10"]
//! corrections = ["tamed", "projected"]
//! kappa = 0.125
//! v = 3
//! grid_lo = 1e-3
//! grid_hi = 1e3
//! grid_points = 200
//! grid_pairs = 1000
//! grid_seed = 0
//! ```

use std::fmt::Write as _;
use std::path::Path;

use toml::{Table, Value};

use crate::corrections::{default_kappa, CheckOptions, CorrectionKind, SampleGrid};
use crate::experiment::ExperimentConfig;
use crate::model::{JumpCoefficient, ModelParams, DEFAULT_LAMBDA};
use crate::schemes::SchemeTag;

/// Configuration problem with a location when one is known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.source)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Example1,
    Example2,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "example1" => Some(Preset::Example1),
            "example2" => Some(Preset::Example2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
        }
    }

    pub fn params(self) -> ModelParams {
        match self {
            Preset::Example1 => ModelParams::example1(),
            Preset::Example2 => ModelParams::example2(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub jump_scale: f64,
    pub experiment: ExperimentConfig,
    pub simulate_h: f64,
    pub simulate_paths: usize,
    pub simulate_schemes: Vec<SchemeTag>,
    pub check_h_list: Vec<f64>,
    pub check_corrections: Vec<CorrectionKind>,
    pub check: CheckOptions,
}

impl RunConfig {
    /// Defaults for a preset: the standard error study plus taming and
    /// projection checks at every experiment step size.
    pub fn from_preset(preset: Preset) -> Self {
        let params = preset.params();
        let experiment = ExperimentConfig::standard(params);
        RunConfig {
            preset: Some(preset),
            jump_scale: 0.5,
            simulate_h: 2f64.powi(-10),
            simulate_paths: 1,
            simulate_schemes: vec![SchemeTag::Tem],
            check_h_list: experiment.h_list.clone(),
            check_corrections: vec![CorrectionKind::Tamed, CorrectionKind::projected_default(&params)],
            check: CheckOptions::default(),
            experiment,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.experiment.params
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: None,
            field: None,
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string(), None)
    }

    /// Parses `text`; `base` (or the file's `preset` key) supplies defaults.
    pub fn parse(text: &str, source: &str, base: Option<Preset>) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
            source: source.to_string(),
            line: e.span().map(|s| text[..s.start].lines().count().max(1)),
            field: None,
            message: e.message().to_string(),
        })?;
        Parser { text, source, table }.resolve(base)
    }

    /// Renders the resolved configuration as a loadable file.
    pub fn to_toml(&self) -> String {
        let p = self.params();
        let e = &self.experiment;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let names = |v: &[SchemeTag]| {
            v.iter()
                .map(|s| format!("\"{}\"", s.as_str().to_ascii_lowercase()))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = String::new();
        let _ = writeln!(s, "[model]");
        for (k, v) in [
            ("alpha_m1", p.alpha_m1),
            ("alpha0", p.alpha0),
            ("alpha1", p.alpha1),
            ("alpha2", p.alpha2),
            ("sigma", p.sigma),
            ("r", p.r),
            ("rho", p.rho),
            ("lambda", p.lambda),
            ("x0", p.x0),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "\n[jump]\nscale = {:?}", self.jump_scale);
        let _ = writeln!(s, "\n[experiment]");
        let _ = writeln!(s, "T = {:?}", e.horizon);
        let _ = writeln!(s, "h_list = [{}]", list(&e.h_list));
        let _ = writeln!(s, "h_exact = {:?}", e.h_exact);
        let _ = writeln!(s, "n_paths = {}", e.n_paths);
        let _ = writeln!(s, "reference = \"{}\"", e.reference.as_str().to_ascii_lowercase());
        let _ = writeln!(s, "schemes = [{}]", names(&e.schemes));
        let _ = writeln!(s, "seed = {}", e.seed);
        if let Some(k) = e.kappa {
            let _ = writeln!(s, "kappa = {k:?}");
        }
        let _ = writeln!(s, "\n[simulate]");
        let _ = writeln!(s, "h = {:?}", self.simulate_h);
        let _ = writeln!(s, "paths = {}", self.simulate_paths);
        let _ = writeln!(s, "schemes = [{}]", names(&self.simulate_schemes));
        let _ = writeln!(s, "\n[check]");
        let _ = writeln!(s, "h_list = [{}]", list(&self.check_h_list));
        let corrections: Vec<String> = self
            .check_corrections
            .iter()
            .map(|c| format!("\"{}\"", c.name()))
            .collect();
        let _ = writeln!(s, "corrections = [{}]", corrections.join(", "));
        if let Some(CorrectionKind::Projected { kappa }) = self
            .check_corrections
            .iter()
            .find(|c| matches!(c, CorrectionKind::Projected { .. }))
        {
            let _ = writeln!(s, "kappa = {kappa:?}");
        }
        let g = &self.check.grid;
        let _ = writeln!(s, "v = {:?}", self.check.v);
        let _ = writeln!(s, "grid_lo = {:?}\ngrid_hi = {:?}", g.lo, g.hi);
        let _ = writeln!(s, "grid_points = {}\ngrid_pairs = {}\ngrid_seed = {}", g.points, g.pairs, g.seed);
        s
    }

    /// Flat `key = value` echo for run manifests.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut section = String::new();
        for line in self.to_toml().lines() {
            let line = line.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
            } else if let Some((k, v)) = line.split_once(" = ") {
                out.push((format!("config.{section}.{k}"), v.to_string()));
            }
        }
        if let Some(p) = self.preset {
            out.insert(0, ("config.preset".into(), p.name().into()));
        }
        out
    }
}

/// Evaluates a step expression: a number, `a^b`, `a*b^c`, or `a/b`.
pub fn parse_step(expr: &str) -> Option<f64> {
    let expr = expr.trim();
    if let Some((num, den)) = expr.split_once('/') {
        return Some(parse_step(num)? / parse_step(den)?);
    }
    let mut value = 1.0;
    for factor in expr.split('*') {
        let factor = factor.trim();
        value *= match factor.split_once('^') {
            Some((base, exp)) => base.trim().parse::<f64>().ok()?.powf(exp.trim().parse::<f64>().ok()?),
            None => factor.parse::<f64>().ok()?,
        };
    }
    value.is_finite().then_some(value)
}

struct Parser<'a> {
    text: &'a str,
    source: &'a str,
    table: Table,
}

const MODEL_KEYS: &[&str] = &["alpha_m1", "alpha0", "alpha1", "alpha2", "sigma", "r", "rho", "lambda", "x0"];
const SECTIONS: &[(&str, &[&str])] = &[
    ("model", MODEL_KEYS),
    ("jump", &["scale"]),
    (
        "experiment",
        &["T", "h_list", "h_exact", "n_paths", "reference", "schemes", "seed", "kappa"],
    ),
    ("simulate", &["h", "paths", "schemes"]),
    (
        "check",
        &[
            "h_list",
            "corrections",
            "kappa",
            "v",
            "grid_lo",
            "grid_hi",
            "grid_points",
            "grid_pairs",
            "grid_seed",
        ],
    ),
];

impl Parser<'_> {
    /// Line of `key` inside `[section]`, or of the section header.
    fn line_of(&self, section: &str, key: Option<&str>) -> Option<usize> {
        let mut current = String::new();
        let mut header = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                if current == section {
                    header = Some(i + 1);
                }
                continue;
            }
            if current == section {
                if let Some(k) = key {
                    let lhs = line.split('=').next().unwrap_or("").trim();
                    if lhs == k {
                        return Some(i + 1);
                    }
                }
            }
        }
        header
    }

    fn err(&self, section: &str, key: Option<&str>, message: impl Into<String>) -> ConfigError {
        let field = match (section, key) {
            ("", Some(k)) => Some(k.to_string()),
            (s, Some(k)) => Some(format!("{s}.{k}")),
            (s, None) if !s.is_empty() => Some(s.to_string()),
            _ => None,
        };
        ConfigError {
            source: self.source.to_string(),
            line: self.line_of(section, key),
            field,
            message: message.into(),
        }
    }

    fn section(&self, name: &str) -> Result<Option<&Table>, ConfigError> {
        match self.table.get(name) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(_) => Err(self.err(name, None, "expected a [section]")),
        }
    }

    fn check_keys(&self) -> Result<(), ConfigError> {
        for (key, value) in &self.table {
            if key == "preset" {
                continue;
            }
            let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == key) else {
                return Err(self.err("", Some(key), "unknown key or section"));
            };
            if let Value::Table(t) = value {
                for k in t.keys() {
                    if !allowed.contains(&k.as_str()) {
                        return Err(self.err(key, Some(k), "unknown key"));
                    }
                }
            }
        }
        Ok(())
    }

    fn number(&self, section: &str, key: &str, v: &Value) -> Result<f64, ConfigError> {
        let x = match v {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            Value::String(s) => parse_step(s).ok_or_else(|| self.err(section, Some(key), format!("cannot evaluate `{s}`")))?,
            _ => return Err(self.err(section, Some(key), "expected a number")),
        };
        Ok(x)
    }

    fn get_number(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.section(section)?.and_then(|t| t.get(key)) {
            None => Ok(None),
            Some(v) => self.number(section, key, v).map(Some),
        }
    }

    fn get_count(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.section(section)?.and_then(|t| t.get(key)) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(Value::Float(f)) if *f >= 0.0 && f.fract() == 0.0 => Ok(Some(*f as u64)),
            Some(_) => Err(self.err(section, Some(key), "expected a non-negative integer")),
        }
    }

    fn get_numbers(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.section(section)?.and_then(|t| t.get(key)) {
            None => Ok(None),
            Some(Value::Array(items)) => items.iter().map(|v| self.number(section, key, v)).collect::<Result<_, _>>().map(Some),
            Some(_) => Err(self.err(section, Some(key), "expected an array")),
        }
    }

    fn get_strings(&self, section: &str, key: &str) -> Result<Option<Vec<String>>, ConfigError> {
        match self.section(section)?.and_then(|t| t.get(key)) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(self.err(section, Some(key), "expected an array of strings")),
                })
                .collect::<Result<_, _>>()
                .map(Some),
            Some(Value::String(s)) => Ok(Some(vec![s.clone()])),
            Some(_) => Err(self.err(section, Some(key), "expected an array of strings")),
        }
    }

    fn schemes(&self, section: &str, key: &str) -> Result<Option<Vec<SchemeTag>>, ConfigError> {
        self.get_strings(section, key)?
            .map(|names| {
                names
                    .iter()
                    .map(|n| n.parse::<SchemeTag>().map_err(|e| self.err(section, Some(key), e.to_string())))
                    .collect()
            })
            .transpose()
    }

    fn resolve(self, base: Option<Preset>) -> Result<RunConfig, ConfigError> {
        self.check_keys()?;
        let preset = match self.table.get("preset") {
            None => base,
            Some(Value::String(name)) => Some(
                Preset::parse(name).ok_or_else(|| self.err("", Some("preset"), format!("unknown preset `{name}`")))?,
            ),
            Some(_) => return Err(self.err("", Some("preset"), "expected a string")),
        };

        let mut cfg = RunConfig::from_preset(preset.unwrap_or(Preset::Example1));
        cfg.preset = preset;

        // model: without a preset every constant except lambda is required
        let mut p = cfg.experiment.params;
        {
            let slots: [(&str, &mut f64); 9] = [
                ("alpha_m1", &mut p.alpha_m1),
                ("alpha0", &mut p.alpha0),
                ("alpha1", &mut p.alpha1),
                ("alpha2", &mut p.alpha2),
                ("sigma", &mut p.sigma),
                ("r", &mut p.r),
                ("rho", &mut p.rho),
                ("lambda", &mut p.lambda),
                ("x0", &mut p.x0),
            ];
            for (key, slot) in slots {
                match self.get_number("model", key)? {
                    Some(v) => *slot = v,
                    None if key == "lambda" => {
                        if preset.is_none() {
                            *slot = DEFAULT_LAMBDA;
                        }
                    }
                    None if preset.is_none() => {
                        return Err(self.err("model", Some(key), "missing required field (no preset given)"));
                    }
                    None => {}
                }
            }
        }
        if let Err(e) = p.validate() {
            let field = match &e {
                crate::Error::InvalidParam { field, .. } => Some(*field),
                _ => None,
            };
            return Err(self.err("model", field, e.to_string()));
        }

        if let Some(scale) = self.get_number("jump", "scale")? {
            cfg.jump_scale = scale;
        }
        let jump = JumpCoefficient::linear(cfg.jump_scale).map_err(|e| self.err("jump", Some("scale"), e.to_string()))?;

        let e = &mut cfg.experiment;
        e.params = p;
        e.jump = jump;
        if let Some(t) = self.get_number("experiment", "T")? {
            e.horizon = t;
        }
        if let Some(v) = self.get_numbers("experiment", "h_list")? {
            e.h_list = v;
        }
        if let Some(v) = self.get_number("experiment", "h_exact")? {
            e.h_exact = v;
        }
        if let Some(v) = self.get_count("experiment", "n_paths")? {
            e.n_paths = v as usize;
        }
        if let Some(v) = self.get_strings("experiment", "reference")? {
            let [name] = v.as_slice() else {
                return Err(self.err("experiment", Some("reference"), "expected one scheme name"));
            };
            e.reference = name.parse().map_err(|err: crate::Error| self.err("experiment", Some("reference"), err.to_string()))?;
        }
        if let Some(v) = self.schemes("experiment", "schemes")? {
            e.schemes = v;
        }
        if let Some(v) = self.get_count("experiment", "seed")? {
            e.seed = v;
        }
        e.kappa = self.get_number("experiment", "kappa")?;
        if let Err(err) = e.validate() {
            let field = match &err {
                crate::Error::InvalidParam { field, .. } => Some(*field),
                _ => None,
            };
            return Err(self.err("experiment", field, err.to_string()));
        }
        if let Some(k) = e.kappa {
            crate::corrections::Correction::projected(e.h_list[0], k, &e.params)
                .map_err(|err| self.err("experiment", Some("kappa"), err.to_string()))?;
        }

        if let Some(h) = self.get_number("simulate", "h")? {
            if !(h > 0.0 && h.is_finite()) {
                return Err(self.err("simulate", Some("h"), "must be > 0"));
            }
            cfg.simulate_h = h;
        }
        if let Some(n) = self.get_count("simulate", "paths")? {
            cfg.simulate_paths = n as usize;
        }
        if let Some(v) = self.schemes("simulate", "schemes")? {
            cfg.simulate_schemes = v;
        }

        cfg.check_h_list = match self.get_numbers("check", "h_list")? {
            Some(v) => v,
            None => cfg.experiment.h_list.clone(),
        };
        if cfg.check_h_list.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(self.err("check", Some("h_list"), "step sizes must be > 0"));
        }
        let kappa = self
            .get_number("check", "kappa")?
            .or(cfg.experiment.kappa)
            .unwrap_or_else(|| default_kappa(p.r));
        if let Some(names) = self.get_strings("check", "corrections")? {
            cfg.check_corrections = names
                .iter()
                .map(|n| match n.as_str() {
                    "identity" => Ok(CorrectionKind::Identity),
                    "tamed" => Ok(CorrectionKind::Tamed),
                    "projected" => Ok(CorrectionKind::Projected { kappa }),
                    other => Err(self.err("check", Some("corrections"), format!("unknown correction `{other}`"))),
                })
                .collect::<Result<_, _>>()?;
        } else {
            cfg.check_corrections = vec![CorrectionKind::Tamed, CorrectionKind::Projected { kappa }];
        }
        for c in &cfg.check_corrections {
            crate::corrections::Correction::new(*c, cfg.check_h_list[0], &p)
                .map_err(|err| self.err("check", Some("kappa"), err.to_string()))?;
        }
        if let Some(v) = self.get_number("check", "v")? {
            if !(v > 2.0) {
                return Err(self.err("check", Some("v"), "must be > 2"));
            }
            cfg.check.v = v;
        }
        let grid = &mut cfg.check.grid;
        if let Some(v) = self.get_number("check", "grid_lo")? {
            grid.lo = v;
        }
        if let Some(v) = self.get_number("check", "grid_hi")? {
            grid.hi = v;
        }
        if let Some(v) = self.get_count("check", "grid_points")? {
            grid.points = v as usize;
        }
        if let Some(v) = self.get_count("check", "grid_pairs")? {
            grid.pairs = v as usize;
        }
        if let Some(v) = self.get_count("check", "grid_seed")? {
            grid.seed = v;
        }
        if !(grid.lo > 0.0 && grid.hi > grid.lo && grid.points >= 2) {
            let SampleGrid { lo, hi, points, .. } = *grid;
            return Err(self.err(
                "check",
                Some("grid_lo"),
                format!("need 0 < grid_lo < grid_hi and >= 2 points, got [{lo}, {hi}] x {points}"),
            ));
        }
        cfg.check.horizon = cfg.experiment.horizon;
        Ok(cfg)
    }
}
