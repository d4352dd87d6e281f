//! Flat `key = value` configuration with dotted namespaces.
//!
//! ```text
//! # circle shrinking under the default resolution
//! preset = circle-law
//! sim.eps = 0.025
//! sim.radii = 1.0
//! ```
//!
//! Every key must be declared by the consuming experiment; values are
//! type-checked against the declaration before anything runs.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Declared type of a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    Bool,
    Text,
    FloatList,
}

/// A typed parameter value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    FloatList(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Text(v) => write!(f, "{v}"),
            Value::FloatList(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// A declared key with its default and one line of documentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Param {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
}

impl Param {
    pub const fn new(key: &'static str, kind: Kind, default: &'static str, doc: &'static str) -> Self {
        Self { key, kind, default, doc }
    }
}

/// Parses `text` as the declared kind.
pub fn parse_value(kind: Kind, text: &str) -> std::result::Result<Value, String> {
    let text = text.trim();
    let float = |s: &str| -> std::result::Result<f64, String> {
        let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("'{s}' is not finite"))
        }
    };
    match kind {
        Kind::Float => float(text).map(Value::Float),
        Kind::Int => text
            .parse()
            .map(Value::Int)
            .map_err(|_| format!("'{text}' is not a non-negative integer")),
        Kind::Bool => match text {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("'{text}' is not true or false")),
        },
        Kind::Text => Ok(Value::Text(text.to_string())),
        Kind::FloatList => {
            if text.is_empty() {
                return Ok(Value::FloatList(Vec::new()));
            }
            text.split(',').map(float).collect::<std::result::Result<_, _>>().map(Value::FloatList)
        }
    }
}

/// Splits `key=value`; the key must be non-empty and made of
/// `[a-z0-9_.-]`.
pub fn parse_assignment(line: &str) -> Result<(String, String)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("expected key=value, got '{line}'")))?;
    let k = k.trim();
    let ok = !k.is_empty()
        && k.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '_' | '.' | '-'));
    if !ok {
        return Err(Error::Parse(format!("malformed key '{k}'")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// Reads a configuration file body; `#` starts a comment, blank lines are
/// skipped, and a repeated key is an error.
pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = parse_assignment(line).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        if out.insert(k.clone(), v).is_some() {
            return Err(Error::Parse(format!("line {}: key '{k}' given twice", n + 1)));
        }
    }
    Ok(out)
}

/// Fully resolved, typed settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    values: BTreeMap<String, Value>,
}

impl Settings {
    /// Applies `raw` over the defaults of `params`; unknown keys and values
    /// of the wrong type are rejected.
    pub fn resolve(params: &[Param], raw: &BTreeMap<String, String>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for p in params {
            let text = raw.get(p.key).map_or(p.default, String::as_str);
            let v = parse_value(p.kind, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.key)))?;
            values.insert(p.key.to_string(), v);
        }
        if let Some(k) = raw.keys().find(|k| !values.contains_key(*k)) {
            return Err(Error::InvalidInput(format!("unknown key '{k}'")));
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> &Value {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("setting '{key}' was not declared"))
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            Value::Int(v) => *v as f64,
            v => panic!("setting '{key}' is {v:?}, not a number"),
        }
    }

    pub fn int(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Int(v) => *v as usize,
            v => panic!("setting '{key}' is {v:?}, not an integer"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(v) => *v,
            v => panic!("setting '{key}' is {v:?}, not a flag"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(v) => v,
            v => panic!("setting '{key}' is {v:?}, not text"),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::FloatList(v) => v,
            v => panic!("setting '{key}' is {v:?}, not a list"),
        }
    }

    /// `(key, value)` pairs in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: &[Param] = &[
        Param::new("sim.eps", Kind::Float, "0.05", ""),
        Param::new("sim.m", Kind::Int, "512", ""),
        Param::new("sim.radii", Kind::FloatList, "1.0,0.5", ""),
        Param::new("out.snap", Kind::Bool, "false", ""),
    ];

    #[test]
    fn parses_comments_and_defaults() {
        let raw = parse_text("# header\nsim.eps = 0.025  # finer\n\nsim.radii=0.9, 0.6,0.3\n").unwrap();
        let s = Settings::resolve(PARAMS, &raw).unwrap();
        assert_eq!(s.float("sim.eps"), 0.025);
        assert_eq!(s.int("sim.m"), 512);
        assert_eq!(s.list("sim.radii"), &[0.9, 0.6, 0.3]);
        assert!(!s.flag("out.snap"));
    }

    #[test]
    fn rejects_unknown_and_mistyped_keys() {
        let raw = parse_text("sim.epsilon = 0.1").unwrap();
        assert!(matches!(Settings::resolve(PARAMS, &raw), Err(Error::InvalidInput(_))));
        let raw = parse_text("sim.m = 12.5").unwrap();
        assert!(Settings::resolve(PARAMS, &raw).is_err());
        let raw = parse_text("sim.eps = nan").unwrap();
        assert!(Settings::resolve(PARAMS, &raw).is_err());
        assert!(parse_text("sim.eps 0.1").is_err());
        assert!(parse_text("a=1\na=2").is_err());
        assert!(parse_assignment("Sim.Eps=1").is_err());
    }
}
