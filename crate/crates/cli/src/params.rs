//! Parameter bindings merged from a config document and flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use blockgame::{validate_hashrate, HashrateDistribution, Rational, Scalar};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Source {
    Flag,
    Config,
}

#[derive(Clone, Debug, Default)]
pub struct Bindings {
    values: BTreeMap<String, (String, Source)>,
}

/// Reads a config document: a JSON object of parameters.
pub fn load_config(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MalformedConfig(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::MalformedConfig("top level must be an object".into())),
        Err(e) => Err(CliError::MalformedConfig(e.to_string())),
    }
}

fn config_string(key: &str, v: &Value) -> CliResult<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(xs) => xs
            .iter()
            .map(|x| match x {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(CliError::MalformedConfig(format!("`{key}` must hold numbers or strings"))),
            })
            .collect::<CliResult<Vec<_>>>()
            .map(|xs| xs.join(",")),
        _ => Err(CliError::MalformedConfig(format!("`{key}` has an unsupported value"))),
    }
}

impl Bindings {
    /// Flags come from a serialisable args struct whose field names are
    /// the flag names; config keys must be among them (or `seed`).
    pub fn new<A: Serialize>(flags: &A, config: Option<&Map<String, Value>>) -> CliResult<Self> {
        let flags = match serde_json::to_value(flags).expect("args serialise") {
            Value::Object(m) => m,
            _ => unreachable!("args are structs"),
        };
        let mut values = BTreeMap::new();
        if let Some(cfg) = config {
            for (k, v) in cfg {
                if k == "seed" {
                    continue;
                }
                if !flags.contains_key(k) {
                    return Err(CliError::MalformedConfig(format!("unknown parameter `{k}`")));
                }
                if !v.is_null() {
                    values.insert(k.clone(), (config_string(k, v)?, Source::Config));
                }
            }
        }
        for (k, v) in flags {
            if let Value::String(s) = v {
                values.insert(k, (s, Source::Flag));
            }
        }
        Ok(Bindings { values })
    }

    fn bad_value(&self, key: &str, what: &str) -> CliError {
        let (raw, src) = &self.values[key];
        let msg = format!("`{key}` = `{raw}` is not {what}");
        match src {
            Source::Flag => CliError::Usage(msg),
            Source::Config => CliError::MalformedConfig(msg),
        }
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn str(&self, key: &str) -> CliResult<&str> {
        self.opt_str(key).ok_or_else(|| CliError::MissingParameter(key.into()))
    }

    pub fn opt_scalar(&self, key: &str) -> CliResult<Option<Rational>> {
        match self.opt_str(key) {
            None => Ok(None),
            Some(s) => Rational::parse_decimal(s.trim()).map(Some).map_err(|_| self.bad_value(key, "a number")),
        }
    }

    pub fn scalar(&self, key: &str) -> CliResult<Rational> {
        self.opt_scalar(key)?.ok_or_else(|| CliError::MissingParameter(key.into()))
    }

    pub fn scalar_or(&self, key: &str, default: &str) -> CliResult<Rational> {
        Ok(self.opt_scalar(key)?.unwrap_or_else(|| Rational::parse_decimal(default).expect("valid default")))
    }

    pub fn opt_int<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.opt_str(key) {
            None => Ok(None),
            Some(s) => s.trim().parse().map(Some).map_err(|_| self.bad_value(key, "a non-negative integer")),
        }
    }

    pub fn int<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.opt_int(key)?.ok_or_else(|| CliError::MissingParameter(key.into()))
    }

    pub fn int_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        Ok(self.opt_int(key)?.unwrap_or(default))
    }

    /// Comma-separated hashrates, validated.
    pub fn lambda(&self) -> CliResult<HashrateDistribution<Rational>> {
        let raw = self.str("lambda")?;
        let xs = raw
            .split(',')
            .map(|x| Rational::parse_decimal(x.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| self.bad_value("lambda", "a comma-separated list of numbers"))?;
        Ok(validate_hashrate(&xs)?)
    }

    /// One of `choices`, or `default` when unbound.
    pub fn choice<'a>(&self, key: &str, choices: &[&'a str], default: &'a str) -> CliResult<&'a str> {
        match self.opt_str(key) {
            None => Ok(default),
            Some(s) => choices.iter().copied().find(|c| *c == s).ok_or_else(|| self.bad_value(key, &format!("one of {choices:?}"))),
        }
    }

    /// Every bound parameter, as given.
    pub fn inputs(&self) -> BTreeMap<String, String> {
        self.values.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect()
    }
}
