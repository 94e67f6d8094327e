//! Angle parsing plus the layering of flags over config files.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::{self, DeserializeOwned, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

/// Failure classes, mapped to distinct exit statuses.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn field(field: &str, reason: impl fmt::Display) -> Self {
        CliError::Config(format!("invalid `{field}`: {reason}"))
    }
}

impl From<eqw_core::Error> for CliError {
    fn from(e: eqw_core::Error) -> Self {
        match e {
            eqw_core::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// An angle in radians. Parses plain numbers and multiples or fractions of
/// pi such as `pi/4`, `3pi/4`, `2*pi/3` or `π/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl FromStr for Angle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not an angle (use radians or forms like pi/4)");
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let text = text.to_lowercase().replace('π', "pi");
        let value = match text.find("pi") {
            None => text.parse::<f64>().map_err(|_| bad())?,
            Some(at) => {
                let factor = match text[..at].trim_end_matches('*') {
                    "" => 1.0,
                    "-" => -1.0,
                    f => f.parse::<f64>().map_err(|_| bad())?,
                };
                let divisor = match &text[at + 2..] {
                    "" => 1.0,
                    rest => rest
                        .strip_prefix('/')
                        .and_then(|d| d.parse::<f64>().ok())
                        .ok_or_else(bad)?,
                };
                factor * PI / divisor
            }
        };
        if value.is_finite() {
            Ok(Angle(value))
        } else {
            Err(bad())
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct AngleVisitor;
        impl Visitor<'_> for AngleVisitor {
            type Value = Angle;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number of radians or a string such as \"pi/4\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Angle, E> {
                Ok(Angle(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Angle, E> {
                Ok(Angle(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Angle, E> {
                Ok(Angle(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Angle, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(AngleVisitor)
    }
}

/// Reads a config file into a flat key/value map. JSON files are taken to
/// be manifests from an earlier run: their `params` plus `seed` are used,
/// and their `command` must match. Anything else is parsed as TOML.
pub fn load_config(path: &Path, command: &str) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::field("config", format!("cannot read {}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let manifest: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::field("config", format!("{}: {e}", path.display())))?;
        if let Some(cmd) = manifest.get("command").and_then(Value::as_str) {
            if cmd != command {
                return Err(CliError::field(
                    "config",
                    format!("manifest is for `{cmd}`, not `{command}`"),
                ));
            }
        }
        let mut params = match manifest.get("params") {
            Some(Value::Object(m)) => m.clone(),
            _ => return Err(CliError::field("config", "manifest has no `params` object")),
        };
        if let Some(seed) = manifest.get("seed") {
            params.insert("seed".into(), seed.clone());
        }
        Ok(params)
    } else {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::field("config", format!("{}: {e}", path.display())))?;
        match serde_json::to_value(table)? {
            Value::Object(m) => Ok(m),
            _ => unreachable!("a TOML table converts to an object"),
        }
    }
}

/// Layers explicit flags over the config file. Flags that were not given
/// serialize as `null` and leave the file's value in place. Unknown keys
/// and mistyped values are reported as configuration errors.
pub fn layer<O: Serialize + DeserializeOwned>(
    flags: &O,
    file: Option<Map<String, Value>>,
) -> Result<O, CliError> {
    let mut merged = file.unwrap_or_default();
    if let Value::Object(given) = serde_json::to_value(flags)? {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}
