//! Flat `key = value` config files and flag resolution.
//!
//! A key names a long flag without its dashes (`riesz-objective = paired-lsif`).
//! Resolution order is command line, then file, then built-in default. Every
//! resolved value is recorded so it can be written next to the results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Parses a flat config file. Blank lines and lines starting with `#` or `;`
/// are skipped; section headers are rejected.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') {
            return Err(CliError::Usage(format!("config line {}: sections are not supported", i + 1)));
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected `key = value`", i + 1)));
        };
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        let value = v.trim().trim_matches('"').to_string();
        if out.insert(key.clone(), value).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Resolves flags against a config file and keeps the resolved values.
#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Resolver { file, ..Default::default() }
    }

    fn raw(&mut self, key: &str, cli: Option<String>) -> Option<String> {
        if self.file.contains_key(key) {
            self.used.insert(key.to_string());
        }
        cli.or_else(|| self.file.get(key).cloned())
    }

    fn parse<T>(key: &str, text: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        text.parse().map_err(|e| CliError::Usage(format!("--{key}: cannot parse `{text}`: {e}")))
    }

    /// Optional value with no default.
    pub fn opt<T>(&mut self, key: &str, cli: Option<String>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.raw(key, cli) {
            None => Ok(None),
            Some(text) => {
                let v: T = Self::parse(key, &text)?;
                self.resolved.insert(key.to_string(), v.to_string());
                Ok(Some(v))
            }
        }
    }

    pub fn get<T>(&mut self, key: &str, cli: Option<String>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.opt(key, cli)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, cli: Option<String>) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.opt(key, cli)?.ok_or_else(|| CliError::Usage(format!("--{key} is required")))
    }

    /// A switch: set on the command line, or `true`/`false` in the file.
    pub fn flag(&mut self, key: &str, cli: bool) -> Result<bool, CliError> {
        let v = if cli { true } else { self.opt::<bool>(key, None)?.unwrap_or(false) };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Comma-separated list.
    pub fn list<T>(&mut self, key: &str, cli: Option<String>, default: &str) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let text = self.raw(key, cli).unwrap_or_else(|| default.to_string());
        let items = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Self::parse(key, s))
            .collect::<Result<Vec<T>, _>>()?;
        if items.is_empty() {
            return Err(CliError::Usage(format!("--{key}: empty list")));
        }
        self.resolved.insert(key.to_string(), text);
        Ok(items)
    }

    /// Records a derived value that did not come from a flag.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// File keys that no flag of the current command consumed.
    pub fn unused_keys(&self) -> Vec<&str> {
        self.file.keys().filter(|k| !self.used.contains(*k)).map(String::as_str).collect()
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}
