use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use syntagraph::{Error, RunManifest};

/// Flat `key = value` settings read from a config file. Command-line flags
/// take precedence over anything set here.
#[derive(Debug, Default)]
pub struct Settings {
    table: toml::Table,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(Settings { table })
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.table.get(key).map(|v| match v {
            toml::Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }

    /// Flag value if given, else the config value, else `default`. The
    /// effective value is recorded in the manifest.
    pub fn resolve<T>(
        &self,
        manifest: &mut RunManifest,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T>
    where
        T: FromStr + ToString,
        T::Err: std::fmt::Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.raw(key) {
                Some(s) => match s.parse() {
                    Ok(v) => v,
                    Err(e) => bail!(Error::Parse(format!("config key '{key}' = {s}: {e}"))),
                },
                None => default,
            },
        };
        manifest.overrides.insert(key.to_string(), value.to_string());
        Ok(value)
    }
}
