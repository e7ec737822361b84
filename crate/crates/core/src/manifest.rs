use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Provenance header embedded verbatim into every output document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub overrides: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub format_version: u32,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            format_version: 1,
            ..Default::default()
        }
    }

    pub fn input(mut self, name: &str, path: impl Into<String>) -> Self {
        self.inputs.insert(name.to_string(), path.into());
        self
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.overrides.insert(key.to_string(), value.to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}
