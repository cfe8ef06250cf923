//! Flat `key = value` settings. Later sources win: built-in defaults, the
//! config file, `FACTA_*` environment variables, then command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "FACTA_";

/// Every recognised key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("jobs", "1"),
    ("epochs", "10"),
    ("models", "models"),
    ("kb", "kb.jsonl"),
    ("max_entities", "20"),
    ("edge_cap", "200"),
    ("bind", "127.0.0.1:8080"),
    ("cors", ""),
    ("mlp_epochs", "200"),
    ("mlp_hidden", "100"),
    ("gnn_epochs", "10"),
    ("gnn_hidden", "64"),
    ("gnn_lr", "0.01"),
    ("nodes_per_batch", "25000"),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn defaults() -> Self {
        Settings {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Defaults, overlaid by `file` when given, then by `FACTA_*` entries of
    /// `env`.
    pub fn load(file: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, CliError> {
        let mut s = Self::defaults();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
            s.apply_text(&text, &path.display().to_string())?;
        }
        for (k, v) in env {
            let Some(key) = k.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if key == "config" {
                continue;
            }
            s.set(&key, &v).map_err(|e| CliError::usage(format!("{k}: {e}")))?;
        }
        Ok(s)
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::usage(format!("{origin}:{}: expected key = value", i + 1)));
            };
            self.set(k.trim(), v.trim())
                .map_err(|e| CliError::usage(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(format!("unknown setting `{key}`")),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| CliError::usage(format!("setting `{key}`: cannot parse `{raw}`")))
    }

    /// The flag when given, else the setting.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => self.get(key),
        }
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}
