//! Flat `key=value` parameter files and their merge with command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

/// Keys accepted in a parameter file. Aliases map onto the first spelling.
const KEYS: &[(&str, &[&str])] = &[
    ("mu", &[]),
    ("tau", &[]),
    ("sigma", &[]),
    ("c", &[]),
    ("y0", &[]),
    ("S", &["threshold"]),
    ("dt", &[]),
    ("n_paths", &["paths"]),
    ("t_max", &["tmax"]),
    ("seed", &[]),
    ("estimator", &[]),
    ("bandwidth", &[]),
    ("workers", &[]),
    ("order", &[]),
    ("grid_min", &[]),
    ("grid_max", &[]),
    ("grid_points", &[]),
];

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .find(|(k, aliases)| *k == key || aliases.contains(&key))
        .map(|(k, _)| *k)
}

/// Raw string settings, file first, flags layered on top.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{origin}:{}: expected key=value, got '{line}'",
                    i + 1
                )));
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(key) = canonical(k) else {
                return Err(CliError::Usage(format!("{origin}:{}: unknown key '{k}'", i + 1)));
            };
            values.insert(key, v.to_string());
        }
        Ok(Settings { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Settings::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Settings::parse(&text, &p.display().to_string())
            }
        }
    }

    /// Overrides `key` when the flag was given.
    pub fn set<T: ToString>(&mut self, key: &'static str, value: Option<T>) {
        if let Some(v) = value {
            self.values.insert(key, v.to_string());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("invalid value for {key}: '{v}'"))),
        }
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.get(key)?.ok_or_else(|| {
            let flag = match key {
                "S" => "threshold".to_string(),
                other => other.replace('_', "-"),
            };
            CliError::Usage(format!("missing parameter '{key}' (use --{flag} or a params file)"))
        })
    }
}
