//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! [scenario]
//! n_nodes = 100
//! noise_db = -120
//! threshold_db = -20
//!
//! [figure5]
//! interference_pcts = 10,20,30
//! policies = M1,M4,EPA
//! ```
//!
//! Scenario keys may appear in `[scenario]` and be overridden in any
//! subcommand section. Physical quantities carry a `_db` or `_linear`
//! suffix; anything unrecognised is rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key '{key}' in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key '{key}' in [{section}]")]
    DuplicateKey { section: String, key: String },
    #[error("key '{key}': {msg}")]
    BadValue { key: String, msg: String },
    #[error("keys '{0}' and '{1}' are mutually exclusive")]
    Conflict(String, String),
    #[error("cannot read config {path}: {msg}")]
    Io { path: String, msg: String },
}

pub const SECTIONS: [&str; 6] = ["scenario", "solve", "figure3", "figure4", "figure5", "figure6"];

/// Keys that describe the scenario; valid in every section.
pub const SCENARIO_KEYS: [&str; 21] = [
    "n_nodes",
    "rayleigh_sigma_linear",
    "noise_db",
    "noise_linear",
    "threshold_db",
    "threshold_linear",
    "interference_pct",
    "grid_levels",
    "p_max_linear",
    "trials",
    "seed",
    "workers",
    "max_stages",
    "nash_max_rounds",
    "moment_order",
    "truncation",
    "seed_action",
    "exchange",
    "epa_level_linear",
    "sncpc_max_iter",
    "desired_gain_linear",
];

fn section_keys(section: &str) -> &'static [&'static str] {
    match section {
        "solve" => &["gains_linear", "thresholds_db", "thresholds_linear", "output"],
        "figure3" | "figure4" => &["gains_linear", "thresholds_db", "output"],
        "figure5" | "figure6" => &["interference_pcts", "policies", "output"],
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = match raw.find(['#', ';']) {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax {
                        line: line_no,
                        msg: "unterminated section header".into(),
                    })?
                    .trim()
                    .to_ascii_lowercase();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(ConfigError::UnknownSection(name));
                }
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                msg: format!("expected key = value, got '{line}'"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            let section = current.clone().ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                msg: format!("key '{key}' outside any section"),
            })?;
            let allowed = SCENARIO_KEYS.contains(&key.as_str()) || section_keys(&section).contains(&key.as_str());
            if !allowed {
                return Err(ConfigError::UnknownKey { section, key });
            }
            let entries = sections.entry(section.clone()).or_default();
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::DuplicateKey { section, key });
            }
        }
        let cfg = Self { sections };
        for entries in cfg.sections.values() {
            for (a, b) in [
                ("noise_db", "noise_linear"),
                ("threshold_db", "threshold_linear"),
                ("thresholds_db", "thresholds_linear"),
            ] {
                if entries.contains_key(a) && entries.contains_key(b) {
                    return Err(ConfigError::Conflict(a.into(), b.into()));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Effective key/value map for `section`: `[scenario]` overlaid with the
    /// section's own entries.
    pub fn resolved(&self, section: &str) -> Settings {
        let mut map = self.sections.get("scenario").cloned().unwrap_or_default();
        if section != "scenario" {
            if let Some(own) = self.sections.get(section) {
                for (k, v) in own {
                    // a section-level dB/linear twin replaces the inherited one
                    for (a, b) in [("noise_db", "noise_linear"), ("threshold_db", "threshold_linear")] {
                        if k == a {
                            map.remove(b);
                        } else if k == b {
                            map.remove(a);
                        }
                    }
                    map.insert(k.clone(), v.clone());
                }
            }
        }
        Settings { map }
    }
}

/// Resolved settings for one subcommand.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn remove(&mut self, key: &str) {
        self.map.remove(key);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::BadValue {
                    key: key.to_string(),
                    msg: format!("'{v}': {e}"),
                })
            })
            .transpose()
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                msg: format!("'{s}': {e}"),
            })
        })
        .collect()
}
