//! Flat keyed text configuration: `section.key = value` lines, `#` comments.
//!
//! The format is deliberately trivial to diff and to generate. Lists use
//! `;` separators. Typed getters report the offending key on error so the
//! CLI can surface actionable messages.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing config key `{0}`")]
    MissingKey(String),
    #[error("config key `{key}`: {msg}")]
    Parse { key: String, msg: String },
    #[error("malformed config line {line}: `{text}`")]
    Malformed { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsed key/value configuration with deterministic iteration order.
#[derive(Debug, Clone, Default)]
pub struct KeyedConfig {
    entries: BTreeMap<String, String>,
    /// Raw text, kept so artifacts can embed a hash of the exact input.
    raw: String,
}

impl KeyedConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let body = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            };
            let body = body.trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Malformed {
                line: i + 1,
                text: line.to_string(),
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries, raw: text.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn raw_text(&self) -> &str {
        &self.raw
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Keys beginning with `prefix`, in sorted order.
    pub fn keys_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> {
        self.entries.keys().filter(move |k| k.starts_with(prefix)).map(|k| k.as_str())
    }

    pub fn get_str(&self, key: &str) -> Result<&str, ConfigError> {
        self.entries
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    pub fn get_str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.entries.get(key).map(|s| s.as_str()).unwrap_or(default)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        parse_num(key, self.get_str(key)?)
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.entries.get(key) {
            Some(v) => parse_num(key, v),
            None => Ok(default),
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, ConfigError> {
        parse_num(key, self.get_str(key)?)
    }

    pub fn get_usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.entries.get(key) {
            Some(v) => parse_num(key, v),
            None => Ok(default),
        }
    }

    pub fn get_u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.entries.get(key) {
            Some(v) => parse_num(key, v),
            None => Ok(default),
        }
    }

    /// Semicolon-separated list of floats.
    pub fn get_list_f64(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get_str(key)?.split(';').map(|s| parse_num(key, s.trim())).collect()
    }

    /// Semicolon-separated list of unsigned integers.
    pub fn get_list_usize(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.get_str(key)?.split(';').map(|s| parse_num(key, s.trim())).collect()
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| ConfigError::Parse { key: key.to_string(), msg: format!("{e} (value `{s}`)") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_lists_and_comments() {
        let cfg = KeyedConfig::parse(
            "# device\n\
             device.cores = 4\n\
             device.cluster.0.freqs_ghz = 0.6; 1.0 ;1.4  # three steps\n\
             env.noise = 0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.get_usize("device.cores").unwrap(), 4);
        assert_eq!(cfg.get_list_f64("device.cluster.0.freqs_ghz").unwrap(), vec![0.6, 1.0, 1.4]);
        assert_eq!(cfg.get_f64_or("env.noise", 0.0).unwrap(), 0.05);
        assert_eq!(cfg.get_f64_or("env.absent", 1.5).unwrap(), 1.5);
    }

    #[test]
    fn missing_key_names_the_key() {
        let cfg = KeyedConfig::parse("a.b = 1\n").unwrap();
        let err = cfg.get_str("data.telemetry").unwrap_err();
        assert!(err.to_string().contains("data.telemetry"));
    }

    #[test]
    fn malformed_line_is_rejected() {
        assert!(KeyedConfig::parse("just words\n").is_err());
    }
}
