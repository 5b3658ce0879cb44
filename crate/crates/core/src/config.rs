//! Flat `key = value` configuration files.
//!
//! Grammar: one pair per line, `#` starts a comment, blank lines are ignored,
//! keys are `[A-Za-z0-9_]+`, values run to the end of the line with
//! surrounding whitespace trimmed. Duplicate keys are an error.

use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot use `{value}`: {reason}")]
    Invalid { key: String, value: String, reason: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<KeyValues, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: "expected `key = value`".into() })?;
            let k = k.trim();
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Syntax { line: i + 1, msg: format!("bad key `{k}`") });
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate(k.to_string()));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::Unknown(k.clone())),
            None => Ok(()),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::Invalid {
                key: key.to_string(),
                value: v.clone(),
                reason: e.to_string(),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// Comma-separated list of numbers.
    pub fn list_f64(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.entries.get(key) else { return Ok(None) };
        v.split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| ConfigError::Invalid {
                    key: key.to_string(),
                    value: v.clone(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn invalid(key: &str, value: impl ToString, reason: impl ToString) -> ConfigError {
        ConfigError::Invalid { key: key.to_string(), value: value.to_string(), reason: reason.to_string() }
    }

    /// Canonical text form, sorted by key.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let kv = KeyValues::parse("# header\nkind = cosine\n\ngamma=0.75   # trailing\nks = 0.3, 0.5\n").unwrap();
        assert_eq!(kv.raw("kind"), Some("cosine"));
        assert_eq!(kv.get::<f64>("gamma").unwrap(), Some(0.75));
        assert_eq!(kv.list_f64("ks").unwrap(), Some(vec![0.3, 0.5]));
        assert_eq!(kv.get::<f64>("nope").unwrap(), None);
        assert!(kv.reject_unknown(&["kind", "gamma", "ks"]).is_ok());
        assert_eq!(kv.reject_unknown(&["kind"]), Err(ConfigError::Unknown("gamma".into())));
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(KeyValues::parse("just words"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(KeyValues::parse("a = 1\na = 2"), Err(ConfigError::Duplicate(_))));
        assert!(matches!(KeyValues::parse("a b = 1"), Err(ConfigError::Syntax { .. })));
        let kv = KeyValues::parse("T = sixty").unwrap();
        assert!(matches!(kv.get::<f64>("T"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(kv.require::<f64>("M"), Err(ConfigError::Missing(_))));
    }

    #[test]
    fn text_round_trip() {
        let kv = KeyValues::parse("b = 2\na = x y\n").unwrap();
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
    }
}
