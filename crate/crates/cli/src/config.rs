//! Flat key=value configuration files. A command-line flag always wins over
//! the file; the file wins over the built-in default.
//!
//! Keys are the long flag names (`pairs-per-doc`, `min-count`). Lines are
//! `key = value`, `#` starts a comment, blank lines are skipped. Keys a
//! subcommand does not use are ignored, so one file can configure a whole
//! pipeline.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value, found {raw:?}", i + 1);
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                bail!("line {}: empty key", i + 1);
            }
            if values.insert(key.to_owned(), value.to_owned()).is_some() {
                bail!("line {}: duplicate key {key:?}", i + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => match v.parse() {
                Ok(parsed) => Ok(Some(parsed)),
                Err(e) => bail!("config key {key:?}: cannot parse {v:?}: {e}"),
            },
        }
    }

    /// Flag value if given, else the config value, else the default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Same precedence, but with no default.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Presence-style boolean flags can only be switched on at the command
    /// line, so a true flag wins and otherwise the config decides.
    pub fn resolve_switch(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.get(key)?.unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_spacing() {
        let cfg = ConfigMap::parse(
            "# pipeline defaults\nlambda = 4.5\n\nmin-count=10 # inline comment\nstrategy = random\n",
        )
        .unwrap();
        assert_eq!(cfg.raw("lambda"), Some("4.5"));
        assert_eq!(cfg.raw("min-count"), Some("10"));
        assert_eq!(cfg.raw("strategy"), Some("random"));
        assert_eq!(cfg.raw("missing"), None);
    }

    #[test]
    fn rejects_malformed_lines_and_duplicates() {
        assert!(ConfigMap::parse("novalue\n").is_err());
        assert!(ConfigMap::parse("= 3\n").is_err());
        assert!(ConfigMap::parse("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn flag_beats_config_beats_default() {
        let cfg = ConfigMap::parse("mu = 500\n").unwrap();
        assert_eq!(cfg.resolve(Some(10.0), "mu", 2000.0).unwrap(), 10.0);
        assert_eq!(cfg.resolve(None, "mu", 2000.0).unwrap(), 500.0);
        assert_eq!(cfg.resolve::<f64>(None, "lambda", 3.0).unwrap(), 3.0);
    }

    #[test]
    fn bad_config_values_name_the_key() {
        let cfg = ConfigMap::parse("mu = abc\n").unwrap();
        let err = cfg.resolve::<f64>(None, "mu", 2000.0).unwrap_err();
        assert!(err.to_string().contains("mu"));
    }

    #[test]
    fn switches_turn_on_from_either_source() {
        let cfg = ConfigMap::parse("mask-plans = true\n").unwrap();
        assert!(cfg.resolve_switch(false, "mask-plans").unwrap());
        assert!(cfg.resolve_switch(true, "missing").unwrap());
        assert!(!ConfigMap::default().resolve_switch(false, "mask-plans").unwrap());
    }
}
