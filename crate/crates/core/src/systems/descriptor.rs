//! Plain-text system descriptors: `system=<name>` followed by one
//! `key=value` parameter per line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{build_builtin, System};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

impl SystemSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn build(&self) -> Result<System> {
        build_builtin(&self.name, &self.params)
    }

    /// Parse a `key=value` parameter.
    pub fn push_param(&mut self, kv: &str) -> Result<()> {
        let (k, v) = split_kv(kv).ok_or_else(|| Error::config("param", format!("expected key=value, got `{kv}`")))?;
        let value: f64 = v
            .parse()
            .map_err(|_| Error::config(k, format!("`{v}` is not a number")))?;
        self.params.insert(k.to_string(), value);
        Ok(())
    }
}

pub(crate) fn split_kv(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        None
    } else {
        Some((k, v))
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system={}", self.name)?;
        for (k, v) in &self.params {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for SystemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut name = None;
        let mut spec = SystemSpec::new("");
        for raw in s.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_kv(line).ok_or_else(|| Error::config("descriptor", format!("bad line `{line}`")))?;
            if k == "system" {
                name = Some(v.to_string());
            } else {
                spec.push_param(line)?;
            }
        }
        spec.name = name.ok_or_else(|| Error::config("system", "missing `system=` line"))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let spec: SystemSpec = "system=gauss\nr=2\n".parse().unwrap();
        assert_eq!(spec, SystemSpec::new("gauss").with("r", 2.0));
        let again: SystemSpec = spec.to_string().parse().unwrap();
        assert_eq!(spec, again);
        assert!(spec.build().is_ok());
    }

    #[test]
    fn errors_name_the_field() {
        let e = "r=2".parse::<SystemSpec>().unwrap_err();
        assert!(e.to_string().contains("`system`"));
        let e = "system=lueroth\nr=two".parse::<SystemSpec>().unwrap_err();
        assert!(e.to_string().contains("`r`"));
    }
}
