//! Case-insensitive query parameters.

use std::str::FromStr;

use crate::error::ServiceError;

#[derive(Debug, Clone, Default)]
pub struct Params {
    pairs: Vec<(String, String)>,
}

impl Params {
    pub fn new<K: AsRef<str>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Params { pairs: pairs.into_iter().map(|(k, v)| (k.as_ref().to_ascii_lowercase(), v.into())).collect() }
    }

    /// First value for `name` or any of its aliases, names compared
    /// case-insensitively.
    pub fn get(&self, names: &[&str]) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| names.iter().any(|n| n.eq_ignore_ascii_case(k))).map(|(_, v)| v.as_str())
    }

    /// Value for `name`; errors name the first (canonical) entry.
    pub fn required(&self, names: &[&str]) -> Result<&str, ServiceError> {
        self.get(names).ok_or_else(|| ServiceError::missing(names[0]))
    }

    pub fn parse<T: FromStr>(&self, names: &[&str]) -> Result<T, ServiceError> {
        let raw = self.required(names)?;
        parse_value(names[0], raw)
    }

    pub fn parse_or<T: FromStr>(&self, names: &[&str], default: T) -> Result<T, ServiceError> {
        match self.get(names) {
            Some(raw) if !raw.trim().is_empty() => parse_value(names[0], raw),
            _ => Ok(default),
        }
    }
}

pub fn parse_value<T: FromStr>(name: &str, raw: &str) -> Result<T, ServiceError> {
    raw.trim().parse().map_err(|_| ServiceError::validation(name, format!("invalid value {raw:?} for {name}")))
}
