//! Flat `key = value` configuration files; `#` starts a comment.

use crate::error::{Error, Result};

/// Ordered `(line, key, value)` entries.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: i + 1,
            reason: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config {
                line: i + 1,
                reason: "empty key".into(),
            });
        }
        pairs.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

pub(crate) fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        reason: format!("invalid value `{value}` for `{key}`"),
    })
}
