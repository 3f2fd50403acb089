//! Plain-text `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Trailing `#`
//! comments are stripped. Keys are case-sensitive.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", idx + 1)));
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                idx + 1
            )));
        }
        entries.push(Entry {
            line: idx + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

pub fn read(path: &Path) -> Result<Vec<Entry>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

impl Entry {
    pub fn parse_value<T: std::str::FromStr>(&self) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value.parse().map_err(|e| {
            Error::Config(format!(
                "line {}: invalid value for `{}`: {e}",
                self.line, self.key
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let e = parse("# header\n a = 1 \n\nb= x y # trailing\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].key, "a");
        assert_eq!(e[1].value, "x y");
        assert_eq!(e[1].line, 4);
        assert_eq!(e[0].parse_value::<u32>().unwrap(), 1);
    }

    #[test]
    fn rejects_malformed_and_duplicates() {
        assert!(parse("novalue\n").is_err());
        assert!(parse("a = 1\na = 2\n").is_err());
        assert!(parse(" = 2\n").is_err());
    }
}
