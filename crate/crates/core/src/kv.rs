//! Flat `key = value` documents with `#` comments and dotted section keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits (round-trips exactly).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvDocument {
    entries: BTreeMap<String, (String, usize)>,
    order: Vec<String>,
}

impl KvDocument {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDocument::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("invalid key {key:?}"),
                });
            }
            if doc.entries.contains_key(key) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate key {key:?}"),
                });
            }
            doc.order.push(key.to_string());
            doc.entries
                .insert(key.to_string(), (value.trim().to_string(), line_no));
        }
        Ok(doc)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        if !self.entries.contains_key(&key) {
            self.order.push(key.clone());
        }
        self.entries.insert(key, (value.to_string(), 0));
    }

    pub fn set_f64(&mut self, key: impl Into<String>, value: f64) {
        self.set(key, fmt_f64(value));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|(_, l)| *l).unwrap_or(0)
    }

    /// Parses the value of `key`, or returns `None` if absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| Error::Parse {
                line: self.line_of(key),
                message: format!("cannot parse value {v:?} of key {key:?}"),
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing key {key:?}"),
        })
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in &self.order {
            let _ = writeln!(out, "{key} = {}", self.entries[key].0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut d = KvDocument::new();
        d.set("k", 2);
        d.set_f64("piece.1.entropy", 0.1 + 0.2);
        let back = KvDocument::parse(&d.render()).unwrap();
        assert_eq!(back.require::<usize>("k").unwrap(), 2);
        assert_eq!(back.require::<f64>("piece.1.entropy").unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn comments_and_errors() {
        let d = KvDocument::parse("# header\nfiber.b = 0.05 # inline\n\n").unwrap();
        assert_eq!(d.require::<f64>("fiber.b").unwrap(), 0.05);
        assert!(matches!(
            KvDocument::parse("a = 1\nnonsense\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(KvDocument::parse("a = 1\na = 2\n").is_err());
        let d = KvDocument::parse("a = x\n").unwrap();
        assert!(matches!(d.get::<f64>("a"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn seventeen_digits() {
        let s = fmt_f64(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }
}
