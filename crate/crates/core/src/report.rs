//! Plain `key=value` reports.
//!
//! One entry per line, keys in insertion order. Floats use the shortest
//! representation that round-trips, so identical inputs produce identical
//! bytes.

use std::fmt::{self, Display};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Append every entry of `other` under `prefix.`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &Report) -> &mut Self {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}.{k}"), v.clone()));
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Parse text produced by [`Display`]; lines without `=` are skipped.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Report { entries }
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Format a list of numbers as `a;b;c`.
pub fn join<T: Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}
