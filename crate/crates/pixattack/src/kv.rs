//! Flat `key = value` text: one pair per line, `#` starts a comment,
//! blank lines are ignored, keys may not repeat.

use std::collections::BTreeMap;

use crate::FormatError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvFile {
    entries: BTreeMap<String, Entry>,
}

impl KvFile {
    /// Parses the given lines; `first_line` is the 1-based number of the
    /// first one, for error messages.
    pub fn parse<'a>(lines: impl IntoIterator<Item = &'a str>, first_line: usize) -> Result<Self, FormatError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in lines.into_iter().enumerate() {
            let line = first_line + k;
            let text = raw.split('#').next().unwrap_or_default().trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text.split_once('=').ok_or_else(|| FormatError::KeyValue {
                line,
                message: format!("expected `key = value`, found {text:?}"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(FormatError::KeyValue {
                    line,
                    message: "empty key".into(),
                });
            }
            let entry = Entry {
                line,
                value: value.trim().to_string(),
            };
            if entries.insert(key.clone(), entry).is_some() {
                return Err(FormatError::KeyValue {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KvFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    /// Removes and parses `key`.
    pub fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, FormatError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| FormatError::KeyValue {
                line: e.line,
                message: format!("cannot parse `{key}` value {:?}", e.value),
            }),
        }
    }

    pub fn require<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, FormatError> {
        self.take_parsed(key)?.ok_or_else(|| FormatError::KeyValue {
            line: 0,
            message: format!("missing key `{key}`"),
        })
    }

    /// Errors on any key nobody consumed.
    pub fn finish(self) -> Result<(), FormatError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, e)) => Err(FormatError::KeyValue {
                line: e.line,
                message: format!("unknown key `{key}`"),
            }),
        }
    }
}

pub fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}
