//! Plain-text `key = value` configuration with `[section]` headers.
//!
//! The same format is used for config files, for the resolved-config echo
//! at the top of every output file, and for coupling specifications.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Formats a double with 17 significant digits, enough for an exact round trip.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // keeps the sign of -0.0 out of reproducibility diffs
        return "0".to_string();
    }
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Section {
    pub name: String,
    entries: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Inserts or replaces `key`, keeping the original position on replace.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn set_f64(&mut self, key: impl Into<String>, value: f64) {
        self.set(key, fmt_f64(value));
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.trim().parse::<T>().map(Some).map_err(|_| {
                Error::Parse(format!("[{}] {key} = {raw:?} is not a valid value", self.name))
            }),
        }
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get_parsed(key)?
            .ok_or_else(|| Error::Parse(format!("[{}] missing key `{key}`", self.name)))
    }
}

/// An ordered list of sections.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigDoc {
    sections: Vec<Section>,
}

impl ConfigDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDoc::new();
        let mut current: Option<Section> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse(format!("line {}: unterminated section", lineno + 1)))?;
                if let Some(done) = current.take() {
                    doc.push(done);
                }
                current = Some(Section::new(name.trim()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let section = current.get_or_insert_with(|| Section::new(""));
            section.set(key.trim(), value.trim());
        }
        if let Some(done) = current.take() {
            doc.push(done);
        }
        Ok(doc)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            if !s.name.is_empty() {
                let _ = writeln!(out, "[{}]", s.name);
            }
            for (k, v) in &s.entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// Renders with every line prefixed by `prefix` (used for output headers).
    pub fn render_prefixed(&self, prefix: &str) -> String {
        self.render()
            .lines()
            .map(|l| format!("{prefix}{l}\n"))
            .collect()
    }

    /// Recovers a document from an output header produced by [`render_prefixed`].
    pub fn parse_prefixed(text: &str, prefix: &str) -> Result<Self> {
        let body: String = text
            .lines()
            .filter_map(|l| l.strip_prefix(prefix))
            .map(|l| format!("{l}\n"))
            .collect();
        Self::parse(&body)
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn section_mut(&mut self, name: &str) -> &mut Section {
        if let Some(i) = self.sections.iter().position(|s| s.name == name) {
            return &mut self.sections[i];
        }
        self.sections.push(Section::new(name));
        self.sections.last_mut().unwrap()
    }

    /// Adds a section, merging keys into an existing one of the same name.
    pub fn push(&mut self, section: Section) {
        match self.sections.iter().position(|s| s.name == section.name) {
            Some(i) => {
                for (k, v) in section.entries {
                    self.sections[i].set(k, v);
                }
            }
            None => self.sections.push(section),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let doc = ConfigDoc::parse(
            "# header\n[system]\nM = 8\neta=0.5\n\n[coupling]\nkind = delta_pair\n",
        )
        .unwrap();
        let sys = doc.section("system").unwrap();
        assert_eq!(sys.require::<usize>("M").unwrap(), 8);
        assert_eq!(sys.require::<f64>("eta").unwrap(), 0.5);
        assert_eq!(doc.section("coupling").unwrap().get("kind"), Some("delta_pair"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(ConfigDoc::parse("[oops\n").is_err());
        assert!(ConfigDoc::parse("[a]\nnovalue\n").is_err());
        let doc = ConfigDoc::parse("[a]\nx = abc\n").unwrap();
        assert!(doc.section("a").unwrap().require::<f64>("x").is_err());
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI, -2.5e-300, 1e300] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn prefixed_round_trip() {
        let mut doc = ConfigDoc::new();
        doc.section_mut("run").set("command", "exact-current");
        doc.section_mut("system").set_f64("eta", 0.3);
        let echoed = doc.render_prefixed("# ");
        let back = ConfigDoc::parse_prefixed(&format!("{echoed}x,y\n1,2\n"), "# ").unwrap();
        assert_eq!(back, doc);
    }
}
