//! Minimal `key = value` configuration format with `[section]` headers.
//!
//! Grammar: blank lines and lines starting with `#` are ignored; a line of
//! the form `[name]` opens a section; any other line must be `key = value`.
//! Keys are unique within a section (later duplicates are an error, keeping
//! config digests unambiguous).

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingKey {
            section: self.name.clone(),
            key: key.to_string(),
        })
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| ConfigError::BadValue {
            section: self.name.clone(),
            key: key.to_string(),
            value: raw.to_string(),
        })
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| ConfigError::BadValue {
                section: self.name.clone(),
                key: key.to_string(),
                value: raw.to_string(),
            }),
        }
    }

    /// Comma-separated list of values.
    pub fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| ConfigError::BadValue {
                    section: self.name.clone(),
                    key: key.to_string(),
                    value: s.to_string(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, text: String },
    DuplicateKey { line: usize, key: String },
    MissingSection(String),
    MissingKey { section: String, key: String },
    BadValue { section: String, key: String, value: String },
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected `key = value` or `[section]`, got `{text}`"),
            ConfigError::DuplicateKey { line, key } => write!(f, "line {line}: duplicate key `{key}`"),
            ConfigError::MissingSection(s) => write!(f, "missing required section [{s}]"),
            ConfigError::MissingKey { section, key } => write!(f, "section [{section}]: missing key `{key}`"),
            ConfigError::BadValue { section, key, value } => {
                write!(f, "section [{section}]: key `{key}` has unparsable value `{value}`")
            }
            ConfigError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parse the whole file into ordered sections. Entries before any header go
/// into an unnamed section `""`.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = vec![Section { name: String::new(), entries: Vec::new() }];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            let name = line[1..line.len() - 1].trim().to_string();
            sections.push(Section { name, entries: Vec::new() });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: lineno + 1, text: line.to_string() });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let current = sections.last_mut().expect("at least one section");
        if current.entries.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::DuplicateKey { line: lineno + 1, key });
        }
        current.entries.push((key, value));
    }
    if sections[0].entries.is_empty() {
        sections.remove(0);
    }
    Ok(sections)
}

/// Find a section by name.
pub fn find_section<'a>(sections: &'a [Section], name: &str) -> Result<&'a Section, ConfigError> {
    sections
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| ConfigError::MissingSection(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_entries() {
        let text = "# comment\n[alpha]\nx = 1\nlist = 1, 2,3\n\n[beta]\ny = hello\n";
        let sections = parse_sections(text).unwrap();
        assert_eq!(sections.len(), 2);
        let alpha = find_section(&sections, "alpha").unwrap();
        assert_eq!(alpha.parse::<i32>("x").unwrap(), 1);
        assert_eq!(alpha.parse_list::<i32>("list").unwrap(), vec![1, 2, 3]);
        assert_eq!(find_section(&sections, "beta").unwrap().get("y"), Some("hello"));
    }

    #[test]
    fn rejects_garbage_and_duplicates() {
        assert!(matches!(parse_sections("foo"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_sections("[s]\na = 1\na = 2"),
            Err(ConfigError::DuplicateKey { line: 3, .. })
        ));
    }
}
