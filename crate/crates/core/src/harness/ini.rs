//! Minimal INI reader: `[section]` headers, `key = value` lines, `#` or `;`
//! comments. Keys are unique within a section and sections appear once.

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

pub(crate) fn parse(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        let syntax = |reason: String| ConfigError::Syntax { line, reason };
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax("unterminated section header".into()))?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(syntax(format!("bad section name `{name}`")));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(syntax(format!("section [{name}] appears twice")));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `key = value`, found `{body}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(syntax("empty key".into()));
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| syntax(format!("`{key}` appears before any section header")))?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(syntax(format!("`{key}` set twice in [{}]", section.name)));
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(sections)
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_keys_and_comments() {
        let s = parse("# head\n[noc]\nrows = 4 ; trailing\n\n[run]\nseed=7\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name, "noc");
        assert_eq!(s[0].entries[0], Entry { key: "rows".into(), value: "4".into(), line: 3 });
        assert_eq!(s[1].entries[0].value, "7");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line = |text: &str| match parse(text).unwrap_err() {
            ConfigError::Syntax { line, .. } => line,
            e => panic!("{e}"),
        };
        assert_eq!(line("rows = 4\n"), 1);
        assert_eq!(line("[noc]\n\nrows 4\n"), 3);
        assert_eq!(line("[noc]\nrows = 1\nrows = 2\n"), 3);
        assert_eq!(line("[noc]\n[noc]\n"), 2);
        assert_eq!(line("[noc\n"), 1);
    }
}
