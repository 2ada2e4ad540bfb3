//! `key = value` files shared by dataset schemas and experiment configs.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses one `key = value` pair per line. Blank lines and lines starting
/// with `#` are skipped. Keys are normalized to lowercase with `_` mapped
/// to `-`, so `w_start` and `w-start` name the same setting.
pub(crate) fn parse(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected `key = value`, found {line:?}"),
            });
        };
        entries.push(Entry {
            key: key.trim().to_ascii_lowercase().replace('_', "-"),
            value: value.trim().to_string(),
            line: idx + 1,
        });
    }
    Ok(entries)
}

pub(crate) fn read(path: &Path) -> Result<Vec<Entry>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_comments_and_normalizes_keys() {
        let text = "# comment\n\nW_Start = 0.9\n  pop=250  \n";
        let entries = parse(text, Path::new("x.cfg")).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].key, "w-start");
        assert_eq!(entries[0].value, "0.9");
        assert_eq!(entries[0].line, 3);
        assert_eq!(entries[1].key, "pop");
    }

    #[test]
    fn missing_equals_sign_reports_line() {
        let err = parse("pop = 3\nbogus\n", Path::new("x.cfg")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
