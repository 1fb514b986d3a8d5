//! Dataset manifests: `relative-path<TAB>label<TAB>split` per line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!(
                "split must be `train` or `test`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub path: String,
    pub label: String,
    pub split: Split,
}

/// Parses manifest text. Blank lines and `#` comments are skipped; a
/// manifest with no records is an error.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRecord>> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |detail: String| Error::Manifest { line: i + 1, detail };
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(bad("empty path or label".into()));
        }
        records.push(ManifestRecord {
            path: fields[0].to_string(),
            label: fields[1].to_string(),
            split: fields[2].parse().map_err(|e: Error| bad(e.to_string()))?,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(records)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    parse_manifest(&std::fs::read_to_string(path)?)
}

pub fn format_manifest(records: &[ManifestRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{}\t{}\t{}\n", r.path, r.label, r.split))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        let text = "# comment\na/1.png\tcat\ttrain\n\nb/2.jpg\tdog\ttest\n";
        let recs = parse_manifest(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].split, Split::Test);
        assert_eq!(parse_manifest(&format_manifest(&recs)).unwrap(), recs);
    }

    #[test]
    fn empty_and_malformed() {
        assert!(matches!(parse_manifest("\n# only comments\n"), Err(Error::EmptyManifest)));
        assert!(matches!(
            parse_manifest("a.png\tcat\n"),
            Err(Error::Manifest { line: 1, .. })
        ));
        assert!(matches!(
            parse_manifest("a.png\tcat\ttrain\nb.png\tdog\tvalid\n"),
            Err(Error::Manifest { line: 2, .. })
        ));
    }
}
