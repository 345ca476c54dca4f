//! Batch case lists: one case per line, whitespace-separated fields, `#`
//! comments. Relative paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub id: String,
    pub paths: Vec<PathBuf>,
}

pub fn parse(text: &str, base: &Path, min_paths: usize, max_paths: usize) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let n = fields.len() - 1;
        if n < min_paths || n > max_paths {
            bail!(
                "manifest line {}: expected a case id and {} path(s), found {} field(s)",
                i + 1,
                if min_paths == max_paths { min_paths.to_string() } else { format!("{min_paths}-{max_paths}") },
                fields.len()
            );
        }
        let id = fields[0];
        if id.contains(['/', '\\']) || id == "." || id == ".." {
            bail!("manifest line {}: case id {id:?} cannot be used as a directory name", i + 1);
        }
        if !ids.insert(id.to_string()) {
            bail!("manifest line {}: duplicate case id {id:?}", i + 1);
        }
        cases.push(Case {
            id: id.to_string(),
            paths: fields[1..].iter().map(|p| base.join(p)).collect(),
        });
    }
    if cases.is_empty() {
        bail!("manifest lists no cases");
    }
    Ok(cases)
}

pub fn read(path: &Path, min_paths: usize, max_paths: usize) -> Result<Vec<Case>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse(&text, base, min_paths, max_paths)
}
