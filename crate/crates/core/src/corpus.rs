//! Bug bundles: one buggy project version with its changed files and the
//! buggy line labels, plus the subject/training line views used downstream.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexing;
use crate::lines;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub content: String,
    /// `(byte offset, length)` per 1-based line, terminators excluded.
    pub line_index: Vec<(usize, usize)>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        let line_index = lines::line_index(&content);
        SourceFile {
            path: path.into(),
            content,
            line_index,
        }
    }

    pub fn line_count(&self) -> usize {
        self.line_index.len()
    }

    /// Text of a 1-based line.
    pub fn line(&self, line_no: usize) -> Option<&str> {
        let (off, len) = *self.line_index.get(line_no.checked_sub(1)?)?;
        Some(&self.content[off..off + len])
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.line_index
            .iter()
            .map(|&(off, len)| &self.content[off..off + len])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Label {
    Buggy,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineRecord {
    pub file: String,
    pub line_no: usize,
    pub text: String,
    pub label: Label,
    pub is_business_logic: bool,
    /// Grammar-token count, the line complexity measure.
    pub token_count: usize,
}

impl LineRecord {
    pub fn is_buggy(&self) -> bool {
        self.label == Label::Buggy
    }
}

/// Checks that `path` is relative, `/`-separated and stays below the root.
pub fn validate_rel_path(path: &str) -> Result<()> {
    let bad = path.is_empty()
        || path.starts_with('/')
        || path.contains('\\')
        || path.contains(':')
        || path.split('/').any(|c| c.is_empty() || c == "." || c == "..");
    if bad {
        return Err(Error::InvalidBundle(format!(
            "path escapes bundle root or is malformed: {path:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BugBundle {
    pub bundle_id: String,
    pub project_id: String,
    /// Sorted by path.
    files: Vec<SourceFile>,
    changed_files: BTreeSet<String>,
    buggy_lines: BTreeMap<String, BTreeSet<usize>>,
}

impl BugBundle {
    /// Builds and validates a bundle.
    pub fn new(
        bundle_id: impl Into<String>,
        project_id: impl Into<String>,
        mut files: Vec<SourceFile>,
        changed_files: BTreeSet<String>,
        buggy_lines: BTreeMap<String, BTreeSet<usize>>,
    ) -> Result<Self> {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        for pair in files.windows(2) {
            if pair[0].path == pair[1].path {
                return Err(Error::InvalidBundle(format!(
                    "duplicate file {}",
                    pair[0].path
                )));
            }
        }
        for f in &files {
            validate_rel_path(&f.path)?;
        }
        let find = |p: &str| files.binary_search_by(|f| f.path.as_str().cmp(p)).ok();
        if changed_files.is_empty() {
            return Err(Error::NoSubjectLines);
        }
        for p in &changed_files {
            if find(p).is_none() {
                return Err(Error::InvalidBundle(format!(
                    "changed file not found in bundle: {p}"
                )));
            }
        }
        for (p, set) in &buggy_lines {
            let idx = find(p).ok_or_else(|| {
                Error::InvalidBundle(format!("buggy-line file not found in bundle: {p}"))
            })?;
            if !changed_files.contains(p) {
                return Err(Error::InvalidBundle(format!(
                    "buggy lines listed for unchanged file: {p}"
                )));
            }
            let count = files[idx].line_count();
            if let Some(&bad) = set.iter().find(|&&l| l == 0 || l > count) {
                return Err(Error::InvalidBundle(format!(
                    "line out of range: {p}:{bad} (file has {count} lines)"
                )));
            }
        }
        Ok(BugBundle {
            bundle_id: bundle_id.into(),
            project_id: project_id.into(),
            files,
            changed_files,
            buggy_lines,
        })
    }

    pub fn files(&self) -> &[SourceFile] {
        &self.files
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files
            .binary_search_by(|f| f.path.as_str().cmp(path))
            .ok()
            .map(|i| &self.files[i])
    }

    pub fn changed_files(&self) -> &BTreeSet<String> {
        &self.changed_files
    }

    pub fn buggy_lines(&self) -> &BTreeMap<String, BTreeSet<usize>> {
        &self.buggy_lines
    }

    pub fn is_buggy(&self, path: &str, line_no: usize) -> bool {
        self.buggy_lines
            .get(path)
            .is_some_and(|s| s.contains(&line_no))
    }

    pub fn buggy_count(&self) -> usize {
        self.buggy_lines.values().map(BTreeSet::len).sum()
    }

    /// True when every file changed, so no n-gram model can be trained.
    pub fn no_train(&self) -> bool {
        self.files.len() == self.changed_files.len()
    }

    /// Changed files, sorted by path.
    pub fn subject_files(&self) -> impl Iterator<Item = &SourceFile> {
        self.files
            .iter()
            .filter(|f| self.changed_files.contains(&f.path))
    }

    /// Unchanged files, sorted by path.
    pub fn training_files(&self) -> impl Iterator<Item = &SourceFile> {
        self.files
            .iter()
            .filter(|f| !self.changed_files.contains(&f.path))
    }

    /// Every line of every changed file, labeled, in `(path, line_no)` order.
    /// With `business_only`, non-business-logic lines are dropped.
    pub fn subject_lines(&self, business_only: bool) -> Vec<LineRecord> {
        let mut out = Vec::new();
        for file in self.subject_files() {
            let seq = lexing::lex_grammar_lenient(&file.content);
            let classes = lexing::classify_lines(&seq, &file.content);
            let by_line = seq.significant_by_line(file.line_count());
            for (i, text) in file.lines().enumerate() {
                let line_no = i + 1;
                let is_business_logic = classes.is_business(line_no);
                if business_only && !is_business_logic {
                    continue;
                }
                out.push(LineRecord {
                    file: file.path.clone(),
                    line_no,
                    text: text.to_string(),
                    label: if self.is_buggy(&file.path, line_no) {
                        Label::Buggy
                    } else {
                        Label::Neutral
                    },
                    is_business_logic,
                    token_count: by_line[i].len(),
                });
            }
        }
        out
    }

    /// All lines of all unchanged files, verbatim (empty lines included).
    pub fn training_lines(&self) -> Result<Vec<String>> {
        if self.no_train() {
            return Err(Error::NoTrainingData(self.bundle_id.clone()));
        }
        Ok(self
            .training_files()
            .flat_map(|f| f.lines().map(ToString::to_string))
            .collect())
    }
}
