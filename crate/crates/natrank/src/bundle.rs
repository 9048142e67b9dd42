//! Bug bundles on disk: a `bundle.json` manifest next to a `src/` tree.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use natrank_core::corpus::{validate_rel_path, BugBundle, SourceFile};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

pub const MANIFEST: &str = "bundle.json";
pub const SOURCE_DIR: &str = "src";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("missing manifest {0}")]
    MissingManifest(PathBuf),
    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("path escapes bundle root: {0}")]
    PathEscape(String),
    #[error("file is not valid UTF-8: {0}")]
    NotUtf8(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bundle {root}: {source}")]
    Invalid {
        root: PathBuf,
        source: natrank_core::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub bundle_id: String,
    pub project_id: String,
    pub changed_files: Vec<String>,
    #[serde(default)]
    pub buggy_lines: BTreeMap<String, Vec<usize>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_path(p: &str) -> Result<(), BundleError> {
    validate_rel_path(p).map_err(|_| BundleError::PathEscape(p.to_string()))
}

/// Reads and validates the bundle rooted at `root`.
pub fn load_bundle(root: &Path) -> Result<BugBundle, BundleError> {
    let manifest_path = root.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(BundleError::MissingManifest(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| BundleError::Manifest {
        path: manifest_path.clone(),
        source,
    })?;
    for p in manifest.changed_files.iter().chain(manifest.buggy_lines.keys()) {
        check_path(p)?;
    }

    let src_root = root.join(SOURCE_DIR);
    let mut files = Vec::new();
    if src_root.is_dir() {
        for entry in WalkDir::new(&src_root).sort_by_file_name() {
            let entry = entry.map_err(|e| BundleError::Io {
                path: src_root.clone(),
                source: e.into(),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(&src_root)
                .expect("walkdir stays under its root");
            let rel_str = rel
                .components()
                .map(|c| c.as_os_str().to_str().ok_or_else(|| BundleError::NotUtf8(entry.path().to_path_buf())))
                .collect::<Result<Vec<_>, _>>()?
                .join("/");
            let bytes = fs::read(entry.path()).map_err(io_err(entry.path()))?;
            let content = String::from_utf8(bytes).map_err(|_| BundleError::NotUtf8(entry.path().to_path_buf()))?;
            files.push(SourceFile::new(rel_str, content));
        }
    }

    let changed: BTreeSet<String> = manifest.changed_files.iter().cloned().collect();
    let buggy: BTreeMap<String, BTreeSet<usize>> = manifest
        .buggy_lines
        .iter()
        .map(|(p, ls)| (p.clone(), ls.iter().copied().collect()))
        .collect();
    BugBundle::new(manifest.bundle_id, manifest.project_id, files, changed, buggy).map_err(|source| {
        BundleError::Invalid {
            root: root.to_path_buf(),
            source,
        }
    })
}

/// Writes `bundle` under `root` in the on-disk layout.
pub fn write_bundle(root: &Path, bundle: &BugBundle) -> std::io::Result<()> {
    let manifest = Manifest {
        bundle_id: bundle.bundle_id.clone(),
        project_id: bundle.project_id.clone(),
        changed_files: bundle.changed_files().iter().cloned().collect(),
        buggy_lines: bundle
            .buggy_lines()
            .iter()
            .map(|(p, ls)| (p.clone(), ls.iter().copied().collect()))
            .collect(),
    };
    fs::create_dir_all(root)?;
    fs::write(
        root.join(MANIFEST),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    for f in bundle.files() {
        let path = root.join(SOURCE_DIR).join(&f.path);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, &f.content)?;
    }
    Ok(())
}

/// Bundle roots named by `dir`: `dir` itself when it holds a manifest,
/// otherwise every immediate subdirectory that does, sorted by name.
pub fn discover(dir: &Path) -> Result<Vec<PathBuf>, BundleError> {
    if dir.join(MANIFEST).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut roots: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    roots.sort();
    if roots.is_empty() {
        return Err(BundleError::MissingManifest(dir.join(MANIFEST)));
    }
    Ok(roots)
}
