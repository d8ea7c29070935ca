use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::{mime_for_path, FileRecord, UNKNOWN_MIME};
use crate::error::Result;

/// Streaming scan of a directory tree. Symlinks are not followed; entries are
/// visited in sorted order. Unreadable subtrees are skipped and recorded.
pub struct FsScan {
    walker: walkdir::IntoIter,
    host: String,
    skipped: Vec<(PathBuf, String)>,
}

fn local_host_label() -> String {
    if let Ok(h) = std::env::var("HOSTNAME") {
        if !h.trim().is_empty() {
            return h.trim().to_string();
        }
    }
    fs::read_to_string("/etc/hostname")
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "localhost".to_string())
}

/// One record per regular file under `root`. Fails only if `root` itself
/// cannot be read.
pub fn scan_filesystem(root: &Path) -> Result<FsScan> {
    let meta = fs::metadata(root)?;
    if meta.is_dir() {
        fs::read_dir(root)?;
    }
    Ok(FsScan {
        walker: WalkDir::new(root).follow_links(false).sort_by_file_name().into_iter(),
        host: local_host_label(),
        skipped: Vec::new(),
    })
}

impl FsScan {
    pub fn with_host(mut self, host: impl Into<String>) -> Self {
        self.host = host.into();
        self
    }

    /// Paths skipped so far and why.
    pub fn skipped(&self) -> &[(PathBuf, String)] {
        &self.skipped
    }
}

impl Iterator for FsScan {
    type Item = FileRecord;

    fn next(&mut self) -> Option<FileRecord> {
        loop {
            match self.walker.next()? {
                Err(e) => {
                    let path = e.path().map(Path::to_path_buf).unwrap_or_default();
                    log::warn!("skipping {}: {e}", path.display());
                    self.skipped.push((path, e.to_string()));
                }
                Ok(entry) => {
                    if !entry.file_type().is_file() {
                        continue;
                    }
                    match entry.metadata() {
                        Ok(meta) => {
                            let path = entry.path().to_string_lossy().into_owned();
                            let mime = mime_for_path(&path).unwrap_or(UNKNOWN_MIME).to_string();
                            return Some(FileRecord {
                                host: self.host.clone(),
                                path,
                                mime,
                                size_bytes: meta.len(),
                            });
                        }
                        Err(e) => self.skipped.push((entry.path().to_path_buf(), e.to_string())),
                    }
                }
            }
        }
    }
}
