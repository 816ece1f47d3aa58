//! Small file-writing helpers shared by the binary container formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Write bytes to `path` atomically: write a sibling temp file, then rename.
pub fn atomic_write(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(if dir.as_os_str().is_empty() {
        Path::new(".")
    } else {
        dir
    })?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
