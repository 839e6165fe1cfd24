use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never sees a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Artifacts held in memory until the command has finished.
pub(crate) struct Staged {
    hash: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn new(hash: String) -> Self {
        Staged {
            hash,
            files: Vec::new(),
        }
    }

    pub fn csv(&mut self, name: &str, header: &str, rows: Vec<String>) {
        let mut text = format!(
            "# hubbard-lab {VERSION} config_hash={}\n{header}\n",
            self.hash
        );
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.files.push((name.to_string(), text.into_bytes()));
    }

    /// `value` must be an object; version and hash are added to it.
    pub fn json(&mut self, name: &str, mut value: Value) {
        if let Value::Object(map) = &mut value {
            map.insert("version".into(), Value::from(VERSION));
            map.insert("config_hash".into(), Value::from(self.hash.clone()));
        }
        let mut text = serde_json::to_string_pretty(&value).expect("json values serialize");
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
    }

    /// Returns the relative names in write order.
    pub fn commit(self, dir: &Path) -> Result<Vec<String>> {
        let mut names = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            write_atomic(&dir.join(&name), &bytes)?;
            names.push(name);
        }
        Ok(names)
    }
}
