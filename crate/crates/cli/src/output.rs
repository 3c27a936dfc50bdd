//! Output files of one command; removed again if the command fails.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use hcon::data::Metadata;
use serde::Serialize;

pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    /// Writes `contents` to `path` (relative paths resolve under the output directory).
    pub fn write(&mut self, path: impl AsRef<Path>, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(path.as_ref());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.written.push(path.clone());
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, path: impl AsRef<Path>, meta: &Metadata, body: &T) -> anyhow::Result<PathBuf> {
        let doc = serde_json::json!({
            "metadata": metadata_json(meta),
            "result": body,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write(path, &text)
    }

    pub fn rollback(&mut self) {
        for p in self.written.drain(..) {
            if fs::remove_file(&p).is_ok() {
                log::info!("removed partial output {}", p.display());
            }
        }
    }

    pub fn commit(&mut self) {
        self.written.clear();
    }
}

fn metadata_json(meta: &Metadata) -> serde_json::Value {
    let map = meta
        .entries()
        .iter()
        .map(|(k, v)| {
            let value = if k == "config" {
                serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()))
            } else {
                serde_json::Value::String(v.clone())
            };
            (k.clone(), value)
        })
        .collect::<serde_json::Map<_, _>>();
    serde_json::Value::Object(map)
}
