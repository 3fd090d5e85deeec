use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One RGB-D pair of a dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestItem {
    pub scene_id: String,
    pub rgb: PathBuf,
    pub depth: PathBuf,
}

/// A dataset manifest: scene list plus its split tag.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: String,
    pub items: Vec<ManifestItem>,
}

impl DatasetManifest {
    /// Loads a manifest; relative item paths resolve against the manifest's
    /// directory. Referenced files must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Json { path: path.into(), source: e })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for item in &mut manifest.items {
            for p in [&mut item.rgb, &mut item.depth] {
                if p.is_relative() {
                    *p = base.join(&p);
                }
                if !p.exists() {
                    return Err(Error::Config(format!(
                        "manifest `{}`: missing file {}",
                        item.scene_id,
                        p.display()
                    )));
                }
            }
        }
        let mut ids: Vec<&str> = manifest.items.iter().map(|i| i.scene_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != manifest.items.len() {
            return Err(Error::Config("manifest scene ids must be unique".into()));
        }
        Ok(manifest)
    }
}
