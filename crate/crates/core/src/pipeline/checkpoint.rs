use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingested,
    Networked,
    Visible,
    Assigned,
    Fitted,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingested,
        Stage::Networked,
        Stage::Visible,
        Stage::Assigned,
        Stage::Fitted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingested => "ingested",
            Stage::Networked => "networked",
            Stage::Visible => "visible",
            Stage::Assigned => "assigned",
            Stage::Fitted => "fitted",
        }
    }

    pub fn prior(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|&s| s == self)?;
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }

    pub fn file_name(self) -> String {
        format!("{}.json", self.name())
    }

    pub fn path_in(self, dir: &Path) -> PathBuf {
        dir.join(self.file_name())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hex SHA-256 of the payload's canonical JSON encoding.
pub fn content_hash<T: Serialize>(payload: &T) -> Result<String> {
    let bytes = serde_json::to_vec(payload).map_err(|e| PipelineError::Serialize(e.to_string()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub stage: Stage,
    pub hash: String,
    /// Hash of the checkpoint this one was computed from.
    pub parent_hash: Option<String>,
    pub payload: T,
}

impl<T: Serialize + DeserializeOwned> Checkpoint<T> {
    pub fn new(stage: Stage, parent_hash: Option<String>, payload: T) -> Result<Self> {
        Ok(Self {
            stage,
            hash: content_hash(&payload)?,
            parent_hash,
            payload,
        })
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self).map_err(|e| PipelineError::Serialize(e.to_string()))
    }

    /// Writes to `<dir>/<stage>.json` through a temporary file.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        let path = self.stage.path_in(dir);
        let tmp = dir.join(format!(".{}.tmp", self.stage.file_name()));
        std::fs::write(&tmp, self.to_json()?).map_err(|e| PipelineError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| PipelineError::io(&path, e))?;
        Ok(path)
    }

    /// Loads and verifies the checkpoint for `stage`; a missing file is a
    /// stage order error.
    pub fn load(dir: &Path, stage: Stage) -> Result<Self> {
        let path = stage.path_in(dir);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(PipelineError::MissingStage { stage, path })
            }
            Err(e) => return Err(PipelineError::io(&path, e)),
        };
        let cp: Self = serde_json::from_slice(&bytes).map_err(|e| PipelineError::CorruptCheckpoint {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        if cp.stage != stage {
            return Err(PipelineError::CorruptCheckpoint {
                path,
                reason: format!("holds stage {} instead of {stage}", cp.stage),
            });
        }
        if content_hash(&cp.payload)? != cp.hash {
            return Err(PipelineError::CorruptCheckpoint {
                path,
                reason: "content hash does not match payload".into(),
            });
        }
        Ok(cp)
    }

    /// Errors unless this checkpoint was derived from `parent`.
    pub fn check_parent<U>(&self, parent: &Checkpoint<U>) -> Result<()> {
        if self.parent_hash.as_deref() != Some(parent.hash.as_str()) {
            return Err(PipelineError::StaleCheckpoint {
                stage: self.stage,
                parent: parent.stage,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_order() {
        assert_eq!(Stage::Ingested.prior(), None);
        assert_eq!(Stage::Fitted.prior(), Some(Stage::Assigned));
        assert!(Stage::Networked < Stage::Visible);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cp = Checkpoint::new(Stage::Visible, Some("abc".into()), vec![0.1f64, 1.0 / 3.0]).unwrap();
        cp.save(dir.path()).unwrap();
        let back = Checkpoint::<Vec<f64>>::load(dir.path(), Stage::Visible).unwrap();
        assert_eq!(back, cp);
        assert!(matches!(
            Checkpoint::<Vec<f64>>::load(dir.path(), Stage::Assigned),
            Err(PipelineError::MissingStage {
                stage: Stage::Assigned,
                ..
            })
        ));
    }

    #[test]
    fn tampered_payload_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cp = Checkpoint::new(Stage::Ingested, None, vec![1u32, 2, 3]).unwrap();
        let path = cp.save(dir.path()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("[1,2,3]", "[1,2,4]");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            Checkpoint::<Vec<u32>>::load(dir.path(), Stage::Ingested),
            Err(PipelineError::CorruptCheckpoint { .. })
        ));
    }
}
