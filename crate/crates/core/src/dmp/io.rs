use super::{BasisSet, DmpError, DmpSegmentModel};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// On-disk form of a fitted segment (TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmpModelDoc {
    pub schema_version: u32,
    pub kind: String,
    pub model: DmpSegmentModel,
}

impl DmpModelDoc {
    pub fn new(model: DmpSegmentModel) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: "dmp_segment".into(),
            model,
        }
    }

    pub fn to_toml(&self) -> Result<String, DmpError> {
        toml::to_string(self).map_err(|e| DmpError::Document(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<DmpSegmentModel, DmpError> {
        let doc: DmpModelDoc = toml::from_str(text).map_err(|e| DmpError::Document(e.to_string()))?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(DmpError::Document(format!(
                "unsupported model schema version {} (expected {})",
                doc.schema_version, MODEL_SCHEMA_VERSION
            )));
        }
        if doc.kind != "dmp_segment" {
            return Err(DmpError::Document(format!("unexpected document kind '{}'", doc.kind)));
        }
        let m = doc.model;
        let basis = BasisSet::new(m.basis.centers().to_vec(), m.basis.widths().to_vec())?;
        for ch in m.forward.channels.iter().chain(&m.backward.channels) {
            if ch.weights.len() != basis.len() {
                return Err(DmpError::Document(format!(
                    "channel '{}' has {} weights for {} bases",
                    ch.spec.name,
                    ch.weights.len(),
                    basis.len()
                )));
            }
        }
        DmpSegmentModel::new(m.canonical, basis, m.duration, m.forward, m.backward)
    }

    pub fn load(path: &Path) -> Result<DmpSegmentModel, DmpError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DmpError::Document(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), DmpError> {
        std::fs::write(path, self.to_toml()?).map_err(|e| DmpError::Document(format!("{}: {e}", path.display())))
    }
}
