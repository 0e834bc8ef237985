use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shape-annotated flat array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn vector(name: &str, data: Vec<f64>) -> Self {
        Tensor {
            name: name.to_string(),
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(name: &str, rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        Tensor {
            name: name.to_string(),
            shape: vec![r, c],
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let (r, c) = (self.shape[0], self.shape[1]);
        (0..r).map(|i| self.data[i * c..(i + 1) * c].to_vec()).collect()
    }
}

/// Parameter checkpoint file. Serialized under the versioned top-level key
/// `nnkit_v1`; `meta` carries model-specific header fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Checkpoint {
    pub tensors: Vec<Tensor>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint missing nnkit_v1 key")]
    MissingVersion,
    #[error("checkpoint missing tensor {0}")]
    MissingTensor(String),
    #[error("checkpoint missing meta field {0}")]
    MissingMeta(String),
}

#[derive(Serialize, Deserialize)]
struct Versioned {
    nnkit_v1: Checkpoint,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&Versioned {
            nnkit_v1: self.clone(),
        })
        .expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if v.get("nnkit_v1").is_none() {
            return Err(CheckpointError::MissingVersion);
        }
        let v: Versioned = serde_json::from_str(text)?;
        Ok(v.nnkit_v1)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))
    }

    pub fn meta_field(&self, name: &str) -> Result<&str, CheckpointError> {
        self.meta
            .get(name)
            .map(|s| s.as_str())
            .ok_or_else(|| CheckpointError::MissingMeta(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_version_key() {
        let mut ck = Checkpoint::default();
        ck.tensors.push(Tensor::matrix("w", &[vec![1.0, 2.0], vec![3.0, 4.0]]));
        ck.tensors.push(Tensor::vector("b", vec![0.5]));
        ck.meta.insert("mode".into(), "exact".into());
        let json = ck.to_json();
        assert!(json.contains("\"nnkit_v1\""));
        let back = Checkpoint::from_json(&json).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.tensor("w").unwrap().to_matrix()[1], vec![3.0, 4.0]);
    }

    #[test]
    fn missing_version_key_rejected() {
        assert!(matches!(
            Checkpoint::from_json("{\"tensors\": []}"),
            Err(CheckpointError::MissingVersion)
        ));
    }
}
