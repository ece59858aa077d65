use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Figure,
    Model,
    Data,
    Other,
}

impl ArtifactKind {
    pub fn from_name(name: &str) -> Self {
        let ext = Path::new(name)
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" | "jpg" | "jpeg" | "svg" => ArtifactKind::Figure,
            "csv" | "parquet" => ArtifactKind::Data,
            "pkl" | "joblib" | "onnx" => ArtifactKind::Model,
            _ => ArtifactKind::Other,
        }
    }
}

/// A file produced inside a session's working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the working directory, `/`-separated.
    pub name: String,
    pub kind: ArtifactKind,
    pub path: PathBuf,
    pub created_at: DateTime<Utc>,
}

impl Artifact {
    pub fn new(working_dir: &Path, name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ArtifactKind::from_name(name),
            path: working_dir.join(name),
            created_at: Utc::now(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_by_extension() {
        assert_eq!(ArtifactKind::from_name("plot1.png"), ArtifactKind::Figure);
        assert_eq!(ArtifactKind::from_name("fig.SVG"), ArtifactKind::Figure);
        assert_eq!(ArtifactKind::from_name("out/clean.csv"), ArtifactKind::Data);
        assert_eq!(ArtifactKind::from_name("model.joblib"), ArtifactKind::Model);
        assert_eq!(ArtifactKind::from_name("notes.txt"), ArtifactKind::Other);
        assert_eq!(ArtifactKind::from_name("Makefile"), ArtifactKind::Other);
    }
}
