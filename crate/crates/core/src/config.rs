//! Service configuration, read from TOML.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::knowledge::{Embedder, HashEmbedder, HttpEmbedder, DEFAULT_THRESHOLD};
use crate::llm::ModelEndpointConfig;
use crate::orchestrator::LoopConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    /// Offline hashed bag-of-words vectors.
    Hash { dimension: usize, seed: u64 },
    Http { base_url: String, model: String, dimension: usize, api_key_env_var: String },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hash { dimension: 256, seed: 0x5eed }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Arc<dyn Embedder> {
        match self {
            EmbedderConfig::Hash { dimension, seed } => Arc::new(HashEmbedder::new(*dimension, *seed)),
            EmbedderConfig::Http { base_url, model, dimension, api_key_env_var } => {
                Arc::new(HttpEmbedder::new(base_url, model, *dimension, api_key_env_var))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ApiConfig {
    pub bind_address: SocketAddr,
    /// Endpoint for the programmer (and report writer).
    pub model: ModelEndpointConfig,
    /// Endpoint for the inspector; the programmer's when absent.
    pub inspector_model: Option<ModelEndpointConfig>,
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    pub storage_root: PathBuf,
    pub knowledge_dir: PathBuf,
    /// Largest accepted upload, in bytes.
    pub upload_limit: usize,
    /// Knowledge matching threshold.
    pub theta: f64,
    /// Prompt and report template overrides.
    pub templates_dir: Option<PathBuf>,
    pub kernel: KernelConfig,
    pub embedder: EmbedderConfig,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            bind_address: SocketAddr::from(([127, 0, 0, 1], 8080)),
            model: ModelEndpointConfig::default(),
            inspector_model: None,
            loop_config: LoopConfig::default(),
            storage_root: PathBuf::from("data/sessions"),
            knowledge_dir: PathBuf::from("data/knowledge"),
            upload_limit: 200 * 1024 * 1024,
            theta: DEFAULT_THRESHOLD,
            templates_dir: None,
            kernel: KernelConfig::default(),
            embedder: EmbedderConfig::default(),
        }
    }
}

impl ApiConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ApiConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta {} outside [-1, 1]", self.theta)));
        }
        if self.upload_limit == 0 {
            return Err(Error::Config("upload_limit must be positive".into()));
        }
        self.model.validate()?;
        if let Some(m) = &self.inspector_model {
            m.validate()?;
        }
        self.loop_config.validate()
    }

    /// Creates the storage and knowledge directories.
    pub fn prepare_dirs(&self) -> Result<()> {
        for dir in [&self.storage_root, &self.knowledge_dir] {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ApiConfig::from_toml("").unwrap();
        assert_eq!(cfg.theta, 0.5);
        assert_eq!(cfg.loop_config.max_attempts, 5);

        let cfg = ApiConfig::from_toml(
            r#"
bind_address = "0.0.0.0:9000"
theta = 0.7
upload_limit = 1024

[model]
base_url = "http://localhost:8000/v1"
model_name = "local"

[loop]
max_attempts = 3
execute_timeout = 2.5

[embedder]
kind = "hash"
dimension = 64
seed = 1
"#,
        )
        .unwrap();
        assert_eq!(cfg.bind_address.port(), 9000);
        assert_eq!(cfg.loop_config.max_attempts, 3);
        assert_eq!(cfg.loop_config.execute_timeout.as_secs_f64(), 2.5);
        assert_eq!(cfg.embedder, EmbedderConfig::Hash { dimension: 64, seed: 1 });
        assert_eq!(cfg.embedder.build().dimension(), 64);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(ApiConfig::from_toml("theta = 1.5"), Err(Error::Config(_))));
        assert!(ApiConfig::from_toml("upload_limit = 0").is_err());
        assert!(ApiConfig::from_toml("[loop]\nmax_attempts = 0").is_err());
        assert!(ApiConfig::from_toml("bind_address = 3").is_err());
    }
}
