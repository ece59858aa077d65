use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use parking_lot::Mutex;

use super::{Kernel, KernelConfig, KernelState};
use crate::error::{Error, Result};

/// Supervises at most one live kernel per session.
#[derive(Debug, Default)]
pub struct KernelManager {
    config: KernelConfig,
    kernels: Mutex<HashMap<String, Arc<Kernel>>>,
}

impl KernelManager {
    pub fn new(config: KernelConfig) -> Self {
        Self { config, kernels: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn start_kernel(&self, session_id: &str, working_dir: &Path) -> Result<Arc<Kernel>> {
        let mut kernels = self.kernels.lock();
        if kernels.get(session_id).is_some_and(|k| k.state() != KernelState::Dead) {
            return Err(Error::Precondition(format!("session {session_id} already has a live kernel")));
        }
        let kernel = Arc::new(Kernel::start(session_id, working_dir, self.config.clone())?);
        kernels.insert(session_id.to_string(), kernel.clone());
        Ok(kernel)
    }

    /// Returns the live kernel for the session, starting one if needed.
    pub fn get_or_start(&self, session_id: &str, working_dir: &Path) -> Result<Arc<Kernel>> {
        if let Some(k) = self.get(session_id) {
            return Ok(k);
        }
        self.start_kernel(session_id, working_dir)
    }

    pub fn get(&self, session_id: &str) -> Option<Arc<Kernel>> {
        self.kernels.lock().get(session_id).filter(|k| k.state() != KernelState::Dead).cloned()
    }

    pub fn shutdown(&self, session_id: &str) {
        let kernel = self.kernels.lock().remove(session_id);
        if let Some(k) = kernel {
            k.shutdown();
        }
    }

    pub fn shutdown_all(&self) {
        let all: Vec<_> = self.kernels.lock().drain().map(|(_, k)| k).collect();
        for k in all {
            k.shutdown();
        }
    }
}
