//! Per-stage reproducibility metadata: seed, config hash, input hashes,
//! tool version. A stage whose recorded hashes still match its current
//! inputs (and whose outputs exist) is skipped unless forced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::PipelineError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageMeta {
    pub stage: String,
    pub tool_version: String,
    pub seed: u64,
    pub rng: String,
    pub config_hash: String,
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub fn hash_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| {
        PipelineError::Config(format!("cannot hash {}: {e}", path.display()))
    })?;
    Ok(hash_bytes(&bytes))
}

pub fn hash_config<T: Serialize>(value: &T) -> String {
    hash_bytes(serde_json::to_string(value).expect("config serializes").as_bytes())
}

/// Decides whether a stage can be skipped and records its metadata
/// afterwards.
pub struct StageGuard {
    stage: &'static str,
    meta_path: PathBuf,
    seed: u64,
    config_hash: String,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<PathBuf>,
}

impl StageGuard {
    pub fn new(
        stage: &'static str,
        meta_path: PathBuf,
        seed: u64,
        config_hash: String,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
    ) -> Self {
        let inputs = inputs
            .into_iter()
            .map(|p| (p.file_name().unwrap_or_default().to_string_lossy().into_owned(), p))
            .collect();
        StageGuard {
            stage,
            meta_path,
            seed,
            config_hash,
            inputs,
            outputs,
        }
    }

    fn current_input_hashes(&self) -> Result<BTreeMap<String, String>, PipelineError> {
        self.inputs
            .iter()
            .map(|(name, path)| Ok((name.clone(), hash_file(path)?)))
            .collect()
    }

    /// True when every output exists and the recorded meta matches the
    /// current inputs and config.
    pub fn can_skip(&self, force: bool) -> bool {
        if force {
            return false;
        }
        if !self.outputs.iter().all(|p| p.exists()) {
            return false;
        }
        let Ok(text) = std::fs::read_to_string(&self.meta_path) else {
            return false;
        };
        let Ok(meta) = serde_json::from_str::<StageMeta>(&text) else {
            return false;
        };
        if meta.config_hash != self.config_hash || meta.seed != self.seed {
            return false;
        }
        match self.current_input_hashes() {
            Ok(current) => current == meta.input_hashes,
            Err(_) => false,
        }
    }

    /// Writes the stage metadata after a successful run.
    pub fn record(
        &self,
        extra: BTreeMap<String, serde_json::Value>,
    ) -> Result<(), PipelineError> {
        let meta = StageMeta {
            stage: self.stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            rng: scg_core::augment::PRNG_NAME.to_string(),
            config_hash: self.config_hash.clone(),
            input_hashes: self.current_input_hashes()?,
            outputs: self
                .outputs
                .iter()
                .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect(),
            extra,
        };
        if let Some(parent) = self.meta_path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| PipelineError::Config(format!("mkdir meta: {e}")))?;
        }
        let text = serde_json::to_string_pretty(&meta)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        std::fs::write(&self.meta_path, text)
            .map_err(|e| PipelineError::Config(format!("write meta: {e}")))?;
        Ok(())
    }
}
