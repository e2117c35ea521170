//! Pipeline library behind the `scg` binary: configuration, stage
//! orchestration and reproducibility metadata.

pub mod config;
pub mod meta;
pub mod stages;

pub use config::PipelineConfig;
pub use stages::{synth_dataset, PathOverrides, Pipeline};

/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for stage failures.
pub const EXIT_STAGE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stage {stage} failed: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => EXIT_CONFIG,
            PipelineError::Stage { .. } => EXIT_STAGE,
        }
    }
}
