//! Pipeline configuration: one JSON file drives every stage. All sections
//! have defaults, so `{"workdir": "out"}` is a valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scg_core::augment::AugmentParams;
use scg_core::scene::synthetic::Archetype;
use scg_core::scene::LaneGates;
use scg_core::trainer::TrainConfig;

use crate::PipelineError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Global seed; every stage derives its own stream from it.
    #[serde(default)]
    pub seed: u64,
    pub workdir: PathBuf,
    /// Input track CSV. When absent the synth stage generates one.
    #[serde(default)]
    pub tracks: Option<PathBuf>,
    /// Lane-map JSON. When absent the synth stage writes the built-in map.
    #[serde(default)]
    pub map: Option<PathBuf>,
    #[serde(default = "default_stride")]
    pub frame_stride: usize,
    #[serde(default)]
    pub synth: SynthSettings,
    #[serde(default)]
    pub augment: AugmentSettings,
    #[serde(default)]
    pub gates: LaneGates,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub cluster: ClusterSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub count: usize,
    /// Archetype labels cycled over the scene index.
    pub archetype_mix: Vec<String>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            count: 100,
            archetype_mix: Archetype::ALL.iter().map(|a| a.label().to_string()).collect(),
        }
    }
}

impl SynthSettings {
    pub fn archetypes(&self) -> Result<Vec<Archetype>, PipelineError> {
        if self.count == 0 {
            return Err(PipelineError::Config("synth.count must be >= 1".into()));
        }
        if self.archetype_mix.is_empty() {
            return Err(PipelineError::Config("synth.archetype_mix is empty".into()));
        }
        self.archetype_mix
            .iter()
            .map(|label| {
                Archetype::from_label(label).ok_or_else(|| {
                    PipelineError::Config(format!("unknown archetype {label:?}"))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSettings {
    pub sigma_pos: f64,
    pub sigma_vel: f64,
    pub p_entity: f64,
    pub max_retries: u32,
    /// Augmented copies per scene (more positives per anchor).
    pub copies: usize,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        let p = AugmentParams::default();
        AugmentSettings {
            sigma_pos: p.sigma_pos,
            sigma_vel: p.sigma_vel,
            p_entity: p.p_entity,
            max_retries: p.max_retries,
            copies: 1,
        }
    }
}

impl AugmentSettings {
    pub fn params(&self, rng_seed: u64) -> AugmentParams {
        AugmentParams {
            sigma_pos: self.sigma_pos,
            sigma_vel: self.sigma_vel,
            p_entity: self.p_entity,
            max_retries: self.max_retries,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub margin: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub train_fraction: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = TrainConfig::default();
        TrainSettings {
            learning_rate: c.learning_rate,
            margin: c.margin,
            epochs: c.epochs,
            batch_size: c.batch_size,
            train_fraction: c.train_fraction,
        }
    }
}

impl TrainSettings {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            margin: self.margin,
            epochs: self.epochs,
            batch_size: self.batch_size,
            train_fraction: self.train_fraction,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    pub eps: f64,
    pub min_samples: usize,
    /// When true, eps comes from the k-distance knee instead of `eps`.
    pub suggest_eps: bool,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            eps: 0.05,
            min_samples: 5,
            suggest_eps: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub scenes: usize,
    pub delta_v: f64,
    pub steps: u32,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            scenes: 25,
            delta_v: 0.5,
            steps: 10,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.frame_stride == 0 {
            return Err(PipelineError::Config("frame_stride must be >= 1".into()));
        }
        self.synth.archetypes()?;
        if !(0.0..=1.0).contains(&self.augment.p_entity) {
            return Err(PipelineError::Config("augment.p_entity must be in [0, 1]".into()));
        }
        if self.augment.sigma_pos < 0.0 || self.augment.sigma_vel < 0.0 {
            return Err(PipelineError::Config("augment sigmas must be >= 0".into()));
        }
        self.train
            .config(0)
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.cluster.eps > 0.0) || self.cluster.min_samples == 0 {
            return Err(PipelineError::Config(
                "cluster.eps must be > 0 and min_samples >= 1".into(),
            ));
        }
        if self.sweep.scenes == 0 {
            return Err(PipelineError::Config("sweep.scenes must be >= 1".into()));
        }
        Ok(())
    }

    // Workdir artifact paths; fixed names keep stages re-runnable.

    pub fn tracks_path(&self) -> PathBuf {
        self.tracks
            .clone()
            .unwrap_or_else(|| self.workdir.join("tracks.csv"))
    }

    pub fn map_path(&self) -> PathBuf {
        self.map
            .clone()
            .unwrap_or_else(|| self.workdir.join("map.json"))
    }

    pub fn archetype_labels_path(&self) -> PathBuf {
        self.workdir.join("labels_archetype.csv")
    }

    pub fn scenes_path(&self) -> PathBuf {
        self.workdir.join("scenes.csv")
    }

    pub fn augmented_path(&self, copy: usize) -> PathBuf {
        self.workdir.join(format!("augmented/copy_{copy:03}.csv"))
    }

    pub fn graphs_path(&self) -> PathBuf {
        self.workdir.join("graphs.jsonl")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.workdir.join("checkpoint.json")
    }

    pub fn history_path(&self) -> PathBuf {
        self.workdir.join("history.csv")
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.workdir.join("emb.csv")
    }

    pub fn labels_path(&self) -> PathBuf {
        self.workdir.join("labels.csv")
    }

    pub fn kdist_path(&self) -> PathBuf {
        self.workdir.join("kdist.csv")
    }

    pub fn sweep_path(&self) -> PathBuf {
        self.workdir.join("sweep.csv")
    }

    pub fn sweep_svg_path(&self) -> PathBuf {
        self.workdir.join("sweep.svg")
    }

    pub fn stats_path(&self) -> PathBuf {
        self.workdir.join("stats.csv")
    }

    pub fn scatter_path(&self, stem: &str) -> (PathBuf, PathBuf) {
        (
            self.workdir.join(format!("{stem}.csv")),
            self.workdir.join(format!("{stem}.svg")),
        )
    }

    pub fn meta_path(&self, stage: &str) -> PathBuf {
        self.workdir.join(format!("meta/{stage}.json"))
    }
}
