//! Pipeline stages. Each stage reads files, writes files plus a
//! `meta/<stage>.json`, and is individually re-runnable: when its recorded
//! input hashes and config hash still match, it is skipped unless forced.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;

use serde_json::json;

use scg_core::analysis::{
    embed_dataset, sample_sweep_scenes, scatter_export, scene_statistics, velocity_sweep,
    write_embeddings_csv, write_sweep_csv,
};
use scg_core::augment::augment_scene;
use scg_core::cluster::{dbscan, k_distance, knee_point, read_labels_csv, write_labels_csv};
use scg_core::encoder::{grad_check, init_params, Checkpoint, EncoderParams};
use scg_core::exec::par_map_indexed;
use scg_core::graph::{build_graph, read_graphs_jsonl, write_graphs_jsonl, SceneGraph};
use scg_core::scene::io::{
    load_lane_map, load_tracks, save_lane_map, save_tracks, scene_id_for_frame,
};
use scg_core::scene::synthetic::{default_map, generate_synthetic_scene, Archetype};
use scg_core::scene::{LaneMap, TrafficScene};
use scg_core::trainer::{mix_seed, pair_by_scene_id, train, write_history_csv};

use crate::config::PipelineConfig;
use crate::meta::{hash_config, StageGuard};
use crate::PipelineError;

// Stage seed salts; fixed so every stage has a stable independent stream.
const SALT_SYNTH: u64 = 1;
const SALT_AUGMENT: u64 = 3;
const SALT_TRAIN: u64 = 4;
const SALT_SWEEP: u64 = 6;

fn stage_error(stage: &'static str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// Optional output-path overrides for the subcommands that document them.
#[derive(Debug, Default, Clone)]
pub struct PathOverrides {
    pub graphs: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub force: bool,
    pub overrides: PathOverrides,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, force: bool) -> Self {
        Pipeline {
            config,
            force,
            overrides: PathOverrides::default(),
        }
    }

    fn stage_seed(&self, salt: u64) -> u64 {
        mix_seed(self.config.seed, salt)
    }

    fn ensure_workdir(&self) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.config.workdir)
            .map_err(|e| PipelineError::Config(format!("cannot create workdir: {e}")))
    }

    fn load_map(&self, stage: &'static str) -> Result<LaneMap, PipelineError> {
        load_lane_map(self.config.map_path()).map_err(|e| stage_error(stage, e))
    }

    fn load_scenes(&self, stage: &'static str) -> Result<Vec<TrafficScene>, PipelineError> {
        let loaded = load_tracks(self.config.scenes_path(), 1).map_err(|e| stage_error(stage, e))?;
        Ok(loaded.scenes)
    }

    fn graphs_path(&self) -> PathBuf {
        self.overrides
            .graphs
            .clone()
            .unwrap_or_else(|| self.config.graphs_path())
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.overrides
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.config.checkpoint_path())
    }

    /// Generates the synthetic track file (and, when no map was supplied,
    /// the built-in lane map). A no-op when real tracks are configured.
    pub fn synth(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "synth";
        self.ensure_workdir()?;
        if self.config.tracks.is_some() {
            return Ok(());
        }
        let seed = self.stage_seed(SALT_SYNTH);
        if self.config.map.is_none() && !self.config.map_path().exists() {
            save_lane_map(self.config.map_path(), &default_map())
                .map_err(|e| stage_error(STAGE, e))?;
        }
        let archetypes = self.config.synth.archetypes()?;
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            seed,
            hash_config(&self.config.synth),
            vec![self.config.map_path()],
            vec![self.config.tracks_path(), self.config.archetype_labels_path()],
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let map = self.load_map(STAGE)?;
        let (scenes, labels) = synth_dataset(&archetypes, self.config.synth.count, &map, seed)
            .map_err(|e| stage_error(STAGE, e))?;
        save_tracks(self.config.tracks_path(), &scenes).map_err(|e| stage_error(STAGE, e))?;
        write_archetype_labels(&self.config.archetype_labels_path(), &labels)
            .map_err(|e| stage_error(STAGE, e))?;
        guard.record(BTreeMap::from([(
            "scenes".to_string(),
            json!(scenes.len()),
        )]))?;
        Ok(())
    }

    /// Reads the track file, groups frames into scenes and writes the
    /// normalized scene store.
    pub fn ingest(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "ingest";
        self.ensure_workdir()?;
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            self.config.seed,
            hash_config(&self.config.frame_stride),
            vec![self.config.tracks_path()],
            vec![self.config.scenes_path()],
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let loaded = load_tracks(self.config.tracks_path(), self.config.frame_stride)
            .map_err(|e| stage_error(STAGE, e))?;
        if loaded.unknown_agent_labels > 0 {
            eprintln!(
                "warning: {} rows with unknown agent class mapped to 'other'",
                loaded.unknown_agent_labels
            );
        }
        save_tracks(self.config.scenes_path(), &loaded.scenes)
            .map_err(|e| stage_error(STAGE, e))?;
        guard.record(BTreeMap::from([
            ("scenes".to_string(), json!(loaded.scenes.len())),
            (
                "unknown_agent_labels".to_string(),
                json!(loaded.unknown_agent_labels),
            ),
        ]))?;
        Ok(())
    }

    /// Writes `copies` augmented variants of every scene.
    pub fn augment(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "augment";
        let seed = self.stage_seed(SALT_AUGMENT);
        let outputs: Vec<PathBuf> = (0..self.config.augment.copies)
            .map(|k| self.config.augmented_path(k))
            .collect();
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            seed,
            hash_config(&(&self.config.augment, &self.config.gates)),
            vec![self.config.scenes_path(), self.config.map_path()],
            outputs.clone(),
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let map = self.load_map(STAGE)?;
        let scenes = self.load_scenes(STAGE)?;
        if let Some(parent) = outputs.first().and_then(|p| p.parent()) {
            std::fs::create_dir_all(parent).map_err(|e| stage_error(STAGE, e))?;
        }
        let mut entities_in = 0usize;
        let mut entities_out = 0usize;
        for (k, path) in outputs.iter().enumerate() {
            let copy_seed = mix_seed(seed, k as u64);
            let augmented = par_map_indexed(&scenes, |i, scene| {
                augment_scene(
                    scene,
                    &map,
                    &self.config.augment.params(mix_seed(copy_seed, i as u64)),
                    &self.config.gates,
                )
            });
            entities_in += scenes.iter().map(|s| s.entities.len()).sum::<usize>();
            entities_out += augmented.iter().map(|s| s.entities.len()).sum::<usize>();
            save_tracks(path, &augmented).map_err(|e| stage_error(STAGE, e))?;
        }
        guard.record(BTreeMap::from([
            ("entities_in".to_string(), json!(entities_in)),
            ("entities_out".to_string(), json!(entities_out)),
        ]))?;
        Ok(())
    }

    /// Builds scene graphs for the originals and every augmented copy;
    /// edgeless scenes are dropped.
    pub fn build_graphs(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "build-graphs";
        let mut inputs = vec![self.config.scenes_path(), self.config.map_path()];
        for k in 0..self.config.augment.copies {
            inputs.push(self.config.augmented_path(k));
        }
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            self.config.seed,
            hash_config(&self.config.gates),
            inputs,
            vec![self.graphs_path()],
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let map = self.load_map(STAGE)?;
        let gates = &self.config.gates;
        let mut graphs: Vec<SceneGraph> = Vec::new();
        let mut edgeless = 0usize;

        let scenes = self.load_scenes(STAGE)?;
        let anchor_graphs = par_map_indexed(&scenes, |_, s| build_graph(s, &map, gates));
        for g in anchor_graphs {
            match g {
                Some(g) => graphs.push(g),
                None => edgeless += 1,
            }
        }
        for k in 0..self.config.augment.copies {
            let loaded = load_tracks(self.config.augmented_path(k), 1)
                .map_err(|e| stage_error(STAGE, e))?;
            let copy_graphs =
                par_map_indexed(&loaded.scenes, |_, s| build_graph(s, &map, gates));
            for (scene, g) in loaded.scenes.iter().zip(copy_graphs) {
                match g {
                    Some(mut g) => {
                        g.scene_id = format!("{}#aug{k}", scene.scene_id);
                        graphs.push(g);
                    }
                    None => edgeless += 1,
                }
            }
        }
        write_graphs_jsonl(self.graphs_path(), &graphs).map_err(|e| stage_error(STAGE, e))?;
        guard.record(BTreeMap::from([
            ("graphs".to_string(), json!(graphs.len())),
            ("edgeless_dropped".to_string(), json!(edgeless)),
        ]))?;
        Ok(())
    }

    /// Trains the encoder on (anchor, positive) pairs from the graph dump.
    pub fn train(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "train";
        let seed = self.stage_seed(SALT_TRAIN);
        let checkpoint_path = self.checkpoint_path();
        let history_path = self
            .overrides
            .history
            .clone()
            .unwrap_or_else(|| self.config.history_path());
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            seed,
            hash_config(&self.config.train),
            vec![self.graphs_path()],
            vec![checkpoint_path.clone(), history_path.clone()],
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let graphs = read_graphs_jsonl(self.graphs_path()).map_err(|e| stage_error(STAGE, e))?;
        let pairs = pair_by_scene_id(&graphs);
        let output = train(&pairs, &self.config.train.config(seed))
            .map_err(|e| stage_error(STAGE, e))?;
        Checkpoint::from_params(&output.params, output.init_seed)
            .save(&checkpoint_path)
            .map_err(|e| stage_error(STAGE, e))?;
        write_history_csv(&history_path, &output.history).map_err(|e| stage_error(STAGE, e))?;
        let final_acc = output
            .history
            .last()
            .map(|h| h.val_triplet_acc)
            .unwrap_or(f64::NAN);
        guard.record(BTreeMap::from([
            ("pairs".to_string(), json!(pairs.len())),
            ("final_val_triplet_acc".to_string(), json!(final_acc)),
        ]))?;
        Ok(())
    }

    fn load_checkpoint(&self, stage: &'static str) -> Result<EncoderParams, PipelineError> {
        Checkpoint::load(self.checkpoint_path())
            .and_then(Checkpoint::into_params)
            .map_err(|e| stage_error(stage, e))
    }

    /// Embeds every anchor graph with the trained checkpoint.
    pub fn embed(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "embed";
        let out_path = self
            .overrides
            .embeddings
            .clone()
            .unwrap_or_else(|| self.config.embeddings_path());
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            self.config.seed,
            hash_config(&"embed-v1"),
            vec![self.checkpoint_path(), self.graphs_path()],
            vec![out_path.clone()],
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let params = self.load_checkpoint(STAGE)?;
        let graphs = read_graphs_jsonl(self.graphs_path()).map_err(|e| stage_error(STAGE, e))?;
        let anchors: Vec<SceneGraph> = graphs
            .into_iter()
            .filter(|g| !g.scene_id.contains("#aug"))
            .collect();
        let rows = embed_dataset(&params, &anchors).map_err(|e| stage_error(STAGE, e))?;
        write_embeddings_csv(&out_path, &rows).map_err(|e| stage_error(STAGE, e))?;
        guard.record(BTreeMap::from([(
            "embeddings".to_string(),
            json!(rows.len()),
        )]))?;
        Ok(())
    }

    /// DBSCAN over the embeddings; eps from config or from the k-distance
    /// knee when `suggest_eps` is set.
    pub fn cluster(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "cluster";
        let emb_path = self
            .overrides
            .embeddings
            .clone()
            .unwrap_or_else(|| self.config.embeddings_path());
        let labels_path = self
            .overrides
            .labels
            .clone()
            .unwrap_or_else(|| self.config.labels_path());
        let mut outputs = vec![labels_path.clone()];
        if self.config.cluster.suggest_eps {
            outputs.push(self.config.kdist_path());
        }
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            self.config.seed,
            hash_config(&self.config.cluster),
            vec![emb_path.clone()],
            outputs,
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let rows =
            scg_core::analysis::read_embeddings_csv(&emb_path).map_err(|e| stage_error(STAGE, e))?;
        let ids: Vec<String> = rows.iter().map(|(id, _)| id.clone()).collect();
        let points: Vec<[f64; 2]> = rows.iter().map(|(_, e)| [e.sx, e.sy]).collect();
        let settings = &self.config.cluster;
        let eps = if settings.suggest_eps {
            let kdist =
                k_distance(&points, settings.min_samples).map_err(|e| stage_error(STAGE, e))?;
            write_kdist_csv(&self.config.kdist_path(), &kdist)
                .map_err(|e| stage_error(STAGE, e))?;
            let knee = knee_point(&kdist);
            if knee.prominence < 1e-6 || !(knee.value > 0.0) {
                eprintln!(
                    "warning: no usable k-distance elbow (prominence {:.2e}); using configured eps {}",
                    knee.prominence, settings.eps
                );
                settings.eps
            } else {
                knee.value
            }
        } else {
            settings.eps
        };
        let labels = dbscan(&points, eps, settings.min_samples);
        write_labels_csv(&labels_path, &ids, &labels).map_err(|e| stage_error(STAGE, e))?;
        guard.record(BTreeMap::from([
            ("eps_used".to_string(), json!(eps)),
            ("clusters".to_string(), json!(labels.num_clusters())),
            ("noise".to_string(), json!(labels.num_noise())),
        ]))?;
        Ok(())
    }

    /// Per-scene statistics and, when embeddings exist, the vehicle-count
    /// colored scatter.
    pub fn stats(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "stats";
        let emb_path = self.config.embeddings_path();
        let have_embeddings = emb_path.exists();
        let (scatter_csv, scatter_svg) = self.config.scatter_path("scatter_vehicles");
        let mut inputs = vec![self.config.scenes_path(), self.graphs_path()];
        let mut outputs = vec![self.config.stats_path()];
        if have_embeddings {
            inputs.push(emb_path.clone());
            outputs.push(scatter_csv.clone());
            outputs.push(scatter_svg.clone());
        }
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            self.config.seed,
            hash_config(&"stats-v1"),
            inputs,
            outputs,
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let scenes = self.load_scenes(STAGE)?;
        let graphs = read_graphs_jsonl(self.graphs_path()).map_err(|e| stage_error(STAGE, e))?;
        let by_id: BTreeMap<&str, &SceneGraph> = graphs
            .iter()
            .filter(|g| !g.scene_id.contains("#aug"))
            .map(|g| (g.scene_id.as_str(), g))
            .collect();
        let mut stats = Vec::new();
        for scene in &scenes {
            if let Some(graph) = by_id.get(scene.scene_id.as_str()) {
                stats.push(scene_statistics(scene, graph));
            }
        }
        write_stats_csv(&self.config.stats_path(), &stats).map_err(|e| stage_error(STAGE, e))?;
        if have_embeddings {
            let rows = scg_core::analysis::read_embeddings_csv(&emb_path)
                .map_err(|e| stage_error(STAGE, e))?;
            let stat_by_id: BTreeMap<&str, &scg_core::analysis::SceneStatistics> =
                stats.iter().map(|s| (s.scene_id.as_str(), s)).collect();
            let scatter: Vec<(f64, f64, f64)> = rows
                .iter()
                .filter_map(|(id, e)| {
                    stat_by_id
                        .get(id.as_str())
                        .map(|s| (e.sx, e.sy, s.num_vehicles as f64))
                })
                .collect();
            if !scatter.is_empty() {
                scatter_export(&scatter, &scatter_csv, &scatter_svg)
                    .map_err(|e| stage_error(STAGE, e))?;
            }
        }
        guard.record(BTreeMap::from([("scenes".to_string(), json!(stats.len()))]))?;
        Ok(())
    }

    /// Velocity-increment sweep over a seeded scene sample.
    pub fn sweep(&self) -> Result<(), PipelineError> {
        const STAGE: &str = "sweep";
        let seed = self.stage_seed(SALT_SWEEP);
        let labels_path = self.config.labels_path();
        let have_labels = labels_path.exists();
        let mut inputs = vec![
            self.checkpoint_path(),
            self.config.scenes_path(),
            self.config.map_path(),
        ];
        if have_labels {
            inputs.push(labels_path.clone());
        }
        let guard = StageGuard::new(
            STAGE,
            self.config.meta_path(STAGE),
            seed,
            hash_config(&self.config.sweep),
            inputs,
            vec![self.config.sweep_path(), self.config.sweep_svg_path()],
        );
        if guard.can_skip(self.force) {
            return Ok(());
        }
        let params = self.load_checkpoint(STAGE)?;
        let map = self.load_map(STAGE)?;
        let scenes = self.load_scenes(STAGE)?;
        // Only scenes that yield a graph participate in the sweep.
        let usable: Vec<TrafficScene> = scenes
            .into_iter()
            .filter(|s| build_graph(s, &map, &self.config.gates).is_some())
            .collect();
        let ids: Vec<String> = usable.iter().map(|s| s.scene_id.clone()).collect();
        let labels = if have_labels {
            Some(read_labels_csv(&labels_path).map_err(|e| stage_error(STAGE, e))?)
        } else {
            None
        };
        let picked = sample_sweep_scenes(&ids, labels.as_deref(), self.config.sweep.scenes, seed);
        let sample: Vec<TrafficScene> = picked.iter().map(|&i| usable[i].clone()).collect();
        let rows = velocity_sweep(
            &params,
            &sample,
            &map,
            &self.config.gates,
            self.config.sweep.delta_v,
            self.config.sweep.steps,
        )
        .map_err(|e| stage_error(STAGE, e))?;
        write_sweep_csv(self.config.sweep_path(), &rows).map_err(|e| stage_error(STAGE, e))?;
        let scatter: Vec<(f64, f64, f64)> =
            rows.iter().map(|r| (r.sx, r.sy, r.step as f64)).collect();
        if !scatter.is_empty() {
            let tmp_csv = self.config.workdir.join("sweep_points.csv");
            scatter_export(&scatter, &tmp_csv, self.config.sweep_svg_path())
                .map_err(|e| stage_error(STAGE, e))?;
        }
        guard.record(BTreeMap::from([
            ("scenes".to_string(), json!(sample.len())),
            ("rows".to_string(), json!(rows.len())),
        ]))?;
        Ok(())
    }

    /// End-to-end gradient verification on synthetic graphs; returns the
    /// max relative error over the instances.
    pub fn gradcheck(&self, instances: usize) -> Result<f64, PipelineError> {
        const STAGE: &str = "gradcheck";
        let map = default_map();
        let gates = scg_core::scene::LaneGates::default();
        let mut worst = 0.0f64;
        let mut done = 0usize;
        let mut seed = self.config.seed;
        while done < instances {
            let archetype = Archetype::ALL[(seed % 4) as usize];
            let scene = generate_synthetic_scene(archetype, &map, seed)
                .map_err(|e| stage_error(STAGE, e))?;
            seed += 1;
            let Some(graph) = build_graph(&scene, &map, &gates) else {
                continue;
            };
            let params = init_params(mix_seed(self.config.seed, 7000 + done as u64));
            let err = grad_check(&params, &graph, 1e-5).map_err(|e| stage_error(STAGE, e))?;
            worst = worst.max(err);
            done += 1;
        }
        Ok(worst)
    }

    /// Runs every stage in order.
    pub fn run(&self) -> Result<(), PipelineError> {
        self.synth()?;
        self.ingest()?;
        self.augment()?;
        self.build_graphs()?;
        self.train()?;
        self.embed()?;
        self.cluster()?;
        self.stats()?;
        self.sweep()?;
        Ok(())
    }
}

/// Generates `count` scenes cycling through the archetype mix; returns the
/// scenes (ids `scene_<index>`) and their archetype labels.
pub fn synth_dataset(
    mix: &[Archetype],
    count: usize,
    map: &LaneMap,
    seed: u64,
) -> scg_core::Result<(Vec<TrafficScene>, Vec<(String, Archetype)>)> {
    let mut scenes = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let archetype = mix[i % mix.len()];
        let mut scene = generate_synthetic_scene(archetype, map, mix_seed(seed, i as u64))?;
        scene.scene_id = scene_id_for_frame(i as i64);
        scene.timestamp_ms = (i as i64) * 100;
        labels.push((scene.scene_id.clone(), archetype));
        scenes.push(scene);
    }
    Ok((scenes, labels))
}

pub fn write_archetype_labels(
    path: &std::path::Path,
    labels: &[(String, Archetype)],
) -> scg_core::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "scene_id,archetype")?;
    for (id, archetype) in labels {
        writeln!(out, "{id},{}", archetype.label())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_archetype_labels(
    path: &std::path::Path,
) -> scg_core::Result<Vec<(String, Archetype)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let (id, label) = line.split_once(',').ok_or_else(|| {
            scg_core::Error::validation(format!("archetype labels: bad line {}", i + 1))
        })?;
        let archetype = Archetype::from_label(label).ok_or_else(|| {
            scg_core::Error::validation(format!("unknown archetype {label:?} on line {}", i + 1))
        })?;
        rows.push((id.to_string(), archetype));
    }
    Ok(rows)
}

fn write_kdist_csv(path: &std::path::Path, kdist: &[f64]) -> scg_core::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "rank,k_distance")?;
    for (i, d) in kdist.iter().enumerate() {
        writeln!(out, "{i},{d}")?;
    }
    out.flush()?;
    Ok(())
}

fn write_stats_csv(
    path: &std::path::Path,
    stats: &[scg_core::analysis::SceneStatistics],
) -> scg_core::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(
        out,
        "scene_id,num_vehicles,mean_speed,num_edges,num_longitudinal,num_lateral,num_intersecting"
    )?;
    for s in stats {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.scene_id,
            s.num_vehicles,
            s.mean_speed,
            s.num_edges,
            s.num_longitudinal,
            s.num_lateral,
            s.num_intersecting
        )?;
    }
    out.flush()?;
    Ok(())
}
