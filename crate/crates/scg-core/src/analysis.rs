//! Embedding-space studies: batch embedding export, per-scene statistics
//! for colored scatter plots and the velocity-increment sweep.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{forward, Embedding, EncoderParams};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::graph::{build_graph, RelationType, SceneGraph};
use crate::scene::{LaneGates, LaneMap, TrafficScene};

/// Embeds every graph; one row per input, order preserved.
pub fn embed_dataset(
    params: &EncoderParams,
    graphs: &[SceneGraph],
) -> Result<Vec<(String, Embedding)>> {
    let results = par_map(graphs, |g| forward(params, g).map(|(e, _)| e));
    graphs
        .iter()
        .zip(results)
        .map(|(g, r)| r.map(|e| (g.scene_id.clone(), e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneStatistics {
    pub scene_id: String,
    pub num_vehicles: usize,
    pub mean_speed: f64,
    pub num_edges: usize,
    pub num_longitudinal: usize,
    pub num_lateral: usize,
    pub num_intersecting: usize,
}

pub fn scene_statistics(scene: &TrafficScene, graph: &SceneGraph) -> SceneStatistics {
    let count_rel = |rel: RelationType| graph.edges.iter().filter(|e| e.relation == rel).count();
    let num_vehicles = scene.entities.len();
    let mean_speed = if num_vehicles == 0 {
        0.0
    } else {
        scene.entities.iter().map(|e| e.speed()).sum::<f64>() / num_vehicles as f64
    };
    SceneStatistics {
        scene_id: scene.scene_id.clone(),
        num_vehicles,
        mean_speed,
        num_edges: graph.edges.len(),
        num_longitudinal: count_rel(RelationType::Longitudinal),
        num_lateral: count_rel(RelationType::Lateral),
        num_intersecting: count_rel(RelationType::Intersecting),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scene_id: String,
    /// Velocity increment step; 0 is the unmodified scene.
    pub step: u32,
    pub sx: f64,
    pub sy: f64,
}

/// Returns the scene with every entity's speed incremented by `delta`,
/// direction preserved. Stationary entities point along their yaw.
fn increment_speeds(scene: &TrafficScene, delta: f64) -> TrafficScene {
    let mut out = scene.clone();
    for e in &mut out.entities {
        let speed = e.speed();
        if speed == 0.0 {
            e.vx = delta * e.yaw.cos();
            e.vy = delta * e.yaw.sin();
        } else {
            let factor = (speed + delta) / speed;
            e.vx *= factor;
            e.vy *= factor;
        }
    }
    out
}

/// For each scene, embeds the original plus `steps` versions with all
/// velocities incremented by `delta_v` each step (`steps + 1` rows per
/// scene). A step whose rebuilt graph is edgeless is recorded as a missing
/// row, not an error. Step 0 reuses the unmodified scene, so its rows match
/// [`embed_dataset`] bit-exactly.
pub fn velocity_sweep(
    params: &EncoderParams,
    scenes: &[TrafficScene],
    map: &LaneMap,
    gates: &LaneGates,
    delta_v: f64,
    steps: u32,
) -> Result<Vec<SweepRow>> {
    let per_scene = par_map(scenes, |scene| -> Result<Vec<SweepRow>> {
        let mut rows = Vec::with_capacity(steps as usize + 1);
        for step in 0..=steps {
            let stepped = if step == 0 {
                scene.clone()
            } else {
                increment_speeds(scene, step as f64 * delta_v)
            };
            let Some(graph) = build_graph(&stepped, map, gates) else {
                continue; // edgeless after the increment: missing row
            };
            let (emb, _) = forward(params, &graph)?;
            rows.push(SweepRow {
                scene_id: scene.scene_id.clone(),
                step,
                sx: emb.sx,
                sy: emb.sy,
            });
        }
        Ok(rows)
    });
    let mut out = Vec::new();
    for rows in per_scene {
        out.extend(rows?);
    }
    Ok(out)
}

/// Seeded sample of `count` scene indices for the sweep: uniform over
/// distinct clusters when labels are supplied (round-robin over clusters,
/// noise excluded), else uniform over all scenes.
pub fn sample_sweep_scenes(
    scene_ids: &[String],
    labels: Option<&[(String, i32)]>,
    count: usize,
    seed: u64,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = count.min(scene_ids.len());
    match labels {
        None => {
            let mut indices: Vec<usize> = (0..scene_ids.len()).collect();
            indices.shuffle(&mut rng);
            indices.truncate(count);
            indices.sort_unstable();
            indices
        }
        Some(labels) => {
            let label_of: std::collections::BTreeMap<&str, i32> = labels
                .iter()
                .map(|(id, l)| (id.as_str(), *l))
                .collect();
            let mut by_cluster: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
            for (i, id) in scene_ids.iter().enumerate() {
                match label_of.get(id.as_str()) {
                    Some(&l) if l >= 0 => by_cluster.entry(l).or_default().push(i),
                    _ => {}
                }
            }
            let mut buckets: Vec<Vec<usize>> = by_cluster.into_values().collect();
            for bucket in &mut buckets {
                bucket.shuffle(&mut rng);
            }
            let mut picked = Vec::new();
            let mut round = 0;
            while picked.len() < count {
                let mut any = false;
                for bucket in &buckets {
                    if let Some(&idx) = bucket.get(round) {
                        picked.push(idx);
                        any = true;
                        if picked.len() == count {
                            break;
                        }
                    }
                }
                if !any {
                    break;
                }
                round += 1;
            }
            picked.sort_unstable();
            picked
        }
    }
}

pub fn write_embeddings_csv(
    path: impl AsRef<Path>,
    rows: &[(String, Embedding)],
) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    writeln!(out, "scene_id,sx,sy")?;
    for (id, e) in rows {
        writeln!(out, "{id},{},{}", e.sx, e.sy)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_embeddings_csv(path: impl AsRef<Path>) -> Result<Vec<(String, Embedding)>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| Error::validation("embeddings: short row"))
        };
        let id = get(0)?.to_string();
        let sx: f64 = get(1)?
            .parse()
            .map_err(|e| Error::validation(format!("embeddings: bad sx: {e}")))?;
        let sy: f64 = get(2)?
            .parse()
            .map_err(|e| Error::validation(format!("embeddings: bad sy: {e}")))?;
        rows.push((id, Embedding { sx, sy }));
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    writeln!(out, "scene_id,step,sx,sy")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.scene_id, r.step, r.sx, r.sy)?;
    }
    out.flush()?;
    Ok(())
}

fn color_ramp(t: f64) -> (u8, u8, u8) {
    // Three-stop ramp, dark blue -> green -> yellow.
    let stops = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let (a, b, frac) = if t <= 1.0 {
        (stops[0], stops[1], t)
    } else {
        (stops[1], stops[2], t - 1.0)
    };
    (
        (a.0 + (b.0 - a.0) * frac).round() as u8,
        (a.1 + (b.1 - a.1) * frac).round() as u8,
        (a.2 + (b.2 - a.2) * frac).round() as u8,
    )
}

/// Writes a `sx,sy,value` CSV and a self-contained SVG scatter with a
/// continuous color ramp over the axis range [-1, 1]^2. Rows outside that
/// box are rejected: embeddings cannot leave the tanh range.
pub fn scatter_export(
    rows: &[(f64, f64, f64)],
    csv_path: impl AsRef<Path>,
    svg_path: impl AsRef<Path>,
) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::contract("scatter_export needs at least one row"));
    }
    for &(sx, sy, _) in rows {
        if !(-1.0..=1.0).contains(&sx) || !(-1.0..=1.0).contains(&sy) {
            return Err(Error::contract(format!(
                "point ({sx}, {sy}) outside [-1, 1]^2"
            )));
        }
    }

    let file = File::create(csv_path.as_ref())?;
    let mut out = BufWriter::new(file);
    writeln!(out, "sx,sy,value")?;
    for (sx, sy, v) in rows {
        writeln!(out, "{sx},{sy},{v}")?;
    }
    out.flush()?;

    let (vmin, vmax) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, r| {
        (acc.0.min(r.2), acc.1.max(r.2))
    });
    let norm = |v: f64| {
        if vmax > vmin {
            (v - vmin) / (vmax - vmin)
        } else {
            0.5
        }
    };

    let size = 640.0;
    let margin = 40.0;
    let plot = size - 2.0 * margin;
    let to_px = |x: f64| margin + (x + 1.0) / 2.0 * plot;
    let to_py = |y: f64| margin + (1.0 - y) / 2.0 * plot;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"{margin}\" y=\"{margin}\" width=\"{plot}\" height=\"{plot}\" fill=\"white\" stroke=\"black\"/>\n"
    ));
    // Zero axes.
    svg.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{margin}\" x2=\"{}\" y2=\"{}\" stroke=\"#cccccc\"/>\n",
        to_px(0.0),
        to_px(0.0),
        margin + plot
    ));
    svg.push_str(&format!(
        "  <line x1=\"{margin}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#cccccc\"/>\n",
        to_py(0.0),
        margin + plot,
        to_py(0.0)
    ));
    for (label, x, y) in [
        ("-1", margin, size - margin / 4.0),
        ("1", size - margin, size - margin / 4.0),
    ] {
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"middle\">{label}</text>\n"
        ));
    }
    for &(sx, sy, v) in rows {
        let (r, g, b) = color_ramp(norm(v));
        svg.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"rgb({r},{g},{b})\" fill-opacity=\"0.8\"/>\n",
            to_px(sx),
            to_py(sy)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(svg_path.as_ref(), svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_params;
    use crate::graph::build_graph;
    use crate::scene::synthetic::{default_map, generate_synthetic_scene, Archetype};
    use crate::scene::EntityState;

    fn scenes_and_graphs(n: usize) -> (LaneMap, Vec<TrafficScene>, Vec<SceneGraph>) {
        let map = default_map();
        let gates = LaneGates::default();
        let mut scenes = Vec::new();
        let mut graphs = Vec::new();
        for seed in 0..n as u64 {
            let archetype = Archetype::ALL[(seed % 4) as usize];
            let scene = generate_synthetic_scene(archetype, &map, seed).unwrap();
            if let Some(g) = build_graph(&scene, &map, &gates) {
                scenes.push(scene);
                graphs.push(g);
            }
        }
        (map, scenes, graphs)
    }

    #[test]
    fn zero_checkpoint_embeds_everything_at_origin() {
        let (_, _, graphs) = scenes_and_graphs(6);
        let rows = embed_dataset(&crate::encoder::EncoderParams::zeros(), &graphs).unwrap();
        assert_eq!(rows.len(), graphs.len());
        for (_, e) in rows {
            assert_eq!((e.sx, e.sy), (0.0, 0.0));
        }
    }

    #[test]
    fn duplicated_and_permuted_inputs_map_consistently() {
        let (_, _, graphs) = scenes_and_graphs(5);
        let params = init_params(3);
        let mut doubled = graphs.clone();
        doubled.extend(graphs.iter().cloned());
        let rows = embed_dataset(&params, &doubled).unwrap();
        for i in 0..graphs.len() {
            assert_eq!(rows[i], rows[i + graphs.len()]);
        }
        let mut reversed = graphs.clone();
        reversed.reverse();
        let fwd = embed_dataset(&params, &graphs).unwrap();
        let mut rev = embed_dataset(&params, &reversed).unwrap();
        rev.reverse();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn statistics_count_edges_by_type() {
        let (map, scenes, graphs) = scenes_and_graphs(8);
        let gates = LaneGates::default();
        for (scene, graph) in scenes.iter().zip(&graphs) {
            let stats = scene_statistics(scene, graph);
            assert_eq!(stats.num_vehicles, scene.entities.len());
            assert_eq!(
                stats.num_edges,
                stats.num_longitudinal + stats.num_lateral + stats.num_intersecting
            );
            assert!(stats.mean_speed >= 0.0);
            let rebuilt = build_graph(scene, &map, &gates).unwrap();
            assert_eq!(rebuilt.edges.len(), stats.num_edges);
        }
    }

    #[test]
    fn stationary_scene_has_zero_mean_speed() {
        let map = default_map();
        let gates = LaneGates::default();
        let entities = vec![
            EntityState::new(1, 5.0, 0.0, 0.0, 0.0, 0.0, 4.0, 2.0, crate::scene::AgentType::Car)
                .unwrap(),
            EntityState::new(2, 12.0, 0.0, 0.0, 0.0, 0.0, 4.0, 2.0, crate::scene::AgentType::Car)
                .unwrap(),
        ];
        let scene = TrafficScene::new("still", 0, entities).unwrap();
        let graph = build_graph(&scene, &map, &gates).unwrap();
        let stats = scene_statistics(&scene, &graph);
        assert_eq!(stats.mean_speed, 0.0);
    }

    #[test]
    fn sweep_with_zero_delta_repeats_the_same_embedding() {
        let (map, scenes, _) = scenes_and_graphs(4);
        let params = init_params(5);
        let gates = LaneGates::default();
        let rows = velocity_sweep(&params, &scenes[..2], &map, &gates, 0.0, 10).unwrap();
        for scene in &scenes[..2] {
            let scene_rows: Vec<&SweepRow> =
                rows.iter().filter(|r| r.scene_id == scene.scene_id).collect();
            assert_eq!(scene_rows.len(), 11);
            for r in &scene_rows {
                assert_eq!(r.sx.to_bits(), scene_rows[0].sx.to_bits());
                assert_eq!(r.sy.to_bits(), scene_rows[0].sy.to_bits());
            }
        }
    }

    #[test]
    fn sweep_step_zero_matches_embed_dataset_bit_exactly() {
        let (map, scenes, graphs) = scenes_and_graphs(6);
        let params = init_params(6);
        let gates = LaneGates::default();
        let embedded = embed_dataset(&params, &graphs).unwrap();
        let rows = velocity_sweep(&params, &scenes, &map, &gates, 0.5, 10).unwrap();
        for (id, e) in &embedded {
            let row = rows
                .iter()
                .find(|r| &r.scene_id == id && r.step == 0)
                .expect("step-0 row present");
            assert_eq!(row.sx.to_bits(), e.sx.to_bits());
            assert_eq!(row.sy.to_bits(), e.sy.to_bits());
        }
        assert!(rows.len() <= scenes.len() * 11);
        for r in &rows {
            assert!(r.sx > -1.0 && r.sx < 1.0);
            assert!(r.sy > -1.0 && r.sy < 1.0);
        }
    }

    #[test]
    fn sweep_sampling_covers_clusters() {
        let ids: Vec<String> = (0..30).map(|i| format!("s{i}")).collect();
        let labels: Vec<(String, i32)> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), if i < 3 { -1 } else { (i % 3) as i32 }))
            .collect();
        let picked = sample_sweep_scenes(&ids, Some(&labels), 6, 7);
        assert_eq!(picked.len(), 6);
        // Noise-only scenes are never picked.
        assert!(picked.iter().all(|&i| i >= 3));
        let again = sample_sweep_scenes(&ids, Some(&labels), 6, 7);
        assert_eq!(picked, again);
        let unlabeled = sample_sweep_scenes(&ids, None, 50, 1);
        assert_eq!(unlabeled.len(), 30);
    }

    #[test]
    fn scatter_writes_one_marker_per_row() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("scatter.csv");
        let svg_path = dir.path().join("scatter.svg");
        scatter_export(&[(0.0, 0.0, 1.0)], &csv_path, &svg_path).unwrap();
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        let csv = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(csv, "sx,sy,value\n0,0,1\n");
    }

    #[test]
    fn scatter_rejects_out_of_range_rows() {
        let dir = tempfile::tempdir().unwrap();
        let err = scatter_export(
            &[(1.5, 0.0, 1.0)],
            dir.path().join("s.csv"),
            dir.path().join("s.svg"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn embeddings_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        let rows = vec![
            ("a".to_string(), Embedding { sx: 0.125, sy: -0.5 }),
            ("b".to_string(), Embedding { sx: 1.0 / 3.0, sy: 0.99 }),
        ];
        write_embeddings_csv(&path, &rows).unwrap();
        assert_eq!(read_embeddings_csv(&path).unwrap(), rows);
    }
}
