//! Track CSV and lane-map JSON formats.
//!
//! The track CSV matches the INTERACTION column layout
//! (`track_id,frame_id,timestamp_ms,agent_type,x,y,vx,vy,psi_rad,length,width`)
//! so recorded data drops in directly. Floats are written with the shortest
//! round-trip representation, so save -> load is bit-exact on all numeric
//! fields.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{AgentType, EntityState, Lane, LaneMap, Point, TrafficScene};

pub const TRACK_HEADER: [&str; 11] = [
    "track_id",
    "frame_id",
    "timestamp_ms",
    "agent_type",
    "x",
    "y",
    "vx",
    "vy",
    "psi_rad",
    "length",
    "width",
];

/// Result of loading a track file: scenes in frame order plus the number of
/// rows whose agent class string was unknown (mapped to [`AgentType::Other`]).
#[derive(Debug, Clone)]
pub struct TrackLoad {
    pub scenes: Vec<TrafficScene>,
    pub unknown_agent_labels: usize,
}

#[derive(Debug, Deserialize)]
struct TrackRow {
    track_id: u64,
    frame_id: i64,
    timestamp_ms: i64,
    agent_type: String,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    psi_rad: f64,
    length: f64,
    width: f64,
}

/// Scene id derived from a frame id; [`save_tracks`] reverses the mapping.
pub fn scene_id_for_frame(frame_id: i64) -> String {
    format!("scene_{frame_id:06}")
}

fn frame_for_scene_id(scene_id: &str, fallback: i64) -> i64 {
    scene_id
        .strip_prefix("scene_")
        .and_then(|s| s.parse::<i64>().ok())
        .unwrap_or(fallback)
}

/// Loads a track CSV and groups rows into one [`TrafficScene`] per retained
/// frame. Frames are sorted by frame id and every `frame_stride`-th one is
/// kept (stride 1 keeps all).
pub fn load_tracks(path: impl AsRef<Path>, frame_stride: usize) -> Result<TrackLoad> {
    let path = path.as_ref();
    if frame_stride == 0 {
        return Err(Error::contract("frame_stride must be >= 1"));
    }
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    {
        let headers = reader.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != TRACK_HEADER {
            return Err(Error::validation(format!(
                "{}: unexpected header {:?}, want {:?}",
                path.display(),
                got,
                TRACK_HEADER
            )));
        }
    }

    let mut unknown = 0usize;
    let mut frames: std::collections::BTreeMap<i64, (i64, Vec<EntityState>)> =
        std::collections::BTreeMap::new();
    for record in reader.deserialize::<TrackRow>() {
        let row = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::MalformedRow {
                path: path.display().to_string(),
                line,
                msg: e.to_string(),
            }
        })?;
        let agent_type = match AgentType::from_label(&row.agent_type) {
            Some(t) => t,
            None => {
                unknown += 1;
                AgentType::Other
            }
        };
        let entity = EntityState::new(
            row.track_id,
            row.x,
            row.y,
            row.vx,
            row.vy,
            row.psi_rad,
            row.length,
            row.width,
            agent_type,
        )?;
        frames
            .entry(row.frame_id)
            .or_insert_with(|| (row.timestamp_ms, Vec::new()))
            .1
            .push(entity);
    }

    let mut scenes = Vec::new();
    for (idx, (frame_id, (timestamp_ms, entities))) in frames.into_iter().enumerate() {
        if idx % frame_stride != 0 {
            continue;
        }
        scenes.push(TrafficScene::new(
            scene_id_for_frame(frame_id),
            timestamp_ms,
            entities,
        )?);
    }
    Ok(TrackLoad {
        scenes,
        unknown_agent_labels: unknown,
    })
}

/// Writes scenes in the track CSV format. Scene ids of the form
/// `scene_<frame>` keep their frame id; other ids get the scene index.
pub fn save_tracks(path: impl AsRef<Path>, scenes: &[TrafficScene]) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", TRACK_HEADER.join(","))?;
    for (idx, scene) in scenes.iter().enumerate() {
        let frame_id = frame_for_scene_id(&scene.scene_id, idx as i64);
        for e in &scene.entities {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.entity_id,
                frame_id,
                scene.timestamp_ms,
                e.agent_type.label(),
                e.x,
                e.y,
                e.vx,
                e.vy,
                e.yaw,
                e.length,
                e.width
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct LaneMapFile {
    lanes: Vec<LaneFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LaneFile {
    id: String,
    width: f64,
    centerline: Vec<Point>,
    #[serde(default)]
    successors: Vec<String>,
    #[serde(default)]
    left: Option<String>,
    #[serde(default)]
    right: Option<String>,
    #[serde(default)]
    conflicts: Vec<(String, f64, f64)>,
}

/// Loads and validates a lane map from the JSON format.
pub fn load_lane_map(path: impl AsRef<Path>) -> Result<LaneMap> {
    let file = File::open(path.as_ref())?;
    let parsed: LaneMapFile = serde_json::from_reader(BufReader::new(file))?;
    let lanes = parsed
        .lanes
        .into_iter()
        .map(|l| {
            let mut lane = Lane::new(l.id, l.centerline, l.width)?;
            lane.successors = l.successors;
            lane.left_adjacent = l.left;
            lane.right_adjacent = l.right;
            lane.conflicts = l.conflicts;
            Ok(lane)
        })
        .collect::<Result<Vec<_>>>()?;
    LaneMap::from_lanes(lanes)
}

pub fn save_lane_map(path: impl AsRef<Path>, map: &LaneMap) -> Result<()> {
    let lanes = map
        .lanes()
        .map(|lane| LaneFile {
            id: lane.lane_id.clone(),
            width: lane.width,
            centerline: lane.centerline.clone(),
            successors: lane.successors.clone(),
            left: lane.left_adjacent.clone(),
            right: lane.right_adjacent.clone(),
            conflicts: lane.conflicts.clone(),
        })
        .collect();
    let file = File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &LaneMapFile { lanes })?;
    out.flush()?;
    Ok(())
}
