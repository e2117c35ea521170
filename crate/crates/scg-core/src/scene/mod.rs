//! Object-list and lane-map data model with Frenet-frame geometry.
//!
//! A [`TrafficScene`] is one timestamped snapshot of entity states; a
//! [`LaneMap`] holds lanes as centerline polylines with successor,
//! adjacency and conflict relations. [`frenet`] provides the geometric
//! kernel (arc-length projection, lane assignment, path distances),
//! [`io`] the track-CSV / lane-map-JSON formats and [`synthetic`] the
//! deterministic scene generator used for tests and desk-scale runs.

pub mod frenet;
pub mod io;
pub mod synthetic;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2-D point in the map frame, meters.
pub type Point = [f64; 2];

/// Traffic participant class. Exactly four variants; the one-hot width of
/// node features is fixed at 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentType {
    Car,
    TruckBus,
    PedestrianBicycle,
    Other,
}

impl AgentType {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            AgentType::Car => 0,
            AgentType::TruckBus => 1,
            AgentType::PedestrianBicycle => 2,
            AgentType::Other => 3,
        }
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.index()] = 1.0;
        v
    }

    /// Canonical label used in the track CSV format.
    pub fn label(self) -> &'static str {
        match self {
            AgentType::Car => "car",
            AgentType::TruckBus => "truck_bus",
            AgentType::PedestrianBicycle => "pedestrian_bicycle",
            AgentType::Other => "other",
        }
    }

    /// Maps a track-file class string to an agent type. Returns `None` for
    /// unknown strings; callers map those to [`AgentType::Other`] and count
    /// them as warnings.
    pub fn from_label(label: &str) -> Option<Self> {
        match label.to_ascii_lowercase().as_str() {
            "car" => Some(AgentType::Car),
            "truck" | "bus" | "truck_bus" => Some(AgentType::TruckBus),
            "pedestrian" | "bicycle" | "pedestrian_bicycle" | "pedestrian/bicycle" => {
                Some(AgentType::PedestrianBicycle)
            }
            "other" => Some(AgentType::Other),
            _ => None,
        }
    }
}

/// Normalizes an angle into (-pi, pi].
pub fn normalize_yaw(yaw: f64) -> f64 {
    let r = yaw.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// State of one traffic participant at a single frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityState {
    pub entity_id: u64,
    /// Position in the map frame, meters.
    pub x: f64,
    pub y: f64,
    /// Velocity in the map frame, meters/second.
    pub vx: f64,
    pub vy: f64,
    /// Heading, radians in (-pi, pi].
    pub yaw: f64,
    /// Footprint, meters; both strictly positive.
    pub length: f64,
    pub width: f64,
    pub agent_type: AgentType,
}

impl EntityState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        entity_id: u64,
        x: f64,
        y: f64,
        vx: f64,
        vy: f64,
        yaw: f64,
        length: f64,
        width: f64,
        agent_type: AgentType,
    ) -> Result<Self> {
        if !(length > 0.0) || !(width > 0.0) {
            return Err(Error::validation(format!(
                "entity {entity_id}: footprint must be positive, got {length}x{width}"
            )));
        }
        Ok(EntityState {
            entity_id,
            x,
            y,
            vx,
            vy,
            yaw: normalize_yaw(yaw),
            length,
            width,
            agent_type,
        })
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn position(&self) -> Point {
        [self.x, self.y]
    }
}

/// One timestamped snapshot of a traffic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficScene {
    pub scene_id: String,
    pub timestamp_ms: i64,
    pub entities: Vec<EntityState>,
}

impl TrafficScene {
    pub fn new(
        scene_id: impl Into<String>,
        timestamp_ms: i64,
        entities: Vec<EntityState>,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        let mut seen = std::collections::BTreeSet::new();
        for e in &entities {
            if !seen.insert(e.entity_id) {
                return Err(Error::validation(format!(
                    "scene {scene_id}: duplicate entity id {}",
                    e.entity_id
                )));
            }
        }
        Ok(TrafficScene {
            scene_id,
            timestamp_ms,
            entities,
        })
    }
}

/// One lane: a centerline polyline plus topology relations. Relation ids
/// are resolved against the containing [`LaneMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub lane_id: String,
    /// Polyline of at least two points with strictly positive segment lengths.
    pub centerline: Vec<Point>,
    /// Lane width, meters, strictly positive.
    pub width: f64,
    pub successors: Vec<String>,
    pub left_adjacent: Option<String>,
    pub right_adjacent: Option<String>,
    /// Declared conflicts: (other lane id, s on this lane, s on the other lane).
    pub conflicts: Vec<(String, f64, f64)>,
}

impl Lane {
    pub fn new(lane_id: impl Into<String>, centerline: Vec<Point>, width: f64) -> Result<Self> {
        let lane = Lane {
            lane_id: lane_id.into(),
            centerline,
            width,
            successors: Vec::new(),
            left_adjacent: None,
            right_adjacent: None,
            conflicts: Vec::new(),
        };
        lane.validate_geometry()?;
        Ok(lane)
    }

    fn validate_geometry(&self) -> Result<()> {
        if self.centerline.len() < 2 {
            return Err(Error::validation(format!(
                "lane {}: centerline needs at least 2 points",
                self.lane_id
            )));
        }
        if !(self.width > 0.0) {
            return Err(Error::validation(format!(
                "lane {}: width must be positive, got {}",
                self.lane_id, self.width
            )));
        }
        for w in self.centerline.windows(2) {
            if w[0] == w[1] {
                return Err(Error::validation(format!(
                    "lane {}: consecutive centerline points must be distinct",
                    self.lane_id
                )));
            }
        }
        Ok(())
    }

    /// Total arc length of the centerline.
    pub fn total_length(&self) -> f64 {
        self.centerline
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }
}

/// Validated collection of lanes with referential integrity over all
/// successor/adjacency/conflict ids. Lanes iterate in lane-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneMap {
    lanes: BTreeMap<String, Lane>,
}

impl LaneMap {
    pub fn from_lanes(lanes: Vec<Lane>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for lane in lanes {
            lane.validate_geometry()?;
            let id = lane.lane_id.clone();
            if by_id.insert(id.clone(), lane).is_some() {
                return Err(Error::validation(format!("duplicate lane id {id}")));
            }
        }
        let map = LaneMap { lanes: by_id };
        map.validate_references()?;
        Ok(map)
    }

    fn validate_references(&self) -> Result<()> {
        let mut dangling = Vec::new();
        for lane in self.lanes.values() {
            let mut check = |id: &str| {
                if !self.lanes.contains_key(id) {
                    dangling.push(format!("{} -> {}", lane.lane_id, id));
                }
            };
            for s in &lane.successors {
                check(s);
            }
            if let Some(l) = &lane.left_adjacent {
                check(l);
            }
            if let Some(r) = &lane.right_adjacent {
                check(r);
            }
            for (c, _, _) in &lane.conflicts {
                check(c);
            }
        }
        if dangling.is_empty() {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "dangling lane references: {}",
                dangling.join(", ")
            )))
        }
    }

    pub fn get(&self, lane_id: &str) -> Option<&Lane> {
        self.lanes.get(lane_id)
    }

    pub fn lanes(&self) -> impl Iterator<Item = &Lane> {
        self.lanes.values()
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }
}

/// Lane-relative coordinates: `s` is arc length along the centerline,
/// `d` the signed lateral offset (left of travel direction positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrenetCoord {
    pub lane_id: String,
    pub s: f64,
    pub d: f64,
}

/// Gates for lane assignment and relation inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneGates {
    /// Maximum |d| for a lane candidate; `None` means per-lane
    /// `width / 2 + 0.5 m`.
    pub max_lateral: Option<f64>,
    /// Maximum angle between entity yaw and the local centerline tangent.
    pub max_heading: f64,
    /// Maximum successor hops for longitudinal relations.
    pub max_hops: usize,
}

impl Default for LaneGates {
    fn default() -> Self {
        LaneGates {
            max_lateral: None,
            max_heading: PI / 4.0,
            max_hops: 3,
        }
    }
}
