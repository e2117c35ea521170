//! Deterministic synthetic scenes for tests and desk-scale experiments.
//!
//! Four archetypes mirror recurring traffic-scene patterns: a slow jam
//! chain, sparse free flow, ordinary car following and a mixed scene with
//! one parked vehicle. Same seed, same scene.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::frenet::reconstruct;
use crate::scene::{AgentType, EntityState, Lane, LaneMap, TrafficScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Archetype {
    JamChain,
    Sparse,
    Following,
    ParkedMixed,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [
        Archetype::JamChain,
        Archetype::Sparse,
        Archetype::Following,
        Archetype::ParkedMixed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Archetype::JamChain => "jam_chain",
            Archetype::Sparse => "sparse",
            Archetype::Following => "following",
            Archetype::ParkedMixed => "parked_mixed",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Archetype::ALL.into_iter().find(|a| a.label() == label)
    }
}

/// Two parallel adjacent successor chains plus one crossing lane; enough
/// topology for longitudinal, lateral and intersecting relations.
pub fn default_map() -> LaneMap {
    let mut lanes = Vec::new();
    for i in 0..4 {
        let x0 = 60.0 * i as f64;
        let x1 = x0 + 60.0;
        let mut a = Lane::new(format!("a{i}"), vec![[x0, 0.0], [x1, 0.0]], 3.6).unwrap();
        let mut b = Lane::new(format!("b{i}"), vec![[x0, 3.6], [x1, 3.6]], 3.6).unwrap();
        if i < 3 {
            a.successors.push(format!("a{}", i + 1));
            b.successors.push(format!("b{}", i + 1));
        }
        a.left_adjacent = Some(format!("b{i}"));
        b.right_adjacent = Some(format!("a{i}"));
        lanes.push(a);
        lanes.push(b);
    }
    lanes.push(Lane::new("c0", vec![[150.0, -20.0], [150.0, 20.0]], 3.6).unwrap());
    LaneMap::from_lanes(lanes).unwrap()
}

/// The longest-prefix successor chain starting from the lexicographically
/// smallest lane without predecessors.
fn main_chain(map: &LaneMap) -> Vec<&Lane> {
    let has_predecessor: std::collections::BTreeSet<&str> = map
        .lanes()
        .flat_map(|l| l.successors.iter().map(|s| s.as_str()))
        .collect();
    let start = map
        .lanes()
        .find(|l| !has_predecessor.contains(l.lane_id.as_str()))
        .or_else(|| map.lanes().next())
        .expect("map nonempty");
    let mut chain = vec![start];
    let mut seen: std::collections::BTreeSet<&str> = [start.lane_id.as_str()].into();
    let mut current = start;
    while let Some(next_id) = current.successors.iter().min() {
        let Some(next) = map.get(next_id) else { break };
        if !seen.insert(next.lane_id.as_str()) {
            break;
        }
        chain.push(next);
        current = next;
    }
    chain
}

/// Places a pose at chain arc length `s` with lateral offset `d`.
fn pose_on_chain(chain: &[&Lane], s: f64, d: f64) -> Result<([f64; 2], f64)> {
    let mut remaining = s;
    for lane in chain {
        let len = lane.total_length();
        if remaining <= len {
            let point = reconstruct(&lane.centerline, remaining, d)?;
            // Tangent of the containing segment.
            let mut acc = 0.0;
            let mut yaw = 0.0;
            for w in lane.centerline.windows(2) {
                let seg = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
                yaw = (w[1][1] - w[0][1]).atan2(w[1][0] - w[0][0]);
                if acc + seg >= remaining {
                    break;
                }
                acc += seg;
            }
            return Ok((point, yaw));
        }
        remaining -= len;
    }
    Err(Error::contract(format!("chain arc length exceeded at s={s}")))
}

struct Placement {
    gap_range: (f64, f64),
    speed_range: (f64, f64),
    count_range: (usize, usize),
}

// Speed bands and entity counts are kept disjoint between archetypes so
// the four patterns are separable; within an archetype only continuous
// draws vary, which keeps each pattern one connected region in feature
// space instead of one island per entity count.
fn placement(archetype: Archetype) -> Placement {
    match archetype {
        Archetype::JamChain => Placement {
            gap_range: (6.0, 9.0),
            speed_range: (0.3, 1.5),
            count_range: (5, 10),
        },
        Archetype::Sparse => Placement {
            gap_range: (20.0, 35.0),
            speed_range: (9.0, 14.0),
            count_range: (2, 2),
        },
        Archetype::Following => Placement {
            gap_range: (10.0, 16.0),
            speed_range: (4.5, 7.0),
            count_range: (3, 3),
        },
        Archetype::ParkedMixed => Placement {
            gap_range: (8.0, 14.0),
            speed_range: (2.0, 4.0),
            count_range: (4, 4),
        },
    }
}

/// Generates one scene of the given archetype on the map's main successor
/// chain. Deterministic for a given seed.
pub fn generate_synthetic_scene(
    archetype: Archetype,
    map: &LaneMap,
    rng_seed: u64,
) -> Result<TrafficScene> {
    if map.is_empty() {
        return Err(Error::contract("map must be nonempty"));
    }
    let chain = main_chain(map);
    let chain_len: f64 = chain.iter().map(|l| l.total_length()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let spec = placement(archetype);

    let count = rng.random_range(spec.count_range.0..=spec.count_range.1);
    let worst_span = 2.0 + spec.gap_range.1 * count as f64;
    if chain_len < worst_span {
        return Err(Error::validation(format!(
            "map too short for {}: chain length {chain_len:.1} m < required {worst_span:.1} m",
            archetype.label()
        )));
    }

    let mut entities = Vec::with_capacity(count);
    let mut s = rng.random_range(2.0..8.0);
    // The parked vehicle stands one lane over (left adjacent in the default
    // map), so parked scenes carry lateral edges on top of the chain.
    let parked_index = match archetype {
        Archetype::ParkedMixed => rng.random_range(0..count),
        _ => usize::MAX,
    };
    for i in 0..count {
        let parked = i == parked_index;
        let d = if parked {
            3.6
        } else {
            rng.random_range(-0.3..0.3)
        };
        let (point, lane_yaw) = pose_on_chain(&chain, s, d)?;
        let speed = if parked {
            0.0
        } else {
            rng.random_range(spec.speed_range.0..spec.speed_range.1)
        };
        let truck = matches!(archetype, Archetype::ParkedMixed | Archetype::Following)
            && rng.random_range(0.0..1.0) < 0.15;
        let (agent_type, length, width) = if truck && !parked {
            (AgentType::TruckBus, 9.0, 2.5)
        } else {
            (AgentType::Car, 4.5, 1.9)
        };
        entities.push(EntityState::new(
            (i + 1) as u64,
            point[0],
            point[1],
            speed * lane_yaw.cos(),
            speed * lane_yaw.sin(),
            lane_yaw,
            length,
            width,
            agent_type,
        )?);
        s += rng.random_range(spec.gap_range.0..spec.gap_range.1);
    }

    TrafficScene::new(
        format!("{}_{rng_seed:08x}", archetype.label()),
        0,
        entities,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::frenet::{project_to_lanes, LaneAssignment};
    use crate::scene::LaneGates;

    #[test]
    fn deterministic_per_seed() {
        let map = default_map();
        let a = generate_synthetic_scene(Archetype::JamChain, &map, 7).unwrap();
        let b = generate_synthetic_scene(Archetype::JamChain, &map, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_scene(Archetype::JamChain, &map, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn jam_chain_contract() {
        let map = default_map();
        for seed in 0..20 {
            let scene = generate_synthetic_scene(Archetype::JamChain, &map, seed).unwrap();
            assert!(scene.entities.len() >= 5 && scene.entities.len() <= 10);
            for e in &scene.entities {
                assert!(e.speed() < 2.0, "jam speed {}", e.speed());
            }
        }
    }

    #[test]
    fn parked_mixed_has_exactly_one_stationary_entity() {
        let map = default_map();
        for seed in 0..20 {
            let scene = generate_synthetic_scene(Archetype::ParkedMixed, &map, seed).unwrap();
            let parked = scene.entities.iter().filter(|e| e.speed() == 0.0).count();
            assert_eq!(parked, 1);
        }
    }

    #[test]
    fn entities_project_onto_the_map() {
        let map = default_map();
        let gates = LaneGates::default();
        for archetype in Archetype::ALL {
            let scene = generate_synthetic_scene(archetype, &map, 42).unwrap();
            for e in &scene.entities {
                let got: Vec<LaneAssignment> = project_to_lanes(e, &map, &gates);
                assert!(!got.is_empty(), "{} entity off-road", archetype.label());
            }
        }
    }

    #[test]
    fn short_map_yields_descriptive_error() {
        let map =
            LaneMap::from_lanes(vec![Lane::new("a", vec![[0.0, 0.0], [5.0, 0.0]], 3.6).unwrap()])
                .unwrap();
        let err = generate_synthetic_scene(Archetype::JamChain, &map, 1).unwrap_err();
        assert!(err.to_string().contains("too short"));
    }
}
