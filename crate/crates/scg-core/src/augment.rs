//! Positive-sample generation: Gaussian perturbation of entity positions
//! and velocities in Cartesian space, with bounded collision rejection and
//! off-road dropping against the lane map.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::scene::frenet::project_to_lanes;
use crate::scene::{normalize_yaw, EntityState, LaneGates, LaneMap, TrafficScene};

/// Name of the PRNG behind the augmentation draws; recorded in artifact
/// metadata so runs are reproducible by construction.
pub const PRNG_NAME: &str = "chacha8";

/// Speed above which yaw is realigned to the perturbed velocity direction.
pub const YAW_REALIGN_SPEED: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Position noise, meters.
    pub sigma_pos: f64,
    /// Velocity noise, meters/second.
    pub sigma_vel: f64,
    /// Per-entity selection probability.
    pub p_entity: f64,
    /// Redraws before a colliding entity falls back to its original state.
    pub max_retries: u32,
    pub rng_seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            sigma_pos: 1.5,
            sigma_vel: 2.0,
            p_entity: 0.5,
            max_retries: 10,
            rng_seed: 0,
        }
    }
}

/// True iff the yaw-oriented length x width rectangles of `a` and `b`
/// intersect (separating-axis test over the four candidate axes).
pub fn obb_overlap(a: &EntityState, b: &EntityState) -> bool {
    let axes = [
        [a.yaw.cos(), a.yaw.sin()],
        [-a.yaw.sin(), a.yaw.cos()],
        [b.yaw.cos(), b.yaw.sin()],
        [-b.yaw.sin(), b.yaw.cos()],
    ];
    let delta = [b.x - a.x, b.y - a.y];
    for axis in axes {
        let ra = a.length / 2.0 * (axis[0] * a.yaw.cos() + axis[1] * a.yaw.sin()).abs()
            + a.width / 2.0 * (-axis[0] * a.yaw.sin() + axis[1] * a.yaw.cos()).abs();
        let rb = b.length / 2.0 * (axis[0] * b.yaw.cos() + axis[1] * b.yaw.sin()).abs()
            + b.width / 2.0 * (-axis[0] * b.yaw.sin() + axis[1] * b.yaw.cos()).abs();
        let dist = (delta[0] * axis[0] + delta[1] * axis[1]).abs();
        if dist > ra + rb {
            return false;
        }
    }
    true
}

fn perturb(e: &EntityState, params: &AugmentParams, rng: &mut ChaCha8Rng) -> EntityState {
    let pos = Normal::new(0.0, params.sigma_pos).expect("sigma_pos >= 0");
    let vel = Normal::new(0.0, params.sigma_vel).expect("sigma_vel >= 0");
    let mut out = *e;
    out.x = e.x + pos.sample(rng);
    out.y = e.y + pos.sample(rng);
    out.vx = e.vx + vel.sample(rng);
    out.vy = e.vy + vel.sample(rng);
    if out.speed() > YAW_REALIGN_SPEED {
        out.yaw = normalize_yaw(out.vy.atan2(out.vx));
    }
    out
}

/// Augments one scene: each entity is independently selected with
/// probability `p_entity`; selected entities get Gaussian position and
/// velocity perturbations with yaw realigned to the new velocity direction
/// above 0.5 m/s. A perturbed footprint overlapping any already-placed
/// entity or any still-unprocessed original is redrawn up to `max_retries`
/// times, then the original state is kept. Selected entities whose final
/// position no longer projects onto a lane are dropped. Deterministic per
/// `params.rng_seed`.
pub fn augment_scene(
    scene: &TrafficScene,
    map: &LaneMap,
    params: &AugmentParams,
    gates: &LaneGates,
) -> TrafficScene {
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut placed: Vec<EntityState> = Vec::with_capacity(scene.entities.len());
    for (idx, entity) in scene.entities.iter().enumerate() {
        let selected = rng.random::<f64>() < params.p_entity;
        if !selected {
            placed.push(*entity);
            continue;
        }
        let pending = &scene.entities[idx + 1..];
        let collides = |cand: &EntityState| {
            placed.iter().any(|p| obb_overlap(cand, p))
                || pending.iter().any(|p| obb_overlap(cand, p))
        };
        let mut candidate = perturb(entity, params, &mut rng);
        let mut retries = 0;
        while collides(&candidate) && retries < params.max_retries {
            candidate = perturb(entity, params, &mut rng);
            retries += 1;
        }
        if collides(&candidate) {
            candidate = *entity;
        }
        if project_to_lanes(&candidate, map, gates).is_empty() {
            continue; // moved outside the road geometry
        }
        placed.push(candidate);
    }
    TrafficScene {
        scene_id: scene.scene_id.clone(),
        timestamp_ms: scene.timestamp_ms,
        entities: placed,
    }
}
