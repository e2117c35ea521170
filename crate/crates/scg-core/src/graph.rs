//! Semantic scene graphs: 6-dim node features, directed typed edges with
//! 7-dim features, built from a scene plus lane map. Edgeless graphs are
//! rejected (returned as `None`) because they carry no interaction signal.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::frenet::{frenet_distance_along, lanes_conflict, project_to_lanes, LaneAssignment};
use crate::scene::{EntityState, LaneGates, LaneMap, TrafficScene};

pub const NODE_FEATURE_DIM: usize = 6;
pub const EDGE_FEATURE_DIM: usize = 7;

/// Relation between two traffic participants, derived from lane topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationType {
    /// Same lane or connected via successor hops.
    Longitudinal,
    /// Adjacent parallel lanes.
    Lateral,
    /// Crossing or merging lanes.
    Intersecting,
}

impl RelationType {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            RelationType::Longitudinal => 0,
            RelationType::Lateral => 1,
            RelationType::Intersecting => 2,
        }
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }
}

/// Directed edge between node indices, with feature layout
/// `[one_hot(relation) x3, frenet_path_distance, centerline_dist_src,
/// centerline_dist_dst, edge_probability]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    pub relation: RelationType,
    pub features: [f64; EDGE_FEATURE_DIM],
}

/// Scene graph: node feature layout is
/// `[speed, yaw, one_hot(agent_type) x4]`; nodes follow scene entity order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub scene_id: String,
    pub node_features: Vec<[f64; NODE_FEATURE_DIM]>,
    pub node_entity_ids: Vec<u64>,
    pub edges: Vec<GraphEdge>,
}

impl SceneGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_features.len() != self.node_entity_ids.len() {
            return Err(Error::validation(format!(
                "graph {}: {} feature rows vs {} entity ids",
                self.scene_id,
                self.node_features.len(),
                self.node_entity_ids.len()
            )));
        }
        if self.num_nodes() < 2 || self.edges.is_empty() {
            return Err(Error::validation(format!(
                "graph {}: needs >= 2 nodes and a nonempty edge list",
                self.scene_id
            )));
        }
        for e in &self.edges {
            if e.src >= self.num_nodes() || e.dst >= self.num_nodes() || e.src == e.dst {
                return Err(Error::validation(format!(
                    "graph {}: bad edge {} -> {}",
                    self.scene_id, e.src, e.dst
                )));
            }
        }
        Ok(())
    }
}

/// Node features of one entity: `[speed, yaw, one_hot(agent_type)]`.
pub fn node_features(e: &EntityState) -> [f64; NODE_FEATURE_DIM] {
    let oh = e.agent_type.one_hot();
    [e.speed(), e.yaw, oh[0], oh[1], oh[2], oh[3]]
}

/// One inferred pairwise relation, in entity-id terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub src_entity: u64,
    pub dst_entity: u64,
    pub relation: RelationType,
    /// Longitudinal/lateral: signed distance src -> dst. Intersecting:
    /// signed distance of src to the conflict point; the reverse edge holds
    /// dst's distance.
    pub frenet_path_distance: f64,
    pub d_src: f64,
    pub d_dst: f64,
    pub probability: f64,
}

fn best_assignment(
    entity: &EntityState,
    map: &LaneMap,
    gates: &LaneGates,
) -> Option<LaneAssignment> {
    let candidates = project_to_lanes(entity, map, gates);
    candidates
        .into_iter()
        .reduce(|best, c| if c.score > best.score { c } else { best })
}

/// Infers typed relations for every ordered entity pair using each entity's
/// best lane assignment. Both directions of a detected relation are emitted;
/// longitudinal and lateral distances flip sign, intersecting edges each
/// carry their own source's distance to the conflict point. Entities without
/// a lane assignment produce no relations.
pub fn infer_relations(scene: &TrafficScene, map: &LaneMap, gates: &LaneGates) -> Vec<Relation> {
    let assignments: Vec<Option<LaneAssignment>> = scene
        .entities
        .iter()
        .map(|e| best_assignment(e, map, gates))
        .collect();

    let mut relations = Vec::new();
    for (i, ai) in assignments.iter().enumerate() {
        let Some(ai) = ai else { continue };
        for (j, aj) in assignments.iter().enumerate() {
            if i == j {
                continue;
            }
            let Some(aj) = aj else { continue };
            let lane_i = map.get(&ai.coord.lane_id).expect("validated map");
            let lane_j = map.get(&aj.coord.lane_id).expect("validated map");
            let probability = ai.score * aj.score;
            let base = Relation {
                src_entity: scene.entities[i].entity_id,
                dst_entity: scene.entities[j].entity_id,
                relation: RelationType::Longitudinal,
                frenet_path_distance: 0.0,
                d_src: ai.coord.d,
                d_dst: aj.coord.d,
                probability,
            };

            if let Some(dist) = frenet_distance_along(map, &ai.coord, &aj.coord, gates.max_hops) {
                relations.push(Relation {
                    frenet_path_distance: dist,
                    ..base.clone()
                });
            }

            if lane_i.lane_id != lane_j.lane_id {
                let adjacent = lane_i.left_adjacent.as_deref() == Some(&lane_j.lane_id)
                    || lane_i.right_adjacent.as_deref() == Some(&lane_j.lane_id)
                    || lane_j.left_adjacent.as_deref() == Some(&lane_i.lane_id)
                    || lane_j.right_adjacent.as_deref() == Some(&lane_i.lane_id);
                if adjacent {
                    let len_i = lane_i.total_length();
                    let len_j = lane_j.total_length();
                    // s difference through normalized arc positions scaled
                    // by the mean length; antisymmetric by construction.
                    let dist =
                        (aj.coord.s / len_j - ai.coord.s / len_i) * (len_i + len_j) / 2.0;
                    relations.push(Relation {
                        relation: RelationType::Lateral,
                        frenet_path_distance: dist,
                        ..base.clone()
                    });
                }

                if let Some((s_i, _s_j)) = lanes_conflict(lane_i, lane_j) {
                    relations.push(Relation {
                        relation: RelationType::Intersecting,
                        frenet_path_distance: s_i - ai.coord.s,
                        ..base.clone()
                    });
                }
            }
        }
    }
    relations
}

/// Builds the scene graph, or `None` when no relations exist (edgeless
/// graphs are filtered). Node order follows scene entity order.
pub fn build_graph(scene: &TrafficScene, map: &LaneMap, gates: &LaneGates) -> Option<SceneGraph> {
    let relations = infer_relations(scene, map, gates);
    if relations.is_empty() {
        return None;
    }
    let node_entity_ids: Vec<u64> = scene.entities.iter().map(|e| e.entity_id).collect();
    let index_of = |entity_id: u64| {
        node_entity_ids
            .iter()
            .position(|&id| id == entity_id)
            .expect("relation references scene entity")
    };
    let edges = relations
        .iter()
        .map(|r| {
            let oh = r.relation.one_hot();
            GraphEdge {
                src: index_of(r.src_entity),
                dst: index_of(r.dst_entity),
                relation: r.relation,
                features: [
                    oh[0],
                    oh[1],
                    oh[2],
                    r.frenet_path_distance,
                    r.d_src,
                    r.d_dst,
                    r.probability,
                ],
            }
        })
        .collect();
    Some(SceneGraph {
        scene_id: scene.scene_id.clone(),
        node_features: scene.entities.iter().map(node_features).collect(),
        node_entity_ids,
        edges,
    })
}

/// Writes one JSON graph per line.
pub fn write_graphs_jsonl(path: impl AsRef<Path>, graphs: &[SceneGraph]) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    for g in graphs {
        serde_json::to_writer(&mut out, g)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_graphs_jsonl(path: impl AsRef<Path>) -> Result<Vec<SceneGraph>> {
    let file = File::open(path.as_ref())?;
    let mut graphs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let g: SceneGraph = serde_json::from_str(&line)?;
        g.validate()?;
        graphs.push(g);
    }
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{AgentType, Lane, LaneMap};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn car(id: u64, x: f64, y: f64, vx: f64, vy: f64, yaw: f64) -> EntityState {
        EntityState::new(id, x, y, vx, vy, yaw, 4.0, 2.0, AgentType::Car).unwrap()
    }

    #[test]
    fn node_feature_examples() {
        let e = car(1, 0.0, 0.0, 3.0, 4.0, 0.5);
        assert_eq!(node_features(&e), [5.0, 0.5, 1.0, 0.0, 0.0, 0.0]);

        let e = EntityState::new(2, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0, 2.0, AgentType::Other).unwrap();
        assert_eq!(node_features(&e), [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);

        let e =
            EntityState::new(3, 0.0, 0.0, -2.0, 0.0, PI, 9.0, 2.5, AgentType::TruckBus).unwrap();
        assert_eq!(node_features(&e), [2.0, PI, 0.0, 1.0, 0.0, 0.0]);
    }

    fn single_lane_map() -> LaneMap {
        LaneMap::from_lanes(vec![
            Lane::new("lane", vec![[0.0, 0.0], [100.0, 0.0]], 4.0).unwrap()
        ])
        .unwrap()
    }

    #[test]
    fn same_lane_longitudinal_edges_both_ways() {
        let map = single_lane_map();
        let scene = TrafficScene::new(
            "s",
            0,
            vec![car(1, 5.0, 0.0, 5.0, 0.0, 0.0), car(2, 20.0, 0.0, 5.0, 0.0, 0.0)],
        )
        .unwrap();
        let rels = infer_relations(&scene, &map, &LaneGates::default());
        assert_eq!(rels.len(), 2);
        let fwd = rels.iter().find(|r| r.src_entity == 1).unwrap();
        let rev = rels.iter().find(|r| r.src_entity == 2).unwrap();
        assert_eq!(fwd.relation, RelationType::Longitudinal);
        assert!((fwd.frenet_path_distance - 15.0).abs() < 1e-9);
        assert!((rev.frenet_path_distance + 15.0).abs() < 1e-9);
    }

    fn adjacent_map() -> LaneMap {
        let mut a = Lane::new("a", vec![[0.0, 0.0], [100.0, 0.0]], 4.0).unwrap();
        let mut b = Lane::new("b", vec![[0.0, 4.0], [100.0, 4.0]], 4.0).unwrap();
        a.left_adjacent = Some("b".into());
        b.right_adjacent = Some("a".into());
        LaneMap::from_lanes(vec![a, b]).unwrap()
    }

    #[test]
    fn adjacent_lanes_give_lateral_edges() {
        let map = adjacent_map();
        let scene = TrafficScene::new(
            "s",
            0,
            vec![car(1, 30.0, 0.0, 5.0, 0.0, 0.0), car(2, 30.0, 4.0, 5.0, 0.0, 0.0)],
        )
        .unwrap();
        let rels = infer_relations(&scene, &map, &LaneGates::default());
        assert_eq!(rels.len(), 2);
        for r in &rels {
            assert_eq!(r.relation, RelationType::Lateral);
            assert!(r.frenet_path_distance.abs() < 1e-9);
            assert!(r.probability > 0.0 && r.probability <= 1.0);
        }
    }

    #[test]
    fn crossing_lanes_give_intersecting_edges_with_src_distance() {
        // Perpendicular lanes crossing at (20, 0); both vehicles 10 m
        // before the conflict point. The lanes_conflict oracle fixes the
        // expected conflict arc lengths.
        let a = Lane::new("a", vec![[0.0, 0.0], [40.0, 0.0]], 4.0).unwrap();
        let b = Lane::new("b", vec![[20.0, -20.0], [20.0, 20.0]], 4.0).unwrap();
        let (sa, sb) = lanes_conflict(&a, &b).unwrap();
        assert!((sa - 20.0).abs() < 1e-9);
        assert!((sb - 20.0).abs() < 1e-9);

        let map = LaneMap::from_lanes(vec![a, b]).unwrap();
        let scene = TrafficScene::new(
            "s",
            0,
            vec![
                car(1, 10.0, 0.0, 5.0, 0.0, 0.0),
                car(2, 20.0, -10.0, 0.0, 5.0, FRAC_PI_2),
            ],
        )
        .unwrap();
        let rels = infer_relations(&scene, &map, &LaneGates::default());
        let inter: Vec<&Relation> = rels
            .iter()
            .filter(|r| r.relation == RelationType::Intersecting)
            .collect();
        assert_eq!(inter.len(), 2);
        for r in inter {
            assert!(
                (r.frenet_path_distance - 10.0).abs() < 1e-9,
                "each src is 10 m before the conflict, got {}",
                r.frenet_path_distance
            );
        }
    }

    #[test]
    fn single_vehicle_scene_is_edgeless() {
        let map = single_lane_map();
        let scene =
            TrafficScene::new("s", 0, vec![car(1, 5.0, 0.0, 5.0, 0.0, 0.0)]).unwrap();
        assert!(build_graph(&scene, &map, &LaneGates::default()).is_none());
    }

    #[test]
    fn non_interacting_oncoming_lanes_are_edgeless() {
        // Two oncoming lanes far apart: no successors, no adjacency, no
        // crossing.
        let a = Lane::new("a", vec![[0.0, 0.0], [100.0, 0.0]], 4.0).unwrap();
        let b = Lane::new("b", vec![[100.0, 30.0], [0.0, 30.0]], 4.0).unwrap();
        let map = LaneMap::from_lanes(vec![a, b]).unwrap();
        let scene = TrafficScene::new(
            "s",
            0,
            vec![car(1, 50.0, 0.0, 5.0, 0.0, 0.0), car(2, 50.0, 30.0, -5.0, 0.0, PI)],
        )
        .unwrap();
        assert!(build_graph(&scene, &map, &LaneGates::default()).is_none());
    }

    #[test]
    fn two_car_graph_has_two_nodes_two_edges() {
        let map = single_lane_map();
        let scene = TrafficScene::new(
            "s",
            0,
            vec![car(1, 5.0, 0.0, 5.0, 0.0, 0.0), car(2, 20.0, 0.0, 5.0, 0.0, 0.0)],
        )
        .unwrap();
        let g = build_graph(&scene, &map, &LaneGates::default()).unwrap();
        g.validate().unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.node_entity_ids, vec![1, 2]);
        for e in &g.edges {
            let onehot_sum: f64 = e.features[..3].iter().sum();
            assert_eq!(onehot_sum, 1.0);
            assert!(e.features[6] > 0.0 && e.features[6] <= 1.0);
        }
    }

    #[test]
    fn longitudinal_and_lateral_distances_flip_sign_pairwise() {
        let map = adjacent_map();
        let scene = TrafficScene::new(
            "s",
            0,
            vec![
                car(1, 10.0, 0.0, 5.0, 0.0, 0.0),
                car(2, 40.0, 0.0, 5.0, 0.0, 0.0),
                car(3, 25.0, 4.0, 5.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        let rels = infer_relations(&scene, &map, &LaneGates::default());
        for r in &rels {
            if r.relation == RelationType::Intersecting {
                continue;
            }
            let rev = rels
                .iter()
                .find(|o| {
                    o.src_entity == r.dst_entity
                        && o.dst_entity == r.src_entity
                        && o.relation == r.relation
                })
                .expect("reverse edge exists");
            assert!(
                (r.frenet_path_distance + rev.frenet_path_distance).abs() < 1e-9,
                "{:?}: {} vs {}",
                r.relation,
                r.frenet_path_distance,
                rev.frenet_path_distance
            );
        }
    }

    #[test]
    fn reversed_entity_order_builds_the_same_edge_multiset() {
        let map = adjacent_map();
        let entities = vec![
            car(1, 10.0, 0.0, 5.0, 0.0, 0.0),
            car(2, 40.0, 0.0, 5.0, 0.0, 0.0),
            car(3, 25.0, 4.0, 5.0, 0.0, 0.0),
        ];
        let scene = TrafficScene::new("s", 0, entities.clone()).unwrap();
        let mut reversed = entities;
        reversed.reverse();
        let scene_rev = TrafficScene::new("s", 0, reversed).unwrap();
        let gates = LaneGates::default();
        let g = build_graph(&scene, &map, &gates).unwrap();
        let gr = build_graph(&scene_rev, &map, &gates).unwrap();

        let key = |g: &SceneGraph, e: &GraphEdge| {
            (
                g.node_entity_ids[e.src],
                g.node_entity_ids[e.dst],
                e.relation,
                e.features.map(|f| f.to_bits()),
            )
        };
        let mut ka: Vec<_> = g.edges.iter().map(|e| key(&g, e)).collect();
        let mut kb: Vec<_> = gr.edges.iter().map(|e| key(&gr, e)).collect();
        ka.sort();
        kb.sort();
        assert_eq!(ka, kb);
    }

    #[test]
    fn jsonl_round_trip() {
        let map = single_lane_map();
        let scene = TrafficScene::new(
            "s",
            0,
            vec![car(1, 5.0, 0.0, 5.0, 0.0, 0.0), car(2, 20.0, 0.0, 5.0, 0.0, 0.0)],
        )
        .unwrap();
        let g = build_graph(&scene, &map, &LaneGates::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graphs.jsonl");
        write_graphs_jsonl(&path, &[g.clone()]).unwrap();
        let back = read_graphs_jsonl(&path).unwrap();
        assert_eq!(back, vec![g]);
    }
}
