//! Triplet-loss contrastive training over (anchor, positive) graph pairs
//! with in-batch uniform negative sampling and Adam.
//!
//! Negatives are the anchor embeddings of other batch elements. All three
//! Siamese branches share one parameter value per step; gradients are
//! accumulated in a fixed order, so training is bit-reproducible whether or
//! not the batch runs in parallel.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{backward, forward, init_params, Embedding, EncoderParams, ParamGrads};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::graph::SceneGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Triplet margin M.
    pub margin: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            margin: 0.5,
            epochs: 1400,
            batch_size: 533,
            train_fraction: 0.75,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::validation(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::validation(
                "batch_size must be >= 2 (negative sampling needs another element)",
            ));
        }
        if !(self.learning_rate > 0.0) || self.margin < 0.0 {
            return Err(Error::validation("learning_rate > 0 and margin >= 0 required"));
        }
        Ok(())
    }
}

/// First/second-moment accumulators mirroring the flattened parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        AdamState {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }
}

/// Loss and embedding-space gradients of one triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletLoss {
    pub loss: f64,
    pub grad_anchor: [f64; 2],
    pub grad_positive: [f64; 2],
    pub grad_negative: [f64; 2],
}

/// Hinge loss `max(||s0 - sp|| - ||s0 - sn|| + margin, 0)` with exact
/// subgradients; the distance gradient at zero distance is zero, and an
/// inactive hinge yields all-zero gradients.
pub fn triplet_loss(s0: &Embedding, sp: &Embedding, sn: &Embedding, margin: f64) -> TripletLoss {
    let dp = s0.distance(sp);
    let dn = s0.distance(sn);
    let raw = dp - dn + margin;
    if raw <= 0.0 {
        return TripletLoss {
            loss: 0.0,
            grad_anchor: [0.0; 2],
            grad_positive: [0.0; 2],
            grad_negative: [0.0; 2],
        };
    }
    // d ||s0 - s||/d s0 = (s0 - s) / ||s0 - s||, zero at coincidence.
    let unit = |a: &Embedding, b: &Embedding, dist: f64| -> [f64; 2] {
        if dist == 0.0 {
            [0.0, 0.0]
        } else {
            [(a.sx - b.sx) / dist, (a.sy - b.sy) / dist]
        }
    };
    let up = unit(s0, sp, dp);
    let un = unit(s0, sn, dn);
    TripletLoss {
        loss: raw,
        grad_anchor: [up[0] - un[0], up[1] - un[1]],
        grad_positive: [-up[0], -up[1]],
        grad_negative: [un[0], un[1]],
    }
}

/// Uniform in-batch negative indices: element `i` draws from
/// `{0..batch_len-1} \ {i}`.
pub fn sample_negatives(batch_len: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if batch_len < 2 {
        return Err(Error::contract("negative sampling needs batch_len >= 2"));
    }
    Ok((0..batch_len)
        .map(|i| {
            let k = rng.random_range(0..batch_len - 1);
            if k >= i {
                k + 1
            } else {
                k
            }
        })
        .collect())
}

/// One bias-corrected Adam update over the flattened parameters.
pub fn adam_step(
    params: &mut EncoderParams,
    grads: &ParamGrads,
    state: &mut AdamState,
    config: &TrainConfig,
) {
    let flat_grads = grads.to_flat();
    let mut flat = params.to_flat();
    assert_eq!(flat.len(), state.m.len(), "Adam state shape mismatch");
    assert_eq!(flat.len(), flat_grads.len());
    state.t += 1;
    let bc1 = 1.0 - config.adam_beta1.powi(state.t as i32);
    let bc2 = 1.0 - config.adam_beta2.powi(state.t as i32);
    for i in 0..flat.len() {
        let g = flat_grads[i];
        state.m[i] = config.adam_beta1 * state.m[i] + (1.0 - config.adam_beta1) * g;
        state.v[i] = config.adam_beta2 * state.v[i] + (1.0 - config.adam_beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        flat[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    params.set_flat(&flat);
}

/// Seeded shuffle followed by a split at `floor(fraction * N)`.
pub fn split_dataset<T: Clone>(items: &[T], fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut indices: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let cut = (fraction * items.len() as f64).floor() as usize;
    let train = indices[..cut].iter().map(|&i| items[i].clone()).collect();
    let val = indices[cut..].iter().map(|&i| items[i].clone()).collect();
    (train, val)
}

/// An anchor graph with its augmented positive sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPair {
    pub anchor: SceneGraph,
    pub positive: SceneGraph,
}

/// Pairs graphs by scene id: `<id>` is an anchor, `<id>#aug<k>` one of its
/// positives. Positives without an anchor (e.g. the anchor was edgeless)
/// are dropped.
pub fn pair_by_scene_id(graphs: &[SceneGraph]) -> Vec<GraphPair> {
    let anchors: std::collections::BTreeMap<&str, &SceneGraph> = graphs
        .iter()
        .filter(|g| !g.scene_id.contains("#aug"))
        .map(|g| (g.scene_id.as_str(), g))
        .collect();
    let mut pairs = Vec::new();
    for g in graphs {
        if let Some(pos) = g.scene_id.find("#aug") {
            let anchor_id = &g.scene_id[..pos];
            if let Some(anchor) = anchors.get(anchor_id) {
                pairs.push(GraphPair {
                    anchor: (*anchor).clone(),
                    positive: g.clone(),
                });
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_triplet_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: EncoderParams,
    pub init_seed: u64,
    pub history: Vec<EpochStats>,
}

/// Derives an independent seed stream from a base seed and a salt
/// (splitmix64 round); used for stage and per-scene seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct BatchResult {
    grads: ParamGrads,
    loss_sum: f64,
    triplets: usize,
}

/// Forward + backward over one batch of pairs; returns summed gradients of
/// the mean batch loss and the summed triplet losses.
fn run_batch(
    params: &EncoderParams,
    batch: &[&GraphPair],
    rng: &mut ChaCha8Rng,
    margin: f64,
) -> Result<BatchResult> {
    let b = batch.len();
    let negatives = sample_negatives(b, rng)?;

    // Embed anchors and positives (parallel, order-preserving).
    let anchor_results = par_map(batch, |pair| forward(params, &pair.anchor));
    let positive_results = par_map(batch, |pair| forward(params, &pair.positive));
    let mut anchors = Vec::with_capacity(b);
    for r in anchor_results {
        anchors.push(r?);
    }
    let mut positives = Vec::with_capacity(b);
    for r in positive_results {
        positives.push(r?);
    }

    // Eq. 2 per triplet; negative = the sampled element's anchor embedding.
    let inv_b = 1.0 / b as f64;
    let mut loss_sum = 0.0;
    let mut anchor_grads = vec![[0.0; 2]; b];
    let mut positive_grads = vec![[0.0; 2]; b];
    for i in 0..b {
        let tl = triplet_loss(&anchors[i].0, &positives[i].0, &anchors[negatives[i]].0, margin);
        loss_sum += tl.loss;
        for k in 0..2 {
            anchor_grads[i][k] += tl.grad_anchor[k] * inv_b;
            positive_grads[i][k] += tl.grad_positive[k] * inv_b;
            anchor_grads[negatives[i]][k] += tl.grad_negative[k] * inv_b;
        }
    }

    // Backprop through all three branches with the shared parameter value.
    let jobs: Vec<(usize, bool)> = (0..b)
        .map(|i| (i, true))
        .chain((0..b).map(|i| (i, false)))
        .collect();
    let grad_parts = par_map(&jobs, |&(i, is_anchor)| {
        let (trace, grad) = if is_anchor {
            (&anchors[i].1, anchor_grads[i])
        } else {
            (&positives[i].1, positive_grads[i])
        };
        if grad == [0.0, 0.0] {
            None
        } else {
            Some(backward(params, trace, grad))
        }
    });
    let mut grads = ParamGrads::zeros_like(params);
    for part in grad_parts.into_iter().flatten() {
        grads.add_assign(&part);
    }
    Ok(BatchResult {
        grads,
        loss_sum,
        triplets: b,
    })
}

/// Mean loss and triplet accuracy over a pair set, treated as one batch for
/// negative sampling. Uses its own RNG so evaluation never disturbs the
/// training stream.
fn evaluate(
    params: &EncoderParams,
    pairs: &[GraphPair],
    margin: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    if pairs.len() < 2 {
        return Ok((f64::NAN, f64::NAN));
    }
    let anchor_results = par_map(pairs, |p| forward(params, &p.anchor).map(|(e, _)| e));
    let positive_results = par_map(pairs, |p| forward(params, &p.positive).map(|(e, _)| e));
    let mut anchors = Vec::with_capacity(pairs.len());
    for r in anchor_results {
        anchors.push(r?);
    }
    let mut positives = Vec::with_capacity(pairs.len());
    for r in positive_results {
        positives.push(r?);
    }
    let negatives = sample_negatives(pairs.len(), rng)?;
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for i in 0..pairs.len() {
        let sn = &anchors[negatives[i]];
        loss_sum += triplet_loss(&anchors[i], &positives[i], sn, margin).loss;
        if anchors[i].distance(&positives[i]) < anchors[i].distance(sn) {
            correct += 1;
        }
    }
    Ok((
        loss_sum / pairs.len() as f64,
        correct as f64 / pairs.len() as f64,
    ))
}

/// Trains the encoder: seeded split into train/validation, per-epoch
/// shuffling into batches, one Adam step per batch. The last partial batch
/// is kept when it still has two elements. History records per-epoch mean
/// train loss, validation loss and validation triplet accuracy.
pub fn train(pairs: &[GraphPair], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if pairs.len() < 2 {
        return Err(Error::contract("training needs at least 2 pairs"));
    }
    let (train_pairs, val_pairs) = split_dataset(pairs, config.train_fraction, config.seed);
    if train_pairs.is_empty() {
        return Err(Error::contract("empty train split"));
    }

    let mut params = init_params(config.seed);
    let mut adam = AdamState::new(params.num_params());
    let mut train_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 1));
    let mut history = Vec::with_capacity(config.epochs as usize);

    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut train_rng);
        let mut loss_sum = 0.0;
        let mut triplets = 0usize;
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue; // a 1-element tail cannot form a triplet
            }
            let batch: Vec<&GraphPair> = chunk.iter().map(|&i| &train_pairs[i]).collect();
            let result = run_batch(&params, &batch, &mut train_rng, config.margin)?;
            loss_sum += result.loss_sum;
            triplets += result.triplets;
            adam_step(&mut params, &result.grads, &mut adam, config);
        }
        let train_loss = loss_sum / triplets.max(1) as f64;
        let mut val_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 1000 + epoch as u64));
        let (val_loss, val_acc) = evaluate(&params, &val_pairs, config.margin, &mut val_rng)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_triplet_acc: val_acc,
        });
    }

    Ok(TrainOutput {
        params,
        init_seed: config.seed,
        history,
    })
}

/// Writes `epoch,train_loss,val_loss,val_triplet_acc` rows.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[EpochStats]) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut out = BufWriter::new(file);
    writeln!(out, "epoch,train_loss,val_loss,val_triplet_acc")?;
    for h in history {
        writeln!(
            out,
            "{},{},{},{}",
            h.epoch, h.train_loss, h.val_loss, h.val_triplet_acc
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphEdge, RelationType};

    fn emb(sx: f64, sy: f64) -> Embedding {
        Embedding { sx, sy }
    }

    #[test]
    fn triplet_loss_inactive_hinge() {
        let tl = triplet_loss(&emb(0.0, 0.0), &emb(0.0, 0.0), &emb(1.0, 0.0), 0.5);
        assert_eq!(tl.loss, 0.0);
        assert_eq!(tl.grad_anchor, [0.0, 0.0]);
    }

    #[test]
    fn triplet_loss_direct_evaluation() {
        let tl = triplet_loss(&emb(0.0, 0.0), &emb(0.8, 0.0), &emb(0.2, 0.0), 0.5);
        assert!((tl.loss - 1.1).abs() < 1e-12);
    }

    #[test]
    fn triplet_loss_degenerate_coincident_points() {
        let s = emb(0.3, -0.4);
        let tl = triplet_loss(&s, &s, &s, 0.5);
        assert!((tl.loss - 0.5).abs() < 1e-12);
        assert_eq!(tl.grad_positive, [0.0, 0.0]);
        assert_eq!(tl.grad_negative, [0.0, 0.0]);
    }

    #[test]
    fn triplet_loss_nonnegative_and_zero_condition() {
        let cases = [
            (emb(0.1, 0.2), emb(0.15, 0.2), emb(-0.5, 0.9)),
            (emb(0.0, 0.0), emb(0.9, 0.9), emb(0.1, 0.0)),
        ];
        for (s0, sp, sn) in cases {
            let tl = triplet_loss(&s0, &sp, &sn, 0.5);
            assert!(tl.loss >= 0.0);
            let inactive = s0.distance(&sn) >= s0.distance(&sp) + 0.5;
            assert_eq!(tl.loss == 0.0, inactive);
        }
    }

    #[test]
    fn negatives_with_batch_of_two_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let n = sample_negatives(2, &mut rng).unwrap();
            assert_eq!(n, vec![1, 0]);
        }
    }

    #[test]
    fn negatives_never_self_and_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [[0usize; 5]; 5];
        let draws = 100_000usize / 5;
        for _ in 0..draws {
            let n = sample_negatives(5, &mut rng).unwrap();
            for (i, &j) in n.iter().enumerate() {
                assert_ne!(i, j);
                counts[i][j] += 1;
            }
        }
        for (i, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i == j {
                    assert_eq!(c, 0);
                } else {
                    let freq = c as f64 / draws as f64;
                    assert!((freq - 0.25).abs() < 0.02, "freq[{i}][{j}]={freq}");
                }
            }
        }
    }

    #[test]
    fn sample_negatives_rejects_short_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_negatives(1, &mut rng).is_err());
    }

    #[test]
    fn adam_first_step_magnitude_is_learning_rate() {
        let config = TrainConfig::default();
        let mut params = EncoderParams::zeros();
        let mut grads = ParamGrads::zeros_like(&params);
        grads.mp1_message.weights[0] = 0.5;
        let mut state = AdamState::new(params.num_params());
        adam_step(&mut params, &grads, &mut state, &config);
        assert_eq!(state.t, 1);
        let got = params.mp1_message.weights[0].abs();
        assert!((got - config.learning_rate).abs() < 1e-6, "step {got}");
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let config = TrainConfig::default();
        let mut params = init_params(3);
        let before = params.clone();
        let grads = ParamGrads::zeros_like(&params);
        let mut state = AdamState::new(params.num_params());
        adam_step(&mut params, &grads, &mut state, &config);
        assert_eq!(params, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_two_steps_match_hand_recurrence() {
        // Scalar toy problem, g = 0.5 constant, frozen from the hand-run
        // recurrence: p1 = 0.99900000002, p2 = 0.99800000004.
        let config = TrainConfig::default();
        let mut params = EncoderParams::zeros();
        params.mp1_message.weights[0] = 1.0;
        let mut grads = ParamGrads::zeros_like(&params);
        grads.mp1_message.weights[0] = 0.5;
        let mut state = AdamState::new(params.num_params());
        adam_step(&mut params, &grads, &mut state, &config);
        assert!((params.mp1_message.weights[0] - 0.99900000002).abs() < 1e-12);
        adam_step(&mut params, &grads, &mut state, &config);
        assert!((params.mp1_message.weights[0] - 0.99800000004).abs() < 1e-12);
    }

    #[test]
    fn split_has_floor_sizes_and_partitions() {
        let items: Vec<u32> = (0..4).collect();
        let (train, val) = split_dataset(&items, 0.75, 5);
        assert_eq!(train.len(), 3);
        assert_eq!(val.len(), 1);
        let mut all: Vec<u32> = train.iter().chain(val.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);
        let (train2, val2) = split_dataset(&items, 0.75, 5);
        assert_eq!(train, train2);
        assert_eq!(val, val2);
    }

    fn toy_graph(scene_id: &str, speed: f64, dist: f64) -> SceneGraph {
        SceneGraph {
            scene_id: scene_id.into(),
            node_features: vec![
                [speed, 0.1, 1.0, 0.0, 0.0, 0.0],
                [speed + 0.5, -0.1, 1.0, 0.0, 0.0, 0.0],
            ],
            node_entity_ids: vec![1, 2],
            edges: vec![
                GraphEdge {
                    src: 0,
                    dst: 1,
                    relation: RelationType::Longitudinal,
                    features: [1.0, 0.0, 0.0, dist, 0.1, -0.1, 0.9],
                },
                GraphEdge {
                    src: 1,
                    dst: 0,
                    relation: RelationType::Longitudinal,
                    features: [1.0, 0.0, 0.0, -dist, -0.1, 0.1, 0.9],
                },
            ],
        }
    }

    fn toy_pairs(n: usize) -> Vec<GraphPair> {
        (0..n)
            .map(|i| {
                let speed = i as f64;
                GraphPair {
                    anchor: toy_graph(&format!("s{i}"), speed, 10.0 + speed),
                    positive: toy_graph(&format!("s{i}#aug0"), speed + 0.1, 10.2 + speed),
                }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_init_params_and_empty_history() {
        let config = TrainConfig {
            epochs: 0,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let out = train(&toy_pairs(8), &config).unwrap();
        assert_eq!(out.params, init_params(9));
        assert!(out.history.is_empty());
    }

    #[test]
    fn training_is_bit_deterministic() {
        let config = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 17,
            ..TrainConfig::default()
        };
        let pairs = toy_pairs(10);
        let a = train(&pairs, &config).unwrap();
        let b = train(&pairs, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn loss_decreases_on_a_small_problem() {
        let config = TrainConfig {
            epochs: 50,
            batch_size: 8,
            seed: 2,
            ..TrainConfig::default()
        };
        let out = train(&toy_pairs(12), &config).unwrap();
        let first = out.history.first().unwrap().train_loss;
        let last = out.history.last().unwrap().train_loss;
        assert!(
            last < first,
            "loss did not decrease: {first} -> {last}"
        );
    }

    #[test]
    fn validation_pairs_never_influence_updates() {
        // Two datasets that shuffle into the same train split but a
        // different validation element must produce identical parameters.
        let pairs = toy_pairs(8);
        let config = TrainConfig {
            epochs: 4,
            batch_size: 4,
            seed: 21,
            ..TrainConfig::default()
        };
        let indices: Vec<usize> = (0..pairs.len()).collect();
        let (_, val_idx) = split_dataset(&indices, config.train_fraction, config.seed);

        let mut altered = pairs.clone();
        for &i in &val_idx {
            altered[i] = GraphPair {
                anchor: toy_graph(&format!("other{i}"), 40.0 + i as f64, 99.0),
                positive: toy_graph(&format!("other{i}#aug0"), 41.0 + i as f64, 98.0),
            };
        }
        let a = train(&pairs, &config).unwrap();
        let b = train(&altered, &config).unwrap();
        assert_eq!(a.params, b.params);
        // Validation metrics do differ.
        assert_ne!(
            a.history.last().unwrap().val_loss.to_bits(),
            b.history.last().unwrap().val_loss.to_bits()
        );
    }

    #[test]
    fn batch_gradient_matches_finite_differences_end_to_end() {
        // Finite-difference oracle through Eq. 2 and the whole encoder.
        let pairs = toy_pairs(4);
        let batch: Vec<&GraphPair> = pairs.iter().collect();
        let params = init_params(33);
        let margin = 0.5;

        let negatives = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            sample_negatives(batch.len(), &mut rng).unwrap()
        };
        let batch_loss = |p: &EncoderParams| -> f64 {
            let anchors: Vec<Embedding> = batch
                .iter()
                .map(|pr| forward(p, &pr.anchor).unwrap().0)
                .collect();
            let positives: Vec<Embedding> = batch
                .iter()
                .map(|pr| forward(p, &pr.positive).unwrap().0)
                .collect();
            let mut total = 0.0;
            for i in 0..batch.len() {
                total +=
                    triplet_loss(&anchors[i], &positives[i], &anchors[negatives[i]], margin).loss;
            }
            total / batch.len() as f64
        };

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let result = run_batch(&params, &batch, &mut rng, margin).unwrap();
        let analytic = result.grads.to_flat();

        let flat = params.to_flat();
        let mut work = params.clone();
        let eps = 1e-5;
        let mut max_rel = 0.0f64;
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += eps;
            work.set_flat(&plus);
            let lp = batch_loss(&work);
            let mut minus = flat.clone();
            minus[i] -= eps;
            work.set_flat(&minus);
            let lm = batch_loss(&work);
            let numeric = (lp - lm) / (2.0 * eps);
            let rel =
                (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-12);
            max_rel = max_rel.max(rel);
        }
        assert!(max_rel < 1e-4, "max rel err {max_rel}");
    }

    #[test]
    fn pairing_by_scene_id_convention() {
        let graphs = vec![
            toy_graph("a", 1.0, 5.0),
            toy_graph("a#aug0", 1.1, 5.0),
            toy_graph("a#aug1", 1.2, 5.0),
            toy_graph("orphan#aug0", 9.0, 5.0),
            toy_graph("b", 2.0, 5.0),
        ];
        let pairs = pair_by_scene_id(&graphs);
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|p| p.anchor.scene_id == "a"));
    }

    #[test]
    fn history_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        write_history_csv(
            &path,
            &[EpochStats {
                epoch: 0,
                train_loss: 0.5,
                val_loss: 0.25,
                val_triplet_acc: 0.75,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,train_loss,val_loss,val_triplet_acc\n0,0.5,0.25,0.75\n");
    }
}
