//! Siamese graph encoder: two message-passing layers with sum aggregation,
//! mean readout and a tanh-bounded MLP head mapping any scene graph to a
//! point in (-1, 1)^2. Forward keeps a trace of intermediates so
//! [`backward`] can produce exact reverse-mode gradients for every weight
//! and bias; [`grad_check`] verifies them against central finite
//! differences.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SceneGraph, EDGE_FEATURE_DIM, NODE_FEATURE_DIM};

const HIDDEN: usize = 6;
const MP1_MESSAGE_IN: usize = 2 * NODE_FEATURE_DIM + EDGE_FEATURE_DIM; // 19
const MP_UPDATE_IN: usize = 2 * HIDDEN; // 12
const MP2_MESSAGE_IN: usize = 2 * HIDDEN; // 12
const OUT: usize = 2;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Dense layer, weights row-major (out_dim x in_dim).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        LinearLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn validate(&self, name: &str, in_dim: usize, out_dim: usize) -> Result<()> {
        if self.in_dim != in_dim || self.out_dim != out_dim {
            return Err(Error::ShapeMismatch {
                layer: name.to_string(),
                expected_in: in_dim,
                expected_out: out_dim,
                got_in: self.in_dim,
                got_out: self.out_dim,
            });
        }
        if self.weights.len() != in_dim * out_dim || self.bias.len() != out_dim {
            return Err(Error::validation(format!(
                "layer {name}: weight/bias storage does not match {out_dim}x{in_dim}"
            )));
        }
        if !self.weights.iter().chain(&self.bias).all(|w| w.is_finite()) {
            return Err(Error::validation(format!("layer {name}: non-finite entry")));
        }
        Ok(())
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for r in 0..self.out_dim {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = self.bias[r];
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            out[r] = acc;
        }
    }

    /// Accumulates dW += dy (x) x, db += dy and returns nothing; the input
    /// gradient is accumulated separately via [`LinearLayer::input_grad`].
    fn accumulate_grads(&self, x: &[f64], dy: &[f64], grads: &mut LayerGrads) {
        for r in 0..self.out_dim {
            let g = dy[r];
            if g == 0.0 {
                continue;
            }
            let row = &mut grads.weights[r * self.in_dim..(r + 1) * self.in_dim];
            for (slot, xv) in row.iter_mut().zip(x) {
                *slot += g * xv;
            }
            grads.bias[r] += g;
        }
    }

    fn input_grad_into(&self, dy: &[f64], dx: &mut [f64]) {
        debug_assert_eq!(dx.len(), self.in_dim);
        dx.fill(0.0);
        for r in 0..self.out_dim {
            let g = dy[r];
            if g == 0.0 {
                continue;
            }
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            for (slot, w) in dx.iter_mut().zip(row) {
                *slot += w * g;
            }
        }
    }
}

/// All encoder parameters. Layer shapes are fixed by the feature widths:
/// MP1 messages consume `[dst node, src node, edge]`, MP2 messages
/// `[dst node, src node]`, updates `[node, aggregated message]`, and the
/// head is 6 -> 6 -> 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub mp1_message: LinearLayer,
    pub mp1_update: LinearLayer,
    pub mp2_message: LinearLayer,
    pub mp2_update: LinearLayer,
    pub mlp_hidden: LinearLayer,
    pub mlp_out: LinearLayer,
    pub leaky_slope: f64,
}

/// (name, in_dim, out_dim) for each layer, in flattening order.
pub const LAYER_SHAPES: [(&str, usize, usize); 6] = [
    ("mp1_message", MP1_MESSAGE_IN, HIDDEN),
    ("mp1_update", MP_UPDATE_IN, HIDDEN),
    ("mp2_message", MP2_MESSAGE_IN, HIDDEN),
    ("mp2_update", MP_UPDATE_IN, HIDDEN),
    ("mlp_hidden", HIDDEN, HIDDEN),
    ("mlp_out", HIDDEN, OUT),
];

impl EncoderParams {
    pub fn zeros() -> Self {
        EncoderParams {
            mp1_message: LinearLayer::zeros(MP1_MESSAGE_IN, HIDDEN),
            mp1_update: LinearLayer::zeros(MP_UPDATE_IN, HIDDEN),
            mp2_message: LinearLayer::zeros(MP2_MESSAGE_IN, HIDDEN),
            mp2_update: LinearLayer::zeros(MP_UPDATE_IN, HIDDEN),
            mlp_hidden: LinearLayer::zeros(HIDDEN, HIDDEN),
            mlp_out: LinearLayer::zeros(HIDDEN, OUT),
            leaky_slope: 0.01,
        }
    }

    fn layers(&self) -> [&LinearLayer; 6] {
        [
            &self.mp1_message,
            &self.mp1_update,
            &self.mp2_message,
            &self.mp2_update,
            &self.mlp_hidden,
            &self.mlp_out,
        ]
    }

    fn layers_mut(&mut self) -> [&mut LinearLayer; 6] {
        [
            &mut self.mp1_message,
            &mut self.mp1_update,
            &mut self.mp2_message,
            &mut self.mp2_update,
            &mut self.mlp_hidden,
            &mut self.mlp_out,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (layer, (name, in_dim, out_dim)) in self.layers().into_iter().zip(LAYER_SHAPES) {
            layer.validate(name, in_dim, out_dim)?;
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::validation("leaky_slope must be finite"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        LAYER_SHAPES
            .iter()
            .map(|(_, i, o)| i * o + o)
            .sum()
    }

    /// Flattens every weight and bias, layer order as in [`LAYER_SHAPES`],
    /// weights row-major first, then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for layer in self.layers() {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    /// Inverse of [`EncoderParams::to_flat`]; `leaky_slope` is untouched.
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut off = 0;
        for layer in self.layers_mut() {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }
}

/// Damping applied to the Glorot bound. Edge features carry raw meters
/// (path distances reach tens of meters) and sum aggregation compounds
/// them across layers; at the plain Glorot scale the tanh head starts
/// saturated for most graphs, which collapses triplet training (coincident
/// embeddings have zero distance gradients by convention). The damped
/// scale keeps initial pre-tanh activations in the linear regime.
const INIT_BOUND_SCALE: f64 = 0.2;

/// Uniform initialization: weights in +-0.2 sqrt(6 / (in + out)) (damped
/// Glorot, see [`INIT_BOUND_SCALE`]), biases zero. Deterministic per seed.
pub fn init_params(seed: u64) -> EncoderParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = EncoderParams::zeros();
    for layer in params.layers_mut() {
        let bound = INIT_BOUND_SCALE * (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-bound..=bound);
        }
    }
    params
}

/// 2-D graph embedding; both components strictly inside (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub sx: f64,
    pub sy: f64,
}

impl Embedding {
    pub fn distance(&self, other: &Embedding) -> f64 {
        (self.sx - other.sx).hypot(self.sy - other.sy)
    }
}

/// Intermediates retained by [`forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    edges: Vec<(usize, usize, [f64; EDGE_FEATURE_DIM])>,
    v0: Vec<[f64; HIDDEN]>,
    msg1_pre: Vec<[f64; HIDDEN]>,
    agg1: Vec<[f64; HIDDEN]>,
    upd1_pre: Vec<[f64; HIDDEN]>,
    v1: Vec<[f64; HIDDEN]>,
    msg2_pre: Vec<[f64; HIDDEN]>,
    agg2: Vec<[f64; HIDDEN]>,
    upd2_pre: Vec<[f64; HIDDEN]>,
    readout: [f64; HIDDEN],
    hidden_pre: [f64; HIDDEN],
    hidden: [f64; HIDDEN],
    pub embedding: Embedding,
}

fn leaky(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        slope * z
    }
}

/// Largest f64 strictly below 1.0. tanh rounds to exactly 1.0 in double
/// precision near |z| ~ 19; the embedding contract is the open interval,
/// so saturated outputs clamp to the nearest representable inside value.
const TANH_CEILING: f64 = 1.0 - f64::EPSILON / 2.0;

fn bounded_tanh(z: f64) -> f64 {
    z.tanh().clamp(-TANH_CEILING, TANH_CEILING)
}

/// Derivative convention: exactly 0 uses the leaky slope.
fn leaky_grad(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Runs the graph through both message-passing layers, the mean readout and
/// the MLP head. Messages flow along each directed edge from `src` to
/// `dst`; aggregation is the sum over incoming edges (zero vector for nodes
/// without incoming edges); the readout is the mean over all node states.
pub fn forward(params: &EncoderParams, g: &SceneGraph) -> Result<(Embedding, ForwardTrace)> {
    params.validate()?;
    let n = g.num_nodes();
    if n == 0 {
        return Err(Error::contract("graph has no nodes"));
    }
    for e in &g.edges {
        if e.src >= n || e.dst >= n {
            return Err(Error::contract(format!(
                "edge {} -> {} out of range for {} nodes",
                e.src, e.dst, n
            )));
        }
    }
    let slope = params.leaky_slope;
    let v0: Vec<[f64; HIDDEN]> = g.node_features.clone();

    // Layer 1: messages use [dst node, src node, edge features].
    let mut msg1_pre = Vec::with_capacity(g.edges.len());
    let mut agg1 = vec![[0.0; HIDDEN]; n];
    for e in &g.edges {
        let mut x = [0.0; MP1_MESSAGE_IN];
        x[..HIDDEN].copy_from_slice(&v0[e.dst]);
        x[HIDDEN..2 * HIDDEN].copy_from_slice(&v0[e.src]);
        x[2 * HIDDEN..].copy_from_slice(&e.features);
        let mut pre = [0.0; HIDDEN];
        params.mp1_message.apply_into(&x, &mut pre);
        for k in 0..HIDDEN {
            agg1[e.dst][k] += leaky(pre[k], slope);
        }
        msg1_pre.push(pre);
    }
    let mut upd1_pre = Vec::with_capacity(n);
    let mut v1 = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = [0.0; MP_UPDATE_IN];
        x[..HIDDEN].copy_from_slice(&v0[i]);
        x[HIDDEN..].copy_from_slice(&agg1[i]);
        let mut pre = [0.0; HIDDEN];
        params.mp1_update.apply_into(&x, &mut pre);
        upd1_pre.push(pre);
        v1.push(pre.map(|z| leaky(z, slope)));
    }

    // Layer 2: messages use node states only.
    let mut msg2_pre = Vec::with_capacity(g.edges.len());
    let mut agg2 = vec![[0.0; HIDDEN]; n];
    for e in &g.edges {
        let mut x = [0.0; MP2_MESSAGE_IN];
        x[..HIDDEN].copy_from_slice(&v1[e.dst]);
        x[HIDDEN..].copy_from_slice(&v1[e.src]);
        let mut pre = [0.0; HIDDEN];
        params.mp2_message.apply_into(&x, &mut pre);
        for k in 0..HIDDEN {
            agg2[e.dst][k] += leaky(pre[k], slope);
        }
        msg2_pre.push(pre);
    }
    let mut upd2_pre = Vec::with_capacity(n);
    let mut v2 = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = [0.0; MP_UPDATE_IN];
        x[..HIDDEN].copy_from_slice(&v1[i]);
        x[HIDDEN..].copy_from_slice(&agg2[i]);
        let mut pre = [0.0; HIDDEN];
        params.mp2_update.apply_into(&x, &mut pre);
        upd2_pre.push(pre);
        v2.push(pre.map(|z| leaky(z, slope)));
    }

    // Mean readout and MLP head.
    let mut readout = [0.0; HIDDEN];
    for row in &v2 {
        for k in 0..HIDDEN {
            readout[k] += row[k];
        }
    }
    for k in 0..HIDDEN {
        readout[k] /= n as f64;
    }
    let mut hidden_pre = [0.0; HIDDEN];
    params.mlp_hidden.apply_into(&readout, &mut hidden_pre);
    let hidden = hidden_pre.map(|z| leaky(z, slope));
    let mut out_pre = [0.0; OUT];
    params.mlp_out.apply_into(&hidden, &mut out_pre);
    let embedding = Embedding {
        sx: bounded_tanh(out_pre[0]),
        sy: bounded_tanh(out_pre[1]),
    };

    let edges = g
        .edges
        .iter()
        .map(|e| (e.src, e.dst, e.features))
        .collect();
    Ok((
        embedding,
        ForwardTrace {
            edges,
            v0,
            msg1_pre,
            agg1,
            upd1_pre,
            v1,
            msg2_pre,
            agg2,
            upd2_pre,
            readout,
            hidden_pre,
            hidden,
            embedding,
        },
    ))
}

/// Per-layer gradient accumulators, shapes mirroring [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    fn zeros_like(layer: &LinearLayer) -> Self {
        LayerGrads {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub mp1_message: LayerGrads,
    pub mp1_update: LayerGrads,
    pub mp2_message: LayerGrads,
    pub mp2_update: LayerGrads,
    pub mlp_hidden: LayerGrads,
    pub mlp_out: LayerGrads,
}

impl ParamGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        ParamGrads {
            mp1_message: LayerGrads::zeros_like(&params.mp1_message),
            mp1_update: LayerGrads::zeros_like(&params.mp1_update),
            mp2_message: LayerGrads::zeros_like(&params.mp2_message),
            mp2_update: LayerGrads::zeros_like(&params.mp2_update),
            mlp_hidden: LayerGrads::zeros_like(&params.mlp_hidden),
            mlp_out: LayerGrads::zeros_like(&params.mlp_out),
        }
    }

    fn layers(&self) -> [&LayerGrads; 6] {
        [
            &self.mp1_message,
            &self.mp1_update,
            &self.mp2_message,
            &self.mp2_update,
            &self.mlp_hidden,
            &self.mlp_out,
        ]
    }

    fn layers_mut(&mut self) -> [&mut LayerGrads; 6] {
        [
            &mut self.mp1_message,
            &mut self.mp1_update,
            &mut self.mp2_message,
            &mut self.mp2_update,
            &mut self.mlp_hidden,
            &mut self.mlp_out,
        ]
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (mine, theirs) in self.layers_mut().into_iter().zip(other.layers()) {
            for (a, b) in mine.weights.iter_mut().zip(&theirs.weights) {
                *a += b;
            }
            for (a, b) in mine.bias.iter_mut().zip(&theirs.bias) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.layers_mut() {
            for w in &mut layer.weights {
                *w *= factor;
            }
            for b in &mut layer.bias {
                *b *= factor;
            }
        }
    }

    /// Same flattening order as [`EncoderParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for layer in self.layers() {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    pub fn is_zero(&self) -> bool {
        self.layers()
            .iter()
            .all(|l| l.weights.iter().all(|w| *w == 0.0) && l.bias.iter().all(|b| *b == 0.0))
    }
}

/// Exact reverse-mode gradients of `grad_embedding . embedding` with respect
/// to every weight and bias, given the trace produced by [`forward`] with
/// the same parameters.
pub fn backward(params: &EncoderParams, trace: &ForwardTrace, grad_embedding: [f64; 2]) -> ParamGrads {
    let slope = params.leaky_slope;
    let n = trace.v0.len();
    let mut grads = ParamGrads::zeros_like(params);

    // tanh head.
    let demb = [
        grad_embedding[0] * (1.0 - trace.embedding.sx * trace.embedding.sx),
        grad_embedding[1] * (1.0 - trace.embedding.sy * trace.embedding.sy),
    ];
    params
        .mlp_out
        .accumulate_grads(&trace.hidden, &demb, &mut grads.mlp_out);
    let mut dhidden = [0.0; HIDDEN];
    params.mlp_out.input_grad_into(&demb, &mut dhidden);
    let dhidden_pre: [f64; HIDDEN] =
        std::array::from_fn(|k| dhidden[k] * leaky_grad(trace.hidden_pre[k], slope));
    params
        .mlp_hidden
        .accumulate_grads(&trace.readout, &dhidden_pre, &mut grads.mlp_hidden);
    let mut dreadout = [0.0; HIDDEN];
    params.mlp_hidden.input_grad_into(&dhidden_pre, &mut dreadout);

    // Mean readout spreads the gradient evenly over nodes.
    let dv2_each: [f64; HIDDEN] = std::array::from_fn(|k| dreadout[k] / n as f64);

    // Layer 2 update.
    let mut dv1 = vec![[0.0; HIDDEN]; n];
    let mut dagg2 = vec![[0.0; HIDDEN]; n];
    let mut dx_upd = [0.0; MP_UPDATE_IN];
    for i in 0..n {
        let dpre: [f64; HIDDEN] =
            std::array::from_fn(|k| dv2_each[k] * leaky_grad(trace.upd2_pre[i][k], slope));
        let mut x = [0.0; MP_UPDATE_IN];
        x[..HIDDEN].copy_from_slice(&trace.v1[i]);
        x[HIDDEN..].copy_from_slice(&trace.agg2[i]);
        params.mp2_update.accumulate_grads(&x, &dpre, &mut grads.mp2_update);
        params.mp2_update.input_grad_into(&dpre, &mut dx_upd);
        for k in 0..HIDDEN {
            dv1[i][k] += dx_upd[k];
            dagg2[i][k] += dx_upd[HIDDEN + k];
        }
    }

    // Layer 2 messages.
    let mut dx_msg2 = [0.0; MP2_MESSAGE_IN];
    for (e, pre) in trace.edges.iter().zip(&trace.msg2_pre) {
        let (src, dst, _f) = *e;
        let dpre: [f64; HIDDEN] =
            std::array::from_fn(|k| dagg2[dst][k] * leaky_grad(pre[k], slope));
        let mut x = [0.0; MP2_MESSAGE_IN];
        x[..HIDDEN].copy_from_slice(&trace.v1[dst]);
        x[HIDDEN..].copy_from_slice(&trace.v1[src]);
        params
            .mp2_message
            .accumulate_grads(&x, &dpre, &mut grads.mp2_message);
        params.mp2_message.input_grad_into(&dpre, &mut dx_msg2);
        for k in 0..HIDDEN {
            dv1[dst][k] += dx_msg2[k];
            dv1[src][k] += dx_msg2[HIDDEN + k];
        }
    }

    // Layer 1 update.
    let mut dagg1 = vec![[0.0; HIDDEN]; n];
    for i in 0..n {
        let dpre: [f64; HIDDEN] =
            std::array::from_fn(|k| dv1[i][k] * leaky_grad(trace.upd1_pre[i][k], slope));
        let mut x = [0.0; MP_UPDATE_IN];
        x[..HIDDEN].copy_from_slice(&trace.v0[i]);
        x[HIDDEN..].copy_from_slice(&trace.agg1[i]);
        params.mp1_update.accumulate_grads(&x, &dpre, &mut grads.mp1_update);
        params.mp1_update.input_grad_into(&dpre, &mut dx_upd);
        for k in 0..HIDDEN {
            dagg1[i][k] += dx_upd[HIDDEN + k];
        }
        // dx_upd[..HIDDEN] is the gradient on v0, an input, not a parameter.
    }

    // Layer 1 messages.
    for (e, pre) in trace.edges.iter().zip(&trace.msg1_pre) {
        let (src, dst, feats) = *e;
        let dpre: [f64; HIDDEN] =
            std::array::from_fn(|k| dagg1[dst][k] * leaky_grad(pre[k], slope));
        let mut x = [0.0; MP1_MESSAGE_IN];
        x[..HIDDEN].copy_from_slice(&trace.v0[dst]);
        x[HIDDEN..2 * HIDDEN].copy_from_slice(&trace.v0[src]);
        x[2 * HIDDEN..].copy_from_slice(&feats);
        params
            .mp1_message
            .accumulate_grads(&x, &dpre, &mut grads.mp1_message);
    }

    grads
}

/// Verifies [`backward`] against central finite differences on the probe
/// functional `sx + 2 sy`. Returns the maximum over all parameters of
/// `|analytic - numeric| / max(1e-12, |analytic| + |numeric|)`.
pub fn grad_check(params: &EncoderParams, g: &SceneGraph, epsilon: f64) -> Result<f64> {
    assert!(epsilon > 0.0);
    let probe = |e: &Embedding| e.sx + 2.0 * e.sy;
    let (_, trace) = forward(params, g)?;
    let analytic = backward(params, &trace, [1.0, 2.0]).to_flat();

    let flat = params.to_flat();
    let mut work = params.clone();
    let mut max_rel = 0.0f64;
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += epsilon;
        work.set_flat(&plus);
        let (e_plus, _) = forward(&work, g)?;
        let mut minus = flat.clone();
        minus[i] -= epsilon;
        work.set_flat(&minus);
        let (e_minus, _) = forward(&work, g)?;
        let numeric = (probe(&e_plus) - probe(&e_minus)) / (2.0 * epsilon);
        let rel =
            (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-12);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

/// JSON checkpoint: layer names, shapes, row-major weights, biases,
/// leaky slope, init seed and format version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub init_seed: u64,
    pub leaky_slope: f64,
    pub layers: CheckpointLayers,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointLayers {
    pub mp1_message: LinearLayer,
    pub mp1_update: LinearLayer,
    pub mp2_message: LinearLayer,
    pub mp2_update: LinearLayer,
    pub mlp_hidden: LinearLayer,
    pub mlp_out: LinearLayer,
}

impl Checkpoint {
    pub fn from_params(params: &EncoderParams, init_seed: u64) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            init_seed,
            leaky_slope: params.leaky_slope,
            layers: CheckpointLayers {
                mp1_message: params.mp1_message.clone(),
                mp1_update: params.mp1_update.clone(),
                mp2_message: params.mp2_message.clone(),
                mp2_update: params.mp2_update.clone(),
                mlp_hidden: params.mlp_hidden.clone(),
                mlp_out: params.mlp_out.clone(),
            },
        }
    }

    /// Shape validation happens here; a checkpoint that does not match the
    /// fixed layer shapes is rejected.
    pub fn into_params(self) -> Result<EncoderParams> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported checkpoint format version {}",
                self.format_version
            )));
        }
        let params = EncoderParams {
            mp1_message: self.layers.mp1_message,
            mp1_update: self.layers.mp1_update,
            mp2_message: self.layers.mp2_message,
            mp2_update: self.layers.mp2_update,
            mlp_hidden: self.layers.mlp_hidden,
            mlp_out: self.layers.mlp_out,
            leaky_slope: self.leaky_slope,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}
