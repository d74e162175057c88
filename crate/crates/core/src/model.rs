//! Feedforward ReLU network with an optional abstention output, plus weight
//! serialization.
//!
//! The architecture is deliberately minimal (linear layers + ReLU, He init,
//! no normalization or dropout) so that every gradient is exactly checkable
//! against finite differences. The training objectives are architecture
//! agnostic: anything producing an `N×outputs` logits batch would do.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{relu, relu_backward, Matrix, Rng};

/// Architecture description. `abstain_head` adds one extra output column for
/// the abstention losses; it changes nothing else about the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub abstain_head: bool,
}

impl MlpSpec {
    pub fn output_dim(&self) -> usize {
        self.num_classes + usize::from(self.abstain_head)
    }

    /// Layer widths from input to output, e.g. `[10, 256, 256, 3]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim());
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".to_string()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("hidden layer widths must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Weights, biases, and the SGD momentum buffers that travel with them.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpState {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub vel_weights: Vec<Matrix>,
    pub vel_biases: Vec<Vec<f64>>,
}

impl MlpState {
    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        let w: usize = self.weights.iter().map(|m| m.data().len()).sum();
        let b: usize = self.biases.iter().map(|b| b.len()).sum();
        w + b
    }
}

/// Activations recorded by [`forward_cached`] for the backward pass.
pub struct ForwardCache {
    /// `a_0 = input`, then each post-ReLU hidden activation.
    activations: Vec<Matrix>,
    /// Pre-activation of each hidden layer, for the ReLU mask.
    preacts: Vec<Matrix>,
}

/// Parameter gradients, same shapes as the weights and biases.
#[derive(Debug, Clone)]
pub struct Grads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// He-style initialization: weights `~ N(0, 2/fan_in)`, biases zero,
/// momentum buffers zero. Deterministic given the RNG state.
pub fn init(spec: &MlpSpec, rng: &mut Rng) -> Result<MlpState> {
    spec.validate()?;
    let dims = spec.layer_dims();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let std = (2.0 / fan_in as f64).sqrt();
        let mut m = Matrix::zeros(fan_in, fan_out);
        for v in m.data_mut() {
            *v = rng.normal() * std;
        }
        weights.push(m);
        biases.push(vec![0.0; fan_out]);
    }
    let vel_weights = weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect();
    let vel_biases = biases.iter().map(|b| vec![0.0; b.len()]).collect();
    Ok(MlpState { weights, biases, vel_weights, vel_biases })
}

fn check_input(state: &MlpState, batch: &Matrix) -> Result<()> {
    let expected = state.weights[0].rows();
    if batch.cols() != expected {
        return Err(Error::Shape(format!(
            "forward: batch has {} features, model expects {}",
            batch.cols(),
            expected
        )));
    }
    Ok(())
}

/// Logits for a batch, without recording anything for backward.
pub fn forward(state: &MlpState, batch: &Matrix) -> Result<Matrix> {
    check_input(state, batch)?;
    let last = state.num_layers() - 1;
    let mut a = batch.clone();
    for (l, (w, b)) in state.weights.iter().zip(&state.biases).enumerate() {
        let mut z = a.matmul(w)?;
        z.add_row_vec(b)?;
        a = if l < last { relu(&z) } else { z };
    }
    Ok(a)
}

/// Logits plus the cache needed by [`backward`].
pub fn forward_cached(state: &MlpState, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    check_input(state, batch)?;
    let last = state.num_layers() - 1;
    let mut activations = vec![batch.clone()];
    let mut preacts = Vec::new();
    for (l, (w, b)) in state.weights.iter().zip(&state.biases).enumerate() {
        let mut z = activations[l].matmul(w)?;
        z.add_row_vec(b)?;
        if l < last {
            activations.push(relu(&z));
            preacts.push(z);
        } else {
            return Ok((z, ForwardCache { activations, preacts }));
        }
    }
    unreachable!("a validated MlpState has at least one layer");
}

/// Exact backprop through the linear+ReLU stack. The cache must come from a
/// [`forward_cached`] call on this same state and batch.
pub fn backward(state: &MlpState, cache: &ForwardCache, grad_logits: &Matrix) -> Result<Grads> {
    let layers = state.num_layers();
    if cache.activations.len() != layers || cache.preacts.len() != layers - 1 {
        return Err(Error::Shape("backward: cache does not match the model depth".to_string()));
    }
    if grad_logits.cols() != state.weights[layers - 1].cols() {
        return Err(Error::Shape(format!(
            "backward: grad has {} columns, output layer has {}",
            grad_logits.cols(),
            state.weights[layers - 1].cols()
        )));
    }
    let mut dw = vec![Matrix::zeros(0, 0); layers];
    let mut db = vec![Vec::new(); layers];
    let mut upstream = grad_logits.clone();
    for l in (0..layers).rev() {
        dw[l] = cache.activations[l].matmul_at_b(&upstream)?;
        db[l] = upstream.col_sums();
        if l > 0 {
            let da = upstream.matmul_a_bt(&state.weights[l])?;
            upstream = relu_backward(&da, &cache.preacts[l - 1])?;
        }
    }
    Ok(Grads { weights: dw, biases: db })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"IDACCKPT";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    spec: MlpSpec,
    seed: u64,
    epoch: usize,
    /// Payload layout, in order: weights, biases, velocity weights,
    /// velocity biases; each flattened row-major as little-endian f64.
    payload_len: usize,
}

/// A deserialized checkpoint: the architecture, provenance, and full state
/// (momentum buffers included, so resumed training is bit-identical).
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec: MlpSpec,
    pub seed: u64,
    pub epoch: usize,
    pub state: MlpState,
}

fn payload_of(state: &MlpState) -> Vec<f64> {
    let mut out = Vec::new();
    for w in &state.weights {
        out.extend_from_slice(w.data());
    }
    for b in &state.biases {
        out.extend_from_slice(b);
    }
    for w in &state.vel_weights {
        out.extend_from_slice(w.data());
    }
    for b in &state.vel_biases {
        out.extend_from_slice(b);
    }
    out
}

/// Writes `magic | u64 LE header length | JSON header | LE f64 payload`.
pub fn save_checkpoint(
    state: &MlpState,
    spec: &MlpSpec,
    seed: u64,
    epoch: usize,
    path: &Path,
) -> Result<()> {
    let payload = payload_of(state);
    let header = CheckpointHeader {
        version: 1,
        spec: spec.clone(),
        seed,
        epoch,
        payload_len: payload.len(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(CHECKPOINT_MAGIC)?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    for v in payload {
        file.write_all(&v.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("{}: not a checkpoint file", path.display())));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.version != 1 {
        return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
    }
    header.spec.validate()?;

    let mut payload = vec![0u8; header.payload_len * 8];
    file.read_exact(&mut payload)?;
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));

    let dims = header.spec.layer_dims();
    let mut take = |n: usize| -> Result<Vec<f64>> {
        let chunk: Vec<f64> = values.by_ref().take(n).collect();
        if chunk.len() != n {
            return Err(Error::Format("checkpoint payload shorter than header claims".to_string()));
        }
        Ok(chunk)
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in dims.windows(2) {
        weights.push(Matrix::from_vec(w[0], w[1], take(w[0] * w[1])?)?);
    }
    for w in dims.windows(2) {
        biases.push(take(w[1])?);
    }
    let mut vel_weights = Vec::new();
    let mut vel_biases = Vec::new();
    for w in dims.windows(2) {
        vel_weights.push(Matrix::from_vec(w[0], w[1], take(w[0] * w[1])?)?);
    }
    for w in dims.windows(2) {
        vel_biases.push(take(w[1])?);
    }
    if values.next().is_some() {
        return Err(Error::Format("checkpoint payload longer than header claims".to_string()));
    }
    Ok(Checkpoint {
        spec: header.spec,
        seed: header.seed,
        epoch: header.epoch,
        state: MlpState { weights, biases, vel_weights, vel_biases },
    })
}
