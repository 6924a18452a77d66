//! Network storage, initialisation, and the forward pass.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{ArchitectureSpec, Initializer, MlpError};
use crate::seeds;

/// One dense layer: `rows` outputs, `cols` inputs, weights row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl DenseLayer {
    /// `z = W x + b`, written into `out`.
    #[inline]
    fn affine_into(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.biases[r];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            *slot = acc;
        }
    }
}

/// Post-activation values of every hidden neuron for one input, layer by
/// layer. This is the object the coverage metrics consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layers: Vec<Vec<f64>>,
}

/// A concrete network: its architecture, one dense layer per hidden spec
/// plus the final linear output layer, and the per-epoch training history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ArchitectureSpec,
    /// `spec.hidden.len() + 1` layers; the last maps to the scalar output.
    pub layers: Vec<DenseLayer>,
    /// Full-training-set MSE at the end of each completed epoch.
    pub history: Vec<f64>,
}

fn fill_weights(
    initializer: Initializer,
    fan_in: usize,
    fan_out: usize,
    weights: &mut [f64],
    rng: &mut impl Rng,
) {
    match initializer {
        Initializer::UniformGlorot => {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Initializer::NormalGlorot => {
            let normal = Normal::new(0.0, (2.0 / (fan_in + fan_out) as f64).sqrt()).unwrap();
            for w in weights {
                *w = normal.sample(rng);
            }
        }
        Initializer::UniformHe => {
            let bound = (6.0 / fan_in as f64).sqrt();
            for w in weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Initializer::NormalHe => {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            for w in weights {
                *w = normal.sample(rng);
            }
        }
    }
}

/// Builds a network for `spec` with freshly initialised weights and zero
/// biases. Weights are drawn layer by layer in row-major order from a
/// generator seeded with `seed`, so the same `(spec, seed)` pair always
/// produces the same parameters.
///
/// The output layer has no initializer of its own in the architecture
/// description; it reuses the family of the last hidden layer.
pub fn init_model(spec: &ArchitectureSpec, seed: u64) -> Result<TrainedModel, MlpError> {
    spec.validate()?;
    let mut rng = seeds::seeded_rng(seed);
    let mut layers = Vec::with_capacity(spec.hidden.len() + 1);
    let mut fan_in = spec.input_dim;
    for layer in &spec.hidden {
        let mut weights = vec![0.0; layer.width * fan_in];
        fill_weights(layer.initializer, fan_in, layer.width, &mut weights, &mut rng);
        layers.push(DenseLayer {
            weights,
            biases: vec![0.0; layer.width],
            rows: layer.width,
            cols: fan_in,
        });
        fan_in = layer.width;
    }
    let last_family = spec.hidden.last().expect("validated non-empty").initializer;
    let mut out_weights = vec![0.0; fan_in];
    fill_weights(last_family, fan_in, 1, &mut out_weights, &mut rng);
    layers.push(DenseLayer { weights: out_weights, biases: vec![0.0], rows: 1, cols: fan_in });
    Ok(TrainedModel { spec: spec.clone(), layers, history: Vec::new() })
}

/// Reusable buffers for forward/backward passes. Keeping them out of the
/// public API lets the hot training loop avoid per-sample allocation.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    /// Post-activation values per hidden layer.
    pub(crate) activations: Vec<Vec<f64>>,
    /// Backpropagated gradients w.r.t. each hidden layer's output.
    pub(crate) deltas: Vec<Vec<f64>>,
}

impl Scratch {
    pub(crate) fn for_model(model: &TrainedModel) -> Self {
        let activations: Vec<Vec<f64>> =
            model.spec.hidden.iter().map(|l| vec![0.0; l.width]).collect();
        Self { deltas: activations.clone(), activations }
    }
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), MlpError> {
        if input.len() != self.spec.input_dim {
            return Err(MlpError::DimensionMismatch {
                expected: self.spec.input_dim,
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Forward pass writing hidden activations into `scratch`; returns the
    /// prediction. The input length must already be verified.
    pub(crate) fn forward_scratch(&self, input: &[f64], scratch: &mut Scratch) -> f64 {
        let hidden = self.spec.hidden.len();
        for l in 0..hidden {
            // Split borrow: activations[l] is written from activations[l-1].
            let (done, rest) = scratch.activations.split_at_mut(l);
            let prev: &[f64] = if l == 0 { input } else { &done[l - 1] };
            let out = &mut rest[0];
            self.layers[l].affine_into(prev, out);
            let act = self.spec.hidden[l].activation;
            for v in out.iter_mut() {
                *v = act.apply(*v);
            }
        }
        let last = &scratch.activations[hidden - 1];
        let out_layer = &self.layers[hidden];
        let mut z = out_layer.biases[0];
        for (w, x) in out_layer.weights.iter().zip(last) {
            z += w * x;
        }
        z
    }

    /// Runs the network on one input, returning the scalar prediction and
    /// the post-activation trace of every hidden layer.
    pub fn forward(&self, input: &[f64]) -> Result<(f64, ActivationTrace), MlpError> {
        self.check_input(input)?;
        let mut scratch = Scratch::for_model(self);
        let prediction = self.forward_scratch(input, &mut scratch);
        Ok((prediction, ActivationTrace { layers: scratch.activations }))
    }

    /// Prediction only.
    pub fn predict(&self, input: &[f64]) -> Result<f64, MlpError> {
        self.check_input(input)?;
        let mut scratch = Scratch::for_model(self);
        Ok(self.forward_scratch(input, &mut scratch))
    }
}
