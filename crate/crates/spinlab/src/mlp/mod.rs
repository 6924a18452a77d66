//! Small dense networks that regress the sampling temperature of a spin
//! configuration, trained from scratch with minibatch Adam on mean squared
//! error.
//!
//! Architectures are deliberately restricted: an input layer sized to the
//! flattened lattice, up to [`MAX_HIDDEN_LAYERS`] hidden layers of at most
//! [`MAX_LAYER_WIDTH`] neurons each, and a single linear output neuron. That
//! keeps the search space small enough for evolutionary exploration while
//! still covering everything the coverage metrics need to discriminate.

use thiserror::Error;

use crate::lattice::{Dataset, Provenance};

mod io;
pub(crate) mod net;
mod train;

pub use io::{load_model, save_model, ModelIoError};
pub use net::{init_model, ActivationTrace, DenseLayer, TrainedModel};
pub use train::{
    adam_step, backprop_gradients, evaluate, evaluate_regression, mse, train, AdamParams,
    EvaluationReport, Gradients, LayerGradient, TrainConfig,
};

/// Hard cap on hidden depth.
pub const MAX_HIDDEN_LAYERS: usize = 20;
/// Hard cap on hidden layer width.
pub const MAX_LAYER_WIDTH: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("expected an input of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("predictions ({predictions}) and targets ({targets}) differ in length")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite in epoch {epoch}; the model is invalid")]
    TrainingDiverged { epoch: usize },
    #[error("refusing to train on data tagged as the held-out test split")]
    TestDataRefused,
}

/// Hidden-layer nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Elu,
}

/// Every activation choice, in menu order.
pub const ACTIVATIONS: [Activation; 4] =
    [Activation::Relu, Activation::Sigmoid, Activation::Tanh, Activation::Elu];

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            // ELU with alpha = 1; exp_m1 keeps the negative branch accurate.
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    /// Derivative dσ/dz expressed through the activation value `a = σ(z)`.
    ///
    /// All four menu activations admit this form, which lets backprop work
    /// from the recorded traces without storing pre-activations.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Elu => {
                if a > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Elu => "elu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ACTIVATIONS.into_iter().find(|a| a.name() == name)
    }
}

/// Weight initialisation families. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Initializer {
    UniformGlorot,
    NormalGlorot,
    UniformHe,
    NormalHe,
}

/// Every initializer choice, in menu order.
pub const INITIALIZERS: [Initializer; 4] = [
    Initializer::UniformGlorot,
    Initializer::NormalGlorot,
    Initializer::UniformHe,
    Initializer::NormalHe,
];

impl Initializer {
    pub fn name(self) -> &'static str {
        match self {
            Initializer::UniformGlorot => "uniform_glorot",
            Initializer::NormalGlorot => "normal_glorot",
            Initializer::UniformHe => "uniform_he",
            Initializer::NormalHe => "normal_he",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        INITIALIZERS.into_iter().find(|i| i.name() == name)
    }
}

/// Shape, activation, and initialisation of one hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    pub initializer: Initializer,
}

/// A full network description: input width plus the ordered hidden layers.
/// The output layer is always a single linear neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSpec {
    pub input_dim: usize,
    pub hidden: Vec<LayerSpec>,
}

impl ArchitectureSpec {
    pub fn new(input_dim: usize, hidden: Vec<LayerSpec>) -> Result<Self, MlpError> {
        let spec = Self { input_dim, hidden };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        if self.input_dim == 0 {
            return Err(MlpError::InvalidArchitecture("input dimension must be positive".into()));
        }
        if self.hidden.is_empty() || self.hidden.len() > MAX_HIDDEN_LAYERS {
            return Err(MlpError::InvalidArchitecture(format!(
                "hidden layer count {} outside 1..={MAX_HIDDEN_LAYERS}",
                self.hidden.len()
            )));
        }
        for (i, layer) in self.hidden.iter().enumerate() {
            if layer.width == 0 || layer.width > MAX_LAYER_WIDTH {
                return Err(MlpError::InvalidArchitecture(format!(
                    "layer {i} width {} outside 1..={MAX_LAYER_WIDTH}",
                    layer.width
                )));
            }
        }
        Ok(())
    }

    /// Total number of hidden neurons (the `N` that coverage metrics divide by).
    pub fn hidden_neuron_count(&self) -> usize {
        self.hidden.iter().map(|l| l.width).sum()
    }
}

/// A plain regression dataset: real-valued inputs and scalar targets.
///
/// [`Dataset`] converts into this for training; tests and other callers can
/// build one directly from arbitrary vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub provenance: Provenance,
}

impl RegressionData {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Self {
        Self { inputs, targets, provenance: Provenance::Generated }
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        Self {
            inputs: dataset.inputs(),
            targets: dataset.targets(),
            provenance: dataset.provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn activation_values_at_zero() {
        assert_eq!(Activation::Relu.apply(0.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        // Sample along the real line, staying away from the ReLU/ELU kink at
        // the origin where the two-sided difference is not meaningful.
        let h = 1e-6;
        for activation in ACTIVATIONS {
            for i in -40..=40 {
                let z = i as f64 * 0.1;
                if z.abs() < 0.05 {
                    continue;
                }
                let a = activation.apply(z);
                let numeric = (activation.apply(z + h) - activation.apply(z - h)) / (2.0 * h);
                assert_relative_eq!(
                    activation.derivative_from_output(a),
                    numeric,
                    epsilon = 1e-6,
                    max_relative = 1e-6
                );
            }
        }
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        assert_eq!(Activation::Sigmoid.apply(-1e6), 0.0);
        assert_eq!(Activation::Sigmoid.apply(1e6), 1.0);
    }

    #[test]
    fn names_round_trip() {
        for a in ACTIVATIONS {
            assert_eq!(Activation::from_name(a.name()), Some(a));
        }
        for i in INITIALIZERS {
            assert_eq!(Initializer::from_name(i.name()), Some(i));
        }
        assert_eq!(Activation::from_name("swish"), None);
        assert_eq!(Initializer::from_name("orthogonal"), None);
    }

    #[test]
    fn architecture_bounds_are_enforced() {
        let layer = LayerSpec {
            width: 4,
            activation: Activation::Relu,
            initializer: Initializer::UniformGlorot,
        };
        assert!(ArchitectureSpec::new(64, vec![layer]).is_ok());
        assert!(ArchitectureSpec::new(0, vec![layer]).is_err());
        assert!(ArchitectureSpec::new(64, vec![]).is_err());
        assert!(ArchitectureSpec::new(64, vec![layer; MAX_HIDDEN_LAYERS + 1]).is_err());
        assert!(ArchitectureSpec::new(64, vec![LayerSpec { width: 0, ..layer }]).is_err());
        assert!(
            ArchitectureSpec::new(64, vec![LayerSpec { width: MAX_LAYER_WIDTH + 1, ..layer }])
                .is_err()
        );
    }

    #[test]
    fn hidden_neuron_count_sums_widths() {
        let mk = |w| LayerSpec {
            width: w,
            activation: Activation::Tanh,
            initializer: Initializer::NormalHe,
        };
        let spec = ArchitectureSpec::new(8, vec![mk(3), mk(5)]).unwrap();
        assert_eq!(spec.hidden_neuron_count(), 8);
    }
}
