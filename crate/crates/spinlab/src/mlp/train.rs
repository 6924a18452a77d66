//! Loss, exact gradients, Adam, and the training loop.

use rand::seq::SliceRandom;

use super::net::Scratch;
use super::{MlpError, RegressionData, TrainedModel};
use crate::lattice::{Dataset, Provenance};
use crate::seeds;

/// Mean squared error between aligned slices.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64, MlpError> {
    if predictions.len() != targets.len() {
        return Err(MlpError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MlpError::Empty);
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let r = p - t;
            r * r
        })
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Per-layer parameter gradients, shaped exactly like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    fn zeroed_for(model: &TrainedModel) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    fn zero(&mut self) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|v| *v = 0.0);
            layer.biases.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Runs one sample forward and adds its gradient contribution (already scaled
/// by `2 r / batch_len`) into `grads`. Returns the squared residual.
fn accumulate_sample(
    model: &TrainedModel,
    input: &[f64],
    target: f64,
    inverse_batch: f64,
    grads: &mut Gradients,
    scratch: &mut Scratch,
) -> f64 {
    let hidden = model.spec.hidden.len();
    let prediction = model.forward_scratch(input, scratch);
    let residual = prediction - target;
    let upstream = 2.0 * residual * inverse_batch;

    // Output layer: dL/dw_j = upstream * a_j, dL/db = upstream, and the
    // gradient flowing into the last hidden layer is upstream * w_j.
    {
        let last = &scratch.activations[hidden - 1];
        let out_grad = &mut grads.layers[hidden];
        for (g, a) in out_grad.weights.iter_mut().zip(last) {
            *g += upstream * a;
        }
        out_grad.biases[0] += upstream;
        let out_layer = &model.layers[hidden];
        let act = model.spec.hidden[hidden - 1].activation;
        for ((d, w), a) in scratch.deltas[hidden - 1]
            .iter_mut()
            .zip(&out_layer.weights)
            .zip(last)
        {
            *d = upstream * w * act.derivative_from_output(*a);
        }
    }

    // Hidden layers, last to first. deltas[l] already holds dL/dz for layer l.
    for l in (0..hidden).rev() {
        let (lower, upper) = scratch.deltas.split_at_mut(l);
        let delta = &upper[0];
        let grad = &mut grads.layers[l];
        let cols = model.layers[l].cols;
        let prev: &[f64] = if l == 0 { input } else { &scratch.activations[l - 1] };
        for (j, &d) in delta.iter().enumerate() {
            let row = &mut grad.weights[j * cols..(j + 1) * cols];
            for (g, x) in row.iter_mut().zip(prev) {
                *g += d * x;
            }
            grad.biases[j] += d;
        }
        if l > 0 {
            let act = model.spec.hidden[l - 1].activation;
            let prev_act = &scratch.activations[l - 1];
            let prev_delta = &mut lower[l - 1];
            let weights = &model.layers[l].weights;
            for (i, slot) in prev_delta.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, &d) in delta.iter().enumerate() {
                    acc += d * weights[j * cols + i];
                }
                *slot = acc * act.derivative_from_output(prev_act[i]);
            }
        }
    }

    residual * residual
}

/// Exact gradient of the batch mean squared error with respect to every
/// weight and bias, computed by backpropagation.
pub fn backprop_gradients(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
    targets: &[f64],
) -> Result<Gradients, MlpError> {
    if inputs.len() != targets.len() {
        return Err(MlpError::LengthMismatch { predictions: inputs.len(), targets: targets.len() });
    }
    if inputs.is_empty() {
        return Err(MlpError::Empty);
    }
    for input in inputs {
        if input.len() != model.spec.input_dim {
            return Err(MlpError::DimensionMismatch {
                expected: model.spec.input_dim,
                got: input.len(),
            });
        }
    }
    let mut grads = Gradients::zeroed_for(model);
    let mut scratch = Scratch::for_model(model);
    let inverse_batch = 1.0 / inputs.len() as f64;
    for (input, &target) in inputs.iter().zip(targets) {
        accumulate_sample(model, input, target, inverse_batch, &mut grads, &mut scratch);
    }
    Ok(grads)
}

/// Adam hyperparameters. `Default` gives the standard
/// `α = 0.001, β₁ = 0.9, β₂ = 0.999, ε = 1e-8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { learning_rate: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<(), MlpError> {
        if !(self.learning_rate >= 0.0) {
            return Err(MlpError::InvalidConfig("learning rate must be non-negative".into()));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(MlpError::InvalidConfig(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(MlpError::InvalidConfig("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// One Adam update with bias correction:
///
/// ```text
/// m ← β₁ m + (1-β₁) g        m̂ = m / (1 - β₁ᵗ)
/// v ← β₂ v + (1-β₂) g²       v̂ = v / (1 - β₂ᵗ)
/// θ ← θ - α m̂ / (√v̂ + ε)
/// ```
///
/// `step` is the 1-based global update count shared by all parameters.
pub fn adam_step(
    theta: &mut [f64],
    gradients: &[f64],
    first_moment: &mut [f64],
    second_moment: &mut [f64],
    step: usize,
    params: &AdamParams,
) {
    assert!(step >= 1, "Adam steps are 1-based");
    assert_eq!(theta.len(), gradients.len());
    assert_eq!(theta.len(), first_moment.len());
    assert_eq!(theta.len(), second_moment.len());
    let m_correction = 1.0 - params.beta1.powi(step as i32);
    let v_correction = 1.0 - params.beta2.powi(step as i32);
    for i in 0..theta.len() {
        let g = gradients[i];
        first_moment[i] = params.beta1 * first_moment[i] + (1.0 - params.beta1) * g;
        second_moment[i] = params.beta2 * second_moment[i] + (1.0 - params.beta2) * g * g;
        let m_hat = first_moment[i] / m_correction;
        let v_hat = second_moment[i] / v_correction;
        theta[i] -= params.learning_rate * m_hat / (v_hat.sqrt() + params.epsilon);
    }
}

/// Training schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    /// Drives minibatch shuffling; training is a pure function of
    /// `(model, data, config)`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 100, adam: AdamParams::default(), seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        if self.epochs == 0 {
            return Err(MlpError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(MlpError::InvalidConfig("batch size must be at least 1".into()));
        }
        self.adam.validate()
    }
}

struct AdamState {
    first: Vec<LayerGradient>,
    second: Vec<LayerGradient>,
}

/// Trains the model with shuffled minibatch Adam on MSE.
///
/// Every epoch reshuffles the sample order (a trailing short batch is kept),
/// and `model.history` records the full-training-set MSE after each epoch.
/// If the loss ever stops being finite the model is rejected as invalid via
/// [`MlpError::TrainingDiverged`]. Data tagged as the test split is refused
/// outright — held-out data must never reach the optimiser.
pub fn train(
    mut model: TrainedModel,
    data: &RegressionData,
    config: &TrainConfig,
) -> Result<TrainedModel, MlpError> {
    config.validate()?;
    if data.provenance == Provenance::Test {
        return Err(MlpError::TestDataRefused);
    }
    if data.is_empty() {
        return Err(MlpError::Empty);
    }
    if data.inputs.len() != data.targets.len() {
        return Err(MlpError::LengthMismatch {
            predictions: data.inputs.len(),
            targets: data.targets.len(),
        });
    }
    for input in &data.inputs {
        if input.len() != model.spec.input_dim {
            return Err(MlpError::DimensionMismatch {
                expected: model.spec.input_dim,
                got: input.len(),
            });
        }
    }

    let mut rng = seeds::seeded_rng(config.seed);
    let mut order: Vec<usize> = (0..data.inputs.len()).collect();
    let mut grads = Gradients::zeroed_for(&model);
    let mut scratch = Scratch::for_model(&model);
    let mut state = AdamState {
        first: Gradients::zeroed_for(&model).layers,
        second: Gradients::zeroed_for(&model).layers,
    };
    let mut step = 0usize;
    model.history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            let inverse_batch = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += accumulate_sample(
                    &model,
                    &data.inputs[i],
                    data.targets[i],
                    inverse_batch,
                    &mut grads,
                    &mut scratch,
                );
            }
            if !batch_loss.is_finite() {
                return Err(MlpError::TrainingDiverged { epoch });
            }
            step += 1;
            for l in 0..model.layers.len() {
                adam_step(
                    &mut model.layers[l].weights,
                    &grads.layers[l].weights,
                    &mut state.first[l].weights,
                    &mut state.second[l].weights,
                    step,
                    &config.adam,
                );
                adam_step(
                    &mut model.layers[l].biases,
                    &grads.layers[l].biases,
                    &mut state.first[l].biases,
                    &mut state.second[l].biases,
                    step,
                    &config.adam,
                );
            }
        }
        let epoch_loss = full_set_loss(&model, data, &mut scratch);
        if !epoch_loss.is_finite() {
            return Err(MlpError::TrainingDiverged { epoch });
        }
        model.history.push(epoch_loss);
    }
    Ok(model)
}

fn full_set_loss(model: &TrainedModel, data: &RegressionData, scratch: &mut Scratch) -> f64 {
    let mut sum = 0.0;
    for (input, &target) in data.inputs.iter().zip(&data.targets) {
        let r = model.forward_scratch(input, scratch) - target;
        sum += r * r;
    }
    sum / data.inputs.len() as f64
}

/// MSE of the model over a regression dataset.
pub fn evaluate_regression(model: &TrainedModel, data: &RegressionData) -> Result<f64, MlpError> {
    if data.is_empty() {
        return Err(MlpError::Empty);
    }
    let mut scratch = Scratch::for_model(model);
    let mut sum = 0.0;
    for (input, &target) in data.inputs.iter().zip(&data.targets) {
        if input.len() != model.spec.input_dim {
            return Err(MlpError::DimensionMismatch {
                expected: model.spec.input_dim,
                got: input.len(),
            });
        }
        let r = model.forward_scratch(input, &mut scratch) - target;
        sum += r * r;
    }
    Ok(sum / data.inputs.len() as f64)
}

/// Global MSE plus the per-temperature breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub mse: f64,
    /// `(temperature, mse)` in grid order; grid points without samples are
    /// omitted.
    pub per_temperature: Vec<(f64, f64)>,
}

/// Evaluates the model on a labeled spin dataset, reporting the overall MSE
/// and the MSE restricted to each grid temperature.
pub fn evaluate(model: &TrainedModel, dataset: &Dataset) -> Result<EvaluationReport, MlpError> {
    if dataset.is_empty() {
        return Err(MlpError::Empty);
    }
    let dim = dataset.lattice_size * dataset.lattice_size;
    if dim != model.spec.input_dim {
        return Err(MlpError::DimensionMismatch { expected: model.spec.input_dim, got: dim });
    }
    let mut scratch = Scratch::for_model(model);
    let mut input = vec![0.0; dim];
    let mut residuals_sq = Vec::with_capacity(dataset.len());
    for sample in &dataset.samples {
        for (slot, &s) in input.iter_mut().zip(&sample.configuration) {
            *slot = s as f64;
        }
        let r = model.forward_scratch(&input, &mut scratch) - sample.temperature;
        residuals_sq.push(r * r);
    }
    let global = residuals_sq.iter().sum::<f64>() / residuals_sq.len() as f64;
    let mut per_temperature = Vec::new();
    for (temperature, indices) in dataset.per_temperature_indices() {
        if indices.is_empty() {
            continue;
        }
        let sum: f64 = indices.iter().map(|&i| residuals_sq[i]).sum();
        per_temperature.push((temperature, sum / indices.len() as f64));
    }
    Ok(EvaluationReport { mse: global, per_temperature })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{temperature_grid, LabeledSample};
    use crate::mlp::net::DenseLayer;
    use crate::mlp::{init_model, Activation, ArchitectureSpec, Initializer, LayerSpec};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn spec(input_dim: usize, hidden: &[(usize, Activation)]) -> ArchitectureSpec {
        let layers = hidden
            .iter()
            .map(|&(width, activation)| LayerSpec {
                width,
                activation,
                initializer: Initializer::UniformGlorot,
            })
            .collect();
        ArchitectureSpec::new(input_dim, layers).unwrap()
    }

    /// A 1-input network with one single-neuron hidden layer: weights chosen
    /// by hand so every gradient is a small integer.
    fn tiny_hand_model() -> TrainedModel {
        TrainedModel {
            spec: spec(1, &[(1, Activation::Relu)]),
            layers: vec![
                DenseLayer { weights: vec![1.0], biases: vec![0.0], rows: 1, cols: 1 },
                DenseLayer { weights: vec![3.0], biases: vec![0.0], rows: 1, cols: 1 },
            ],
            history: Vec::new(),
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        // ((1-0)^2 + (2-0)^2) / 2 = 5/2
        assert_eq!(mse(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5);
        assert!(matches!(mse(&[], &[]), Err(MlpError::Empty)));
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(MlpError::LengthMismatch { predictions: 1, targets: 2 })
        ));
    }

    #[test]
    fn mse_of_the_grid_mean_predictor() {
        // Predicting the mean of a uniform 26-point grid with spacing h has
        // MSE equal to the population variance, (n^2 - 1)/12 * h^2 = 0.5625.
        let grid = temperature_grid(1.0, 3.5, 26).unwrap();
        let mean = grid.iter().sum::<f64>() / grid.len() as f64;
        let predictions = vec![mean; grid.len()];
        let got = mse(&predictions, &grid).unwrap();
        assert_abs_diff_eq!(got, 0.5625, epsilon = 1e-12);
    }

    #[test]
    fn backprop_matches_a_hand_worked_example() {
        // x = 2, target 1: hidden z = 2, a = 2, prediction = 6, residual 5.
        // With batch size 1 the upstream factor is 2*5 = 10, so:
        //   output: dW = 10 * 2 = 20, db = 10
        //   hidden: delta = 10 * 3 * relu' = 30, dW = 30 * 2 = 60, db = 30
        let model = tiny_hand_model();
        let grads = backprop_gradients(&model, &[vec![2.0]], &[1.0]).unwrap();
        assert_eq!(grads.layers[1].weights, vec![20.0]);
        assert_eq!(grads.layers[1].biases, vec![10.0]);
        assert_eq!(grads.layers[0].weights, vec![60.0]);
        assert_eq!(grads.layers[0].biases, vec![30.0]);
    }

    #[test]
    fn zero_residual_gives_exactly_zero_gradients() {
        let model = init_model(&spec(3, &[(4, Activation::Tanh), (2, Activation::Elu)]), 9).unwrap();
        let inputs = vec![vec![0.3, -0.8, 0.5], vec![1.0, 0.0, -1.0]];
        let targets: Vec<f64> = inputs.iter().map(|x| model.predict(x).unwrap()).collect();
        let grads = backprop_gradients(&model, &inputs, &targets).unwrap();
        for layer in &grads.layers {
            assert!(layer.weights.iter().all(|&g| g == 0.0));
            assert!(layer.biases.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn backprop_rejects_bad_shapes() {
        let model = tiny_hand_model();
        assert!(matches!(
            backprop_gradients(&model, &[], &[]),
            Err(MlpError::Empty)
        ));
        assert!(matches!(
            backprop_gradients(&model, &[vec![1.0]], &[1.0, 2.0]),
            Err(MlpError::LengthMismatch { .. })
        ));
        assert!(matches!(
            backprop_gradients(&model, &[vec![1.0, 2.0]], &[1.0]),
            Err(MlpError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    fn batch_loss(model: &TrainedModel, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
        let predictions: Vec<f64> =
            inputs.iter().map(|x| model.predict(x).unwrap()).collect();
        mse(&predictions, targets).unwrap()
    }

    fn param_mut(model: &mut TrainedModel, l: usize, bias: bool, i: usize) -> &mut f64 {
        if bias {
            &mut model.layers[l].biases[i]
        } else {
            &mut model.layers[l].weights[i]
        }
    }

    /// Central-difference check of every single weight and bias gradient.
    fn check_gradients_numerically(mut model: TrainedModel, inputs: Vec<Vec<f64>>, targets: Vec<f64>) {
        const H: f64 = 1e-5;
        let grads = backprop_gradients(&model, &inputs, &targets).unwrap();
        for l in 0..grads.layers.len() {
            for bias in [false, true] {
                let analytic = if bias {
                    grads.layers[l].biases.clone()
                } else {
                    grads.layers[l].weights.clone()
                };
                for (i, &exact) in analytic.iter().enumerate() {
                    let original = *param_mut(&mut model, l, bias, i);
                    *param_mut(&mut model, l, bias, i) = original + H;
                    let up = batch_loss(&model, &inputs, &targets);
                    *param_mut(&mut model, l, bias, i) = original - H;
                    let down = batch_loss(&model, &inputs, &targets);
                    *param_mut(&mut model, l, bias, i) = original;
                    let numeric = (up - down) / (2.0 * H);
                    let tolerance = 1e-8 + 1e-5 * exact.abs().max(numeric.abs());
                    assert!(
                        (exact - numeric).abs() <= tolerance,
                        "layer {l} bias {bias} index {i}: backprop {exact} vs finite difference {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cases = [
            (spec(3, &[(4, Activation::Tanh), (3, Activation::Sigmoid)]), 7),
            (spec(2, &[(5, Activation::Elu), (4, Activation::Relu), (3, Activation::Tanh)]), 11),
        ];
        for (arch, seed) in cases {
            let dim = arch.input_dim;
            let model = init_model(&arch, seed).unwrap();
            let mut rng = crate::seeds::seeded_rng(seed ^ 0xfeed);
            let inputs: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let targets: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            check_gradients_numerically(model, inputs, targets);
        }
    }

    #[test]
    fn adam_with_zero_gradient_changes_nothing() {
        let mut theta = vec![0.7, -1.3];
        let mut m = vec![0.0, 0.0];
        let mut v = vec![0.0, 0.0];
        adam_step(&mut theta, &[0.0, 0.0], &mut m, &mut v, 1, &AdamParams::default());
        assert_eq!(theta, vec![0.7, -1.3]);
        assert_eq!(m, vec![0.0, 0.0]);
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn adam_first_step_matches_hand_arithmetic() {
        let params = AdamParams::default();
        let mut theta = vec![0.0];
        let mut m = vec![0.0];
        let mut v = vec![0.0];
        adam_step(&mut theta, &[1.0], &mut m, &mut v, 1, &params);
        // m = 0.1, v = 0.001; both bias corrections cancel the decay exactly,
        // so the step is -alpha * 1 / (1 + eps) up to rounding.
        let m_hat: f64 = 0.1 / (1.0 - 0.9);
        let v_hat: f64 = 0.001 / (1.0 - 0.999);
        let expected = -0.001 * m_hat / (v_hat.sqrt() + 1e-8);
        assert_abs_diff_eq!(theta[0], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(m[0], 0.1, epsilon = 1e-16);
        assert_abs_diff_eq!(v[0], 0.001, epsilon = 1e-16);
    }

    #[test]
    fn adam_two_steps_match_hand_arithmetic() {
        let params = AdamParams::default();
        let mut theta = vec![0.5];
        let mut m = vec![0.0];
        let mut v = vec![0.0];
        adam_step(&mut theta, &[1.0], &mut m, &mut v, 1, &params);
        adam_step(&mut theta, &[1.0], &mut m, &mut v, 2, &params);

        // Step 1: m = 0.1, v = 0.001, corrections 0.1 and 0.001.
        let m1: f64 = 0.1;
        let v1: f64 = 0.001;
        let step1 = 0.001 * (m1 / (1.0 - 0.9)) / ((v1 / (1.0 - 0.999)).sqrt() + 1e-8);
        // Step 2: m = 0.9*0.1 + 0.1 = 0.19, v = 0.999*0.001 + 0.001 = 0.001999,
        // corrections 1 - 0.81 and 1 - 0.998001.
        let m2 = 0.9 * m1 + 0.1;
        let v2 = 0.999 * v1 + 0.001;
        let step2 = 0.001 * (m2 / (1.0 - 0.9 * 0.9)) / ((v2 / (1.0 - 0.999 * 0.999)).sqrt() + 1e-8);
        let expected = 0.5 - step1 - step2;
        assert_abs_diff_eq!(theta[0], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(m[0], m2, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0], v2, epsilon = 1e-15);
    }

    fn line_data(n: usize) -> RegressionData {
        let inputs: Vec<Vec<f64>> =
            (0..n).map(|i| vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64]).collect();
        let targets = inputs.iter().map(|x| 2.0 * x[0]).collect();
        RegressionData::new(inputs, targets)
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let model = init_model(&spec(1, &[(4, Activation::Tanh)]), 5).unwrap();
        let before = model.layers.clone();
        let config = TrainConfig {
            epochs: 3,
            batch_size: 16,
            adam: AdamParams { learning_rate: 0.0, ..AdamParams::default() },
            seed: 1,
        };
        let trained = train(model, &line_data(64), &config).unwrap();
        assert_eq!(trained.layers, before);
        assert_eq!(trained.history.len(), 3);
        assert_eq!(trained.history[0], trained.history[1]);
        assert_eq!(trained.history[1], trained.history[2]);
    }

    #[test]
    fn a_linear_relationship_is_learned() {
        // Eight relu neurons represent y = 2x exactly, so the optimizer can
        // drive the loss essentially to zero.
        let model = init_model(&spec(1, &[(8, Activation::Relu)]), 3).unwrap();
        let config = TrainConfig {
            epochs: 500,
            batch_size: 16,
            adam: AdamParams { learning_rate: 0.01, ..AdamParams::default() },
            seed: 3,
        };
        let trained = train(model, &line_data(64), &config).unwrap();
        let final_loss = *trained.history.last().unwrap();
        assert!(final_loss < 1e-6, "final training loss {final_loss}");
    }

    #[test]
    fn epoch_losses_decrease_after_the_first_epoch() {
        let model = init_model(&spec(1, &[(8, Activation::Relu)]), 3).unwrap();
        let config = TrainConfig {
            epochs: 500,
            batch_size: 16,
            adam: AdamParams { learning_rate: 0.01, ..AdamParams::default() },
            seed: 3,
        };
        let trained = train(model, &line_data(64), &config).unwrap();
        for pair in trained.history[1..].windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "loss went up: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let data = line_data(40);
        let config = TrainConfig { epochs: 5, batch_size: 7, ..TrainConfig::default() };
        let run = || {
            let model = init_model(&spec(1, &[(6, Activation::Relu)]), 21).unwrap();
            train(model, &data, &config).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn a_diverging_loss_is_reported_with_its_epoch() {
        // An input of 1e200 through unit weights makes the squared residual
        // overflow to infinity in the very first batch.
        let model = tiny_hand_model();
        let data = RegressionData::new(vec![vec![1e200]], vec![0.0]);
        let err = train(model, &data, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, MlpError::TrainingDiverged { epoch: 1 }));
    }

    #[test]
    fn training_on_the_test_split_is_refused() {
        let model = tiny_hand_model();
        let mut data = line_data(8);
        data.provenance = Provenance::Test;
        assert!(matches!(
            train(model, &data, &TrainConfig::default()),
            Err(MlpError::TestDataRefused)
        ));
    }

    #[test]
    fn history_has_one_entry_per_epoch() {
        let model = init_model(&spec(1, &[(3, Activation::Sigmoid)]), 2).unwrap();
        let config = TrainConfig { epochs: 7, batch_size: 10, ..TrainConfig::default() };
        let trained = train(model, &line_data(20), &config).unwrap();
        assert_eq!(trained.history.len(), 7);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_epochs = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(bad_epochs.validate().is_err());
        let bad_batch = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(bad_batch.validate().is_err());
        let bad_beta = AdamParams { beta1: 1.0, ..AdamParams::default() };
        assert!(bad_beta.validate().is_err());
        let bad_lr = AdamParams { learning_rate: -0.1, ..AdamParams::default() };
        assert!(bad_lr.validate().is_err());
    }

    /// A model that ignores its input and always outputs `constant`.
    fn constant_model(input_dim: usize, constant: f64) -> TrainedModel {
        TrainedModel {
            spec: spec(input_dim, &[(1, Activation::Relu)]),
            layers: vec![
                DenseLayer {
                    weights: vec![0.0; input_dim],
                    biases: vec![0.0],
                    rows: 1,
                    cols: input_dim,
                },
                DenseLayer { weights: vec![0.0], biases: vec![constant], rows: 1, cols: 1 },
            ],
            history: Vec::new(),
        }
    }

    #[test]
    fn evaluate_reports_global_and_per_temperature_errors() {
        let samples = vec![
            LabeledSample { configuration: vec![1, 1, 1, 1], temperature: 1.0 },
            LabeledSample { configuration: vec![-1, 1, -1, 1], temperature: 1.0 },
            LabeledSample { configuration: vec![1, -1, 1, -1], temperature: 3.0 },
            LabeledSample { configuration: vec![-1, -1, -1, -1], temperature: 3.0 },
        ];
        let dataset = Dataset {
            samples,
            lattice_size: 2,
            temperature_grid: vec![1.0, 3.0],
            provenance: Provenance::Generated,
        };
        let report = evaluate(&constant_model(4, 2.0), &dataset).unwrap();
        // Residuals are 1 at both temperatures, so every MSE is exactly 1.
        assert_eq!(report.mse, 1.0);
        assert_eq!(report.per_temperature, vec![(1.0, 1.0), (3.0, 1.0)]);

        let report = evaluate(&constant_model(4, 1.0), &dataset).unwrap();
        assert_eq!(report.mse, 2.0);
        assert_eq!(report.per_temperature, vec![(1.0, 0.0), (3.0, 4.0)]);
    }

    #[test]
    fn evaluate_rejects_empty_and_mismatched_data() {
        let empty = Dataset {
            samples: Vec::new(),
            lattice_size: 2,
            temperature_grid: vec![1.0],
            provenance: Provenance::Generated,
        };
        assert!(matches!(evaluate(&constant_model(4, 0.0), &empty), Err(MlpError::Empty)));

        let dataset = Dataset {
            samples: vec![LabeledSample { configuration: vec![1, 1, 1, 1], temperature: 1.0 }],
            lattice_size: 2,
            temperature_grid: vec![1.0],
            provenance: Provenance::Generated,
        };
        assert!(matches!(
            evaluate(&constant_model(9, 0.0), &dataset),
            Err(MlpError::DimensionMismatch { expected: 9, got: 4 })
        ));
    }

    #[test]
    fn evaluate_regression_matches_mse_of_predictions() {
        let model = init_model(&spec(2, &[(3, Activation::Tanh)]), 13).unwrap();
        let inputs = vec![vec![0.2, -0.4], vec![-1.0, 0.7], vec![0.0, 0.0]];
        let targets = vec![0.5, -0.2, 0.1];
        let by_hand = batch_loss(&model, &inputs, &targets);
        let data = RegressionData::new(inputs, targets);
        assert_eq!(evaluate_regression(&model, &data).unwrap(), by_hand);
    }
}

