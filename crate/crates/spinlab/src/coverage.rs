//! Neuron-coverage metrics over trained networks.
//!
//! All five metrics treat a network as a bag of hidden neurons (the linear
//! output neuron is excluded) and measure how much of each neuron's behavior
//! a test set exercises:
//!
//! - **NC** — fraction of neurons whose post-activation output exceeds a
//!   threshold `t` on at least one input.
//! - **TKNC** — fraction of neurons that at least once rank among the `K`
//!   most active neurons of their layer.
//! - **KMN** — each neuron's profiled range `[L, H]` is cut into `k` equal
//!   sections; the score is the fraction of all `k·N` sections hit.
//! - **NBC** — fraction of corner cases hit, counting strict excursions
//!   below `L` and above `H` separately: `(|LCN| + |UCN|) / 2N`.
//! - **SNAC** — upper excursions only: `|UCN| / N`.
//!
//! Per-neuron bounds come from [`profile_bounds`] over a profiling set
//! (conventionally the training split), so NBC and SNAC measure how far a
//! test set escapes the regime seen in training.

use std::io::{self, Write};

use crate::lattice::Dataset;
use crate::mlp::net::Scratch;
use crate::mlp::TrainedModel;

#[derive(Debug, thiserror::Error)]
pub enum CoverageError {
    #[error("coverage needs at least one input")]
    EmptyInputs,
    #[error("input {index} has {got} features, the model expects {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("invalid coverage parameter: {0}")]
    BadParams(String),
    #[error("invalid bounds: {0}")]
    BadBounds(String),
}

/// Per-neuron activation ranges `[low, high]`, indexed `[layer][neuron]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBounds {
    pub low: Vec<Vec<f64>>,
    pub high: Vec<Vec<f64>>,
}

impl NeuronBounds {
    pub fn validate(&self) -> Result<(), CoverageError> {
        if self.low.len() != self.high.len() {
            return Err(CoverageError::BadBounds(format!(
                "{} low layers vs {} high layers",
                self.low.len(),
                self.high.len()
            )));
        }
        for (l, (low, high)) in self.low.iter().zip(&self.high).enumerate() {
            if low.len() != high.len() {
                return Err(CoverageError::BadBounds(format!(
                    "layer {l}: {} low entries vs {} high entries",
                    low.len(),
                    high.len()
                )));
            }
            for (i, (&lo, &hi)) in low.iter().zip(high).enumerate() {
                if !(lo <= hi) {
                    return Err(CoverageError::BadBounds(format!(
                        "layer {l} neuron {i}: low {lo} > high {hi}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn validate_for(&self, model: &TrainedModel) -> Result<(), CoverageError> {
        self.validate()?;
        let expected: Vec<usize> = model.spec.hidden.iter().map(|s| s.width).collect();
        let got: Vec<usize> = self.low.iter().map(Vec::len).collect();
        if expected != got {
            return Err(CoverageError::BadBounds(format!(
                "bounds shaped {got:?} but the model's hidden layers are {expected:?}"
            )));
        }
        Ok(())
    }
}

/// Knobs for the parameterized metrics, recorded alongside every report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageParams {
    /// NC activation threshold `t`.
    pub threshold: f64,
    /// TKNC layer rank cutoff `K`.
    pub top_k: usize,
    /// KMN section count `k`.
    pub sections: usize,
}

impl Default for CoverageParams {
    fn default() -> Self {
        Self { threshold: 0.0, top_k: 1, sections: 10 }
    }
}

impl CoverageParams {
    pub fn validate(&self) -> Result<(), CoverageError> {
        if self.top_k == 0 {
            return Err(CoverageError::BadParams("top-K must be at least 1".into()));
        }
        if self.sections == 0 {
            return Err(CoverageError::BadParams("section count must be at least 1".into()));
        }
        Ok(())
    }
}

/// All five metrics for one test set, with the parameters they were
/// computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub nc: f64,
    pub tknc: f64,
    pub kmn: f64,
    pub nbc: f64,
    pub snac: f64,
    pub params: CoverageParams,
}

/// Runs every input through the model and hands the per-layer hidden
/// activations to `visit`.
fn scan_traces(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
    mut visit: impl FnMut(&[Vec<f64>]),
) -> Result<(), CoverageError> {
    if inputs.is_empty() {
        return Err(CoverageError::EmptyInputs);
    }
    let mut scratch = Scratch::for_model(model);
    for (index, input) in inputs.iter().enumerate() {
        if input.len() != model.spec.input_dim {
            return Err(CoverageError::DimensionMismatch {
                index,
                expected: model.spec.input_dim,
                got: input.len(),
            });
        }
        model.forward_scratch(input, &mut scratch);
        visit(&scratch.activations);
    }
    Ok(())
}

fn neuron_flags(model: &TrainedModel) -> Vec<Vec<bool>> {
    model.spec.hidden.iter().map(|s| vec![false; s.width]).collect()
}

fn flag_count(flags: &[Vec<bool>]) -> usize {
    flags.iter().flatten().filter(|&&b| b).count()
}

fn flag_fraction(flags: &[Vec<bool>]) -> f64 {
    let total: usize = flags.iter().map(Vec::len).sum();
    flag_count(flags) as f64 / total as f64
}

/// Streaming per-metric accumulators. Each consumes one trace at a time so a
/// combined report only runs the network once per input.
struct NcState {
    threshold: f64,
    seen: Vec<Vec<bool>>,
}

impl NcState {
    fn update(&mut self, trace: &[Vec<f64>]) {
        for (flags, layer) in self.seen.iter_mut().zip(trace) {
            for (flag, &a) in flags.iter_mut().zip(layer) {
                *flag |= a > self.threshold;
            }
        }
    }
}

struct TkncState {
    top_k: usize,
    seen: Vec<Vec<bool>>,
    /// Scratch indices, reused across inputs.
    order: Vec<usize>,
}

impl TkncState {
    fn update(&mut self, trace: &[Vec<f64>]) {
        for (flags, layer) in self.seen.iter_mut().zip(trace) {
            self.order.clear();
            self.order.extend(0..layer.len());
            // Most active first; equal activations rank lower indices first.
            self.order
                .sort_by(|&a, &b| layer[b].total_cmp(&layer[a]).then(a.cmp(&b)));
            for &i in self.order.iter().take(self.top_k) {
                flags[i] = true;
            }
        }
    }
}

struct KmnState {
    sections: usize,
    bounds: NeuronBounds,
    /// `hit[layer][neuron][section]`
    hit: Vec<Vec<Vec<bool>>>,
}

impl KmnState {
    fn update(&mut self, trace: &[Vec<f64>]) {
        let k = self.sections;
        for (l, layer) in trace.iter().enumerate() {
            for (i, &a) in layer.iter().enumerate() {
                let (low, high) = (self.bounds.low[l][i], self.bounds.high[l][i]);
                if a < low || a > high {
                    continue;
                }
                let section = if high == low {
                    // Zero-width range: the only section is the point itself.
                    0
                } else {
                    let width = (high - low) / k as f64;
                    (((a - low) / width).floor() as usize).min(k - 1)
                };
                self.hit[l][i][section] = true;
            }
        }
    }

    fn fraction(&self) -> f64 {
        let neurons: usize = self.hit.iter().map(Vec::len).sum();
        let covered: usize = self
            .hit
            .iter()
            .flatten()
            .map(|sections| sections.iter().filter(|&&b| b).count())
            .sum();
        covered as f64 / (self.sections * neurons) as f64
    }
}

struct BoundaryState {
    bounds: NeuronBounds,
    below: Vec<Vec<bool>>,
    above: Vec<Vec<bool>>,
}

impl BoundaryState {
    fn update(&mut self, trace: &[Vec<f64>]) {
        for (l, layer) in trace.iter().enumerate() {
            for (i, &a) in layer.iter().enumerate() {
                self.below[l][i] |= a < self.bounds.low[l][i];
                self.above[l][i] |= a > self.bounds.high[l][i];
            }
        }
    }

    fn nbc(&self) -> f64 {
        let neurons: usize = self.below.iter().map(Vec::len).sum();
        (flag_count(&self.below) + flag_count(&self.above)) as f64 / (2 * neurons) as f64
    }

    fn snac(&self) -> f64 {
        flag_fraction(&self.above)
    }
}

/// Records the minimum and maximum post-activation output of every hidden
/// neuron over a profiling set.
pub fn profile_bounds(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
) -> Result<NeuronBounds, CoverageError> {
    let mut low = neuron_flags(model)
        .iter()
        .map(|l| vec![f64::INFINITY; l.len()])
        .collect::<Vec<_>>();
    let mut high = low
        .iter()
        .map(|l| vec![f64::NEG_INFINITY; l.len()])
        .collect::<Vec<_>>();
    scan_traces(model, inputs, |trace| {
        for (l, layer) in trace.iter().enumerate() {
            for (i, &a) in layer.iter().enumerate() {
                low[l][i] = low[l][i].min(a);
                high[l][i] = high[l][i].max(a);
            }
        }
    })?;
    Ok(NeuronBounds { low, high })
}

/// Neuron coverage: fraction of neurons exceeding `threshold` at least once.
pub fn nc(model: &TrainedModel, inputs: &[Vec<f64>], threshold: f64) -> Result<f64, CoverageError> {
    let mut state = NcState { threshold, seen: neuron_flags(model) };
    scan_traces(model, inputs, |trace| state.update(trace))?;
    Ok(flag_fraction(&state.seen))
}

/// Top-K neuron coverage: fraction of neurons that at least once were among
/// the `top_k` most active in their layer.
pub fn tknc(model: &TrainedModel, inputs: &[Vec<f64>], top_k: usize) -> Result<f64, CoverageError> {
    CoverageParams { top_k, ..CoverageParams::default() }.validate()?;
    let mut state = TkncState { top_k, seen: neuron_flags(model), order: Vec::new() };
    scan_traces(model, inputs, |trace| state.update(trace))?;
    Ok(flag_fraction(&state.seen))
}

/// K-multisection coverage: fraction of the `sections`-way partitions of
/// every neuron's `[low, high]` range hit by the inputs.
pub fn kmn(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
    bounds: &NeuronBounds,
    sections: usize,
) -> Result<f64, CoverageError> {
    CoverageParams { sections, ..CoverageParams::default() }.validate()?;
    bounds.validate_for(model)?;
    let mut state = KmnState {
        sections,
        bounds: bounds.clone(),
        hit: model.spec.hidden.iter().map(|s| vec![vec![false; sections]; s.width]).collect(),
    };
    scan_traces(model, inputs, |trace| state.update(trace))?;
    Ok(state.fraction())
}

fn boundary_state(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
    bounds: &NeuronBounds,
) -> Result<BoundaryState, CoverageError> {
    bounds.validate_for(model)?;
    let mut state = BoundaryState {
        bounds: bounds.clone(),
        below: neuron_flags(model),
        above: neuron_flags(model),
    };
    scan_traces(model, inputs, |trace| state.update(trace))?;
    Ok(state)
}

/// Neuron boundary coverage: corner cases strictly outside `[low, high]`,
/// lower and upper counted separately over `2N`.
pub fn nbc(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
    bounds: &NeuronBounds,
) -> Result<f64, CoverageError> {
    Ok(boundary_state(model, inputs, bounds)?.nbc())
}

/// Strong neuron activation coverage: strict upper excursions only.
pub fn snac(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
    bounds: &NeuronBounds,
) -> Result<f64, CoverageError> {
    Ok(boundary_state(model, inputs, bounds)?.snac())
}

/// All five metrics in a single pass over the inputs.
pub fn coverage_report(
    model: &TrainedModel,
    inputs: &[Vec<f64>],
    bounds: &NeuronBounds,
    params: &CoverageParams,
) -> Result<CoverageReport, CoverageError> {
    params.validate()?;
    bounds.validate_for(model)?;
    let mut nc_state = NcState { threshold: params.threshold, seen: neuron_flags(model) };
    let mut tknc_state =
        TkncState { top_k: params.top_k, seen: neuron_flags(model), order: Vec::new() };
    let mut kmn_state = KmnState {
        sections: params.sections,
        bounds: bounds.clone(),
        hit: model
            .spec
            .hidden
            .iter()
            .map(|s| vec![vec![false; params.sections]; s.width])
            .collect(),
    };
    let mut boundary = BoundaryState {
        bounds: bounds.clone(),
        below: neuron_flags(model),
        above: neuron_flags(model),
    };
    scan_traces(model, inputs, |trace| {
        nc_state.update(trace);
        tknc_state.update(trace);
        kmn_state.update(trace);
        boundary.update(trace);
    })?;
    Ok(CoverageReport {
        nc: flag_fraction(&nc_state.seen),
        tknc: flag_fraction(&tknc_state.seen),
        kmn: kmn_state.fraction(),
        nbc: boundary.nbc(),
        snac: boundary.snac(),
        params: *params,
    })
}

/// Evaluates each grid temperature's slice of `dataset` independently
/// against shared bounds. Returns `(temperature, report)` in grid order.
pub fn coverage_by_temperature(
    model: &TrainedModel,
    dataset: &Dataset,
    bounds: &NeuronBounds,
    params: &CoverageParams,
) -> Result<Vec<(f64, CoverageReport)>, CoverageError> {
    let mut out = Vec::new();
    for (temperature, indices) in dataset.per_temperature_indices() {
        let inputs: Vec<Vec<f64>> = indices
            .iter()
            .map(|&i| dataset.samples[i].configuration.iter().map(|&s| s as f64).collect())
            .collect();
        let report = coverage_report(model, &inputs, bounds, params)?;
        out.push((temperature, report));
    }
    Ok(out)
}

/// One line of the coverage CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub temperature: f64,
    pub report: CoverageReport,
    pub model_id: String,
}

/// Writes rows as `temperature,nc,tknc,kmn,nbc,snac,t,K,k,model_id`.
pub fn write_coverage_csv<W: Write>(mut writer: W, rows: &[CoverageRow]) -> io::Result<()> {
    writeln!(writer, "temperature,nc,tknc,kmn,nbc,snac,t,K,k,model_id")?;
    for row in rows {
        let r = &row.report;
        writeln!(
            writer,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{}",
            row.temperature,
            r.nc,
            r.tknc,
            r.kmn,
            r.nbc,
            r.snac,
            r.params.threshold,
            r.params.top_k,
            r.params.sections,
            row.model_id
        )?;
    }
    Ok(())
}
