//! Markov chains over the lattice and labeled dataset generation.

use rand::Rng;
use rayon::prelude::*;

use super::{Dataset, LabeledSample, LatticeError, Provenance, SpinLattice};
use crate::seeds;

/// Everything that defines a sampling campaign: the lattice, the temperature
/// grid, chain lengths, and the master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParams {
    /// Side length of the square lattice (at least 2).
    pub lattice_size: usize,
    /// Strictly increasing list of positive temperatures.
    pub temperatures: Vec<f64>,
    /// Snapshots recorded per temperature.
    pub samples_per_temperature: usize,
    /// Single-site Metropolis attempts performed before recording starts.
    pub equilibration_steps: usize,
    /// Wolff cluster updates between consecutive snapshots.
    pub decorrelation_steps: usize,
    /// Ferromagnetic coupling constant `J`.
    pub coupling: f64,
    /// Master seed; each temperature's chain derives its own stream from it.
    pub seed: u64,
}

impl SimulationParams {
    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.lattice_size < 2 {
            return Err(LatticeError::SizeTooSmall(self.lattice_size));
        }
        if self.temperatures.is_empty() {
            return Err(LatticeError::InvalidParams("temperature grid is empty".into()));
        }
        for pair in self.temperatures.windows(2) {
            if pair[1] <= pair[0] {
                return Err(LatticeError::InvalidParams(format!(
                    "temperatures must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if self.temperatures[0] <= 0.0 {
            return Err(LatticeError::InvalidParams(format!(
                "temperatures must be positive, got {}",
                self.temperatures[0]
            )));
        }
        if self.samples_per_temperature == 0 {
            return Err(LatticeError::InvalidParams(
                "samples_per_temperature must be at least 1".into(),
            ));
        }
        if !(self.coupling > 0.0) {
            return Err(LatticeError::InvalidParams(format!(
                "coupling must be positive, got {}",
                self.coupling
            )));
        }
        Ok(())
    }
}

/// An evenly spaced temperature grid from `min` to `max` inclusive.
///
/// With `steps == 1` the grid collapses to `[min]`, which requires
/// `min == max`.
pub fn temperature_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>, LatticeError> {
    if steps == 0 {
        return Err(LatticeError::InvalidParams("temperature grid needs at least one step".into()));
    }
    if steps == 1 {
        if min != max {
            return Err(LatticeError::InvalidParams(
                "a single-point grid requires min == max".into(),
            ));
        }
        return Ok(vec![min]);
    }
    if !(max > min) {
        return Err(LatticeError::InvalidParams(format!(
            "grid needs max > min, got min {min} max {max}"
        )));
    }
    let span = max - min;
    let last = (steps - 1) as f64;
    Ok((0..steps).map(|i| min + span * i as f64 / last).collect())
}

/// Runs one chain at a fixed temperature and returns the recorded snapshots.
///
/// The chain starts from a uniformly random configuration, performs
/// `equilibration_steps` Metropolis attempts, then alternates
/// `decorrelation_steps` Wolff updates with recording a snapshot until
/// `samples_per_temperature` configurations are stored. A zero sample count
/// yields an empty list.
pub fn run_chain(
    params: &SimulationParams,
    temperature: f64,
    rng: &mut impl Rng,
) -> Vec<LabeledSample> {
    let mut lattice = SpinLattice::random(params.lattice_size, params.coupling, rng)
        .expect("params.lattice_size must be at least 2");
    for _ in 0..params.equilibration_steps {
        lattice.metropolis_update(temperature, rng);
    }
    let mut samples = Vec::with_capacity(params.samples_per_temperature);
    for _ in 0..params.samples_per_temperature {
        for _ in 0..params.decorrelation_steps {
            lattice.wolff_update(temperature, rng);
        }
        samples.push(LabeledSample {
            configuration: lattice.spins().to_vec(),
            temperature,
        });
    }
    samples
}

/// Samples one chain per grid temperature and collects the results into a
/// [`Dataset`], ordered by temperature.
///
/// Chain `i` draws from the stream derived from `(params.seed, i)`, so the
/// chains are mutually independent, the result does not depend on scheduling
/// (they run in parallel), and the full dataset is reproducible from the seed.
pub fn generate_dataset(params: &SimulationParams) -> Result<Dataset, LatticeError> {
    params.validate()?;
    let per_chain: Vec<Vec<LabeledSample>> = params
        .temperatures
        .par_iter()
        .enumerate()
        .map(|(i, &temperature)| {
            let mut rng = seeds::seeded_rng(seeds::derive_seed(params.seed, i as u64));
            run_chain(params, temperature, &mut rng)
        })
        .collect();
    let samples = per_chain.into_iter().flatten().collect();
    Ok(Dataset::new(
        samples,
        params.lattice_size,
        params.temperatures.clone(),
        Provenance::Generated,
    ))
}
