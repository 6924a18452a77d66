//! Evolutionary architecture search for the temperature-regression MLPs.
//!
//! Each candidate network is a [`Genome`]: the list of hidden layers with
//! their widths, activations, and weight initializers. Weights themselves
//! are never inherited — every fitness evaluation trains a fresh network by
//! gradient descent and scores it on a held-out validation split. The loop
//! is a plain (μ+λ)-style scheme: truncation selection picks parents, each
//! parent yields one offspring by a single random mutation, and survivors
//! are the best of parents and offspring together, so the best fitness can
//! never get worse from one generation to the next.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::mlp::{
    evaluate_regression, init_model, train, ArchitectureSpec, LayerSpec, MlpError,
    RegressionData, TrainConfig, TrainedModel, ACTIVATIONS, INITIALIZERS, MAX_HIDDEN_LAYERS,
    MAX_LAYER_WIDTH,
};
use crate::seeds;

#[derive(Debug, thiserror::Error)]
pub enum EvolveError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

/// Search-loop parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    /// Population size `N`.
    pub population_size: usize,
    /// Number of selection/mutation/survival rounds after the initial
    /// population.
    pub generations: usize,
    /// How many parents, `K <= N`, truncation selection keeps per round.
    pub selection_size: usize,
    /// Probability that a selected parent is mutated; an unmutated parent
    /// is copied into the offspring set unchanged.
    pub mutation_probability: f64,
    /// Upper bound on hidden layer count for generated genomes.
    pub max_layers: usize,
    /// Upper bound on hidden layer width for generated genomes.
    pub max_width: usize,
    /// Master seed; every random choice in the run derives from it.
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 40,
            selection_size: 25,
            mutation_probability: 1.0,
            max_layers: MAX_HIDDEN_LAYERS,
            max_width: MAX_LAYER_WIDTH,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |msg: String| Err(EvolveError::InvalidConfig(msg));
        if self.population_size == 0 {
            return bad("population size must be at least 1".into());
        }
        if self.selection_size == 0 || self.selection_size > self.population_size {
            return bad(format!(
                "selection size must be in 1..={}, got {}",
                self.population_size, self.selection_size
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return bad(format!(
                "mutation probability must be in [0, 1], got {}",
                self.mutation_probability
            ));
        }
        if self.max_layers == 0 || self.max_layers > MAX_HIDDEN_LAYERS {
            return bad(format!("max layers must be in 1..={MAX_HIDDEN_LAYERS}"));
        }
        if self.max_width == 0 || self.max_width > MAX_LAYER_WIDTH {
            return bad(format!("max width must be in 1..={MAX_LAYER_WIDTH}"));
        }
        Ok(())
    }
}

/// One candidate architecture plus its evaluation state.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    pub layers: Vec<LayerSpec>,
    /// Validation MSE, or `None` while unevaluated. Diverged training is
    /// recorded as `+inf` so it loses every selection.
    pub fitness: Option<f64>,
    /// The training seed used when `fitness` was computed, so the exact
    /// model can be rebuilt later.
    pub eval_seed: Option<u64>,
}

impl Genome {
    /// Canonical text form, e.g. `12:relu:uniform_glorot|5:tanh:normal_he`.
    /// Two genomes with equal keys train identically given equal seeds,
    /// which is what makes fitness caching sound.
    pub fn architecture_key(&self) -> String {
        let mut key = String::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                key.push('|');
            }
            let _ = write!(
                key,
                "{}:{}:{}",
                layer.width,
                layer.activation.name(),
                layer.initializer.name()
            );
        }
        key
    }

    pub fn decode(&self, input_dim: usize) -> Result<ArchitectureSpec, MlpError> {
        ArchitectureSpec::new(input_dim, self.layers.clone())
    }
}

fn random_layer(config: &EvolutionConfig, rng: &mut impl Rng) -> LayerSpec {
    LayerSpec {
        width: rng.random_range(1..=config.max_width),
        activation: ACTIVATIONS[rng.random_range(0..ACTIVATIONS.len())],
        initializer: INITIALIZERS[rng.random_range(0..INITIALIZERS.len())],
    }
}

/// Uniformly random genome: layer count in `1..=max_layers`, then width,
/// activation, and initializer drawn uniformly per layer.
pub fn random_genome(config: &EvolutionConfig, rng: &mut impl Rng) -> Genome {
    let count = rng.random_range(1..=config.max_layers);
    let layers = (0..count).map(|_| random_layer(config, rng)).collect();
    Genome { layers, fitness: None, eval_seed: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationOp {
    AddLayer,
    RemoveLayer,
    ResizeLayer,
    ChangeActivation,
    ChangeInitializer,
}

impl MutationOp {
    pub const ALL: [MutationOp; 5] = [
        MutationOp::AddLayer,
        MutationOp::RemoveLayer,
        MutationOp::ResizeLayer,
        MutationOp::ChangeActivation,
        MutationOp::ChangeInitializer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationOp::AddLayer => "add_layer",
            MutationOp::RemoveLayer => "remove_layer",
            MutationOp::ResizeLayer => "resize_layer",
            MutationOp::ChangeActivation => "change_activation",
            MutationOp::ChangeInitializer => "change_initializer",
        }
    }
}

/// The operators that can act on this genome without leaving the bounds:
/// a maximally deep genome cannot gain a layer, a single-layer genome
/// cannot lose one, everything else always applies.
pub fn applicable_operators(genome: &Genome, config: &EvolutionConfig) -> Vec<MutationOp> {
    MutationOp::ALL
        .into_iter()
        .filter(|op| match op {
            MutationOp::AddLayer => genome.layers.len() < config.max_layers,
            MutationOp::RemoveLayer => genome.layers.len() > 1,
            _ => true,
        })
        .collect()
}

/// Uniform choice among the applicable operators.
pub fn choose_operator(genome: &Genome, config: &EvolutionConfig, rng: &mut impl Rng) -> MutationOp {
    let ops = applicable_operators(genome, config);
    ops[rng.random_range(0..ops.len())]
}

/// Applies one operator, leaving the input untouched. The result is always
/// unevaluated: even a no-op redraw (say, resizing a layer to its current
/// width) gets a fresh fitness slot rather than a stale one.
pub fn apply_operator(
    genome: &Genome,
    op: MutationOp,
    config: &EvolutionConfig,
    rng: &mut impl Rng,
) -> Genome {
    let mut layers = genome.layers.clone();
    match op {
        MutationOp::AddLayer => {
            let at = rng.random_range(0..=layers.len());
            let layer = random_layer(config, rng);
            layers.insert(at, layer);
        }
        MutationOp::RemoveLayer => {
            let at = rng.random_range(0..layers.len());
            layers.remove(at);
        }
        MutationOp::ResizeLayer => {
            let at = rng.random_range(0..layers.len());
            layers[at].width = rng.random_range(1..=config.max_width);
        }
        MutationOp::ChangeActivation => {
            let at = rng.random_range(0..layers.len());
            layers[at].activation = ACTIVATIONS[rng.random_range(0..ACTIVATIONS.len())];
        }
        MutationOp::ChangeInitializer => {
            let at = rng.random_range(0..layers.len());
            layers[at].initializer = INITIALIZERS[rng.random_range(0..INITIALIZERS.len())];
        }
    }
    Genome { layers, fitness: None, eval_seed: None }
}

/// One random mutation: a uniformly chosen applicable operator.
pub fn mutate(genome: &Genome, config: &EvolutionConfig, rng: &mut impl Rng) -> Genome {
    let op = choose_operator(genome, config, rng);
    apply_operator(genome, op, config, rng)
}

fn fitness_or_worst(genome: &Genome) -> f64 {
    genome.fitness.unwrap_or(f64::INFINITY)
}

/// Truncation selection: the `k` lowest-fitness genomes, ties broken by
/// insertion order (stable sort on the index list).
pub fn select(population: &[Genome], k: usize) -> Vec<Genome> {
    assert!(k <= population.len(), "cannot select {k} of {}", population.len());
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| {
        fitness_or_worst(&population[a]).total_cmp(&fitness_or_worst(&population[b]))
    });
    order.truncate(k);
    order.into_iter().map(|i| population[i].clone()).collect()
}

/// Trains a fresh model for this genome. The seed is split so weight
/// initialization and minibatch shuffling get independent streams.
pub fn train_genome(
    genome: &Genome,
    input_dim: usize,
    train_set: &RegressionData,
    train_config: &TrainConfig,
) -> Result<TrainedModel, MlpError> {
    let spec = genome.decode(input_dim)?;
    let model = init_model(&spec, seeds::derive_seed(train_config.seed, 0))?;
    let mut config = train_config.clone();
    config.seed = seeds::derive_seed(train_config.seed, 1);
    train(model, train_set, &config)
}

/// Validation MSE of the freshly trained network, or `+inf` when training
/// diverges or the error itself is not finite. Callers validate their data
/// up front (see [`evolve`]); by that point every failure here means the
/// architecture blew up, which truncation selection should simply discard.
pub fn evaluate_fitness(
    genome: &Genome,
    train_set: &RegressionData,
    val_set: &RegressionData,
    train_config: &TrainConfig,
) -> f64 {
    let input_dim = match train_set.inputs.first() {
        Some(input) => input.len(),
        None => return f64::INFINITY,
    };
    let Ok(model) = train_genome(genome, input_dim, train_set, train_config) else {
        return f64::INFINITY;
    };
    match evaluate_regression(&model, val_set) {
        Ok(mse) if mse.is_finite() => mse,
        _ => f64::INFINITY,
    }
}

/// Fitness summary of one generation's population.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionLog {
    /// Entry 0 is the initial population, entry `t` the population after
    /// round `t`.
    pub generations: Vec<GenerationStats>,
    /// Fresh training runs performed.
    pub evaluations: usize,
    /// Fitness lookups answered by the architecture cache.
    pub cache_hits: usize,
}

fn stats_of(generation: usize, population: &[Genome]) -> GenerationStats {
    let fitnesses: Vec<f64> = population.iter().map(fitness_or_worst).collect();
    let best = fitnesses.iter().copied().fold(f64::INFINITY, f64::min);
    let worst = fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = fitnesses.iter().sum::<f64>() / fitnesses.len() as f64;
    GenerationStats { generation, best, mean, worst }
}

/// Fills in missing fitnesses: cached architectures reuse their recorded
/// value, the rest train in parallel. Each fresh evaluation is seeded by
/// `(run seed, generation, slot)`, so results do not depend on scheduling,
/// and the cache is updated in slot order afterwards.
fn evaluate_population(
    population: &mut [Genome],
    generation: usize,
    cache: &mut HashMap<String, (f64, u64)>,
    train_set: &RegressionData,
    val_set: &RegressionData,
    train_config: &TrainConfig,
    run_seed: u64,
    log: &mut EvolutionLog,
) {
    let mut pending: Vec<usize> = Vec::new();
    for (slot, genome) in population.iter_mut().enumerate() {
        if genome.fitness.is_some() {
            continue;
        }
        if let Some(&(fitness, seed)) = cache.get(&genome.architecture_key()) {
            genome.fitness = Some(fitness);
            genome.eval_seed = Some(seed);
            log.cache_hits += 1;
        } else {
            pending.push(slot);
        }
    }
    let results: Vec<(usize, f64, u64)> = pending
        .into_par_iter()
        .map(|slot| {
            let seed = seeds::derive_seed3(run_seed, generation as u64, slot as u64);
            let mut config = train_config.clone();
            config.seed = seed;
            let fitness = evaluate_fitness(&population[slot], train_set, val_set, &config);
            (slot, fitness, seed)
        })
        .collect();
    for (slot, fitness, seed) in results {
        let genome = &mut population[slot];
        genome.fitness = Some(fitness);
        genome.eval_seed = Some(seed);
        cache.entry(genome.architecture_key()).or_insert((fitness, seed));
        log.evaluations += 1;
    }
}

fn validate_data(train_set: &RegressionData, val_set: &RegressionData) -> Result<(), EvolveError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(EvolveError::Mlp(MlpError::Empty));
    }
    let dim = train_set.inputs[0].len();
    for input in train_set.inputs.iter().chain(&val_set.inputs) {
        if input.len() != dim {
            return Err(EvolveError::Mlp(MlpError::DimensionMismatch {
                expected: dim,
                got: input.len(),
            }));
        }
    }
    if train_set.inputs.len() != train_set.targets.len() {
        return Err(EvolveError::Mlp(MlpError::LengthMismatch {
            predictions: train_set.inputs.len(),
            targets: train_set.targets.len(),
        }));
    }
    if val_set.inputs.len() != val_set.targets.len() {
        return Err(EvolveError::Mlp(MlpError::LengthMismatch {
            predictions: val_set.inputs.len(),
            targets: val_set.targets.len(),
        }));
    }
    Ok(())
}

/// Runs the full search and returns the final population (sorted best
/// first) with its log.
///
/// Per generation: truncation-select `K` parents, mutate each with
/// probability `p_m` (copy otherwise), evaluate the offspring, then keep
/// the best `N` of parents-plus-offspring. Survivors carry their fitness,
/// so the number of training runs is at most `N + generations * K`, less
/// whenever the architecture cache hits.
pub fn evolve(
    config: &EvolutionConfig,
    train_set: &RegressionData,
    val_set: &RegressionData,
    train_config: &TrainConfig,
) -> Result<(Vec<Genome>, EvolutionLog), EvolveError> {
    config.validate()?;
    train_config.validate()?;
    validate_data(train_set, val_set)?;

    let mut rng = seeds::seeded_rng(seeds::derive_seed(config.seed, 0));
    let mut cache: HashMap<String, (f64, u64)> = HashMap::new();
    let mut log = EvolutionLog::default();

    let mut population: Vec<Genome> =
        (0..config.population_size).map(|_| random_genome(config, &mut rng)).collect();
    evaluate_population(
        &mut population,
        0,
        &mut cache,
        train_set,
        val_set,
        train_config,
        config.seed,
        &mut log,
    );
    log.generations.push(stats_of(0, &population));

    for generation in 1..=config.generations {
        let parents = select(&population, config.selection_size);
        let mut offspring: Vec<Genome> = parents
            .iter()
            .map(|parent| {
                if rng.random::<f64>() < config.mutation_probability {
                    mutate(parent, config, &mut rng)
                } else {
                    parent.clone()
                }
            })
            .collect();
        evaluate_population(
            &mut offspring,
            generation,
            &mut cache,
            train_set,
            val_set,
            train_config,
            config.seed,
            &mut log,
        );
        let mut pool = population;
        pool.extend(offspring);
        population = select(&pool, config.population_size);
        log.generations.push(stats_of(generation, &population));
    }

    population = select(&population, population.len());
    Ok((population, log))
}

/// `generation,best,mean,worst`
pub fn write_evolution_log_csv<W: Write>(mut writer: W, log: &EvolutionLog) -> io::Result<()> {
    writeln!(writer, "generation,best,mean,worst")?;
    for s in &log.generations {
        writeln!(writer, "{},{:?},{:?},{:?}", s.generation, s.best, s.mean, s.worst)?;
    }
    Ok(())
}

/// `rank,val_mse,test_mse,layers,widths,activations,initializers` — one row
/// per final-population genome, rank 1 being the best validation fitness.
/// List-valued columns are `|`-separated in layer order.
pub fn write_population_csv<W: Write>(
    mut writer: W,
    ranked: &[(Genome, f64)],
) -> io::Result<()> {
    writeln!(writer, "rank,val_mse,test_mse,layers,widths,activations,initializers")?;
    for (rank, (genome, test_mse)) in ranked.iter().enumerate() {
        let join = |f: &dyn Fn(&LayerSpec) -> String| {
            genome.layers.iter().map(|l| f(l)).collect::<Vec<_>>().join("|")
        };
        writeln!(
            writer,
            "{},{:?},{:?},{},{},{},{}",
            rank + 1,
            fitness_or_worst(genome),
            test_mse,
            genome.layers.len(),
            join(&|l| l.width.to_string()),
            join(&|l| l.activation.name().to_string()),
            join(&|l| l.initializer.name().to_string()),
        )?;
    }
    Ok(())
}
