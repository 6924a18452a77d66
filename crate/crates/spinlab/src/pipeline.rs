//! End-to-end orchestration: generate spin data, split it, evolve
//! architectures, and analyze the winners — everything written to a
//! run directory with a manifest.
//!
//! The whole pipeline is a pure function of its [`PipelineConfig`]: the
//! master seed fans out into stage seeds (dataset, split, one per
//! evolution run), parallel sections merge results in index order, and no
//! artifact contains timestamps or absolute paths. Running the same config
//! twice therefore produces byte-identical files, which is also how the
//! test suite checks it.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::{
    correlation_table, histogram, per_temperature_stats, write_correlations_csv,
    write_histogram_csv, write_temp_stats_csv, CorrelationTable, Histogram, TempStats,
};
use crate::coverage::{
    coverage_by_temperature, profile_bounds, write_coverage_csv, CoverageParams, CoverageReport,
    CoverageRow,
};
use crate::evolve::{
    evolve, train_genome, write_evolution_log_csv, write_population_csv, EvolutionConfig,
    EvolutionLog, Genome,
};
use crate::lattice::{
    generate_dataset, temperature_grid, write_dataset_csv, Dataset, Provenance, SimulationParams,
};
use crate::mlp::{
    evaluate_regression, save_model, MlpError, RegressionData, TrainConfig, TrainedModel,
};
use crate::seeds;

use rand::seq::SliceRandom;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

fn stage_error<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage { stage, message: e.to_string() }
}

/// Everything a full run needs, flattened to scalar fields so the whole
/// config round-trips through `key = value` text. Key names use dotted
/// sections (`lattice.size`, `evolve.population`, ...); see [`Self::set`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lattice_size: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub samples_per_temperature: usize,
    pub equilibration_steps: usize,
    pub decorrelation_steps: usize,
    pub coupling: f64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub population_size: usize,
    pub generations: usize,
    pub selection_size: usize,
    pub mutation_probability: f64,
    pub max_layers: usize,
    pub max_width: usize,
    pub threshold: f64,
    pub top_k: usize,
    pub sections: usize,
    pub histogram_bins: usize,
    pub histogram_max: f64,
    pub runs: usize,
    pub seed: u64,
    /// Output directory. Not part of the config hash: two runs of the same
    /// experiment into different directories are still the same experiment.
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl PipelineConfig {
    /// Desk-scale profile: same grid and network menus as the full
    /// experiment, but small enough to finish in minutes on a laptop.
    pub fn desk() -> Self {
        Self {
            lattice_size: 8,
            t_min: 1.0,
            t_max: 3.5,
            t_steps: 26,
            samples_per_temperature: 200,
            equilibration_steps: 512,
            decorrelation_steps: 8,
            coupling: 1.0,
            train_size: 2600,
            val_size: 1300,
            test_size: 1300,
            epochs: 10,
            batch_size: 100,
            learning_rate: 0.001,
            population_size: 8,
            generations: 5,
            selection_size: 4,
            mutation_probability: 1.0,
            max_layers: 20,
            max_width: 20,
            threshold: 0.0,
            top_k: 1,
            sections: 10,
            histogram_bins: 10,
            histogram_max: 0.5,
            runs: 3,
            seed: 42,
            out_dir: PathBuf::from("out"),
        }
    }

    /// Full-scale profile: 5000 samples per temperature, 26000/13000/26000
    /// splits, population 50 over 40 generations, 30 repeated runs.
    pub fn paper() -> Self {
        Self {
            samples_per_temperature: 5000,
            train_size: 26_000,
            val_size: 13_000,
            test_size: 26_000,
            population_size: 50,
            generations: 40,
            selection_size: 25,
            runs: 30,
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Result<Self, PipelineError> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(PipelineError::Config(format!(
                "unknown profile '{other}' (expected desk or paper)"
            ))),
        }
    }

    /// Sets one field by its dotted key. Every key printed by
    /// [`Self::entries`] is accepted, plus `out` for the output directory.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError>
        where
            T::Err: std::fmt::Display,
        {
            value.trim().parse().map_err(|e| {
                PipelineError::Config(format!("bad value '{value}' for {key}: {e}"))
            })
        }
        match key {
            "lattice.size" => self.lattice_size = parse(key, value)?,
            "lattice.t_min" => self.t_min = parse(key, value)?,
            "lattice.t_max" => self.t_max = parse(key, value)?,
            "lattice.t_steps" => self.t_steps = parse(key, value)?,
            "lattice.samples_per_temperature" => {
                self.samples_per_temperature = parse(key, value)?
            }
            "lattice.equilibration_steps" => self.equilibration_steps = parse(key, value)?,
            "lattice.decorrelation_steps" => self.decorrelation_steps = parse(key, value)?,
            "lattice.coupling" => self.coupling = parse(key, value)?,
            "split.train" => self.train_size = parse(key, value)?,
            "split.val" => self.val_size = parse(key, value)?,
            "split.test" => self.test_size = parse(key, value)?,
            "train.epochs" => self.epochs = parse(key, value)?,
            "train.batch_size" => self.batch_size = parse(key, value)?,
            "train.learning_rate" => self.learning_rate = parse(key, value)?,
            "evolve.population" => self.population_size = parse(key, value)?,
            "evolve.generations" => self.generations = parse(key, value)?,
            "evolve.selection" => self.selection_size = parse(key, value)?,
            "evolve.mutation_probability" => self.mutation_probability = parse(key, value)?,
            "evolve.max_layers" => self.max_layers = parse(key, value)?,
            "evolve.max_width" => self.max_width = parse(key, value)?,
            "coverage.threshold" => self.threshold = parse(key, value)?,
            "coverage.top_k" => self.top_k = parse(key, value)?,
            "coverage.sections" => self.sections = parse(key, value)?,
            "analysis.histogram_bins" => self.histogram_bins = parse(key, value)?,
            "analysis.histogram_max" => self.histogram_max = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value.trim()),
            other => {
                return Err(PipelineError::Config(format!("unknown config key '{other}'")))
            }
        }
        Ok(())
    }

    /// All hashed settings as sorted `(key, value)` pairs. `out` is
    /// deliberately absent — see the field docs.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("lattice.size", self.lattice_size.to_string());
        put("lattice.t_min", format!("{:?}", self.t_min));
        put("lattice.t_max", format!("{:?}", self.t_max));
        put("lattice.t_steps", self.t_steps.to_string());
        put(
            "lattice.samples_per_temperature",
            self.samples_per_temperature.to_string(),
        );
        put("lattice.equilibration_steps", self.equilibration_steps.to_string());
        put("lattice.decorrelation_steps", self.decorrelation_steps.to_string());
        put("lattice.coupling", format!("{:?}", self.coupling));
        put("split.train", self.train_size.to_string());
        put("split.val", self.val_size.to_string());
        put("split.test", self.test_size.to_string());
        put("train.epochs", self.epochs.to_string());
        put("train.batch_size", self.batch_size.to_string());
        put("train.learning_rate", format!("{:?}", self.learning_rate));
        put("evolve.population", self.population_size.to_string());
        put("evolve.generations", self.generations.to_string());
        put("evolve.selection", self.selection_size.to_string());
        put("evolve.mutation_probability", format!("{:?}", self.mutation_probability));
        put("evolve.max_layers", self.max_layers.to_string());
        put("evolve.max_width", self.max_width.to_string());
        put("coverage.threshold", format!("{:?}", self.threshold));
        put("coverage.top_k", self.top_k.to_string());
        put("coverage.sections", self.sections.to_string());
        put("analysis.histogram_bins", self.histogram_bins.to_string());
        put("analysis.histogram_max", format!("{:?}", self.histogram_max));
        put("runs", self.runs.to_string());
        put("seed", self.seed.to_string());
        map.into_iter().collect()
    }

    /// SHA-256 over the sorted `key = value` lines.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.entries() {
            hasher.update(k.as_bytes());
            hasher.update(b" = ");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        let total = self.t_steps * self.samples_per_temperature;
        let requested = self.train_size + self.val_size + self.test_size;
        if requested > total {
            return bad(format!(
                "splits need {requested} samples but the dataset only has {total}"
            ));
        }
        for (name, size) in
            [("split.train", self.train_size), ("split.val", self.val_size), ("split.test", self.test_size)]
        {
            if size == 0 || size % self.t_steps != 0 {
                return bad(format!(
                    "{name} = {size} must be a positive multiple of the {} grid temperatures",
                    self.t_steps
                ));
            }
        }
        if self.histogram_bins == 0 || !(self.histogram_max > 0.0) {
            return bad("histogram needs at least one bin and a positive max".into());
        }
        // The per-stage configs carry their own rules.
        self.evolution_config(0).validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.train_config(0).validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.coverage_params().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn simulation_params(&self) -> Result<SimulationParams, PipelineError> {
        Ok(SimulationParams {
            lattice_size: self.lattice_size,
            temperatures: temperature_grid(self.t_min, self.t_max, self.t_steps)
                .map_err(stage_error("config"))?,
            samples_per_temperature: self.samples_per_temperature,
            equilibration_steps: self.equilibration_steps,
            decorrelation_steps: self.decorrelation_steps,
            coupling: self.coupling,
            seed: seeds::derive_seed(self.seed, 1),
        })
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        let mut config = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            ..TrainConfig::default()
        };
        config.adam.learning_rate = self.learning_rate;
        config
    }

    fn evolution_config(&self, seed: u64) -> EvolutionConfig {
        EvolutionConfig {
            population_size: self.population_size,
            generations: self.generations,
            selection_size: self.selection_size,
            mutation_probability: self.mutation_probability,
            max_layers: self.max_layers,
            max_width: self.max_width,
            seed,
        }
    }

    fn coverage_params(&self) -> CoverageParams {
        CoverageParams { threshold: self.threshold, top_k: self.top_k, sections: self.sections }
    }
}

/// Parses flat `key = value` config text: one pair per line, `#` starts a
/// comment, blank lines are fine. Returns the pairs in file order.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, PipelineError> {
    let mut pairs = Vec::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(PipelineError::Config(format!(
                "line {}: expected 'key = value', got '{raw}'",
                number + 1
            )));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Builds a config from layered sources, later ones winning: the named
/// profile, then the config file text, then explicit overrides.
pub fn resolve_config(
    profile: &str,
    file_text: Option<&str>,
    overrides: &[(String, String)],
) -> Result<PipelineConfig, PipelineError> {
    let mut config = PipelineConfig::profile(profile)?;
    if let Some(text) = file_text {
        for (key, value) in parse_config_text(text)? {
            config.set(&key, &value)?;
        }
    }
    for (key, value) in overrides {
        config.set(key, value)?;
    }
    Ok(config)
}

/// Splits per temperature: every temperature contributes `sizes.i / |grid|`
/// samples to each part, drawn disjointly after a seeded shuffle, so all
/// three parts stay stratified over the grid exactly like the source.
pub fn split_dataset(
    dataset: &Dataset,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), PipelineError> {
    let bad = |msg: String| Err(PipelineError::Stage { stage: "split", message: msg });
    let grid_len = dataset.temperature_grid.len();
    if grid_len == 0 {
        return bad("dataset has no temperatures".into());
    }
    let (train_size, val_size, test_size) = sizes;
    for (name, size) in [("train", train_size), ("val", val_size), ("test", test_size)] {
        if size == 0 || size % grid_len != 0 {
            return bad(format!(
                "{name} size {size} is not a positive multiple of the {grid_len} temperatures"
            ));
        }
    }
    let per_train = train_size / grid_len;
    let per_val = val_size / grid_len;
    let per_test = test_size / grid_len;
    let needed = per_train + per_val + per_test;

    let mut parts: [Vec<_>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (slot, (temperature, mut indices)) in
        dataset.per_temperature_indices().into_iter().enumerate()
    {
        if indices.len() < needed {
            return bad(format!(
                "temperature {temperature:?} has {} samples, need {needed}",
                indices.len()
            ));
        }
        let mut rng = seeds::seeded_rng(seeds::derive_seed3(seed, 0, slot as u64));
        indices.shuffle(&mut rng);
        let take = |part: &mut Vec<_>, count: usize, offset: usize| {
            part.extend(indices[offset..offset + count].iter().map(|&i| dataset.samples[i].clone()));
        };
        take(&mut parts[0], per_train, 0);
        take(&mut parts[1], per_val, per_train);
        take(&mut parts[2], per_test, per_train + per_val);
    }
    let [train_samples, val_samples, test_samples] = parts;
    let build = |samples, provenance| Dataset {
        samples,
        lattice_size: dataset.lattice_size,
        temperature_grid: dataset.temperature_grid.clone(),
        provenance,
    };
    Ok((
        build(train_samples, Provenance::Train),
        build(val_samples, Provenance::Validation),
        build(test_samples, Provenance::Test),
    ))
}

/// What one evolution run contributed.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// 1-based run number, also the `run_XX` directory name.
    pub run_index: usize,
    pub seed: u64,
    pub best_val_mse: f64,
    pub best_test_mse: f64,
    pub log: EvolutionLog,
}

/// In-memory view of a finished pipeline, next to the files on disk.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub config: PipelineConfig,
    pub runs: Vec<RunSummary>,
    pub temp_stats: TempStats,
    pub correlations: CorrelationTable,
    pub histogram: Histogram,
    /// Paths relative to the output directory, as listed in the manifest.
    pub artifacts: Vec<String>,
}

/// One evolution run's population, ranked best-first, with test MSEs and
/// the rebuilt models (`None` where training diverged).
pub struct FinishedRun {
    pub summary: RunSummary,
    pub population: Vec<(Genome, f64)>,
    pub models: Vec<Option<TrainedModel>>,
}

/// Evolves one run and rebuilds every final-population model. A genome
/// whose training diverged (infinite fitness) has no model to rebuild and
/// is scored `inf` on the test set as well. The run seed is
/// `evolution.seed`; `train_config.seed` is ignored, since every fitness
/// evaluation derives its own seed.
pub fn execute_run(
    run_index: usize,
    evolution: &EvolutionConfig,
    train_config: &TrainConfig,
    train_data: &RegressionData,
    val_data: &RegressionData,
    test_data: &RegressionData,
) -> Result<FinishedRun, PipelineError> {
    let (population, log) =
        evolve(evolution, train_data, val_data, train_config).map_err(stage_error("evolve"))?;

    let input_dim = train_data.inputs.first().map_or(0, Vec::len);
    let mut rebuilt: HashMap<(String, u64), TrainedModel> = HashMap::new();
    let mut models = Vec::with_capacity(population.len());
    let mut ranked = Vec::with_capacity(population.len());
    for genome in &population {
        let eval_seed = genome.eval_seed.expect("evolve() evaluates every survivor");
        let key = (genome.architecture_key(), eval_seed);
        let model = match rebuilt.get(&key) {
            Some(model) => Some(model.clone()),
            None => {
                let mut rebuild_config = train_config.clone();
                rebuild_config.seed = eval_seed;
                match train_genome(genome, input_dim, train_data, &rebuild_config) {
                    Ok(model) => {
                        rebuilt.insert(key, model.clone());
                        Some(model)
                    }
                    // The same divergence that made the fitness infinite.
                    Err(MlpError::TrainingDiverged { .. }) => None,
                    Err(e) => return Err(stage_error("evolve")(e)),
                }
            }
        };
        let test_mse = match &model {
            Some(model) => {
                evaluate_regression(model, test_data).map_err(stage_error("evolve"))?
            }
            None => f64::INFINITY,
        };
        ranked.push((genome.clone(), test_mse));
        models.push(model);
    }

    let best = &ranked[0];
    let summary = RunSummary {
        run_index,
        seed: evolution.seed,
        best_val_mse: best.0.fitness.unwrap_or(f64::INFINITY),
        best_test_mse: best.1,
        log,
    };
    Ok(FinishedRun { summary, population: ranked, models })
}

/// Writes one run's artifacts — `evolution_log.csv`, `population.csv`, and
/// `models/model_NN.txt` per rebuildable genome — under `out/prefix`, and
/// returns the relative paths written.
pub fn write_run_artifacts(
    run: &FinishedRun,
    out: &Path,
    prefix: &str,
) -> Result<Vec<String>, PipelineError> {
    let join = |name: &str| {
        if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}/{name}")
        }
    };
    let mut artifacts = Vec::new();
    fs::create_dir_all(out.join(join("models"))).map_err(stage_error("evolve"))?;

    let path = join("evolution_log.csv");
    let mut file = create_file(&out.join(&path), "evolve")?;
    write_evolution_log_csv(&mut file, &run.summary.log).map_err(stage_error("evolve"))?;
    artifacts.push(path);

    let path = join("population.csv");
    let mut file = create_file(&out.join(&path), "evolve")?;
    write_population_csv(&mut file, &run.population).map_err(stage_error("evolve"))?;
    artifacts.push(path);

    for (rank, model) in run.models.iter().enumerate() {
        if let Some(model) = model {
            let path = join(&format!("models/model_{:02}.txt", rank + 1));
            save_model(model, &out.join(&path)).map_err(stage_error("evolve"))?;
            artifacts.push(path);
        }
    }
    Ok(artifacts)
}

fn create_file(path: &Path, stage: &'static str) -> Result<BufWriter<fs::File>, PipelineError> {
    Ok(BufWriter::new(fs::File::create(path).map_err(stage_error(stage))?))
}

/// Runs the whole experiment into `config.out_dir`.
///
/// Stages: generate the dataset; stratify it into train/val/test; evolve
/// `runs` independent populations (concurrently — each run writes only its
/// own `runs/run_XX/` directory); compute per-temperature error statistics
/// of the per-run best models on the test split; profile neuron bounds on
/// the train split and compute coverage per temperature on the test split;
/// correlate coverage against error; and write the manifest last, once
/// everything it lists exists.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    config.validate()?;
    let out = &config.out_dir;
    let mut artifacts: Vec<String> = Vec::new();

    // generate
    let params = config.simulation_params()?;
    let dataset = generate_dataset(&params).map_err(stage_error("generate"))?;
    fs::create_dir_all(out).map_err(stage_error("generate"))?;
    write_dataset_csv(&dataset, out.join("dataset.csv")).map_err(stage_error("generate"))?;
    artifacts.push("dataset.csv".into());

    // split
    let (train_split, val_split, test_split) = split_dataset(
        &dataset,
        (config.train_size, config.val_size, config.test_size),
        seeds::derive_seed(config.seed, 2),
    )?;
    fs::create_dir_all(out.join("splits")).map_err(stage_error("split"))?;
    for (name, split) in
        [("train", &train_split), ("val", &val_split), ("test", &test_split)]
    {
        let path = format!("splits/{name}.csv");
        write_dataset_csv(split, out.join(&path)).map_err(stage_error("split"))?;
        artifacts.push(path);
    }

    // evolve (all runs share the splits; each run owns its directory)
    let train_data = RegressionData::from_dataset(&train_split);
    let val_data = RegressionData::from_dataset(&val_split);
    let test_data = RegressionData::from_dataset(&test_split);
    let run_seeds: Vec<u64> =
        (0..config.runs).map(|i| seeds::derive_seed3(config.seed, 3, i as u64)).collect();
    let mut finished: Vec<FinishedRun> = run_seeds
        .par_iter()
        .enumerate()
        .map(|(i, &run_seed)| {
            execute_run(
                i + 1,
                &config.evolution_config(run_seed),
                &config.train_config(0),
                &train_data,
                &val_data,
                &test_data,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut best_models = Vec::with_capacity(finished.len());
    for run in &mut finished {
        let dir = format!("runs/run_{:02}", run.summary.run_index);
        artifacts.extend(write_run_artifacts(run, out, &dir)?);
        match run.models[0].take() {
            Some(model) => best_models.push(model),
            None => {
                return Err(PipelineError::Stage {
                    stage: "evolve",
                    message: format!(
                        "run {} produced no usable best model (training diverged)",
                        run.summary.run_index
                    ),
                })
            }
        }
    }

    // stats
    let temp_stats =
        per_temperature_stats(&best_models, &test_split).map_err(stage_error("stats"))?;
    fs::create_dir_all(out.join("analysis")).map_err(stage_error("stats"))?;
    let mut file = create_file(&out.join("analysis/temp_stats.csv"), "stats")?;
    write_temp_stats_csv(&mut file, &temp_stats).map_err(stage_error("stats"))?;
    artifacts.push("analysis/temp_stats.csv".into());

    // coverage: bounds from the train split, metrics on the test split
    let coverage_params = config.coverage_params();
    let mut rows: Vec<CoverageRow> = Vec::new();
    let mut reports: Vec<Vec<(f64, CoverageReport)>> = Vec::new();
    for (i, model) in best_models.iter().enumerate() {
        let bounds =
            profile_bounds(model, &train_data.inputs).map_err(stage_error("coverage"))?;
        let per_temp = coverage_by_temperature(model, &test_split, &bounds, &coverage_params)
            .map_err(stage_error("coverage"))?;
        let model_id = format!("run_{:02}", i + 1);
        rows.extend(per_temp.iter().map(|(temperature, report)| CoverageRow {
            temperature: *temperature,
            report: report.clone(),
            model_id: model_id.clone(),
        }));
        reports.push(per_temp);
    }
    let mut file = create_file(&out.join("analysis/coverage_by_temperature.csv"), "coverage")?;
    write_coverage_csv(&mut file, &rows).map_err(stage_error("coverage"))?;
    artifacts.push("analysis/coverage_by_temperature.csv".into());

    // analyze
    let correlations =
        correlation_table(&reports, &temp_stats).map_err(stage_error("analyze"))?;
    let mut file = create_file(&out.join("analysis/correlations.csv"), "analyze")?;
    write_correlations_csv(&mut file, &correlations).map_err(stage_error("analyze"))?;
    artifacts.push("analysis/correlations.csv".into());

    let all_test_mses: Vec<f64> = finished
        .iter()
        .flat_map(|run| run.population.iter().map(|(_, test_mse)| *test_mse))
        .collect();
    let mse_histogram = histogram(
        &all_test_mses,
        config.histogram_bins,
        (0.0, config.histogram_max),
    )
    .map_err(stage_error("analyze"))?;
    let mut file = create_file(&out.join("analysis/mse_histogram.csv"), "analyze")?;
    write_histogram_csv(&mut file, &mse_histogram).map_err(stage_error("analyze"))?;
    artifacts.push("analysis/mse_histogram.csv".into());

    // manifest
    artifacts.sort();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "format_version 1");
    let _ = writeln!(manifest, "config_sha256 {}", config.hash());
    let _ = writeln!(manifest);
    let _ = writeln!(manifest, "[config]");
    for (k, v) in config.entries() {
        let _ = writeln!(manifest, "{k} = {v}");
    }
    let _ = writeln!(manifest);
    let _ = writeln!(manifest, "[seeds]");
    let _ = writeln!(manifest, "dataset = {}", params.seed);
    let _ = writeln!(manifest, "split = {}", seeds::derive_seed(config.seed, 2));
    for (i, seed) in run_seeds.iter().enumerate() {
        let _ = writeln!(manifest, "run_{:02} = {seed}", i + 1);
    }
    let _ = writeln!(manifest);
    let _ = writeln!(manifest, "[artifacts]");
    for path in &artifacts {
        let _ = writeln!(manifest, "{path}");
    }
    fs::write(out.join("manifest.txt"), manifest).map_err(stage_error("manifest"))?;
    artifacts.push("manifest.txt".into());

    let runs = finished.into_iter().map(|run| run.summary).collect();
    Ok(PipelineOutcome {
        config: config.clone(),
        runs,
        temp_stats,
        correlations,
        histogram: mse_histogram,
        artifacts,
    })
}
