//! `spinlab` — generate Ising spin datasets, evolve temperature-regression
//! networks, and analyze their coverage behavior, from the shell.
//!
//! Every subcommand is a thin wrapper over the library: all data moves
//! through the documented CSV and model-file formats, so any stage can be
//! rerun or replaced by hand. `spinlab pipeline` chains them all into one
//! reproducible experiment directory.

use std::error::Error;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinlab::analysis::{
    correlation_table, histogram, per_temperature_stats, write_correlations_csv,
    write_histogram_csv, write_temp_stats_csv,
};
use spinlab::coverage::{
    coverage_by_temperature, profile_bounds, write_coverage_csv, CoverageParams, CoverageReport,
    CoverageRow,
};
use spinlab::evolve::EvolutionConfig;
use spinlab::lattice::{
    generate_dataset, read_dataset_csv, temperature_grid, write_dataset_csv, SimulationParams,
};
use spinlab::mlp::{load_model, RegressionData, TrainConfig, TrainedModel};
use spinlab::pipeline::{
    execute_run, resolve_config, run_pipeline, split_dataset, write_run_artifacts,
};

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "spinlab",
    version,
    about = "Ising-model data generation, architecture evolution, and coverage analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample spin configurations over a temperature grid into a CSV.
    Generate(GenerateArgs),
    /// Split a dataset CSV into stratified train/val/test CSVs.
    Split(SplitArgs),
    /// Evolve architectures against train/val splits and save the final
    /// population.
    Evolve(EvolveArgs),
    /// Compute coverage metrics of one model, per temperature.
    Coverage(CoverageArgs),
    /// Error statistics, coverage correlations, and the MSE histogram for
    /// a set of models.
    Analyze(AnalyzeArgs),
    /// The full experiment: generate, split, evolve, analyze, manifest.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Lattice side length.
    #[arg(long, default_value_t = 8)]
    size: usize,
    /// Lowest grid temperature.
    #[arg(long, default_value_t = 1.0)]
    tmin: f64,
    /// Highest grid temperature.
    #[arg(long, default_value_t = 3.5)]
    tmax: f64,
    /// Number of evenly spaced temperatures.
    #[arg(long, default_value_t = 26)]
    tsteps: usize,
    /// Snapshots recorded per temperature.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Metropolis attempts before recording starts.
    #[arg(long, default_value_t = 512)]
    equilibration: usize,
    /// Wolff updates between snapshots (defaults to the lattice size).
    #[arg(long)]
    decorrelation: Option<usize>,
    /// Ferromagnetic coupling J.
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Source dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Training split size (multiple of the temperature count).
    #[arg(long)]
    train: usize,
    /// Validation split size.
    #[arg(long)]
    val: usize,
    /// Test split size.
    #[arg(long)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for train.csv, val.csv, and test.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvolveArgs {
    /// Training split CSV.
    #[arg(long)]
    train: PathBuf,
    /// Validation split CSV (fitness).
    #[arg(long)]
    val: PathBuf,
    /// Test split CSV (final-population scoring only).
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 8)]
    population: usize,
    #[arg(long, default_value_t = 5)]
    generations: usize,
    #[arg(long, default_value_t = 4)]
    selection: usize,
    #[arg(long, default_value_t = 1.0)]
    mutation_probability: f64,
    #[arg(long, default_value_t = 20)]
    max_layers: usize,
    #[arg(long, default_value_t = 20)]
    max_width: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for evolution_log.csv, population.csv, and models/.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    /// Serialized model file.
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV whose inputs define the neuron bounds (the train split).
    #[arg(long)]
    profile: PathBuf,
    /// Dataset CSV to measure, temperature by temperature.
    #[arg(long)]
    data: PathBuf,
    /// NC activation threshold t.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// TKNC per-layer rank cutoff K.
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    /// KMN section count k.
    #[arg(long, default_value_t = 10)]
    sections: usize,
    /// Identifier for the model_id column (defaults to the file stem).
    #[arg(long)]
    model_id: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Serialized model file; repeat for several models.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Train split CSV (defines coverage bounds).
    #[arg(long)]
    train: PathBuf,
    /// Test split CSV (errors and coverage inputs).
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    #[arg(long, default_value_t = 10)]
    sections: usize,
    #[arg(long, default_value_t = 10)]
    histogram_bins: usize,
    /// Histogram upper edge; MSEs at or above it are excluded.
    #[arg(long, default_value_t = 0.5)]
    histogram_max: f64,
    /// Directory for the analysis CSVs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Base profile to start from.
    #[arg(long, default_value = "desk")]
    profile: String,
    /// Config file of `key = value` lines layered over the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key, e.g. --set evolve.population=16; repeatable.
    /// Applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master seed (wins over profile, file, and --set).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (wins over profile, file, and --set).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, result): (&str, CliResult) = match cli.command {
        Command::Generate(args) => ("generate", generate(args)),
        Command::Split(args) => ("split", split(args)),
        Command::Evolve(args) => ("evolve", evolve_cmd(args)),
        Command::Coverage(args) => ("coverage", coverage(args)),
        Command::Analyze(args) => ("analyze", analyze(args)),
        Command::Pipeline(args) => ("pipeline", pipeline(args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string();
            if message.starts_with("stage ") {
                eprintln!("error: {message}");
            } else {
                eprintln!("error: stage {stage}: {message}");
            }
            ExitCode::FAILURE
        }
    }
}

fn generate(args: GenerateArgs) -> CliResult {
    let params = SimulationParams {
        lattice_size: args.size,
        temperatures: temperature_grid(args.tmin, args.tmax, args.tsteps)?,
        samples_per_temperature: args.samples,
        equilibration_steps: args.equilibration,
        decorrelation_steps: args.decorrelation.unwrap_or(args.size),
        coupling: args.coupling,
        seed: args.seed,
    };
    let dataset = generate_dataset(&params)?;
    write_dataset_csv(&dataset, &args.out)?;
    println!("wrote {} samples to {}", dataset.samples.len(), args.out.display());
    Ok(())
}

fn split(args: SplitArgs) -> CliResult {
    let dataset = read_dataset_csv(&args.data)?;
    let (train, val, test) =
        split_dataset(&dataset, (args.train, args.val, args.test), args.seed)?;
    fs::create_dir_all(&args.out)?;
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        let path = args.out.join(format!("{name}.csv"));
        write_dataset_csv(part, &path)?;
        println!("wrote {} samples to {}", part.samples.len(), path.display());
    }
    Ok(())
}

fn evolve_cmd(args: EvolveArgs) -> CliResult {
    let train_data = RegressionData::from_dataset(&read_dataset_csv(&args.train)?);
    let val_data = RegressionData::from_dataset(&read_dataset_csv(&args.val)?);
    let test_data = RegressionData::from_dataset(&read_dataset_csv(&args.test)?);
    let evolution = EvolutionConfig {
        population_size: args.population,
        generations: args.generations,
        selection_size: args.selection,
        mutation_probability: args.mutation_probability,
        max_layers: args.max_layers,
        max_width: args.max_width,
        seed: args.seed,
    };
    let mut train_config =
        TrainConfig { epochs: args.epochs, batch_size: args.batch_size, ..TrainConfig::default() };
    train_config.adam.learning_rate = args.learning_rate;

    let run = execute_run(1, &evolution, &train_config, &train_data, &val_data, &test_data)?;
    fs::create_dir_all(&args.out)?;
    write_run_artifacts(&run, &args.out, "")?;
    println!(
        "best architecture: val MSE {:?}, test MSE {:?} ({} evaluations)",
        run.summary.best_val_mse, run.summary.best_test_mse, run.summary.log.evaluations
    );
    println!("artifacts in {}", args.out.display());
    Ok(())
}

fn coverage(args: CoverageArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let profile_data = read_dataset_csv(&args.profile)?;
    let data = read_dataset_csv(&args.data)?;
    let params = CoverageParams {
        threshold: args.threshold,
        top_k: args.top_k,
        sections: args.sections,
    };
    let bounds = profile_bounds(&model, &profile_data.inputs())?;
    let per_temp = coverage_by_temperature(&model, &data, &bounds, &params)?;
    let model_id = args.model_id.unwrap_or_else(|| {
        args.model.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
    });
    let rows: Vec<CoverageRow> = per_temp
        .into_iter()
        .map(|(temperature, report)| CoverageRow {
            temperature,
            report,
            model_id: model_id.clone(),
        })
        .collect();
    let mut file = BufWriter::new(fs::File::create(&args.out)?);
    write_coverage_csv(&mut file, &rows)?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn model_id_for(path: &Path, index: usize) -> String {
    path.file_stem()
        .map_or_else(|| format!("model_{:02}", index + 1), |s| s.to_string_lossy().into_owned())
}

fn analyze(args: AnalyzeArgs) -> CliResult {
    let train_split = read_dataset_csv(&args.train)?;
    let test_split = read_dataset_csv(&args.test)?;
    let models: Vec<TrainedModel> =
        args.models.iter().map(|p| load_model(p)).collect::<Result<_, _>>()?;
    let params = CoverageParams {
        threshold: args.threshold,
        top_k: args.top_k,
        sections: args.sections,
    };

    fs::create_dir_all(&args.out)?;
    let temp_stats = per_temperature_stats(&models, &test_split)?;
    let mut file = BufWriter::new(fs::File::create(args.out.join("temp_stats.csv"))?);
    write_temp_stats_csv(&mut file, &temp_stats)?;

    let profile_inputs = train_split.inputs();
    let mut rows: Vec<CoverageRow> = Vec::new();
    let mut reports: Vec<Vec<(f64, CoverageReport)>> = Vec::new();
    for (i, model) in models.iter().enumerate() {
        let bounds = profile_bounds(model, &profile_inputs)?;
        let per_temp = coverage_by_temperature(model, &test_split, &bounds, &params)?;
        let model_id = model_id_for(args.models[i].as_path(), i);
        rows.extend(per_temp.iter().map(|(temperature, report)| CoverageRow {
            temperature: *temperature,
            report: report.clone(),
            model_id: model_id.clone(),
        }));
        reports.push(per_temp);
    }
    let mut file =
        BufWriter::new(fs::File::create(args.out.join("coverage_by_temperature.csv"))?);
    write_coverage_csv(&mut file, &rows)?;

    let correlations = correlation_table(&reports, &temp_stats)?;
    let mut file = BufWriter::new(fs::File::create(args.out.join("correlations.csv"))?);
    write_correlations_csv(&mut file, &correlations)?;

    let test_data = RegressionData::from_dataset(&test_split);
    let mses: Vec<f64> = models
        .iter()
        .map(|m| spinlab::mlp::evaluate_regression(m, &test_data))
        .collect::<Result<_, _>>()?;
    let mse_histogram = histogram(&mses, args.histogram_bins, (0.0, args.histogram_max))?;
    let mut file = BufWriter::new(fs::File::create(args.out.join("mse_histogram.csv"))?);
    write_histogram_csv(&mut file, &mse_histogram)?;

    println!("analyzed {} models over {} temperatures", models.len(), temp_stats.temperatures.len());
    println!("artifacts in {}", args.out.display());
    Ok(())
}

fn pipeline(args: PipelineArgs) -> CliResult {
    let file_text = match &args.config {
        Some(path) => Some(fs::read_to_string(path)?),
        None => None,
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    for pair in &args.sets {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(format!("--set expects KEY=VALUE, got '{pair}'").into());
        };
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &args.out {
        overrides.push(("out".into(), out.to_string_lossy().into_owned()));
    }
    let config = resolve_config(&args.profile, file_text.as_deref(), &overrides)?;
    let outcome = run_pipeline(&config)?;
    for run in &outcome.runs {
        println!(
            "run {:02}: best val MSE {:?}, test MSE {:?}",
            run.run_index, run.best_val_mse, run.best_test_mse
        );
    }
    println!("{} artifacts in {}", outcome.artifacts.len(), config.out_dir.display());
    Ok(())
}
