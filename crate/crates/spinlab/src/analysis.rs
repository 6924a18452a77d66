//! Per-temperature error statistics, correlations, and histogram data.
//!
//! This is the reporting layer: it takes the best models of several
//! evolution runs, measures how their prediction error distributes over the
//! temperature grid, and correlates coverage metrics against those errors.
//! Correlations that are mathematically undefined (zero variance, all-tied
//! ranks) are reported as explicit flags — never silently coerced to a
//! number.

use std::io::{self, Write};

use crate::coverage::CoverageReport;
use crate::lattice::Dataset;
use crate::mlp::{evaluate, MlpError, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("vectors have different lengths ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least two points, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: {0}")]
    Undefined(&'static str),
    #[error("need at least one model")]
    NoModels,
    #[error("temperature grids do not line up: {0}")]
    GridMismatch(String),
    #[error("invalid histogram: {0}")]
    BadHistogram(String),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

fn check_paired(x: &[f64], y: &[f64]) -> Result<(), AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooShort(x.len()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(AnalysisError::Undefined("input contains NaN"));
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    check_paired(x, y)?;
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::Undefined("zero variance"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Kendall rank correlation, tie-corrected (the τ-b variant):
///
/// ```text
/// τ = (C - D) / sqrt((n0 - n1)(n0 - n2))
/// ```
///
/// with `n0` the number of pairs, `n1`/`n2` the pairs tied in `x`/`y`, and
/// `C`/`D` the concordant/discordant pair counts. Quadratic pair counting —
/// fine for the vector lengths used here (temperature grids, run counts).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    check_paired(x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).expect("NaN was rejected above");
            let dy = y[i].partial_cmp(&y[j]).expect("NaN was rejected above");
            match (dx.is_eq(), dy.is_eq()) {
                (true, true) => {
                    ties_x += 1;
                    ties_y += 1;
                }
                (true, false) => ties_x += 1,
                (false, true) => ties_y += 1,
                (false, false) => {
                    if dx == dy {
                        concordant += 1;
                    } else {
                        discordant += 1;
                    }
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if n0 == ties_x || n0 == ties_y {
        return Err(AnalysisError::Undefined("all pairs tied"));
    }
    let denominator = ((n0 - ties_x) as f64 * (n0 - ties_y) as f64).sqrt();
    Ok((concordant - discordant) as f64 / denominator)
}

/// Mean and standard deviation of model MSE, per grid temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct TempStats {
    pub temperatures: Vec<f64>,
    pub mse_mean: Vec<f64>,
    /// Population standard deviation (divisor `n`) across models.
    pub mse_std: Vec<f64>,
    pub model_count: usize,
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

/// Evaluates every model on the test set and aggregates the per-temperature
/// MSEs across models.
pub fn per_temperature_stats(
    models: &[TrainedModel],
    test_set: &Dataset,
) -> Result<TempStats, AnalysisError> {
    if models.is_empty() {
        return Err(AnalysisError::NoModels);
    }
    let grid = &test_set.temperature_grid;
    let mut per_model: Vec<Vec<f64>> = Vec::with_capacity(models.len());
    for model in models {
        let report = evaluate(model, test_set)?;
        let temps: Vec<f64> = report.per_temperature.iter().map(|&(t, _)| t).collect();
        if &temps != grid {
            return Err(AnalysisError::GridMismatch(format!(
                "model evaluation covered {} of {} grid temperatures",
                temps.len(),
                grid.len()
            )));
        }
        per_model.push(report.per_temperature.into_iter().map(|(_, mse)| mse).collect());
    }
    let mut mse_mean = Vec::with_capacity(grid.len());
    let mut mse_std = Vec::with_capacity(grid.len());
    for t in 0..grid.len() {
        let column: Vec<f64> = per_model.iter().map(|row| row[t]).collect();
        let (mean, std) = mean_and_population_std(&column);
        mse_mean.push(mean);
        mse_std.push(std);
    }
    Ok(TempStats {
        temperatures: grid.clone(),
        mse_mean,
        mse_std,
        model_count: models.len(),
    })
}

/// One correlation table entry. `None` marks an undefined coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCell {
    pub metric: String,
    pub target: String,
    pub pearson: Option<f64>,
    pub kendall: Option<f64>,
}

/// Coverage-vs-error correlations.
///
/// Rows cover each metric aggregated two ways across models per temperature
/// — the mean (`nc`, `tknc`, ...) and the population standard deviation
/// (`nc_std`, `tknc_std`, ...) — correlated against three targets:
/// `mse_mean`, `mse_std`, and `temperature`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    pub cells: Vec<CorrelationCell>,
}

impl CorrelationTable {
    pub fn get(&self, metric: &str, target: &str) -> Option<&CorrelationCell> {
        self.cells.iter().find(|c| c.metric == metric && c.target == target)
    }
}

const METRIC_EXTRACTORS: [(&str, fn(&CoverageReport) -> f64); 5] = [
    ("nc", |r| r.nc),
    ("tknc", |r| r.tknc),
    ("kmn", |r| r.kmn),
    ("nbc", |r| r.nbc),
    ("snac", |r| r.snac),
];

fn correlate(metric: &str, target: &str, x: &[f64], y: &[f64]) -> Result<CorrelationCell, AnalysisError> {
    let flatten = |r: Result<f64, AnalysisError>| match r {
        Ok(v) => Ok(Some(v)),
        Err(AnalysisError::Undefined(_)) | Err(AnalysisError::TooShort(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(CorrelationCell {
        metric: metric.to_string(),
        target: target.to_string(),
        pearson: flatten(pearson(x, y))?,
        kendall: flatten(kendall_tau(x, y))?,
    })
}

/// Builds the correlation table from per-model per-temperature coverage
/// reports (one inner vector per model, in grid order) and the matching
/// error statistics.
pub fn correlation_table(
    coverage: &[Vec<(f64, CoverageReport)>],
    stats: &TempStats,
) -> Result<CorrelationTable, AnalysisError> {
    if coverage.is_empty() {
        return Err(AnalysisError::NoModels);
    }
    for (m, per_temp) in coverage.iter().enumerate() {
        let temps: Vec<f64> = per_temp.iter().map(|&(t, _)| t).collect();
        if temps != stats.temperatures {
            return Err(AnalysisError::GridMismatch(format!(
                "model {m} reports {} temperatures, stats have {}",
                temps.len(),
                stats.temperatures.len()
            )));
        }
    }
    let targets: [(&str, &[f64]); 3] = [
        ("mse_mean", &stats.mse_mean),
        ("mse_std", &stats.mse_std),
        ("temperature", &stats.temperatures),
    ];
    let mut cells = Vec::new();
    let mut std_rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, extract) in METRIC_EXTRACTORS {
        let mut means = Vec::with_capacity(stats.temperatures.len());
        let mut stds = Vec::with_capacity(stats.temperatures.len());
        for t in 0..stats.temperatures.len() {
            let column: Vec<f64> =
                coverage.iter().map(|per_temp| extract(&per_temp[t].1)).collect();
            let (mean, std) = mean_and_population_std(&column);
            means.push(mean);
            stds.push(std);
        }
        for (target, y) in targets {
            cells.push(correlate(name, target, &means, y)?);
        }
        std_rows.push((format!("{name}_std"), stds));
    }
    for (name, stds) in &std_rows {
        for (target, y) in targets {
            cells.push(correlate(name, target, stds, y)?);
        }
    }
    Ok(CorrelationTable { cells })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    /// Values outside `[low, high)` — kept out of the bins by design, the
    /// way the error histogram excludes far-off models, but still counted.
    pub excluded: usize,
}

/// Uniform histogram over `range = [low, high)`. The upper edge is
/// exclusive; out-of-range and NaN values land in `excluded`.
pub fn histogram(
    values: &[f64],
    bin_count: usize,
    range: (f64, f64),
) -> Result<Histogram, AnalysisError> {
    let (low, high) = range;
    if bin_count == 0 {
        return Err(AnalysisError::BadHistogram("need at least one bin".into()));
    }
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(AnalysisError::BadHistogram(format!("bad range [{low}, {high})")));
    }
    let width = (high - low) / bin_count as f64;
    let mut bins: Vec<HistogramBin> = (0..bin_count)
        .map(|i| HistogramBin {
            low: low + i as f64 * width,
            high: if i + 1 == bin_count { high } else { low + (i + 1) as f64 * width },
            count: 0,
        })
        .collect();
    let mut excluded = 0;
    for &v in values {
        if v >= low && v < high {
            let index = (((v - low) / width).floor() as usize).min(bin_count - 1);
            bins[index].count += 1;
        } else {
            excluded += 1;
        }
    }
    Ok(Histogram { bins, excluded })
}

/// `temperature,mse_mean,mse_std`
pub fn write_temp_stats_csv<W: Write>(mut writer: W, stats: &TempStats) -> io::Result<()> {
    writeln!(writer, "temperature,mse_mean,mse_std")?;
    for i in 0..stats.temperatures.len() {
        writeln!(
            writer,
            "{:?},{:?},{:?}",
            stats.temperatures[i], stats.mse_mean[i], stats.mse_std[i]
        )?;
    }
    Ok(())
}

/// `metric,target,pearson,kendall` with `undefined` for flagged cells.
pub fn write_correlations_csv<W: Write>(
    mut writer: W,
    table: &CorrelationTable,
) -> io::Result<()> {
    fn cell(v: Option<f64>) -> String {
        v.map_or_else(|| "undefined".to_string(), |v| format!("{v:?}"))
    }
    writeln!(writer, "metric,target,pearson,kendall")?;
    for c in &table.cells {
        writeln!(writer, "{},{},{},{}", c.metric, c.target, cell(c.pearson), cell(c.kendall))?;
    }
    Ok(())
}

/// `bin_low,bin_high,count`
pub fn write_histogram_csv<W: Write>(mut writer: W, histogram: &Histogram) -> io::Result<()> {
    writeln!(writer, "bin_low,bin_high,count")?;
    for bin in &histogram.bins {
        writeln!(writer, "{:?},{:?},{}", bin.low, bin.high, bin.count)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::CoverageParams;
    use crate::lattice::{LabeledSample, Provenance};
    use crate::mlp::net::DenseLayer;
    use crate::mlp::{Activation, ArchitectureSpec, Initializer, LayerSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pearson_hand_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(
            pearson(&x, &[3.0, 5.0, 7.0, 9.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            pearson(&x, &[-1.0, -2.0, -3.0, -4.0]).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        // Means 2.5/2.5, covariance sum 4, variance sums 5 and 5: r = 4/5.
        assert_abs_diff_eq!(
            pearson(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kendall_hand_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap(), -1.0);
        // Pairs: (1,2) and (1,3) concordant, (2,3) discordant: (2-1)/3.
        assert_abs_diff_eq!(
            kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kendall_corrects_for_ties() {
        // x ties one pair (n1 = 1): C = 2, D = 0, tau-b = 2 / sqrt(2 * 3).
        assert_abs_diff_eq!(
            kendall_tau(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(),
            2.0 / 6.0f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn degenerate_correlations_are_refused() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(AnalysisError::Undefined(_))
        ));
        assert!(matches!(
            kendall_tau(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(AnalysisError::Undefined(_))
        ));
        assert!(matches!(
            pearson(&[1.0, f64::NAN], &[1.0, 2.0]),
            Err(AnalysisError::Undefined(_))
        ));
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(AnalysisError::TooShort(1))
        ));
        assert!(matches!(
            kendall_tau(&[1.0, 2.0], &[1.0]),
            Err(AnalysisError::LengthMismatch { x: 2, y: 1 })
        ));
    }

    #[test]
    fn correlations_are_symmetric_bit_for_bit() {
        let x = [0.3, 1.7, -2.2, 0.9, 4.1];
        let y = [1.1, -0.4, 2.2, 0.0, -3.3];
        assert_eq!(pearson(&x, &y).unwrap(), pearson(&y, &x).unwrap());
        assert_eq!(kendall_tau(&x, &y).unwrap(), kendall_tau(&y, &x).unwrap());
    }

    #[test]
    fn kendall_sees_only_ranks() {
        let x: [f64; 5] = [1.0, 3.0, 2.0, 5.0, 4.0];
        let cubed: Vec<f64> = x.iter().map(|&v| v.powi(3)).collect();
        let y = [2.0, 1.0, 4.0, 3.0, 5.0];
        assert_eq!(kendall_tau(&x, &y).unwrap(), kendall_tau(&cubed, &y).unwrap());
    }

    /// A model that ignores its input and always outputs `constant`.
    fn constant_model(input_dim: usize, constant: f64) -> TrainedModel {
        let spec = ArchitectureSpec::new(
            input_dim,
            vec![LayerSpec {
                width: 1,
                activation: Activation::Relu,
                initializer: Initializer::UniformGlorot,
            }],
        )
        .unwrap();
        TrainedModel {
            spec,
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

    fn two_temperature_dataset() -> Dataset {
        let mut samples = Vec::new();
        for &temperature in &[1.0, 2.0] {
            for _ in 0..3 {
                samples.push(LabeledSample { configuration: vec![1, -1, -1, 1], temperature });
            }
        }
        Dataset {
            samples,
            lattice_size: 2,
            temperature_grid: vec![1.0, 2.0],
            provenance: Provenance::Test,
        }
    }

    #[test]
    fn single_model_stats_have_zero_std_and_match_evaluate() {
        let dataset = two_temperature_dataset();
        let model = constant_model(4, 1.5);
        let stats = per_temperature_stats(std::slice::from_ref(&model), &dataset).unwrap();
        let report = evaluate(&model, &dataset).unwrap();
        assert_eq!(stats.temperatures, vec![1.0, 2.0]);
        assert_eq!(stats.model_count, 1);
        assert_eq!(stats.mse_std, vec![0.0, 0.0]);
        for (i, &(_, mse)) in report.per_temperature.iter().enumerate() {
            assert_eq!(stats.mse_mean[i], mse);
        }
    }

    #[test]
    fn two_constant_models_give_hand_computed_stats() {
        let dataset = two_temperature_dataset();
        let models = vec![constant_model(4, 1.0), constant_model(4, 3.0)];
        let stats = per_temperature_stats(&models, &dataset).unwrap();
        // Model A errors: 0 at T=1, 1 at T=2. Model B: 4 at T=1, 1 at T=2.
        assert_eq!(stats.mse_mean, vec![2.0, 1.0]);
        assert_eq!(stats.mse_std, vec![2.0, 0.0]);
    }

    #[test]
    fn stats_require_models() {
        assert!(matches!(
            per_temperature_stats(&[], &two_temperature_dataset()),
            Err(AnalysisError::NoModels)
        ));
    }

    fn report_with(nc: f64, tknc: f64) -> CoverageReport {
        CoverageReport {
            nc,
            tknc,
            kmn: 0.5,
            nbc: 0.0,
            snac: 0.0,
            params: CoverageParams::default(),
        }
    }

    #[test]
    fn metric_equal_to_temperature_correlates_perfectly() {
        let temps = [1.0, 2.0, 3.0, 4.0];
        let coverage: Vec<Vec<(f64, CoverageReport)>> = (0..2)
            .map(|_| temps.iter().map(|&t| (t, report_with(t / 10.0, 0.3))).collect())
            .collect();
        let stats = TempStats {
            temperatures: temps.to_vec(),
            mse_mean: vec![0.4, 0.3, 0.2, 0.5],
            mse_std: vec![0.1, 0.2, 0.1, 0.3],
            model_count: 2,
        };
        let table = correlation_table(&coverage, &stats).unwrap();
        let cell = table.get("nc", "temperature").unwrap();
        assert_abs_diff_eq!(cell.pearson.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(cell.kendall.unwrap(), 1.0);
    }

    #[test]
    fn constant_metrics_are_flagged_undefined() {
        let temps = [1.0, 2.0, 3.0];
        let coverage: Vec<Vec<(f64, CoverageReport)>> =
            vec![temps.iter().map(|&t| (t, report_with(0.5, 0.25))).collect()];
        let stats = TempStats {
            temperatures: temps.to_vec(),
            mse_mean: vec![0.4, 0.3, 0.2],
            mse_std: vec![0.1, 0.2, 0.1],
            model_count: 1,
        };
        let table = correlation_table(&coverage, &stats).unwrap();
        let cell = table.get("nc", "mse_mean").unwrap();
        assert_eq!(cell.pearson, None);
        assert_eq!(cell.kendall, None);
        // Std rows of a single model are all zero, hence also undefined.
        let cell = table.get("nc_std", "mse_mean").unwrap();
        assert_eq!(cell.pearson, None);
    }

    #[test]
    fn std_rows_track_across_model_spread() {
        // Two models whose NC disagree more at higher temperatures, so the
        // NC spread across models grows with temperature.
        let temps = [1.0, 2.0, 3.0];
        let coverage = vec![
            temps.iter().map(|&t| (t, report_with(0.5 + 0.1 * t, 0.3))).collect(),
            temps.iter().map(|&t| (t, report_with(0.5 - 0.1 * t, 0.3))).collect(),
        ];
        let stats = TempStats {
            temperatures: temps.to_vec(),
            mse_mean: vec![0.1, 0.2, 0.3],
            mse_std: vec![0.0, 0.1, 0.0],
            model_count: 2,
        };
        let table = correlation_table(&coverage, &stats).unwrap();
        let cell = table.get("nc_std", "temperature").unwrap();
        assert_abs_diff_eq!(cell.pearson.unwrap(), 1.0, epsilon = 1e-12);
        // The means cancel to a constant 0.5: flagged undefined.
        assert_eq!(table.get("nc", "temperature").unwrap().pearson, None);
        // 5 metrics x 2 aggregations x 3 targets.
        assert_eq!(table.cells.len(), 30);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let coverage: Vec<Vec<(f64, CoverageReport)>> =
            vec![vec![(1.0, report_with(0.1, 0.2))]];
        let stats = TempStats {
            temperatures: vec![1.0, 2.0],
            mse_mean: vec![0.1, 0.2],
            mse_std: vec![0.0, 0.0],
            model_count: 1,
        };
        assert!(matches!(
            correlation_table(&coverage, &stats),
            Err(AnalysisError::GridMismatch(_))
        ));
    }

    #[test]
    fn histogram_places_uniform_values_one_per_bin() {
        let values: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let hist = histogram(&values, 10, (0.0, 1.0)).unwrap();
        assert_eq!(hist.bins.len(), 10);
        assert!(hist.bins.iter().all(|b| b.count == 1));
        assert_eq!(hist.excluded, 0);
        assert_eq!(hist.bins[0].low, 0.0);
        assert_eq!(hist.bins[9].high, 1.0);
    }

    #[test]
    fn histogram_excludes_out_of_range_values() {
        let values = [0.25, 0.25, 0.49, 0.5, 0.75, -0.1, f64::NAN];
        let hist = histogram(&values, 2, (0.0, 0.5)).unwrap();
        // [0, 0.25) is empty, [0.25, 0.5) holds three; 0.5 itself is outside.
        assert_eq!(hist.bins[0].count, 0);
        assert_eq!(hist.bins[1].count, 3);
        assert_eq!(hist.excluded, 4);
    }

    #[test]
    fn histogram_handles_empty_input_and_bad_parameters() {
        let hist = histogram(&[], 4, (0.0, 1.0)).unwrap();
        assert!(hist.bins.iter().all(|b| b.count == 0));
        assert_eq!(hist.excluded, 0);
        assert!(matches!(histogram(&[1.0], 0, (0.0, 1.0)), Err(AnalysisError::BadHistogram(_))));
        assert!(matches!(histogram(&[1.0], 3, (1.0, 1.0)), Err(AnalysisError::BadHistogram(_))));
    }

    #[test]
    fn csv_layouts() {
        let stats = TempStats {
            temperatures: vec![1.0, 1.1],
            mse_mean: vec![0.25, 0.5],
            mse_std: vec![0.0, 0.125],
            model_count: 2,
        };
        let mut out = Vec::new();
        write_temp_stats_csv(&mut out, &stats).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "temperature,mse_mean,mse_std\n1.0,0.25,0.0\n1.1,0.5,0.125\n"
        );

        let table = CorrelationTable {
            cells: vec![
                CorrelationCell {
                    metric: "nc".into(),
                    target: "mse_mean".into(),
                    pearson: Some(-0.5),
                    kendall: None,
                },
            ],
        };
        let mut out = Vec::new();
        write_correlations_csv(&mut out, &table).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "metric,target,pearson,kendall\nnc,mse_mean,-0.5,undefined\n"
        );

        let hist = Histogram {
            bins: vec![HistogramBin { low: 0.0, high: 0.25, count: 7 }],
            excluded: 2,
        };
        let mut out = Vec::new();
        write_histogram_csv(&mut out, &hist).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "bin_low,bin_high,count\n0.0,0.25,7\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn pearson_ignores_positive_affine_maps(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..12),
            ys in proptest::collection::vec(-100.0f64..100.0, 3..12),
            scale in 0.01f64..50.0,
            shift in -100.0f64..100.0,
        ) {
            let n = xs.len().min(ys.len());
            let (xs, ys) = (&xs[..n], &ys[..n]);
            if let Ok(base) = pearson(xs, ys) {
                let mapped: Vec<f64> = xs.iter().map(|v| scale * v + shift).collect();
                let got = pearson(&mapped, ys).unwrap();
                prop_assert!((got - base).abs() < 1e-12, "{got} vs {base}");
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&base));
            }
        }

        #[test]
        fn kendall_is_scale_invariant_and_bounded(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..12),
            ys in proptest::collection::vec(-100.0f64..100.0, 3..12),
        ) {
            let n = xs.len().min(ys.len());
            let (xs, ys) = (&xs[..n], &ys[..n]);
            if let Ok(base) = kendall_tau(xs, ys) {
                // Multiplying by 4 is exact and strictly increasing, so the
                // ranks — and tau with them — cannot move at all.
                let scaled: Vec<f64> = xs.iter().map(|v| 4.0 * v).collect();
                prop_assert_eq!(kendall_tau(&scaled, ys).unwrap(), base);
                prop_assert!((-1.0..=1.0).contains(&base));
            }
        }
    }
}
