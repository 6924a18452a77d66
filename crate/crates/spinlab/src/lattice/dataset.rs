//! Labeled spin configurations and their on-disk CSV form.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

/// One recorded configuration: the flattened row-major spin grid plus the
/// temperature label of the chain that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub configuration: Vec<i8>,
    pub temperature: f64,
}

/// Which stage of the data lifecycle a dataset belongs to.
///
/// Splitting stamps the three split roles; everything else is `Generated`.
/// The tag exists so training entry points can refuse held-out test data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Generated,
    Train,
    Validation,
    Test,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Provenance::Generated => "generated",
            Provenance::Train => "train",
            Provenance::Validation => "validation",
            Provenance::Test => "test",
        };
        f.write_str(name)
    }
}

/// A collection of labeled samples over a fixed lattice size and temperature
/// grid.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub lattice_size: usize,
    pub temperature_grid: Vec<f64>,
    pub provenance: Provenance,
}

/// Equality compares physical content only (samples, lattice size, grid).
/// Provenance is session bookkeeping and is deliberately ignored, so a
/// dataset written to CSV and read back compares equal.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.lattice_size == other.lattice_size
            && self.temperature_grid == other.temperature_grid
    }
}

impl Dataset {
    pub fn new(
        samples: Vec<LabeledSample>,
        lattice_size: usize,
        temperature_grid: Vec<f64>,
        provenance: Provenance,
    ) -> Self {
        Self { samples, lattice_size, temperature_grid, provenance }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks the structural invariants: every configuration has
    /// `lattice_size²` spins in {-1, +1}, every label is a grid member, and
    /// all grid temperatures carry the same number of samples.
    pub fn validate(&self) -> Result<(), DatasetIoError> {
        let expected = self.lattice_size * self.lattice_size;
        let mut counts = vec![0usize; self.temperature_grid.len()];
        for (i, sample) in self.samples.iter().enumerate() {
            if sample.configuration.len() != expected {
                return Err(DatasetIoError::Invalid(format!(
                    "sample {i} has {} spins, expected {expected}",
                    sample.configuration.len()
                )));
            }
            if sample.configuration.iter().any(|&s| s != 1 && s != -1) {
                return Err(DatasetIoError::Invalid(format!("sample {i} has a spin outside ±1")));
            }
            match self.temperature_grid.iter().position(|&t| t == sample.temperature) {
                Some(slot) => counts[slot] += 1,
                None => {
                    return Err(DatasetIoError::Invalid(format!(
                        "sample {i} labeled {} which is not on the grid",
                        sample.temperature
                    )))
                }
            }
        }
        if let Some(&first) = counts.first() {
            if counts.iter().any(|&c| c != first) {
                return Err(DatasetIoError::Invalid(
                    "per-temperature sample counts are unequal".into(),
                ));
            }
        }
        Ok(())
    }

    /// Sample indices grouped by grid temperature, in grid order.
    pub fn per_temperature_indices(&self) -> Vec<(f64, Vec<usize>)> {
        self.temperature_grid
            .iter()
            .map(|&t| {
                let idx = self
                    .samples
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.temperature == t)
                    .map(|(i, _)| i)
                    .collect();
                (t, idx)
            })
            .collect()
    }

    /// All configurations as real-valued input vectors.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| s.configuration.iter().map(|&v| v as f64).collect())
            .collect()
    }

    /// All temperature labels, aligned with [`Dataset::inputs`].
    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.temperature).collect()
    }
}

/// Errors reading or writing dataset CSV files. Row numbers count data rows
/// starting at 1, excluding the header.
#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("row {row}: expected {expected} fields, got {got}")]
    WrongFieldCount { row: usize, expected: usize, got: usize },
    #[error("row {row}, column {column}: spin value {value:?} is not -1 or 1")]
    InvalidSpin { row: usize, column: usize, value: String },
    #[error("row {row}: cannot parse temperature {value:?}")]
    InvalidTemperature { row: usize, value: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

/// Serialises a temperature so it survives a round trip exactly and always
/// carries a fractional part (`1.0`, never `1`).
fn format_temperature(t: f64) -> String {
    format!("{t:?}")
}

/// Writes a dataset as CSV with header `s0,…,s{n-1},temperature`, one sample
/// per row, spins as `-1`/`1`.
pub fn write_dataset_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetIoError> {
    let n = dataset.lattice_size * dataset.lattice_size;
    let mut out = BufWriter::new(File::create(path)?);
    let mut header = String::new();
    for i in 0..n {
        header.push('s');
        header.push_str(&i.to_string());
        header.push(',');
    }
    header.push_str("temperature\n");
    out.write_all(header.as_bytes())?;

    let mut line = String::new();
    for sample in &dataset.samples {
        line.clear();
        for &spin in &sample.configuration {
            line.push_str(if spin == 1 { "1" } else { "-1" });
            line.push(',');
        }
        line.push_str(&format_temperature(sample.temperature));
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset_csv`].
///
/// The lattice size comes from the header width and the temperature grid is
/// recovered as the ascending list of distinct labels. Every malformed row is
/// reported with its (1-based) data row number.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset, DatasetIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(File::open(path)?));

    let headers = reader.headers()?.clone();
    let fields = headers.len();
    if fields < 2 || headers.get(fields - 1) != Some("temperature") {
        return Err(DatasetIoError::BadHeader(
            "expected spin columns s0.. followed by a temperature column".into(),
        ));
    }
    let n = fields - 1;
    for i in 0..n {
        let expected = format!("s{i}");
        if headers.get(i) != Some(expected.as_str()) {
            return Err(DatasetIoError::BadHeader(format!(
                "expected column {i} to be {expected:?}, got {:?}",
                headers.get(i).unwrap_or("")
            )));
        }
    }
    let lattice_size = (n as f64).sqrt().round() as usize;
    if lattice_size * lattice_size != n {
        return Err(DatasetIoError::BadHeader(format!(
            "{n} spin columns do not form a square lattice"
        )));
    }

    let mut samples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != fields {
            return Err(DatasetIoError::WrongFieldCount {
                row,
                expected: fields,
                got: record.len(),
            });
        }
        let mut configuration = Vec::with_capacity(n);
        for column in 0..n {
            let field = record.get(column).unwrap_or("");
            match field {
                "1" => configuration.push(1),
                "-1" => configuration.push(-1),
                other => {
                    return Err(DatasetIoError::InvalidSpin {
                        row,
                        column,
                        value: other.to_string(),
                    })
                }
            }
        }
        let raw = record.get(n).unwrap_or("");
        let temperature: f64 = raw.parse().map_err(|_| DatasetIoError::InvalidTemperature {
            row,
            value: raw.to_string(),
        })?;
        if !temperature.is_finite() {
            return Err(DatasetIoError::InvalidTemperature { row, value: raw.to_string() });
        }
        samples.push(LabeledSample { configuration, temperature });
    }

    let mut grid: Vec<f64> = samples.iter().map(|s| s.temperature).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let dataset = Dataset::new(samples, lattice_size, grid, Provenance::Generated);
    dataset.validate()?;
    Ok(dataset)
}
