//! Plain-text model serialization.
//!
//! The format is line-oriented and versioned:
//!
//! ```text
//! format_version 1
//! input_dim 64
//! hidden_layers 2
//! layer 0 width 12 activation relu initializer uniform_glorot
//! layer 1 width 8 activation tanh initializer normal_he
//! history 2
//! 4.10000000000000000e-1
//! 3.90000000000000000e-1
//! weights 0 rows 12 cols 64
//! <one row per line, space-separated>
//! biases 0
//! <one line>
//! ...
//! ```
//!
//! Weight matrices are row-major (`rows` = neurons, `cols` = inputs) and the
//! final `weights`/`biases` block is the linear output neuron. Values are
//! written with 18 significant digits, which round-trips every finite `f64`
//! bit-for-bit.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::net::{DenseLayer, TrainedModel};
use super::{Activation, ArchitectureSpec, Initializer, LayerSpec};

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("model io: {0}")]
    Io(#[from] io::Error),
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u64),
    #[error("invalid model: {0}")]
    Invalid(String),
}

fn push_values(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.17e}");
    }
    out.push('\n');
}

/// Renders the model in the text format above.
pub fn model_to_string(model: &TrainedModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format_version {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "input_dim {}", model.spec.input_dim);
    let _ = writeln!(out, "hidden_layers {}", model.spec.hidden.len());
    for (i, layer) in model.spec.hidden.iter().enumerate() {
        let _ = writeln!(
            out,
            "layer {i} width {} activation {} initializer {}",
            layer.width,
            layer.activation.name(),
            layer.initializer.name()
        );
    }
    let _ = writeln!(out, "history {}", model.history.len());
    for loss in &model.history {
        push_values(&mut out, std::slice::from_ref(loss));
    }
    for (l, layer) in model.layers.iter().enumerate() {
        let _ = writeln!(out, "weights {l} rows {} cols {}", layer.rows, layer.cols);
        for row in layer.weights.chunks(layer.cols) {
            push_values(&mut out, row);
        }
        let _ = writeln!(out, "biases {l}");
        push_values(&mut out, &layer.biases);
    }
    out
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelIoError> {
    let mut file = BufWriter::new(File::create(path)?);
    file.write_all(model_to_string(model).as_bytes())?;
    file.flush()?;
    Ok(())
}

/// Line reader that tracks position for error messages.
struct Lines<R> {
    reader: R,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, ModelIoError> {
        let mut line = String::new();
        let n = self.reader.read_line(&mut line)?;
        if n == 0 {
            return Err(ModelIoError::Parse {
                line: self.number + 1,
                message: "unexpected end of file".into(),
            });
        }
        self.number += 1;
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    }

    fn error(&self, message: impl Into<String>) -> ModelIoError {
        ModelIoError::Parse { line: self.number, message: message.into() }
    }

    /// Reads a line of the form `<keyword> <field> <field> ...` and returns
    /// the fields.
    fn tagged(&mut self, keyword: &str, fields: usize) -> Result<Vec<String>, ModelIoError> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == keyword => {}
            _ => return Err(self.error(format!("expected `{keyword} ...`, got `{line}`"))),
        }
        let rest: Vec<String> = parts.map(String::from).collect();
        if rest.len() != fields {
            return Err(self.error(format!(
                "expected {fields} fields after `{keyword}`, got {}",
                rest.len()
            )));
        }
        Ok(rest)
    }

    fn parse<T: std::str::FromStr>(&self, token: &str, what: &str) -> Result<T, ModelIoError> {
        token.parse().map_err(|_| self.error(format!("invalid {what} `{token}`")))
    }

    fn values(&mut self, expected: usize) -> Result<Vec<f64>, ModelIoError> {
        let line = self.next()?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| self.parse(t, "number"))
            .collect::<Result<_, _>>()?;
        if values.len() != expected {
            return Err(self.error(format!("expected {expected} values, got {}", values.len())));
        }
        Ok(values)
    }
}

pub fn model_from_reader<R: BufRead>(reader: R) -> Result<TrainedModel, ModelIoError> {
    let mut lines = Lines { reader, number: 0 };

    let version: u64 = {
        let fields = lines.tagged("format_version", 1)?;
        lines.parse(&fields[0], "version")?
    };
    if version != MODEL_FORMAT_VERSION {
        return Err(ModelIoError::UnsupportedVersion(version));
    }

    let input_dim: usize = {
        let fields = lines.tagged("input_dim", 1)?;
        lines.parse(&fields[0], "input dimension")?
    };
    let hidden_count: usize = {
        let fields = lines.tagged("hidden_layers", 1)?;
        lines.parse(&fields[0], "layer count")?
    };

    let mut hidden = Vec::with_capacity(hidden_count);
    for i in 0..hidden_count {
        let fields = lines.tagged("layer", 7)?;
        let index: usize = lines.parse(&fields[0], "layer index")?;
        if index != i {
            return Err(lines.error(format!("expected layer {i}, got {index}")));
        }
        for (pos, name) in [(1, "width"), (3, "activation"), (5, "initializer")] {
            if fields[pos] != name {
                return Err(lines.error(format!("expected `{name}`, got `{}`", fields[pos])));
            }
        }
        let width: usize = lines.parse(&fields[2], "width")?;
        let activation = Activation::from_name(&fields[4])
            .ok_or_else(|| lines.error(format!("unknown activation `{}`", fields[4])))?;
        let initializer = Initializer::from_name(&fields[6])
            .ok_or_else(|| lines.error(format!("unknown initializer `{}`", fields[6])))?;
        hidden.push(LayerSpec { width, activation, initializer });
    }
    let spec = ArchitectureSpec::new(input_dim, hidden)
        .map_err(|e| ModelIoError::Invalid(e.to_string()))?;

    let history_len: usize = {
        let fields = lines.tagged("history", 1)?;
        lines.parse(&fields[0], "history length")?
    };
    let mut history = Vec::with_capacity(history_len);
    for _ in 0..history_len {
        history.push(lines.values(1)?[0]);
    }

    let mut layers = Vec::with_capacity(spec.hidden.len() + 1);
    let mut prev = spec.input_dim;
    for l in 0..=spec.hidden.len() {
        let expected_rows = spec.hidden.get(l).map_or(1, |s| s.width);
        let fields = lines.tagged("weights", 5)?;
        let index: usize = lines.parse(&fields[0], "layer index")?;
        if index != l || fields[1] != "rows" || fields[3] != "cols" {
            return Err(lines.error(format!("malformed weights header for layer {l}")));
        }
        let rows: usize = lines.parse(&fields[2], "row count")?;
        let cols: usize = lines.parse(&fields[4], "column count")?;
        if rows != expected_rows || cols != prev {
            return Err(lines.error(format!(
                "layer {l} has shape {rows}x{cols}, expected {expected_rows}x{prev}"
            )));
        }
        let mut weights = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            weights.extend(lines.values(cols)?);
        }
        let fields = lines.tagged("biases", 1)?;
        let index: usize = lines.parse(&fields[0], "layer index")?;
        if index != l {
            return Err(lines.error(format!("expected biases {l}, got {index}")));
        }
        let biases = lines.values(rows)?;
        layers.push(DenseLayer { weights, biases, rows, cols });
        prev = rows;
    }

    match lines.next() {
        Err(_) => {}
        Ok(extra) => return Err(lines.error(format!("unexpected trailing content `{extra}`"))),
    }

    Ok(TrainedModel { spec, layers, history })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelIoError> {
    model_from_reader(BufReader::new(File::open(path)?))
}
