//! CSV datasets: labeled `x0..x{d-1},y,yhat`, unlabeled `x0..x{d-1},yhat`.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ppi_core::losses::{make_glm, make_mean_loss, make_multiclass_logistic};
use ppi_core::{Dataset, Features, GlmFamily, Loss, PpiError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}, line {line}, column `{column}`: cannot parse {value:?} as a number")]
    BadValue { path: PathBuf, line: u64, column: String, value: String },
    #[error(transparent)]
    Dataset(#[from] PpiError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimand {
    Mean,
    Linear,
    Logistic,
    Poisson,
    Multiclass,
}

impl Estimand {
    pub fn reads_features(self) -> bool {
        self != Estimand::Mean
    }

    /// `features` is the number of `x` columns; `classes` is only read by multiclass.
    pub fn loss(self, features: usize, classes: usize) -> Result<Box<dyn Loss>, PpiError> {
        if self.reads_features() && features == 0 {
            return Err(PpiError::InvalidArgument(format!(
                "estimand {self:?} needs at least one feature column x0"
            )));
        }
        Ok(match self {
            Estimand::Mean => Box::new(make_mean_loss()),
            Estimand::Linear => Box::new(make_glm(GlmFamily::Linear, features)),
            Estimand::Logistic => Box::new(make_glm(GlmFamily::Logistic, features)),
            Estimand::Poisson => Box::new(make_glm(GlmFamily::Poisson, features)),
            Estimand::Multiclass => Box::new(make_multiclass_logistic(classes, features)?),
        })
    }
}

/// Parsed columns of one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: usize,
    /// Row-major `x0..x{d-1}`.
    pub features: Vec<f64>,
    pub feature_count: usize,
    pub labels: Option<Vec<f64>>,
    pub predictions: Vec<f64>,
}

fn missing(path: &Path, column: impl Into<String>) -> IngestError {
    IngestError::MissingColumn { path: path.to_path_buf(), column: column.into() }
}

/// Reads a table from any reader. `want_labels` makes `y` required;
/// `want_features` (the count, when known) makes `x0..x{d-1}` required.
pub fn read_table<R: Read>(
    reader: R,
    path: &Path,
    want_labels: bool,
    want_features: Option<usize>,
) -> Result<Table, IngestError> {
    let malformed = |line: u64, message: String| IngestError::Malformed { path: path.to_path_buf(), line, message };
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);

    let feature_count = match want_features {
        Some(d) => d,
        None => (0..).take_while(|j| find(&format!("x{j}")).is_some()).count(),
    };
    let x_cols = (0..feature_count)
        .map(|j| find(&format!("x{j}")).ok_or_else(|| missing(path, format!("x{j}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let y_col = if want_labels { Some(find("y").ok_or_else(|| missing(path, "y"))?) } else { None };
    let f_col = find("yhat").ok_or_else(|| missing(path, "yhat"))?;

    let mut table = Table { rows: 0, features: Vec::new(), feature_count, labels: y_col.map(|_| Vec::new()), predictions: Vec::new() };
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |col: usize| -> Result<f64, IngestError> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| IngestError::BadValue {
                path: path.to_path_buf(),
                line,
                column: header[col].to_string(),
                value: raw.to_string(),
            })
        };
        for &c in &x_cols {
            table.features.push(cell(c)?);
        }
        if let (Some(c), Some(ys)) = (y_col, table.labels.as_mut()) {
            ys.push(cell(c)?);
        }
        table.predictions.push(cell(f_col)?);
        table.rows += 1;
    }
    Ok(table)
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// Loads both files and returns the dataset with the loss it was shaped for.
pub fn load_dataset(
    labeled: &Path,
    unlabeled: &Path,
    estimand: Estimand,
    classes: usize,
) -> Result<(Dataset, Box<dyn Loss>), IngestError> {
    let lab = read_table(open(labeled)?, labeled, true, None)?;
    let d = if estimand.reads_features() { lab.feature_count } else { 0 };
    let unl = read_table(open(unlabeled)?, unlabeled, false, Some(d))?;
    let loss = estimand.loss(d, classes)?;
    let labels = lab.labels.unwrap_or_default();
    let data = if estimand.reads_features() {
        Dataset::new(
            Features::new(lab.rows, d, lab.features)?,
            labels,
            lab.predictions,
            Some(Features::new(unl.rows, d, unl.features)?),
            unl.predictions,
        )?
    } else {
        Dataset::without_features(labels, lab.predictions, unl.predictions)?
    };
    data.check_compatible(loss.as_ref())?;
    Ok((data, loss))
}
