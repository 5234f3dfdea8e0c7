//! Labeled and unlabeled samples with their black-box predictions.

use crate::error::{PpiError, Result};
use crate::losses::Loss;

/// Dense row-major feature matrix; `cols == 0` is legal (no covariates).
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(PpiError::DimensionMismatch {
                field: "features",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(PpiError::DimensionMismatch {
                    field: "features",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// `rows` observations with no covariates.
    pub fn empty(rows: usize) -> Self {
        Self { rows, cols: 0, data: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// r = n / N.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Ratio(f64);

impl Ratio {
    pub fn new(n: usize, big_n: usize) -> Self {
        Ratio(n as f64 / big_n as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Validated labeled/unlabeled sample. Immutable once built.
#[derive(Debug, Clone)]
pub struct Dataset {
    labeled_features: Features,
    labels: Vec<f64>,
    labeled_predictions: Vec<f64>,
    unlabeled_features: Option<Features>,
    unlabeled_predictions: Vec<f64>,
}

fn check_finite(field: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(PpiError::NonFinite { field, index }),
        None => Ok(()),
    }
}

impl Dataset {
    pub fn new(
        labeled_features: Features,
        labels: Vec<f64>,
        labeled_predictions: Vec<f64>,
        unlabeled_features: Option<Features>,
        unlabeled_predictions: Vec<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        let big_n = unlabeled_predictions.len();
        if labeled_predictions.len() != n {
            return Err(PpiError::DimensionMismatch {
                field: "labeled_predictions",
                expected: n,
                found: labeled_predictions.len(),
            });
        }
        if labeled_features.nrows() != n {
            return Err(PpiError::DimensionMismatch {
                field: "labeled_features",
                expected: n,
                found: labeled_features.nrows(),
            });
        }
        if let Some(u) = &unlabeled_features {
            if u.nrows() != big_n {
                return Err(PpiError::DimensionMismatch {
                    field: "unlabeled_features",
                    expected: big_n,
                    found: u.nrows(),
                });
            }
            if u.ncols() != labeled_features.ncols() {
                return Err(PpiError::DimensionMismatch {
                    field: "unlabeled_features columns",
                    expected: labeled_features.ncols(),
                    found: u.ncols(),
                });
            }
        }
        if n < 2 {
            return Err(PpiError::TooFewObservations { field: "labels", required: 2, found: n });
        }
        if big_n < 1 {
            return Err(PpiError::TooFewObservations {
                field: "unlabeled_predictions",
                required: 1,
                found: big_n,
            });
        }
        check_finite("labeled_features", labeled_features.as_slice())?;
        check_finite("labels", &labels)?;
        check_finite("labeled_predictions", &labeled_predictions)?;
        if let Some(u) = &unlabeled_features {
            check_finite("unlabeled_features", u.as_slice())?;
        }
        check_finite("unlabeled_predictions", &unlabeled_predictions)?;
        Ok(Self {
            labeled_features,
            labels,
            labeled_predictions,
            unlabeled_features,
            unlabeled_predictions,
        })
    }

    /// Mean-estimation data: no covariates on either side.
    pub fn without_features(
        labels: Vec<f64>,
        labeled_predictions: Vec<f64>,
        unlabeled_predictions: Vec<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        Self::new(Features::empty(n), labels, labeled_predictions, None, unlabeled_predictions)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn big_n(&self) -> usize {
        self.unlabeled_predictions.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.labeled_features.ncols()
    }

    pub fn ratio(&self) -> Ratio {
        Ratio::new(self.n(), self.big_n())
    }

    pub fn labeled_features(&self) -> &Features {
        &self.labeled_features
    }

    pub fn unlabeled_features(&self) -> Option<&Features> {
        self.unlabeled_features.as_ref()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn labeled_predictions(&self) -> &[f64] {
        &self.labeled_predictions
    }

    pub fn unlabeled_predictions(&self) -> &[f64] {
        &self.unlabeled_predictions
    }

    pub fn labeled_x(&self, i: usize) -> &[f64] {
        self.labeled_features.row(i)
    }

    /// Unlabeled feature row, or an empty slice when features were not supplied.
    pub fn unlabeled_x(&self, i: usize) -> &[f64] {
        match &self.unlabeled_features {
            Some(f) => f.row(i),
            None => &[],
        }
    }

    /// Checks that `loss` can be evaluated on this dataset.
    pub fn check_compatible(&self, loss: &dyn Loss) -> Result<()> {
        let need = loss.feature_dim();
        if need > 0 {
            if self.feature_dim() != need {
                return Err(PpiError::DimensionMismatch {
                    field: "labeled_features columns",
                    expected: need,
                    found: self.feature_dim(),
                });
            }
            if self.unlabeled_features.is_none() {
                return Err(PpiError::MissingFeatures(loss.name().to_string()));
            }
        }
        let bad_label = |values: &[f64]| values.iter().position(|&y| !loss.label_is_valid(y));
        for values in [&self.labels, &self.labeled_predictions, &self.unlabeled_predictions] {
            if let Some(index) = bad_label(values) {
                return Err(PpiError::InvalidLabel {
                    loss: loss.name().to_string(),
                    index,
                    value: values[index],
                });
            }
        }
        Ok(())
    }

    /// Copy with every prediction replaced; features and labels untouched.
    pub fn with_predictions(&self, labeled: Vec<f64>, unlabeled: Vec<f64>) -> Result<Self> {
        Self::new(
            self.labeled_features.clone(),
            self.labels.clone(),
            labeled,
            self.unlabeled_features.clone(),
            unlabeled,
        )
    }
}
