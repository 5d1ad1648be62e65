//! Multiple linear regression on selected features, plus the metric suite
//! used for every comparison table.
//!
//! Features are standard-scaled with parameters fitted on the training
//! data; targets are never scaled. The solver is the orthogonal-
//! decomposition least squares from [`crate::linalg`] — normal equations
//! are reserved for test oracles.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::linalg::{lstsq, DEFAULT_RCOND};
use crate::samples::{
    features_to_records, records_to_features, FeatureRecord, LaggedFeature, SampleMatrix,
};
use crate::scale::{apply_scaler, fit_scaler, ScalerParams};
use crate::series::VariableMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Fitted regression: coefficients in scaled-feature space plus the
/// scaler that produced that space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel<F> {
    pub features: Vec<LaggedFeature>,
    pub coefficients: Vec<F>,
    pub intercept: F,
    pub scaler: ScalerParams<F>,
    /// Set when the scaled design was rank-deficient and the minimum-norm
    /// solution was used.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<F> {
    pub r2: F,
    pub mse: F,
    pub mae: F,
    pub n: usize,
    pub split: Split,
}

/// Ordinary least squares of the unscaled target on the standard-scaled
/// features of `samples`, with an intercept.
pub fn fit_mlr<F: Float>(samples: &SampleMatrix<F>) -> Result<LinearModel<F>> {
    let n = samples.n_samples();
    let p = samples.n_features();
    if n <= p {
        return Err(Error::Underdetermined(format!(
            "{n} samples for {p} features; select fewer features"
        )));
    }
    let scaler = fit_scaler(samples)?;
    let scaled = apply_scaler(samples, &scaler)?;

    let mut design = Array2::zeros((n, p + 1));
    for i in 0..n {
        design[[i, 0]] = F::one();
    }
    for j in 0..p {
        design.column_mut(j + 1).assign(&scaled.x.column(j));
    }
    let fit = lstsq(design.view(), scaled.y.view(), DEFAULT_RCOND)?;
    let rank_deficient = fit.rank < p + 1;

    Ok(LinearModel {
        features: samples.columns.clone(),
        coefficients: fit.coefficients.iter().skip(1).copied().collect(),
        intercept: fit.coefficients[0],
        scaler,
        rank_deficient,
    })
}

/// Predict the target for every row of `samples`.
///
/// Columns must carry exactly the model's features; a permuted order is
/// accepted, anything else is a contract error listing the difference.
pub fn predict<F: Float>(model: &LinearModel<F>, samples: &SampleMatrix<F>) -> Result<Array1<F>> {
    let aligned;
    let samples = if samples.columns == model.features {
        samples
    } else {
        check_same_feature_set(model, samples)?;
        aligned = samples.restrict(&model.features)?;
        &aligned
    };
    let scaled = apply_scaler(samples, &model.scaler)?;
    let mut yhat = Array1::from_elem(scaled.n_samples(), model.intercept);
    for (j, &beta) in model.coefficients.iter().enumerate() {
        for i in 0..scaled.n_samples() {
            yhat[i] += beta * scaled.x[[i, j]];
        }
    }
    Ok(yhat)
}

/// R², MSE and MAE of the model on `samples`, with R² centred on the
/// evaluation split's own mean.
pub fn evaluate<F: Float>(
    model: &LinearModel<F>,
    samples: &SampleMatrix<F>,
    split: Split,
) -> Result<MetricReport<F>> {
    let yhat = predict(model, samples)?;
    Ok(metrics_from_predictions(
        samples.y.view(),
        yhat.view(),
        split,
    ))
}

/// Metrics from already-computed predictions (used to verify that a
/// serialized prediction table reproduces the report).
pub fn metrics_from_predictions<F: Float>(
    y: ndarray::ArrayView1<'_, F>,
    yhat: ndarray::ArrayView1<'_, F>,
    split: Split,
) -> MetricReport<F> {
    let n = y.len();
    let count = F::from_count(n);
    let mean_y: F = y.iter().copied().sum::<F>() / count;
    let mut ss_res = F::zero();
    let mut ss_tot = F::zero();
    let mut abs_sum = F::zero();
    for i in 0..n {
        let d = y[i] - yhat[i];
        ss_res += d * d;
        abs_sum += d.abs();
        let c = y[i] - mean_y;
        ss_tot += c * c;
    }
    // Constant-target split: 1 for a perfect fit, 0 otherwise (the common
    // library convention).
    let r2 = if ss_tot == F::zero() {
        if ss_res == F::zero() {
            F::one()
        } else {
            F::zero()
        }
    } else {
        F::one() - ss_res / ss_tot
    };
    MetricReport {
        r2,
        mse: ss_res / count,
        mae: abs_sum / count,
        n,
        split,
    }
}

fn check_same_feature_set<F: Float>(
    model: &LinearModel<F>,
    samples: &SampleMatrix<F>,
) -> Result<()> {
    let missing: Vec<&LaggedFeature> = model
        .features
        .iter()
        .filter(|f| !samples.columns.contains(f))
        .collect();
    let extra: Vec<&LaggedFeature> = samples
        .columns
        .iter()
        .filter(|c| !model.features.contains(c))
        .collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(());
    }
    Err(Error::FeatureMismatch(format!(
        "sample matrix disagrees with model features; missing {missing:?}, extra {extra:?}"
    )))
}

/// Serialized model: `{features, beta, intercept, scaler}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub features: Vec<FeatureRecord>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub scaler: ScalerRecord,
    #[serde(default)]
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalerRecord {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl<F: Float> LinearModel<F> {
    pub fn to_record(&self, variables: &[VariableMeta]) -> ModelRecord {
        ModelRecord {
            features: features_to_records(&self.features, variables),
            beta: self.coefficients.iter().map(|c| c.as_f64()).collect(),
            intercept: self.intercept.as_f64(),
            scaler: ScalerRecord {
                mean: self.scaler.mean.iter().map(|v| v.as_f64()).collect(),
                std: self.scaler.std.iter().map(|v| v.as_f64()).collect(),
                degenerate: self.scaler.degenerate.clone(),
            },
            rank_deficient: self.rank_deficient,
        }
    }

    pub fn from_record(record: &ModelRecord, variables: &[VariableMeta]) -> Result<Self> {
        Ok(LinearModel {
            features: records_to_features(&record.features, variables)?,
            coefficients: record.beta.iter().map(|&v| F::cast(v)).collect(),
            intercept: F::cast(record.intercept),
            scaler: ScalerParams {
                mean: record.scaler.mean.iter().map(|&v| F::cast(v)).collect(),
                std: record.scaler.std.iter().map(|&v| F::cast(v)).collect(),
                degenerate: record.scaler.degenerate.clone(),
            },
            rank_deficient: record.rank_deficient,
        })
    }
}

/// Write `(member, t, y_true, y_pred)` rows. Values use the shortest
/// round-trip decimal form, so parsing them back recovers identical bits.
pub fn write_predictions_csv<F: Float>(
    out: &mut dyn Write,
    member_ids: &[String],
    samples: &SampleMatrix<F>,
    yhat: &Array1<F>,
) -> Result<()> {
    writeln!(out, "member,t,y_true,y_pred")?;
    for i in 0..samples.n_samples() {
        writeln!(
            out,
            "{},{},{},{}",
            member_ids[samples.source_member[i]], samples.source_time[i], samples.y[i], yhat[i]
        )?;
    }
    Ok(())
}

/// Parse a predictions CSV back into (y_true, y_pred).
pub fn read_predictions_csv<F: Float>(input: &mut dyn BufRead) -> Result<(Array1<F>, Array1<F>)> {
    let mut y = Vec::new();
    let mut yhat = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Shape(format!(
                "predictions row {i} has {} fields, expected 4",
                fields.len()
            )));
        }
        let t: f64 = fields[2].parse().map_err(|_| {
            Error::Shape(format!("predictions row {i}: bad y_true '{}'", fields[2]))
        })?;
        let p: f64 = fields[3].parse().map_err(|_| {
            Error::Shape(format!("predictions row {i}: bad y_pred '{}'", fields[3]))
        })?;
        y.push(F::cast(t));
        yhat.push(F::cast(p));
    }
    Ok((Array1::from_vec(y), Array1::from_vec(yhat)))
}
