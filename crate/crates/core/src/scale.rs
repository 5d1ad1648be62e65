//! Standard scaling of lagged feature columns.
//!
//! Fit on training data only; the same parameters are reused on the
//! validation and test splits. The standard deviation is the population
//! one (divide by n). Zero-variance columns are flagged and passed
//! through unscaled rather than divided by zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::samples::SampleMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalerParams<F> {
    pub mean: Vec<F>,
    pub std: Vec<F>,
    /// Columns with zero variance on the fitting data.
    pub degenerate: Vec<bool>,
}

impl<F: Float> ScalerParams<F> {
    pub fn n_columns(&self) -> usize {
        self.mean.len()
    }

    pub fn degenerate_columns(&self) -> Vec<usize> {
        self.degenerate
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Fit per-column mean and population standard deviation.
pub fn fit_scaler<F: Float>(samples: &SampleMatrix<F>) -> Result<ScalerParams<F>> {
    let n = samples.n_samples();
    if n < 2 {
        return Err(Error::InsufficientSamples(format!(
            "scaler needs at least 2 samples, got {n}"
        )));
    }
    let count = F::from_count(n);
    let p = samples.n_features();
    let mut mean = Vec::with_capacity(p);
    let mut std = Vec::with_capacity(p);
    let mut degenerate = Vec::with_capacity(p);
    for j in 0..p {
        let col = samples.x.column(j);
        let mu: F = col.iter().copied().sum::<F>() / count;
        let var: F = col.iter().map(|&v| (v - mu) * (v - mu)).sum::<F>() / count;
        let sigma = var.sqrt();
        mean.push(mu);
        std.push(sigma);
        degenerate.push(sigma == F::zero());
    }
    Ok(ScalerParams { mean, std, degenerate })
}

/// Apply `z = (x − μ) / σ` column-wise; degenerate columns pass through.
/// The target is never scaled.
pub fn apply_scaler<F: Float>(
    samples: &SampleMatrix<F>,
    params: &ScalerParams<F>,
) -> Result<SampleMatrix<F>> {
    check_width(samples, params)?;
    let mut out = samples.clone();
    for j in 0..params.n_columns() {
        if params.degenerate[j] {
            continue;
        }
        let mu = params.mean[j];
        let sigma = params.std[j];
        out.x.column_mut(j).mapv_inplace(|v| (v - mu) / sigma);
    }
    Ok(out)
}

/// Undo [`apply_scaler`].
pub fn invert_scaler<F: Float>(
    samples: &SampleMatrix<F>,
    params: &ScalerParams<F>,
) -> Result<SampleMatrix<F>> {
    check_width(samples, params)?;
    let mut out = samples.clone();
    for j in 0..params.n_columns() {
        if params.degenerate[j] {
            continue;
        }
        let mu = params.mean[j];
        let sigma = params.std[j];
        out.x.column_mut(j).mapv_inplace(|v| v * sigma + mu);
    }
    Ok(out)
}

fn check_width<F: Float>(samples: &SampleMatrix<F>, params: &ScalerParams<F>) -> Result<()> {
    if samples.n_features() != params.n_columns() {
        return Err(Error::FeatureMismatch(format!(
            "scaler fitted on {} columns, sample matrix has {}",
            params.n_columns(),
            samples.n_features()
        )));
    }
    Ok(())
}
