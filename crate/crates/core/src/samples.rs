//! Pooled lagged sample matrices.
//!
//! Sliding-window samples are drawn from every member and concatenated in
//! member order, so conditional-independence tests and regressions see one
//! large sample set. Column order is fixed globally to
//! (variable_index ascending, lag ascending) for byte-reproducible outputs.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::series::EnsembleTimeSeries;

/// A (variable, lag) pair; the atomic unit of selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LaggedFeature {
    pub variable_index: usize,
    pub lag: usize,
}

impl LaggedFeature {
    pub fn new(variable_index: usize, lag: usize) -> Self {
        LaggedFeature { variable_index, lag }
    }
}

/// Name-resolved form of a [`LaggedFeature`] for serialized artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub variable: String,
    pub lag: usize,
}

pub fn features_to_records(
    features: &[LaggedFeature],
    variables: &[crate::series::VariableMeta],
) -> Vec<FeatureRecord> {
    features
        .iter()
        .map(|f| FeatureRecord {
            variable: variables[f.variable_index].name.clone(),
            lag: f.lag,
        })
        .collect()
}

pub fn records_to_features(
    records: &[FeatureRecord],
    variables: &[crate::series::VariableMeta],
) -> Result<Vec<LaggedFeature>> {
    records
        .iter()
        .map(|r| {
            variables
                .iter()
                .position(|v| v.name == r.variable)
                .map(|idx| LaggedFeature::new(idx, r.lag))
                .ok_or_else(|| Error::Schema(format!("unknown variable '{}'", r.variable)))
        })
        .collect()
}

/// Pooled design matrix for one target.
#[derive(Debug, Clone)]
pub struct SampleMatrix<F> {
    /// n × p lagged predictor values.
    pub x: Array2<F>,
    /// Target at lag 0 for each row.
    pub y: Array1<F>,
    /// One entry per column of `x`.
    pub columns: Vec<LaggedFeature>,
    /// Member index each row was drawn from.
    pub source_member: Vec<usize>,
    /// Time index of the target value within its member.
    pub source_time: Vec<usize>,
    /// Variable index of the target.
    pub target: usize,
    /// Variable name of the target.
    pub target_name: String,
}

impl<F: Float> SampleMatrix<F> {
    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column_position(&self, feature: LaggedFeature) -> Option<usize> {
        self.columns.iter().position(|&c| c == feature)
    }

    /// Column subset in the order given. Errors on features absent from
    /// this matrix.
    pub fn restrict(&self, features: &[LaggedFeature]) -> Result<SampleMatrix<F>> {
        let mut x = Array2::zeros((self.n_samples(), features.len()));
        for (j, f) in features.iter().enumerate() {
            let src = self.column_position(*f).ok_or_else(|| {
                Error::FeatureMismatch(format!(
                    "feature (variable {}, lag {}) not present in the sample matrix",
                    f.variable_index, f.lag
                ))
            })?;
            x.column_mut(j).assign(&self.x.column(src));
        }
        Ok(SampleMatrix {
            x,
            y: self.y.clone(),
            columns: features.to_vec(),
            source_member: self.source_member.clone(),
            source_time: self.source_time.clone(),
            target: self.target,
            target_name: self.target_name.clone(),
        })
    }
}

/// Enumerate every candidate (variable, lag) pair for predictor-role
/// variables, ordered by (variable_index ascending, lag ascending).
///
/// Every selection method draws from exactly this enumeration.
pub fn candidate_features<F: Float>(
    ens: &EnsembleTimeSeries<F>,
    tau_min: usize,
    tau_max: usize,
) -> Result<Vec<LaggedFeature>> {
    check_lag_window(tau_min, tau_max)?;
    let predictors = ens.predictor_indices();
    if predictors.is_empty() {
        return Err(Error::Schema(
            "no predictor-role variables in the ensemble".to_string(),
        ));
    }
    let mut features = Vec::with_capacity(predictors.len() * (tau_max - tau_min + 1));
    for var in predictors {
        for lag in tau_min..=tau_max {
            features.push(LaggedFeature::new(var, lag));
        }
    }
    Ok(features)
}

/// Build the pooled lagged sample matrix for `target`.
///
/// One row per valid time index per member: row times run from `tau_max`
/// to the member's end, the target is read at lag 0 and each column at its
/// own lag. When `predictors` is `None`, columns are the full candidate
/// enumeration over `[tau_min, tau_max]`; an explicit list keeps its given
/// order and may use lags up to `tau_max`.
pub fn build_lagged_samples<F: Float>(
    ens: &EnsembleTimeSeries<F>,
    target: &str,
    tau_min: usize,
    tau_max: usize,
    predictors: Option<&[LaggedFeature]>,
) -> Result<SampleMatrix<F>> {
    check_lag_window(tau_min, tau_max)?;
    let target_idx = ens.variable_index(target)?;

    let columns: Vec<LaggedFeature> = match predictors {
        None => candidate_features(ens, tau_min, tau_max)?,
        Some(list) => {
            for f in list {
                if f.variable_index >= ens.n_vars() {
                    return Err(Error::Config(format!(
                        "feature variable index {} out of range (N = {})",
                        f.variable_index,
                        ens.n_vars()
                    )));
                }
                if f.lag < tau_min || f.lag > tau_max {
                    return Err(Error::Config(format!(
                        "feature (variable {}, lag {}) outside the lag window [{tau_min}, {tau_max}]",
                        f.variable_index, f.lag
                    )));
                }
            }
            list.to_vec()
        }
    };

    for m in 0..ens.n_members() {
        if ens.member_len(m) <= tau_max {
            return Err(Error::Shape(format!(
                "member '{}' has {} steps; needs more than tau_max = {tau_max}",
                ens.member_ids()[m],
                ens.member_len(m)
            )));
        }
    }

    let n: usize = (0..ens.n_members())
        .map(|m| ens.member_len(m) - tau_max)
        .sum();
    let mut x = Array2::zeros((n, columns.len()));
    let mut y = Array1::zeros(n);
    let mut source_member = Vec::with_capacity(n);
    let mut source_time = Vec::with_capacity(n);

    let mut row = 0;
    for m in 0..ens.n_members() {
        let data = ens.member(m);
        for t in tau_max..ens.member_len(m) {
            y[row] = data[[t, target_idx]];
            for (j, f) in columns.iter().enumerate() {
                x[[row, j]] = data[[t - f.lag, f.variable_index]];
            }
            source_member.push(m);
            source_time.push(t);
            row += 1;
        }
    }

    Ok(SampleMatrix {
        x,
        y,
        columns,
        source_member,
        source_time,
        target: target_idx,
        target_name: target.to_string(),
    })
}

fn check_lag_window(tau_min: usize, tau_max: usize) -> Result<()> {
    if tau_min < 1 {
        return Err(Error::Config("tau_min must be at least 1".to_string()));
    }
    if tau_min > tau_max {
        return Err(Error::Config(format!(
            "tau_min = {tau_min} exceeds tau_max = {tau_max}"
        )));
    }
    Ok(())
}
