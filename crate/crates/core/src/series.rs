//! Ensemble time-series data model: alignment and member-wise splitting.
//!
//! An ensemble holds M member series over the same N variables. All types
//! are immutable after construction; the operations here return new
//! ensembles and are pure functions of their inputs plus explicit seeds.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;

/// How a variable participates in discovery and regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Predictor,
    Target,
    Both,
}

impl Role {
    pub fn is_predictor(self) -> bool {
        matches!(self, Role::Predictor | Role::Both)
    }

    pub fn is_target(self) -> bool {
        matches!(self, Role::Target | Role::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub units: String,
}

impl VariableMeta {
    pub fn new(name: impl Into<String>, role: Role, units: impl Into<String>) -> Self {
        VariableMeta {
            name: name.into(),
            role,
            units: units.into(),
        }
    }
}

/// Which extremum of the reference variable to align on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumMode {
    Min,
    Max,
}

/// M member time series over a shared variable set.
#[derive(Debug, Clone)]
pub struct EnsembleTimeSeries<F> {
    member_ids: Vec<String>,
    members: Vec<Array2<F>>,
    variables: Vec<VariableMeta>,
    step_duration: f64,
    aligned: bool,
    alignment_offsets: Option<Vec<i64>>,
}

impl<F: Float> EnsembleTimeSeries<F> {
    /// Build a validated ensemble. Members must agree on the variable
    /// count, ids and variable names must be unique, and every value must
    /// be finite.
    pub fn new(
        member_ids: Vec<String>,
        members: Vec<Array2<F>>,
        variables: Vec<VariableMeta>,
        step_duration: f64,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Shape("ensemble has no members".to_string()));
        }
        if member_ids.len() != members.len() {
            return Err(Error::Shape(format!(
                "{} member ids for {} members",
                member_ids.len(),
                members.len()
            )));
        }
        let n_vars = variables.len();
        for (id, m) in member_ids.iter().zip(&members) {
            if m.ncols() != n_vars {
                return Err(Error::Shape(format!(
                    "member '{id}' has {} columns, expected {n_vars}",
                    m.ncols()
                )));
            }
            if m.nrows() == 0 {
                return Err(Error::Shape(format!("member '{id}' has no time steps")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &member_ids {
            if !seen.insert(id.clone()) {
                return Err(Error::Shape(format!("duplicate member id '{id}'")));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for v in &variables {
            if !names.insert(v.name.clone()) {
                return Err(Error::Schema(format!("duplicate variable name '{}'", v.name)));
            }
        }
        for (id, m) in member_ids.iter().zip(&members) {
            for ((row, col), value) in m.indexed_iter() {
                if !value.is_finite() {
                    return Err(Error::Ingestion {
                        member: id.clone(),
                        row,
                        column: variables[col].name.clone(),
                        reason: format!("non-finite value {value}"),
                    });
                }
            }
        }
        Ok(EnsembleTimeSeries {
            member_ids,
            members,
            variables,
            step_duration,
            aligned: false,
            alignment_offsets: None,
        })
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn member(&self, m: usize) -> ArrayView2<'_, F> {
        self.members[m].view()
    }

    pub fn member_len(&self, m: usize) -> usize {
        self.members[m].nrows()
    }

    pub fn member_ids(&self) -> &[String] {
        &self.member_ids
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn step_duration(&self) -> f64 {
        self.step_duration
    }

    pub fn is_aligned(&self) -> bool {
        self.aligned
    }

    pub fn alignment_offsets(&self) -> Option<&[i64]> {
        self.alignment_offsets.as_deref()
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown variable '{name}'")))
    }

    /// Indices of variables usable as lagged predictors.
    pub fn predictor_indices(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.role.is_predictor())
            .map(|(i, _)| i)
            .collect()
    }

    /// New ensemble holding the given members (indices into this one).
    pub fn subset(&self, indices: &[usize]) -> Self {
        EnsembleTimeSeries {
            member_ids: indices.iter().map(|&i| self.member_ids[i].clone()).collect(),
            members: indices.iter().map(|&i| self.members[i].clone()).collect(),
            variables: self.variables.clone(),
            step_duration: self.step_duration,
            aligned: self.aligned,
            alignment_offsets: self
                .alignment_offsets
                .as_ref()
                .map(|offs| indices.iter().map(|&i| offs[i]).collect()),
        }
    }

    /// Shift every member so the first occurrence of the reference
    /// variable's extremum sits at a common position, then truncate all
    /// members to the overlapping window.
    ///
    /// `min_window` is the shortest acceptable common window (callers pass
    /// `tau_max + 2` so at least one usable sample row survives).
    /// The recorded offsets are those applied by this call; re-aligning an
    /// already-aligned ensemble on the same reference yields all-zero
    /// offsets and unchanged data.
    pub fn align_by_reference_extremum(
        &self,
        ref_var: &str,
        mode: ExtremumMode,
        min_window: usize,
    ) -> Result<Self> {
        let var = self.variable_index(ref_var)?;

        let extrema: Vec<usize> = self
            .members
            .iter()
            .map(|m| {
                let col = m.column(var);
                let mut best = 0usize;
                for (i, &v) in col.iter().enumerate() {
                    let better = match mode {
                        ExtremumMode::Min => v < col[best],
                        ExtremumMode::Max => v > col[best],
                    };
                    if better {
                        best = i;
                    }
                }
                best
            })
            .collect();

        let min_head = extrema.iter().copied().min().expect("non-empty ensemble");
        let min_tail = self
            .members
            .iter()
            .zip(&extrema)
            .map(|(m, &e)| m.nrows() - e)
            .min()
            .expect("non-empty ensemble");
        let window = min_head + min_tail;

        if window < min_window {
            let head_limiter = extrema
                .iter()
                .position(|&e| e == min_head)
                .expect("extremum present");
            let tail_limiter = self
                .members
                .iter()
                .zip(&extrema)
                .position(|(m, &e)| m.nrows() - e == min_tail)
                .expect("extremum present");
            return Err(Error::Alignment(format!(
                "common window of {window} steps is shorter than the required {min_window}; \
                 limited by member '{}' (head) and member '{}' (tail)",
                self.member_ids[head_limiter], self.member_ids[tail_limiter],
            )));
        }

        let mut members = Vec::with_capacity(self.members.len());
        let mut offsets = Vec::with_capacity(self.members.len());
        for (m, &e) in self.members.iter().zip(&extrema) {
            let start = e - min_head;
            members.push(m.slice(ndarray::s![start..start + window, ..]).to_owned());
            offsets.push(min_head as i64 - e as i64);
        }

        Ok(EnsembleTimeSeries {
            member_ids: self.member_ids.clone(),
            members,
            variables: self.variables.clone(),
            step_duration: self.step_duration,
            aligned: true,
            alignment_offsets: Some(offsets),
        })
    }

    /// Partition members into train/val/test. The assignment is a pure
    /// function of the sorted member ids, the fractions and the seed, so
    /// permuting the input order cannot move a member between splits.
    pub fn split_by_member(&self, fractions: [f64; 3], seed: u64) -> Result<[Self; 3]> {
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {total}"
            )));
        }
        if fractions.iter().any(|&f| f < 0.0) {
            return Err(Error::Config("split fractions must be non-negative".to_string()));
        }
        let m = self.n_members();
        if m < 3 {
            return Err(Error::Split(format!(
                "member-wise split needs at least 3 members, got {m}"
            )));
        }

        // Canonical order first, then a seeded shuffle.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.member_ids[a].cmp(&self.member_ids[b]));
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let n_train = (fractions[0] * m as f64).round() as usize;
        let n_train_val = ((fractions[0] + fractions[1]) * m as f64).round() as usize;
        let n_val = n_train_val.saturating_sub(n_train);
        let n_test = m.saturating_sub(n_train_val);
        if n_train == 0 || n_val == 0 || n_test == 0 || n_train + n_val + n_test != m {
            return Err(Error::Split(format!(
                "fractions {fractions:?} leave an empty split for {m} members \
                 (train={n_train}, val={n_val}, test={n_test})"
            )));
        }

        let take = |slice: &[usize]| {
            let mut indices = slice.to_vec();
            indices.sort_by(|&a, &b| self.member_ids[a].cmp(&self.member_ids[b]));
            self.subset(&indices)
        };
        let train = take(&order[..n_train]);
        let val = take(&order[n_train..n_train_val]);
        let test = take(&order[n_train_val..]);
        Ok([train, val, test])
    }
}
