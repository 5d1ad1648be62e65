//! PC₁ condition selection and the PCMCI momentary-conditional-
//! independence step, operating on pooled multidata samples.
//!
//! PC₁ initializes the candidate set to every (variable, lag) pair in the
//! lag window and iteratively removes candidates that test conditionally
//! independent of the target. At iteration k each candidate is tested
//! against the k strongest surviving drivers from the previous iteration
//! (excluding itself) — one conditioning set per k, not all size-k
//! subsets. PCMCI then reinitializes all links and subjects each to an
//! MCI test conditioned on both the target's parents and the source's
//! lag-shifted parents.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::citest::{ci_test, CiResult};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::samples::{build_lagged_samples, candidate_features, LaggedFeature, SampleMatrix};
use crate::series::{EnsembleTimeSeries, VariableMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pc1,
    Pcmci,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub tau_min: usize,
    pub tau_max: usize,
    /// Significance level for the PC₁ conditional-independence tests.
    pub pc_alpha: f64,
    /// Significance threshold applied to the MCI p-values (PCMCI only).
    pub alpha_level: f64,
    /// Optional cap on the conditioning dimension; iteration terminates
    /// naturally when unset.
    #[serde(default)]
    pub max_cond_dim: Option<usize>,
    pub method: Method,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            tau_min: 8,
            tau_max: 24,
            pc_alpha: 0.02,
            alpha_level: 0.05,
            max_cond_dim: None,
            method: Method::Pc1,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_min < 1 || self.tau_min > self.tau_max {
            return Err(Error::Config(format!(
                "lag window [{}, {}] must satisfy 1 ≤ tau_min ≤ tau_max",
                self.tau_min, self.tau_max
            )));
        }
        for (name, v) in [("pc_alpha", self.pc_alpha), ("alpha_level", self.alpha_level)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// One retained link: the feature plus the statistic of its weakest test
/// (the minimum |r| observed, signed) and the maximum p-value it survived.
/// For PCMCI output these are the MCI test's r and p.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParentLink<F> {
    pub feature: LaggedFeature,
    pub r: F,
    pub p_value: F,
}

/// Discovered parents of one target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParentSet<F> {
    pub target: String,
    pub links: Vec<ParentLink<F>>,
    pub config: DiscoveryConfig,
    pub sample_count: usize,
    pub test_count: usize,
}

impl<F: Float> ParentSet<F> {
    pub fn features(&self) -> Vec<LaggedFeature> {
        self.links.iter().map(|l| l.feature).collect()
    }

    pub fn contains(&self, feature: LaggedFeature) -> bool {
        self.links.iter().any(|l| l.feature == feature)
    }

    /// External JSON form with variable names resolved.
    pub fn to_record(&self, variables: &[VariableMeta]) -> ParentSetRecord {
        ParentSetRecord {
            target: self.target.clone(),
            config: self.config.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkRecord {
                    variable: variables[l.feature.variable_index].name.clone(),
                    lag: l.feature.lag,
                    r: l.r.as_f64(),
                    p: l.p_value.as_f64(),
                })
                .collect(),
            n: self.sample_count,
            test_count: self.test_count,
        }
    }
}

/// Serialized parent set: `{target, config, links:[{variable, lag, r, p}],
/// n, test_count}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParentSetRecord {
    pub target: String,
    pub config: DiscoveryConfig,
    pub links: Vec<LinkRecord>,
    pub n: usize,
    pub test_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkRecord {
    pub variable: String,
    pub lag: usize,
    pub r: f64,
    pub p: f64,
}

impl ParentSetRecord {
    /// Resolve link variable names back to indices.
    pub fn to_features(&self, variables: &[VariableMeta]) -> Result<Vec<LaggedFeature>> {
        self.links
            .iter()
            .map(|l| {
                variables
                    .iter()
                    .position(|v| v.name == l.variable)
                    .map(|idx| LaggedFeature::new(idx, l.lag))
                    .ok_or_else(|| Error::Schema(format!("unknown variable '{}'", l.variable)))
            })
            .collect()
    }
}

/// Result of [`discover`] over all requested targets.
#[derive(Debug, Clone)]
pub struct DiscoveryReport<F> {
    pub parent_sets: BTreeMap<String, ParentSet<F>>,
    pub wall_time_ms: u128,
    pub total_tests: usize,
}

/// Per-candidate test history accumulated across PC₁ iterations.
#[derive(Clone, Copy)]
struct CandidateState<F> {
    min_abs_r: F,
    r_at_min: F,
    max_p: F,
    alive: bool,
}

impl<F: Float> CandidateState<F> {
    fn update(&mut self, res: &CiResult<F>, alpha: f64) {
        if res.r.abs() <= self.min_abs_r {
            self.min_abs_r = res.r.abs();
            self.r_at_min = res.r;
        }
        if res.p_value > self.max_p {
            self.max_p = res.p_value;
        }
        self.alive = res.p_value.as_f64() <= alpha;
    }
}

/// The k = 0 screen: every candidate tested unconditionally against the
/// target; survivors are those with p ≤ alpha. This is both PC₁'s first
/// iteration and the degenerate MCI case with empty parent sets.
pub fn unconditional_screen<F: Float>(
    data: &SampleMatrix<F>,
    alpha: f64,
) -> Result<Vec<(usize, CiResult<F>)>> {
    let empty = Array2::<F>::zeros((data.n_samples(), 0));
    let results: Result<Vec<CiResult<F>>> = (0..data.n_features())
        .into_par_iter()
        .map(|c| {
            ci_test(data.x.column(c), data.y.view(), empty.view())
                .map_err(|e| wrap_dof_error(e, 0, data.n_samples()))
        })
        .collect();
    Ok(results?
        .into_iter()
        .enumerate()
        .filter(|(_, r)| r.p_value.as_f64() <= alpha)
        .collect())
}

/// Run the PC₁ iteration on a pooled sample matrix.
pub fn pc1_parents<F: Float>(
    data: &SampleMatrix<F>,
    config: &DiscoveryConfig,
) -> Result<ParentSet<F>> {
    config.validate()?;
    for f in &data.columns {
        if f.lag < config.tau_min || f.lag > config.tau_max {
            return Err(Error::Config(format!(
                "sample matrix column (variable {}, lag {}) lies outside the configured \
                 lag window [{}, {}]",
                f.variable_index, f.lag, config.tau_min, config.tau_max
            )));
        }
    }

    let n = data.n_samples();
    let p = data.n_features();
    let mut states: Vec<CandidateState<F>> = vec![
        CandidateState {
            min_abs_r: F::infinity(),
            r_at_min: F::zero(),
            max_p: F::zero(),
            alive: false,
        };
        p
    ];
    let mut test_count = 0usize;

    // k = 0: unconditional screen.
    let empty = Array2::<F>::zeros((n, 0));
    let k0: Result<Vec<CiResult<F>>> = (0..p)
        .into_par_iter()
        .map(|c| {
            ci_test(data.x.column(c), data.y.view(), empty.view())
                .map_err(|e| wrap_dof_error(e, 0, n))
        })
        .collect();
    for (state, res) in states.iter_mut().zip(k0?.iter()) {
        state.update(res, config.pc_alpha);
        test_count += 1;
    }

    // k ≥ 1: condition each candidate on the k strongest other survivors.
    let mut k = 1usize;
    loop {
        let survivors: Vec<usize> = (0..p).filter(|&c| states[c].alive).collect();
        if survivors.is_empty() || k > survivors.len() {
            break;
        }
        if config.max_cond_dim.is_some_and(|cap| k > cap) {
            break;
        }
        if n <= k + 2 {
            return Err(Error::Discovery(format!(
                "insufficient samples for conditioning dimension k = {k} with n = {n}"
            )));
        }

        let ranked = rank_by_strength(&survivors, &states, &data.columns);

        let round: Result<Vec<Option<CiResult<F>>>> = survivors
            .par_iter()
            .map(|&c| {
                let conds: Vec<usize> = ranked
                    .iter()
                    .copied()
                    .filter(|&s| s != c)
                    .take(k)
                    .collect();
                if conds.len() < k {
                    return Ok(None);
                }
                let z = gather_columns(data, &conds);
                ci_test(data.x.column(c), data.y.view(), z.view())
                    .map(Some)
                    .map_err(|e| wrap_dof_error(e, k, n))
            })
            .collect();

        for (&c, res) in survivors.iter().zip(round?.iter()) {
            if let Some(res) = res {
                states[c].update(res, config.pc_alpha);
                test_count += 1;
            }
        }
        k += 1;
    }

    let links = collect_links(&states, &data.columns);
    Ok(ParentSet {
        target: data.target_name.clone(),
        links,
        config: config.clone(),
        sample_count: n,
        test_count,
    })
}

/// The MCI step: reinitialize all candidate links for each target and test
/// X_{t−τ} ⟂ Y_t given pa(Y_t)∖{X_{t−τ}} and pa(X) shifted by τ.
///
/// Shifted parent lags reach 2·tau_max, so the sample matrix is rebuilt
/// with that extended maximum lag (shrinking the usable rows accordingly).
/// Links with p ≤ alpha_level are retained.
pub fn mci_step<F: Float>(
    ens: &EnsembleTimeSeries<F>,
    parent_sets: &BTreeMap<String, ParentSet<F>>,
    targets: &[String],
    config: &DiscoveryConfig,
) -> Result<BTreeMap<String, ParentSet<F>>> {
    config.validate()?;
    let results: Result<Vec<(String, ParentSet<F>)>> = targets
        .par_iter()
        .map(|target| mci_for_target(ens, parent_sets, target, config).map(|ps| (target.clone(), ps)))
        .collect();
    Ok(results?.into_iter().collect())
}

fn mci_for_target<F: Float>(
    ens: &EnsembleTimeSeries<F>,
    parent_sets: &BTreeMap<String, ParentSet<F>>,
    target: &str,
    config: &DiscoveryConfig,
) -> Result<ParentSet<F>> {
    let candidates = candidate_features(ens, config.tau_min, config.tau_max)?;
    let pa_target: BTreeSet<LaggedFeature> = parents_of(parent_sets, target)?;

    // Conditioning set per candidate, and the union of all columns the
    // extended sample matrix must carry.
    let mut cond_sets: Vec<Vec<LaggedFeature>> = Vec::with_capacity(candidates.len());
    let mut needed: BTreeSet<LaggedFeature> = candidates.iter().copied().collect();
    for cand in &candidates {
        let source_name = &ens.variables()[cand.variable_index].name;
        let pa_source = parents_of(parent_sets, source_name)?;
        let mut conds: BTreeSet<LaggedFeature> = pa_target.clone();
        conds.remove(cand);
        for pa in pa_source {
            conds.insert(LaggedFeature::new(pa.variable_index, pa.lag + cand.lag));
        }
        needed.extend(conds.iter().copied());
        cond_sets.push(conds.into_iter().collect());
    }

    let columns: Vec<LaggedFeature> = needed.into_iter().collect();
    let extended = build_lagged_samples(ens, target, config.tau_min, 2 * config.tau_max, Some(&columns))?;
    let n = extended.n_samples();

    let tested: Result<Vec<CiResult<F>>> = candidates
        .par_iter()
        .zip(cond_sets.par_iter())
        .map(|(cand, conds)| {
            let cand_col = extended
                .column_position(*cand)
                .expect("candidate column present by construction");
            let cond_cols: Vec<usize> = conds
                .iter()
                .map(|f| extended.column_position(*f).expect("conditioning column present"))
                .collect();
            let z = gather_columns(&extended, &cond_cols);
            ci_test(extended.x.column(cand_col), extended.y.view(), z.view())
                .map_err(|e| wrap_dof_error(e, conds.len(), n))
        })
        .collect();
    let tested = tested?;
    let test_count = tested.len();

    let mut links: Vec<ParentLink<F>> = candidates
        .iter()
        .zip(tested.iter())
        .filter(|(_, res)| res.p_value.as_f64() <= config.alpha_level)
        .map(|(cand, res)| ParentLink {
            feature: *cand,
            r: res.r,
            p_value: res.p_value,
        })
        .collect();
    sort_links(&mut links);

    Ok(ParentSet {
        target: target.to_string(),
        links,
        config: config.clone(),
        sample_count: n,
        test_count,
    })
}

/// Discover parents for every requested target.
///
/// With `Method::Pc1` this is per-target PC₁; with `Method::Pcmci`, PC₁
/// first runs for every predictor variable (at the same pc_alpha) to
/// obtain the conditioning parents, then the MCI step re-tests all links.
pub fn discover<F: Float>(
    ens: &EnsembleTimeSeries<F>,
    targets: &[String],
    config: &DiscoveryConfig,
) -> Result<DiscoveryReport<F>> {
    config.validate()?;
    if targets.is_empty() {
        return Err(Error::Config("no discovery targets requested".to_string()));
    }
    for t in targets {
        let idx = ens.variable_index(t)?;
        if !ens.variables()[idx].role.is_target() {
            return Err(Error::Schema(format!(
                "variable '{t}' does not have a target role"
            )));
        }
    }
    let started = Instant::now();

    let parent_sets: BTreeMap<String, ParentSet<F>>;
    let total_tests: usize;
    match config.method {
        Method::Pc1 => {
            let per_target: Result<Vec<(String, ParentSet<F>)>> = targets
                .par_iter()
                .map(|t| {
                    let data = build_lagged_samples(ens, t, config.tau_min, config.tau_max, None)?;
                    pc1_parents(&data, config).map(|ps| (t.clone(), ps))
                })
                .collect();
            parent_sets = per_target?.into_iter().collect();
            total_tests = parent_sets.values().map(|ps| ps.test_count).sum();
        }
        Method::Pcmci => {
            // Parents of every variable that can appear as a source.
            let mut pc1_vars: BTreeSet<String> = targets.iter().cloned().collect();
            for &v in &ens.predictor_indices() {
                pc1_vars.insert(ens.variables()[v].name.clone());
            }
            let pc1_vars: Vec<String> = pc1_vars.into_iter().collect();
            let first_stage: Result<Vec<(String, ParentSet<F>)>> = pc1_vars
                .par_iter()
                .map(|v| {
                    let data = build_lagged_samples(ens, v, config.tau_min, config.tau_max, None)?;
                    pc1_parents(&data, config).map(|ps| (v.clone(), ps))
                })
                .collect();
            let first_stage: BTreeMap<String, ParentSet<F>> = first_stage?.into_iter().collect();
            let stage_tests: usize = first_stage.values().map(|ps| ps.test_count).sum();
            parent_sets = mci_step(ens, &first_stage, targets, config)?;
            total_tests = stage_tests + parent_sets.values().map(|ps| ps.test_count).sum::<usize>();
        }
    }

    Ok(DiscoveryReport {
        parent_sets,
        wall_time_ms: started.elapsed().as_millis(),
        total_tests,
    })
}

fn parents_of<F: Float>(
    parent_sets: &BTreeMap<String, ParentSet<F>>,
    variable: &str,
) -> Result<BTreeSet<LaggedFeature>> {
    parent_sets
        .get(variable)
        .map(|ps| ps.links.iter().map(|l| l.feature).collect())
        .ok_or_else(|| {
            Error::Discovery(format!(
                "no first-stage parent set available for variable '{variable}'"
            ))
        })
}

/// Strongest first: largest minimum |r|, then smallest max p, then
/// (variable, lag) — fully deterministic.
fn rank_by_strength<F: Float>(
    survivors: &[usize],
    states: &[CandidateState<F>],
    columns: &[LaggedFeature],
) -> Vec<usize> {
    let mut ranked = survivors.to_vec();
    ranked.sort_by(|&a, &b| {
        states[b]
            .min_abs_r
            .as_f64()
            .total_cmp(&states[a].min_abs_r.as_f64())
            .then(states[a].max_p.as_f64().total_cmp(&states[b].max_p.as_f64()))
            .then(columns[a].cmp(&columns[b]))
    });
    ranked
}

/// Link ordering for output: ascending p, then descending |r|, then
/// (variable, lag).
fn sort_links<F: Float>(links: &mut [ParentLink<F>]) {
    links.sort_by(|a, b| {
        a.p_value
            .as_f64()
            .total_cmp(&b.p_value.as_f64())
            .then(b.r.abs().as_f64().total_cmp(&a.r.abs().as_f64()))
            .then(a.feature.cmp(&b.feature))
    });
}

fn collect_links<F: Float>(
    states: &[CandidateState<F>],
    columns: &[LaggedFeature],
) -> Vec<ParentLink<F>> {
    let mut links: Vec<ParentLink<F>> = states
        .iter()
        .zip(columns.iter())
        .filter(|(s, _)| s.alive)
        .map(|(s, &feature)| ParentLink {
            feature,
            r: s.r_at_min,
            p_value: s.max_p,
        })
        .collect();
    sort_links(&mut links);
    links
}

fn gather_columns<F: Float>(data: &SampleMatrix<F>, cols: &[usize]) -> Array2<F> {
    let n = data.n_samples();
    let mut z = Array2::zeros((n, cols.len()));
    for (j, &c) in cols.iter().enumerate() {
        z.column_mut(j).assign(&data.x.column(c));
    }
    z
}

fn wrap_dof_error(e: Error, k: usize, n: usize) -> Error {
    match e {
        Error::InsufficientSamples(_) => Error::Discovery(format!(
            "insufficient samples for conditioning dimension k = {k} with n = {n}"
        )),
        other => other,
    }
}
