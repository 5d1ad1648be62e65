//! Feature-selection strategies behind one interface, the pc_alpha sweep,
//! and selection-frequency aggregation.
//!
//! Every method draws from the identical candidate enumeration for the
//! same ensemble and lag window, so feature counts are directly
//! comparable across methods.

use ndarray::Array2;
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::citest::partial_correlation;
use crate::discovery::{discover, DiscoveryConfig, Method};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::regress::{evaluate, fit_mlr, Split};
use crate::samples::{
    build_lagged_samples, candidate_features, features_to_records, records_to_features,
    FeatureRecord, LaggedFeature,
};
use crate::series::{EnsembleTimeSeries, VariableMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    CausalPc1,
    CausalPcmci,
    LaggedCorr,
    Random,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::CausalPc1 => "causal_pc1",
            SelectionMethod::CausalPcmci => "causal_pcmci",
            SelectionMethod::LaggedCorr => "lagged_corr",
            SelectionMethod::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub run_id: String,
    pub seed: Option<u64>,
}

/// An ordered set of selected features plus how it was produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub method: SelectionMethod,
    pub features: Vec<LaggedFeature>,
    /// Echo of the method-specific parameters, including any clamping.
    pub params: serde_json::Value,
    pub provenance: Provenance,
}

/// External JSON form with variable names resolved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSelectionRecord {
    pub method: SelectionMethod,
    pub features: Vec<FeatureRecord>,
    pub params: serde_json::Value,
    pub provenance: Provenance,
}

impl FeatureSelection {
    pub fn to_record(&self, variables: &[VariableMeta]) -> FeatureSelectionRecord {
        FeatureSelectionRecord {
            method: self.method,
            features: features_to_records(&self.features, variables),
            params: self.params.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_record(
        record: &FeatureSelectionRecord,
        variables: &[VariableMeta],
    ) -> Result<Self> {
        Ok(FeatureSelection {
            method: record.method,
            features: records_to_features(&record.features, variables)?,
            params: record.params.clone(),
            provenance: record.provenance.clone(),
        })
    }
}

/// Causal selection: run discovery for the target and keep its parents,
/// ordered by ascending p then the strength rule.
pub fn select_causal<F: Float>(
    ens: &EnsembleTimeSeries<F>,
    target: &str,
    config: &DiscoveryConfig,
) -> Result<FeatureSelection> {
    let report = discover(ens, &[target.to_string()], config)?;
    let parents = &report.parent_sets[target];
    let method = match config.method {
        Method::Pc1 => SelectionMethod::CausalPc1,
        Method::Pcmci => SelectionMethod::CausalPcmci,
    };
    Ok(FeatureSelection {
        method,
        features: parents.features(),
        params: serde_json::to_value(config)?,
        provenance: Provenance {
            run_id: format!("{}-{target}", method.as_str()),
            seed: None,
        },
    })
}

/// Rank all candidates by absolute Pearson correlation with the target
/// over the pooled samples and keep the `top_k`. Ties break on
/// (variable_index, lag); `top_k` beyond the candidate count is clamped.
pub fn select_lagged_correlation<F: Float>(
    ens: &EnsembleTimeSeries<F>,
    target: &str,
    top_k: usize,
    tau_min: usize,
    tau_max: usize,
) -> Result<FeatureSelection> {
    if top_k < 1 {
        return Err(Error::Config("top_k must be at least 1".to_string()));
    }
    let data = build_lagged_samples(ens, target, tau_min, tau_max, None)?;
    let empty = Array2::<F>::zeros((data.n_samples(), 0));
    let corrs: Result<Vec<f64>> = (0..data.n_features())
        .into_par_iter()
        .map(|c| {
            partial_correlation(data.x.column(c), data.y.view(), empty.view())
                .map(|r| r.as_f64().abs())
        })
        .collect();
    let corrs = corrs?;

    let mut order: Vec<usize> = (0..data.n_features()).collect();
    order.sort_by(|&a, &b| {
        corrs[b]
            .total_cmp(&corrs[a])
            .then(data.columns[a].cmp(&data.columns[b]))
    });
    let k = top_k.min(order.len());
    let features: Vec<LaggedFeature> = order[..k].iter().map(|&c| data.columns[c]).collect();

    Ok(FeatureSelection {
        method: SelectionMethod::LaggedCorr,
        features,
        params: json!({
            "top_k": top_k,
            "selected": k,
            "tau_min": tau_min,
            "tau_max": tau_max,
        }),
        provenance: Provenance {
            run_id: format!("lagged_corr-{target}"),
            seed: None,
        },
    })
}

/// Uniform sample of `k` features without replacement, in draw order.
pub fn select_random<F: Float>(
    ens: &EnsembleTimeSeries<F>,
    target: &str,
    k: usize,
    tau_min: usize,
    tau_max: usize,
    seed: u64,
) -> Result<FeatureSelection> {
    if k < 1 {
        return Err(Error::Config("k must be at least 1".to_string()));
    }
    ens.variable_index(target)?;
    let candidates = candidate_features(ens, tau_min, tau_max)?;
    let take = k.min(candidates.len());

    // Partial Fisher–Yates so the draw order itself is the output order.
    let mut pool: Vec<LaggedFeature> = candidates;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(take);
    for i in 0..take {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
        features.push(pool[i]);
    }

    Ok(FeatureSelection {
        method: SelectionMethod::Random,
        features,
        params: json!({
            "k": k,
            "selected": take,
            "tau_min": tau_min,
            "tau_max": tau_max,
        }),
        provenance: Provenance {
            run_id: format!("random-{target}"),
            seed: Some(seed),
        },
    })
}

/// Sweep configuration: a pc_alpha grid, optionally crossed with an
/// alpha_level grid for PCMCI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub pc_alpha_grid: Vec<f64>,
    #[serde(default)]
    pub alpha_level_grid: Option<Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            pc_alpha_grid: default_pc_alpha_grid(),
            alpha_level_grid: None,
        }
    }
}

/// Eight points, logarithmically spaced over [1e-4, 0.1].
pub fn default_pc_alpha_grid() -> Vec<f64> {
    let lo = 1e-4f64.ln();
    let hi = 0.1f64.ln();
    (0..8)
        .map(|i| (lo + (hi - lo) * i as f64 / 7.0).exp())
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub pc_alpha: f64,
    /// Present only for PCMCI sweeps.
    pub alpha_level: Option<f64>,
    pub n_features: usize,
    pub r2_train: Option<f64>,
    pub r2_val: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub target: String,
    pub method: Method,
    pub points: Vec<SweepPoint>,
    /// Index of the point maximizing validation R², if any point yielded
    /// features.
    pub best_index: Option<usize>,
}

/// For each grid point: select on train, fit on train, evaluate on train
/// and val. A point selecting zero features records null metrics.
pub fn sweep_pc_alpha<F: Float>(
    ens_train: &EnsembleTimeSeries<F>,
    ens_val: &EnsembleTimeSeries<F>,
    target: &str,
    sweep: &SweepConfig,
    base: &DiscoveryConfig,
) -> Result<SweepReport> {
    if sweep.pc_alpha_grid.is_empty() {
        return Err(Error::Config("pc_alpha grid is empty".to_string()));
    }
    for &v in sweep
        .pc_alpha_grid
        .iter()
        .chain(sweep.alpha_level_grid.iter().flatten())
    {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Config(format!(
                "sweep grid values must lie strictly inside (0, 1), got {v}"
            )));
        }
    }
    if sweep.alpha_level_grid.is_some() && base.method != Method::Pcmci {
        return Err(Error::Config(
            "an alpha_level grid requires method = pcmci".to_string(),
        ));
    }

    let grid: Vec<(f64, Option<f64>)> = match &sweep.alpha_level_grid {
        None => sweep.pc_alpha_grid.iter().map(|&a| (a, None)).collect(),
        Some(alphas) => sweep
            .pc_alpha_grid
            .iter()
            .flat_map(|&a| alphas.iter().map(move |&l| (a, Some(l))))
            .collect(),
    };

    let points: Result<Vec<SweepPoint>> = grid
        .par_iter()
        .map(|&(pc_alpha, alpha_level)| {
            let cfg = DiscoveryConfig {
                pc_alpha,
                alpha_level: alpha_level.unwrap_or(base.alpha_level),
                ..base.clone()
            };
            let selection = select_causal(ens_train, target, &cfg)?;
            if selection.features.is_empty() {
                return Ok(SweepPoint {
                    pc_alpha,
                    alpha_level,
                    n_features: 0,
                    r2_train: None,
                    r2_val: None,
                });
            }
            let train = build_lagged_samples(
                ens_train,
                target,
                cfg.tau_min,
                cfg.tau_max,
                Some(&selection.features),
            )?;
            let model = fit_mlr(&train)?;
            let r2_train = evaluate(&model, &train, Split::Train)?.r2.as_f64();
            let val = build_lagged_samples(
                ens_val,
                target,
                cfg.tau_min,
                cfg.tau_max,
                Some(&selection.features),
            )?;
            let r2_val = evaluate(&model, &val, Split::Val)?.r2.as_f64();
            Ok(SweepPoint {
                pc_alpha,
                alpha_level,
                n_features: selection.features.len(),
                r2_train: Some(r2_train),
                r2_val: Some(r2_val),
            })
        })
        .collect();
    let points = points?;

    let best_index = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.r2_val.map(|v| (i, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i);

    Ok(SweepReport {
        target: target.to_string(),
        method: base.method,
        points,
        best_index,
    })
}

/// Appearance counts per variable and per lag across selections, each
/// table sorted by descending count (ties by index).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub n_selections: usize,
    pub variable_counts: Vec<(usize, usize)>,
    pub lag_counts: Vec<(usize, usize)>,
}

pub fn selection_frequency(selections: &[FeatureSelection]) -> Result<FrequencyReport> {
    if selections.is_empty() {
        return Err(Error::Config(
            "selection frequency needs at least one selection".to_string(),
        ));
    }
    let mut by_variable: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut by_lag: std::collections::BTreeMap<usize, usize> = Default::default();
    for sel in selections {
        for f in &sel.features {
            *by_variable.entry(f.variable_index).or_default() += 1;
            *by_lag.entry(f.lag).or_default() += 1;
        }
    }
    let sort_desc = |map: std::collections::BTreeMap<usize, usize>| {
        let mut v: Vec<(usize, usize)> = map.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    };
    Ok(FrequencyReport {
        n_selections: selections.len(),
        variable_counts: sort_desc(by_variable),
        lag_counts: sort_desc(by_lag),
    })
}

impl FrequencyReport {
    pub fn variable_csv(&self, variables: &[VariableMeta]) -> String {
        let mut out = String::from("variable,count\n");
        for &(v, c) in &self.variable_counts {
            out.push_str(&format!("{},{}\n", variables[v].name, c));
        }
        out
    }

    pub fn lag_csv(&self) -> String {
        let mut out = String::from("lag,count\n");
        for &(l, c) in &self.lag_counts {
            out.push_str(&format!("{l},{c}\n"));
        }
        out
    }
}

/// Indices of runs whose validation R² lies within `fraction` of the best
/// one (the best-models filter used for frequency aggregation).
pub fn within_fraction_of_best(r2_vals: &[f64], fraction: f64) -> Vec<usize> {
    let best = r2_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Vec::new();
    }
    let threshold = best - fraction * best.abs();
    r2_vals
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v >= threshold)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Role, VariableMeta};
    use crate::synth::confounder_scenario;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Two variables where x1[t] = x0[t−8] exactly.
    fn copied_lag_ensemble() -> EnsembleTimeSeries<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let len = 60;
        let x0: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut m = Array2::zeros((len, 2));
        for t in 0..len {
            m[[t, 0]] = x0[t];
            m[[t, 1]] = if t >= 8 { x0[t - 8] } else { 0.0 };
        }
        EnsembleTimeSeries::new(
            vec!["m0".into()],
            vec![m],
            vec![
                VariableMeta::new("x0", Role::Predictor, ""),
                VariableMeta::new("y", Role::Target, ""),
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn perfect_lagged_copy_ranks_first() {
        let ens = copied_lag_ensemble();
        let sel = select_lagged_correlation(&ens, "y", 3, 8, 12).unwrap();
        assert_eq!(sel.features[0], LaggedFeature::new(0, 8));
    }

    #[test]
    fn lagged_top1_is_exhaustively_optimal() {
        let (ens, _, _) = confounder_scenario::<f64>(7).unwrap();
        let sel = select_lagged_correlation(&ens, "y", 1, 8, 24).unwrap();
        let data = build_lagged_samples(&ens, "y", 8, 24, None).unwrap();
        let empty = Array2::<f64>::zeros((data.n_samples(), 0));
        let best_by_scan = (0..data.n_features())
            .map(|c| {
                let r = partial_correlation(data.x.column(c), data.y.view(), empty.view())
                    .unwrap()
                    .abs();
                (c, r)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        assert_eq!(sel.features[0], data.columns[best_by_scan]);
    }

    #[test]
    fn confounded_lagged_correlation_picks_the_spurious_link() {
        let (ens, _, spurious) = confounder_scenario::<f64>(3).unwrap();
        let sel = select_lagged_correlation(&ens, "y", 5, 8, 24).unwrap();
        let spurious = *spurious.iter().next().unwrap();
        assert!(
            sel.features.contains(&spurious),
            "top-5 {:?} misses the confounded link",
            sel.features
        );
    }

    #[test]
    fn causal_selection_excludes_the_spurious_link() {
        let (ens, _, spurious) = confounder_scenario::<f64>(3).unwrap();
        let cfg = DiscoveryConfig::default();
        let sel = select_causal(&ens, "y", &cfg).unwrap();
        let spurious = *spurious.iter().next().unwrap();
        assert!(!sel.features.contains(&spurious), "kept {:?}", sel.features);
        assert!(
            sel.features.contains(&LaggedFeature::new(0, 16)),
            "true driver missing from {:?}",
            sel.features
        );
    }

    #[test]
    fn random_selection_is_deterministic_and_clamps() {
        let (ens, _, _) = confounder_scenario::<f64>(1).unwrap();
        let a = select_random(&ens, "y", 10, 8, 24, 99).unwrap();
        let b = select_random(&ens, "y", 10, 8, 24, 99).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.features.len(), 10);
        let unique: std::collections::BTreeSet<_> = a.features.iter().collect();
        assert_eq!(unique.len(), 10);

        let c = select_random(&ens, "y", 10, 8, 24, 100).unwrap();
        assert_ne!(a.features, c.features);

        // k beyond the candidate count is clamped to the full enumeration.
        let n_candidates = candidate_features(&ens, 8, 24).unwrap().len();
        let all = select_random(&ens, "y", 10_000, 8, 24, 7).unwrap();
        assert_eq!(all.features.len(), n_candidates);
        assert_eq!(all.params["selected"], n_candidates);
        let unique: std::collections::BTreeSet<_> = all.features.iter().collect();
        assert_eq!(unique.len(), n_candidates);
    }

    #[test]
    fn default_grid_is_log_spaced() {
        let grid = default_pc_alpha_grid();
        assert_eq!(grid.len(), 8);
        assert!((grid[0] - 1e-4).abs() < 1e-12);
        assert!((grid[7] - 0.1).abs() < 1e-12);
        let ratio = grid[1] / grid[0];
        for w in grid.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn single_point_sweep_and_bad_grid() {
        let (ens, _, _) = confounder_scenario::<f64>(5).unwrap();
        let [train, val, _] = ens.split_by_member([0.5, 0.25, 0.25], 1).unwrap();
        let sweep = SweepConfig {
            pc_alpha_grid: vec![0.02],
            alpha_level_grid: None,
        };
        let report =
            sweep_pc_alpha(&train, &val, "y", &sweep, &DiscoveryConfig::default()).unwrap();
        assert_eq!(report.points.len(), 1);
        assert_eq!(report.best_index, Some(0));
        assert!(report.points[0].n_features > 0);

        let bad = SweepConfig {
            pc_alpha_grid: vec![0.0],
            alpha_level_grid: None,
        };
        assert!(matches!(
            sweep_pc_alpha(&train, &val, "y", &bad, &DiscoveryConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn frequency_counts_and_csv() {
        let sel = |features: Vec<LaggedFeature>| FeatureSelection {
            method: SelectionMethod::Random,
            features,
            params: json!({}),
            provenance: Provenance { run_id: "t".into(), seed: Some(0) },
        };
        let one = sel(vec![LaggedFeature::new(0, 8), LaggedFeature::new(1, 9)]);
        let report = selection_frequency(std::slice::from_ref(&one)).unwrap();
        assert_eq!(report.variable_counts, vec![(0, 1), (1, 1)]);
        assert_eq!(report.lag_counts, vec![(8, 1), (9, 1)]);

        let two = sel(vec![LaggedFeature::new(2, 10)]);
        let report = selection_frequency(&[one.clone(), two]).unwrap();
        assert!(report.variable_counts.iter().all(|&(_, c)| c == 1));

        let vars = vec![
            VariableMeta::new("a", Role::Both, ""),
            VariableMeta::new("b", Role::Both, ""),
            VariableMeta::new("c", Role::Both, ""),
        ];
        let csv = report.variable_csv(&vars);
        assert!(csv.starts_with("variable,count\n"));
        assert!(csv.contains("a,1"));
        assert_eq!(report.lag_csv().lines().count(), 4);
    }

    #[test]
    fn best_model_filter_keeps_near_best() {
        let r2 = vec![0.80, 0.82, 0.70, 0.819];
        let kept = within_fraction_of_best(&r2, 0.01);
        assert_eq!(kept, vec![1, 3]);
        let kept10 = within_fraction_of_best(&r2, 0.10);
        assert_eq!(kept10, vec![0, 1, 3]);
    }

    #[test]
    fn interface_uniformity_across_methods() {
        // All methods draw from the same candidate enumeration.
        let (ens, _, _) = confounder_scenario::<f64>(2).unwrap();
        let candidates: std::collections::BTreeSet<LaggedFeature> =
            candidate_features(&ens, 8, 24).unwrap().into_iter().collect();
        let causal = select_causal(&ens, "y", &DiscoveryConfig::default()).unwrap();
        let lagged = select_lagged_correlation(&ens, "y", 7, 8, 24).unwrap();
        let random = select_random(&ens, "y", 7, 8, 24, 3).unwrap();
        for sel in [&causal, &lagged, &random] {
            for f in &sel.features {
                assert!(candidates.contains(f), "{f:?} outside the enumeration");
            }
        }
    }
}
