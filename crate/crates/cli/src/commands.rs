//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::json;

use causalsel::discovery::discover;
use causalsel::ingest::{load_ensemble, write_directory_csv};
use causalsel::regress::{
    evaluate, fit_mlr, predict, write_predictions_csv, LinearModel, MetricReport, ModelRecord,
    Split,
};
use causalsel::samples::build_lagged_samples;
use causalsel::selection::{
    select_causal, select_lagged_correlation, select_random, selection_frequency, sweep_pc_alpha,
    FeatureSelection, FeatureSelectionRecord, SelectionMethod, SweepReport,
};
use causalsel::synth::{confounder_scenario, generate};
use causalsel::{Ensemble, Error, Result};

use crate::config::RunConfig;
use crate::output::{log_event, RunDir};

pub struct LoadedData {
    pub train: Ensemble,
    pub val: Option<Ensemble>,
    pub test: Option<Ensemble>,
}

/// ingest → align → split, as configured.
pub fn load_pipeline(config: &RunConfig, data_override: Option<&Path>) -> Result<LoadedData> {
    let data_cfg = config.data()?;
    let source: &Path = data_override.unwrap_or(&data_cfg.source);
    let schema = data_cfg.resolve_schema()?;
    let ens: Ensemble = load_ensemble(source, &schema)?;
    log_event(
        "loaded",
        &json!({
            "members": ens.n_members(),
            "variables": ens.n_vars(),
        }),
    );

    let ens = match &config.alignment {
        Some(a) => {
            let aligned =
                ens.align_by_reference_extremum(&a.ref_var, a.mode, config.discovery.tau_max + 2)?;
            log_event(
                "aligned",
                &json!({
                    "ref_var": a.ref_var,
                    "window": aligned.member_len(0),
                }),
            );
            aligned
        }
        None => ens,
    };

    match &config.split {
        Some(s) => {
            let [train, val, test] = ens.split_by_member(s.fractions, s.seed)?;
            log_event(
                "split",
                &json!({
                    "train": train.n_members(),
                    "val": val.n_members(),
                    "test": test.n_members(),
                }),
            );
            Ok(LoadedData {
                train,
                val: Some(val),
                test: Some(test),
            })
        }
        None => Ok(LoadedData {
            train: ens,
            val: None,
            test: None,
        }),
    }
}

fn output_dir(config: &RunConfig, flag: Option<&Path>) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory (use --output)".to_string()))
}

pub fn cmd_ingest_check(config: &RunConfig, data_override: Option<&Path>) -> Result<()> {
    let data_cfg = config.data()?;
    let source: &Path = data_override.unwrap_or(&data_cfg.source);
    let schema = data_cfg.resolve_schema()?;
    let ens: Ensemble = load_ensemble(source, &schema)?;
    println!(
        "ok: {} members × {} variables, lengths {}..{}",
        ens.n_members(),
        ens.n_vars(),
        (0..ens.n_members()).map(|m| ens.member_len(m)).min().unwrap_or(0),
        (0..ens.n_members()).map(|m| ens.member_len(m)).max().unwrap_or(0),
    );
    for v in ens.variables() {
        println!("  variable {} ({:?})", v.name, v.role);
    }
    // Surface alignment problems (short overlap windows) here rather than
    // at discovery time.
    if let Some(a) = &config.alignment {
        let aligned =
            ens.align_by_reference_extremum(&a.ref_var, a.mode, config.discovery.tau_max + 2)?;
        println!(
            "alignment on {} ({:?}): common window {} steps",
            a.ref_var,
            a.mode,
            aligned.member_len(0)
        );
    }
    Ok(())
}

pub fn cmd_discover(
    config: &RunConfig,
    data_override: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let out = output_dir(config, out)?;
    let mut run = RunDir::create(&out, "discover", config)?;
    let data = load_pipeline(config, data_override)?;
    let targets = config.targets()?;

    let report = discover(&data.train, targets, &config.discovery)?;
    log_event(
        "discovered",
        &json!({
            "targets": targets.len(),
            "tests": report.total_tests,
            "ms": report.wall_time_ms as u64,
        }),
    );
    for (target, parents) in &report.parent_sets {
        let record = parents.to_record(data.train.variables());
        run.write_json(&format!("parents_{target}.json"), &record)?;
        println!(
            "{target}: {} parents from {} tests on n={}",
            parents.links.len(),
            parents.test_count,
            parents.sample_count
        );
    }
    run.finish()?;
    Ok(())
}

fn run_selection(
    config: &RunConfig,
    data: &LoadedData,
    target: &str,
) -> Result<FeatureSelection> {
    let sel_cfg = config
        .selection
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a selection section".to_string()))?;
    let d = &config.discovery;
    match sel_cfg.method {
        SelectionMethod::CausalPc1 | SelectionMethod::CausalPcmci => {
            let mut cfg = d.clone();
            cfg.method = match sel_cfg.method {
                SelectionMethod::CausalPcmci => causalsel::discovery::Method::Pcmci,
                _ => causalsel::discovery::Method::Pc1,
            };
            select_causal(&data.train, target, &cfg)
        }
        SelectionMethod::LaggedCorr => {
            let k = sel_cfg
                .k
                .ok_or_else(|| Error::Config("lagged_corr selection needs k".to_string()))?;
            select_lagged_correlation(&data.train, target, k, d.tau_min, d.tau_max)
        }
        SelectionMethod::Random => {
            let k = sel_cfg
                .k
                .ok_or_else(|| Error::Config("random selection needs k".to_string()))?;
            let seed = sel_cfg.seed.unwrap_or(config.seed);
            select_random(&data.train, target, k, d.tau_min, d.tau_max, seed)
        }
    }
}

pub fn cmd_select(
    config: &RunConfig,
    data_override: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let out = output_dir(config, out)?;
    let mut run = RunDir::create(&out, "select", config)?;
    let data = load_pipeline(config, data_override)?;
    for target in config.targets()? {
        let selection = run_selection(config, &data, target)?;
        let record = selection.to_record(data.train.variables());
        run.write_json(&format!("selection_{target}.json"), &record)?;
        println!(
            "{target}: {} features via {}",
            selection.features.len(),
            selection.method.as_str()
        );
    }
    run.finish()?;
    Ok(())
}

pub fn cmd_fit(
    config: &RunConfig,
    selection_path: &Path,
    target_flag: Option<&str>,
    data_override: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let out = output_dir(config, out)?;
    let mut run = RunDir::create(&out, "fit", config)?;
    let data = load_pipeline(config, data_override)?;
    let target = match target_flag {
        Some(t) => t.to_string(),
        None => {
            let targets = config.targets()?;
            if targets.len() != 1 {
                return Err(Error::Config(
                    "fit needs exactly one target (use --target)".to_string(),
                ));
            }
            targets[0].clone()
        }
    };

    let text = std::fs::read_to_string(selection_path)?;
    let record: FeatureSelectionRecord = serde_json::from_str(&text)?;
    let selection = FeatureSelection::from_record(&record, data.train.variables())?;
    if selection.features.is_empty() {
        return Err(Error::Config("selection has no features".to_string()));
    }

    let d = &config.discovery;
    let train = build_lagged_samples(&data.train, &target, d.tau_min, d.tau_max, Some(&selection.features))?;
    let model = fit_mlr(&train)?;
    let report = evaluate(&model, &train, Split::Train)?;
    run.write_json(
        &format!("model_{target}.json"),
        &model.to_record(data.train.variables()),
    )?;
    println!(
        "{target}: fitted {} coefficients, train R² {:.4}",
        model.coefficients.len(),
        report.r2
    );
    run.finish()?;
    Ok(())
}

fn split_ensemble(data: &LoadedData, split: Split) -> Result<&Ensemble> {
    match split {
        Split::Train => Ok(&data.train),
        Split::Val => data.val.as_ref().ok_or_else(|| {
            Error::Config("no validation split configured".to_string())
        }),
        Split::Test => data.test.as_ref().ok_or_else(|| {
            Error::Config("no test split configured".to_string())
        }),
    }
}

pub fn cmd_evaluate(
    config: &RunConfig,
    model_path: &Path,
    split: Split,
    target_flag: Option<&str>,
    data_override: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let out = output_dir(config, out)?;
    let mut run = RunDir::create(&out, "evaluate", config)?;
    let data = load_pipeline(config, data_override)?;
    let target = match target_flag {
        Some(t) => t.to_string(),
        None => config.targets()?[0].clone(),
    };

    let text = std::fs::read_to_string(model_path)?;
    let record: ModelRecord = serde_json::from_str(&text)?;
    let ens = split_ensemble(&data, split)?;
    let model = LinearModel::<f64>::from_record(&record, ens.variables())?;

    let d = &config.discovery;
    let samples = build_lagged_samples(ens, &target, d.tau_min, d.tau_max, Some(&model.features))?;
    let metrics = evaluate(&model, &samples, split)?;
    let yhat = predict(&model, &samples)?;

    let split_name = match split {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    };
    run.write_json(&format!("metrics_{target}_{split_name}.json"), &metrics)?;
    let mut csv: Vec<u8> = Vec::new();
    write_predictions_csv(&mut csv, ens.member_ids(), &samples, &yhat)?;
    run.write_text(
        &format!("predictions_{target}_{split_name}.csv"),
        &String::from_utf8(csv).expect("ascii csv"),
    )?;
    println!(
        "{target} [{split_name}]: R² {:.4}, MSE {:.4}, MAE {:.4}, n {}",
        metrics.r2, metrics.mse, metrics.mae, metrics.n
    );
    run.finish()?;
    Ok(())
}

fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("pc_alpha,alpha_level,n_features,r2_train,r2_val,best\n");
    for (i, p) in report.points.iter().enumerate() {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.pc_alpha,
            p.alpha_level.map(|a| a.to_string()).unwrap_or_default(),
            p.n_features,
            fmt(p.r2_train),
            fmt(p.r2_val),
            report.best_index == Some(i)
        ));
    }
    out
}

pub fn cmd_sweep(
    config: &RunConfig,
    data_override: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let out = output_dir(config, out)?;
    let mut run = RunDir::create(&out, "sweep", config)?;
    let data = load_pipeline(config, data_override)?;
    let val = data
        .val
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a split section for validation".to_string()))?;
    let sweep_cfg = config.sweep.clone().unwrap_or_default();

    for target in config.targets()? {
        let report = sweep_pc_alpha(&data.train, val, target, &sweep_cfg, &config.discovery)?;
        run.write_json(&format!("sweep_{target}.json"), &report)?;
        run.write_text(&format!("sweep_{target}.csv"), &sweep_csv(&report))?;
        match report.best_index {
            Some(i) => {
                let p = &report.points[i];
                println!(
                    "{target}: best pc_alpha {:.6} ({} features, val R² {:.4})",
                    p.pc_alpha,
                    p.n_features,
                    p.r2_val.unwrap_or(f64::NAN)
                );
            }
            None => println!("{target}: no grid point selected any features"),
        }
    }
    run.finish()?;
    Ok(())
}

pub fn cmd_synth(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let out = output_dir(config, out)?;
    let mut run = RunDir::create(&out, "synth", config)?;
    let spec = config
        .synth
        .as_ref()
        .ok_or_else(|| Error::Config("synth needs a synth section".to_string()))?;
    let (ens, truth) = generate::<f64>(spec)?;
    write_directory_csv(&ens, &run.root.join("data"))?;
    log_event(
        "generated",
        &json!({ "members": ens.n_members(), "length": ens.member_len(0) }),
    );

    // Truth as name → [{variable, lag}] for downstream scoring.
    let truth_json: BTreeMap<String, Vec<serde_json::Value>> = truth
        .iter()
        .map(|(target, feats)| {
            (
                target.clone(),
                feats
                    .iter()
                    .map(|f| {
                        json!({
                            "variable": ens.variables()[f.variable_index].name,
                            "lag": f.lag,
                        })
                    })
                    .collect(),
            )
        })
        .collect();
    run.write_json("truth.json", &truth_json)?;
    run.write_json("spec.json", spec)?;
    println!(
        "generated {} members × {} steps × {} variables under {}",
        ens.n_members(),
        ens.member_len(0),
        ens.n_vars(),
        run.root.join("data").display()
    );
    run.finish()?;
    Ok(())
}

struct BenchRow {
    seed: u64,
    method: SelectionMethod,
    split: Split,
    n_features: usize,
    metrics: MetricReport<f64>,
}

pub fn cmd_bench(config: &RunConfig, scenario: &str, seeds: u64, out: Option<&Path>) -> Result<()> {
    if scenario != "confounder" {
        return Err(Error::Config(format!(
            "unknown scenario '{scenario}' (available: confounder)"
        )));
    }
    let out = output_dir(config, out)?;
    let mut run = RunDir::create(&out, "bench", config)?;
    let d = &config.discovery;
    let target = "y";

    let mut rows: Vec<BenchRow> = Vec::new();
    let mut causal_selections = Vec::new();
    let mut lagged_selections = Vec::new();
    for seed in 0..seeds {
        let (ens, _, _) = confounder_scenario::<f64>(seed)?;
        let [train, val, test] = ens.split_by_member([0.5, 0.25, 0.25], seed)?;

        let causal = select_causal(&train, target, d)?;
        if causal.features.is_empty() {
            log_event("skipped_seed", &json!({ "seed": seed, "reason": "empty causal selection" }));
            continue;
        }
        let k = causal.features.len();
        let lagged = select_lagged_correlation(&train, target, k, d.tau_min, d.tau_max)?;
        let random = select_random(&train, target, k, d.tau_min, d.tau_max, seed)?;

        for (method, selection) in [
            (SelectionMethod::CausalPc1, &causal),
            (SelectionMethod::LaggedCorr, &lagged),
            (SelectionMethod::Random, &random),
        ] {
            let tr = build_lagged_samples(&train, target, d.tau_min, d.tau_max, Some(&selection.features))?;
            let model = fit_mlr(&tr)?;
            for (split, ens_split) in [
                (Split::Train, &train),
                (Split::Val, &val),
                (Split::Test, &test),
            ] {
                let samples =
                    build_lagged_samples(ens_split, target, d.tau_min, d.tau_max, Some(&selection.features))?;
                let metrics = evaluate(&model, &samples, split)?;
                rows.push(BenchRow {
                    seed,
                    method,
                    split,
                    n_features: selection.features.len(),
                    metrics,
                });
            }
        }
        causal_selections.push(causal);
        lagged_selections.push(lagged);
    }

    // Per-seed comparison table.
    let mut csv = String::from("seed,method,split,n_features,r2,mse,mae\n");
    for r in &rows {
        let split = match r.split {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.seed,
            r.method.as_str(),
            split,
            r.n_features,
            r.metrics.r2,
            r.metrics.mse,
            r.metrics.mae
        ));
    }
    run.write_text("bench.csv", &csv)?;

    // Aggregate means per (method, split).
    let mut agg: BTreeMap<String, (f64, f64, f64, f64, usize)> = BTreeMap::new();
    for r in &rows {
        let split = match r.split {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        };
        let e = agg
            .entry(format!("{}/{split}", r.method.as_str()))
            .or_insert((0.0, 0.0, 0.0, 0.0, 0));
        e.0 += r.metrics.r2;
        e.1 += r.metrics.mse;
        e.2 += r.metrics.mae;
        e.3 += r.n_features as f64;
        e.4 += 1;
    }
    let aggregate: BTreeMap<String, serde_json::Value> = agg
        .into_iter()
        .map(|(k, (r2, mse, mae, nf, n))| {
            let n = n as f64;
            (
                k,
                json!({
                    "mean_r2": r2 / n,
                    "mean_mse": mse / n,
                    "mean_mae": mae / n,
                    "mean_n_features": nf / n,
                    "runs": n as usize,
                }),
            )
        })
        .collect();
    run.write_json("bench.json", &json!({ "scenario": scenario, "seeds": seeds, "aggregate": aggregate }))?;

    // Predictor-selection frequency for the causal and lagged methods.
    if !causal_selections.is_empty() {
        let (ens, _, _) = confounder_scenario::<f64>(0)?;
        let freq = selection_frequency(&causal_selections)?;
        run.write_json("freq_causal.json", &freq)?;
        run.write_text("freq_causal_variable.csv", &freq.variable_csv(ens.variables()))?;
        run.write_text("freq_causal_lag.csv", &freq.lag_csv())?;
        let freq = selection_frequency(&lagged_selections)?;
        run.write_json("freq_lagged.json", &freq)?;
        run.write_text("freq_lagged_variable.csv", &freq.variable_csv(ens.variables()))?;
        run.write_text("freq_lagged_lag.csv", &freq.lag_csv())?;
    }

    for (key, value) in aggregate_preview(&rows) {
        println!("{key}: {value}");
    }
    run.finish()?;
    Ok(())
}

fn aggregate_preview(rows: &[BenchRow]) -> Vec<(String, String)> {
    let mut by: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in rows {
        if matches!(r.split, Split::Val) {
            let e = by.entry(r.method.as_str().to_string()).or_insert((0.0, 0));
            e.0 += r.metrics.r2;
            e.1 += 1;
        }
    }
    by.into_iter()
        .map(|(m, (sum, n))| (m, format!("mean val R² {:.4} over {n} seeds", sum / n as f64)))
        .collect()
}

/// Exit code contract: 0 success, 1 runtime error, 2 config/input error.
pub fn error_exit_code(err: &Error) -> u8 {
    if err.is_input_error() {
        2
    } else {
        1
    }
}

pub fn print_error(err: &Error) {
    log_event(
        "error",
        &json!({
            "kind": if err.is_input_error() { "config" } else { "runtime" },
            "message": err.to_string(),
        }),
    );
    eprintln!("error: {err}");
}
