//! Implementations of the five subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use riskpol::benchmark::{
    fit_logistic, omitted_covariate_ratios, reliability_bins, suggest_gamma,
    write_ratio_ecdf_csv, write_reliability_csv, Target,
};
use riskpol::calibrate::{
    evaluate_path, select_average, select_high_prob, sweep, CalibrationResult, ToleranceGrid,
};
use riskpol::data::{CovariateKind, CovariateSchema, DataSource, Dataset, SplitSpec};
use riskpol::genmodel::{mc_experiment, true_risks, true_risks_seeded, McConfig, Method, Scenario};
use riskpol::policy::{FrugalTree, PredicateTest};
use riskpol::weights::{
    population_risk_estimate, treatment_risk_stats, MiscalibrationConfig, NominalModel,
    NominalSelectionModel, Regime,
};

use crate::config::{ensure_out_dir, parse_list, write_meta, CliError, FileConfig, Resolver};
use crate::{BenchmarkGammaArgs, EvaluateArgs, LearnArgs, McEvalArgs, SimulateArgs};

fn parse_scenario(raw: &str) -> Result<Scenario, CliError> {
    raw.parse::<Scenario>().map_err(CliError::usage)
}

fn parse_method(raw: &str) -> Result<Method, CliError> {
    raw.parse::<Method>().map_err(CliError::usage)
}

fn parse_regime(raw: &str) -> Result<Regime, CliError> {
    match raw {
        "observational" => Ok(Regime::Observational),
        "trial" => Ok(Regime::Trial),
        other => Err(CliError::usage(format!(
            "unknown regime {other:?} (expected observational or trial)"
        ))),
    }
}

fn source_of(regime: Regime) -> DataSource {
    match regime {
        Regime::Observational => DataSource::Observational,
        Regime::Trial => DataSource::Trial,
    }
}

/// Renders a tree as indented text using the dataset's feature names.
fn describe_tree(tree: &FrugalTree, schema: &CovariateSchema) -> String {
    fn action_name(a: bool) -> &'static str {
        if a {
            "treat"
        } else {
            "control"
        }
    }
    let mut out = String::new();
    for (i, rule) in tree.rules().iter().enumerate() {
        let feature = rule.predicate.feature();
        let test = match rule.predicate.test() {
            PredicateTest::LessThan(threshold) => format!("{feature} < {threshold}"),
            PredicateTest::InSet(set) => {
                let codes: Vec<&str> = match schema
                    .index_of(feature)
                    .map(|col| schema.kind(col))
                {
                    Some(CovariateKind::Categorical(codes)) => set
                        .iter()
                        .filter_map(|&idx| codes.get(idx).map(String::as_str))
                        .collect(),
                    _ => Vec::new(),
                };
                format!("{feature} in {{{}}}", codes.join(", "))
            }
        };
        let condition = if rule.exit_on { test } else { format!("not ({test})") };
        out.push_str(&format!(
            "rule {}: if {condition} -> {}\n",
            i + 1,
            action_name(rule.exit_action)
        ));
    }
    out.push_str(&format!("otherwise -> {}\n", action_name(tree.default_action())));
    out
}

pub fn simulate(args: SimulateArgs, file: &FileConfig) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let scenario = parse_scenario(&r.required("scenario", args.scenario)?)?;
    let n = r.value("n", args.n, 2000)?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let with_confounder = r.flag("with-confounder", args.with_confounder)?;
    let out = r.required_path("out", args.out)?;

    if n == 0 {
        return Err(CliError::usage("--n must be >= 1"));
    }
    if with_confounder && scenario != Scenario::ObsConfounded {
        return Err(CliError::usage(
            "--with-confounder applies only to the obs-confounded scenario",
        ));
    }

    let dataset = if with_confounder {
        scenario.sample_with_confounder(n, seed)?
    } else {
        scenario.sample_dataset(n, seed)?
    };

    ensure_out_dir(&out)?;
    dataset.save_csv(out.join("dataset.csv"), "action", "loss")?;
    dataset.schema().save(out.join("dataset.schema"))?;
    write_meta(&out, "simulate", r.resolved(), &["dataset.csv", "dataset.schema"])?;
    println!(
        "wrote {} samples ({scenario}) to {}",
        dataset.len(),
        out.display()
    );
    Ok(())
}

/// Builds the nominal model for a dataset: observational regimes fit a
/// logistic assignment model on the learning split; trial regimes use unit
/// nominal non-enrollment odds with an overridable marginal enrollment
/// ratio and (by default) the empirical treated fraction.
fn nominal_model_for(
    regime: Regime,
    fit_data: &Dataset,
    full_data: &Dataset,
    marginal_ratio: f64,
    p_treat: Option<f64>,
) -> Result<NominalModel, CliError> {
    match regime {
        Regime::Observational => {
            let features: Vec<String> = fit_data
                .schema()
                .entries()
                .iter()
                .map(|(name, _)| name.clone())
                .collect();
            let fit = fit_logistic(fit_data, &features, Target::Action)?;
            if !fit.converged() {
                return Err(CliError::runtime(
                    "nominal assignment model did not converge; \
                     check the dataset for separation or constant columns",
                ));
            }
            Ok(NominalModel::Observational(fit.assignment_model()))
        }
        Regime::Trial => {
            let p_treat = match p_treat {
                Some(p) => p,
                None => {
                    let treated = full_data.samples().iter().filter(|s| s.action).count();
                    treated as f64 / full_data.len() as f64
                }
            };
            let selection = NominalSelectionModel::new(|_: &[f64]| 1.0, marginal_ratio, p_treat)?;
            Ok(NominalModel::Trial(selection))
        }
    }
}

pub fn learn(args: LearnArgs, file: &FileConfig) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let data_path = r.required_path("data", args.data)?;
    let schema_path = r.required_path("schema", args.schema)?;
    let regime = parse_regime(&r.value("regime", args.regime, "observational".into())?)?;
    let action_col = r.value("action-col", args.action_col, "action".into())?;
    let loss_col = r.value("loss-col", args.loss_col, "loss".into())?;
    let tau = r.required::<f64>("tau", args.tau)?;
    let gamma = r.value("gamma", args.gamma, 1.0)?;
    let alpha = r.value("alpha", args.alpha, 0.1)?;
    let method = parse_method(&r.value("method", args.method, "high-prob".into())?)?;
    let preset = r.optional::<String>("preset", args.preset)?;
    let (default_depth, default_grid_count, default_grid_hi) = match preset.as_deref() {
        Some("star") => (3, 100, 0.8),
        Some(other) => {
            return Err(CliError::usage(format!(
                "unknown preset {other:?} (expected star)"
            )))
        }
        None => (1, 200, 0.5),
    };
    let depth = r.value("depth", args.depth, default_depth)?;
    let grid_count = r.value("grid-count", args.grid_count, default_grid_count)?;
    let grid_hi = r.value("grid-hi", args.grid_hi, default_grid_hi)?;
    let bins = r.value("bins", args.bins, 200)?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let default_split = match method {
        Method::HighProb => "0.5,0.5",
        Method::Average => "0.5,0.1,0.4",
    };
    let split_raw = r.value("split", args.split, default_split.into())?;
    let marginal_ratio = r.value("marginal-ratio", args.marginal_ratio, 1.0)?;
    let p_treat = r.optional::<f64>("p-treat", args.p_treat)?;
    let out = r.required_path("out", args.out)?;

    if !(tau > 0.0 && tau < 1.0) {
        return Err(CliError::usage(format!("--tau {tau} outside (0, 1)")));
    }
    let fractions: Vec<f64> = parse_list(&split_raw, "split")?;
    let expected_parts = match method {
        Method::HighProb => 2,
        Method::Average => 3,
    };
    if fractions.len() != expected_parts {
        return Err(CliError::usage(format!(
            "method {method} needs {expected_parts} split fractions, got {}",
            fractions.len()
        )));
    }

    let schema = Arc::new(CovariateSchema::load(&schema_path)?);
    let full = Dataset::load_csv(
        &data_path,
        schema.clone(),
        &action_col,
        &loss_col,
        source_of(regime),
    )?;

    let spec = SplitSpec::new(fractions, seed)?;
    let parts = full.split(&spec)?;
    let d_m = &parts[0];
    let d_n = parts.last().expect("split produced parts");

    let model = nominal_model_for(regime, d_m, &full, marginal_ratio, p_treat)?;
    let cfg = MiscalibrationConfig::new(gamma)?;
    let grid = ToleranceGrid::equally_spaced(grid_count, grid_hi)?;

    let policies = sweep(d_m, &grid, &model, cfg, depth, bins)?;
    let path = evaluate_path(&policies, d_n, &model, cfg, alpha)?;
    let result: CalibrationResult = match method {
        Method::HighProb => select_high_prob(&path, tau),
        Method::Average => select_average(&path, &parts[1], &model, cfg, tau, alpha)?,
    };

    // In-sample slack: the weighted treatment-risk estimate of the chosen
    // policy on the learning split, compared against the cap.
    let actions = result.policy.actions(d_m);
    let in_sample = treatment_risk_stats(d_m, &actions, &model, cfg)?;
    let slack = tau - in_sample.mean;

    ensure_out_dir(&out)?;
    fs::write(out.join("policy.json"), result.to_json(&schema)? + "\n")?;
    let diag_file = fs::File::create(out.join("diagnostics.csv"))?;
    result.write_diagnostics_csv(diag_file)?;

    let mut summary = String::new();
    summary.push_str(&format!("feasible: {}\n", result.feasible));
    match result.t_n {
        Some(t_n) => summary.push_str(&format!("selected tolerance: {t_n}\n")),
        None => summary.push_str("selected tolerance: none (treat-none fallback)\n"),
    }
    summary.push_str(&format!(
        "in-sample treatment risk: {:.6} (cap {tau}, slack {slack:.6})\n",
        in_sample.mean
    ));
    summary.push_str(&format!("treated fraction (learning split): {:.6}\n", in_sample.rho_hat));
    summary.push_str("policy:\n");
    summary.push_str(&describe_tree(&result.policy, &schema));
    fs::write(out.join("summary.txt"), &summary)?;
    write_meta(
        &out,
        "learn",
        r.resolved(),
        &["policy.json", "diagnostics.csv", "summary.txt"],
    )?;
    print!("{summary}");
    Ok(())
}

pub fn evaluate(args: EvaluateArgs, file: &FileConfig) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let policy_path = r.required_path("policy", args.policy)?;
    let data_path = r.optional_path("data", args.data)?;
    let scenario_raw = r.optional::<String>("scenario", args.scenario)?;

    let policy_text = fs::read_to_string(&policy_path)
        .map_err(|err| CliError::usage(format!("cannot read {}: {err}", policy_path.display())))?;

    let (report, label) = match (&data_path, &scenario_raw) {
        (Some(data_path), None) => {
            let schema_path = r.required_path("schema", args.schema)?;
            let regime = parse_regime(&r.value("regime", args.regime, "observational".into())?)?;
            let action_col = r.value("action-col", args.action_col, "action".into())?;
            let loss_col = r.value("loss-col", args.loss_col, "loss".into())?;
            let gamma = r.value("gamma", args.gamma, 1.0)?;
            let marginal_ratio = r.value("marginal-ratio", args.marginal_ratio, 1.0)?;
            let p_treat = r.optional::<f64>("p-treat", args.p_treat)?;

            let schema = Arc::new(CovariateSchema::load(schema_path)?);
            let data = Dataset::load_csv(
                data_path,
                schema.clone(),
                &action_col,
                &loss_col,
                source_of(regime),
            )?;
            let tree = load_policy(&policy_text, &schema)?;
            let model = nominal_model_for(regime, &data, &data, marginal_ratio, p_treat)?;
            let cfg = MiscalibrationConfig::new(gamma)?;
            let actions = tree.actions(&data);
            let r_hat = population_risk_estimate(&data, &actions, &model, cfg)?;
            let stats = treatment_risk_stats(&data, &actions, &model, cfg)?;
            let report = serde_json::json!({
                "mode": "dataset",
                "n": stats.n,
                "population_risk": r_hat,
                "treatment_risk": stats.mean,
                "treated_fraction": stats.rho_hat,
            });
            let label = format!(
                "population risk {r_hat:.6}, treatment risk {:.6}, treated fraction {:.6} \
                 (n = {})",
                stats.mean, stats.rho_hat, stats.n
            );
            (report, label)
        }
        (None, Some(scenario_raw)) => {
            let scenario = parse_scenario(scenario_raw)?;
            let precision = r.value("precision", args.precision, 18_000usize)?;
            let seed = r.optional::<u64>("seed", args.seed)?;
            let schema = Scenario::covariate_schema();
            let tree = load_policy(&policy_text, &schema)?;
            let truth = match seed {
                Some(seed) => true_risks_seeded(scenario, &tree, precision, seed),
                None => true_risks(scenario, &tree, precision),
            };
            let report = serde_json::json!({
                "mode": "scenario",
                "scenario": scenario.to_string(),
                "truth": truth,
            });
            let label = format!(
                "true population risk {:.6} (se {:.1e}), true treatment risk {:.6} (se {:.1e}), \
                 treated fraction {:.6}",
                truth.r_true, truth.se_r, truth.t_true, truth.se_t, truth.rho_true
            );
            (report, label)
        }
        _ => {
            return Err(CliError::usage(
                "pass exactly one of --data (with --schema) or --scenario",
            ))
        }
    };

    if let Some(out) = r.optional_path("out", args.out)? {
        ensure_out_dir(&out)?;
        fs::write(
            out.join("report.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
        write_meta(&out, "evaluate", r.resolved(), &["report.json"])?;
    }
    println!("{label}");
    Ok(())
}

fn load_policy(text: &str, schema: &CovariateSchema) -> Result<FrugalTree, CliError> {
    // Accept either a bare policy document or a calibration result that
    // embeds one under "policy".
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|err| CliError::usage(format!("policy file is not valid JSON: {err}")))?;
    let policy_value = value.get("policy").unwrap_or(&value);
    let policy_text = serde_json::to_string(policy_value)?;
    Ok(FrugalTree::from_json(&policy_text, schema)?)
}

pub fn mc_eval(args: McEvalArgs, file: &FileConfig) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let scenario = parse_scenario(&r.required("scenario", args.scenario)?)?;
    let method = parse_method(&r.value("method", args.method, "high-prob".into())?)?;
    let gamma = r.value("gamma", args.gamma, 1.0)?;
    let alpha = r.value("alpha", args.alpha, 0.1)?;
    let taus_raw = r.value(
        "taus",
        args.taus,
        "0.05,0.10,0.15,0.20,0.25,0.30,0.35,0.40".into(),
    )?;
    let default_sizes = match method {
        Method::HighProb => "1000,1000",
        Method::Average => "1000,200,800",
    };
    let sizes_raw = r.value("sizes", args.sizes, default_sizes.into())?;
    let reps = r.value("reps", args.reps, 200)?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let grid_count = r.value("grid-count", args.grid_count, 200)?;
    let grid_hi = r.value("grid-hi", args.grid_hi, 0.5)?;
    let depth = r.value("depth", args.depth, 1)?;
    let bins = r.value("bins", args.bins, 200)?;
    let precision = r.value("precision", args.precision, 18_000usize)?;
    let out = r.required_path("out", args.out)?;

    let taus: Vec<f64> = parse_list(&taus_raw, "taus")?;
    let sizes: Vec<usize> = parse_list(&sizes_raw, "sizes")?;
    let grid = ToleranceGrid::equally_spaced(grid_count, grid_hi)?;
    let config = McConfig::new(scenario, taus, method, gamma, alpha, sizes, reps, seed)?
        .with_sweep_grid(grid)
        .with_max_depth(depth)?
        .with_bins(bins)?
        .with_eval_precision(precision)?;

    let table = mc_experiment(&config)?;

    ensure_out_dir(&out)?;
    let csv_file = fs::File::create(out.join("mc.csv"))?;
    table.write_csv(csv_file)?;
    write_meta(&out, "mc-eval", r.resolved(), &["mc.csv"])?;
    for row in table.rows() {
        println!(
            "tau {:.3}: coverage {:.3}, mean true treatment risk {:.4}, \
             mean true population risk {:.4}",
            row.tau, row.coverage, row.mean_t_true, row.mean_r_true
        );
    }
    Ok(())
}

pub fn benchmark_gamma(args: BenchmarkGammaArgs, file: &FileConfig) -> Result<(), CliError> {
    let mut r = Resolver::new(file);
    let data_path = r.required_path("data", args.data)?;
    let schema_path = r.required_path("schema", args.schema)?;
    let action_col = r.value("action-col", args.action_col, "action".into())?;
    let loss_col = r.value("loss-col", args.loss_col, "loss".into())?;
    let n_bins = r.value("n-bins", args.n_bins, 5)?;
    let quantile = r.value("quantile", args.quantile, 0.95)?;
    let out = r.required_path("out", args.out)?;

    let schema = Arc::new(CovariateSchema::load(&schema_path)?);
    let data = Dataset::load_csv(
        &data_path,
        schema.clone(),
        &action_col,
        &loss_col,
        DataSource::Observational,
    )?;
    let features: Vec<String> = schema
        .entries()
        .iter()
        .map(|(name, _)| name.clone())
        .collect();

    let full = fit_logistic(&data, &features, Target::Action)?;
    if !full.converged() {
        return Err(CliError::runtime(
            "nominal assignment model did not converge; cannot benchmark calibration",
        ));
    }

    ensure_out_dir(&out)?;
    let bins = reliability_bins(&data, &full, n_bins)?;
    let reliability_file = fs::File::create(out.join("reliability.csv"))?;
    write_reliability_csv(&bins, reliability_file)?;

    let mut outputs: Vec<String> = vec!["reliability.csv".into(), "gamma.json".into()];
    let mut suggestions: BTreeMap<String, f64> = BTreeMap::new();
    for feature in &features {
        let report = omitted_covariate_ratios(&data, feature, &features)?;
        if !report.reduced.converged() {
            return Err(CliError::runtime(format!(
                "assignment model without {feature} did not converge"
            )));
        }
        let suggestion = suggest_gamma(&report.ratios, quantile)?;
        let abs_log: Vec<f64> = report.ratios.iter().map(|&v| v.ln().abs().exp()).collect();
        let name = format!("ratios_{feature}.csv");
        let ecdf_file = fs::File::create(out.join(&name))?;
        write_ratio_ecdf_csv(&abs_log, ecdf_file)?;
        outputs.push(name);
        suggestions.insert(feature.clone(), suggestion);
    }

    fs::write(
        out.join("gamma.json"),
        serde_json::to_string_pretty(&suggestions)? + "\n",
    )?;
    let output_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_meta(&out, "benchmark-gamma", r.resolved(), &output_refs)?;
    for (feature, suggestion) in &suggestions {
        println!("omit {feature}: suggested miscalibration factor {suggestion:.4}");
    }
    Ok(())
}
