//! The four pipeline commands. Each writes its artifacts plus a manifest
//! and prints a short human-readable summary.

use std::path::Path;

use serde::Serialize;

use tracklab_core::config::AppConfig;
use tracklab_core::elm::ElmModel;
use tracklab_core::io;
use tracklab_core::sim::{
    collect_training_data, compute_metrics, run_closed_loop, split_dataset, Metrics, SimLog,
};
use tracklab_core::Error as CoreError;

use crate::manifest::{file_ref, scenario_fingerprint, RunManifest, Seeds, TOOL_VERSION};
use crate::plot::{line_chart, series_csv, Series, PALETTE};

/// Process outcome with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Wrong invocation (exit 1).
    Usage(String),
    /// Bad configuration or data files (exit 2).
    Data(String),
    /// Simulation aborted on plant divergence (exit 3).
    Abort(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Abort(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Abort(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(format!("{e:#}"))
    }
}

pub type CmdResult = Result<(), CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulateMode {
    MpcOnly,
    Compensated,
}

impl SimulateMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimulateMode::MpcOnly => "mpc_only",
            SimulateMode::Compensated => "compensated",
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<AppConfig, CliError> {
    let mut config = AppConfig::load(path).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(seed) = seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn seeds(config: &AppConfig) -> Seeds {
    Seeds {
        elm: config.elm.seed,
        split: config.collect.split_seed,
    }
}

/// Run the collection plan and write the training dataset.
pub fn cmd_collect(config_path: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let config = load_config(config_path, seed)?;
    let scenarios = config.collect_scenarios()?;
    let mpc = config.mpc.to_config();
    let collection = collect_training_data(&scenarios, &mpc)?;
    for warning in &collection.warnings {
        eprintln!("warning: {warning}");
    }
    io::write_dataset_csv(out, &collection.samples)?;

    let manifest = RunManifest {
        command: "collect".to_string(),
        tool_version: TOOL_VERSION.to_string(),
        scenario_fingerprint: Some(scenario_fingerprint(&config)?),
        seeds: seeds(&config),
        mode: None,
        inputs: vec![file_ref(config_path)?],
        outputs: vec![file_ref(out)?],
    };
    manifest.write_next_to(out)?;

    println!(
        "collected {} samples from {} scenarios -> {}",
        collection.samples.len(),
        scenarios.len(),
        out.display()
    );
    Ok(())
}

/// Train the estimator on a dataset and report held-out quality.
pub fn cmd_train(config_path: &Path, dataset: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let config = load_config(config_path, seed)?;
    let samples = io::read_dataset_csv(dataset)?;
    let (train, test) = split_dataset(
        &samples,
        config.collect.test_samples,
        config.collect.split_seed,
    )?;

    let mut model = ElmModel::new(&config.elm)?;
    model.train(&train, config.elm.regularization)?;
    model.save(out).map_err(|e| CliError::Data(e.to_string()))?;

    let train_metrics = model.evaluate(&train)?;
    let test_metrics = model.evaluate(&test)?;
    println!("split: {} train / {} test", train.len(), test.len());
    println!(
        "train rmse {:.6e} m | test rmse {:.6e} m, max {:.6e} m, r2 {:.4}",
        train_metrics.rmse, test_metrics.rmse, test_metrics.max_abs_error, test_metrics.r_squared
    );

    let manifest = RunManifest {
        command: "train".to_string(),
        tool_version: TOOL_VERSION.to_string(),
        scenario_fingerprint: Some(scenario_fingerprint(&config)?),
        seeds: seeds(&config),
        mode: None,
        inputs: vec![file_ref(config_path)?, file_ref(dataset)?],
        outputs: vec![file_ref(out)?],
    };
    manifest.write_next_to(out)?;
    println!("model -> {}", out.display());
    Ok(())
}

/// Run the evaluation scenario and write the log (CSV plus compact binary).
pub fn cmd_simulate(
    config_path: &Path,
    mode: SimulateMode,
    model_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    landmarks: &[f64],
) -> CmdResult {
    let config = load_config(config_path, seed)?;
    let scenario = config.scenario()?;
    let mpc = config.mpc.to_config();

    let log = match mode {
        SimulateMode::MpcOnly => run_closed_loop(&scenario, &mpc, None, None)?,
        SimulateMode::Compensated => {
            let model_path = model_path.ok_or_else(|| {
                CliError::Usage("--model is required in compensated mode".to_string())
            })?;
            let model = ElmModel::load(model_path)?;
            run_closed_loop(&scenario, &mpc, Some(&config.pid), Some(&model))?
        }
    };

    io::write_log_csv(out, &log)?;
    io::write_log_binary(&out.with_extension("bin"), &log)?;

    let mut inputs = vec![file_ref(config_path)?];
    if let (SimulateMode::Compensated, Some(mp)) = (mode, model_path) {
        inputs.push(file_ref(mp)?);
    }
    let manifest = RunManifest {
        command: "simulate".to_string(),
        tool_version: TOOL_VERSION.to_string(),
        scenario_fingerprint: Some(scenario_fingerprint(&config)?),
        seeds: seeds(&config),
        mode: Some(mode.as_str().to_string()),
        inputs,
        outputs: vec![file_ref(out)?, file_ref(&out.with_extension("bin"))?],
    };
    manifest.write_next_to(out)?;

    let metrics = compute_metrics(&log, None, landmarks)?;
    print_metrics(mode.as_str(), &metrics);
    println!("log -> {}", out.display());

    if let Some(reason) = &log.abort {
        return Err(CliError::Abort(format!("simulation aborted: {reason}")));
    }
    Ok(())
}

fn print_metrics(tag: &str, m: &Metrics) {
    println!(
        "[{tag}] lateral rms {:.4} m, max {:.4} m | heading rms {:.5} rad, max {:.5} rad | max |u*| {:.4} rad",
        m.rms_lateral_error, m.max_lateral_error, m.rms_heading_error, m.max_heading_error, m.max_steering
    );
    for l in &m.landmark_errors {
        match l.lateral_error {
            Some(e) => println!("[{tag}] lateral error at x = {} m: {:+.4} m", l.x, e),
            None => println!("[{tag}] lateral error at x = {} m: not traversed", l.x),
        }
    }
}

#[derive(Serialize)]
struct LandmarkComparison {
    x: f64,
    baseline: Option<f64>,
    candidate: Option<f64>,
    reduction_pct: Option<f64>,
}

#[derive(Serialize)]
struct CompareReport {
    baseline: Metrics,
    candidate: Metrics,
    landmarks: Vec<LandmarkComparison>,
}

/// Compare two logs of the same scenario and emit the report + plots.
pub fn cmd_compare(
    baseline_path: &Path,
    candidate_path: &Path,
    out_dir: &Path,
    landmarks: &[f64],
) -> CmdResult {
    let base_manifest = RunManifest::load_for(baseline_path)?;
    let cand_manifest = RunManifest::load_for(candidate_path)?;
    match (
        &base_manifest.scenario_fingerprint,
        &cand_manifest.scenario_fingerprint,
    ) {
        (Some(a), Some(b)) if a == b => {}
        (Some(_), Some(_)) => {
            return Err(CliError::Data(
                "refusing to compare: the two logs come from different scenarios \
                 (manifest fingerprints differ)"
                    .to_string(),
            ))
        }
        _ => {
            return Err(CliError::Data(
                "refusing to compare: manifests carry no scenario fingerprint".to_string(),
            ))
        }
    }

    let baseline = io::read_log_csv(baseline_path)?;
    let candidate = io::read_log_csv(candidate_path)?;
    let base_metrics = compute_metrics(&baseline, None, landmarks)?;
    let cand_metrics = compute_metrics(&candidate, Some(&baseline), landmarks)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;

    let landmark_rows: Vec<LandmarkComparison> = landmarks
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let b = base_metrics.landmark_errors[i].lateral_error;
            let c = cand_metrics.landmark_errors[i].lateral_error;
            let reduction = match (b, c) {
                (Some(b), Some(c)) if b.abs() > 0.0 => Some((b.abs() - c.abs()) / b.abs() * 100.0),
                _ => None,
            };
            LandmarkComparison {
                x,
                baseline: b,
                candidate: c,
                reduction_pct: reduction,
            }
        })
        .collect();

    let report = CompareReport {
        baseline: base_metrics.clone(),
        candidate: cand_metrics.clone(),
        landmarks: landmark_rows,
    };
    let report_path = out_dir.join("report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;

    // the four standard charts
    let charts = build_charts(&baseline, &candidate);
    let mut outputs = vec![file_ref(&report_path)?];
    for (name, title, x_label, y_label, series) in charts {
        let svg_path = out_dir.join(format!("{name}.svg"));
        std::fs::write(&svg_path, line_chart(title, x_label, y_label, &series))
            .map_err(|e| CliError::Data(e.to_string()))?;
        let csv_path = out_dir.join(format!("{name}.csv"));
        std::fs::write(&csv_path, series_csv(&series))
            .map_err(|e| CliError::Data(e.to_string()))?;
        outputs.push(file_ref(&svg_path)?);
        outputs.push(file_ref(&csv_path)?);
    }

    let manifest = RunManifest {
        command: "compare".to_string(),
        tool_version: TOOL_VERSION.to_string(),
        scenario_fingerprint: base_manifest.scenario_fingerprint.clone(),
        seeds: base_manifest.seeds.clone(),
        mode: None,
        inputs: vec![file_ref(baseline_path)?, file_ref(candidate_path)?],
        outputs,
    };
    manifest.write_next_to(&report_path)?;

    print_metrics("baseline", &report.baseline);
    print_metrics("candidate", &report.candidate);
    if let Some(reduction) = &report.candidate.reduction {
        println!(
            "reduction vs baseline: peak lateral {:+.1}%, rms lateral {:+.1}%",
            reduction.peak_lateral_pct, reduction.rms_lateral_pct
        );
    }
    for l in &report.landmarks {
        if let (Some(b), Some(c), Some(r)) = (l.baseline, l.candidate, l.reduction_pct) {
            println!(
                "at x = {} m: baseline {:+.4} m, candidate {:+.4} m ({:+.1}% reduction)",
                l.x, b, c, r
            );
        }
    }
    println!("report -> {}", out_dir.display());
    Ok(())
}

type Chart<'a> = (
    &'static str,
    &'static str,
    &'static str,
    &'static str,
    Vec<Series<'a>>,
);

fn build_charts<'a>(baseline: &'a SimLog, candidate: &'a SimLog) -> Vec<Chart<'a>> {
    let by_x = |log: &SimLog, f: fn(&tracklab_core::sim::LogRecord) -> f64| -> Vec<(f64, f64)> {
        log.records.iter().map(|r| (r.state.x, f(r))).collect()
    };
    let by_t = |log: &SimLog, f: fn(&tracklab_core::sim::LogRecord) -> f64| -> Vec<(f64, f64)> {
        log.records.iter().map(|r| (r.time, f(r))).collect()
    };
    vec![
        (
            "trajectories",
            "Path tracking trajectories",
            "x [m]",
            "y [m]",
            vec![
                Series {
                    label: "reference",
                    color: PALETTE[0],
                    points: by_x(baseline, |r| r.reference_y),
                },
                Series {
                    label: "baseline",
                    color: PALETTE[1],
                    points: by_x(baseline, |r| r.state.y),
                },
                Series {
                    label: "candidate",
                    color: PALETTE[2],
                    points: by_x(candidate, |r| r.state.y),
                },
            ],
        ),
        (
            "headings",
            "Heading angles",
            "x [m]",
            "heading [rad]",
            vec![
                Series {
                    label: "reference",
                    color: PALETTE[0],
                    points: by_x(baseline, |r| r.reference_heading),
                },
                Series {
                    label: "baseline",
                    color: PALETTE[1],
                    points: by_x(baseline, |r| r.state.heading),
                },
                Series {
                    label: "candidate",
                    color: PALETTE[2],
                    points: by_x(candidate, |r| r.state.heading),
                },
            ],
        ),
        (
            "steering",
            "Applied steering command",
            "time [s]",
            "u* [rad]",
            vec![
                Series {
                    label: "baseline",
                    color: PALETTE[1],
                    points: by_t(baseline, |r| r.applied_command),
                },
                Series {
                    label: "candidate",
                    color: PALETTE[2],
                    points: by_t(candidate, |r| r.applied_command),
                },
            ],
        ),
        (
            "predictive_error",
            "Predictive error: realized vs estimated (candidate)",
            "time [s]",
            "error [m]",
            vec![
                Series {
                    label: "realized",
                    color: PALETTE[0],
                    points: by_t(candidate, |r| r.realized_error),
                },
                Series {
                    label: "estimated",
                    color: PALETTE[3],
                    points: by_t(candidate, |r| r.estimated_error),
                },
            ],
        ),
    ]
}
