//! Scenario runner: single runs, parameter sweeps and trace re-analysis.
//!
//! Exit status is the only failure channel: 1 for unreadable or invalid input,
//! 2 when a simulation or output step fails.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::Error;
use crate::geometry::Vec2;
use crate::scenario::Scenario;
use crate::simulator::{self, summarize, Metrics, MetricsConfig, Trace};

pub const SEED_ENV: &str = "SLIDE_DS_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Simulation(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Scenario(_) | Error::InvalidParameter { .. } => CliError::Parse(e.to_string()),
            other => CliError::Simulation(other.to_string()),
        }
    }
}

fn output_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Simulation(format!("{}: {e}", path.display()))
}

pub fn read_document(path: &Path) -> Result<Value, CliError> {
    let file = File::open(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Deserialize and validate. Messages carry the dotted path of the bad key.
pub fn parse_scenario(doc: &Value) -> Result<Scenario, CliError> {
    let scenario: Scenario = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Parse(e.inner().to_string())
        } else {
            CliError::Parse(format!("{path}: {}", e.inner()))
        }
    })?;
    scenario.validate().map_err(CliError::from)?;
    Ok(scenario)
}

/// Replace the value at a dotted path (`obstacles.0.radius_meters`). Intermediate
/// keys must exist; the final key may be new so defaulted fields can be swept.
pub fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    let missing = |depth: usize| {
        CliError::Parse(format!(
            "override key `{key}`: `{}` not found",
            parts[..=depth].join(".")
        ))
    };
    let (leaf, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = doc;
    for (depth, part) in parents.iter().enumerate() {
        cur = match cur {
            Value::Object(map) => map.get_mut(*part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| missing(depth))?;
    }
    match cur {
        Value::Object(map) => {
            map.insert(leaf.to_string(), value);
        }
        Value::Array(items) => {
            let slot = leaf
                .parse::<usize>()
                .ok()
                .and_then(|i| items.get_mut(i))
                .ok_or_else(|| missing(parents.len()))?;
            *slot = value;
        }
        _ => return Err(missing(parents.len())),
    }
    Ok(())
}

fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|e| CliError::Parse(format!("{SEED_ENV}: {e}"))),
        Err(_) => Ok(None),
    }
}

pub fn metrics_config(scenario: &Scenario) -> MetricsConfig {
    MetricsConfig {
        f_n_limit: scenario.controller.f_n_limit,
        attractor: Some(scenario.attractor.attractor),
        planner_offset: scenario.planner.offset_meters,
        singular_angle: scenario.kinematics.singular_angle,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxisArg {
    pub key: String,
    pub values: Vec<Value>,
}

/// Parse `key=v1,v2,...`. Values are read as JSON when possible, else as strings.
pub fn parse_axis(arg: &str) -> Result<SweepAxisArg, CliError> {
    let (key, list) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("axis `{arg}`: expected key=v1,v2,...")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Parse(format!("axis `{arg}`: empty key")));
    }
    let values: Vec<Value> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
        .collect();
    if values.is_empty() {
        return Err(CliError::Parse(format!("axis `{key}`: no values")));
    }
    Ok(SweepAxisArg {
        key: key.to_string(),
        values,
    })
}

/// One cell of the Cartesian product of sweep axes.
#[derive(Debug, Clone)]
pub struct Condition {
    pub label: String,
    pub assignments: Vec<(String, Value)>,
}

pub fn expand_axes(axes: &[SweepAxisArg]) -> Vec<Condition> {
    let mut out = vec![Condition {
        label: String::new(),
        assignments: vec![],
    }];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|c| {
                axis.values.iter().map(move |v| {
                    let mut next = c.clone();
                    let text = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    if !next.label.is_empty() {
                        next.label.push(' ');
                    }
                    next.label.push_str(&format!("{}={text}", axis.key));
                    next.assignments.push((axis.key.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub condition: usize,
    pub label: String,
    pub repetition: usize,
    pub seed: u64,
    pub dir: PathBuf,
    pub metrics: Metrics,
}

/// Write trace, metrics and plot data for one simulated scenario.
pub fn write_run(scenario: &Scenario, trace: &Trace, dir: &Path) -> Result<Metrics, CliError> {
    fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
    let trace_path = dir.join("trace.csv");
    let file = File::create(&trace_path).map_err(|e| output_err(&trace_path, e))?;
    trace
        .write_csv(BufWriter::new(file))
        .map_err(|e| output_err(&trace_path, e))?;

    let metrics = summarize(trace, &metrics_config(scenario))?;
    let metrics_path = dir.join("metrics.json");
    write_json(&metrics_path, &metrics)?;

    let plot_path = dir.join("plot_data.csv");
    write_plot_data(scenario, trace, &plot_path)?;
    Ok(metrics)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| output_err(path, e))
}

/// Force magnitude over time plus the axle and planner-point trajectories.
fn write_plot_data(scenario: &Scenario, trace: &Trace, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let offset = scenario.planner.offset_meters;
    w.write_record([
        "t",
        "force_newtons",
        "x",
        "y",
        "planner_x",
        "planner_y",
        "engaged_contact",
    ])
    .map_err(|e| output_err(path, e))?;
    for r in trace.records() {
        let p = r.position() + Vec2::new(r.theta.cos(), r.theta.sin()) * offset;
        w.write_record([
            r.t.to_string(),
            r.force_norm().to_string(),
            r.x.to_string(),
            r.y.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            u8::from(r.estimate.in_contact).to_string(),
        ])
        .map_err(|e| output_err(path, e))?;
    }
    w.flush().map_err(|e| output_err(path, e))
}

/// `run <scenario> --out <dir>`. A scenario carrying a `sweep` block runs every condition.
pub fn run_scenario(path: &Path, out_dir: &Path) -> Result<Vec<RunResult>, CliError> {
    let doc = read_document(path)?;
    let scenario = parse_scenario(&doc)?;
    match &scenario.sweep {
        Some(sweep) => {
            let axes: Vec<SweepAxisArg> = sweep
                .axes
                .iter()
                .map(|a| SweepAxisArg {
                    key: a.key.clone(),
                    values: a.values.clone(),
                })
                .collect();
            sweep_document(&doc, &axes, sweep.repetitions, out_dir)
        }
        None => sweep_document(&doc, &[], 1, out_dir),
    }
}

/// `sweep <scenario> --axis k=v1,v2 --reps N --out <dir>`.
pub fn sweep(
    path: &Path,
    axes: &[SweepAxisArg],
    repetitions: usize,
    out_dir: &Path,
) -> Result<Vec<RunResult>, CliError> {
    if axes.is_empty() {
        return Err(CliError::Parse(
            "sweep: at least one --axis is required".into(),
        ));
    }
    if repetitions == 0 {
        return Err(CliError::Parse("sweep: --reps must be >= 1".into()));
    }
    let doc = read_document(path)?;
    parse_scenario(&doc)?;
    sweep_document(&doc, axes, repetitions, out_dir)
}

fn sweep_document(
    doc: &Value,
    axes: &[SweepAxisArg],
    repetitions: usize,
    out_dir: &Path,
) -> Result<Vec<RunResult>, CliError> {
    if axes.iter().any(|a| a.values.is_empty()) {
        return Err(CliError::Parse("sweep: axis with no values".into()));
    }
    let env_seed = seed_from_env()?;
    let conditions = expand_axes(axes);

    // Resolve every run up front so parse errors surface before any simulation.
    let mut jobs = Vec::new();
    for (ci, cond) in conditions.iter().enumerate() {
        let mut d = doc.clone();
        if let Value::Object(map) = &mut d {
            map.remove("sweep");
        }
        for (key, value) in &cond.assignments {
            set_path(&mut d, key, value.clone())?;
        }
        let base = parse_scenario(&d)?;
        let base_seed = env_seed.unwrap_or(base.sim.seed);
        for rep in 0..repetitions {
            let mut s = base.clone();
            s.sim.seed = base_seed.wrapping_add(rep as u64);
            let dir = if conditions.len() == 1 && repetitions == 1 {
                out_dir.to_path_buf()
            } else {
                out_dir.join(format!("cond{ci:02}_rep{rep:02}"))
            };
            jobs.push((ci, cond.label.clone(), rep, s, dir));
        }
    }

    let results: Vec<RunResult> = jobs
        .into_par_iter()
        .map(|(condition, label, repetition, s, dir)| {
            let trace = simulator::run(&s)
                .map_err(|e| CliError::Simulation(format!("{}: {e}", dir.display())))?;
            let metrics = write_run(&s, &trace, &dir)?;
            Ok(RunResult {
                condition,
                label,
                repetition,
                seed: s.sim.seed,
                dir,
                metrics,
            })
        })
        .collect::<Result<_, CliError>>()?;

    if conditions.len() > 1 || repetitions > 1 {
        write_aggregate(&conditions, &results, &out_dir.join("metrics.csv"))?;
    }
    Ok(results)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

type MetricFn = fn(&Metrics) -> Option<f64>;

const AGGREGATED: [(&str, MetricFn); 6] = [
    ("mean_slide_force_newtons", |m| m.mean_slide_force),
    ("std_slide_force_newtons", |m| m.std_slide_force),
    ("max_slide_force_newtons", |m| m.max_slide_force),
    ("peak_force_newtons", |m| Some(m.peak_force)),
    ("transient_time_seconds", |m| m.transient_time),
    ("attractor_error_meters", |m| m.attractor_error),
];

/// One row per condition with `mean` and `std` across repetitions for each metric.
pub fn write_aggregate(
    conditions: &[Condition],
    results: &[RunResult],
    path: &Path,
) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| output_err(parent, e))?;
    }
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["condition".to_string(), "runs".to_string()];
    for (name, _) in AGGREGATED {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
    }
    w.write_record(&header).map_err(|e| output_err(path, e))?;
    for (ci, cond) in conditions.iter().enumerate() {
        let runs: Vec<&RunResult> = results.iter().filter(|r| r.condition == ci).collect();
        let mut row = vec![cond.label.clone(), runs.len().to_string()];
        for (_, get) in AGGREGATED {
            let vals: Vec<f64> = runs.iter().filter_map(|r| get(&r.metrics)).collect();
            if vals.is_empty() {
                row.push(String::new());
                row.push(String::new());
            } else {
                let (m, s) = mean_std(&vals);
                row.push(m.to_string());
                row.push(s.to_string());
            }
        }
        w.write_record(&row).map_err(|e| output_err(path, e))?;
    }
    w.flush().map_err(|e| output_err(path, e))?;
    Ok(())
}

/// `metrics <trace.csv>`: recompute metrics from a written trace.
pub fn metrics_from_file(path: &Path, cfg: &MetricsConfig) -> Result<Metrics, CliError> {
    let file = File::open(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let trace = Trace::read_csv(BufReader::new(file))
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    if trace.is_empty() {
        return Err(CliError::Parse(format!(
            "{}: trace has no rows",
            path.display()
        )));
    }
    summarize(&trace, cfg).map_err(CliError::from)
}

pub fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer_pretty(&mut lock, value)
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    writeln!(lock).map_err(|e| CliError::Simulation(e.to_string()))
}
