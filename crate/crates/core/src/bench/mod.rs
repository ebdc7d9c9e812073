//! Reproduction experiments: initializer accuracy, convergence curves,
//! timing and success rates.
//!
//! Every experiment produces long-format rows
//! `experiment,method,n,m,trial,iter,metric,value` sorted by key, so the
//! primary CSV depends only on the configuration and never on the thread
//! count. Wall-clock times live in a separate `<experiment>_wall.csv`.

mod config;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentConfig, GridSpec, SolverKind, SUCCESS_THRESHOLD};

use crate::baselines::{altmin_solve, wf_solve, BaselineConfig};
use crate::error::{Error, Result};
use crate::init::{initialize, InitConfig, InitMethod};
use crate::linalg::{PowerConfig, Signal};
use crate::measure::ProblemInstance;
use crate::solver::{solve_gn, GnConfig};
use crate::trace::{relative_error, SolveTrace};
use svg::{LineChart, Series};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub n: usize,
    pub m: usize,
    /// Trial seed; empty on summary rows.
    pub trial: Option<u64>,
    pub iter: Option<usize>,
    pub metric: String,
    pub value: f64,
    #[serde(skip)]
    pub wall_ms: Option<f64>,
}

impl ResultRow {
    fn key(&self) -> (&str, usize, Option<u64>, Option<usize>, &str) {
        (&self.method, self.m, self.trial, self.iter, &self.metric)
    }
}

#[derive(Serialize)]
struct WallRow<'a> {
    experiment: &'a str,
    method: &'a str,
    n: usize,
    m: usize,
    trial: Option<u64>,
    iter: Option<usize>,
    metric: &'a str,
    wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    /// `(file stem, chart)`
    pub charts: Vec<(String, LineChart)>,
    /// Auxiliary files `(relative path, contents)`; not deterministic.
    pub extra_files: Vec<(String, String)>,
    pub elapsed_s: f64,
}

impl ExperimentReport {
    pub fn values<'a>(&'a self, method: &'a str, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method && r.metric == metric)
    }

    /// Value of the summary row for `(method, m, metric)`.
    pub fn summary(&self, method: &str, m: usize, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.m == m && r.metric == metric && r.trial.is_none())
            .map(|r| r.value)
    }

    pub fn primary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        into_string(w)
    }

    pub fn wall_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in self.rows.iter().filter(|r| r.wall_ms.is_some()) {
            w.serialize(WallRow {
                experiment: &r.experiment,
                method: &r.method,
                n: r.n,
                m: r.m,
                trial: r.trial,
                iter: r.iter,
                metric: &r.metric,
                wall_ms: r.wall_ms.unwrap_or(f64::NAN),
            })?;
        }
        into_string(w)
    }

    /// Write the CSVs, charts (when enabled), auxiliary files and
    /// `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let stem = self.config.experiment.name().replace('-', "_");
        let mut files = Vec::new();
        let mut put = |name: String, contents: &str| -> Result<()> {
            let path = dir.join(&name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, contents)?;
            files.push(path);
            Ok(())
        };
        put(format!("{stem}.csv"), &self.primary_csv()?)?;
        put(format!("{stem}_wall.csv"), &self.wall_csv()?)?;
        if self.config.emit_svg {
            for (name, chart) in &self.charts {
                put(format!("{name}.svg"), &chart.render())?;
            }
        }
        for (name, contents) in &self.extra_files {
            put(name.clone(), contents)?;
        }
        let manifest = Manifest {
            experiment: self.config.experiment,
            version: env!("CARGO_PKG_VERSION"),
            written_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            elapsed_s: self.elapsed_s,
            success_threshold_overridden: self.config.threshold_overridden(),
            rows: self.rows.len(),
            files: files.iter().filter_map(|p| p.strip_prefix(dir).ok()).map(|p| p.display().to_string()).collect(),
            config: &self.config,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        files.push(path);
        Ok(files)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: Experiment,
    version: &'static str,
    written_unix_s: u64,
    elapsed_s: f64,
    success_threshold_overridden: bool,
    rows: usize,
    files: Vec<String>,
    config: &'a ExperimentConfig,
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

/// Validate, run the configured experiment and write its outputs when
/// `out_dir` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = match cfg.experiment {
        Experiment::InitBench => run_init_bench(cfg)?,
        Experiment::Converge => run_converge(cfg)?,
        Experiment::Timing => run_timing(cfg)?,
        Experiment::Success => run_success(cfg)?,
    };
    if let Some(dir) = &cfg.out_dir {
        let files = report.write(dir)?;
        info!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(report)
}

fn expect(cfg: &ExperimentConfig, experiment: Experiment) -> Result<()> {
    if cfg.experiment != experiment {
        return Err(Error::Config(format!("configuration is for `{}`, not `{experiment}`", cfg.experiment)));
    }
    cfg.validate()
}

/// `(m, trial seed)` pairs in grid order.
fn work_items(cfg: &ExperimentConfig) -> Vec<(f64, usize, u64)> {
    let ms = cfg.m_over_n.measurements(cfg.n);
    let mut items = Vec::new();
    for (ratio, m) in cfg.m_over_n.values().iter().zip(ms) {
        for t in 0..cfg.trials as u64 {
            items.push((*ratio, m, cfg.seed.wrapping_add(t)));
        }
    }
    items
}

fn parallel<T: Send>(cfg: &ExperimentConfig, f: impl Fn(usize, u64) -> Vec<T> + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let items = work_items(cfg);
    let nested: Vec<Vec<T>> = pool.install(|| items.par_iter().map(|&(_, m, seed)| f(m, seed)).collect());
    Ok(nested.into_iter().flatten().collect())
}

fn row(cfg: &ExperimentConfig, method: &str, m: usize, trial: Option<u64>, iter: Option<usize>, metric: &str, value: f64) -> ResultRow {
    ResultRow {
        experiment: cfg.experiment.name().to_string(),
        method: method.to_string(),
        n: cfg.n,
        m,
        trial,
        iter,
        metric: metric.to_string(),
        value,
        wall_ms: None,
    }
}

fn finalize(cfg: &ExperimentConfig, mut rows: Vec<ResultRow>, charts: Vec<(String, LineChart)>, extra_files: Vec<(String, String)>, start: Instant) -> ExperimentReport {
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    ExperimentReport { config: cfg.clone(), rows, charts, extra_files, elapsed_s: start.elapsed().as_secs_f64() }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    if values.len() % 2 == 1 { values[k] } else { 0.5 * (values[k - 1] + values[k]) }
}

/// Append per-`(method, m)` means of `metric` as summary rows named `summary`.
fn add_means(cfg: &ExperimentConfig, rows: &mut Vec<ResultRow>, methods: &[String], metric: &str, summary: &str) {
    for method in methods {
        for m in cfg.m_over_n.measurements(cfg.n) {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| &r.method == method && r.m == m && r.metric == metric && r.trial.is_some())
                .map(|r| r.value)
                .collect();
            if !v.is_empty() {
                rows.push(row(cfg, method, m, None, None, summary, mean(&v)));
            }
        }
    }
}

fn ratio_chart(cfg: &ExperimentConfig, rows: &[ResultRow], methods: &[String], metric: &str, title: &str, y_label: &str) -> LineChart {
    let series = methods
        .iter()
        .map(|method| Series {
            label: method.clone(),
            points: cfg
                .m_over_n
                .values()
                .iter()
                .zip(cfg.m_over_n.measurements(cfg.n))
                .filter_map(|(ratio, m)| {
                    rows.iter()
                        .find(|r| &r.method == method && r.m == m && r.metric == metric && r.trial.is_none())
                        .map(|r| (*ratio, r.value))
                })
                .collect(),
        })
        .collect();
    LineChart { title: title.into(), x_label: "m/n".into(), y_label: y_label.into(), series }
}

fn init_config(cfg: &ExperimentConfig, method: InitMethod, seed: u64) -> InitConfig {
    InitConfig {
        seed,
        power: PowerConfig { iters: cfg.power_iters, ..PowerConfig::default() },
        ..InitConfig::new(method, cfg.signal_field)
    }
}

/// Relative error `dist(x0, z)/||z||` of every initializer against m/n.
/// Summary metric: `mean_rel_err`.
pub fn run_init_bench(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect(cfg, Experiment::InitBench)?;
    let start = Instant::now();
    let methods = cfg.init_methods()?;
    let mut rows = parallel(cfg, |m, seed| {
        let inst = match ProblemInstance::synthesize(m, cfg.n, cfg.ensemble_field, cfg.signal_field, cfg.noise_sigma, seed) {
            Ok(i) => i,
            Err(e) => {
                warn!("m={m} trial={seed}: {e}");
                return methods.iter().map(|me| row(cfg, me.name(), m, Some(seed), None, "rel_err", f64::NAN)).collect();
            }
        };
        methods
            .iter()
            .map(|&method| {
                let t0 = Instant::now();
                let result = initialize(&inst.ensemble, &inst.observations, &init_config(cfg, method, seed))
                    .and_then(|r| relative_error(&r.x0, &inst.signal));
                let wall = t0.elapsed().as_secs_f64() * 1e3;
                let value = result.unwrap_or_else(|e| {
                    warn!("{} m={m} trial={seed}: {e}", method.name());
                    f64::NAN
                });
                ResultRow { wall_ms: Some(wall), ..row(cfg, method.name(), m, Some(seed), None, "rel_err", value) }
            })
            .collect()
    })?;
    let names: Vec<String> = methods.iter().map(|m| m.name().to_string()).collect();
    add_means(cfg, &mut rows, &names, "rel_err", "mean_rel_err");
    let chart = ratio_chart(cfg, &rows, &names, "mean_rel_err", "Initializer accuracy", "mean dist(x0, z)/||z||");
    Ok(finalize(cfg, rows, vec![("init_bench".into(), chart)], Vec::new(), start))
}

/// One problem instance, the shared exponential-weighted start and every
/// requested solver's trace from that start.
#[derive(Debug)]
pub struct TrialRun {
    pub instance: ProblemInstance,
    pub x0: Result<Signal>,
    pub traces: Vec<(SolverKind, Result<SolveTrace>)>,
}

/// Stopping tolerance used by each solver experiment.
fn solver_tolerance(cfg: &ExperimentConfig) -> f64 {
    match cfg.experiment {
        // Run to the floor; machine precision is the only stop.
        Experiment::Converge => 1e-15,
        _ => cfg.success_threshold,
    }
}

pub fn solver_trial(cfg: &ExperimentConfig, m: usize, seed: u64) -> Result<TrialRun> {
    let instance = ProblemInstance::synthesize(m, cfg.n, cfg.ensemble_field, cfg.signal_field, cfg.noise_sigma, seed)?;
    let methods = cfg.solver_methods()?;
    let x0 = initialize(&instance.ensemble, &instance.observations, &init_config(cfg, InitMethod::ExpSpectral, seed))
        .map(|r| r.x0);
    let tol = solver_tolerance(cfg);
    let traces = methods
        .into_iter()
        .map(|kind| {
            let trace = match &x0 {
                Err(e) => Err(Error::Degenerate(format!("initialization failed: {e}"))),
                Ok(x0) => {
                    let (e, y, z) = (&instance.ensemble, &instance.observations, Some(&instance.signal));
                    match kind {
                        SolverKind::Gn => {
                            let d = GnConfig::default();
                            let gc = GnConfig { max_iters: cfg.max_iters.unwrap_or(d.max_iters), rel_err_tol: tol, ..d };
                            solve_gn(e, y, x0, z, &gc)
                        }
                        SolverKind::Wf | SolverKind::Altmin => {
                            let d = BaselineConfig::default();
                            let bc = BaselineConfig { max_iters: cfg.max_iters.unwrap_or(d.max_iters), rel_err_tol: tol, ..d };
                            if kind == SolverKind::Wf { wf_solve(e, y, x0, z, &bc) } else { altmin_solve(e, y, x0, z, &bc) }
                        }
                    }
                }
            };
            if let Err(err) = &trace {
                warn!("{kind} m={m} trial={seed}: {err}");
            }
            (kind, trace)
        })
        .collect();
    Ok(TrialRun { instance, x0, traces })
}

fn trials(cfg: &ExperimentConfig) -> Result<Vec<(usize, u64, TrialRun)>> {
    let runs = parallel(cfg, |m, seed| match solver_trial(cfg, m, seed) {
        Ok(run) => vec![Ok((m, seed, run))],
        Err(e) => vec![Err(e)],
    })?;
    runs.into_iter().collect()
}

fn method_names(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    Ok(cfg.solver_methods()?.iter().map(|k| k.name().to_string()).collect())
}

/// First iteration within 10% of the trace's own minimum error.
pub fn iters_to_floor(rel_errors: &[f64]) -> usize {
    let floor = rel_errors.iter().copied().fold(f64::INFINITY, f64::min);
    rel_errors.iter().position(|&e| e <= 1.1 * floor).unwrap_or(0)
}

/// Relative error per iteration from the shared start. Per trial metrics:
/// `rel_err` (one row per iterate), `iters_to_floor` and `final_rel_err`.
pub fn run_converge(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect(cfg, Experiment::Converge)?;
    let start = Instant::now();
    let names = method_names(cfg)?;
    let mut rows = Vec::new();
    let mut extra = Vec::new();
    let mut curves: Vec<(String, Vec<Vec<f64>>)> = names.iter().map(|n| (n.clone(), Vec::new())).collect();
    for (m, seed, run) in trials(cfg)? {
        for (kind, trace) in run.traces {
            let name = kind.name();
            let trace = match trace {
                Ok(t) => t,
                Err(_) => {
                    rows.push(row(cfg, name, m, Some(seed), None, "final_rel_err", f64::NAN));
                    continue;
                }
            };
            for (k, (&e, &w)) in trace.rel_errors.iter().zip(&trace.wall_times).enumerate() {
                rows.push(ResultRow { wall_ms: Some(w * 1e3), ..row(cfg, name, m, Some(seed), Some(k), "rel_err", e) });
            }
            rows.push(row(cfg, name, m, Some(seed), None, "iters_to_floor", iters_to_floor(&trace.rel_errors) as f64));
            rows.push(row(cfg, name, m, Some(seed), None, "final_rel_err", trace.final_rel_error()));
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            extra.push((format!("traces/{name}_m{m}_t{seed}.csv"), String::from_utf8_lossy(&buf).into_owned()));
            if let Some((_, c)) = curves.iter_mut().find(|(n, _)| n == name) {
                c.push(trace.rel_errors.clone());
            }
        }
    }
    extra.sort();
    let series = curves
        .into_iter()
        .map(|(label, runs)| {
            let len = runs.iter().map(Vec::len).max().unwrap_or(0);
            let points = (1..len)
                .map(|k| {
                    // Runs that stopped early hold their final value.
                    let logs: Vec<f64> = runs.iter().map(|r| r[k.min(r.len() - 1)].max(1e-300).log10()).collect();
                    ((k as f64).log10(), mean(&logs))
                })
                .collect();
            Series { label, points }
        })
        .collect();
    let chart = LineChart {
        title: format!("Convergence, n={}, sigma={}", cfg.n, cfg.noise_sigma),
        x_label: "log10(iteration)".into(),
        y_label: "log10(dist(x_k, z)/||z||)".into(),
        series,
    };
    Ok(finalize(cfg, rows, vec![("converge".into(), chart)], extra, start))
}

/// Iterations and wall time until the relative error drops below the
/// success threshold. Per trial metrics: `converged` (0/1) and `iterations`
/// (to the threshold, or all iterations taken when it was never reached).
/// `timing_summary.csv` tabulates medians.
pub fn run_timing(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect(cfg, Experiment::Timing)?;
    let start = Instant::now();
    let names = method_names(cfg)?;
    let mut rows = Vec::new();
    for (m, seed, run) in trials(cfg)? {
        for (kind, trace) in run.traces {
            let name = kind.name();
            let (ok, iters, wall) = match &trace {
                Ok(t) => match t.first_below(cfg.success_threshold) {
                    Some(k) => (1.0, k as f64, t.wall_times[k] * 1e3),
                    None => (0.0, t.iterations() as f64, t.wall_times.last().copied().unwrap_or(0.0) * 1e3),
                },
                Err(_) => (0.0, f64::NAN, f64::NAN),
            };
            rows.push(row(cfg, name, m, Some(seed), None, "converged", ok));
            rows.push(ResultRow { wall_ms: Some(wall), ..row(cfg, name, m, Some(seed), None, "iterations", iters) });
        }
    }
    add_means(cfg, &mut rows, &names, "converged", "success_rate");

    #[derive(Serialize)]
    struct Summary<'a> {
        method: &'a str,
        m: usize,
        trials: usize,
        converged: usize,
        median_iterations: f64,
        median_wall_ms: f64,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for name in &names {
        for m in cfg.m_over_n.measurements(cfg.n) {
            let sel: Vec<&ResultRow> =
                rows.iter().filter(|r| &r.method == name && r.m == m && r.trial.is_some()).collect();
            let ok: Vec<u64> = sel.iter().filter(|r| r.metric == "converged" && r.value == 1.0).filter_map(|r| r.trial).collect();
            let hits: Vec<&&ResultRow> =
                sel.iter().filter(|r| r.metric == "iterations" && r.trial.is_some_and(|t| ok.contains(&t))).collect();
            let mut iters: Vec<f64> = hits.iter().map(|r| r.value).collect();
            let mut walls: Vec<f64> = hits.iter().filter_map(|r| r.wall_ms).collect();
            w.serialize(Summary {
                method: name,
                m,
                trials: cfg.trials,
                converged: ok.len(),
                median_iterations: median(&mut iters),
                median_wall_ms: median(&mut walls),
            })?;
        }
    }
    let summary = into_string(w)?;
    Ok(finalize(cfg, rows, Vec::new(), vec![("timing_summary.csv".into(), summary)], start))
}

/// Fraction of trials whose final relative error is below the success
/// threshold. Per trial metrics: `success` (0/1) and `final_rel_err`;
/// summary metric `success_rate`.
pub fn run_success(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect(cfg, Experiment::Success)?;
    let start = Instant::now();
    let names = method_names(cfg)?;
    let mut rows = Vec::new();
    for (m, seed, run) in trials(cfg)? {
        for (kind, trace) in run.traces {
            let err = trace.as_ref().map(|t| t.final_rel_error()).unwrap_or(f64::NAN);
            let ok = if err < cfg.success_threshold { 1.0 } else { 0.0 };
            rows.push(row(cfg, kind.name(), m, Some(seed), None, "success", ok));
            rows.push(row(cfg, kind.name(), m, Some(seed), None, "final_rel_err", err));
        }
    }
    add_means(cfg, &mut rows, &names, "success", "success_rate");
    let chart = ratio_chart(cfg, &rows, &names, "success_rate", "Success rate", "fraction of successful trials");
    Ok(finalize(cfg, rows, vec![("success".into(), chart)], Vec::new(), start))
}
