//! Multi-seed experiments and their tab-separated exports.
//!
//! Per run the exporter writes `<method>_run<idx>_seed<seed>_history.tsv`,
//! `..._best.tsv` and optionally `..._trace.tsv`; per experiment it writes
//! `<method>_summary.tsv`. Numbers use the shortest representation that
//! parses back to the same value, so summaries recomputed from history files
//! match the summary file exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::anneal::SaSchedule;
use crate::bocs::{run_search, BocsParams, Phase, SearchHistory, Strategy};
use crate::error::{Error, Result};
use crate::evaluator::BatteryTrace;
use crate::instance::{generate_instance, load_instance, BatteryParams, GenParams, ProblemInstance};
use crate::route::PenaltyWeights;
use crate::scalar::{from_usize, lit, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource<T> {
    File(PathBuf),
    Generate { params: GenParams<T>, battery: BatteryParams<T> },
    Given(ProblemInstance<T>),
}

impl<T: Scalar> InstanceSource<T> {
    pub fn load(&self) -> Result<ProblemInstance<T>> {
        match self {
            InstanceSource::File(path) => load_instance(fs::File::open(path)?),
            InstanceSource::Generate { params, battery } => generate_instance(params, *battery),
            InstanceSource::Given(inst) => Ok(inst.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitFlags {
    pub history: bool,
    pub traces: bool,
    pub summary: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            history: true,
            traces: true,
            summary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub instance: InstanceSource<T>,
    /// Its `seed` is replaced by each entry of `seeds`.
    pub params: BocsParams<T>,
    /// `None` selects the defaults for the loaded instance.
    pub weights: Option<PenaltyWeights<T>>,
    pub schedule: SaSchedule<T>,
    pub seeds: Vec<u64>,
    /// Nothing is written when `None`.
    pub output_dir: Option<PathBuf>,
    pub emit: EmitFlags,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("at least one seed is required".into()));
        }
        self.params.validate()?;
        self.schedule.validate()?;
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub seed: u64,
    pub history: SearchHistory<T>,
}

/// Worst, best, mean and population variance of per-run final values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<T> {
    pub runs: usize,
    pub worst: T,
    pub best: T,
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> Summary<T> {
    pub fn from_values(values: &[T]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let count = from_usize::<T>(values.len());
        let mean = values.iter().copied().sum::<T>() / count;
        let variance = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
        Some(Self {
            runs: values.len(),
            worst: values.iter().copied().fold(T::neg_infinity(), T::max),
            best: values.iter().copied().fold(T::infinity(), T::min),
            mean,
            variance,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport<T> {
    pub method: Strategy,
    pub instance: ProblemInstance<T>,
    pub runs: Vec<RunResult<T>>,
    /// Whether the closing move was checked when scoring.
    pub check_final: bool,
}

impl<T: Scalar> ExperimentReport<T> {
    pub fn final_values(&self) -> Vec<T> {
        self.runs.iter().map(|r| r.history.final_best()).collect()
    }

    /// Always recomputed from the run histories.
    pub fn summary(&self) -> Summary<T> {
        Summary::from_values(&self.final_values()).expect("reports hold at least one run")
    }
}

pub fn method_name(method: Strategy) -> &'static str {
    match method {
        Strategy::Bocs => "bocs",
        Strategy::Random => "random",
    }
}

/// Creates `dir` if needed and proves it accepts new files.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".evbocs-write-check");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

/// Runs `method` over every seed; seeds may run concurrently, results stay in
/// seed-list order.
pub fn run_method<T: Scalar>(cfg: &ExperimentConfig<T>, method: Strategy) -> Result<ExperimentReport<T>> {
    cfg.validate()?;
    if let Some(dir) = &cfg.output_dir {
        ensure_writable(dir)?;
    }
    let instance = cfg.instance.load()?;
    let weights = cfg.weights.unwrap_or_else(|| PenaltyWeights::defaults_for(&instance));
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let params = cfg.params.with_seed(seed);
            run_search(&instance, &params, &weights, &cfg.schedule, method).map(|history| RunResult { seed, history })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ExperimentReport {
        method,
        instance,
        runs,
        check_final: cfg.params.eval.check_final,
    };
    if let Some(dir) = &cfg.output_dir {
        export(&report, dir, cfg.emit)?;
    }
    Ok(report)
}

pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<ExperimentReport<T>> {
    run_method(cfg, Strategy::Bocs)
}

/// The same loop with uniformly random proposals.
pub fn run_random_baseline<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<ExperimentReport<T>> {
    run_method(cfg, Strategy::Random)
}

pub fn history_tsv<T: Scalar>(history: &SearchHistory<T>) -> String {
    let mut out = String::from("iteration\tphase\ts\ta\tb\ty\tbest_so_far\tfeasible\n");
    for r in &history.records {
        let phase = match r.phase {
            Phase::Init => "init",
            Phase::Search => "search",
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.iteration, phase, r.s, r.a, r.b, r.y, r.best_so_far, r.feasible as u8
        );
    }
    out
}

/// One row per move. `checked` marks the steps that count toward the penalty.
pub fn trace_tsv<T: Scalar>(trace: &BatteryTrace<T>, check_final: bool) -> String {
    let checked = if check_final {
        trace.steps.len()
    } else {
        trace.steps.len().min(trace.n_locations.saturating_sub(1))
    };
    let mut out = String::from(
        "step\tfrom\tto\tlevel_before_charge\tlevel_after_charge\tlevel_after_move\tcharge_overflow\tmove_underflow\tmove_overflow\tchecked\n",
    );
    for (t, s) in trace.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            t + 1,
            s.from,
            s.to,
            s.level_before_charge,
            s.level_after_charge,
            s.level_after_move,
            s.charge_overflow as u8,
            s.move_underflow as u8,
            s.move_overflow as u8,
            (t < checked) as u8
        );
    }
    out
}

fn best_tsv<T: Scalar>(run: &RunResult<T>, inst: &ProblemInstance<T>) -> String {
    let h = &run.history;
    let stations: Vec<String> = h.best_config.station_locations(inst).iter().map(usize::to_string).collect();
    let tour = h.best.tour.as_ref().map_or_else(|| "none".to_string(), |t| t.to_string());
    let iteration = h.best_record().map_or(0, |r| r.iteration);
    format!(
        "key\tvalue\nseed\t{}\niteration\t{}\ns\t{}\nstations\t{}\ntour\t{}\na\t{}\nb\t{}\ny\t{}\nfeasible\t{}\n",
        run.seed,
        iteration,
        h.best_config,
        stations.join(","),
        tour,
        h.best.a,
        h.best.b,
        h.best.y,
        h.best.feasible as u8
    )
}

pub fn summary_tsv<T: Scalar>(method: &str, summary: &Summary<T>) -> String {
    format!(
        "method\truns\tworst\tbest\tmean\tvariance\n{}\t{}\t{}\t{}\t{}\t{}\n",
        method, summary.runs, summary.worst, summary.best, summary.mean, summary.variance
    )
}

pub fn run_prefix(method: &str, idx: usize, seed: u64) -> String {
    format!("{method}_run{idx:03}_seed{seed}")
}

/// Writes the report's tables into `dir` and returns the written paths.
pub fn export<T: Scalar>(report: &ExperimentReport<T>, dir: &Path, emit: EmitFlags) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let method = method_name(report.method);
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for (idx, run) in report.runs.iter().enumerate() {
        let prefix = run_prefix(method, idx, run.seed);
        if emit.history {
            put(format!("{prefix}_history.tsv"), history_tsv(&run.history))?;
            put(format!("{prefix}_best.tsv"), best_tsv(run, &report.instance))?;
        }
        if emit.traces {
            if let Some(trace) = &run.history.best.trace {
                put(format!("{prefix}_trace.tsv"), trace_tsv(trace, report.check_final))?;
            }
        }
    }
    if emit.summary {
        put(format!("{method}_summary.tsv"), summary_tsv(method, &report.summary()))?;
    }
    Ok(written)
}

/// Final `best_so_far` of an exported history table.
pub fn read_final_best<T: Scalar>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let col = header
        .split('\t')
        .position(|c| c == "best_so_far")
        .ok_or_else(|| Error::Parse {
            field: format!("{}: header", path.display()),
            message: "no best_so_far column".into(),
        })?;
    let last = lines.rfind(|l| !l.trim().is_empty()).ok_or_else(|| Error::Parse {
        field: path.display().to_string(),
        message: "history has no rows".into(),
    })?;
    let cell = last.split('\t').nth(col).unwrap_or_default();
    let value: f64 = cell.parse().map_err(|_| Error::Parse {
        field: format!("{}: best_so_far", path.display()),
        message: format!("not a number: {cell:?}"),
    })?;
    Ok(lit(value))
}

/// History files in `dir` for `method`, in file-name order.
pub fn history_files(dir: &Path, method: &str) -> Result<Vec<PathBuf>> {
    let prefix = format!("{method}_run");
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&prefix) && n.ends_with("_history.tsv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Summary recomputed from the exported histories of `method` in `dir`.
pub fn summarize_dir<T: Scalar>(dir: &Path, method: &str) -> Result<Summary<T>> {
    let files = history_files(dir, method)?;
    let values = files.iter().map(|p| read_final_best::<T>(p)).collect::<Result<Vec<T>>>()?;
    Summary::from_values(&values)
        .ok_or_else(|| Error::Validation(format!("no {method} history files in {}", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bocs::Prior;

    fn config(dir: Option<PathBuf>, seeds: Vec<u64>) -> ExperimentConfig<f64> {
        ExperimentConfig {
            instance: InstanceSource::Generate {
                params: GenParams {
                    n: 5,
                    m: 3,
                    seed: 1,
                    ..GenParams::default()
                },
                battery: BatteryParams::reference(),
            },
            params: BocsParams {
                n_search: 3,
                n_init: 2,
                prior: Prior::ridge(),
                ..BocsParams::default()
            },
            weights: None,
            schedule: SaSchedule {
                sweeps: 100,
                restarts: 2,
                ..SaSchedule::default()
            },
            seeds,
            output_dir: dir,
            emit: EmitFlags::default(),
        }
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::from_values(&[1.0, 3.0, 2.0, 6.0]).unwrap();
        assert_eq!((s.worst, s.best, s.mean, s.variance), (6.0, 1.0, 3.0, 3.5));
        let one = Summary::from_values(&[4.0]).unwrap();
        assert_eq!((one.worst, one.best, one.mean, one.variance), (4.0, 4.0, 4.0, 0.0));
        assert!(Summary::<f64>::from_values(&[]).is_none());
    }

    #[test]
    fn exported_histories_reproduce_the_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(Some(dir.path().to_path_buf()), vec![3, 1, 2]);
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![3, 1, 2]);
        let recomputed: Summary<f64> = summarize_dir(dir.path(), "bocs").unwrap();
        assert_eq!(
            summary_tsv("bocs", &recomputed),
            fs::read_to_string(dir.path().join("bocs_summary.tsv")).unwrap()
        );
        let history = fs::read_to_string(dir.path().join("bocs_run000_seed3_history.tsv")).unwrap();
        assert_eq!(history.lines().count(), 1 + 5);
    }

    #[test]
    fn disabled_traces_write_no_trace_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(Some(dir.path().to_path_buf()), vec![0]);
        cfg.emit.traces = false;
        run_random_baseline(&cfg).unwrap();
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert!(names.iter().all(|n| !n.ends_with("_trace.tsv")));
        assert!(names.iter().any(|n| n == "random_summary.tsv"));
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        assert!(run_experiment(&config(None, vec![])).is_err());
    }

    #[test]
    fn unwritable_output_fails_before_compute() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        fs::write(&file, "x").unwrap();
        let cfg = config(Some(file.join("sub")), vec![0]);
        assert!(matches!(run_experiment(&cfg), Err(Error::Io(_))));
    }
}
