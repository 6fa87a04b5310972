//! `run` and `mask-study`: job grids over modes, responder fractions,
//! masks and seeds, executed in parallel and reported in a fixed order.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use mtsvm::data::{generate_synthetic, load_ucihar, split_train_test, truncate_per_task, Standardizer};
use mtsvm::federation::{calibrate_t_wait, run, write_trace_csv, Mode, SimConfig, SimTrace};
use mtsvm::masking::{MaskFamily, MaskSpec};
use mtsvm::{Problem, TaskData};

use crate::config::{DataSection, ExperimentConfig, UciharSection};
use crate::error::{CliError, CliResult};
use crate::output::{OutputFile, Outputs};

const DATA_STREAM: u64 = u64::MAX;
const SPLIT_STREAM: u64 = u64::MAX - 1;
const WAIT_STREAM: u64 = u64::MAX - 2;

fn aux_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Command-line overrides shared by `run` and `mask-study`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub ucihar_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<TaskData>,
    pub test: Vec<TaskData>,
}

fn ucihar_files(root: &Path, part: &str) -> [PathBuf; 3] {
    let dir = root.join(part);
    [
        dir.join(format!("X_{part}.txt")),
        dir.join(format!("y_{part}.txt")),
        dir.join(format!("subject_{part}.txt")),
    ]
}

fn ucihar_root(section: &UciharSection, overrides: &Overrides) -> CliResult<PathBuf> {
    let root = overrides
        .ucihar_dir
        .clone()
        .or_else(|| section.root.clone())
        .ok_or_else(|| CliError::Config("data.ucihar.root not set and no --ucihar-dir given".into()))?;
    for part in ["train", "test"] {
        for f in ucihar_files(&root, part) {
            if !f.is_file() {
                return Err(CliError::Data(format!("missing dataset file {}", f.display())));
            }
        }
    }
    Ok(root)
}

/// Loads both published partitions and merges them per subject.
pub fn load_ucihar_tasks(section: &UciharSection, root: &Path) -> CliResult<Vec<TaskData>> {
    let mut parts = Vec::new();
    for part in ["train", "test"] {
        let [x, y, s] = ucihar_files(root, part);
        parts.extend(load_ucihar(x, y, s, section.positive_class_id)?);
    }
    let mut ids: Vec<usize> = parts.iter().map(TaskData::task_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut tasks = ids
        .into_iter()
        .map(|id| {
            let same: Vec<TaskData> = parts.iter().filter(|t| t.task_id() == id).cloned().collect();
            TaskData::pool(id, &same)
        })
        .collect::<mtsvm::Result<Vec<_>>>()?;
    if let Some(m) = section.max_tasks {
        tasks.truncate(m);
    }
    if let Some(n) = section.truncate {
        tasks = truncate_per_task(&tasks, n);
    }
    Ok(tasks)
}

/// Unsplit tasks for one seed.
pub fn raw_tasks(config: &ExperimentConfig, seed: u64, overrides: &Overrides) -> CliResult<Vec<TaskData>> {
    match &config.data {
        DataSection::Synthetic(s) => {
            let spec = s.spec(config.problem);
            Ok(generate_synthetic(&spec, &mut aux_rng(seed, DATA_STREAM))?.tasks)
        }
        DataSection::Ucihar(u) => {
            let root = ucihar_root(u, overrides)?;
            load_ucihar_tasks(u, &root)
        }
    }
}

/// Seeded per-task train/test split, optionally standardized with
/// statistics of the training part.
pub fn split_tasks(config: &ExperimentConfig, tasks: &[TaskData], seed: u64) -> CliResult<Split> {
    let mut rng = aux_rng(seed, SPLIT_STREAM);
    let mut split = Split { train: Vec::new(), test: Vec::new() };
    for t in tasks {
        let (mut train, mut test) = split_train_test(t, config.train_fraction, config.problem, &mut rng)?;
        if config.standardize {
            let s = Standardizer::fit(&train)?;
            train = s.apply(&train)?;
            test = s.apply(&test)?;
        }
        split.train.push(train);
        split.test.push(test);
    }
    Ok(split)
}

/// One simulation of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub label: String,
    pub mode: Mode,
    pub responder_target: f64,
    pub mask: MaskSpec,
    pub seed: u64,
    /// Index into the datasets prepared for this seed.
    pub dataset: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub mode: Mode,
    pub seed: u64,
    pub mask: String,
    pub responder_target: f64,
    /// `None` when the coordinator waits for everyone.
    pub t_wait: Option<f64>,
    pub mean_responder_fraction: f64,
    pub epochs: usize,
    pub converged: bool,
    pub final_metric: f64,
    pub best_metric: f64,
    /// Virtual time at which the metric first reaches 95% of its final value.
    pub t95: Option<f64>,
    pub final_virtual_time: f64,
    pub trace_file: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LabelSummary {
    pub label: String,
    pub seeds: usize,
    pub mean_final_metric: f64,
    pub mean_best_metric: f64,
    pub mean_t95: Option<f64>,
    pub mean_responder_fraction: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub name: String,
    pub command: String,
    pub problem: Problem,
    pub metric_name: String,
    pub runs: Vec<RunSummary>,
    pub labels: Vec<LabelSummary>,
}

/// First virtual time at which the metric reaches `fraction` of its final value.
pub fn time_to_fraction(trace: &SimTrace, fraction: f64) -> Option<f64> {
    let last = trace.final_metric()?;
    let target = last - (1.0 - fraction) * last.abs();
    trace.epochs.iter().find(|e| e.mean_metric >= target).map(|e| e.virtual_time)
}

pub fn fraction_label(rho: f64) -> String {
    if rho >= 1.0 {
        "all".into()
    } else {
        format!("{:02}", (rho * 100.0).round() as u64)
    }
}

fn mask_slug(mask: &MaskSpec) -> String {
    match mask.family {
        MaskFamily::None => "unmasked".into(),
        MaskFamily::Bernoulli => format!("bernoulli_{:.2}", mask.bernoulli_p),
        MaskFamily::Beta => format!("beta_r{:.2}", mask.unaffected_ratio),
    }
}

/// Jobs of the `run` command, in report order.
pub fn run_jobs(config: &ExperimentConfig, seeds: &[u64]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &seed in seeds {
        for &mode in &config.modes {
            let base = Job {
                label: String::new(),
                mode,
                responder_target: 1.0,
                mask: MaskSpec::none(),
                seed,
                dataset: 0,
            };
            match mode {
                Mode::Mtl => {
                    for &rho in &config.responder_fractions {
                        let masked = config.mask.family != MaskFamily::None;
                        let suffix = if masked { format!("_{}", mask_slug(&config.mask)) } else { String::new() };
                        jobs.push(Job {
                            label: format!("mtl_{}{suffix}", fraction_label(rho)),
                            responder_target: rho,
                            mask: config.mask,
                            ..base.clone()
                        });
                    }
                }
                Mode::Global => jobs.push(Job { label: "global".into(), ..base }),
                Mode::Local => jobs.push(Job { label: "local".into(), ..base }),
            }
        }
    }
    jobs
}

/// Jobs of the `mask-study` command: the unmasked run, every Bernoulli and
/// Beta mask and the local baseline, on the full (dataset 0) and light
/// (dataset 1) data.
pub fn mask_study_jobs(config: &ExperimentConfig, seeds: &[u64]) -> Vec<Job> {
    let study = &config.mask_study;
    let mut masks = vec![MaskSpec::none()];
    masks.extend(study.bernoulli.iter().map(|&p| MaskSpec::bernoulli(p)));
    masks.extend(study.beta_ratios.iter().map(|&r| MaskSpec::beta(study.beta_a, study.beta_b, r)));
    let mut jobs = Vec::new();
    for &seed in seeds {
        for (dataset, variant) in ["full", "light"].into_iter().enumerate() {
            for mask in &masks {
                jobs.push(Job {
                    label: format!("{variant}_{}", mask_slug(mask)),
                    mode: Mode::Mtl,
                    responder_target: 1.0,
                    mask: *mask,
                    seed,
                    dataset,
                });
            }
            jobs.push(Job {
                label: format!("{variant}_local"),
                mode: Mode::Local,
                responder_target: 1.0,
                mask: MaskSpec::none(),
                seed,
                dataset,
            });
        }
    }
    jobs
}

fn sim_config(config: &ExperimentConfig, job: &Job, split: &Split) -> CliResult<SimConfig> {
    let k = split.train.len();
    let mut sim = SimConfig::new(job.mode, config.problem, config.params, k, job.seed);
    sim.sum_time = config.simulation.sum_time;
    sim.max_epochs = config.simulation.max_epochs;
    sim.stop_tolerance = config.simulation.stop_tolerance;
    sim.delays = config.delay.models(k)?;
    sim.mask = job.mask;
    if job.responder_target < 1.0 {
        let sizes: Vec<usize> = split.train.iter().map(TaskData::n).collect();
        let d = split.train[0].d();
        let mut rng = aux_rng(job.seed, WAIT_STREAM);
        sim.t_wait = calibrate_t_wait(
            &sim.delays,
            &sizes,
            d,
            job.responder_target,
            config.simulation.calibration_samples,
            &mut rng,
        )?;
    }
    Ok(sim)
}

/// Runs one job and returns its summary together with the trace CSV.
pub fn execute(config: &ExperimentConfig, job: &Job, split: &Split) -> CliResult<(RunSummary, Vec<u8>)> {
    let sim = sim_config(config, job, split)?;
    let trace = run(&sim, &split.train, &split.test)?;
    let mut csv = Vec::new();
    write_trace_csv(&trace, &mut csv).map_err(|e| CliError::Data(format!("trace: {e}")))?;
    let final_metric = trace.final_metric().unwrap_or(f64::NAN);
    let best_metric = trace.epochs.iter().map(|e| e.mean_metric).fold(f64::NEG_INFINITY, f64::max);
    let summary = RunSummary {
        label: job.label.clone(),
        mode: job.mode,
        seed: job.seed,
        mask: job.mask.label(),
        responder_target: job.responder_target,
        t_wait: sim.t_wait.is_finite().then_some(sim.t_wait),
        mean_responder_fraction: trace.mean_responder_fraction(),
        epochs: trace.epochs.len(),
        converged: trace.converged,
        final_metric,
        best_metric,
        t95: time_to_fraction(&trace, 0.95),
        final_virtual_time: trace.epochs.last().map_or(0.0, |e| e.virtual_time),
        trace_file: format!("traces/{}_seed{}.csv", job.label, job.seed),
    };
    Ok((summary, csv))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

pub fn label_summaries(runs: &[RunSummary]) -> Vec<LabelSummary> {
    let mut labels: Vec<&str> = Vec::new();
    for r in runs {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let group: Vec<&RunSummary> = runs.iter().filter(|r| r.label == label).collect();
            let t95: Option<Vec<f64>> = group.iter().map(|r| r.t95).collect();
            LabelSummary {
                label: label.to_string(),
                seeds: group.len(),
                mean_final_metric: mean(group.iter().map(|r| r.final_metric)),
                mean_best_metric: mean(group.iter().map(|r| r.best_metric)),
                mean_t95: t95.map(|t| mean(t.into_iter())),
                mean_responder_fraction: mean(group.iter().map(|r| r.mean_responder_fraction)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    MaskStudy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::MaskStudy => "mask-study",
        }
    }
}

/// Everything a command produces, computed before anything is written.
pub struct Experiment {
    pub summary: Summary,
    pub traces: Vec<OutputFile>,
    pub seeds: Vec<u64>,
}

pub fn prepare(
    command: Command,
    config: &ExperimentConfig,
    overrides: &Overrides,
) -> CliResult<Experiment> {
    let seeds = overrides.seed.map_or_else(|| config.seeds.clone(), |s| vec![s]);
    let mut datasets: Vec<Vec<Split>> = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let tasks = raw_tasks(config, seed, overrides)?;
        config.delay.models(tasks.len())?;
        let mut per_seed = vec![split_tasks(config, &tasks, seed)?];
        if command == Command::MaskStudy {
            let light = truncate_per_task(&tasks, config.mask_study.light_n);
            per_seed.push(split_tasks(config, &light, seed)?);
        }
        datasets.push(per_seed);
    }
    let jobs = match command {
        Command::Run => run_jobs(config, &seeds),
        Command::MaskStudy => mask_study_jobs(config, &seeds),
    };
    let results: Vec<(RunSummary, Vec<u8>)> = jobs
        .par_iter()
        .map(|job| {
            let s = seeds.iter().position(|&x| x == job.seed).expect("seed of job");
            execute(config, job, &datasets[s][job.dataset])
        })
        .collect::<CliResult<_>>()?;
    let (runs, traces): (Vec<RunSummary>, Vec<OutputFile>) = results
        .into_iter()
        .map(|(summary, csv)| {
            let file = OutputFile { path: PathBuf::from(&summary.trace_file), bytes: csv };
            (summary, file)
        })
        .unzip();
    let metric_name = match config.problem {
        Problem::Classification => "balanced_accuracy",
        Problem::Regression => "r2",
    };
    let summary = Summary {
        name: config.name.clone(),
        command: command.name().into(),
        problem: config.problem,
        metric_name: metric_name.into(),
        labels: label_summaries(&runs),
        runs,
    };
    Ok(Experiment { summary, traces, seeds })
}

/// Loads, runs and writes one command. Nothing is written unless every
/// job succeeds.
pub fn run_command(command: Command, config_path: &Path, overrides: &Overrides) -> CliResult<PathBuf> {
    let (config, config_bytes) = ExperimentConfig::load(config_path)?;
    if overrides.seed.is_none() {
        let mut seen = config.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != config.seeds.len() {
            return Err(CliError::Config("seeds must be distinct".into()));
        }
    }
    let out_dir = overrides.output_dir.clone().unwrap_or_else(|| config.output_dir.join(&config.name));
    let experiment = prepare(command, &config, overrides)?;
    let mut outputs = Outputs::new(&out_dir);
    for t in experiment.traces {
        outputs.add(t);
    }
    outputs.add_json("summary.json", &experiment.summary)?;
    outputs.write(command.name(), &config_bytes, &experiment.seeds)?;
    Ok(out_dir)
}
