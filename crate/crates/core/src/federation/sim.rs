use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::delay::{sample_compute_delay, DelayModel};
use crate::error::{check_len, Error, Result};
use crate::linalg::{add_assign, norm2, norm_sq};
use crate::masking::{generate_mask, masked_update, MaskFamily, MaskSpec};
use crate::metrics::{balanced_accuracy, r_squared};
use crate::model::{common_dimension, decision_values, sign_label, Hyperparams, ModelState, Problem, TaskData};
use crate::objective::{dual_objective_classification, dual_objective_regression};
use crate::solver::{apply_global, sweep, sweep_prefix, ParticipantState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mtl,
    Global,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mode: Mode,
    pub problem: Problem,
    pub params: Hyperparams,
    pub t_wait: f64,
    pub sum_time: f64,
    pub max_epochs: usize,
    pub stop_tolerance: f64,
    /// One model per participant.
    pub delays: Vec<DelayModel>,
    pub mask: MaskSpec,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(mode: Mode, problem: Problem, params: Hyperparams, num_tasks: usize, seed: u64) -> Self {
        Self {
            mode,
            problem,
            params,
            t_wait: f64::INFINITY,
            sum_time: 0.0,
            max_epochs: 100,
            stop_tolerance: 0.0,
            delays: vec![DelayModel::default(); num_tasks],
            mask: MaskSpec::none(),
            seed,
        }
    }

    pub fn validate(&self, num_tasks: usize) -> Result<()> {
        self.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.mask.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.t_wait > 0.0) {
            return Err(Error::Config(format!("t_wait must be positive, got {}", self.t_wait)));
        }
        if !(self.sum_time.is_finite() && self.sum_time >= 0.0) {
            return Err(Error::Config(format!("sum_time must be non-negative, got {}", self.sum_time)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(self.stop_tolerance.is_finite() && self.stop_tolerance >= 0.0) {
            return Err(Error::Config("stop_tolerance must be non-negative".into()));
        }
        if self.delays.len() != num_tasks {
            return Err(Error::Config(format!(
                "{} delay models for {num_tasks} participants",
                self.delays.len()
            )));
        }
        self.delays.iter().try_for_each(DelayModel::validate)
    }
}

/// Independent random streams of one participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Delay = 0,
    Order = 1,
    Mask = 2,
}

/// The random stream `stream` of participant `k` under master seed `seed`.
pub fn participant_rng(seed: u64, stream: Stream, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((k as u64) << 2 | stream as u64);
    rng
}

/// `w_prev + sum(updates)`, summed in the given order.
pub fn aggregate(w_prev: &[f64], updates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut w = w_prev.to_vec();
    for u in updates {
        check_len(w.len(), u.len())?;
        add_assign(&mut w, u);
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Virtual time at which the model produced by this epoch is broadcast.
    pub virtual_time: f64,
    /// Task ids whose update was aggregated.
    pub responders: Vec<usize>,
    pub responder_fraction: f64,
    pub update_norm: f64,
    /// FNV-1a digest of the bit patterns of the shared `w`.
    pub w_digest: String,
    pub task_metrics: Vec<f64>,
    pub mean_metric: f64,
    pub dual_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskModel {
    pub task_id: usize,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub mode: Mode,
    pub problem: Problem,
    pub metric_name: String,
    pub task_ids: Vec<usize>,
    pub epochs: Vec<EpochRecord>,
    pub converged: bool,
    pub final_models: Vec<TaskModel>,
}

impl SimTrace {
    pub fn final_metric(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_metric)
    }

    pub fn mean_responder_fraction(&self) -> f64 {
        if self.epochs.is_empty() {
            return 0.0;
        }
        self.epochs.iter().map(|e| e.responder_fraction).sum::<f64>() / self.epochs.len() as f64
    }
}

fn digest(w: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in w {
        for b in x.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

fn metric_name(problem: Problem) -> &'static str {
    match problem {
        Problem::Classification => "balanced_accuracy",
        Problem::Regression => "r2",
    }
}

fn evaluate(problem: Problem, w: &[f64], v: &[f64], test: &TaskData) -> Result<f64> {
    let raw = decision_values(w, v, test)?;
    match problem {
        Problem::Classification => {
            let labels: Vec<f64> = raw.into_iter().map(sign_label).collect();
            balanced_accuracy(&labels, test.labels())
        }
        Problem::Regression => r_squared(&raw, test.labels()),
    }
}

struct Streams {
    delay: ChaCha8Rng,
    order: ChaCha8Rng,
    mask: ChaCha8Rng,
}

/// Step-wise simulator. [`run`] drives it to completion; tests step it
/// manually to inspect participant state between epochs.
pub struct Simulation {
    config: SimConfig,
    params: Hyperparams,
    delays: Vec<DelayModel>,
    tasks: Vec<TaskData>,
    tests: Vec<TaskData>,
    /// Participant whose model is scored on each test task.
    eval_map: Vec<usize>,
    participants: Vec<ParticipantState>,
    streams: Vec<Streams>,
    w: Vec<f64>,
    clock: f64,
    local_clocks: Vec<f64>,
    epoch: usize,
    quiet: usize,
    converged: bool,
    records: Vec<EpochRecord>,
}

fn check_data(problem: Problem, tasks: &[TaskData], tests: &[TaskData]) -> Result<usize> {
    if tasks.is_empty() {
        return Err(Error::InvalidInput("no participants".into()));
    }
    check_len(tasks.len(), tests.len())?;
    let d = common_dimension(tasks)?;
    check_len(d, common_dimension(tests)?)?;
    for t in tasks {
        if t.is_empty() {
            return Err(Error::InvalidInput(format!("task {} has no training samples", t.task_id())));
        }
        if let Some(i) = (0..t.n()).find(|&i| t.sq_norm(i) == 0.0) {
            return Err(Error::InvalidInput(format!("task {} sample {i} is the zero vector", t.task_id())));
        }
    }
    for t in tasks.iter().chain(tests) {
        if problem == Problem::Classification && t.labels().iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidInput(format!("task {} has labels outside {{-1, +1}}", t.task_id())));
        }
    }
    let zero = vec![0.0; d];
    for t in tests {
        evaluate(problem, &zero, &zero, t).map_err(|e| {
            Error::InvalidInput(format!("test set of task {} cannot be scored: {e}", t.task_id()))
        })?;
    }
    Ok(d)
}

impl Simulation {
    pub fn new(config: &SimConfig, tasks: &[TaskData], tests: &[TaskData]) -> Result<Self> {
        config.validate(tasks.len())?;
        let d = check_data(config.problem, tasks, tests)?;
        let mut params = config.params;
        let (train, delays, eval_map) = match config.mode {
            Mode::Mtl | Mode::Local => (tasks.to_vec(), config.delays.clone(), (0..tasks.len()).collect()),
            Mode::Global => {
                params.c2 = f64::INFINITY;
                let hw: f64 = config.delays.iter().map(|m| m.hw_factor).sum();
                let pooled = TaskData::pool(0, tasks)?;
                (vec![pooled], vec![config.delays[0].with_hw_factor(hw)], vec![0; tasks.len()])
            }
        };
        let timed_out = |m: &DelayModel, t: &TaskData| m.mean(t.n(), d) == 0.0;
        let frozen_clock = match config.mode {
            Mode::Mtl => config.sum_time == 0.0 && delays.iter().zip(&train).any(|(m, t)| timed_out(m, t)),
            _ => delays.iter().zip(&train).all(|(m, t)| timed_out(m, t)),
        };
        if frozen_clock {
            return Err(Error::Config("zero delays need a positive sum_time to advance the clock".into()));
        }
        let participants = train.iter().map(|t| ParticipantState::zeros(config.problem, t)).collect();
        let streams = (0..train.len())
            .map(|k| Streams {
                delay: participant_rng(config.seed, Stream::Delay, k),
                order: participant_rng(config.seed, Stream::Order, k),
                mask: participant_rng(config.seed, Stream::Mask, k),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            params,
            local_clocks: vec![0.0; train.len()],
            delays,
            tasks: train,
            tests: tests.to_vec(),
            eval_map,
            participants,
            streams,
            w: vec![0.0; d],
            clock: 0.0,
            epoch: 0,
            quiet: 0,
            converged: false,
            records: Vec::new(),
        })
    }

    pub fn participants(&self) -> &[ParticipantState] {
        &self.participants
    }

    /// Training tasks as seen by the participants (pooled in global mode).
    pub fn tasks(&self) -> &[TaskData] {
        &self.tasks
    }

    pub fn params(&self) -> &Hyperparams {
        &self.params
    }

    /// The coordinator's shared component (MTL mode).
    pub fn coordinator_w(&self) -> &[f64] {
        &self.w
    }

    pub fn is_finished(&self) -> bool {
        self.converged || self.epoch >= self.config.max_epochs
    }

    pub fn model_state(&self) -> ModelState {
        ModelState {
            w: self.w.clone(),
            v: self.participants.iter().map(|p| p.v.clone()).collect(),
            duals: self.participants.iter().map(|p| p.dual.clone()).collect(),
            epoch: self.epoch,
        }
    }

    /// Runs one epoch; `None` once the run has finished.
    pub fn step(&mut self) -> Result<Option<&EpochRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let d = self.w.len();
        let delays: Vec<f64> = self
            .delays
            .iter()
            .zip(&self.tasks)
            .zip(&mut self.streams)
            .map(|((m, t), s)| sample_compute_delay(m, t.n(), d, &mut s.delay))
            .collect();
        let (responders, update_norm, time) = match self.config.mode {
            Mode::Mtl => self.shared_epoch(&delays)?,
            Mode::Local | Mode::Global => self.independent_epoch(&delays)?,
        };
        self.epoch += 1;
        if !responders.is_empty() {
            if update_norm <= self.config.stop_tolerance {
                self.quiet += 1;
            } else {
                self.quiet = 0;
            }
            self.converged = self.quiet >= 3;
        }
        let task_metrics = self.metrics()?;
        let mean_metric = task_metrics.iter().sum::<f64>() / task_metrics.len() as f64;
        let responder_fraction = responders.len() as f64 / self.tasks.len() as f64;
        let responders = match self.config.mode {
            Mode::Global => self.tests.iter().map(TaskData::task_id).collect(),
            _ => responders.iter().map(|&k| self.tasks[k].task_id()).collect(),
        };
        let record = EpochRecord {
            epoch: self.epoch,
            virtual_time: time,
            responders,
            responder_fraction,
            update_norm,
            w_digest: digest(self.shared_w()),
            task_metrics,
            mean_metric,
            dual_objective: self.dual_objective()?,
        };
        self.records.push(record);
        Ok(self.records.last())
    }

    fn shared_w(&self) -> &[f64] {
        match self.config.mode {
            Mode::Mtl => &self.w,
            _ => &self.participants[0].w,
        }
    }

    fn shared_epoch(&mut self, delays: &[f64]) -> Result<(Vec<usize>, f64, f64)> {
        let start = self.clock;
        let responded: Vec<bool> = delays.iter().map(|&t| t <= self.config.t_wait).collect();
        let close = if responded.iter().all(|&r| r) {
            delays.iter().cloned().fold(0.0, f64::max)
        } else {
            self.config.t_wait
        };
        let next = start + close + self.config.sum_time;
        let mut updates = Vec::new();
        let mut responders = Vec::new();
        for k in 0..self.tasks.len() {
            let (task, state, streams) = (&self.tasks[k], &mut self.participants[k], &mut self.streams[k]);
            if responded[k] {
                let result = sweep(state, task, &self.params, &mut streams.order)?;
                let update = if self.config.mask.family == MaskFamily::None {
                    result.delta_w
                } else {
                    let mask = generate_mask(&self.config.mask, task.n(), &mut streams.mask)?;
                    masked_update(&result.per_sample_deltas, task, &mask, self.config.problem)?
                };
                updates.push(update);
                responders.push(k);
            } else {
                let done = (task.n() as f64 * (next - start) / delays[k]).floor();
                let limit = if done.is_finite() { (done as usize).min(task.n()) } else { task.n() };
                sweep_prefix(state, task, &self.params, &mut streams.order, limit)?;
            }
        }
        let total = aggregate(&vec![0.0; self.w.len()], &updates)?;
        self.w = aggregate(&self.w, &updates)?;
        for p in &mut self.participants {
            apply_global(p, &self.w)?;
        }
        self.clock = next;
        Ok((responders, norm2(&total), next))
    }

    fn independent_epoch(&mut self, delays: &[f64]) -> Result<(Vec<usize>, f64, f64)> {
        let mut sq = 0.0;
        for (k, delay) in delays.iter().enumerate() {
            let result = sweep(&mut self.participants[k], &self.tasks[k], &self.params, &mut self.streams[k].order)?;
            sq += norm_sq(&result.delta_w);
            self.local_clocks[k] += delay;
        }
        self.clock = self.local_clocks.iter().cloned().fold(0.0, f64::max);
        Ok(((0..self.tasks.len()).collect(), sq.sqrt(), self.clock))
    }

    fn metrics(&self) -> Result<Vec<f64>> {
        self.tests
            .iter()
            .zip(&self.eval_map)
            .map(|(test, &k)| {
                let p = &self.participants[k];
                evaluate(self.config.problem, &p.w, &p.v, test)
            })
            .collect()
    }

    fn dual_objective(&self) -> Result<f64> {
        let state = self.model_state();
        match self.config.problem {
            Problem::Classification => dual_objective_classification(&state, &self.tasks, &self.params),
            Problem::Regression => dual_objective_regression(&state, &self.tasks, &self.params),
        }
    }

    pub fn finish(mut self) -> Result<SimTrace> {
        while self.step()?.is_some() {}
        let final_models = self
            .tests
            .iter()
            .zip(&self.eval_map)
            .map(|(t, &k)| TaskModel {
                task_id: t.task_id(),
                w: self.participants[k].w.clone(),
                v: self.participants[k].v.clone(),
            })
            .collect();
        Ok(SimTrace {
            mode: self.config.mode,
            problem: self.config.problem,
            metric_name: metric_name(self.config.problem).to_string(),
            task_ids: self.tests.iter().map(TaskData::task_id).collect(),
            epochs: self.records,
            converged: self.converged,
            final_models,
        })
    }
}

/// Runs the configured mode to completion.
pub fn run(config: &SimConfig, tasks: &[TaskData], tests: &[TaskData]) -> Result<SimTrace> {
    Simulation::new(config, tasks, tests)?.finish()
}

fn with_mode(config: &SimConfig, mode: Mode) -> SimConfig {
    SimConfig { mode, ..config.clone() }
}

/// Federated multi-task training.
pub fn run_simulation(config: &SimConfig, tasks: &[TaskData], tests: &[TaskData]) -> Result<SimTrace> {
    run(&with_mode(config, Mode::Mtl), tasks, tests)
}

/// One model trained by the coordinator on the pooled data of all
/// participants, with `v` pinned to zero. The coordinator's compute speed
/// is the sum of the participants' hardware factors.
pub fn run_global_baseline(config: &SimConfig, tasks: &[TaskData], tests: &[TaskData]) -> Result<SimTrace> {
    run(&with_mode(config, Mode::Global), tasks, tests)
}

/// Every participant trains `w + v_k` on its own data without communicating.
pub fn run_local_baseline(config: &SimConfig, tasks: &[TaskData], tests: &[TaskData]) -> Result<SimTrace> {
    run(&with_mode(config, Mode::Local), tasks, tests)
}
