//! Shared domain types: per-participant data, hyperparameters, the
//! multi-task model `(w, v_1..v_K, dual variables)` and its decision rule.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::solver::regression::RegressionDualState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Classification,
    Regression,
}

/// One participant's training samples.
///
/// Samples are stored contiguously, `d` values per sample, so `sample(i)`
/// is the `i`-th column of the `d x n_k` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    task_id: usize,
    d: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    sq_norms: Vec<f64>,
}

impl TaskData {
    pub fn new(task_id: usize, d: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("feature dimension must be positive".into()));
        }
        check_len(labels.len() * d, features.len())?;
        if let Some(pos) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "task {task_id}: non-finite feature at sample {}",
                pos / d
            )));
        }
        if labels.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!("task {task_id}: non-finite label")));
        }
        Ok(Self::assemble(task_id, d, features, labels))
    }

    fn assemble(task_id: usize, d: usize, features: Vec<f64>, labels: Vec<f64>) -> Self {
        let sq_norms = features.chunks_exact(d).map(norm_sq).collect();
        Self { task_id, d, features, labels, sq_norms }
    }

    /// Builds a task from per-sample rows.
    pub fn from_rows(task_id: usize, rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let mut features = Vec::with_capacity(rows.len() * d);
        for row in rows {
            check_len(d, row.len())?;
            features.extend_from_slice(row);
        }
        Self::new(task_id, d, features, labels)
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// `||x_i||^2`, cached at construction.
    #[inline]
    pub fn sq_norm(&self, i: usize) -> f64 {
        self.sq_norms[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// New task holding the given sample indices, in that order.
    pub fn select(&self, indices: &[usize]) -> TaskData {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        TaskData::assemble(self.task_id, self.d, features, labels)
    }

    /// Keeps the first `n` samples.
    pub fn truncate(&self, n: usize) -> TaskData {
        let n = n.min(self.n());
        let idx: Vec<usize> = (0..n).collect();
        self.select(&idx)
    }

    pub fn with_task_id(mut self, task_id: usize) -> TaskData {
        self.task_id = task_id;
        self
    }

    pub(crate) fn map_features(&self, f: impl Fn(usize, f64) -> f64) -> TaskData {
        let d = self.d;
        let features = self.features.iter().enumerate().map(|(p, &x)| f(p % d, x)).collect();
        TaskData::assemble(self.task_id, d, features, self.labels.clone())
    }

    /// Concatenates tasks into one pooled task (used by the global baseline).
    pub fn pool(task_id: usize, tasks: &[TaskData]) -> Result<TaskData> {
        let d = common_dimension(tasks)?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for t in tasks {
            features.extend_from_slice(&t.features);
            labels.extend_from_slice(&t.labels);
        }
        Ok(TaskData::assemble(task_id, d, features, labels))
    }
}

/// Checks that all tasks share one feature dimension and returns it.
pub fn common_dimension(tasks: &[TaskData]) -> Result<usize> {
    let first = tasks.first().ok_or_else(|| Error::InvalidInput("no tasks given".into()))?;
    for t in tasks {
        check_len(first.d, t.d)?;
    }
    Ok(first.d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    /// Slack penalty; also the upper bound of every dual variable.
    pub c1: f64,
    /// Weight of the task-specific components; large values push `v_k` to zero.
    pub c2: f64,
    /// Half-width of the regression tube. Ignored for classification.
    #[serde(default)]
    pub epsilon: f64,
}

impl Hyperparams {
    pub fn new(c1: f64, c2: f64, epsilon: f64) -> Result<Self> {
        let p = Self { c1, c2, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidInput(format!("c1 must be positive, got {}", self.c1)));
        }
        if !(self.c2 > 0.0) || self.c2.is_nan() {
            return Err(Error::InvalidInput(format!("c2 must be positive, got {}", self.c2)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Per-task dual variables.
#[derive(Debug, Clone, PartialEq)]
pub enum DualVars {
    Classification(Vec<f64>),
    Regression(RegressionDualState),
}

impl DualVars {
    pub fn zeros(problem: Problem, n: usize) -> Self {
        match problem {
            Problem::Classification => DualVars::Classification(vec![0.0; n]),
            Problem::Regression => DualVars::Regression(RegressionDualState::zeros(n)),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DualVars::Classification(a) => a.len(),
            DualVars::Regression(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn problem(&self) -> Problem {
        match self {
            DualVars::Classification(_) => Problem::Classification,
            DualVars::Regression(_) => Problem::Regression,
        }
    }

    /// Signed coefficient of sample `i` in `w = sum coef_i x_i`:
    /// `alpha_i * y_i` for classification, `alpha_i^- - alpha_i^+` for regression.
    pub fn coefficient(&self, i: usize, label: f64) -> f64 {
        match self {
            DualVars::Classification(a) => a[i] * label,
            DualVars::Regression(r) => r.delta_alpha()[i],
        }
    }
}

/// Full multi-task model: global `w`, per-task `v_k` and dual state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub w: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub duals: Vec<DualVars>,
    pub epoch: usize,
}

impl ModelState {
    pub fn zeros(problem: Problem, tasks: &[TaskData]) -> Result<Self> {
        let d = common_dimension(tasks)?;
        Ok(Self {
            w: vec![0.0; d],
            v: vec![vec![0.0; d]; tasks.len()],
            duals: tasks.iter().map(|t| DualVars::zeros(problem, t.n())).collect(),
            epoch: 0,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.v.len()
    }

    pub fn d(&self) -> usize {
        self.w.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub raw: f64,
    pub label: f64,
}

/// `sign` with `sign(0) = +1`.
#[inline]
pub fn sign_label(raw: f64) -> f64 {
    if raw >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `(w + v_task)^T x`.
pub fn decision_value(model: &ModelState, task: usize, x: &[f64]) -> Result<f64> {
    let v = model.v.get(task).ok_or_else(|| {
        Error::InvalidInput(format!("task index {task} out of range ({} tasks)", model.v.len()))
    })?;
    raw_decision(&model.w, v, x)
}

/// Decision value for explicit components.
pub fn raw_decision(w: &[f64], v: &[f64], x: &[f64]) -> Result<f64> {
    check_len(w.len(), x.len())?;
    check_len(w.len(), v.len())?;
    Ok(dot(w, x) + dot(v, x))
}

pub fn predict(model: &ModelState, task: usize, x: &[f64]) -> Result<Prediction> {
    let raw = decision_value(model, task, x)?;
    Ok(Prediction { raw, label: sign_label(raw) })
}

/// Decision values of `(w + v)` on every sample of `task`.
pub fn decision_values(w: &[f64], v: &[f64], task: &TaskData) -> Result<Vec<f64>> {
    check_len(w.len(), task.d())?;
    check_len(w.len(), v.len())?;
    Ok((0..task.n()).map(|i| dot(w, task.sample(i)) + dot(v, task.sample(i))).collect())
}

/// `max(0, |z| - epsilon)`.
#[inline]
pub fn epsilon_insensitive(z: f64, epsilon: f64) -> f64 {
    (z.abs() - epsilon).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(w: Vec<f64>, v: Vec<f64>) -> ModelState {
        ModelState { w, v: vec![v], duals: vec![DualVars::Classification(vec![])], epoch: 0 }
    }

    #[test]
    fn decision_value_examples() {
        assert_eq!(decision_value(&model(vec![0., 0.], vec![0., 0.]), 0, &[3., 4.]).unwrap(), 0.0);
        assert_eq!(decision_value(&model(vec![1., 0.], vec![0., 1.]), 0, &[2., 3.]).unwrap(), 5.0);
        let m = model(vec![1., 1.], vec![-1., -1.]);
        for x in [[0.3, -7.0], [1e3, 2.5], [-4.0, 4.0]] {
            assert_eq!(decision_value(&m, 0, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn decision_value_rejects_bad_input() {
        let m = model(vec![1., 0.], vec![0., 1.]);
        assert!(matches!(
            decision_value(&m, 0, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(decision_value(&m, 3, &[1.0, 2.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn predict_breaks_ties_towards_positive() {
        let m = model(vec![0., 0.], vec![0., 0.]);
        let p = predict(&m, 0, &[1.0, 1.0]).unwrap();
        assert_eq!(p.raw, 0.0);
        assert_eq!(p.label, 1.0);
        assert_eq!(sign_label(-1e-300), -1.0);
    }

    #[test]
    fn epsilon_insensitive_examples() {
        assert_eq!(epsilon_insensitive(0.05, 0.1), 0.0);
        assert!((epsilon_insensitive(-0.3, 0.1) - 0.2).abs() < 1e-15);
        for z in [-2.5, -0.1, 0.0, 0.7, 13.0] {
            assert_eq!(epsilon_insensitive(z, 0.0), z.abs());
        }
    }

    #[test]
    fn task_rejects_non_finite_and_ragged_input() {
        assert!(TaskData::new(0, 2, vec![1.0, f64::NAN], vec![1.0]).is_err());
        assert!(TaskData::new(0, 2, vec![1.0, 2.0, 3.0], vec![1.0]).is_err());
        assert!(TaskData::from_rows(0, &[vec![1.0, 2.0], vec![1.0]], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::new(1.0, 1.0, 0.0).is_ok());
        assert!(Hyperparams::new(0.0, 1.0, 0.0).is_err());
        assert!(Hyperparams::new(1.0, -1.0, 0.0).is_err());
        assert!(Hyperparams::new(1.0, 1.0, -0.1).is_err());
        assert!(Hyperparams::new(1.0, f64::INFINITY, 0.0).is_ok());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn epsilon_insensitive_is_even_nonneg_lipschitz(
            z1 in -1e3f64..1e3, z2 in -1e3f64..1e3, eps in 0.0f64..10.0
        ) {
            let l1 = epsilon_insensitive(z1, eps);
            prop_assert!(l1 >= 0.0);
            prop_assert_eq!(l1, epsilon_insensitive(-z1, eps));
            let l2 = epsilon_insensitive(z2, eps);
            prop_assert!((l1 - l2).abs() <= (z1 - z2).abs() + 1e-12);
        }
    }
}
