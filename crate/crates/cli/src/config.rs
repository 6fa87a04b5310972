//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mtsvm::data::SyntheticSpec;
use mtsvm::federation::{DelayModel, Mode};
use mtsvm::masking::MaskSpec;
use mtsvm::{Hyperparams, Problem};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: Problem,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    /// Target responder fractions of the MTL runs; `1.0` waits for everyone.
    #[serde(default = "default_fractions")]
    pub responder_fractions: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub params: Hyperparams,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub delay: DelaySection,
    pub data: DataSection,
    #[serde(default)]
    pub mask: MaskSpec,
    #[serde(default)]
    pub mask_study: MaskStudySection,
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Mtl, Mode::Global, Mode::Local]
}
fn default_fractions() -> Vec<f64> {
    vec![1.0]
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_train_fraction() -> f64 {
    0.7
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub sum_time: f64,
    pub max_epochs: usize,
    pub stop_tolerance: f64,
    /// Delay draws used to turn a responder fraction into `t_wait`.
    pub calibration_samples: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { sum_time: 0.0, max_epochs: 200, stop_tolerance: 0.0, calibration_samples: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Hardware {
    #[default]
    Homogeneous,
    /// Hardware factors spaced evenly over `hw_range`.
    Heterogeneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelaySection {
    pub c_nd: f64,
    pub c_n: f64,
    pub c_d: f64,
    pub c_0: f64,
    pub sigma_ratio: f64,
    pub hardware: Hardware,
    pub hw_range: (f64, f64),
    /// Explicit per-participant factors; overrides `hardware`.
    pub hw_factors: Option<Vec<f64>>,
}

impl Default for DelaySection {
    fn default() -> Self {
        let m = DelayModel::default();
        Self {
            c_nd: m.c_nd,
            c_n: m.c_n,
            c_d: m.c_d,
            c_0: m.c_0,
            sigma_ratio: m.sigma_ratio,
            hardware: Hardware::Homogeneous,
            hw_range: (1.0, 10.0),
            hw_factors: None,
        }
    }
}

impl DelaySection {
    pub fn models(&self, num_tasks: usize) -> CliResult<Vec<DelayModel>> {
        let base = DelayModel {
            c_nd: self.c_nd,
            c_n: self.c_n,
            c_d: self.c_d,
            c_0: self.c_0,
            sigma_ratio: self.sigma_ratio,
            hw_factor: 1.0,
        };
        let factors = match (&self.hw_factors, self.hardware) {
            (Some(f), _) => {
                if f.len() != num_tasks {
                    return Err(CliError::Config(format!(
                        "delay.hw_factors has {} entries for {num_tasks} participants",
                        f.len()
                    )));
                }
                f.clone()
            }
            (None, Hardware::Homogeneous) => vec![1.0; num_tasks],
            (None, Hardware::Heterogeneous) => {
                let (lo, hi) = self.hw_range;
                if num_tasks == 1 {
                    vec![lo]
                } else {
                    (0..num_tasks).map(|k| lo + (hi - lo) * k as f64 / (num_tasks - 1) as f64).collect()
                }
            }
        };
        let models: Vec<DelayModel> = factors.into_iter().map(|f| base.with_hw_factor(f)).collect();
        for m in &models {
            m.validate().map_err(|e| CliError::Config(format!("delay: {e}")))?;
        }
        Ok(models)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSection {
    Synthetic(SyntheticSection),
    Ucihar(UciharSection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub num_tasks: usize,
    pub n_per_task: usize,
    pub d: usize,
    #[serde(default = "zero_range")]
    pub feature_mean_range: (f64, f64),
    #[serde(default = "unit_range")]
    pub feature_std_range: (f64, f64),
    #[serde(default)]
    pub task_component_scale: f64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_separation")]
    pub class_separation: f64,
}

fn zero_range() -> (f64, f64) {
    (0.0, 0.0)
}
fn unit_range() -> (f64, f64) {
    (1.0, 1.0)
}
fn default_snr() -> f64 {
    20.0
}
fn default_separation() -> f64 {
    2.0
}

impl SyntheticSection {
    pub fn spec(&self, problem: Problem) -> SyntheticSpec {
        SyntheticSpec {
            problem,
            num_tasks: self.num_tasks,
            n_per_task: self.n_per_task,
            d: self.d,
            feature_mean_range: self.feature_mean_range,
            feature_std_range: self.feature_std_range,
            task_component_scale: self.task_component_scale,
            snr_db: self.snr_db,
            class_separation: self.class_separation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UciharSection {
    /// Directory holding the published `train/` and `test/` folders.
    pub root: Option<PathBuf>,
    pub positive_class_id: i64,
    pub max_tasks: Option<usize>,
    /// Keep only the first `truncate` samples of each subject.
    pub truncate: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskStudySection {
    pub bernoulli: Vec<f64>,
    pub beta_ratios: Vec<f64>,
    pub beta_a: f64,
    pub beta_b: f64,
    /// Samples per task of the light dataset.
    pub light_n: usize,
}

impl Default for MaskStudySection {
    fn default() -> Self {
        Self {
            bernoulli: vec![1.0, 0.75, 0.5, 0.25],
            beta_ratios: vec![1.0, 0.75, 0.5, 0.25],
            beta_a: 2.0,
            beta_b: 0.5,
            light_n: 100,
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            CliError::Config(format!("{origin}:{line}: {}", e.message()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
        Ok((Self::parse(text, &path.display().to_string())?, bytes))
    }

    pub fn num_tasks(&self) -> Option<usize> {
        match &self.data {
            DataSection::Synthetic(s) => Some(s.num_tasks),
            DataSection::Ucihar(_) => None,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name {:?} must be a plain non-empty file stem", self.name));
        }
        self.params.validate().map_err(|e| CliError::Config(format!("params: {e}")))?;
        self.mask.validate().map_err(|e| CliError::Config(format!("mask: {e}")))?;
        if self.modes.is_empty() {
            return bad("modes must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.responder_fractions.is_empty()
            || self.responder_fractions.iter().any(|r| !(*r > 0.0 && *r <= 1.0))
        {
            return bad("responder_fractions must be non-empty values in (0, 1]".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} not in (0, 1)", self.train_fraction));
        }
        let sim = &self.simulation;
        if sim.max_epochs == 0 || sim.calibration_samples == 0 {
            return bad("simulation.max_epochs and calibration_samples must be positive".into());
        }
        if !(sim.sum_time >= 0.0 && sim.sum_time.is_finite()) || !(sim.stop_tolerance >= 0.0) {
            return bad("simulation.sum_time and stop_tolerance must be non-negative".into());
        }
        let (lo, hi) = self.delay.hw_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("delay.hw_range ({lo}, {hi}) is invalid"));
        }
        match &self.data {
            DataSection::Synthetic(s) => {
                s.spec(self.problem).validate().map_err(|e| CliError::Config(format!("data.synthetic: {e}")))?;
                self.delay.models(s.num_tasks)?;
            }
            DataSection::Ucihar(u) => {
                if self.problem != Problem::Classification {
                    return bad("UCIHAR data supports classification only".into());
                }
                if u.max_tasks == Some(0) || u.truncate.is_some_and(|t| t < 2) {
                    return bad("data.ucihar.max_tasks / truncate too small".into());
                }
            }
        }
        let study = &self.mask_study;
        if study.bernoulli.iter().any(|p| !(0.0..=1.0).contains(p))
            || study.beta_ratios.iter().any(|r| !(0.0..=1.0).contains(r))
            || !(study.beta_a > 0.0 && study.beta_b > 0.0)
            || study.light_n < 2
        {
            return bad("mask_study values out of range".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
problem = "classification"

[params]
c1 = 1.0
c2 = 0.05

[data.synthetic]
num_tasks = 3
n_per_task = 20
d = 4
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::parse(MINIMAL, "t.toml").unwrap();
        assert_eq!(c.modes, default_modes());
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.simulation.max_epochs, 200);
        assert_eq!(c.delay.models(3).unwrap().len(), 3);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = MINIMAL.replace("d = 4", "d = 4\ncolour = 3");
        match ExperimentConfig::parse(&text, "t.toml") {
            Err(CliError::Config(msg)) => assert!(msg.starts_with("t.toml:13:"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn heterogeneous_hardware_spans_range() {
        let text = format!("{MINIMAL}\n[delay]\nhardware = \"heterogeneous\"\n");
        let c = ExperimentConfig::parse(&text, "t").unwrap();
        let f: Vec<f64> = c.delay.models(3).unwrap().iter().map(|m| m.hw_factor).collect();
        assert_eq!(f, vec![1.0, 5.5, 10.0]);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (from, to) in [("c2 = 0.05", "c2 = -1.0"), ("d = 4", "d = 0"), ("name = \"t\"", "name = \"a/b\"")] {
            assert!(ExperimentConfig::parse(&MINIMAL.replace(from, to), "t").is_err());
        }
        let text = format!("responder_fractions = [0.0]\n{MINIMAL}");
        assert!(ExperimentConfig::parse(&text, "t").is_err());
    }
}
