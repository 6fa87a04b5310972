//! Random masking of the shared update.
//!
//! A participant's shared update is `sum_i h_i x_i`, one term per training
//! point. Masking scales each term by a random weight `p_i` before the
//! update leaves the participant: Bernoulli weights drop points, Beta
//! weights attenuate them. The participant's own `w` and `v_k` keep the
//! unmasked increments.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::axpy;
use crate::model::{Problem, TaskData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MaskFamily {
    #[default]
    None,
    Bernoulli,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskSpec {
    pub family: MaskFamily,
    /// Probability that a point is kept (Bernoulli family).
    pub bernoulli_p: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    /// Fraction of points left unmasked (Beta family).
    pub unaffected_ratio: f64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self { family: MaskFamily::None, bernoulli_p: 1.0, beta_a: 2.0, beta_b: 0.5, unaffected_ratio: 0.0 }
    }
}

impl MaskSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn bernoulli(p: f64) -> Self {
        Self { family: MaskFamily::Bernoulli, bernoulli_p: p, ..Self::default() }
    }

    pub fn beta(a: f64, b: f64, unaffected_ratio: f64) -> Self {
        Self { family: MaskFamily::Beta, beta_a: a, beta_b: b, unaffected_ratio, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        match self.family {
            MaskFamily::None => Ok(()),
            MaskFamily::Bernoulli => unit("bernoulli_p", self.bernoulli_p),
            MaskFamily::Beta => {
                if !(self.beta_a > 0.0 && self.beta_b > 0.0)
                    || !self.beta_a.is_finite()
                    || !self.beta_b.is_finite()
                {
                    return Err(Error::InvalidInput(format!(
                        "beta parameters must be positive, got a={} b={}",
                        self.beta_a, self.beta_b
                    )));
                }
                unit("unaffected_ratio", self.unaffected_ratio)
            }
        }
    }

    /// Short label for file names and legends, e.g. `bernoulli(0.75)`.
    pub fn label(&self) -> String {
        match self.family {
            MaskFamily::None => "none".into(),
            MaskFamily::Bernoulli => format!("bernoulli({})", self.bernoulli_p),
            MaskFamily::Beta => {
                format!("beta({},{},r={})", self.beta_a, self.beta_b, self.unaffected_ratio)
            }
        }
    }
}

/// Draws a mask of length `n`.
pub fn generate_mask<R: Rng + ?Sized>(spec: &MaskSpec, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("mask length must be at least 1".into()));
    }
    Ok(match spec.family {
        MaskFamily::None => vec![1.0; n],
        MaskFamily::Bernoulli => {
            (0..n).map(|_| if rng.random_bool(spec.bernoulli_p) { 1.0 } else { 0.0 }).collect()
        }
        MaskFamily::Beta => {
            let beta = Beta::new(spec.beta_a, spec.beta_b)
                .map_err(|e| Error::InvalidInput(format!("beta distribution: {e}")))?;
            let keep = ((spec.unaffected_ratio * n as f64).ceil() as usize).min(n);
            let mut untouched = vec![false; n];
            for i in index::sample(rng, n, keep) {
                untouched[i] = true;
            }
            untouched.into_iter().map(|u| if u { 1.0 } else { beta.sample(rng) }).collect()
        }
    })
}

/// `sum_i p_i * h_i * x_i` over the coefficients changed in one sweep, with
/// `h_i = delta_i * y_i` for classification and `h_i = delta_i` for regression.
///
/// Terms are summed in sweep order, so an all-ones mask reproduces the
/// unmasked update bit-for-bit.
pub fn masked_update(
    per_sample_deltas: &[(usize, f64)],
    task: &TaskData,
    mask: &[f64],
    problem: Problem,
) -> Result<Vec<f64>> {
    check_len(task.n(), mask.len())?;
    let mut out = vec![0.0; task.d()];
    for &(i, delta) in per_sample_deltas {
        if i >= task.n() {
            return Err(Error::InvalidInput(format!("sample index {i} out of range")));
        }
        if delta == 0.0 {
            continue;
        }
        let coef = match problem {
            Problem::Classification => delta * task.label(i),
            Problem::Regression => delta,
        };
        axpy(mask[i] * coef, task.sample(i), &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Hyperparams;
    use crate::solver::{classification::local_sweep, ParticipantState};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_task() -> TaskData {
        let rows: Vec<Vec<f64>> =
            (0..6).map(|i| vec![1.0 + 0.2 * i as f64, (i as f64).sin(), 0.5]).collect();
        let labels = (0..6).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        TaskData::from_rows(0, &rows, labels).unwrap()
    }

    #[test]
    fn degenerate_masks_are_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(generate_mask(&MaskSpec::bernoulli(1.0), 5, &mut rng).unwrap(), vec![1.0; 5]);
        assert_eq!(generate_mask(&MaskSpec::beta(2.0, 0.5, 1.0), 5, &mut rng).unwrap(), vec![1.0; 5]);
        assert_eq!(generate_mask(&MaskSpec::none(), 5, &mut rng).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn beta_mask_mean_matches_distribution_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mask = generate_mask(&MaskSpec::beta(2.0, 0.5, 0.0), 100_000, &mut rng).unwrap();
        let mean = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 0.8).abs() < 0.02, "mean {mean}");
        assert!(mask.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn beta_mask_leaves_requested_fraction_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mask = generate_mask(&MaskSpec::beta(2.0, 0.5, 0.25), 10, &mut rng).unwrap();
        assert!(mask.iter().filter(|&&p| p == 1.0).count() >= 3);
    }

    #[test]
    fn bernoulli_mask_is_binary_with_expected_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mask = generate_mask(&MaskSpec::bernoulli(0.25), 40_000, &mut rng).unwrap();
        assert!(mask.iter().all(|&p| p == 0.0 || p == 1.0));
        let rate = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((rate - 0.25).abs() < 0.01);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_mask(&MaskSpec::bernoulli(1.5), 3, &mut rng).is_err());
        assert!(generate_mask(&MaskSpec::beta(0.0, 1.0, 0.5), 3, &mut rng).is_err());
        assert!(generate_mask(&MaskSpec::beta(2.0, 0.5, -0.1), 3, &mut rng).is_err());
        assert!(generate_mask(&MaskSpec::none(), 0, &mut rng).is_err());
    }

    #[test]
    fn masked_update_examples() {
        let t = TaskData::from_rows(0, &[vec![1.0, 0.0]], vec![1.0]).unwrap();
        let p = Hyperparams::new(10.0, 1.0, 0.0).unwrap();
        let mut s = ParticipantState::zeros(Problem::Classification, &t);
        let r = local_sweep(&mut s, &t, &p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let cls = Problem::Classification;
        assert_eq!(masked_update(&r.per_sample_deltas, &t, &[1.0], cls).unwrap(), r.delta_w);
        assert_eq!(masked_update(&r.per_sample_deltas, &t, &[0.0], cls).unwrap(), vec![0.0, 0.0]);
        assert_eq!(masked_update(&r.per_sample_deltas, &t, &[1.0], cls).unwrap(), vec![0.5, 0.0]);
        assert!(masked_update(&r.per_sample_deltas, &t, &[1.0, 1.0], cls).is_err());
    }

    #[test]
    fn all_ones_mask_is_bit_identical_to_sweep_delta() {
        let t = small_task();
        let p = Hyperparams::new(1.0, 0.5, 0.0).unwrap();
        let mut s = ParticipantState::zeros(Problem::Classification, &t);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let r = local_sweep(&mut s, &t, &p, &mut rng).unwrap();
            let m = masked_update(&r.per_sample_deltas, &t, &[1.0; 6], Problem::Classification)
                .unwrap();
            assert_eq!(m, r.delta_w);
        }
    }

    #[test]
    fn drift_between_local_and_shared_update() {
        let t = small_task();
        let p = Hyperparams::new(1.0, 0.5, 0.0).unwrap();
        let mut s = ParticipantState::zeros(Problem::Classification, &t);
        let r = local_sweep(&mut s, &t, &p, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mask = [1.0, 0.0, 0.3, 1.0, 0.9, 0.0];
        let shared = masked_update(&r.per_sample_deltas, &t, &mask, Problem::Classification).unwrap();
        let mut drift = vec![0.0; 3];
        for &(i, d) in &r.per_sample_deltas {
            axpy((1.0 - mask[i]) * d * t.label(i), t.sample(i), &mut drift);
        }
        for j in 0..3 {
            assert!((s.w[j] - shared[j] - drift[j]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn masked_update_is_linear_in_the_mask(
            p1 in prop::collection::vec(0.0f64..1.0, 6),
            p2 in prop::collection::vec(0.0f64..1.0, 6),
            seed in 0u64..1000,
        ) {
            let t = small_task();
            let params = Hyperparams::new(1.0, 0.5, 0.0).unwrap();
            let mut s = ParticipantState::zeros(Problem::Classification, &t);
            let r = local_sweep(&mut s, &t, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let cls = Problem::Classification;
            let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
            let a = masked_update(&r.per_sample_deltas, &t, &p1, cls).unwrap();
            let b = masked_update(&r.per_sample_deltas, &t, &p2, cls).unwrap();
            let ab = masked_update(&r.per_sample_deltas, &t, &sum, cls).unwrap();
            for j in 0..3 {
                prop_assert!((ab[j] - a[j] - b[j]).abs() < 1e-12);
            }
        }
    }
}
