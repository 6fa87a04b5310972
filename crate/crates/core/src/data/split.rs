use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Problem, TaskData};

/// Seeded shuffle-and-split. `train_fraction * n` is rounded to the nearest
/// integer and kept in `[1, n - 1]`. Classification splits allocate the
/// training quota to each class by largest remainder (positive class first
/// on ties), so class proportions are preserved up to rounding.
pub fn split_train_test<R: Rng + ?Sized>(
    task: &TaskData,
    train_fraction: f64,
    problem: Problem,
    rng: &mut R,
) -> Result<(TaskData, TaskData)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let n = task.n();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "task {} has {n} samples, too few to split",
            task.task_id()
        )));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    match problem {
        Problem::Regression => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            train.extend_from_slice(&idx[..n_train]);
            test.extend_from_slice(&idx[n_train..]);
        }
        Problem::Classification => {
            let mut classes: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
            for i in 0..n {
                classes[usize::from(task.label(i) <= 0.0)].push(i);
            }
            for class in classes.iter_mut() {
                class.shuffle(rng);
            }
            let quotas: Vec<f64> =
                classes.iter().map(|c| c.len() as f64 * n_train as f64 / n as f64).collect();
            let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
            let mut order: Vec<usize> = (0..classes.len()).collect();
            order.sort_by(|&a, &b| {
                let ra = quotas[a] - quotas[a].floor();
                let rb = quotas[b] - quotas[b].floor();
                rb.total_cmp(&ra).then(a.cmp(&b))
            });
            let mut remaining = n_train - take.iter().sum::<usize>();
            for &c in order.iter().cycle() {
                if remaining == 0 {
                    break;
                }
                if take[c] < classes[c].len() {
                    take[c] += 1;
                    remaining -= 1;
                }
            }
            for (class, &t) in classes.iter().zip(&take) {
                train.extend_from_slice(&class[..t]);
                test.extend_from_slice(&class[t..]);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((task.select(&train), task.select(&test)))
}

/// Seeded partition into `k` folds whose sizes differ by at most one.
pub fn kfold<R: Rng + ?Sized>(task: &TaskData, k: usize, rng: &mut R) -> Result<Vec<(TaskData, TaskData)>> {
    let n = task.n();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cannot make {k} folds from {n} samples")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut validation = idx[start..start + size].to_vec();
        let mut train: Vec<usize> = idx[..start].iter().chain(&idx[start + size..]).copied().collect();
        validation.sort_unstable();
        train.sort_unstable();
        folds.push((task.select(&train), task.select(&validation)));
        start += size;
    }
    Ok(folds)
}

/// Per-feature standardisation fitted on one task's training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(task: &TaskData) -> Result<Self> {
        let n = task.n();
        if n == 0 {
            return Err(Error::InvalidInput("cannot fit a standardizer on an empty task".into()));
        }
        let d = task.d();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(task.sample(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((v, x), m) in var.iter_mut().zip(task.sample(i)).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, task: &TaskData) -> Result<TaskData> {
        crate::error::check_len(self.mean.len(), task.d())?;
        Ok(task.map_features(|j, x| (x - self.mean[j]) / self.scale[j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn task(labels: &[f64]) -> TaskData {
        let features: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
        TaskData::new(0, 1, features, labels.to_vec()).unwrap()
    }

    fn ids(t: &TaskData) -> Vec<i64> {
        (0..t.n()).map(|i| t.sample(i)[0] as i64).collect()
    }

    #[test]
    fn seventy_percent_of_ten() {
        let t = task(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        for problem in [Problem::Classification, Problem::Regression] {
            let (train, test) = split_train_test(&t, 0.7, problem, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            assert_eq!((train.n(), test.n()), (7, 3));
        }
    }

    #[test]
    fn two_samples_split_one_one() {
        let t = task(&[1.0, -1.0]);
        let (train, test) =
            split_train_test(&t, 0.5, Problem::Classification, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((train.n(), test.n()), (1, 1));
    }

    #[test]
    fn stratification_keeps_both_classes_in_train() {
        let mut labels = vec![-1.0; 18];
        labels.extend([1.0, 1.0]);
        let t = task(&labels);
        for seed in 0..20 {
            let (train, _) =
                split_train_test(&t, 0.7, Problem::Classification, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(train.labels().iter().filter(|&&y| y > 0.0).count(), 1);
        }
    }

    #[test]
    fn same_seed_same_split() {
        let t = task(&[1.0; 30]);
        let a = split_train_test(&t, 0.7, Problem::Regression, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = split_train_test(&t, 0.7, Problem::Regression, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_errors() {
        let t = task(&[1.0]);
        assert!(split_train_test(&t, 0.5, Problem::Classification, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        let t = task(&[1.0, -1.0]);
        assert!(split_train_test(&t, 1.0, Problem::Regression, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn kfold_sizes_and_coverage() {
        let t = task(&[0.0; 10]);
        let folds = kfold(&t, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(folds.iter().all(|(tr, va)| tr.n() == 8 && va.n() == 2));
        let mut all: Vec<i64> = folds.iter().flat_map(|(_, va)| ids(va)).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let loo = kfold(&t, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(loo.iter().all(|(tr, va)| tr.n() == 9 && va.n() == 1));
        assert!(kfold(&t, 11, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn standardizer_uses_training_statistics() {
        let train = TaskData::new(0, 2, vec![1.0, 5.0, 3.0, 5.0], vec![0.0, 0.0]).unwrap();
        let s = Standardizer::fit(&train).unwrap();
        let out = s.apply(&train).unwrap();
        assert_eq!(out.sample(0), &[-1.0, 0.0]);
        assert_eq!(out.sample(1), &[1.0, 0.0]);
        let other = TaskData::new(0, 2, vec![4.0, 6.0], vec![0.0]).unwrap();
        assert_eq!(s.apply(&other).unwrap().sample(0), &[2.0, 1.0]);
    }

    proptest! {
        #[test]
        fn split_partitions_task(n in 2usize..60, frac in 0.05f64..0.95, seed in 0u64..1000, cls in any::<bool>()) {
            let labels: Vec<f64> = (0..n).map(|i| if (i * 7 + seed as usize).is_multiple_of(3) { 1.0 } else { -1.0 }).collect();
            let t = task(&labels);
            let problem = if cls { Problem::Classification } else { Problem::Regression };
            let (train, test) = split_train_test(&t, frac, problem, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut all = ids(&train);
            all.extend(ids(&test));
            all.sort_unstable();
            prop_assert_eq!(all, (0..n as i64).collect::<Vec<_>>());
            prop_assert!((train.n() as f64 - frac * n as f64).abs() <= 1.0);
        }
    }
}
