use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One cross-validation split, indices in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `0..labels.len()` into `k` disjoint test folds. With `stratify`,
/// each class is shuffled and dealt round-robin so every fold holds its
/// share of each class to within one sample.
pub fn kfold(labels: &[usize], k: usize, seed: u64, stratify: bool) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::invalid(format!("{} samples cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0usize; labels.len()];
    if stratify {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut next = 0;
        for c in 0..classes {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            if idx.is_empty() {
                continue;
            }
            if idx.len() < k {
                return Err(Error::invalid(format!("class {c} has {} samples, fewer than k = {k}", idx.len())));
            }
            idx.shuffle(&mut rng);
            for i in idx {
                assign[i] = next;
                next = (next + 1) % k;
            }
        }
    } else {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            assign[i] = pos * k / labels.len();
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train) = (0..labels.len()).partition(|&i| assign[i] == f);
            Fold { train, test }
        })
        .collect())
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_samples_five_folds() {
        let folds = kfold(&[0; 10], 5, 1, false).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.test.len() == 2 && f.train.len() == 8));
    }

    #[test]
    fn stratified_counts() {
        let labels: Vec<usize> = [vec![0; 100], vec![1; 50], vec![2; 10]].concat();
        for f in kfold(&labels, 5, 3, true).unwrap() {
            let count = |c| f.test.iter().filter(|&&i| labels[i] == c).count();
            assert_eq!((count(0), count(1), count(2)), (20, 10, 2));
        }
    }

    #[test]
    fn small_class_rejected_when_stratified() {
        assert!(kfold(&[0, 0, 0, 1], 2, 0, true).is_err());
        assert!(kfold(&[0, 0, 0], 1, 0, false).is_err());
    }

    #[test]
    fn mean_std_of_constant() {
        assert_eq!(mean_std(&[2.0, 2.0, 2.0]), (2.0, 0.0));
    }
}
