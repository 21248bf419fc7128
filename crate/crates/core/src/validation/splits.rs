use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ValidationError;
use crate::rng::{mix, mix_tagged, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    Loo,
    Kfold,
    MonteCarlo,
}

impl SplitMethod {
    pub fn label(self) -> &'static str {
        match self {
            SplitMethod::Loo => "leave-one-out",
            SplitMethod::Kfold => "k-fold",
            SplitMethod::MonteCarlo => "Monte Carlo",
        }
    }
}

fn default_k() -> usize {
    5
}

fn default_n_splits() -> usize {
    10
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_true() -> bool {
    true
}

/// Cross-validation scheme. `k` applies to k-fold, `n_splits` and
/// `test_fraction` to Monte Carlo; leave-one-out ignores all three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitPlan {
    pub method: SplitMethod,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n_splits")]
    pub n_splits: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    #[serde(default)]
    pub stratified: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SplitPlan {
    pub fn loo() -> Self {
        Self::with_method(SplitMethod::Loo)
    }

    pub fn kfold(k: usize, shuffle: bool) -> Self {
        Self { k, shuffle, ..Self::with_method(SplitMethod::Kfold) }
    }

    pub fn monte_carlo(n_splits: usize, test_fraction: f64) -> Self {
        Self { n_splits, test_fraction, ..Self::with_method(SplitMethod::MonteCarlo) }
    }

    fn with_method(method: SplitMethod) -> Self {
        Self {
            method,
            k: default_k(),
            n_splits: default_n_splits(),
            test_fraction: default_test_fraction(),
            shuffle: true,
            stratified: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn stratified(mut self) -> Self {
        self.stratified = true;
        self
    }

    /// Checks the parameters that do not depend on the dataset size.
    pub fn validate(&self) -> Result<(), ValidationError> {
        match self.method {
            SplitMethod::Loo => Ok(()),
            SplitMethod::Kfold if self.k < 2 => Err(ValidationError::InvalidPlan(format!("k-fold needs k >= 2, got {}", self.k))),
            SplitMethod::Kfold => Ok(()),
            SplitMethod::MonteCarlo => {
                if self.n_splits < 1 {
                    return Err(ValidationError::InvalidPlan("Monte Carlo needs n_splits >= 1".into()));
                }
                if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
                    return Err(ValidationError::InvalidPlan(format!(
                        "test_fraction must be in (0, 1), got {}",
                        self.test_fraction
                    )));
                }
                Ok(())
            }
        }
    }

    /// Short description such as `5-fold` or `Monte Carlo 10 × 20%`.
    pub fn label(&self) -> String {
        let base = match self.method {
            SplitMethod::Loo => "LOO".to_string(),
            SplitMethod::Kfold => format!("{}-fold", self.k),
            SplitMethod::MonteCarlo => format!("MC {}x{}", self.n_splits, self.test_fraction),
        };
        if self.stratified && self.method != SplitMethod::Loo {
            format!("{base} stratified")
        } else {
            base
        }
    }
}

/// One train/test partition. Both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_index: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl FoldAssignment {
    fn from_test(fold_index: usize, n: usize, mut test: Vec<usize>) -> Self {
        test.sort_unstable();
        let mut is_test = vec![false; n];
        test.iter().for_each(|&i| is_test[i] = true);
        let train = (0..n).filter(|&i| !is_test[i]).collect();
        Self { fold_index, train_indices: train, test_indices: test }
    }
}

/// Number of test rows for a Monte Carlo split: `ceil(fraction · n)`.
///
/// Products that land within 1e-9 of an integer are rounded to it first, so
/// that e.g. `0.3 · 10` (which is `3.0000000000000004` in binary) gives 3.
pub fn monte_carlo_test_size(test_fraction: f64, n: usize) -> usize {
    let raw = test_fraction * n as f64;
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

/// Sizes of `k` contiguous blocks over `n` items; the first `n % k` get one extra.
fn block_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|f| n / k + usize::from(f < n % k)).collect()
}

fn classes_of(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let max = labels.iter().copied().max().unwrap_or(0);
    (0..=max)
        .map(|c| (c, labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i).collect::<Vec<_>>()))
        .filter(|(_, members)| !members.is_empty())
        .collect()
}

pub fn make_splits(plan: &SplitPlan, n_samples: usize, labels: Option<&[usize]>) -> Result<Vec<FoldAssignment>, ValidationError> {
    plan.validate()?;
    if n_samples < 2 {
        return Err(ValidationError::InvalidPlan(format!("cross-validation needs at least 2 samples, got {n_samples}")));
    }
    let labels = if plan.stratified && plan.method != SplitMethod::Loo {
        let labels = labels.ok_or_else(|| ValidationError::InvalidPlan("stratified splitting needs class labels".into()))?;
        if labels.len() != n_samples {
            return Err(ValidationError::InvalidPlan(format!("{} labels for {n_samples} samples", labels.len())));
        }
        Some(labels)
    } else {
        None
    };

    match plan.method {
        SplitMethod::Loo => Ok((0..n_samples).map(|i| FoldAssignment::from_test(i, n_samples, vec![i])).collect()),
        SplitMethod::Kfold => {
            let k = plan.k;
            if k > n_samples {
                return Err(ValidationError::InvalidPlan(format!("k = {k} exceeds {n_samples} samples")));
            }
            let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
            match labels {
                None => {
                    let mut order: Vec<usize> = (0..n_samples).collect();
                    if plan.shuffle {
                        order.shuffle(&mut rng_from_seed(mix_tagged(plan.seed, "kfold", 0)));
                    }
                    let mut start = 0;
                    for (fold, size) in block_sizes(n_samples, k).into_iter().enumerate() {
                        tests[fold].extend_from_slice(&order[start..start + size]);
                        start += size;
                    }
                }
                Some(labels) => {
                    // Each class is dealt into k contiguous blocks; the folds that
                    // receive a class's remainder rotate so fold sizes stay balanced.
                    let mut offset = 0;
                    for (class, mut members) in classes_of(labels) {
                        if members.len() < k {
                            return Err(ValidationError::StratificationImpossible {
                                class,
                                members: members.len(),
                                required: k,
                            });
                        }
                        if plan.shuffle {
                            members.shuffle(&mut rng_from_seed(mix_tagged(plan.seed, "kfold-class", class as u64)));
                        }
                        let (base, extra) = (members.len() / k, members.len() % k);
                        let mut sizes = vec![base; k];
                        for j in 0..extra {
                            sizes[(offset + j) % k] += 1;
                        }
                        offset = (offset + extra) % k;
                        let mut start = 0;
                        for (fold, size) in sizes.into_iter().enumerate() {
                            tests[fold].extend_from_slice(&members[start..start + size]);
                            start += size;
                        }
                    }
                }
            }
            Ok(tests.into_iter().enumerate().map(|(f, t)| FoldAssignment::from_test(f, n_samples, t)).collect())
        }
        SplitMethod::MonteCarlo => {
            let mut folds = Vec::with_capacity(plan.n_splits);
            for split in 0..plan.n_splits {
                let split_seed = mix(plan.seed, split as u64);
                let test = match labels {
                    None => {
                        let size = monte_carlo_test_size(plan.test_fraction, n_samples);
                        if size == 0 || size >= n_samples {
                            return Err(ValidationError::InvalidPlan(format!(
                                "test fraction {} leaves an empty partition for {n_samples} samples",
                                plan.test_fraction
                            )));
                        }
                        let mut order: Vec<usize> = (0..n_samples).collect();
                        order.shuffle(&mut rng_from_seed(split_seed));
                        order.truncate(size);
                        order
                    }
                    Some(labels) => {
                        let mut test = Vec::new();
                        for (class, mut members) in classes_of(labels) {
                            let size = monte_carlo_test_size(plan.test_fraction, members.len());
                            if size >= members.len() {
                                return Err(ValidationError::StratificationImpossible {
                                    class,
                                    members: members.len(),
                                    required: 2,
                                });
                            }
                            members.shuffle(&mut rng_from_seed(mix(split_seed, class as u64)));
                            test.extend_from_slice(&members[..size]);
                        }
                        test
                    }
                };
                folds.push(FoldAssignment::from_test(split, n_samples, test));
            }
            Ok(folds)
        }
    }
}
