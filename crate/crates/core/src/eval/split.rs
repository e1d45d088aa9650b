use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::EvalError;
use crate::table::Table;

/// Test rows of each fold; the train rows are the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldSplit {
    pub n_rows: usize,
    pub test: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn len(&self) -> usize {
        self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.test.is_empty()
    }

    pub fn train(&self, fold: usize) -> Vec<usize> {
        let test = &self.test[fold];
        (0..self.n_rows).filter(|i| test.binary_search(i).is_err()).collect()
    }

    fn from_positions(order: &[usize], folds: usize) -> Self {
        let mut test = vec![Vec::new(); folds];
        for (pos, &row) in order.iter().enumerate() {
            test[pos % folds].push(row);
        }
        for t in &mut test {
            t.sort_unstable();
        }
        FoldSplit {
            n_rows: order.len(),
            test,
        }
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded shuffle, then the first `round(ratio·n)` rows (at least one row on
/// each side) form the training table.
pub fn train_test_split(table: &Table, ratio: f64, seed: u64) -> Result<(Table, Table), EvalError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvalError::BadRatio(ratio));
    }
    if table.target().is_none() {
        return Err(EvalError::NoTarget);
    }
    let n = table.n_rows();
    if n < 2 {
        return Err(EvalError::TooFewRows(n));
    }
    let idx = shuffled(n, seed);
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    Ok((table.take_rows(&idx[..n_train]), table.take_rows(&idx[n_train..])))
}

pub fn kfold(n_rows: usize, folds: usize, seed: u64) -> Result<FoldSplit, EvalError> {
    check_folds(n_rows, folds)?;
    Ok(FoldSplit::from_positions(&shuffled(n_rows, seed), folds))
}

/// Like [`kfold`], but rows are dealt round-robin after grouping by label so
/// every fold sees both classes when each class has at least `folds` rows.
pub fn stratified_kfold(labels: &[bool], folds: usize, seed: u64) -> Result<FoldSplit, EvalError> {
    check_folds(labels.len(), folds)?;
    let mut order = shuffled(labels.len(), seed);
    order.sort_by_key(|&i| labels[i]);
    Ok(FoldSplit::from_positions(&order, folds))
}

fn check_folds(n_rows: usize, folds: usize) -> Result<(), EvalError> {
    if folds < 2 || folds > n_rows {
        return Err(EvalError::BadFolds { folds, n_rows });
    }
    Ok(())
}
