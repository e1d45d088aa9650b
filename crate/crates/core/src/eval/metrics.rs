use std::collections::HashMap;

use super::EvalError;
use crate::table::Column;

pub const MI_BINS: usize = 10;

/// Area under the ROC curve from average ranks, i.e. the Mann-Whitney
/// statistic with half credit for tied pairs.
pub fn auc(labels: &[bool], scores: &[f64]) -> Result<f64, EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch(labels.len(), scores.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Bin index per cell. Numbers with more than `bins` distinct values go to
/// equal-frequency bins, other cells keep their value, nulls share one bin.
pub fn discretize(column: &Column, bins: usize) -> Vec<Option<String>> {
    let numeric = matches!(column, Column::Numeric(_) | Column::Boolean(_));
    if numeric {
        let values = column.to_f64();
        let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() > bins && bins > 0 {
            let n = sorted.len();
            let mut edges: Vec<f64> = (1..bins).map(|i| sorted[i * n / bins]).collect();
            edges.dedup();
            return values
                .iter()
                .map(|v| v.map(|x| edges.partition_point(|e| *e <= x).to_string()))
                .collect();
        }
    }
    column.keys()
}

/// Empirical mutual information in nats between two discretized columns.
pub fn mutual_information(x: &Column, y: &Column, bins: usize) -> Result<f64, EvalError> {
    if x.is_empty() || y.is_empty() {
        return Err(EvalError::EmptyColumn);
    }
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    Ok(mi_of_keys(&discretize(x, bins), &discretize(y, bins)))
}

pub(crate) fn mi_of_keys(x: &[Option<String>], y: &[Option<String>]) -> f64 {
    let n = x.len() as f64;
    let mut joint: HashMap<(&Option<String>, &Option<String>), usize> = HashMap::new();
    let mut px: HashMap<&Option<String>, usize> = HashMap::new();
    let mut py: HashMap<&Option<String>, usize> = HashMap::new();
    for (a, b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1;
        *px.entry(a).or_default() += 1;
        *py.entry(b).or_default() += 1;
    }
    let mut cells: Vec<_> = joint.into_iter().collect();
    // fixed summation order keeps the result bit-stable
    cells.sort();
    let mi: f64 = cells
        .iter()
        .map(|((a, b), c)| {
            let pxy = *c as f64 / n;
            pxy * (pxy / (px[a] as f64 / n * py[b] as f64 / n)).ln()
        })
        .sum();
    mi.max(0.0)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}
