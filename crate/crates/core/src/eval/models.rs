use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LogisticRegression,
    GaussianNb,
    KNearestNeighbors(usize),
}

impl ModelKind {
    pub const DEFAULT_K: usize = 5;

    pub fn default_suite() -> Vec<ModelKind> {
        vec![
            ModelKind::LogisticRegression,
            ModelKind::GaussianNb,
            ModelKind::KNearestNeighbors(Self::DEFAULT_K),
        ]
    }

    pub fn validate(self) -> Result<(), EvalError> {
        match self {
            ModelKind::KNearestNeighbors(k) if k == 0 || k % 2 == 0 => {
                Err(EvalError::BadModel(format!("k must be odd, got {k}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::LogisticRegression => f.write_str("lr"),
            ModelKind::GaussianNb => f.write_str("gnb"),
            ModelKind::KNearestNeighbors(k) => write!(f, "knn{k}"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = EvalError;

    /// `lr`, `gnb` (or `nb`), `knn` or `knnK` / `knn:K`.
    fn from_str(s: &str) -> Result<Self, EvalError> {
        let s = s.trim().to_ascii_lowercase();
        let kind = match s.as_str() {
            "lr" | "logistic" | "logistic_regression" => ModelKind::LogisticRegression,
            "gnb" | "nb" | "naive_bayes" | "gaussian_nb" => ModelKind::GaussianNb,
            "knn" => ModelKind::KNearestNeighbors(Self::DEFAULT_K),
            other => {
                let k = other
                    .strip_prefix("knn")
                    .map(|r| r.trim_start_matches([':', '=']))
                    .and_then(|r| r.parse().ok())
                    .ok_or_else(|| EvalError::BadModel(format!("unknown model `{other}` (expected lr, gnb, knn or knnK)")))?;
                ModelKind::KNearestNeighbors(k)
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl Serialize for ModelKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Per-feature mean and standard deviation from the training rows. Constant
/// features get a scale of 1.
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.scale[j]).collect())
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub const LR_EPOCHS: usize = 500;
pub const LR_RATE: f64 = 0.1;
pub const LR_L2: f64 = 1e-4;
pub const GNB_VAR_FLOOR: f64 = 1e-9;

fn logistic_regression(x: &[Vec<f64>], y: &[bool], test: &[Vec<f64>]) -> Vec<f64> {
    let std = Standardizer::fit(x);
    let xs = std.apply(x);
    let d = std.mean.len();
    let n = xs.len() as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    for _ in 0..LR_EPOCHS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (row, &label) in xs.iter().zip(y) {
            let z = b + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let err = sigmoid(z) - if label { 1.0 } else { 0.0 };
            for (g, v) in grad.iter_mut().zip(row) {
                *g += err * v;
            }
            gb += err;
        }
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj -= LR_RATE * (g / n + LR_L2 * *wj);
        }
        b -= LR_RATE * gb / n;
    }
    std.apply(test)
        .iter()
        .map(|r| sigmoid(b + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()))
        .collect()
}

struct ClassStats {
    log_prior: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
}

fn class_stats(x: &[Vec<f64>], y: &[bool], class: bool) -> ClassStats {
    let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == class).map(|(r, _)| r).collect();
    let n = rows.len() as f64;
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let var = (0..d)
        .map(|j| {
            let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            v.max(GNB_VAR_FLOOR)
        })
        .collect();
    ClassStats {
        log_prior: (n / x.len() as f64).ln(),
        mean,
        var,
    }
}

impl ClassStats {
    fn log_joint(&self, row: &[f64]) -> f64 {
        self.log_prior
            + row
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    -0.5 * (2.0 * std::f64::consts::PI * self.var[j]).ln() - (v - self.mean[j]).powi(2) / (2.0 * self.var[j])
                })
                .sum::<f64>()
    }
}

/// Class posteriors `[P(y=0), P(y=1)]` per test row.
pub fn gnb_posteriors(x: &[Vec<f64>], y: &[bool], test: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let neg = class_stats(x, y, false);
    let pos = class_stats(x, y, true);
    test.iter()
        .map(|r| {
            let (a, b) = (neg.log_joint(r), pos.log_joint(r));
            let m = a.max(b);
            let (ea, eb) = ((a - m).exp(), (b - m).exp());
            [ea / (ea + eb), eb / (ea + eb)]
        })
        .collect()
}

fn knn(x: &[Vec<f64>], y: &[bool], test: &[Vec<f64>], k: usize) -> Vec<f64> {
    let std = Standardizer::fit(x);
    let xs = std.apply(x);
    let k = k.min(xs.len());
    std.apply(test)
        .iter()
        .map(|t| {
            let mut dist: Vec<(f64, usize)> = xs
                .iter()
                .enumerate()
                .map(|(i, r)| (r.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist[..k].iter().filter(|(_, i)| y[*i]).count() as f64 / k as f64
        })
        .collect()
}

/// Fits `kind` on the training matrix and returns `P(y=1)` per test row.
pub fn fit_predict(kind: ModelKind, x: &[Vec<f64>], y: &[bool], test: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
    kind.validate()?;
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() || y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(EvalError::DegenerateTarget);
    }
    Ok(match kind {
        ModelKind::LogisticRegression => logistic_regression(x, y, test),
        ModelKind::GaussianNb => gnb_posteriors(x, y, test).iter().map(|p| p[1]).collect(),
        ModelKind::KNearestNeighbors(k) => knn(x, y, test, k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        while x.len() < n {
            let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let margin = 2.0 * a - b;
            if margin.abs() < 0.3 {
                continue;
            }
            x.push(vec![a, b]);
            y.push(margin > 0.0);
        }
        (x, y)
    }

    #[test]
    fn model_names_round_trip() {
        for m in ModelKind::default_suite() {
            assert_eq!(m.to_string().parse::<ModelKind>().unwrap(), m);
        }
        assert_eq!("knn:7".parse::<ModelKind>().unwrap(), ModelKind::KNearestNeighbors(7));
        assert!("knn4".parse::<ModelKind>().is_err());
        assert!("forest".parse::<ModelKind>().is_err());
    }

    #[test]
    fn lr_separates() {
        let (x, y) = separable(200, 1);
        let (tx, ty) = separable(100, 2);
        let s = fit_predict(ModelKind::LogisticRegression, &x, &y, &tx).unwrap();
        assert!(s.iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(auc(&ty, &s).unwrap(), 1.0);
    }

    #[test]
    fn gnb_identical_classes_give_prior() {
        // both classes see the same feature values
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![(i / 2) as f64]).collect();
        let y: Vec<bool> = (0..8).map(|i| i % 2 == 0).collect();
        let s = fit_predict(ModelKind::GaussianNb, &x, &y, &[vec![0.0], vec![2.5]]).unwrap();
        assert!(s.iter().all(|p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn knn_exact_match() {
        let x = vec![vec![0.0, 0.0], vec![5.0, 5.0], vec![10.0, 0.0]];
        let y = vec![false, true, false];
        let s = fit_predict(ModelKind::KNearestNeighbors(1), &x, &y, &[vec![5.0, 5.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(s, vec![1.0, 0.0]);
        // k larger than the training set is clamped
        let s = fit_predict(ModelKind::KNearestNeighbors(5), &x, &y, &[vec![1.0, 1.0]]).unwrap();
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        let x = vec![vec![-1.0], vec![1.0], vec![3.0]];
        let y = vec![true, false, false];
        let s = fit_predict(ModelKind::KNearestNeighbors(1), &x, &y, &[vec![0.0]]).unwrap();
        assert_eq!(s, vec![1.0]);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![vec![1.0], vec![2.0]];
        for m in ModelKind::default_suite() {
            assert!(matches!(
                fit_predict(m, &x, &[true, true], &x),
                Err(EvalError::DegenerateTarget)
            ));
        }
    }

    proptest! {
        #[test]
        fn gnb_posteriors_sum_to_one(
            rows in proptest::collection::vec((-50.0f64..50.0, -5.0f64..5.0, any::<bool>()), 4..40),
            probe in proptest::collection::vec((-100.0f64..100.0, -10.0f64..10.0), 1..10),
        ) {
            let x: Vec<Vec<f64>> = rows.iter().map(|(a, b, _)| vec![*a, *b]).collect();
            let y: Vec<bool> = rows.iter().map(|r| r.2).collect();
            prop_assume!(y.iter().any(|&l| l) && y.iter().any(|&l| !l));
            let t: Vec<Vec<f64>> = probe.iter().map(|(a, b)| vec![*a, *b]).collect();
            for p in gnb_posteriors(&x, &y, &t) {
                prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            }
        }
    }
}
