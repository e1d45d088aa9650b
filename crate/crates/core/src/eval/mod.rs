//! Downstream evaluation: splits, stratified cross-validation, three small
//! classifiers, AUC, and mutual-information feature importance.

mod encode;
mod metrics;
mod models;
mod split;

pub use encode::{target_labels, Encoder};
pub use metrics::{auc, discretize, mean, median, mutual_information, MI_BINS};
pub use models::{fit_predict, gnb_posteriors, ModelKind, GNB_VAR_FLOOR, LR_EPOCHS, LR_L2, LR_RATE};
pub use split::{kfold, stratified_kfold, train_test_split, FoldSplit};

use std::fmt::Write as _;

use serde::Serialize;

use crate::dsl::TransformPlan;
use crate::table::{Table, TableError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("split ratio must be in (0, 1), got {0}")]
    BadRatio(f64),
    #[error("cannot make {folds} folds from {n_rows} rows (need 2 <= folds <= rows)")]
    BadFolds { folds: usize, n_rows: usize },
    #[error("table has no target column")]
    NoTarget,
    #[error("target is not binary: {0}")]
    NotBinary(String),
    #[error("degenerate target: training rows hold a single class")]
    DegenerateTarget,
    #[error("labels hold a single class")]
    SingleClass,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty column")]
    EmptyColumn,
    #[error("{0}")]
    BadModel(String),
    #[error("k must be between 1 and the number of features ({available}), got {k}")]
    BadK { k: usize, available: usize },
    #[error("model {model}, fold {fold}: {source}")]
    InFold {
        model: ModelKind,
        fold: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelResult {
    pub model: ModelKind,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    pub median_auc: f64,
}

/// Per-model results plus the aggregate across models (mean and median of
/// the per-model mean AUCs).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub target: String,
    pub n_rows: usize,
    pub folds: usize,
    pub seed: u64,
    pub features: Vec<String>,
    pub models: Vec<ModelResult>,
    pub mean_auc: f64,
    pub median_auc: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "target {}  rows {}  features {}  folds {}  seed {}\n",
            self.target,
            self.n_rows,
            self.features.len(),
            self.folds,
            self.seed
        );
        let _ = writeln!(s, "{:<8} {:>10} {:>10}", "model", "mean AUC", "median AUC");
        for m in &self.models {
            let _ = writeln!(s, "{:<8} {:>10.4} {:>10.4}", m.model.to_string(), m.mean_auc, m.median_auc);
        }
        let _ = writeln!(s, "{:<8} {:>10.4} {:>10.4}", "all", self.mean_auc, self.median_auc);
        s
    }
}

/// Stratified `folds`-fold cross-validation of every model on `table`
/// (which must carry a target). Each fold fits encoding, imputation and
/// the model on the training rows only.
pub fn evaluate_suite(table: &Table, models: &[ModelKind], folds: usize, seed: u64) -> Result<EvalReport, EvalError> {
    let labels = target_labels(table)?;
    let split = stratified_kfold(&labels, folds, seed)?;
    let mut per_fold = Vec::with_capacity(folds);
    let mut features = Vec::new();
    for fold in 0..folds {
        let train = split.train(fold);
        let test = &split.test[fold];
        let enc = Encoder::fit(table, &train);
        features = enc.names().to_vec();
        let y_train: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let y_test: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
        per_fold.push((enc.transform(table, &train), y_train, enc.transform(table, test), y_test));
    }
    let mut results = Vec::with_capacity(models.len());
    for &model in models {
        model.validate()?;
        let in_fold = |fold: usize| move |e: EvalError| EvalError::InFold {
            model,
            fold,
            source: Box::new(e),
        };
        let fold_aucs = std::thread::scope(|s| {
            let handles: Vec<_> = per_fold
                .iter()
                .enumerate()
                .map(|(fold, (x, y, tx, ty))| {
                    s.spawn(move || {
                        let scores = fit_predict(model, x, y, tx).map_err(in_fold(fold))?;
                        auc(ty, &scores).map_err(in_fold(fold))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold worker panicked"))
                .collect::<Result<Vec<f64>, EvalError>>()
        })?;
        results.push(ModelResult {
            model,
            mean_auc: mean(&fold_aucs),
            median_auc: median(&fold_aucs),
            fold_aucs,
        });
    }
    let model_means: Vec<f64> = results.iter().map(|r| r.mean_auc).collect();
    Ok(EvalReport {
        target: table.target().unwrap_or_default().to_string(),
        n_rows: table.n_rows(),
        folds,
        seed,
        features,
        mean_auc: if model_means.is_empty() { f64::NAN } else { mean(&model_means) },
        median_auc: if model_means.is_empty() { f64::NAN } else { median(&model_means) },
        models: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub name: String,
    pub mutual_information: f64,
    pub derived: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub k: usize,
    pub ranking: Vec<FeatureImportance>,
    /// Fraction of the top-k features that the plan derived.
    pub new_feature_share: f64,
}

impl ImportanceReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let width = self.ranking.iter().map(|f| f.name.len()).max().unwrap_or(4).max(4);
        let mut s = format!("{:>4}  {:<width$}  {:>8}  derived\n", "rank", "feature", "MI");
        for (i, f) in self.ranking.iter().enumerate() {
            let mark = if i < self.k { "*" } else { " " };
            let _ = writeln!(
                s,
                "{:>3}{mark}  {:<width$}  {:>8.4}  {}",
                i + 1,
                f.name,
                f.mutual_information,
                if f.derived { "yes" } else { "no" }
            );
        }
        let _ = writeln!(s, "new features in top {}: {:.1}%", self.k, 100.0 * self.new_feature_share);
        s
    }
}

/// Every non-target feature ranked by mutual information with the target,
/// descending, ties by name.
pub fn rank_features(table: &Table, plan: &TransformPlan) -> Result<Vec<FeatureImportance>, EvalError> {
    let target = table.target().ok_or(EvalError::NoTarget)?;
    let y = discretize(table.require(target)?, MI_BINS);
    let mut ranking = Vec::new();
    for (meta, col) in table.iter() {
        if meta.name == target {
            continue;
        }
        if col.is_empty() {
            return Err(EvalError::EmptyColumn);
        }
        ranking.push(FeatureImportance {
            name: meta.name.clone(),
            mutual_information: metrics::mi_of_keys(&discretize(col, MI_BINS), &y),
            derived: plan.is_derived(&meta.name),
        });
    }
    ranking.sort_by(|a, b| {
        b.mutual_information
            .total_cmp(&a.mutual_information)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(ranking)
}

pub fn feature_importance(table: &Table, plan: &TransformPlan, k: usize) -> Result<ImportanceReport, EvalError> {
    let ranking = rank_features(table, plan)?;
    if k == 0 || k > ranking.len() {
        return Err(EvalError::BadK {
            k,
            available: ranking.len(),
        });
    }
    let derived = ranking[..k].iter().filter(|f| f.derived).count();
    Ok(ImportanceReport {
        k,
        new_feature_share: derived as f64 / k as f64,
        ranking,
    })
}

/// `|derived ∩ top-k| / k` over the mutual-information ranking.
pub fn new_feature_share_topk(table: &Table, plan: &TransformPlan, k: usize) -> Result<f64, EvalError> {
    feature_importance(table, plan, k).map(|r| r.new_feature_share)
}
