//! The three evaluation protocols: human-only leave-one-out, synthetic to
//! human transfer, and the data-increment curve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{roc_auc_multiclass, train_classifier, Classifier, ClassifierSpec, FeatureScaler};
use crate::analytics::standardize;
use crate::domain::{AttachmentStyle, EmbeddingDataset};
use crate::error::{Error, Result};

pub const N_CLASSES: usize = 3;
const N_SEED_REPS: u64 = 10;

pub fn class_index(style: AttachmentStyle) -> usize {
    AttachmentStyle::ALL.iter().position(|&s| s == style).unwrap()
}

/// Feature matrix and class indices for a fully labeled dataset.
pub fn dataset_xy(ds: &EmbeddingDataset) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut x = Vec::with_capacity(ds.len());
    let mut y = Vec::with_capacity(ds.len());
    for e in &ds.entries {
        let style = e.label.ok_or_else(|| {
            Error::Validation(format!("entry {} is unlabeled", e.interview_id))
        })?;
        x.push(e.vector.as_slice().to_vec());
        y.push(class_index(style));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("labeled dataset is empty".into()));
    }
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Cvloo,
    Transfer,
    Increment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub size: usize,
    pub domains: Vec<String>,
    /// Counts per style in canonical style order.
    pub per_style: Vec<usize>,
}

impl DatasetDescriptor {
    pub fn describe(ds: &EmbeddingDataset) -> Self {
        let mut domains: Vec<String> =
            ds.entries.iter().map(|e| e.domain.to_string()).collect();
        domains.sort();
        domains.dedup();
        let mut per_style = vec![0usize; N_CLASSES];
        for e in &ds.entries {
            if let Some(style) = e.label {
                per_style[class_index(style)] += 1;
            }
        }
        DatasetDescriptor {
            size: ds.len(),
            domains,
            per_style,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub auc: f64,
    /// Present only for stochastic models repeated over seeds.
    pub se: Option<f64>,
    pub spec: ClassifierSpec,
    pub standardized: bool,
    pub train: DatasetDescriptor,
    pub test: DatasetDescriptor,
}

/// Mean and standard error (sample std / sqrt(n)) of repeated AUCs.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / n.sqrt())
}

fn seeds_for(spec: &ClassifierSpec) -> Vec<u64> {
    if spec.is_stochastic() {
        (0..N_SEED_REPS).map(|r| spec.seed() + r).collect()
    } else {
        vec![spec.seed()]
    }
}

/// Leave-one-out over a labeled human dataset with an injectable per-split
/// predictor: `predict(train_indices, held_out_index, seed)` returns the
/// probability row for the held-out interview. Predictions from all splits
/// are concatenated and scored once.
pub fn evaluate_cvloo_with<F>(
    ds: &EmbeddingDataset,
    spec: &ClassifierSpec,
    predict: F,
) -> Result<EvalReport>
where
    F: Fn(&[usize], usize, u64) -> Result<Vec<f64>> + Sync,
{
    let (_, y) = dataset_xy(ds)?;
    if y.iter().collect::<std::collections::BTreeSet<_>>().len() < 2 {
        return Err(Error::Validation(
            "leave-one-out needs at least two classes".into(),
        ));
    }
    let n = ds.len();
    let aucs: Vec<f64> = seeds_for(spec)
        .iter()
        .map(|&seed| {
            let proba: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let train_idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                    predict(&train_idx, i, seed)
                })
                .collect::<Result<_>>()?;
            roc_auc_multiclass(&y, &proba, N_CLASSES)
        })
        .collect::<Result<_>>()?;
    let (auc, se) = mean_and_se(&aucs);
    let desc = DatasetDescriptor::describe(ds);
    Ok(EvalReport {
        protocol: Protocol::Cvloo,
        auc,
        se: spec.is_stochastic().then_some(se),
        spec: spec.clone(),
        standardized: false,
        train: desc.clone(),
        test: desc,
    })
}

/// Standard leave-one-out: per split, scaler and model are fitted on the
/// other N-1 rows only. A single-class training split falls back to class
/// priors with a warning instead of aborting.
pub fn evaluate_cvloo(ds: &EmbeddingDataset, spec: &ClassifierSpec) -> Result<EvalReport> {
    let (x, y) = dataset_xy(ds)?;
    evaluate_cvloo_with(ds, spec, |train_idx, test_idx, seed| {
        let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&j| x[j].clone()).collect();
        let train_y: Vec<usize> = train_idx.iter().map(|&j| y[j]).collect();
        let scaler = FeatureScaler::fit(&train_x)?;
        let train_x = scaler.transform(&train_x)?;
        let test_x = scaler.transform(std::slice::from_ref(&x[test_idx]))?;
        let classes: std::collections::BTreeSet<usize> = train_y.iter().copied().collect();
        let model: Box<dyn Classifier> = if classes.len() < 2 {
            eprintln!(
                "warning: split holding out row {test_idx} has a single training class; \
                 falling back to class priors"
            );
            Box::new(super::PriorClassifier::fit(&train_y, N_CLASSES)?)
        } else {
            train_classifier(&spec.with_seed(seed), &train_x, &train_y, N_CLASSES)?
        };
        Ok(model.predict_proba(&test_x).remove(0))
    })
}

/// Trains on (optionally standardized) synthetic embeddings and scores on
/// the labeled human set. The scaler is fitted on training vectors only.
pub fn evaluate_transfer(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    spec: &ClassifierSpec,
    standardized: bool,
    unlabeled: Option<&EmbeddingDataset>,
) -> Result<EvalReport> {
    let shifted;
    let effective_train = if standardized {
        let unlabeled = unlabeled.ok_or_else(|| {
            Error::Validation("standardized transfer needs the unlabeled human dataset".into())
        })?;
        shifted = standardize(train, unlabeled)?;
        &shifted
    } else {
        train
    };
    let (train_x, train_y) = dataset_xy(effective_train)?;
    let (test_x, test_y) = dataset_xy(test)?;
    let scaler = FeatureScaler::fit(&train_x)?;
    let train_x = scaler.transform(&train_x)?;
    let test_x = scaler.transform(&test_x)?;

    let aucs: Vec<f64> = seeds_for(spec)
        .par_iter()
        .map(|&seed| {
            let model = train_classifier(&spec.with_seed(seed), &train_x, &train_y, N_CLASSES)?;
            roc_auc_multiclass(&test_y, &model.predict_proba(&test_x), N_CLASSES)
        })
        .collect::<Result<_>>()?;
    let (auc, se) = mean_and_se(&aucs);
    Ok(EvalReport {
        protocol: Protocol::Transfer,
        auc,
        se: spec.is_stochastic().then_some(se),
        spec: spec.clone(),
        standardized,
        train: DatasetDescriptor::describe(train),
        test: DatasetDescriptor::describe(test),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementPoint {
    pub n_per_style: usize,
    pub mean_auc: f64,
    pub se: f64,
    /// Per-repetition AUCs backing the mean and standard error.
    pub rep_aucs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementCurve {
    pub spec: ClassifierSpec,
    pub points: Vec<IncrementPoint>,
}

pub fn default_increment_grid() -> Vec<usize> {
    (1..=10).map(|i| 2 * i).collect()
}

/// For each grid value n: sample n interviews per style without replacement
/// (fresh sample per repetition), standardize the sampled subset against the
/// unlabeled human data, and run the transfer evaluation.
#[allow(clippy::too_many_arguments)]
pub fn data_increment_curve(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    spec: &ClassifierSpec,
    grid: &[usize],
    reps: usize,
    unlabeled: &EmbeddingDataset,
    sampling_seed: u64,
) -> Result<IncrementCurve> {
    if reps < 2 {
        return Err(Error::Validation("increment experiment needs reps >= 2".into()));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation(
            "increment grid must be non-empty and strictly increasing".into(),
        ));
    }
    let mut by_style: Vec<Vec<usize>> = vec![Vec::new(); N_CLASSES];
    for (i, e) in train.entries.iter().enumerate() {
        let style = e.label.ok_or_else(|| {
            Error::Validation(format!("entry {} is unlabeled", e.interview_id))
        })?;
        by_style[class_index(style)].push(i);
    }
    let min_available = by_style.iter().map(|v| v.len()).min().unwrap_or(0);
    if *grid.last().unwrap() > min_available {
        return Err(Error::Validation(format!(
            "grid value {} exceeds per-style availability {min_available}",
            grid.last().unwrap()
        )));
    }

    let mut points = Vec::with_capacity(grid.len());
    for &n in grid {
        let rep_aucs: Vec<f64> = (0..reps)
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    sampling_seed ^ ((n as u64) << 32) ^ rep as u64,
                );
                let mut chosen = Vec::with_capacity(n * N_CLASSES);
                for pool in &by_style {
                    let mut pool = pool.clone();
                    for i in 0..n {
                        let j = rng.gen_range(i..pool.len());
                        pool.swap(i, j);
                    }
                    chosen.extend_from_slice(&pool[..n]);
                }
                let entries = chosen
                    .iter()
                    .map(|&i| train.entries[i].clone())
                    .collect::<Vec<_>>();
                let subset = EmbeddingDataset::new(entries, train.embed_dim)?;
                let report = evaluate_transfer(&subset, test, spec, true, Some(unlabeled))?;
                Ok(report.auc)
            })
            .collect::<Result<_>>()?;
        let (mean_auc, se) = mean_and_se(&rep_aucs);
        points.push(IncrementPoint {
            n_per_style: n,
            mean_auc,
            se,
            rep_aucs,
        });
    }
    Ok(IncrementCurve {
        spec: spec.clone(),
        points,
    })
}
