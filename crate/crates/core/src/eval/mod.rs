//! Classifier suite and evaluation protocols.

pub mod auc;
pub mod extra_trees;
pub mod logreg;
pub mod mlp;
pub mod protocols;
pub mod scaler;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use auc::{roc_auc_binary, roc_auc_multiclass};
pub use protocols::{
    data_increment_curve, evaluate_cvloo, evaluate_cvloo_with, evaluate_transfer, EvalReport,
    IncrementCurve, IncrementPoint, Protocol,
};
pub use scaler::FeatureScaler;

/// Classifier configuration. Defaults track the reference settings: C=1.0
/// for both logistic penalties, 500 trees, a 100-unit hidden layer with at
/// most 1000 iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    LogregL1 { c: f64, seed: u64 },
    LogregL2 { c: f64, seed: u64 },
    ExtraTrees { trees: usize, seed: u64 },
    Mlp { hidden: usize, max_iterations: usize, seed: u64 },
}

impl ClassifierSpec {
    pub fn logreg_l1() -> Self {
        ClassifierSpec::LogregL1 { c: 1.0, seed: 0 }
    }

    pub fn logreg_l2() -> Self {
        ClassifierSpec::LogregL2 { c: 1.0, seed: 0 }
    }

    pub fn extra_trees() -> Self {
        ClassifierSpec::ExtraTrees { trees: 500, seed: 0 }
    }

    pub fn mlp() -> Self {
        ClassifierSpec::Mlp {
            hidden: mlp::DEFAULT_HIDDEN,
            max_iterations: mlp::DEFAULT_MAX_ITERATIONS,
            seed: 0,
        }
    }

    pub fn default_suite() -> Vec<ClassifierSpec> {
        vec![
            Self::logreg_l1(),
            Self::logreg_l2(),
            Self::extra_trees(),
            Self::mlp(),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::LogregL1 { .. } => "logreg_l1",
            ClassifierSpec::LogregL2 { .. } => "logreg_l2",
            ClassifierSpec::ExtraTrees { .. } => "extra_trees",
            ClassifierSpec::Mlp { .. } => "mlp",
        }
    }

    /// Stochastic models get repeated over ten seeds with a standard error;
    /// the logistic fits are deterministic.
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            ClassifierSpec::ExtraTrees { .. } | ClassifierSpec::Mlp { .. }
        )
    }

    pub fn seed(&self) -> u64 {
        match self {
            ClassifierSpec::LogregL1 { seed, .. }
            | ClassifierSpec::LogregL2 { seed, .. }
            | ClassifierSpec::ExtraTrees { seed, .. }
            | ClassifierSpec::Mlp { seed, .. } => *seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut spec = self.clone();
        match &mut spec {
            ClassifierSpec::LogregL1 { seed: s, .. }
            | ClassifierSpec::LogregL2 { seed: s, .. }
            | ClassifierSpec::ExtraTrees { seed: s, .. }
            | ClassifierSpec::Mlp { seed: s, .. } => *s = seed,
        }
        spec
    }
}

/// Anything that yields normalized per-class probability rows.
pub trait Classifier: Send + Sync {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>>;
}

impl Classifier for logreg::LogRegModel {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        logreg::LogRegModel::predict_proba(self, x)
    }
}

impl Classifier for extra_trees::ExtraTreesModel {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        extra_trees::ExtraTreesModel::predict_proba(self, x)
    }
}

impl Classifier for mlp::MlpModel {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        mlp::MlpModel::predict_proba(self, x)
    }
}

/// Fallback used when a training split collapses to one class: every row
/// receives the training-split class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorClassifier {
    pub distribution: Vec<f64>,
}

impl PriorClassifier {
    pub fn fit(y: &[usize], n_classes: usize) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyInput("prior fit on empty labels".into()));
        }
        let mut counts = vec![0.0f64; n_classes];
        for &yi in y {
            counts[yi] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        counts.iter_mut().for_each(|c| *c /= total);
        Ok(PriorClassifier {
            distribution: counts,
        })
    }
}

impl Classifier for PriorClassifier {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|_| self.distribution.clone()).collect()
    }
}

/// Trains the configured model; labels are class indices in 0..n_classes.
pub fn train_classifier(
    spec: &ClassifierSpec,
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
) -> Result<Box<dyn Classifier>> {
    Ok(match spec {
        ClassifierSpec::LogregL1 { c, .. } => Box::new(logreg::train_logistic_regression(
            x,
            y,
            n_classes,
            logreg::Penalty::L1,
            *c,
        )?),
        ClassifierSpec::LogregL2 { c, .. } => Box::new(logreg::train_logistic_regression(
            x,
            y,
            n_classes,
            logreg::Penalty::L2,
            *c,
        )?),
        ClassifierSpec::ExtraTrees { trees, seed } => Box::new(extra_trees::train_extra_trees(
            x, y, n_classes, *trees, *seed,
        )?),
        ClassifierSpec::Mlp {
            hidden,
            max_iterations,
            seed,
        } => Box::new(mlp::train_mlp(x, y, n_classes, *hidden, *max_iterations, *seed)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_defaults_and_names() {
        assert_eq!(
            ClassifierSpec::extra_trees(),
            ClassifierSpec::ExtraTrees { trees: 500, seed: 0 }
        );
        assert_eq!(
            ClassifierSpec::mlp(),
            ClassifierSpec::Mlp {
                hidden: 100,
                max_iterations: 1000,
                seed: 0
            }
        );
        let names: Vec<&str> = ClassifierSpec::default_suite()
            .iter()
            .map(|s| s.name())
            .collect();
        assert_eq!(names, ["logreg_l1", "logreg_l2", "extra_trees", "mlp"]);
    }

    #[test]
    fn with_seed_only_changes_the_seed() {
        let spec = ClassifierSpec::extra_trees().with_seed(9);
        assert_eq!(spec, ClassifierSpec::ExtraTrees { trees: 500, seed: 9 });
        assert!(spec.is_stochastic());
        assert!(!ClassifierSpec::logreg_l1().is_stochastic());
    }

    #[test]
    fn prior_classifier_reproduces_frequencies() {
        let prior = PriorClassifier::fit(&[0, 0, 1, 2], 3).unwrap();
        assert_eq!(prior.distribution, vec![0.5, 0.25, 0.25]);
        let proba = prior.predict_proba(&[vec![1.0], vec![2.0]]);
        assert_eq!(proba.len(), 2);
        assert_eq!(proba[0], vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn spec_round_trips_through_json() {
        for spec in ClassifierSpec::default_suite() {
            let json = serde_json::to_string(&spec).unwrap();
            let back: ClassifierSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec);
        }
    }
}
