//! ROC AUC via the rank formulation, macro-averaged one-vs-rest for the
//! multiclass case.

use crate::error::{Error, Result};

/// Binary AUC computed from average ranks (Mann-Whitney). Equivalent to
/// pair counting with 0.5 credit for ties.
pub fn roc_auc_binary(is_positive: &[bool], scores: &[f64]) -> Result<f64> {
    if is_positive.len() != scores.len() || scores.is_empty() {
        return Err(Error::Validation(
            "auc needs matched non-empty labels and scores".into(),
        ));
    }
    for s in scores {
        if !s.is_finite() {
            return Err(Error::Validation("non-finite score".into()));
        }
    }
    let n_pos = is_positive.iter().filter(|&&p| p).count();
    let n_neg = is_positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Validation(
            "auc undefined without both positives and negatives".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Average rank within each tie group (1-based ranks).
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = is_positive
        .iter()
        .zip(&ranks)
        .filter(|(p, _)| **p)
        .map(|(_, r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Macro one-vs-rest AUC. Classes absent from `y_true`, or present in every
/// row, are skipped with a warning; an error is raised only if every class
/// is skipped. `proba` rows must sum to 1 within 1e-9.
pub fn roc_auc_multiclass(y_true: &[usize], proba: &[Vec<f64>], n_classes: usize) -> Result<f64> {
    if y_true.len() != proba.len() || y_true.is_empty() {
        return Err(Error::Validation(
            "auc needs matched non-empty labels and probability rows".into(),
        ));
    }
    for (row, &y) in proba.iter().zip(y_true) {
        if row.len() != n_classes {
            return Err(Error::DimMismatch {
                expected: n_classes,
                got: row.len(),
            });
        }
        if y >= n_classes {
            return Err(Error::Validation(format!("label {y} out of range")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "probability row sums to {sum}, not 1"
            )));
        }
    }

    let mut total = 0.0;
    let mut used = 0usize;
    for class in 0..n_classes {
        let labels: Vec<bool> = y_true.iter().map(|&y| y == class).collect();
        let n_pos = labels.iter().filter(|&&p| p).count();
        if n_pos == 0 || n_pos == labels.len() {
            eprintln!("warning: class {class} has no positive/negative split; skipped in AUC");
            continue;
        }
        let scores: Vec<f64> = proba.iter().map(|r| r[class]).collect();
        total += roc_auc_binary(&labels, &scores)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Validation(
            "every class was degenerate; multiclass AUC undefined".into(),
        ));
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn documented_binary_case() {
        let y = [false, false, true, true];
        let s = [0.1, 0.4, 0.35, 0.8];
        assert_eq!(roc_auc_binary(&y, &s).unwrap(), 0.75);
    }

    #[test]
    fn perfect_and_inverted_rankings() {
        let y = [false, false, true, true];
        assert_eq!(roc_auc_binary(&y, &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc_binary(&y, &[0.9, 0.8, 0.2, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn all_ties_give_half() {
        let y = [true, false, true, false, false];
        assert_eq!(roc_auc_binary(&y, &[0.5; 5]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_auc_binary(&[true, true], &[0.1, 0.2]).is_err());
    }

    fn brute_force(y: &[bool], s: &[f64]) -> f64 {
        let mut credit = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] && !y[j] {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        credit += 1.0;
                    } else if s[i] == s[j] {
                        credit += 0.5;
                    }
                }
            }
        }
        credit / pairs
    }

    #[test]
    fn rank_formulation_matches_pair_counting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let n = rng.gen_range(2..30);
            let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
                continue;
            }
            // Coarse grid forces frequent ties.
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            let got = roc_auc_binary(&y, &s).unwrap();
            assert!((got - brute_force(&y, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn multiclass_perfect_separation() {
        let y = [0, 1, 2, 0, 1, 2];
        let proba: Vec<Vec<f64>> = y
            .iter()
            .map(|&c| {
                let mut row = vec![0.05, 0.05, 0.05];
                row[c] = 0.9;
                row
            })
            .collect();
        assert_eq!(roc_auc_multiclass(&y, &proba, 3).unwrap(), 1.0);
    }

    #[test]
    fn multiclass_uniform_probabilities_give_half() {
        let y = [0, 1, 2, 1];
        let proba = vec![vec![1.0 / 3.0; 3]; 4];
        assert!((roc_auc_multiclass(&y, &proba, 3).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_skipped_not_fatal() {
        let y = [0, 0, 1, 1];
        let proba = vec![
            vec![0.8, 0.1, 0.1],
            vec![0.7, 0.2, 0.1],
            vec![0.2, 0.7, 0.1],
            vec![0.1, 0.8, 0.1],
        ];
        // Class 2 has no positives; AUC averages classes 0 and 1 only.
        assert_eq!(roc_auc_multiclass(&y, &proba, 3).unwrap(), 1.0);
    }

    #[test]
    fn unnormalized_rows_are_rejected() {
        let y = [0, 1];
        let proba = vec![vec![0.9, 0.9], vec![0.1, 0.1]];
        assert!(roc_auc_multiclass(&y, &proba, 2).is_err());
    }
}
