//! Diversity analysis of synthetic embeddings, the unlabeled-human mean
//! shift, and a 2D projection for qualitative inspection.

use serde::{Deserialize, Serialize};

use crate::domain::{
    AttachmentStyle, EmbeddingDataset, EmbeddingDomain, InterviewEmbedding, Vector,
};
use crate::error::{Error, Result};
use crate::retrieval::cosine;

/// The element-wise correction added to every synthetic embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftVector {
    pub delta: Vector,
    pub u_source_count: usize,
    pub s_source_count: usize,
}

/// Component-wise arithmetic mean over same-dimension vectors.
pub fn mean_vector(vs: &[&Vector]) -> Result<Vector> {
    let first = vs
        .first()
        .ok_or_else(|| Error::EmptyInput("mean of zero vectors".into()))?;
    let dim = first.dim();
    let mut acc = vec![0.0f64; dim];
    for v in vs {
        if v.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: v.dim(),
            });
        }
        for (a, c) in acc.iter_mut().zip(v.as_slice()) {
            *a += c;
        }
    }
    let n = vs.len() as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    Vector::new(acc)
}

fn dataset_mean(ds: &EmbeddingDataset) -> Result<Vector> {
    let vs: Vec<&Vector> = ds.entries.iter().map(|e| &e.vector).collect();
    mean_vector(&vs)
}

// The shift is snapped to a dyadic grid. Adding a full-precision delta to a
// double is inexact, which would perturb pairwise differences by an ulp;
// with a 2^-32-aligned delta the additions are exact whenever inputs carry
// at most ~20 fractional bits, and the snap error (<= 2^-33 per component)
// sits far below the 1e-9 alignment contract.
const SHIFT_GRID: f64 = 4294967296.0; // 2^32

fn snap(x: f64) -> f64 {
    (x * SHIFT_GRID).round() / SHIFT_GRID
}

/// Shift vector u - s: unlabeled-human mean minus synthetic mean.
pub fn compute_shift(
    synthetic: &EmbeddingDataset,
    unlabeled_human: &EmbeddingDataset,
) -> Result<ShiftVector> {
    if synthetic.is_empty() || unlabeled_human.is_empty() {
        return Err(Error::EmptyInput(
            "standardization needs non-empty synthetic and unlabeled human sets".into(),
        ));
    }
    if synthetic.embed_dim != unlabeled_human.embed_dim {
        return Err(Error::DimMismatch {
            expected: synthetic.embed_dim,
            got: unlabeled_human.embed_dim,
        });
    }
    for e in &unlabeled_human.entries {
        if e.label.is_some() {
            return Err(Error::Validation(format!(
                "labeled entry {} in the unlabeled human set",
                e.interview_id
            )));
        }
    }
    let u = dataset_mean(unlabeled_human)?;
    let s = dataset_mean(synthetic)?;
    let delta: Vec<f64> = u
        .as_slice()
        .iter()
        .zip(s.as_slice())
        .map(|(a, b)| snap(a - b))
        .collect();
    Ok(ShiftVector {
        delta: Vector::new(delta)?,
        u_source_count: unlabeled_human.len(),
        s_source_count: synthetic.len(),
    })
}

/// Adds u - s to every synthetic embedding; labels, ids, and the human data
/// are untouched.
pub fn standardize(
    synthetic: &EmbeddingDataset,
    unlabeled_human: &EmbeddingDataset,
) -> Result<EmbeddingDataset> {
    let shift = compute_shift(synthetic, unlabeled_human)?;
    apply_shift(synthetic, &shift)
}

pub fn apply_shift(ds: &EmbeddingDataset, shift: &ShiftVector) -> Result<EmbeddingDataset> {
    if shift.delta.dim() != ds.embed_dim {
        return Err(Error::DimMismatch {
            expected: ds.embed_dim,
            got: shift.delta.dim(),
        });
    }
    let entries: Vec<InterviewEmbedding> = ds
        .entries
        .iter()
        .map(|e| {
            let shifted: Vec<f64> = e
                .vector
                .as_slice()
                .iter()
                .zip(shift.delta.as_slice())
                .map(|(a, d)| a + d)
                .collect();
            Ok(InterviewEmbedding {
                interview_id: e.interview_id.clone(),
                vector: Vector::new(shifted)?,
                domain: e.domain.clone(),
                label: e.label,
            })
        })
        .collect::<Result<_>>()?;
    EmbeddingDataset::new(entries, ds.embed_dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversitySummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityGroup {
    pub model_tag: String,
    pub style: AttachmentStyle,
    pub similarities: Vec<f64>,
    pub summary: DiversitySummary,
}

/// Raw pairwise cosine similarities per (model_tag, style), histogram-ready.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub groups: Vec<DiversityGroup>,
}

/// Cosine similarity over all unordered pairs of interviews sharing a
/// (model_tag, style) group. Groups with fewer than two entries yield an
/// empty list plus a warning.
pub fn pairwise_cosine_by_style(ds: &EmbeddingDataset) -> Result<DiversityReport> {
    use std::collections::BTreeMap;
    let mut grouped: BTreeMap<(String, AttachmentStyle), Vec<&InterviewEmbedding>> =
        BTreeMap::new();
    for e in &ds.entries {
        let tag = match &e.domain {
            EmbeddingDomain::Synthetic(tag) => tag.clone(),
            _ => continue,
        };
        let style = e.label.ok_or_else(|| {
            Error::Validation(format!("unlabeled synthetic entry {}", e.interview_id))
        })?;
        grouped.entry((tag, style)).or_default().push(e);
    }

    let mut groups = Vec::new();
    for ((model_tag, style), entries) in grouped {
        let mut similarities = Vec::new();
        if entries.len() < 2 {
            eprintln!(
                "warning: group ({model_tag}, {style}) has {} entry(ies); no pairs",
                entries.len()
            );
        } else {
            for i in 0..entries.len() {
                for j in i + 1..entries.len() {
                    similarities.push(cosine(
                        entries[i].vector.as_slice(),
                        entries[j].vector.as_slice(),
                    )?);
                }
            }
        }
        let summary = summarize(&similarities);
        groups.push(DiversityGroup {
            model_tag,
            style,
            similarities,
            summary,
        });
    }
    Ok(DiversityReport { groups })
}

fn summarize(values: &[f64]) -> DiversitySummary {
    if values.is_empty() {
        return DiversitySummary {
            mean: f64::NAN,
            std: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
            count: 0,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    DiversitySummary {
        mean,
        std: var.sqrt(),
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        count: values.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub interview_id: String,
    pub x: f64,
    pub y: f64,
    pub domain: EmbeddingDomain,
    pub label: Option<AttachmentStyle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<ProjectionPoint>,
}

/// Pluggable 2D projector; an external manifold method can be dropped in
/// behind this interface.
pub trait Projector {
    fn project(&self, rows: &[Vec<f64>]) -> Result<Vec<(f64, f64)>>;
}

/// Default projector: centers the combined data and projects onto the top
/// two principal directions. Each axis is oriented so its largest-magnitude
/// loading is positive.
#[derive(Debug, Clone, Default)]
pub struct PrincipalComponentProjector {
    /// When true, collinear input (zero second-axis variance) is an error
    /// instead of zero y-coordinates.
    pub strict: bool,
}

impl Projector for PrincipalComponentProjector {
    fn project(&self, rows: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        if rows.len() < 3 {
            return Err(Error::Validation(format!(
                "projection needs at least 3 points, got {}",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        let n = rows.len();
        let mut mean = vec![0.0f64; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let centered: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
            .collect();

        let total_var: f64 = centered
            .iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .sum();
        if total_var == 0.0 {
            return Err(Error::Validation("zero-variance data".into()));
        }

        let (axis1, axis2, degenerate) = top_two_directions(&centered, dim)?;
        if degenerate && self.strict {
            return Err(Error::Validation(
                "second principal axis explains zero variance".into(),
            ));
        }

        let orient = |axis: &mut Vec<f64>| {
            let mut best = 0usize;
            for (i, v) in axis.iter().enumerate() {
                if v.abs() > axis[best].abs() {
                    best = i;
                }
            }
            if axis[best] < 0.0 {
                for v in axis.iter_mut() {
                    *v = -*v;
                }
            }
        };
        let mut axis1 = axis1;
        let mut axis2 = axis2;
        orient(&mut axis1);
        orient(&mut axis2);

        Ok(centered
            .iter()
            .map(|r| {
                let x: f64 = r.iter().zip(&axis1).map(|(a, b)| a * b).sum();
                let y: f64 = if degenerate {
                    0.0
                } else {
                    r.iter().zip(&axis2).map(|(a, b)| a * b).sum()
                };
                (x, y)
            })
            .collect())
    }
}

/// Two-vector subspace iteration on the covariance operator followed by an
/// exact 2x2 Rayleigh-Ritz rotation. The iterated span stabilizes quickly;
/// the Ritz step then resolves the principal directions inside it even when
/// the two leading eigenvalues are close.
fn top_two_directions(
    centered: &[Vec<f64>],
    dim: usize,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut v1: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut v2: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();

    let apply = |v: &[f64]| -> Vec<f64> {
        // C v = X^T (X v), X centered rows.
        let mut out = vec![0.0f64; v.len()];
        for row in centered {
            let dot: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            for (o, r) in out.iter_mut().zip(row) {
                *o += dot * r;
            }
        }
        out
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut degenerate = false;

    for _ in 0..200 {
        let mut w1 = apply(&v1);
        let n1 = norm(&w1);
        if n1 == 0.0 {
            return Err(Error::Validation("zero-variance data".into()));
        }
        for x in w1.iter_mut() {
            *x /= n1;
        }
        let mut w2 = apply(&v2);
        let proj: f64 = w2.iter().zip(&w1).map(|(a, b)| a * b).sum();
        for (x, y) in w2.iter_mut().zip(&w1) {
            *x -= proj * y;
        }
        let n2 = norm(&w2);
        if n2 <= 1e-12 * n1 {
            degenerate = true;
            // Any unit vector orthogonal to w1 serves; coordinates are zeroed.
            v1 = w1;
            v2 = vec![0.0; dim];
            break;
        }
        for x in w2.iter_mut() {
            *x /= n2;
        }
        let drift = v1
            .iter()
            .zip(&w1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v1 = w1;
        v2 = w2;
        if drift < 1e-13 {
            break;
        }
    }

    if degenerate {
        return Ok((v1, v2, true));
    }

    // Rayleigh-Ritz on span{v1, v2}.
    let cv1 = apply(&v1);
    let cv2 = apply(&v2);
    let b11: f64 = v1.iter().zip(&cv1).map(|(a, b)| a * b).sum();
    let b12: f64 = v1.iter().zip(&cv2).map(|(a, b)| a * b).sum();
    let b22: f64 = v2.iter().zip(&cv2).map(|(a, b)| a * b).sum();
    // Eigenvectors of [[b11,b12],[b12,b22]].
    let theta = 0.5 * (2.0 * b12).atan2(b11 - b22);
    let (c, s) = (theta.cos(), theta.sin());
    let e1 = [c, s];
    let e2 = [-s, c];
    let l1 = b11 * e1[0] * e1[0] + 2.0 * b12 * e1[0] * e1[1] + b22 * e1[1] * e1[1];
    let l2 = b11 * e2[0] * e2[0] + 2.0 * b12 * e2[0] * e2[1] + b22 * e2[1] * e2[1];
    let (first, second) = if l1 >= l2 { (e1, e2) } else { (e2, e1) };

    let combine = |e: [f64; 2]| -> Vec<f64> {
        v1.iter()
            .zip(&v2)
            .map(|(a, b)| e[0] * a + e[1] * b)
            .collect()
    };
    let axis1 = combine(first);
    let axis2 = combine(second);
    let var2 = l1.min(l2).abs();
    let var1 = l1.max(l2).abs();
    Ok((axis1, axis2, var2 <= 1e-12 * var1))
}

/// Projects the combined datasets; one point per input embedding.
pub fn project_2d(
    datasets: &[&EmbeddingDataset],
    projector: &dyn Projector,
) -> Result<Projection2D> {
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    for ds in datasets {
        for e in &ds.entries {
            rows.push(e.vector.as_slice().to_vec());
            meta.push((e.interview_id.clone(), e.domain.clone(), e.label));
        }
    }
    let coords = projector.project(&rows)?;
    Ok(Projection2D {
        points: meta
            .into_iter()
            .zip(coords)
            .map(|((interview_id, domain, label), (x, y))| ProjectionPoint {
                interview_id,
                x,
                y,
                domain,
                label,
            })
            .collect(),
    })
}

/// Mean silhouette coefficient of 2D points under the given labels.
pub fn silhouette_2d(points: &[(f64, f64)], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::Validation("silhouette needs matched non-empty inputs".into()));
    }
    let n = points.len();
    let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::Validation("silhouette needs at least two clusters".into()));
    }
    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let mut intra = 0.0;
        let mut intra_count = 0usize;
        let mut inter: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = dist(points[i], points[j]);
            if labels[j] == labels[i] {
                intra += d;
                intra_count += 1;
            } else {
                let e = inter.entry(labels[j]).or_insert((0.0, 0));
                e.0 += d;
                e.1 += 1;
            }
        }
        let s = if intra_count == 0 {
            0.0
        } else {
            let a = intra / intra_count as f64;
            let b = inter
                .values()
                .map(|(sum, c)| sum / *c as f64)
                .fold(f64::INFINITY, f64::min);
            (b - a) / a.max(b)
        };
        total += s;
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::InterviewEmbedding;

    fn dataset(domain: EmbeddingDomain, label: Option<AttachmentStyle>, vs: Vec<Vec<f64>>) -> EmbeddingDataset {
        let dim = vs[0].len();
        let entries = vs
            .into_iter()
            .enumerate()
            .map(|(i, v)| InterviewEmbedding {
                interview_id: format!("{domain}-{i:03}"),
                vector: Vector::new(v).unwrap(),
                domain: domain.clone(),
                label,
            })
            .collect();
        EmbeddingDataset::new(entries, dim).unwrap()
    }

    #[test]
    fn mean_vector_examples() {
        let v = Vector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(mean_vector(&[&v]).unwrap(), v);
        let a = Vector::new(vec![0.0, 2.0]).unwrap();
        let b = Vector::new(vec![2.0, 0.0]).unwrap();
        assert_eq!(mean_vector(&[&a, &b]).unwrap().as_slice(), &[1.0, 1.0]);
        assert!(mean_vector(&[]).is_err());
    }

    #[test]
    fn standardize_hand_example() {
        let synthetic = dataset(
            EmbeddingDomain::Synthetic("m".into()),
            Some(AttachmentStyle::Avoidant),
            vec![vec![3.0, 3.0], vec![5.0, 5.0]],
        );
        let human = dataset(
            EmbeddingDomain::HumanUnlabeled,
            None,
            vec![vec![0.0, 2.0], vec![2.0, 0.0]],
        );
        let shifted = standardize(&synthetic, &human).unwrap();
        let vs: Vec<&[f64]> = shifted.entries.iter().map(|e| e.vector.as_slice()).collect();
        assert_eq!(vs, vec![&[0.0, 0.0][..], &[2.0, 2.0][..]]);
        // Fixed point: equal means leave the data unchanged.
        let same = standardize(&shifted, &human).unwrap();
        assert_eq!(same, shifted);
    }

    #[test]
    fn standardize_aligns_means() {
        let synthetic = dataset(
            EmbeddingDomain::Synthetic("m".into()),
            Some(AttachmentStyle::Secure),
            vec![vec![0.125, -0.5, 3.25], vec![1.0, 0.75, -2.0], vec![0.5, 0.25, 0.0]],
        );
        let human = dataset(
            EmbeddingDomain::HumanUnlabeled,
            None,
            vec![vec![-1.0, 0.5, 0.25], vec![0.75, -0.125, 1.0]],
        );
        let shifted = standardize(&synthetic, &human).unwrap();
        let u = dataset_mean(&human).unwrap();
        let m = dataset_mean(&shifted).unwrap();
        for (a, b) in m.as_slice().iter().zip(u.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn standardize_rejects_labeled_human_or_dim_mismatch() {
        let synthetic = dataset(
            EmbeddingDomain::Synthetic("m".into()),
            Some(AttachmentStyle::Secure),
            vec![vec![1.0, 2.0]],
        );
        let labeled = dataset(
            EmbeddingDomain::HumanLabeled,
            Some(AttachmentStyle::Avoidant),
            vec![vec![1.0, 2.0]],
        );
        assert!(standardize(&synthetic, &labeled).is_err());
        let human3 = dataset(EmbeddingDomain::HumanUnlabeled, None, vec![vec![1.0, 2.0, 3.0]]);
        assert!(standardize(&synthetic, &human3).is_err());
    }

    #[test]
    fn diversity_counts_and_values() {
        // 3 identical vectors: C(3,2) = 3 pairs, all exactly 1.
        let ds = dataset(
            EmbeddingDomain::Synthetic("m".into()),
            Some(AttachmentStyle::Avoidant),
            vec![vec![1.0, 1.0]; 3],
        );
        let report = pairwise_cosine_by_style(&ds).unwrap();
        assert_eq!(report.groups.len(), 1);
        assert_eq!(report.groups[0].similarities.len(), 3);
        for s in &report.groups[0].similarities {
            assert!((s - 1.0).abs() < 1e-12);
        }

        let ortho = dataset(
            EmbeddingDomain::Synthetic("m".into()),
            Some(AttachmentStyle::Secure),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        );
        let report = pairwise_cosine_by_style(&ortho).unwrap();
        assert_eq!(report.groups[0].similarities, vec![0.0]);
    }

    #[test]
    fn diversity_pair_count_formula() {
        let ds = dataset(
            EmbeddingDomain::Synthetic("m".into()),
            Some(AttachmentStyle::Preoccupied),
            (0..20).map(|i| vec![i as f64 + 1.0, 2.0]).collect(),
        );
        let report = pairwise_cosine_by_style(&ds).unwrap();
        assert_eq!(report.groups[0].summary.count, 190);
    }

    #[test]
    fn planar_data_projects_with_preserved_distances() {
        // 2D plane embedded in 8 dimensions via a rotation-ish map.
        let planar: Vec<(f64, f64)> = vec![
            (0.0, 0.0),
            (1.0, 0.25),
            (-0.5, 1.5),
            (2.0, -1.0),
            (0.75, 0.5),
            (-1.25, -0.75),
        ];
        let b1: Vec<f64> = vec![0.5, -0.5, 0.5, -0.5, 0.0, 0.0, 0.0, 0.0];
        let b2: Vec<f64> = vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.5, -0.5, 0.5];
        let rows: Vec<Vec<f64>> = planar
            .iter()
            .map(|(x, y)| {
                (0..8)
                    .map(|i| x * b1[i] * 2.0 + y * b2[i] * 2.0)
                    .collect()
            })
            .collect();
        let proj = PrincipalComponentProjector::default();
        let coords = proj.project(&rows).unwrap();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let orig: f64 = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let got = ((coords[i].0 - coords[j].0).powi(2)
                    + (coords[i].1 - coords[j].1).powi(2))
                .sqrt();
                assert!((orig - got).abs() < 1e-6, "{orig} vs {got}");
            }
        }
    }

    #[test]
    fn collinear_points_zero_second_axis_or_error() {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let lenient = PrincipalComponentProjector { strict: false };
        let coords = lenient.project(&rows).unwrap();
        for (_, y) in coords {
            assert_eq!(y, 0.0);
        }
        let strict = PrincipalComponentProjector { strict: true };
        assert!(strict.project(&rows).is_err());
    }

    #[test]
    fn projection_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| (0..5).map(|j| ((i * 7 + j * 3) % 11) as f64).collect())
            .collect();
        let proj = PrincipalComponentProjector::default();
        assert_eq!(proj.project(&rows).unwrap(), proj.project(&rows).unwrap());
    }

    #[test]
    fn silhouette_separated_clusters_near_one() {
        let points = vec![
            (0.0, 0.0),
            (0.1, 0.0),
            (0.0, 0.1),
            (10.0, 10.0),
            (10.1, 10.0),
            (10.0, 10.1),
        ];
        let labels = vec![0, 0, 0, 1, 1, 1];
        assert!(silhouette_2d(&points, &labels).unwrap() > 0.9);
    }
}
