//! Two-component PCA over TF-IDF vectors with a cyclic Jacobi solver.

use serde::Serialize;

use super::{AnalyticsError, CorpusVector};

const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix (row-major, `n x n`).
///
/// Returns eigenvalues sorted descending (stable on ties) and matching unit
/// eigenvectors. Iterates until the off-diagonal Frobenius norm falls below
/// `1e-12` relative to the matrix norm.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= OFF_DIAGONAL_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (lo, hi) = a.split_at_mut(q);
                for (apk, aqk) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (x, y) = (*apk, *aqk);
                    *apk = c * x - s * y;
                    *aqk = s * x + c * y;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// Flips `axis` so its largest-magnitude coordinate (first on ties) is positive.
fn orient(axis: &mut [f64]) {
    let mut best = 0;
    for (i, x) in axis.iter().enumerate() {
        if x.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis.get(best).is_some_and(|&x| x < 0.0) {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First canonical direction with a usable component orthogonal to `taken`.
fn canonical_fallback(dims: usize, taken: &[Vec<f64>]) -> Vec<f64> {
    for j in 0..dims {
        let mut e = vec![0.0; dims];
        e[j] = 1.0;
        for t in taken {
            let d = dot(&e, t);
            e.iter_mut().zip(t).for_each(|(x, y)| *x -= d * y);
        }
        let norm = dot(&e, &e).sqrt();
        if norm > 1e-6 {
            e.iter_mut().for_each(|x| *x /= norm);
            return e;
        }
    }
    unreachable!("dims >= 2 always leaves a free canonical direction")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedPoint {
    pub doc_id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub points: Vec<ProjectedPoint>,
    pub component_axes: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    /// Trace of the sample covariance.
    pub total_variance: f64,
    pub mean: Vec<f64>,
}

/// PCA of dense rows. Uses the `d x d` covariance when `d <= n`, otherwise
/// the `n x n` Gram matrix of the centered rows.
pub fn pca_project_dense(ids: &[String], rows: &[Vec<f64>]) -> Result<ProjectionReport, AnalyticsError> {
    let n = rows.len();
    if n < 2 {
        return Err(AnalyticsError::TooFewVectors { needed: 2, got: n });
    }
    let d = rows[0].len();
    if d < 2 {
        return Err(AnalyticsError::TooFewDimensions { needed: 2, got: d });
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let denom = (n - 1) as f64;
    let total_variance = centered.iter().map(|r| dot(r, r)).sum::<f64>() / denom;
    let tol = 1e-12 * total_variance.max(f64::MIN_POSITIVE);

    let (values, axes): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let mut cov = vec![vec![0.0; d]; d];
        for r in &centered {
            for i in 0..d {
                if r[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    cov[i][j] += r[i] * r[j];
                }
            }
        }
        cov.iter_mut().flatten().for_each(|x| *x /= denom);
        let (vals, vecs) = jacobi_eigen(&cov);
        (vals.into_iter().take(2).collect(), vecs.into_iter().take(2).collect())
    } else {
        let gram: Vec<Vec<f64>> = centered
            .iter()
            .map(|a| centered.iter().map(|b| dot(a, b) / denom).collect())
            .collect();
        let (vals, vecs) = jacobi_eigen(&gram);
        let mut axes = Vec::new();
        for (lambda, u) in vals.iter().zip(&vecs).take(2) {
            if *lambda > tol {
                let mut axis = vec![0.0; d];
                for (row, &ui) in centered.iter().zip(u) {
                    axis.iter_mut().zip(row).for_each(|(a, x)| *a += ui * x);
                }
                let norm = dot(&axis, &axis).sqrt();
                axis.iter_mut().for_each(|a| *a /= norm);
                axes.push(axis);
            } else {
                axes.push(canonical_fallback(d, &axes));
            }
        }
        (vals.into_iter().take(2).collect(), axes)
    };

    let mut axes = axes;
    for axis in axes.iter_mut() {
        orient(axis);
    }
    let explained = [values[0].max(0.0), values[1].max(0.0)];
    let points = ids
        .iter()
        .zip(&centered)
        .map(|(id, r)| ProjectedPoint {
            doc_id: id.clone(),
            x: dot(r, &axes[0]),
            y: dot(r, &axes[1]),
        })
        .collect();
    let second = axes.pop().expect("two axes");
    let first = axes.pop().expect("two axes");
    Ok(ProjectionReport {
        points,
        component_axes: [first, second],
        explained_variance: explained,
        total_variance,
        mean,
    })
}

/// PCA of TF-IDF vectors over a vocabulary of `dims` terms.
pub fn pca_project(vectors: &[CorpusVector], dims: usize) -> Result<ProjectionReport, AnalyticsError> {
    let ids: Vec<String> = vectors.iter().map(|v| v.doc_id.clone()).collect();
    let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.to_dense(dims)).collect();
    pca_project_dense(&ids, &rows)
}
