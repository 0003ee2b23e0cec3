use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{symmetric_eigen, SymMatrix};

/// Exact top-2 principal component scores of mean-centred data.
///
/// Decomposes whichever of the covariance (d×d) or Gram (n×n) matrix is
/// smaller. Each axis is sign-normalised so its largest-magnitude score is
/// positive. Inputs must be non-empty and rectangular.
pub fn pca_2d(vectors: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut scores = vec![[0.0; 2]; n];
    if d <= n {
        let mut cov = SymMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let s: f64 = centred.iter().map(|r| r[i] * r[j]).sum();
                cov.set(i, j, s);
                cov.set(j, i, s);
            }
        }
        let eig = symmetric_eigen(cov);
        for axis in 0..2.min(d) {
            let dir = &eig.vectors[axis];
            for (row, out) in centred.iter().zip(scores.iter_mut()) {
                out[axis] = row.iter().zip(dir).map(|(a, b)| a * b).sum();
            }
        }
    } else {
        let mut gram = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
                gram.set(i, j, s);
                gram.set(j, i, s);
            }
        }
        let eig = symmetric_eigen(gram);
        for axis in 0..2.min(n) {
            let lambda = eig.values[axis].max(0.0);
            let s = libm::sqrt(lambda);
            for (k, out) in scores.iter_mut().enumerate() {
                out[axis] = eig.vectors[axis][k] * s;
            }
        }
    }

    for axis in 0..2 {
        let pivot = scores
            .iter()
            .map(|p| p[axis])
            .fold(0.0f64, |best, x| if libm::fabs(x) > libm::fabs(best) { x } else { best });
        if pivot < 0.0 {
            scores.iter_mut().for_each(|p| p[axis] = -p[axis]);
        }
    }
    scores
}
