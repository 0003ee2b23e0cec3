//! Uniform manifold approximation and projection to 2D.
//!
//! Exact kNN graph, smooth-kNN membership strengths, fuzzy-union
//! symmetrisation, PCA initialisation and the usual negative-sampling SGD
//! layout with the `1 / (1 + a·d^{2b})` low-dimensional kernel.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{pca_2d, EmbedError, Projection, ProjectionConfig};

const NEGATIVE_SAMPLE_RATE: f64 = 5.0;
const LEARNING_RATE: f64 = 1.0;
const SPREAD: f64 = 1.0;
const GRAD_CLIP: f64 = 4.0;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k nearest neighbours (self excluded) with distances, nearest first.
fn knn(data: &[Vec<f64>], k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = data.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, libm::sqrt(sq_dist(&data[i], &data[j]))))
                .collect();
            d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            d.truncate(k);
            d
        })
        .collect()
}

/// Per-point `(rho, sigma)` so that the neighbour memberships sum to log2 k.
fn smooth_knn(neigh: &[(usize, f64)], k: usize, mean_dist: f64) -> (f64, f64) {
    let rho = neigh.iter().map(|x| x.1).find(|d| *d > 0.0).unwrap_or(0.0);
    let target = libm::log2(k as f64);
    let (mut lo, mut hi, mut mid) = (0.0, f64::INFINITY, 1.0);
    for _ in 0..64 {
        let psum: f64 = neigh
            .iter()
            .map(|(_, d)| {
                let dd = d - rho;
                if dd > 0.0 {
                    libm::exp(-dd / mid)
                } else {
                    1.0
                }
            })
            .sum();
        if libm::fabs(psum - target) < 1e-5 {
            break;
        }
        if psum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    let floor = 1e-3 * mean_dist;
    (rho, mid.max(floor))
}

/// Symmetric fuzzy graph as undirected edges `(i, j, w)` with `i < j`.
fn fuzzy_graph(data: &[Vec<f64>], k: usize) -> Vec<(usize, usize, f64)> {
    let neighbours = knn(data, k);
    let all: Vec<f64> = neighbours.iter().flatten().map(|x| x.1).collect();
    let mean_dist = all.iter().sum::<f64>() / all.len().max(1) as f64;
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, neigh) in neighbours.iter().enumerate() {
        let (rho, sigma) = smooth_knn(neigh, k, mean_dist);
        for &(j, d) in neigh {
            let w = if d - rho <= 0.0 {
                1.0
            } else {
                libm::exp(-(d - rho) / sigma)
            };
            directed.insert((i, j), w);
        }
    }
    let mut undirected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &w) in &directed {
        let key = (i.min(j), i.max(j));
        if undirected.contains_key(&key) {
            continue;
        }
        let back = directed.get(&(j, i)).copied().unwrap_or(0.0);
        undirected.insert(key, w + back - w * back);
    }
    undirected
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|((i, j), w)| (i, j, w))
        .collect()
}

/// Least-squares fit of `1 / (1 + a·x^{2b})` to the target membership curve
/// (1 below `min_dist`, exponential decay beyond). Levenberg–Marquardt.
pub fn fit_ab(min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (1..=300).map(|i| 3.0 * SPREAD * i as f64 / 300.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                libm::exp(-(x - min_dist) / SPREAD)
            }
        })
        .collect();
    let residuals = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let f = 1.0 / (1.0 + a * libm::pow(x, 2.0 * b));
                (f - y) * (f - y)
            })
            .sum()
    };
    let (mut a, mut b) = (1.0, 1.0);
    let mut lambda = 1e-3;
    let mut cost = residuals(a, b);
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            let p = libm::pow(x, 2.0 * b);
            let den = 1.0 + a * p;
            let f = 1.0 / den;
            let r = f - y;
            let da = -p / (den * den);
            let db = -a * p * 2.0 * libm::log(x) / (den * den);
            let j = [da, db];
            for u in 0..2 {
                jtr[u] += j[u] * r;
                for v in 0..2 {
                    jtj[u][v] += j[u] * j[v];
                }
            }
        }
        let m00 = jtj[0][0] * (1.0 + lambda);
        let m11 = jtj[1][1] * (1.0 + lambda);
        let det = m00 * m11 - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = (m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let step_b = (m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let (na, nb) = (a - step_a, b - step_b);
        if na > 0.0 && nb > 0.0 {
            let nc = residuals(na, nb);
            if nc < cost {
                let done = (cost - nc) < 1e-15 * cost.max(1e-300);
                a = na;
                b = nb;
                cost = nc;
                lambda = (lambda * 0.3).max(1e-12);
                if done {
                    break;
                }
                continue;
            }
        }
        lambda *= 10.0;
        if lambda > 1e12 {
            break;
        }
    }
    (a, b)
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

#[allow(clippy::needless_range_loop)]
pub fn umap_2d(data: &[Vec<f64>], cfg: &ProjectionConfig) -> Result<Projection, EmbedError> {
    let n = data.len();
    let mut warnings = Vec::new();
    let mut k = cfg.n_neighbors;
    if k >= n {
        k = n - 1;
        warnings.push(format!(
            "n_neighbors {} ≥ number of points {n}; clamped to {k}",
            cfg.n_neighbors
        ));
    }
    if k < 2 {
        return Err(EmbedError::Config("need at least 3 points for UMAP".into()));
    }
    let n_epochs = cfg.epochs.unwrap_or(if n <= 10_000 { 500 } else { 200 });
    let (a, b) = fit_ab(cfg.min_dist);

    let graph = fuzzy_graph(data, k);
    let max_w = graph.iter().map(|e| e.2).fold(0.0, f64::max);
    let edges: Vec<(usize, usize, f64)> = graph
        .into_iter()
        .filter(|e| e.2 >= max_w / n_epochs as f64)
        .flat_map(|(i, j, w)| [(i, j, w), (j, i, w)])
        .collect();
    let eps: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let eps_neg: Vec<f64> = eps.iter().map(|e| e / NEGATIVE_SAMPLE_RATE).collect();
    let mut next_sample = eps.clone();
    let mut next_neg = eps_neg.clone();

    // PCA initialisation scaled into [-10, 10].
    let mut y = pca_2d(data);
    let extent = y
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    if extent > 0.0 {
        let s = 10.0 / extent;
        y.iter_mut().for_each(|p| {
            p[0] *= s;
            p[1] *= s;
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for epoch in 0..n_epochs {
        let alpha = LEARNING_RATE * (1.0 - epoch as f64 / n_epochs as f64);
        let now = epoch as f64;
        for (e, &(i, j, _)) in edges.iter().enumerate() {
            if next_sample[e] > now {
                continue;
            }
            let d2 = sq_dist(&y[i], &y[j]);
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * libm::pow(d2, b - 1.0) / (a * libm::pow(d2, b) + 1.0)
            } else {
                0.0
            };
            for dim in 0..2 {
                let g = clip(coeff * (y[i][dim] - y[j][dim]));
                y[i][dim] += g * alpha;
                y[j][dim] -= g * alpha;
            }
            next_sample[e] += eps[e];

            let n_neg = ((now - next_neg[e]) / eps_neg[e]).max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                if other == i {
                    continue;
                }
                let d2 = sq_dist(&y[i], &y[other]);
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * libm::pow(d2, b) + 1.0))
                } else {
                    0.0
                };
                for dim in 0..2 {
                    let g = if coeff > 0.0 {
                        clip(coeff * (y[i][dim] - y[other][dim]))
                    } else {
                        GRAD_CLIP
                    };
                    y[i][dim] += g * alpha;
                }
            }
            next_neg[e] += n_neg as f64 * eps_neg[e];
        }
    }
    Ok(Projection {
        points: y,
        warnings,
    })
}
