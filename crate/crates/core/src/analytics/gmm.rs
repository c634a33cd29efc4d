//! Two-dimensional Gaussian mixture fitted by expectation maximization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];
pub type Cov = [[f64; 2]; 2];

pub const TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 500;
pub const EIGEN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Point>,
    pub covariances: Vec<Cov>,
    /// Index of the most responsible component per input point.
    pub assignments: Vec<usize>,
    /// Total log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GmmModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GmmError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("need at least {k} points, got {n}")]
    TooFewPoints { k: usize, n: usize },
    #[error("all points are identical")]
    DegenerateData,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
}

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Symmetric 2x2 eigen-decomposition with eigenvalues clamped from below.
fn floor_eigenvalues(c: Cov, floor: f64) -> Cov {
    let (a, b, d) = (c[0][0], 0.5 * (c[0][1] + c[1][0]), c[1][1]);
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d).powi(2) + b * b).sqrt();
    let (l1, l2) = (mean + r, mean - r);
    if l2 >= floor {
        return [[a, b], [b, d]];
    }
    // Unit eigenvector for l1.
    let (vx, vy) = if b.abs() > 1e-300 {
        let (x, y) = (l1 - d, b);
        let n = (x * x + y * y).sqrt();
        (x / n, y / n)
    } else if a >= d {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let (l1, l2) = (l1.max(floor), l2.max(floor));
    // V diag(l1, l2) V^T with second eigenvector (-vy, vx).
    let xx = l1 * vx * vx + l2 * vy * vy;
    let yy = l1 * vy * vy + l2 * vx * vx;
    let xy = (l1 - l2) * vx * vy;
    [[xx, xy], [xy, yy]]
}

fn log_density(p: &Point, mean: &Point, cov: &Cov) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
    let maha = (cov[1][1] * dx * dx - 2.0 * cov[0][1] * dx * dy + cov[0][0] * dy * dy) / det;
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * maha
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
fn kmeans_pp(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[idx];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Weights, means and floored covariances from responsibilities.
fn m_step(points: &[Point], resp: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<Point>, Vec<Cov>) {
    let n = points.len() as f64;
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for j in 0..k {
        let nk: f64 = resp
            .iter()
            .map(|r| r[j])
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        let mut m = [0.0; 2];
        for (p, r) in points.iter().zip(resp) {
            m[0] += r[j] * p[0];
            m[1] += r[j] * p[1];
        }
        m[0] /= nk;
        m[1] /= nk;
        let mut c = [[0.0; 2]; 2];
        for (p, r) in points.iter().zip(resp) {
            let (dx, dy) = (p[0] - m[0], p[1] - m[1]);
            c[0][0] += r[j] * dx * dx;
            c[0][1] += r[j] * dx * dy;
            c[1][1] += r[j] * dy * dy;
        }
        c[0][0] /= nk;
        c[0][1] /= nk;
        c[1][1] /= nk;
        c[1][0] = c[0][1];
        weights.push(nk / n);
        means.push(m);
        covs.push(floor_eigenvalues(c, EIGEN_FLOOR));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (weights, means, covs)
}

/// Responsibilities and total log-likelihood.
fn e_step(
    points: &[Point],
    weights: &[f64],
    means: &[Point],
    covs: &[Cov],
) -> (Vec<Vec<f64>>, f64) {
    let k = weights.len();
    let mut ll = 0.0;
    let mut resp = Vec::with_capacity(points.len());
    let mut logp = vec![0.0; k];
    for p in points {
        for j in 0..k {
            logp[j] = weights[j].ln() + log_density(p, &means[j], &covs[j]);
        }
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logp.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        ll += lse;
        resp.push(logp.iter().map(|l| (l - lse).exp()).collect());
    }
    (resp, ll)
}

/// Fits a `k`-component mixture. EM starts from hard assignments to
/// k-means++ centers and stops when the log-likelihood gains less than
/// [`TOLERANCE`] or after [`MAX_ITERATIONS`].
pub fn gmm_fit(points: &[Point], k: usize, seed: u64) -> Result<GmmModel, GmmError> {
    if k == 0 {
        return Err(GmmError::InvalidK);
    }
    if points.len() < k {
        return Err(GmmError::TooFewPoints { k, n: points.len() });
    }
    if let Some(i) = points
        .iter()
        .position(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(GmmError::NonFinite(i));
    }
    if points.iter().all(|p| p == &points[0]) {
        return Err(GmmError::DegenerateData);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans_pp(points, k, &mut rng);
    let hard: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b])))
                .unwrap_or(0);
            (0..k).map(|j| f64::from(u8::from(j == best))).collect()
        })
        .collect();
    let (mut weights, mut means, mut covs) = m_step(points, &hard, k);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut resp = hard;
    for _ in 0..MAX_ITERATIONS {
        let (r, ll) = e_step(points, &weights, &means, &covs);
        resp = r;
        let done = trace
            .last()
            .is_some_and(|prev: &f64| (ll - prev).abs() < TOLERANCE);
        trace.push(ll);
        if done {
            converged = true;
            break;
        }
        (weights, means, covs) = m_step(points, &resp, k);
    }

    let assignments = resp
        .iter()
        .map(|r| {
            (0..k)
                .max_by(|&a, &b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))
                .unwrap_or(0)
        })
        .collect();
    Ok(GmmModel {
        k,
        weights,
        means,
        covariances: covs,
        assignments,
        iterations: trace.len(),
        log_likelihood: trace,
        converged,
    })
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Fraction of points labeled correctly under the best matching of cluster
/// ids to reference ids. Exhaustive over permutations, so keep `k` small.
pub fn best_match_accuracy(predicted: &[usize], truth: &[usize], k: usize) -> f64 {
    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    if predicted.is_empty() {
        return 1.0;
    }
    permutations(k)
        .iter()
        .map(|perm| {
            predicted
                .iter()
                .zip(truth)
                .filter(|(p, t)| perm.get(**p) == Some(t))
                .count()
        })
        .max()
        .unwrap_or(0) as f64
        / predicted.len() as f64
}
