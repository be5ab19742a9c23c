//! Seeded Lloyd k-means with k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{MgspError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansOptions {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the relative SSE decrease falls below this.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl KMeansOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansOptions {
            k,
            max_iter: 300,
            tol: 1e-6,
            restarts: 1,
            seed,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    /// SSE after every Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // every point coincides with a center already
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    if points.len() * centroids.len() > 4096 {
        points.par_iter().map(|p| nearest(p, centroids)).collect()
    } else {
        points.iter().map(|p| nearest(p, centroids)).collect()
    }
}

fn update(points: &[Vec<f64>], labels: &mut [usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    loop {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(labels.iter()) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let centroids: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| s.into_iter().map(|v| v / c.max(1) as f64).collect())
            .collect();
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return centroids;
        };
        // Move the point farthest from its centroid (in a cluster that can
        // spare it) into the empty cluster.
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = dist2(p, &centroids[labels[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        match far {
            Some(i) => labels[i] = empty,
            None => return centroids,
        }
    }
}

fn sse_of(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| dist2(p, &centroids[l]))
        .sum()
}

fn lloyd(points: &[Vec<f64>], opts: &KMeansOptions, rng: &mut ChaCha8Rng) -> KMeansResult {
    let dim = points[0].len();
    let mut centroids = plus_plus(points, opts.k, rng);
    let mut labels: Vec<usize> = assign(points, &centroids).into_iter().map(|(l, _)| l).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        centroids = update(points, &mut labels, opts.k, dim);
        let sse = sse_of(points, &labels, &centroids);
        let prev = history.last().copied();
        history.push(sse);
        let next: Vec<usize> = assign(points, &centroids).into_iter().map(|(l, _)| l).collect();
        let unchanged = next == labels;
        labels = next;
        if unchanged || prev.is_some_and(|p| p - sse <= opts.tol * p) {
            break;
        }
    }
    centroids = update(points, &mut labels, opts.k, dim);
    let sse = sse_of(points, &labels, &centroids);
    if history.last().is_none_or(|&h| sse < h) {
        history.push(sse);
    }
    KMeansResult {
        assignment: labels,
        centroids,
        sse,
        history,
        iterations,
    }
}

/// Clusters `points` into `k` groups; the lowest-SSE restart wins (earliest
/// on ties).
pub fn kmeans(points: &[Vec<f64>], opts: KMeansOptions) -> Result<KMeansResult> {
    if opts.k == 0 || opts.k > points.len() {
        return Err(MgspError::param(format!(
            "k-means with k={} on {} points",
            opts.k,
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(MgspError::param("k-means points must share one finite dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..opts.restarts.max(1) {
        let run = lloyd(points, &opts, &mut rng);
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
