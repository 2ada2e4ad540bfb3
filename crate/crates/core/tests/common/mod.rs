//! Reference implementations used as test oracles. None of this calls into
//! the library code paths it checks.
#![allow(dead_code)]

use std::path::PathBuf;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Two-layer evaluation written out with explicit indices.
pub fn hand_forward(n: usize, q: usize, m: usize, p: &[f64], x: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; q];
    for j in 0..q {
        let mut acc = 0.0;
        for i in 0..n {
            acc += p[j * n + i] * x[i];
        }
        h[j] = logistic(acc + p[n * q + j]);
    }
    let w_out = n * q + q;
    let b_out = w_out + q * m;
    let mut f = vec![0.0; m];
    for k in 0..m {
        let mut acc = 0.0;
        for j in 0..q {
            acc += p[w_out + k * q + j] * h[j];
        }
        f[k] = logistic(acc + p[b_out + k]);
    }
    f
}

/// Mean squared error over all outputs and examples, by double loop.
pub fn hand_mse(n: usize, q: usize, m: usize, p: &[f64], xs: &[Vec<f64>], ts: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (x, t) in xs.iter().zip(ts) {
        let f = hand_forward(n, q, m, p, x);
        for k in 0..m {
            total += (f[k] - t[k]) * (f[k] - t[k]);
        }
    }
    total / (m * xs.len()) as f64
}

pub fn sse_of_partition(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| p)
            .collect();
        let mut mean = vec![0.0; dim];
        for p in &members {
            for d in 0..dim {
                mean[d] += p[d];
            }
        }
        for v in &mut mean {
            *v /= members.len() as f64;
        }
        for p in &members {
            for d in 0..dim {
                total += (p[d] - mean[d]).powi(2);
            }
        }
    }
    total
}

/// Minimum within-cluster SSE over every partition of `points` into exactly
/// `k` non-empty clusters (restricted-growth enumeration).
pub fn optimal_sse(points: &[Vec<f64>], k: usize) -> f64 {
    optimal_partition(points, k).0
}

/// The minimizing SSE and one partition attaining it.
pub fn optimal_partition(points: &[Vec<f64>], k: usize) -> (f64, Vec<usize>) {
    fn walk(
        points: &[Vec<f64>],
        k: usize,
        labels: &mut Vec<usize>,
        used: usize,
        best: &mut (f64, Vec<usize>),
    ) {
        let i = labels.len();
        if i == points.len() {
            if used == k {
                let sse = sse_of_partition(points, labels, k);
                if sse < best.0 {
                    *best = (sse, labels.clone());
                }
            }
            return;
        }
        if points.len() - i < k - used {
            return;
        }
        for c in 0..=used.min(k - 1) {
            labels.push(c);
            walk(points, k, labels, used.max(c + 1), best);
            labels.pop();
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    walk(points, k, &mut Vec::new(), 0, &mut best);
    best
}

/// Per-cluster means by direct accumulation.
pub fn partition_means(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for d in 0..dim {
            sums[l][d] += p[d];
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= c as f64;
        }
    }
    sums
}
