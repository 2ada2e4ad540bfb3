//! Lloyd's k-means over dense vectors, with warm starts and empty-cluster
//! repair so that every cluster keeps at least one member.

use rand::Rng;

use crate::error::{check_len, Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Sum of squared distances from each point to its centroid.
    pub within_sse: f64,
    /// Lloyd iterations performed.
    pub iterations: usize,
    /// Within-cluster SSE after each centroid update, in order.
    pub sse_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Member indices of `cluster`, ascending.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.labels, self.k())
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = squared_distance(point, &centroids[0]);
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(point, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

fn check_dims(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<()> {
    let dim = centroids
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Clustering("no centroids".into()))?;
    for v in points.iter().chain(centroids) {
        check_len(dim, v.len())?;
    }
    Ok(())
}

/// Labels each point with its nearest centroid; ties go to the lower index.
pub fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<Vec<usize>> {
    check_dims(points, centroids)?;
    Ok(points.iter().map(|p| nearest(p, centroids)).collect())
}

fn cluster_means(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Option<Vec<f64>>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let sizes = cluster_sizes(labels, k);
    for (p, &l) in points.iter().zip(labels) {
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(sizes)
        .map(|(mut s, n)| {
            (n > 0).then(|| {
                s.iter_mut().for_each(|v| *v /= n as f64);
                s
            })
        })
        .collect()
}

/// Moves every centroid to the mean of its members.
///
/// An empty cluster takes over the point lying farthest from its own
/// cluster's centroid (among clusters with more than one member); that
/// point is relabeled and the donor centroid recomputed. `labels` is
/// updated in place to reflect any repair.
pub fn recompute_centroids(
    points: &[Vec<f64>],
    labels: &mut [usize],
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::Clustering("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::Clustering(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    check_len(points.len(), labels.len())?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Clustering(format!("label {bad} out of range for k = {k}")));
    }
    let dim = points[0].len();
    for p in points {
        check_len(dim, p.len())?;
    }

    let mut means = cluster_means(points, labels, k);
    let mut sizes = cluster_sizes(labels, k);
    for empty in 0..k {
        if means[empty].is_some() {
            continue;
        }
        let mut donor_point = None;
        let mut farthest = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let owner = labels[i];
            if sizes[owner] < 2 {
                continue;
            }
            let Some(centroid) = means[owner].as_ref() else {
                continue;
            };
            let d = squared_distance(p, centroid);
            if d > farthest {
                farthest = d;
                donor_point = Some(i);
            }
        }
        // k <= points.len() guarantees some cluster has a spare member.
        let i = donor_point.expect("a cluster with at least two members");
        let donor = labels[i];
        labels[i] = empty;
        sizes[donor] -= 1;
        sizes[empty] = 1;
        means[empty] = Some(points[i].clone());
        let mut sum = vec![0.0; dim];
        for (p, &l) in points.iter().zip(labels.iter()) {
            if l == donor {
                for (s, x) in sum.iter_mut().zip(p) {
                    *s += x;
                }
            }
        }
        sum.iter_mut().for_each(|v| *v /= sizes[donor] as f64);
        means[donor] = Some(sum);
    }
    Ok(means.into_iter().map(|m| m.expect("repaired")).collect())
}

pub fn within_sse(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, &centroids[l]))
        .sum()
}

/// Runs Lloyd's algorithm until the labels stop changing or `max_iters`
/// updates have been made.
///
/// With `seeds` the run starts from those centroids; otherwise `k` distinct
/// points are drawn uniformly without replacement (the only use of `rng`).
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seeds: Option<&[Vec<f64>]>,
    max_iters: usize,
    rng: &mut impl Rng,
) -> Result<ClusterAssignment> {
    if k == 0 {
        return Err(Error::Clustering("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::Clustering(format!(
            "{} points cannot form {k} clusters",
            points.len()
        )));
    }
    let mut centroids: Vec<Vec<f64>> = match seeds {
        Some(s) => {
            if s.len() != k {
                return Err(Error::Clustering(format!(
                    "{} seed centroids supplied for k = {k}",
                    s.len()
                )));
            }
            s.to_vec()
        }
        None => rand::seq::index::sample(rng, points.len(), k)
            .into_iter()
            .map(|i| points[i].clone())
            .collect(),
    };
    let mut labels = assign(points, &centroids)?;
    let mut sse_history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        iterations += 1;
        let mut repaired = labels.clone();
        centroids = recompute_centroids(points, &mut repaired, k)?;
        sse_history.push(within_sse(points, &centroids, &repaired));
        let next = assign(points, &centroids)?;
        if next == repaired {
            labels = repaired;
            converged = true;
            break;
        }
        labels = next;
    }

    if !converged && cluster_sizes(&labels, k).contains(&0) {
        // Out of budget with an empty cluster: one more repaired update so
        // every cluster has a member.
        centroids = recompute_centroids(points, &mut labels, k)?;
    }

    Ok(ClusterAssignment {
        within_sse: within_sse(points, &centroids, &labels),
        centroids,
        labels,
        iterations,
        sse_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    fn random_points(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect()
    }

    #[test]
    fn assigns_to_nearest() {
        assert_eq!(assign(&pts(&[0.0, 10.0]), &pts(&[0.0, 10.0])).unwrap(), vec![0, 1]);
    }

    #[test]
    fn equidistant_point_takes_lower_index() {
        assert_eq!(assign(&pts(&[1.0]), &pts(&[0.0, 2.0])).unwrap(), vec![0]);
        assert_eq!(assign(&pts(&[1.0]), &pts(&[2.0, 0.0])).unwrap(), vec![0]);
    }

    #[test]
    fn assignment_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points = random_points(20, 3, &mut rng);
        let centroids = random_points(4, 3, &mut rng);
        let labels = assign(&points, &centroids).unwrap();
        for (p, &l) in points.iter().zip(&labels) {
            let d: Vec<f64> = centroids
                .iter()
                .map(|c| (0..3).map(|i| (p[i] - c[i]).powi(2)).sum())
                .collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(l, d.iter().position(|&x| x == min).unwrap());
        }
    }

    #[test]
    fn assign_rejects_mixed_dimensions() {
        assert!(matches!(
            assign(&[vec![0.0, 1.0]], &pts(&[0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(assign(&pts(&[0.0]), &[]).is_err());
    }

    #[test]
    fn centroid_is_member_mean() {
        let mut labels = vec![0, 0];
        let c = recompute_centroids(&pts(&[1.0, 3.0]), &mut labels, 1).unwrap();
        assert_eq!(c, vec![vec![2.0]]);
    }

    #[test]
    fn empty_cluster_takes_farthest_point() {
        let points = pts(&[0.0, 1.0, 2.0, 9.0]);
        let mut labels = vec![0; 4];
        let c = recompute_centroids(&points, &mut labels, 2).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1]);
        assert_eq!(c, vec![vec![1.0], vec![9.0]]);
    }

    #[test]
    fn recompute_argument_errors() {
        let points = pts(&[0.0, 1.0]);
        assert!(recompute_centroids(&points, &mut [0, 0], 0).is_err());
        assert!(recompute_centroids(&points, &mut [0, 0], 3).is_err());
        assert!(recompute_centroids(&points, &mut [0, 2], 2).is_err());
    }

    #[test]
    fn centroids_match_accumulated_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points = random_points(30, 4, &mut rng);
        let mut labels: Vec<usize> = (0..30).map(|i| i % 5).collect();
        let before = labels.clone();
        let c = recompute_centroids(&points, &mut labels, 5).unwrap();
        assert_eq!(labels, before);
        for cluster in 0..5 {
            let mut acc = [0.0; 4];
            let mut n = 0.0;
            for (p, &l) in points.iter().zip(&labels) {
                if l == cluster {
                    for d in 0..4 {
                        acc[d] += p[d];
                    }
                    n += 1.0;
                }
            }
            for d in 0..4 {
                assert!((c[cluster][d] - acc[d] / n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn k_distinct_points_form_singletons() {
        let points = pts(&[0.0, 4.0, -3.0]);
        let a = kmeans(&points, 3, None, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.within_sse, 0.0);
        assert_eq!(a.sizes(), vec![1, 1, 1]);
    }

    #[test]
    fn seeded_two_cluster_example() {
        let points = pts(&[0.0, 1.0, 10.0, 11.0]);
        let seeds = pts(&[0.0, 11.0]);
        let a = kmeans(&points, 2, Some(&seeds), 100, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(a.labels, vec![0, 0, 1, 1]);
        assert_eq!(a.centroids, pts(&[0.5, 10.5]));
        assert_eq!(a.within_sse, 1.0);
    }

    #[test]
    fn too_few_points() {
        let r = kmeans(&pts(&[0.0]), 2, None, 10, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Clustering(_))));
    }

    #[test]
    fn far_seed_still_gets_a_member() {
        let points = pts(&[0.0, 0.5, 1.0, 1.5]);
        let seeds = pts(&[0.7, 100.0]);
        let a = kmeans(&points, 2, Some(&seeds), 100, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(a.sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn identical_points_still_fill_every_cluster() {
        let points = vec![vec![1.0, 1.0]; 5];
        let a = kmeans(&points, 3, None, 20, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(a.sizes().iter().all(|&s| s > 0));
        assert_eq!(a.within_sse, 0.0);
    }

    proptest! {
        #[test]
        fn lloyd_invariants(seed in any::<u64>(), n in 3usize..40, k in 1usize..6, dim in 1usize..5) {
            prop_assume!(k <= n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = random_points(n, dim, &mut rng);
            let a = kmeans(&points, k, None, 100, &mut rng).unwrap();

            prop_assert!(a.sizes().iter().all(|&s| s > 0));
            for w in a.sse_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{:?}", a.sse_history);
            }
            if a.iterations < 100 {
                prop_assert_eq!(&assign(&points, &a.centroids).unwrap(), &a.labels);
                let again = kmeans(&points, k, Some(&a.centroids), 100, &mut rng).unwrap();
                prop_assert_eq!(&again.labels, &a.labels);
            }
        }
    }
}
