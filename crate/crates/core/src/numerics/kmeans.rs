use rand::Rng;

use super::distance::squared_euclidean;
use super::Matrix;
use crate::{Error, Result};

pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub iterations: usize,
    /// Objective after seeding and after every Lloyd step.
    pub objective_history: Vec<f64>,
}

/// Sum of squared distances from each row to its assigned centroid.
pub fn kmeans_objective(x: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    labels.iter().enumerate().map(|(i, &c)| squared_euclidean(x.row(i), centroids.row(c))).sum()
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing (or [`KMEANS_MAX_ITER`]). Empty clusters are re-seeded with the
/// point farthest from its current centroid, so every label in `0..k` is
/// used whenever `k ≤ n`.
pub fn kmeans(x: &Matrix, k: usize, seed: u64) -> Result<KMeans> {
    let n = x.rows();
    if k == 0 {
        return Err(Error::InvalidParameter("k-means needs k >= 1".into()));
    }
    if k > n {
        return Err(Error::TooMany { k, n });
    }
    let mut rng = crate::seed::rng(seed);
    let mut centroids = plus_plus(x, k, &mut rng);
    let mut labels = assign(x, &centroids);
    fix_empty(x, &mut labels, &mut centroids, k);
    let mut history = vec![kmeans_objective(x, &labels, &centroids)];

    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        centroids = update_centroids(x, &labels, k, &centroids);
        let mut next = assign(x, &centroids);
        fix_empty(x, &mut next, &mut centroids, k);
        history.push(kmeans_objective(x, &next, &centroids));
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(KMeans { labels, centroids, iterations, objective_history: history })
}

fn plus_plus(x: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_euclidean(x.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_euclidean(x.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn assign(x: &Matrix, centroids: &Matrix) -> Vec<usize> {
    (0..x.rows())
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..centroids.rows() {
                let d = squared_euclidean(x.row(i), centroids.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn update_centroids(x: &Matrix, labels: &[usize], k: usize, previous: &Matrix) -> Matrix {
    let mut sums = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            sums.row_mut(c).copy_from_slice(previous.row(c));
        } else {
            let inv = 1.0 / counts[c] as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    sums
}

fn fix_empty(x: &Matrix, labels: &mut [usize], centroids: &mut Matrix, k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &c in labels.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // farthest point among those whose cluster can spare a member
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &c) in labels.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = squared_euclidean(x.row(i), centroids.row(c));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { return };
        labels[i] = empty;
        centroids.row_mut(empty).copy_from_slice(x.row(i));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn separates_two_groups() {
        let x = col(&[0.0, 0.1, 10.0, 10.1]);
        let r = kmeans(&x, 2, 1).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[2], r.labels[3]);
        assert_ne!(r.labels[0], r.labels[2]);
    }

    #[test]
    fn single_cluster() {
        let x = col(&[1.0, 5.0, -3.0]);
        assert_eq!(kmeans(&x, 1, 4).unwrap().labels, vec![0, 0, 0]);
    }

    #[test]
    fn rejects_k_above_n() {
        assert!(matches!(kmeans(&col(&[1.0]), 2, 0), Err(Error::TooMany { k: 2, n: 1 })));
    }

    #[test]
    fn identical_points_still_fill_every_cluster() {
        let x = col(&[2.0; 5]);
        let r = kmeans(&x, 3, 9).unwrap();
        for c in 0..3 {
            assert!(r.labels.contains(&c));
        }
    }

    fn blobs(seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = crate::seed::rng(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let centers = [[0.0, 0.0], [15.0, 0.0], [0.0, 15.0]];
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, ctr) in centers.iter().enumerate() {
            for _ in 0..20 {
                rows.push(vec![ctr[0] + noise.sample(&mut rng), ctr[1] + noise.sample(&mut rng)]);
                truth.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn recovers_gaussian_blobs_up_to_permutation() {
        for seed in 0..5 {
            let (x, truth) = blobs(seed);
            let r = kmeans(&x, 3, seed).unwrap();
            // best permutation of 3 labels
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let best = perms
                .iter()
                .map(|p| truth.iter().zip(&r.labels).filter(|(&t, &l)| p[t] == l).count())
                .max()
                .unwrap();
            assert_eq!(best, 60);
        }
    }

    #[test]
    fn objective_never_increases_and_is_deterministic() {
        let (x, _) = blobs(3);
        let r = kmeans(&x, 4, 17).unwrap();
        for w in r.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", r.objective_history);
        }
        assert_eq!(kmeans(&x, 4, 17).unwrap().labels, r.labels);
    }
}
