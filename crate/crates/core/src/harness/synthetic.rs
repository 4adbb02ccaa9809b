//! Gaussian-blob datasets with configurable class imbalance.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::numerics::{FeatureMatrix, Matrix};
use crate::{seed, Error, Result};

pub const PLACEMENT_ATTEMPTS: usize = 1000;
/// Minimum center distance in units of the blob spread.
pub const DEFAULT_SEPARATION: f64 = 6.0;

/// Class-ratio presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Abusive / hateful / spam / normal.
    TwitterAbusive,
    /// Attack / normal.
    WikiAttack,
    Balanced,
}

impl Preset {
    /// Class proportions; `balanced` uses `classes` equal shares.
    pub fn proportions(self, classes: usize) -> Vec<f64> {
        match self {
            Preset::TwitterAbusive => vec![0.240, 0.047, 0.148, 0.565],
            Preset::WikiAttack => vec![0.117, 0.883],
            Preset::Balanced => vec![1.0 / classes as f64; classes],
        }
    }

    pub fn classes(self, balanced_classes: usize) -> usize {
        self.proportions(balanced_classes).len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::TwitterAbusive => "twitter-abusive",
            Preset::WikiAttack => "wiki-attack",
            Preset::Balanced => "balanced",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Preset::TwitterAbusive, Preset::WikiAttack, Preset::Balanced]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}' (twitter-abusive|wiki-attack|balanced)")))
    }
}

/// Split `n` by `proportions` with the largest-remainder rule.
pub fn class_counts(proportions: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = proportions.iter().sum();
    let exact: Vec<f64> = proportions.iter().map(|p| p / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = n - counts.iter().sum::<usize>();
    for &c in order.iter().take(missing) {
        counts[c] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub counts: Vec<usize>,
    pub dim: usize,
    /// Per-coordinate standard deviation of every blob.
    pub spread: f64,
    /// Minimum pairwise center distance; defaults to 6 × spread.
    pub min_center_distance: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub centers: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        self.labels.iter().for_each(|&c| h[c] += 1);
        h
    }
}

/// One Gaussian blob per class, rows shuffled, ids 0..n.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let k = spec.counts.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {k}")));
    }
    if spec.counts.contains(&0) {
        return Err(Error::InvalidParameter("every class needs at least one sample".into()));
    }
    if spec.dim == 0 || !(spec.spread.is_finite() && spec.spread > 0.0) {
        return Err(Error::InvalidParameter("dimension and spread must be positive".into()));
    }
    let min_dist = spec.min_center_distance.unwrap_or(DEFAULT_SEPARATION * spec.spread);
    let mut rng = seed::rng(seed::derive(spec.seed, seed::purpose::DATA));
    let centers = place_centers(k, spec.dim, min_dist, &mut rng)?;
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut samples: Vec<(Vec<f64>, usize)> = Vec::with_capacity(spec.counts.iter().sum());
    for (c, &count) in spec.counts.iter().enumerate() {
        for _ in 0..count {
            samples.push((centers[c].iter().map(|m| m + noise.sample(&mut rng)).collect(), c));
        }
    }
    samples.shuffle(&mut rng);
    let (rows, labels): (Vec<Vec<f64>>, Vec<usize>) = samples.into_iter().unzip();
    let features = FeatureMatrix::with_sequential_ids(Matrix::from_rows(&rows)?)?;
    Ok(Dataset { features, labels, classes: k, centers })
}

/// Uniform centers in a cube wide enough for `k` points `min_dist` apart,
/// by rejection.
fn place_centers(k: usize, dim: usize, min_dist: f64, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let half_width = min_dist * (k as f64).powf(1.0 / dim as f64);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while centers.len() < k {
        if attempts == PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementFailed { attempts });
        }
        attempts += 1;
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-half_width..=half_width)).collect();
        let ok = centers.iter().all(|o| {
            o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= min_dist
        });
        if ok {
            centers.push(c);
        }
    }
    Ok(centers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twitter_counts_for_two_thousand() {
        let c = class_counts(&Preset::TwitterAbusive.proportions(4), 2000);
        assert_eq!(c, vec![480, 94, 296, 1130]);
        assert_eq!(class_counts(&Preset::WikiAttack.proportions(2), 1000), vec![117, 883]);
        let odd = class_counts(&[1.0, 1.0, 1.0], 10);
        assert_eq!(odd.iter().sum::<usize>(), 10);
        assert_eq!(odd, vec![4, 3, 3]);
    }

    #[test]
    fn balanced_two_class() {
        let d = generate_synthetic(&SyntheticSpec {
            counts: class_counts(&Preset::Balanced.proportions(2), 50),
            dim: 3,
            spread: 1.0,
            min_center_distance: None,
            seed: 1,
        })
        .unwrap();
        assert_eq!(d.class_histogram(), vec![25, 25]);
    }

    #[test]
    fn centers_are_separated_and_data_reproducible() {
        let spec = SyntheticSpec { counts: vec![30, 10, 20, 40], dim: 8, spread: 0.5, min_center_distance: None, seed: 4 };
        let a = generate_synthetic(&spec).unwrap();
        assert_eq!(a, generate_synthetic(&spec).unwrap());
        for i in 0..4 {
            for j in (i + 1)..4 {
                let d: f64 = a.centers[i].iter().zip(&a.centers[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                assert!(d >= 3.0);
            }
        }
        assert_ne!(a.features, generate_synthetic(&SyntheticSpec { seed: 5, ..spec }).unwrap().features);
    }

    #[test]
    fn impossible_placement_is_reported() {
        // more centers than the attempt budget can ever place
        let spec = SyntheticSpec { counts: vec![1; 1001], dim: 1, spread: 1.0, min_center_distance: None, seed: 0 };
        assert!(matches!(generate_synthetic(&spec), Err(Error::PlacementFailed { attempts: 1000 })));
    }

    #[test]
    fn rejects_bad_specs() {
        let base = SyntheticSpec { counts: vec![5, 5], dim: 2, spread: 1.0, min_center_distance: None, seed: 0 };
        assert!(generate_synthetic(&SyntheticSpec { counts: vec![5], ..base.clone() }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { counts: vec![5, 0], ..base.clone() }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { spread: 0.0, ..base }).is_err());
        assert!("nope".parse::<Preset>().is_err());
    }
}
