use std::collections::HashSet;

use log::warn;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AcquisitionScore, Strategy};
use crate::{seed, Error, Result, SampleId};

/// Outcome of a draw. `selected` is sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub selected: Vec<SampleId>,
    /// Ids taken uniformly from outside the positive-weight support because
    /// the support was too small.
    pub filled: Vec<SampleId>,
    pub report: Option<String>,
}

/// Draw `min(m, pool)` distinct ids. NDS scores are drawn stratified, `m/K`
/// per cluster with the remainder going to the lowest-numbered clusters;
/// every other strategy samples without replacement proportionally to weight.
pub fn draw(score: &AcquisitionScore, m: usize, seed: u64) -> Result<Draw> {
    if score.is_empty() {
        return Err(Error::Empty("pool"));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("draw size must be >= 1".into()));
    }
    let mut rng = seed::rng(seed);
    if m >= score.len() {
        let mut selected = score.ids.clone();
        selected.sort();
        return Ok(Draw { selected, filled: Vec::new(), report: None });
    }
    let mut taken = if score.strategy == Strategy::Nds && !score.clusters.is_empty() {
        stratified(score, m, &mut rng)
    } else {
        weighted(score, m, &mut rng)
    };
    let mut filled = Vec::new();
    let mut report = None;
    if taken.len() < m {
        let chosen: HashSet<SampleId> = taken.iter().copied().collect();
        let rest: Vec<SampleId> = score.ids.iter().copied().filter(|id| !chosen.contains(id)).collect();
        let need = m - taken.len();
        filled = rest.choose_multiple(&mut rng, need).copied().collect();
        filled.sort();
        let msg = format!(
            "{} of {m} ids drawn from the weighted support; {} filled uniformly from the rest of the pool",
            taken.len(),
            filled.len()
        );
        warn!("{msg}");
        report = Some(msg);
        taken.extend(&filled);
    }
    taken.sort();
    Ok(Draw { selected: taken, filled, report })
}

fn stratified(score: &AcquisitionScore, m: usize, rng: &mut impl Rng) -> Vec<SampleId> {
    let support: HashSet<SampleId> = score.support().into_iter().collect();
    let k = score.clusters.len();
    let mut remaining: Vec<Vec<SampleId>> = score
        .clusters
        .iter()
        .map(|c| c.nondominant.iter().copied().filter(|id| support.contains(id)).collect())
        .collect();
    let mut taken = Vec::with_capacity(m);
    let mut leftover = 0;
    for (c, pool) in remaining.iter_mut().enumerate() {
        let quota = m / k + usize::from(c < m % k);
        pool.shuffle(rng);
        let n = quota.min(pool.len());
        taken.extend(pool.drain(..n));
        leftover += quota - n;
    }
    if leftover > 0 {
        // a cluster smaller than its quota; spend the rest on the other pools
        let mut spare: Vec<SampleId> = remaining.into_iter().flatten().collect();
        spare.sort();
        taken.extend(spare.choose_multiple(rng, leftover).copied());
    }
    taken
}

/// Weighted sampling without replacement: keep the `m` largest `ln(u) / w`.
fn weighted(score: &AcquisitionScore, m: usize, rng: &mut impl Rng) -> Vec<SampleId> {
    let mut keys: Vec<(f64, SampleId)> = score
        .ids
        .iter()
        .zip(&score.phi)
        .filter(|(_, w)| **w > 0.0)
        .map(|(id, w)| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, *id)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keys.truncate(m);
    keys.into_iter().map(|(_, id)| id).collect()
}
