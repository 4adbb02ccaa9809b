//! Labeled / unlabeled / test bookkeeping.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result, SampleId};

/// Test fraction of the stratified split.
pub const TEST_FRACTION: f64 = 0.2;

/// Ids and oracle labels of a labeled dataset, split into train and test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: BTreeMap<SampleId, usize>,
    pub test: BTreeMap<SampleId, usize>,
}

/// Per class, `round(0.2·n_c)` ids go to test and the rest to train.
pub fn stratified_split(ids: &[SampleId], labels: &[usize], classes: usize, seed: u64) -> Result<Split> {
    if ids.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: ids.len(), got: labels.len() });
    }
    let mut by_class: Vec<Vec<SampleId>> = vec![Vec::new(); classes];
    for (&id, &c) in ids.iter().zip(labels) {
        if c >= classes {
            return Err(Error::LabelOutOfRange { id, label: c as i64, classes });
        }
        by_class[c].push(id);
    }
    let mut rng = seed::rng(seed);
    let mut split = Split { train: BTreeMap::new(), test: BTreeMap::new() };
    for (c, mut members) in by_class.into_iter().enumerate() {
        members.sort();
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * TEST_FRACTION).round() as usize;
        for (i, id) in members.into_iter().enumerate() {
            if i < n_test {
                split.test.insert(id, c);
            } else {
                split.train.insert(id, c);
            }
        }
    }
    Ok(split)
}

/// Labeled set, unlabeled pool and held-out test set of one AL run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub labeled: BTreeMap<SampleId, usize>,
    pub pool: BTreeSet<SampleId>,
    pub test: BTreeMap<SampleId, usize>,
    pub cycle: usize,
}

impl PoolState {
    /// Seed the labeled set with `initial_size / K` random ids per class from
    /// `train`; the rest of `train` becomes the pool.
    pub fn init_balanced(
        train: &BTreeMap<SampleId, usize>,
        test: BTreeMap<SampleId, usize>,
        classes: usize,
        initial_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if classes == 0 || !initial_size.is_multiple_of(classes) {
            return Err(Error::Config(format!("initial size {initial_size} is not divisible by {classes} classes")));
        }
        let per_class = initial_size / classes;
        let mut by_class: Vec<Vec<SampleId>> = vec![Vec::new(); classes];
        for (&id, &c) in train {
            if c >= classes {
                return Err(Error::LabelOutOfRange { id, label: c as i64, classes });
            }
            by_class[c].push(id);
        }
        let mut rng = seed::rng(seed);
        let mut labeled = BTreeMap::new();
        for (c, members) in by_class.iter().enumerate() {
            if members.len() < per_class {
                return Err(Error::InsufficientClass { class: c, needed: per_class, available: members.len() });
            }
            for id in members.choose_multiple(&mut rng, per_class) {
                labeled.insert(*id, c);
            }
        }
        let pool = train.keys().filter(|id| !labeled.contains_key(id)).copied().collect();
        let state = PoolState { labeled, pool, test, cycle: 0 };
        state.check()?;
        Ok(state)
    }

    /// Move `ids` from the pool to the labeled set with their oracle labels.
    pub fn label(&mut self, ids: &[SampleId], oracle: &HashMap<SampleId, usize>) -> Result<()> {
        for id in ids {
            if !self.pool.contains(id) {
                return Err(Error::UnknownId(*id));
            }
            oracle.get(id).ok_or(Error::UnknownId(*id))?;
        }
        for id in ids {
            self.pool.remove(id);
            self.labeled.insert(*id, oracle[id]);
        }
        Ok(())
    }

    pub fn pool_ids(&self) -> Vec<SampleId> {
        self.pool.iter().copied().collect()
    }

    pub fn labeled_ids(&self) -> Vec<SampleId> {
        self.labeled.keys().copied().collect()
    }

    pub fn labeled_labels(&self) -> Vec<usize> {
        self.labeled.values().copied().collect()
    }

    pub fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes];
        self.labeled.values().for_each(|&c| h[c] += 1);
        h
    }

    /// The three id sets are pairwise disjoint.
    pub fn check(&self) -> Result<()> {
        for id in self.labeled.keys().chain(self.pool.iter()) {
            if self.test.contains_key(id) {
                return Err(Error::DuplicateId(*id));
            }
        }
        if let Some(id) = self.pool.iter().find(|id| self.labeled.contains_key(id)) {
            return Err(Error::DuplicateId(*id));
        }
        Ok(())
    }
}
