use std::collections::{HashMap, HashSet};

use super::{AcquisitionScore, ClusterDiagnostics, MixingState, Strategy};
use crate::classifier::ProbMatrix;
use crate::dominantset::nds_pools;
use crate::numerics::FeatureMatrix;
use crate::spectral::ClusterAssignment;
use crate::{Error, Result, SampleId};

/// Equal weight on every pool id.
pub fn score_random(pool_ids: &[SampleId]) -> Result<AcquisitionScore> {
    AcquisitionScore::new(pool_ids.to_vec(), vec![1.0; pool_ids.len()], Strategy::Random)
}

/// `1 − (p₁ − p₂)` with p₁ ≥ p₂ the two largest class probabilities.
pub fn score_min_margin(probs: &ProbMatrix) -> Result<AcquisitionScore> {
    if probs.classes() < 2 {
        return Err(Error::InvalidParameter("minimum margin needs at least 2 classes".into()));
    }
    let phi = probs
        .rows()
        .map(|r| {
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &p in r {
                if p > first {
                    second = first;
                    first = p;
                } else if p > second {
                    second = p;
                }
            }
            (1.0 - (first - second)).clamp(0.0, 1.0)
        })
        .collect();
    AcquisitionScore::new(probs.ids().to_vec(), phi, Strategy::MinMargin)
}

/// `1 − max_c p(c)`, in [0, 1 − 1/K].
pub fn score_var_ratio(probs: &ProbMatrix) -> Result<AcquisitionScore> {
    let phi = probs
        .rows()
        .map(|r| (1.0 - r.iter().copied().fold(0.0, f64::max)).max(0.0))
        .collect();
    AcquisitionScore::new(probs.ids().to_vec(), phi, Strategy::VarRatio)
}

/// Weight 1 on every member of a cluster's non-dominant pool, 0 elsewhere.
/// Pools are sized for `ceil(m / K)` draws per cluster.
pub fn score_nds(x: &FeatureMatrix, assignment: &ClusterAssignment, m: usize) -> Result<AcquisitionScore> {
    let k = assignment.k();
    if m < k {
        return Err(Error::InvalidParameter(format!("draw size {m} smaller than cluster count {k}")));
    }
    let assigned: HashSet<SampleId> = assignment.ids().iter().copied().collect();
    if assigned.len() != x.n() || x.ids().iter().any(|id| !assigned.contains(id)) {
        return Err(Error::IdMismatch);
    }
    let pools = nds_pools(x, assignment, m.div_ceil(k))?;
    let selected: HashSet<SampleId> = pools.iter().flat_map(|p| p.nondominant_ids.iter().copied()).collect();
    let phi = x.ids().iter().map(|id| if selected.contains(id) { 1.0 } else { 0.0 }).collect();
    let mut score = AcquisitionScore::new(x.ids().to_vec(), phi, Strategy::Nds)?;
    score.clusters = pools
        .into_iter()
        .map(|p| ClusterDiagnostics {
            members: p.members,
            nondominant: p.nondominant_ids,
            cutoff_multiplier: p.cutoff_multiplier,
            tau: p.tau,
            shortfall: p.shortfall,
            replicator_iterations: p.replicator_iterations,
            replicator_converged: p.replicator_converged,
        })
        .collect();
    Ok(score)
}

/// `α·Φ_NDS + (1−α)·Φ_U`, both normalized to sum one over the pool first.
/// The result is ordered like `nds`.
pub fn score_nds_plus(
    nds: &AcquisitionScore,
    uncertainty: &AcquisitionScore,
    mix: &MixingState,
) -> Result<AcquisitionScore> {
    if nds.ids.len() != uncertainty.ids.len() {
        return Err(Error::IdMismatch);
    }
    let position: HashMap<SampleId, usize> = uncertainty.ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let a = nds.normalized();
    let b = uncertainty.normalized();
    let alpha = mix.alpha();
    let mut phi = Vec::with_capacity(a.len());
    for (id, wa) in nds.ids.iter().zip(&a) {
        let j = *position.get(id).ok_or(Error::IdMismatch)?;
        phi.push(alpha * wa + (1.0 - alpha) * b[j]);
    }
    let mut score = AcquisitionScore::new(nds.ids.clone(), phi, Strategy::NdsPlus)?;
    score.alpha = Some(alpha);
    score.clusters = nds.clusters.clone();
    Ok(score)
}
