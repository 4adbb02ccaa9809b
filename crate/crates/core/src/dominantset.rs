//! Dominant-set extraction per cluster.
//!
//! Each cluster becomes a complete edge-weighted graph with Gaussian
//! affinities. Replicator dynamics
//!
//! ```text
//! z_i ← z_i · (A z)_i / (zᵀ A z)
//! ```
//!
//! started at the barycenter climbs `zᵀ A z` on the simplex; `z_i` is the
//! participation of sample `i` in the cluster's most cohesive subset. Samples
//! with `z_i ≤ τ`, where `τ` is the median of the positive participations,
//! form the non-dominant set. When that set is too small to draw from, `τ` is
//! multiplied by 10 until it is large enough.

use serde::{Deserialize, Serialize};

use crate::numerics::{dot, pairwise_distances, to_affinity, Bandwidth, FeatureMatrix, Matrix};
use crate::spectral::ClusterAssignment;
use crate::{Error, Result, SampleId};

/// Participation values at or below this count as zero.
pub const POSITIVE_EPS: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const ESCALATION_FACTOR: f64 = 10.0;

/// Complete graph on the members of one cluster.
#[derive(Debug, Clone)]
pub struct ClusterGraph {
    ids: Vec<SampleId>,
    weights: Matrix,
}

impl ClusterGraph {
    /// Validates: square, matching ids, zero diagonal, symmetric within 1e-9,
    /// entries in [0, 1].
    pub fn new(ids: Vec<SampleId>, weights: Matrix) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Empty("cluster graph"));
        }
        if weights.rows() != n || weights.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.rows() });
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidParameter(format!("weight ({i},{j}) = {w} outside [0,1]")));
                }
            }
        }
        if let Some((i, j, diff)) = weights.max_asymmetry() {
            if diff > 1e-9 {
                return Err(Error::NotSymmetric { i, j, diff });
            }
        }
        Ok(Self { ids, weights })
    }

    /// Gaussian affinities among the rows of `x` with the median bandwidth.
    /// A cluster whose points all coincide gets unit affinities.
    pub fn from_features(x: &FeatureMatrix) -> Result<Self> {
        let n = x.n();
        let weights = if n == 1 {
            Matrix::zeros(1, 1)
        } else {
            match to_affinity(&pairwise_distances(x), Bandwidth::Auto) {
                Ok(a) => a.into_values(),
                Err(Error::DegenerateBandwidth) => {
                    let mut w = Matrix::from_vec(n, n, vec![1.0; n * n])?;
                    for i in 0..n {
                        w[(i, i)] = 0.0;
                    }
                    w
                }
                Err(e) => return Err(e),
            }
        };
        Self::new(x.ids().to_vec(), weights)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }
}

/// Simplex point produced by [`replicator_dynamics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationVector {
    pub ids: Vec<SampleId>,
    pub z: Vec<f64>,
    /// Final zᵀ A z.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// zᵀ A z was zero at the barycenter; z is left uniform.
    pub degenerate: bool,
}

impl ParticipationVector {
    /// Wrap an externally computed simplex vector.
    pub fn from_values(ids: Vec<SampleId>, z: Vec<f64>) -> Result<Self> {
        if ids.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: ids.len(), got: z.len() });
        }
        if z.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("participation values must be finite and >= 0".into()));
        }
        let sum: f64 = z.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("participation sums to {sum}, not 1")));
        }
        Ok(Self { ids, z, objective: f64::NAN, iterations: 0, converged: true, degenerate: false })
    }
}

/// Strict upper triangle of a symmetric zero-diagonal matrix, row by row.
/// Each stored weight is read once per product instead of twice.
struct UpperTriangle {
    n: usize,
    data: Vec<f64>,
}

impl UpperTriangle {
    fn new(a: &Matrix) -> Self {
        let n = a.rows();
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            data.extend_from_slice(&a.row(i)[i + 1..]);
        }
        UpperTriangle { n, data }
    }

    /// Writes A·z into `az` and returns zᵀ A z.
    fn quadratic_form(&self, z: &[f64], az: &mut [f64]) -> f64 {
        az.iter_mut().for_each(|v| *v = 0.0);
        let mut offset = 0;
        for i in 0..self.n {
            let len = self.n - i - 1;
            let row = &self.data[offset..offset + len];
            offset += len;
            let (head, tail) = az.split_at_mut(i + 1);
            head[i] += dot(row, &z[i + 1..]);
            let zi = z[i];
            for (out, w) in tail.iter_mut().zip(row) {
                *out += zi * w;
            }
        }
        dot(z, az)
    }
}

/// Replicator dynamics from the barycenter until the max-norm step falls
/// below `tol` or `max_iter` updates have run.
pub fn replicator_dynamics(g: &ClusterGraph, tol: f64, max_iter: usize) -> ParticipationVector {
    replicator_dynamics_observed(g, tol, max_iter, |_, _| {})
}

/// As [`replicator_dynamics`], calling `observe(z, objective)` on the start
/// point and after every update.
pub fn replicator_dynamics_observed(
    g: &ClusterGraph,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&[f64], f64),
) -> ParticipationVector {
    let n = g.len();
    let ids = g.ids.clone();
    if n == 1 {
        observe(&[1.0], 0.0);
        return ParticipationVector {
            ids,
            z: vec![1.0],
            objective: 0.0,
            iterations: 0,
            converged: true,
            degenerate: false,
        };
    }
    let a = UpperTriangle::new(&g.weights);
    let mut z = vec![1.0 / n as f64; n];
    let mut az = vec![0.0; n];
    let mut objective = a.quadratic_form(&z, &mut az);
    observe(&z, objective);
    if objective <= 0.0 {
        return ParticipationVector { ids, z, objective, iterations: 0, converged: true, degenerate: true };
    }

    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut sum = 0.0;
        for i in 0..n {
            next[i] = z[i] * az[i] / objective;
            sum += next[i];
        }
        let mut step: f64 = 0.0;
        for i in 0..n {
            next[i] /= sum;
            step = step.max((next[i] - z[i]).abs());
        }
        std::mem::swap(&mut z, &mut next);
        objective = a.quadratic_form(&z, &mut az);
        observe(&z, objective);
        if step < tol {
            converged = true;
            break;
        }
    }
    ParticipationVector { ids, z, objective, iterations, converged, degenerate: false }
}

/// Split of one cluster at the cutoff `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantPartition {
    pub tau: f64,
    pub dominant_ids: Vec<SampleId>,
    pub nondominant_ids: Vec<SampleId>,
    pub cutoff_multiplier: f64,
}

/// τ = multiplier × median{z_i : z_i > ε}; `z_i ≤ τ` is non-dominant.
pub fn partition(p: &ParticipationVector, cutoff_multiplier: f64) -> Result<DominantPartition> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(cutoff_multiplier >= 1.0) {
        return Err(Error::InvalidParameter(format!("cutoff multiplier {cutoff_multiplier} < 1")));
    }
    let mut positive: Vec<f64> = p.z.iter().copied().filter(|&v| v > POSITIVE_EPS).collect();
    let median =
        crate::numerics::median(&mut positive).ok_or(Error::DegenerateParticipation)?;
    let tau = cutoff_multiplier * median;
    let mut dominant_ids = Vec::new();
    let mut nondominant_ids = Vec::new();
    for (id, &v) in p.ids.iter().zip(&p.z) {
        if v <= tau {
            nondominant_ids.push(*id);
        } else {
            dominant_ids.push(*id);
        }
    }
    Ok(DominantPartition { tau, dominant_ids, nondominant_ids, cutoff_multiplier })
}

/// Partition at multiplier 1, then ×10 while fewer than `required` samples
/// are non-dominant (capped at the cluster size). Returns the final split and
/// every split visited.
pub fn escalate(
    p: &ParticipationVector,
    required: usize,
) -> Result<(DominantPartition, Vec<DominantPartition>)> {
    let target = required.min(p.z.len());
    let mut multiplier = 1.0;
    let mut trace = Vec::new();
    loop {
        let split = partition(p, multiplier)?;
        trace.push(split.clone());
        if split.nondominant_ids.len() >= target {
            return Ok((split, trace));
        }
        multiplier *= ESCALATION_FACTOR;
    }
}

/// Non-dominant pool of one cluster, ready for sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPool {
    pub cluster: usize,
    pub members: Vec<SampleId>,
    pub nondominant_ids: Vec<SampleId>,
    pub dominant_ids: Vec<SampleId>,
    pub cutoff_multiplier: f64,
    pub tau: f64,
    /// `required − |cluster|` when the whole cluster is too small.
    pub shortfall: usize,
    pub replicator_iterations: usize,
    pub replicator_converged: bool,
    pub participation: Vec<f64>,
}

/// Per-cluster non-dominant pools for drawing `required_per_cluster` samples
/// from each cluster of `assignment`. `x` must contain every assigned id.
pub fn nds_pools(
    x: &FeatureMatrix,
    assignment: &ClusterAssignment,
    required_per_cluster: usize,
) -> Result<Vec<ClusterPool>> {
    if required_per_cluster == 0 {
        return Err(Error::InvalidParameter("required_per_cluster must be >= 1".into()));
    }
    use rayon::prelude::*;
    assignment
        .members()
        .par_iter()
        .enumerate()
        .map(|(cluster, members)| {
            let graph = ClusterGraph::from_features(&x.subset(members)?)?;
            let z = replicator_dynamics(&graph, DEFAULT_TOL, DEFAULT_MAX_ITER);
            let (split, _) = escalate(&z, required_per_cluster)?;
            Ok(ClusterPool {
                cluster,
                members: members.clone(),
                nondominant_ids: split.nondominant_ids,
                dominant_ids: split.dominant_ids,
                cutoff_multiplier: split.cutoff_multiplier,
                tau: split.tau,
                shortfall: required_per_cluster.saturating_sub(members.len()),
                replicator_iterations: z.iterations,
                replicator_converged: z.converged,
                participation: z.z,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ids(n: usize) -> Vec<SampleId> {
        (0..n as u64).map(SampleId).collect()
    }

    fn graph(rows: &[Vec<f64>]) -> ClusterGraph {
        ClusterGraph::new(ids(rows.len()), Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn random_graph(n: usize, rng: &mut impl Rng) -> ClusterGraph {
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random_range(0.0..1.0);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        ClusterGraph::new(ids(n), w).unwrap()
    }

    /// Exhaustive search over the simplex grid {z : z_i ∈ step·ℕ, Σz = 1}.
    fn grid_max(w: &Matrix, steps: usize) -> f64 {
        fn rec(w: &Matrix, z: &mut Vec<f64>, remaining: usize, steps: usize, best: &mut f64) {
            let n = w.rows();
            let i = z.len();
            if i == n - 1 {
                z.push(remaining as f64 / steps as f64);
                let mut v = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        v += z[p] * w[(p, q)] * z[q];
                    }
                }
                *best = best.max(v);
                z.pop();
                return;
            }
            for take in 0..=remaining {
                z.push(take as f64 / steps as f64);
                rec(w, z, remaining - take, steps, best);
                z.pop();
            }
        }
        let mut best = f64::NEG_INFINITY;
        rec(w, &mut Vec::new(), steps, steps, &mut best);
        best
    }

    #[test]
    fn complete_unit_graph_is_uniform() {
        let g = graph(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]);
        let p = replicator_dynamics(&g, DEFAULT_TOL, DEFAULT_MAX_ITER);
        for v in &p.z {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_edge_splits_mass() {
        let g = graph(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]);
        let p = replicator_dynamics(&g, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!((p.z[0] - 0.5).abs() < 1e-6);
        assert!((p.z[1] - 0.5).abs() < 1e-6);
        assert!(p.z[2] < 1e-6);
        assert!((p.objective - 0.5).abs() < 1e-6);
    }

    #[test]
    fn singleton_and_zero_graph() {
        let one = ClusterGraph::new(vec![SampleId(9)], Matrix::zeros(1, 1)).unwrap();
        let p = replicator_dynamics(&one, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert_eq!(p.z, vec![1.0]);
        assert_eq!(p.iterations, 0);

        let zero = ClusterGraph::new(ids(3), Matrix::zeros(3, 3)).unwrap();
        let p = replicator_dynamics(&zero, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(p.degenerate);
        assert_eq!(p.z, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn graph_validation() {
        assert!(ClusterGraph::new(ids(2), Matrix::identity(2)).is_err());
        let asym = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.4, 0.0]]).unwrap();
        assert!(ClusterGraph::new(ids(2), asym).is_err());
        let big = Matrix::from_rows(&[vec![0.0, 1.5], vec![1.5, 0.0]]).unwrap();
        assert!(ClusterGraph::new(ids(2), big).is_err());
    }

    #[test]
    fn converges_to_a_kkt_point_of_the_quadratic_program() {
        // The start is the barycenter, so the limit is a local maximizer; the
        // first-order conditions must hold there and it can only fall short of
        // the grid maximum, never exceed it by more than the grid resolution.
        let mut rng = crate::seed::rng(2024);
        for _ in 0..40 {
            let g = random_graph(6, &mut rng);
            let p = replicator_dynamics(&g, 1e-12, 200_000);
            let w = g.weights();
            for i in 0..6 {
                let azi: f64 = (0..6).map(|j| w[(i, j)] * p.z[j]).sum();
                assert!(azi <= p.objective + 1e-4, "payoff {azi} above mean {}", p.objective);
                if p.z[i] > 1e-3 {
                    assert!((azi - p.objective).abs() < 1e-4);
                }
            }
            assert!(p.objective <= grid_max(w, 20) + 5e-3);
        }
    }

    #[test]
    fn reaches_the_heaviest_clique() {
        // unit triangle {0,1,2} plus weak links to 3 and 4: maximum 2/3 at the triangle
        let mut rows = vec![vec![0.0; 5]; 5];
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    rows[i][j] = 1.0;
                }
            }
            for j in 3..5 {
                rows[i][j] = 0.1;
                rows[j][i] = 0.1;
            }
        }
        rows[3][4] = 0.2;
        rows[4][3] = 0.2;
        let g = graph(&rows);
        let p = replicator_dynamics(&g, 1e-12, 100_000);
        assert!((p.objective - 2.0 / 3.0).abs() < 1e-6);
        assert!((p.objective - grid_max(g.weights(), 30)).abs() < 1e-3);
        assert!(p.z[3] < 1e-6 && p.z[4] < 1e-6);
    }

    #[test]
    fn iterates_stay_on_simplex_and_climb() {
        let mut rng = crate::seed::rng(5);
        for _ in 0..50 {
            let n = rng.random_range(2..20);
            let g = random_graph(n, &mut rng);
            let mut last = f64::NEG_INFINITY;
            replicator_dynamics_observed(&g, DEFAULT_TOL, DEFAULT_MAX_ITER, |z, obj| {
                assert!(z.iter().all(|&v| v >= 0.0));
                assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(obj >= last - 1e-10);
                last = obj;
            });
        }
    }

    #[test]
    fn split_is_scale_invariant() {
        let mut rng = crate::seed::rng(77);
        for _ in 0..20 {
            let g = random_graph(9, &mut rng);
            let mut scaled = g.weights().clone();
            scaled.as_mut_slice().iter_mut().for_each(|v| *v *= 0.37);
            let h = ClusterGraph::new(g.ids().to_vec(), scaled).unwrap();
            let a = partition(&replicator_dynamics(&g, 1e-12, 5000), 1.0).unwrap();
            let b = partition(&replicator_dynamics(&h, 1e-12, 5000), 1.0).unwrap();
            assert_eq!(a.dominant_ids, b.dominant_ids);
        }
    }

    #[test]
    fn median_split() {
        let p = ParticipationVector::from_values(ids(6), vec![0.4, 0.3, 0.2, 0.1, 0.0, 0.0]).unwrap();
        let s = partition(&p, 1.0).unwrap();
        assert!((s.tau - 0.25).abs() < 1e-15);
        assert_eq!(s.dominant_ids, ids(2));
        assert_eq!(s.nondominant_ids, ids(6)[2..].to_vec());

        let s = partition(&p, 10.0).unwrap();
        assert!((s.tau - 2.5).abs() < 1e-12);
        assert!(s.dominant_ids.is_empty());
        assert_eq!(s.nondominant_ids.len(), 6);
    }

    #[test]
    fn singleton_is_nondominant() {
        let p = ParticipationVector::from_values(vec![SampleId(4)], vec![1.0]).unwrap();
        let s = partition(&p, 1.0).unwrap();
        assert_eq!(s.tau, 1.0);
        assert_eq!(s.nondominant_ids, vec![SampleId(4)]);
    }

    #[test]
    fn all_zero_participation_is_rejected() {
        let p = ParticipationVector { ids: ids(2), z: vec![0.0, 0.0], objective: 0.0, iterations: 0, converged: true, degenerate: true };
        assert!(matches!(partition(&p, 1.0), Err(Error::DegenerateParticipation)));
        assert!(partition(&ParticipationVector::from_values(ids(1), vec![1.0]).unwrap(), 0.5).is_err());
    }

    #[test]
    fn no_escalation_when_median_split_suffices() {
        let p = ParticipationVector::from_values(ids(6), vec![0.4, 0.3, 0.2, 0.1, 0.0, 0.0]).unwrap();
        let (s, trace) = escalate(&p, 3).unwrap();
        assert_eq!(s.cutoff_multiplier, 1.0);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn escalation_trace_on_geometric_participation() {
        let z = [0.9, 0.09, 0.009, 9e-4, 9e-5, 9e-6, 9e-7, 1e-7];
        let total: f64 = z.iter().sum();
        let z: Vec<f64> = z.iter().map(|v| v / total).collect();
        let p = ParticipationVector::from_values(ids(8), z).unwrap();
        let (last, trace) = escalate(&p, 7).unwrap();
        let counts: Vec<usize> = trace.iter().map(|s| s.nondominant_ids.len()).collect();
        assert_eq!(counts, vec![4, 5, 6, 7]);
        assert_eq!(last.cutoff_multiplier, 1000.0);
    }

    #[test]
    fn small_cluster_reports_shortfall() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let x = FeatureMatrix::from_rows(ids(3), &rows).unwrap();
        let a = ClusterAssignment::from_labels(x.ids(), &[0, 0, 0]).unwrap();
        let pools = nds_pools(&x, &a, 5).unwrap();
        assert_eq!(pools[0].nondominant_ids.len(), 3);
        assert_eq!(pools[0].shortfall, 2);
    }

    #[test]
    fn central_points_dominate() {
        // a tight core plus two stragglers
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![-0.1, 0.0],
            vec![0.0, -0.1],
            vec![2.0, 2.0],
            vec![-2.0, 1.5],
        ];
        let x = FeatureMatrix::from_rows(ids(7), &rows).unwrap();
        let a = ClusterAssignment::from_labels(x.ids(), &[0; 7]).unwrap();
        let pools = nds_pools(&x, &a, 1).unwrap();
        assert!(pools[0].nondominant_ids.contains(&SampleId(5)));
        assert!(pools[0].nondominant_ids.contains(&SampleId(6)));
        assert!(pools[0].dominant_ids.iter().all(|id| id.0 < 5));
    }
}
