//! Normalized spectral clustering (Ng–Jordan–Weiss).
//!
//! distances → locally scaled Gaussian affinity → L = I − D^{-1/2} A D^{-1/2}
//! → eigenvectors of the K smallest eigenvalues → unit-length rows → k-means.
//!
//! Rows are processed in ascending id order and clusters are numbered by the
//! smallest id they contain, so the assignment of an id does not depend on the
//! input row order.

use std::collections::HashMap;

use log::warn;

use crate::numerics::{
    kmeans, leading_eigenpairs, pairwise_distances, sym_eigen, to_affinity, AffinityMatrix,
    Bandwidth, FeatureMatrix, Matrix,
};
use crate::{Error, Result, SampleId};

/// Above this size the dense Jacobi solve is replaced by subspace iteration
/// for the K leading eigenvectors of the normalized affinity.
pub const DENSE_EIGEN_MAX: usize = 256;
const SUBSPACE_TOL: f64 = 1e-8;
const SUBSPACE_MAX_ITER: usize = 3000;
/// Neighbor rank defining each point's kernel scale.
pub const LOCAL_SCALE_NEIGHBORS: usize = 7;

/// Partition of sample ids into `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    k: usize,
    ids: Vec<SampleId>,
    labels: Vec<usize>,
    members: Vec<Vec<SampleId>>,
}

impl ClusterAssignment {
    /// Build from per-sample labels. Clusters are renumbered by smallest
    /// member id; empty label values are dropped.
    pub fn from_labels(ids: &[SampleId], labels: &[usize]) -> Result<Self> {
        if ids.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: ids.len(), got: labels.len() });
        }
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by_key(|&i| ids[i]);
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut members: Vec<Vec<SampleId>> = Vec::new();
        for &i in &order {
            let next = remap.len();
            let c = *remap.entry(labels[i]).or_insert(next);
            if c == members.len() {
                members.push(Vec::new());
            }
            members[c].push(ids[i]);
        }
        let labels = labels.iter().map(|l| remap[l]).collect();
        Ok(Self { k: members.len(), ids: ids.to_vec(), labels, members })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Ids in the order the assignment was built from.
    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    /// Cluster index per entry of [`ids`](Self::ids).
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Members of each cluster, ascending by id.
    pub fn members(&self) -> &[Vec<SampleId>] {
        &self.members
    }

    pub fn label_of(&self, id: SampleId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id).map(|i| self.labels[i])
    }

    /// Keep only the given ids; clusters that become empty disappear.
    pub fn restrict(&self, keep: &[SampleId]) -> Result<Self> {
        let pos: HashMap<SampleId, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (*id, self.labels[i])).collect();
        let labels =
            keep.iter().map(|id| pos.get(id).copied().ok_or(Error::UnknownId(*id))).collect::<Result<Vec<_>>>()?;
        Self::from_labels(keep, &labels)
    }
}

/// Row-normalized affinity N = D^{-1/2} A D^{-1/2} and the degree vector.
/// Rows of isolated vertices (zero degree) are left at zero, which makes the
/// corresponding Laplacian row the identity.
pub fn normalized_affinity(a: &AffinityMatrix) -> (Matrix, Vec<f64>) {
    let n = a.n();
    let degrees: Vec<f64> = (0..n).map(|i| a.values().row(i).iter().sum()).collect();
    let inv_sqrt: Vec<f64> =
        degrees.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = inv_sqrt[i] * a.get(i, j) * inv_sqrt[j];
        }
    }
    (m, degrees)
}

/// Symmetric normalized Laplacian L = I − D^{-1/2} A D^{-1/2}.
pub fn normalized_laplacian(a: &AffinityMatrix) -> Matrix {
    let (mut m, _) = normalized_affinity(a);
    let n = a.n();
    for v in m.as_mut_slice() {
        *v = -*v;
    }
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    m
}

/// Cluster `x` into `k` groups. Deterministic given `seed`.
pub fn spectral_cluster(x: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = x.n();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("spectral clustering needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::TooMany { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| x.ids()[i]);
    let sorted_ids: Vec<SampleId> = order.iter().map(|&i| x.ids()[i]).collect();
    let sorted = FeatureMatrix::new(sorted_ids.clone(), x.values().select_rows(&order))?;

    let affinity = to_affinity(
        &pairwise_distances(&sorted),
        Bandwidth::LocalScaling { neighbors: LOCAL_SCALE_NEIGHBORS },
    )?;
    let mut embedding = spectral_embedding(&affinity, k, seed)?;
    for i in 0..n {
        let row = embedding.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let km = kmeans(&embedding, k, crate::seed::derive(seed, 1))?;

    // back to input order
    let mut labels = vec![0; n];
    for (sorted_pos, &orig) in order.iter().enumerate() {
        labels[orig] = km.labels[sorted_pos];
    }
    ClusterAssignment::from_labels(x.ids(), &labels)
}

/// n×k matrix whose columns span the eigenvectors of the k smallest
/// Laplacian eigenvalues.
fn spectral_embedding(a: &AffinityMatrix, k: usize, seed: u64) -> Result<Matrix> {
    let n = a.n();
    if n <= DENSE_EIGEN_MAX {
        return Ok(sym_eigen(&normalized_laplacian(a), k)?.vectors);
    }
    // Smallest eigenvalues of L are the largest of N. N's spectrum is bounded
    // below by −max(1/degree) for a Gaussian kernel with zeroed diagonal, so
    // that shift makes N + shift·I positive semi-definite.
    let (m, degrees) = normalized_affinity(a);
    let min_degree = degrees.iter().copied().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
    let shift = if min_degree.is_finite() { (1.0 / min_degree).min(1.0) } else { 1.0 };
    let eig = leading_eigenpairs(&m, k, shift, seed, SUBSPACE_TOL, SUBSPACE_MAX_ITER)?;
    if !eig.converged {
        warn!(
            "spectral embedding: subspace iteration stopped after {} iterations (residual {:e})",
            eig.iterations, eig.residual
        );
    }
    Ok(eig.vectors)
}
