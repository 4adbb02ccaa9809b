use super::{DistanceMatrix, Matrix};
use crate::{Error, Result};

/// Kernel scale for [`to_affinity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// σ = median of the off-diagonal distances.
    Auto,
    Fixed(f64),
    /// Per-point scales: σ_i = distance from i to its `neighbors`-th nearest
    /// neighbor, kernel `exp(-D² / 2σ_iσ_j)`.
    LocalScaling { neighbors: usize },
}

/// Symmetric similarity matrix with entries in [0, 1] and zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    values: Matrix,
    /// Global σ; for local scaling, the median of the per-point scales.
    bandwidth: f64,
}

impl AffinityMatrix {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn restrict(&self, idx: &[usize]) -> AffinityMatrix {
        AffinityMatrix { values: self.values.principal_submatrix(idx), bandwidth: self.bandwidth }
    }
}

/// Median of the strictly-upper-triangular entries; `None` when n < 2.
pub fn median_off_diagonal(d: &DistanceMatrix) -> Option<f64> {
    let n = d.n();
    let mut vals = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            vals.push(d.get(i, j));
        }
    }
    median(&mut vals)
}

pub fn median(vals: &mut [f64]) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    let mid = vals.len() / 2;
    let (_, hi, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *hi;
    if vals.len() % 2 == 1 {
        return Some(hi);
    }
    let lo = vals[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(0.5 * (lo + hi))
}

fn auto_bandwidth(d: &DistanceMatrix) -> Result<f64> {
    let sigma = median_off_diagonal(d).ok_or(Error::DegenerateBandwidth)?;
    if sigma > 0.0 {
        return Ok(sigma);
    }
    // More than half the pairs coincide; fall back to the positive distances.
    let n = d.n();
    let mut positive: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| d.get(i, j))
        .filter(|&v| v > 0.0)
        .collect();
    median(&mut positive).ok_or(Error::DegenerateBandwidth)
}

/// Gaussian kernel `exp(-D² / 2σ²)` off the diagonal, zero on it.
pub fn to_affinity(d: &DistanceMatrix, bandwidth: Bandwidth) -> Result<AffinityMatrix> {
    let sigma = match bandwidth {
        Bandwidth::LocalScaling { neighbors } => return local_scaling(d, neighbors),
        Bandwidth::Auto => auto_bandwidth(d)?,
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {s}")))
        }
    };
    let n = d.n();
    let scale = 1.0 / (2.0 * sigma * sigma);
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = d.get(i, j);
            let a = (-dij * dij * scale).exp();
            values[(i, j)] = a;
            values[(j, i)] = a;
        }
    }
    Ok(AffinityMatrix { values, bandwidth: sigma })
}

fn local_scaling(d: &DistanceMatrix, neighbors: usize) -> Result<AffinityMatrix> {
    let n = d.n();
    if n < 2 || neighbors == 0 {
        return Err(Error::DegenerateBandwidth);
    }
    let global = auto_bandwidth(d)?;
    let rank = neighbors.min(n - 1);
    let mut scales = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| d.get(i, j)));
        row.sort_by(f64::total_cmp);
        let mut s = row[rank - 1];
        if s == 0.0 {
            // duplicates fill the neighborhood; use the first distinct neighbor
            s = row.iter().copied().find(|&v| v > 0.0).unwrap_or(global);
        }
        scales.push(s);
    }
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = d.get(i, j);
            let a = (-dij * dij / (2.0 * scales[i] * scales[j])).exp();
            values[(i, j)] = a;
            values[(j, i)] = a;
        }
    }
    let bandwidth = median(&mut scales).unwrap_or(global);
    Ok(AffinityMatrix { values, bandwidth })
}
