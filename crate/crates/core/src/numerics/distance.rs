use super::{FeatureMatrix, Matrix};

/// Symmetric n×n matrix of pairwise Euclidean distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Matrix,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Distances restricted to the given row indices.
    pub fn restrict(&self, idx: &[usize]) -> DistanceMatrix {
        DistanceMatrix { values: self.values.principal_submatrix(idx) }
    }

    /// Build from an arbitrary square matrix, checking the invariants
    /// (symmetric within 1e-9, zero diagonal, finite and non-negative).
    pub fn from_matrix(values: Matrix) -> crate::Result<Self> {
        use crate::Error;
        let n = values.rows();
        if values.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.cols() });
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "distance ({i},{j}) = {v} is not a finite non-negative value"
                    )));
                }
            }
            if values[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!("distance diagonal ({i},{i}) is not zero")));
            }
        }
        if let Some((i, j, diff)) = values.max_asymmetry() {
            if diff > 1e-9 {
                return Err(Error::NotSymmetric { i, j, diff });
            }
        }
        Ok(Self { values })
    }
}

/// Euclidean distance between every pair of rows.
///
/// Each entry is accumulated in column order, so the result does not depend
/// on how the work is scheduled. Finiteness is guaranteed by
/// [`FeatureMatrix`] construction.
pub fn pairwise_distances(x: &FeatureMatrix) -> DistanceMatrix {
    let n = x.n();
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        let a = x.row(i);
        for j in (i + 1)..n {
            let d = euclidean(a, x.row(j));
            values[(i, j)] = d;
            values[(j, i)] = d;
        }
    }
    DistanceMatrix { values }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SampleId;
    use proptest::prelude::*;
    use rand::Rng;

    fn features(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows((0..rows.len() as u64).map(SampleId).collect(), rows).unwrap()
    }

    #[test]
    fn three_four_five() {
        let d = pairwise_distances(&features(&[vec![0.0, 0.0], vec![3.0, 4.0]]));
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn identical_rows_have_zero_distance() {
        let d = pairwise_distances(&features(&[vec![1.5, -2.0], vec![1.5, -2.0]]));
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn matches_naive_double_loop() {
        let mut rng = crate::seed::rng(7);
        let rows: Vec<Vec<f64>> =
            (0..10).map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let d = pairwise_distances(&features(&rows));
        for i in 0..10 {
            for j in 0..10 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += (rows[i][k] - rows[j][k]).powi(2);
                }
                assert!((d.get(i, j) - s.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn from_matrix_rejects_asymmetry() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.1, 0.0]]).unwrap();
        assert!(DistanceMatrix::from_matrix(m).is_err());
    }

    proptest! {
        #[test]
        fn triangle_inequality(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 3..8)) {
            let d = pairwise_distances(&features(&rows));
            let n = rows.len();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((d.get(i, j) - d.get(j, i)).abs() <= 1e-9);
                    for k in 0..n {
                        prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k) + 1e-9);
                    }
                }
            }
        }
    }
}
