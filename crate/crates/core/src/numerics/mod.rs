//! Dense numerical kernels shared by the selection logic.

mod affinity;
mod distance;
mod eigen;
mod kmeans;
mod matrix;

pub use affinity::{median, median_off_diagonal, to_affinity, AffinityMatrix, Bandwidth};
pub use distance::{pairwise_distances, DistanceMatrix};
pub use eigen::{leading_eigenpairs, sym_eigen, Eigen, JACOBI_MAX_SWEEPS, JACOBI_TOL};
pub use kmeans::{kmeans, kmeans_objective, KMeans, KMEANS_MAX_ITER};
pub use matrix::{dot, FeatureMatrix, Matrix};
