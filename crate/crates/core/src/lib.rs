//! Pool-based active learning by sampling the non-dominant members of local
//! clusters in an embedding space.
//!
//! The selection pipeline for one cycle is:
//!
//! ```text
//! pool features ──► spectral clustering (K clusters)
//!               ──► per cluster: affinity graph ──► replicator dynamics ──► z
//!               ──► τ = median(z[z > 0]), escalated ×10 while the pool is too small
//!               ──► non-dominant members (z ≤ τ) ──► stratified draw of m/K per cluster
//! ```
//!
//! `NDS+` blends those indicator weights with a minimum-margin uncertainty
//! score, shifting mass from the former to the latter as cycles progress.
//!
//! Modules:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`numerics`] | distances, Gaussian affinities, Jacobi eigensolver, k-means |
//! | [`spectral`] | normalized spectral clustering |
//! | [`dominantset`] | replicator dynamics, median cutoff, adaptive escalation |
//! | [`classifier`] | small dropout MLP used as the model under test |
//! | [`acquisition`] | Random, MinMargin, VarRatio, NDS, NDS+ and batch drawing |
//! | [`harness`] | synthetic data, pool bookkeeping, the AL cycle loop, metrics |
//! | [`iostore`] | embedding/label/config/model file formats |

pub mod acquisition;
pub mod classifier;
pub mod dominantset;
pub mod harness;
pub mod iostore;
pub mod numerics;
pub mod seed;
pub mod spectral;

mod error;
mod id;

pub use error::{Error, Result};
pub use id::SampleId;
