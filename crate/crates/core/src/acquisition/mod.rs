//! Selection strategies: per-sample weights over the pool, then a draw of `m` ids.

mod draw;
mod score;
mod select;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SampleId};

pub use draw::{draw, Draw};
pub use score::{score_min_margin, score_nds, score_nds_plus, score_random, score_var_ratio};
pub use select::{select_batch, select_unlabeled, SelectOptions, Selection, SelectionRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    MinMargin,
    VarRatio,
    Nds,
    NdsPlus,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Random, Strategy::MinMargin, Strategy::VarRatio, Strategy::Nds, Strategy::NdsPlus];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::MinMargin => "minmargin",
            Strategy::VarRatio => "varratio",
            Strategy::Nds => "nds",
            Strategy::NdsPlus => "ndsplus",
        }
    }

    /// Whether scoring needs class probabilities from a trained model.
    pub fn needs_model(self) -> bool {
        matches!(self, Strategy::MinMargin | Strategy::VarRatio | Strategy::NdsPlus)
    }

    /// Whether scoring needs a clustering of the pool.
    pub fn needs_clusters(self) -> bool {
        matches!(self, Strategy::Nds | Strategy::NdsPlus)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy '{s}' (random|minmargin|varratio|nds|ndsplus)")))
    }
}

/// Per-cluster outcome of the non-dominant selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDiagnostics {
    pub members: Vec<SampleId>,
    pub nondominant: Vec<SampleId>,
    pub cutoff_multiplier: f64,
    pub tau: f64,
    pub shortfall: usize,
    pub replicator_iterations: usize,
    pub replicator_converged: bool,
}

/// Sampling weights over the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionScore {
    pub ids: Vec<SampleId>,
    pub phi: Vec<f64>,
    pub strategy: Strategy,
    /// Mixing weight, for NDS+.
    pub alpha: Option<f64>,
    /// Per-cluster pools, for NDS and NDS+.
    pub clusters: Vec<ClusterDiagnostics>,
}

impl AcquisitionScore {
    pub(crate) fn new(ids: Vec<SampleId>, phi: Vec<f64>, strategy: Strategy) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Empty("pool"));
        }
        if ids.len() != phi.len() {
            return Err(Error::DimensionMismatch { expected: ids.len(), got: phi.len() });
        }
        if phi.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
        }
        Ok(AcquisitionScore { ids, phi, strategy, alpha: None, clusters: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn cutoff_multipliers(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.cutoff_multiplier).collect()
    }

    pub fn support(&self) -> Vec<SampleId> {
        self.ids.iter().zip(&self.phi).filter(|(_, w)| **w > 0.0).map(|(id, _)| *id).collect()
    }

    /// Weights scaled to sum to one; uniform when every weight is zero.
    pub fn normalized(&self) -> Vec<f64> {
        let sum: f64 = self.phi.iter().sum();
        if sum > 0.0 {
            self.phi.iter().map(|w| w / sum).collect()
        } else {
            vec![1.0 / self.phi.len() as f64; self.phi.len()]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Decay {
    /// α = 1 − rate·cycle
    #[default]
    Additive,
    /// α = (1 − rate)^cycle
    Multiplicative,
}

impl FromStr for Decay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(Decay::Additive),
            "multiplicative" => Ok(Decay::Multiplicative),
            _ => Err(Error::Config(format!("unknown decay '{s}' (additive|multiplicative)"))),
        }
    }
}

pub const DEFAULT_ALPHA_DECAY: f64 = 0.02;

/// NDS+ mixing weight schedule, starting from 1 at cycle 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingState {
    pub decay_per_cycle: f64,
    pub decay: Decay,
    pub cycle: usize,
}

impl MixingState {
    pub fn new(decay_per_cycle: f64, decay: Decay, cycle: usize) -> Self {
        MixingState { decay_per_cycle, decay, cycle }
    }

    pub fn at_cycle(cycle: usize) -> Self {
        MixingState { decay_per_cycle: DEFAULT_ALPHA_DECAY, decay: Decay::Additive, cycle }
    }

    pub fn alpha(&self) -> f64 {
        let a = match self.decay {
            Decay::Additive => 1.0 - self.decay_per_cycle * self.cycle as f64,
            Decay::Multiplicative => (1.0 - self.decay_per_cycle).powi(self.cycle as i32),
        };
        a.clamp(0.0, 1.0)
    }
}
