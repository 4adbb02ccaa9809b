use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{draw, score_min_margin, score_nds, score_nds_plus, score_random, score_var_ratio};
use super::{AcquisitionScore, MixingState, Strategy};
use crate::classifier::{mc_predict, predict_proba, train, ClassifierParams, TrainConfig, DEFAULT_MC_PASSES};
use crate::numerics::FeatureMatrix;
use crate::seed::{self, purpose};
use crate::spectral::{spectral_cluster, ClusterAssignment};
use crate::{Error, Result, SampleId};

/// Everything one selection step depends on.
#[derive(Debug, Clone, Copy)]
pub struct SelectionRequest<'a> {
    pub strategy: Strategy,
    /// Features of the unlabeled pool.
    pub pool: &'a FeatureMatrix,
    /// Required by minmargin, varratio and ndsplus.
    pub model: Option<&'a ClassifierParams>,
    /// A clustering covering the pool, reused across cycles; when absent the
    /// pool is clustered afresh.
    pub assignment: Option<&'a ClusterAssignment>,
    pub clusters: usize,
    pub draw_size: usize,
    pub mc_passes: usize,
    pub mixing: MixingState,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub selected: Vec<SampleId>,
    pub filled: Vec<SampleId>,
    pub report: Option<String>,
    pub score: AcquisitionScore,
}

/// Score the pool with the requested strategy and draw a batch. The CLI,
/// the simulator and the annotation service all select through here.
pub fn select_batch(req: &SelectionRequest<'_>) -> Result<Selection> {
    let pool = req.pool;
    if pool.n() == 0 {
        return Err(Error::Empty("pool"));
    }
    let score = if req.draw_size >= pool.n() {
        // the whole pool goes regardless of weights
        let mut s = AcquisitionScore::new(pool.ids().to_vec(), vec![1.0; pool.n()], req.strategy)?;
        if req.strategy == Strategy::NdsPlus {
            s.alpha = Some(req.mixing.alpha());
        }
        s
    } else {
        score(req)?
    };
    let d = draw(&score, req.draw_size, seed::derive(req.seed, purpose::DRAW))?;
    Ok(Selection { selected: d.selected, filled: d.filled, report: d.report, score })
}

/// Settings for [`select_unlabeled`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub strategy: Strategy,
    pub draw_size: usize,
    pub mc_passes: usize,
    pub mixing: MixingState,
    /// Model settings when one has to be trained; `classes` doubles as the
    /// cluster count and the seed is replaced by one derived from the
    /// selection seed.
    pub train: TrainConfig,
}

impl SelectOptions {
    /// Default model and mixing settings at cycle 0.
    pub fn new(strategy: Strategy, classes: usize, draw_size: usize) -> Self {
        SelectOptions {
            strategy,
            draw_size,
            mc_passes: DEFAULT_MC_PASSES,
            mixing: MixingState::at_cycle(0),
            train: TrainConfig::for_classes(classes, 0),
        }
    }

    /// The settings used to train the model for a selection with `seed`.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed: seed::derive(seed, purpose::TRAIN), ..self.train.clone() }
    }
}

/// Select from the samples of `features` that are neither labeled nor
/// excluded. Model-based strategies use `model`, or else a fresh model
/// trained on the labeled samples with seed `derive(seed, TRAIN)`, which is
/// returned alongside.
pub fn select_unlabeled(
    features: &FeatureMatrix,
    labeled: &BTreeMap<SampleId, usize>,
    exclude: &BTreeSet<SampleId>,
    options: &SelectOptions,
    model: Option<&ClassifierParams>,
    seed: u64,
) -> Result<(Selection, Option<ClassifierParams>)> {
    let pool_ids: Vec<SampleId> =
        features.ids().iter().copied().filter(|id| !labeled.contains_key(id) && !exclude.contains(id)).collect();
    let pool = features.subset(&pool_ids)?;
    let trained = match (model, options.strategy.needs_model()) {
        (None, true) => {
            let ids: Vec<SampleId> = labeled.keys().copied().collect();
            if ids.is_empty() {
                return Err(Error::Config(format!("strategy {} needs labeled samples to train on", options.strategy)));
            }
            let y: Vec<usize> = labeled.values().copied().collect();
            Some(train(&features.subset(&ids)?, &y, &options.train_config(seed))?)
        }
        _ => None,
    };
    let selection = select_batch(&SelectionRequest {
        strategy: options.strategy,
        pool: &pool,
        model: model.or(trained.as_ref()),
        assignment: None,
        clusters: options.train.classes,
        draw_size: options.draw_size,
        mc_passes: options.mc_passes,
        mixing: options.mixing,
        seed,
    })?;
    Ok((selection, trained))
}

fn score(req: &SelectionRequest<'_>) -> Result<AcquisitionScore> {
    let model = || {
        req.model.ok_or_else(|| Error::Config(format!("strategy {} needs a trained model", req.strategy)))
    };
    match req.strategy {
        Strategy::Random => score_random(req.pool.ids()),
        Strategy::MinMargin => score_min_margin(&predict_proba(model()?, req.pool, false, 0)?),
        Strategy::VarRatio => {
            let probs = mc_predict(model()?, req.pool, req.mc_passes, seed::derive(req.seed, purpose::MC_DROPOUT))?;
            score_var_ratio(&probs)
        }
        Strategy::Nds => nds(req),
        Strategy::NdsPlus => {
            let uncertainty = score_min_margin(&predict_proba(model()?, req.pool, false, 0)?)?;
            score_nds_plus(&nds(req)?, &uncertainty, &req.mixing)
        }
    }
}

fn nds(req: &SelectionRequest<'_>) -> Result<AcquisitionScore> {
    let assignment = match req.assignment {
        Some(a) => a.restrict(req.pool.ids())?,
        None => spectral_cluster(req.pool, req.clusters, seed::derive(req.seed, purpose::CLUSTER))?,
    };
    score_nds(req.pool, &assignment, req.draw_size)
}
