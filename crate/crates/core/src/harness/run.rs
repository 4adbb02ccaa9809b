//! The select → label → retrain → evaluate loop.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ALConfig;
use super::metrics::{f1, per_class_f1};
use super::pool::{stratified_split, PoolState, Split};
use super::synthetic::Dataset;
use crate::acquisition::{select_batch, SelectionRequest, Strategy};
use crate::classifier::{predict, train};
use crate::seed::{derive, purpose};
use crate::spectral::{spectral_cluster, ClusterAssignment};
use crate::{Error, Result, SampleId};

/// One evaluation-and-selection step of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub strategy: Strategy,
    pub repetition: usize,
    pub cycle: usize,
    /// Labeled-set size the model of this cycle was trained on.
    pub labeled_count: usize,
    /// Test F1 under the configured averaging (macro unless overridden).
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub alpha: Option<f64>,
    pub cutoff_multipliers: Vec<f64>,
    /// Ids moved to the labeled set after evaluation.
    pub selected: usize,
    /// How many of those came from outside the weighted support.
    pub filled: usize,
    pub elapsed_ms: u64,
}

/// All cycles of one (strategy, repetition) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: Strategy,
    pub repetition: usize,
    pub cycles: Vec<CycleRecord>,
}

/// Mean over repetitions at one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub cycle: usize,
    pub labeled_count: usize,
    pub repetitions: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub mean_per_class_f1: Vec<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug)]
pub struct Failure {
    pub strategy: Strategy,
    pub repetition: usize,
    pub error: Error,
}

#[derive(Debug)]
pub struct Experiment {
    /// Completed runs, ordered by strategy as configured, then repetition.
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub failure: Option<Failure>,
}

/// Shared, read-only inputs of every cycle of a run.
pub struct CycleContext<'a> {
    pub data: &'a Dataset,
    pub oracle: &'a HashMap<SampleId, usize>,
    pub config: &'a ALConfig,
    pub strategy: Strategy,
    pub repetition: usize,
    pub assignment: Option<&'a ClusterAssignment>,
}

pub fn repetition_seed(master: u64, repetition: usize) -> u64 {
    derive(derive(master, purpose::REPETITION), repetition as u64)
}

pub fn cycle_seed(repetition_seed: u64, cycle: usize) -> u64 {
    derive(derive(repetition_seed, purpose::CYCLE), cycle as u64)
}

/// Train a fresh model on the labeled set, score it on the test set, then,
/// while under budget, select and label `min(m, budget − labeled, pool)` ids.
pub fn run_cycle(state: &mut PoolState, ctx: &CycleContext<'_>, seed: u64) -> Result<CycleRecord> {
    let started = Instant::now();
    let cfg = ctx.config;
    let features = &ctx.data.features;
    let labeled = features.subset(&state.labeled_ids())?;
    let model = train(&labeled, &state.labeled_labels(), &cfg.train_config(derive(seed, purpose::TRAIN)))?;

    let test_ids: Vec<SampleId> = state.test.keys().copied().collect();
    if test_ids.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let truth: Vec<usize> = state.test.values().copied().collect();
    let predicted = predict(&model, &features.subset(&test_ids)?)?;
    let score = f1(&predicted, &truth, cfg.classes, cfg.f1_average)?;
    let per_class = per_class_f1(&predicted, &truth, cfg.classes)?;

    let labeled_count = state.labeled.len();
    let want = cfg.draw_size.min(cfg.budget.saturating_sub(labeled_count)).min(state.pool.len());
    let mixing = cfg.mixing(state.cycle);
    let mut record = CycleRecord {
        strategy: ctx.strategy,
        repetition: ctx.repetition,
        cycle: state.cycle,
        labeled_count,
        macro_f1: score,
        per_class_f1: per_class,
        alpha: (ctx.strategy == Strategy::NdsPlus).then(|| mixing.alpha()),
        cutoff_multipliers: Vec::new(),
        selected: 0,
        filled: 0,
        elapsed_ms: 0,
    };
    if want > 0 {
        let pool = features.subset(&state.pool_ids())?;
        let selection = select_batch(&SelectionRequest {
            strategy: ctx.strategy,
            pool: &pool,
            model: Some(&model),
            assignment: ctx.assignment,
            clusters: cfg.classes,
            draw_size: want,
            mc_passes: cfg.mc_passes,
            mixing,
            seed,
        })?;
        state.label(&selection.selected, ctx.oracle)?;
        record.cutoff_multipliers = selection.score.cutoff_multipliers();
        record.selected = selection.selected.len();
        record.filled = selection.filled.len();
        state.cycle += 1;
    }
    if cfg.timing {
        record.elapsed_ms = started.elapsed().as_millis() as u64;
    }
    Ok(record)
}

/// Cycles until the budget is reached or the pool runs dry; the last row
/// evaluates the final labeled set without selecting.
pub fn run_repetition(
    data: &Dataset,
    split: &Split,
    config: &ALConfig,
    strategy: Strategy,
    repetition: usize,
    assignment: Option<&ClusterAssignment>,
) -> Result<RunRecord> {
    let oracle: HashMap<SampleId, usize> = split.train.iter().map(|(id, c)| (*id, *c)).collect();
    let rep_seed = repetition_seed(config.seed, repetition);
    let mut state = PoolState::init_balanced(
        &split.train,
        split.test.clone(),
        config.classes,
        config.initial_size,
        derive(rep_seed, purpose::INITIAL),
    )?;
    let ctx = CycleContext { data, oracle: &oracle, config, strategy, repetition, assignment };
    let mut cycles = Vec::new();
    loop {
        let seed = cycle_seed(rep_seed, state.cycle);
        let row = run_cycle(&mut state, &ctx, seed)?;
        let done = row.selected == 0;
        cycles.push(row);
        if done {
            break;
        }
    }
    Ok(RunRecord { strategy, repetition, cycles })
}

/// Every configured strategy × repetition on the same split. Repetitions
/// differ only in their seeds, which do not depend on the strategy.
pub fn run_experiment(config: &ALConfig, data: &Dataset) -> Result<Experiment> {
    config.validate()?;
    if data.classes != config.classes {
        return Err(Error::Config(format!("data has {} classes, config says {}", data.classes, config.classes)));
    }
    let split = stratified_split(data.features.ids(), &data.labels, config.classes, derive(config.seed, purpose::SPLIT))?;
    let assignment = if config.freeze_clusters && config.strategy.iter().any(|s| s.needs_clusters()) {
        let train_ids: Vec<SampleId> = split.train.keys().copied().collect();
        let train = data.features.subset(&train_ids)?;
        Some(spectral_cluster(&train, config.classes, derive(config.seed, purpose::CLUSTER))?)
    } else {
        None
    };
    let jobs: Vec<(Strategy, usize)> =
        config.strategy.iter().flat_map(|&s| (0..config.repetitions).map(move |r| (s, r))).collect();
    let results: Vec<Result<RunRecord>> = jobs
        .par_iter()
        .map(|&(s, r)| run_repetition(data, &split, config, s, r, assignment.as_ref()))
        .collect();
    let mut runs = Vec::new();
    let mut failure = None;
    for ((strategy, repetition), res) in jobs.into_iter().zip(results) {
        match res {
            Ok(run) => runs.push(run),
            Err(error) if failure.is_none() => failure = Some(Failure { strategy, repetition, error }),
            Err(_) => {}
        }
    }
    let summary = summarize(&runs, &config.strategy);
    Ok(Experiment { runs, summary, failure })
}

/// Per-strategy, per-cycle mean and standard deviation across repetitions.
pub fn summarize(runs: &[RunRecord], order: &[Strategy]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &strategy in order {
        let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.strategy == strategy).collect();
        let cycles = mine.iter().map(|r| r.cycles.len()).max().unwrap_or(0);
        for c in 0..cycles {
            let at: Vec<&CycleRecord> = mine.iter().filter_map(|r| r.cycles.get(c)).collect();
            let n = at.len() as f64;
            let mean = at.iter().map(|r| r.macro_f1).sum::<f64>() / n;
            let var = at.iter().map(|r| (r.macro_f1 - mean).powi(2)).sum::<f64>() / n;
            let k = at[0].per_class_f1.len();
            let mean_per_class =
                (0..k).map(|j| at.iter().map(|r| r.per_class_f1.get(j).copied().unwrap_or(0.0)).sum::<f64>() / n).collect();
            rows.push(SummaryRow {
                strategy,
                cycle: c,
                labeled_count: at[0].labeled_count,
                repetitions: at.len(),
                mean_f1: mean,
                std_f1: var.sqrt(),
                mean_per_class_f1: mean_per_class,
                alpha: at[0].alpha,
            });
        }
    }
    rows
}

/// Summary row of `strategy` at a labeled-set size.
pub fn mean_f1_at(summary: &[SummaryRow], strategy: Strategy, labeled_count: usize) -> Option<f64> {
    summary.iter().find(|r| r.strategy == strategy && r.labeled_count == labeled_count).map(|r| r.mean_f1)
}
