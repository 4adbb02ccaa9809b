use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::metrics::F1Average;
use super::synthetic::Preset;
use crate::acquisition::{Decay, MixingState, Strategy, DEFAULT_ALPHA_DECAY};
use crate::classifier::{TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_DROPOUT, DEFAULT_HIDDEN, DEFAULT_LEARNING_RATE, DEFAULT_MC_PASSES};
use crate::{Error, Result};

/// Every setting of an experiment. Field names double as the keys of the
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALConfig {
    /// Strategies to run on the same data and seeds.
    pub strategy: Vec<Strategy>,
    pub draw_size: usize,
    pub initial_size: usize,
    /// Labeled-set size at which the loop stops.
    pub budget: usize,
    pub classes: usize,
    /// `None` picks 10, or 5 for binary problems.
    pub epochs: Option<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub mc_passes: usize,
    pub dropout_rate: f64,
    pub alpha_decay: f64,
    pub alpha_schedule: Decay,
    pub repetitions: usize,
    pub seed: u64,
    pub f1_average: F1Average,
    /// Cluster the training split once per experiment and reuse the
    /// clustering, restricted to the pool, in every cycle.
    pub freeze_clusters: bool,
    /// Record wall time per cycle; off keeps record files byte-reproducible.
    pub timing: bool,
    pub preset: Preset,
    /// Total synthetic samples before the train/test split.
    pub samples: usize,
    pub dim: usize,
    pub spread: f64,
    pub min_center_distance: Option<f64>,
    /// Use these files instead of synthetic data; every row must be labeled.
    pub embeddings: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl Default for ALConfig {
    fn default() -> Self {
        ALConfig {
            strategy: vec![Strategy::Random, Strategy::Nds, Strategy::NdsPlus],
            draw_size: 20,
            initial_size: 100,
            budget: 500,
            classes: 4,
            epochs: None,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            hidden: DEFAULT_HIDDEN,
            mc_passes: DEFAULT_MC_PASSES,
            dropout_rate: DEFAULT_DROPOUT,
            alpha_decay: DEFAULT_ALPHA_DECAY,
            alpha_schedule: Decay::Additive,
            repetitions: 10,
            seed: 0,
            f1_average: F1Average::Macro,
            freeze_clusters: true,
            timing: false,
            preset: Preset::TwitterAbusive,
            samples: 2500,
            dim: 32,
            spread: 1.0,
            min_center_distance: None,
            embeddings: None,
            labels: None,
        }
    }
}

impl ALConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.strategy.is_empty() {
            return fail("at least one strategy is required".into());
        }
        if self.classes < 2 {
            return fail(format!("classes must be >= 2, got {}", self.classes));
        }
        if self.initial_size == 0 || !self.initial_size.is_multiple_of(self.classes) {
            return fail(format!("initial_size {} must be a positive multiple of classes {}", self.initial_size, self.classes));
        }
        if self.budget < self.initial_size {
            return fail(format!("budget {} is below initial_size {}", self.budget, self.initial_size));
        }
        if self.draw_size == 0 || self.repetitions == 0 || self.mc_passes == 0 {
            return fail("draw_size, repetitions and mc_passes must be >= 1".into());
        }
        if self.embeddings.is_some() != self.labels.is_some() {
            return fail("embeddings and labels must be given together".into());
        }
        if self.embeddings.is_none() && self.preset.classes(self.classes) != self.classes {
            return fail(format!("preset {} has {} classes, config says {}", self.preset, self.preset.classes(self.classes), self.classes));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(0.0..=1.0).contains(&self.alpha_decay) {
            return fail(format!("alpha_decay {} outside [0, 1]", self.alpha_decay));
        }
        Ok(())
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let mut t = TrainConfig::for_classes(self.classes, seed);
        if let Some(e) = self.epochs {
            t.epochs = e;
        }
        t.learning_rate = self.learning_rate;
        t.batch_size = self.batch_size;
        t.hidden = self.hidden;
        t.dropout_rate = self.dropout_rate;
        t
    }

    pub fn mixing(&self, cycle: usize) -> MixingState {
        MixingState::new(self.alpha_decay, self.alpha_schedule, cycle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ALConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ALConfig { initial_size: 50, ..Default::default() },
            ALConfig { budget: 80, ..Default::default() },
            ALConfig { draw_size: 0, ..Default::default() },
            ALConfig { classes: 2, ..Default::default() },
            ALConfig { strategy: vec![], ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn epochs_follow_class_count() {
        assert_eq!(ALConfig::default().train_config(0).epochs, 10);
        let binary = ALConfig { classes: 2, preset: Preset::WikiAttack, initial_size: 50, ..Default::default() };
        assert_eq!(binary.train_config(0).epochs, 5);
    }
}
