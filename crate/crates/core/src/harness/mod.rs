//! Active-learning experiments on labeled data: synthetic datasets, pool
//! bookkeeping, the cycle loop and result files.

pub mod config;
pub mod metrics;
pub mod pool;
pub mod report;
pub mod run;
pub mod synthetic;

pub use config::ALConfig;
pub use pool::{stratified_split, PoolState, Split};
pub use report::write_results;
pub use run::{run_cycle, run_experiment, run_repetition, CycleRecord, Experiment, RunRecord, SummaryRow};
pub use synthetic::{class_counts, generate_synthetic, Dataset, Preset, SyntheticSpec};

use crate::{iostore, Error, Result};

/// The dataset an experiment runs on: the configured files when given,
/// otherwise blobs drawn from the preset.
pub fn load_dataset(config: &ALConfig) -> Result<Dataset> {
    match (&config.embeddings, &config.labels) {
        (Some(e), Some(l)) => {
            let features = iostore::read_embeddings(e)?;
            let labels = iostore::read_labels(l, config.classes)?;
            let y = labels.aligned(features.ids())?;
            let labels = y
                .into_iter()
                .zip(features.ids())
                .map(|(c, id)| c.ok_or_else(|| Error::Config(format!("sample {id} is unlabeled; simulation needs every label"))))
                .collect::<Result<Vec<usize>>>()?;
            Ok(Dataset { features, labels, classes: config.classes, centers: Vec::new() })
        }
        _ => generate_synthetic(&SyntheticSpec {
            counts: class_counts(&config.preset.proportions(config.classes), config.samples),
            dim: config.dim,
            spread: config.spread,
            min_center_distance: config.min_center_distance,
            seed: config.seed,
        }),
    }
}
