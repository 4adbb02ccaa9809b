//! `ndsal`: select a batch, run simulations, generate data, serve sessions.
//!
//! Failures print a single line `error: <kind>: <message>` on stderr and
//! exit with status 1; usage errors print the usage text and exit with 2.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufWriter, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use log::warn;

use ndsal::acquisition::{select_unlabeled, Decay, MixingState, SelectOptions, Strategy, DEFAULT_ALPHA_DECAY};
use ndsal::classifier::DEFAULT_MC_PASSES;
use ndsal::harness::run::cycle_seed;
use ndsal::harness::{
    class_counts, generate_synthetic, load_dataset, run_experiment, stratified_split, write_results, PoolState, Preset,
    SyntheticSpec,
};
use ndsal::iostore::{self, LabelFile};
use ndsal::seed::{derive, purpose};
use ndsal::{Error, SampleId};

#[derive(Parser)]
#[command(name = "ndsal", version, about = "Non-dominant-set active learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the ids of the next batch to label, one per line.
    Select {
        #[arg(long)]
        embeddings: PathBuf,
        /// `id,label` file; `-1` marks the pool.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        strategy: Strategy,
        /// Number of classes, also the number of clusters.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        draw: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cycle number; sets the NDS+ mixing weight and the per-cycle seed.
        #[arg(long, default_value_t = 0)]
        cycle: usize,
        /// Trained model; otherwise one is trained on the labeled rows.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MC_PASSES)]
        mc_passes: usize,
        #[arg(long, default_value_t = DEFAULT_ALPHA_DECAY)]
        alpha_decay: f64,
        #[arg(long, default_value = "additive")]
        alpha_schedule: Decay,
        /// Also save the model trained for this selection.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Run the experiment described by a config file and write its records.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic Gaussian-blob data as an embedding file and a label file.
    Gen {
        #[arg(long, default_value = "twitter-abusive")]
        preset: Preset,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Class count for the balanced preset.
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long)]
        min_center_distance: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Keep this many labels, spread evenly over classes, and mark the
        /// rest `-1`.
        #[arg(long)]
        labeled: Option<usize>,
        /// Hold out a stratified test split and write its labels here.
        #[arg(long)]
        test_labels: Option<PathBuf>,
    },
    /// Convert delimiter-separated floats, one sample per line, to an embedding file.
    Import {
        #[arg(long)]
        text: PathBuf,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve annotation sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        session_dir: PathBuf,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Io(_) => "io",
            Error::Format(_) | Error::Csv(_) | Error::Json(_) => "format",
            Error::Config(_) | Error::InvalidParameter(_) => "config",
            Error::LabelOutOfRange { .. }
            | Error::UnknownId(_)
            | Error::DuplicateId(_)
            | Error::NonFinite { .. }
            | Error::DimensionMismatch { .. }
            | Error::InsufficientClass { .. }
            | Error::Empty(_) => "input",
            _ => "compute",
        };
        Failure { kind, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<ndsal_service::ServiceError> for Failure {
    fn from(e: ndsal_service::ServiceError) -> Self {
        Failure { kind: "service", message: e.to_string() }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Select {
            embeddings,
            labels,
            strategy,
            k,
            draw,
            seed,
            cycle,
            model,
            mc_passes,
            alpha_decay,
            alpha_schedule,
            save_model,
        } => {
            let features = iostore::read_embeddings(&embeddings)?;
            let labels = iostore::read_labels(&labels, k)?;
            labels.aligned(features.ids())?;
            let labeled: BTreeMap<SampleId, usize> = labels.labeled().collect();
            // ids the label file does not list take no part
            let listed: BTreeSet<SampleId> = labels.entries.iter().map(|(id, _)| *id).collect();
            let exclude: BTreeSet<SampleId> = features.ids().iter().filter(|id| !listed.contains(id)).copied().collect();
            let model = model.map(|p| iostore::load_model(&p)).transpose()?;
            if let Some(m) = &model {
                if m.input != features.d() || m.classes != k {
                    return Err(Error::Config(format!(
                        "model expects {} features and {} classes, data has {} and --k is {k}",
                        m.input,
                        m.classes,
                        features.d()
                    ))
                    .into());
                }
            }
            let options = SelectOptions {
                mc_passes,
                mixing: MixingState::new(alpha_decay, alpha_schedule, cycle),
                ..SelectOptions::new(strategy, k, draw)
            };
            let (selection, trained) = select_unlabeled(
                &features,
                &labeled,
                &exclude,
                &options,
                model.as_ref(),
                cycle_seed(seed, cycle),
            )?;
            if let Some(report) = &selection.report {
                warn!("{report}");
            }
            if let (Some(path), Some(m)) = (save_model, trained.as_ref().or(model.as_ref())) {
                iostore::save_model(&path, m)?;
            }
            let mut out = BufWriter::new(io::stdout().lock());
            for id in &selection.selected {
                writeln!(out, "{id}")?;
            }
            out.flush()?;
        }
        Command::Simulate { config, out } => {
            let config = iostore::read_config(&config)?;
            let data = load_dataset(&config)?;
            let experiment = run_experiment(&config, &data)?;
            write_results(&out, &experiment, &config.strategy)?;
            if let Some(f) = experiment.failure {
                return Err(Failure {
                    kind: "compute",
                    message: format!("{} repetition {}: {}", f.strategy, f.repetition, f.error),
                });
            }
        }
        Command::Gen {
            preset,
            n,
            k,
            dim,
            spread,
            min_center_distance,
            seed,
            embeddings,
            labels,
            labeled,
            test_labels,
        } => {
            let data = generate_synthetic(&SyntheticSpec {
                counts: class_counts(&preset.proportions(k), n),
                dim,
                spread,
                min_center_distance,
                seed,
            })?;
            let classes = data.classes;
            let ids = data.features.ids();
            iostore::write_embeddings(&embeddings, data.features.values())?;
            let (train, test) = match &test_labels {
                Some(_) => {
                    let split = stratified_split(ids, &data.labels, classes, derive(seed, purpose::SPLIT))?;
                    (split.train, split.test)
                }
                None => (ids.iter().copied().zip(data.labels.iter().copied()).collect(), BTreeMap::new()),
            };
            let kept = match labeled {
                Some(m) => PoolState::init_balanced(&train, BTreeMap::new(), classes, m, derive(seed, purpose::INITIAL))?.labeled,
                None => train.clone(),
            };
            let entries = train.keys().map(|id| (*id, kept.get(id).copied())).collect();
            iostore::write_labels(&labels, &LabelFile { entries })?;
            if let Some(path) = test_labels {
                let entries = test.iter().map(|(id, c)| (*id, Some(*c))).collect();
                iostore::write_labels(&path, &LabelFile { entries })?;
            }
        }
        Command::Import { text, delimiter, out } => {
            let x = iostore::import_text(&text, delimiter)?;
            iostore::write_embeddings(&out, x.values())?;
        }
        Command::Serve { port, session_dir } => {
            let runtime = tokio::runtime::Runtime::new()?;
            let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port));
            eprintln!("listening on {addr}");
            runtime.block_on(ndsal_service::serve(addr, &session_dir))?;
        }
    }
    Ok(())
}
