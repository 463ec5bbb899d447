//! Experiment orchestration: datasets, plan files, the training, attack and
//! defense stages over the `(eps, n, seed)` grid, and report emission.

mod cifar;
mod datasets;
mod fpe_check;
mod plan;
mod report;
mod run;

pub use cifar::{
    ingest_cifar10, parse_cifar10, parse_cifar10_records, serialize_cifar10, Cifar10Record, CIFAR_CLASSES,
    CIFAR_RECORD_LEN, CIFAR_SHAPE,
};
pub use datasets::{generate_toy_dataset, DatasetKind};
pub use fpe_check::{fpe_check, FpeCheckConfig, FpeCheckOutcome};
pub use plan::{
    AttackPlan, BpdaPlan, ClassifierPlan, DatasetPlan, DatasetSource, DefensePlan, EbmPlan, ExperimentPlan,
};
pub use report::{emit_report, read_csv_table, CsvTable, ReportSummary};
pub use run::{
    attack_subset, load_dataset, run_experiment, stage_attacks, stage_bpda, stage_classifier, stage_defense,
    stage_ebms, stage_evaluate, RunLayout, RunOptions, DATA_DIR_ENV,
};

use std::path::{Path, PathBuf};

use crate::adversarial::AdversarialError;
use crate::checkpoint::CheckpointError;
use crate::classifier::ClassifierError;
use crate::fpe::SpectralError;
use crate::gibbs::{GibbsError, ModelLoadError};
use crate::metrics::MetricsError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("plan line {line}: {reason}")]
    Plan { line: usize, reason: String },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("CIFAR-10 record {record}: {reason}")]
    Cifar { record: usize, reason: String },
    #[error("missing artifact {0} (run the training stage or drop --no-train)")]
    Missing(PathBuf),
    #[error("{file}: missing column '{column}'")]
    Column { file: PathBuf, column: String },
    #[error("{file}: {reason}")]
    Audit { file: PathBuf, reason: String },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error(transparent)]
    ModelLoad(#[from] ModelLoadError),
    #[error(transparent)]
    Adversarial(#[from] AdversarialError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
