//! Projected-gradient attacks, Langevin purification with logit averaging
//! over stochastic trials, and the adaptive attack that differentiates through
//! purification by treating it as the identity.

mod bpda;
mod defense;
mod pgd;
mod report;

pub use bpda::{bpda_eot_attack, bpda_gradient, BpdaConfig, GradientPoint};
pub use defense::{average_logits, eot_defend, purify, DefenseConfig, EotOutcome};
pub use pgd::{pgd_attack, pgd_trajectory, AttackConfig, ThreatSet, DEFAULT_PGD_STEPS};
pub use report::{AttackReport, ImageRecord};

use crate::classifier::ClassifierError;
use crate::gibbs::GibbsError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AdversarialError {
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite attack gradient at iterate {iterate}")]
    NonFiniteGradient { iterate: usize },
    #[error("iterate {iterate} leaves the threat set at coordinate {index}")]
    Infeasible { iterate: usize, index: usize },
    #[error("defense trial {trial} failed: {reason}")]
    Trial { trial: usize, reason: String },
    #[error("report parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
