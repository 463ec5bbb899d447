//! Experiment plans as line-oriented `key = value` text grouped under
//! `[section]` headers. A plan may start from a named preset
//! (`preset = desk` before any section) and override individual keys.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use super::{DatasetKind, HarnessError};
use crate::adversarial::GradientPoint;
use crate::graph::{NetworkSpec, OptimizerMode};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Toy(DatasetKind),
    /// CIFAR-10 batch files resolved against the data directory.
    Cifar10 {
        train_files: Vec<String>,
        test_files: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPlan {
    pub source: DatasetSource,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbmPlan {
    pub network: NetworkSpec,
    /// SGLD steps per training chain; one energy model per entry.
    pub n_sweep: Vec<usize>,
    pub total_batches: usize,
    pub batch_size: usize,
    pub first_mode: OptimizerMode,
    pub first_lr: f64,
    pub switch_batch: usize,
    pub second_mode: OptimizerMode,
    pub second_lr: f64,
    pub sgld_step: f64,
    pub sgld_noise: f64,
    pub clamp: bool,
    pub buffer_capacity: usize,
    pub reinit_prob: f64,
    pub data_jitter: f64,
    pub divergence_bound: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierPlan {
    pub network: NetworkSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_schedule: Vec<(usize, f64)>,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    /// Attack radii in units of 1/255.
    pub eps_255: Vec<f64>,
    pub steps: usize,
    /// Attack step size as a multiple of `eps / steps`.
    pub step_factor: f64,
    pub random_start: bool,
    /// Test images attacked per cell.
    pub images: usize,
    /// Seed of the attacked-subset selection.
    pub subset_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefensePlan {
    pub langevin_steps: usize,
    pub trials: usize,
    pub step_size: f64,
    pub noise: f64,
    pub clamp: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpdaPlan {
    pub enabled: bool,
    pub eps_255: f64,
    pub images: usize,
    pub steps: usize,
    pub step_factor: f64,
    /// Purified samples per attack iteration.
    pub samples: usize,
    pub langevin_steps: usize,
    /// Energy models attacked; empty means the smallest and largest budget.
    pub n_values: Vec<usize>,
    pub gradient_point: GradientPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub name: String,
    /// Seeds all model training and subset selection.
    pub master_seed: u64,
    /// Seeds of the attack and defense randomness; one report per seed.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub dataset: DatasetPlan,
    pub ebm: EbmPlan,
    pub classifier: ClassifierPlan,
    pub attack: AttackPlan,
    pub defense: DefensePlan,
    pub bpda: BpdaPlan,
}

fn digits_classifier() -> NetworkSpec {
    NetworkSpec::mlp(64, &[64], 10, crate::graph::DEFAULT_LEAKY_SLOPE)
}

fn digits_energy() -> NetworkSpec {
    NetworkSpec::mlp(64, &[64, 32], 1, crate::graph::DEFAULT_LEAKY_SLOPE)
}

impl ExperimentPlan {
    /// Desk-scale sweep on synthetic 8x8 digits.
    ///
    /// Half of every replay batch restarts from uniform noise, so each energy
    /// model is shaped by chains of its own length `n`; with a fully persistent
    /// buffer the short desk training leaves the models nearly independent of `n`.
    pub fn desk() -> Self {
        Self {
            name: "desk".into(),
            master_seed: 20_240_601,
            seeds: vec![1, 2, 3],
            out_dir: PathBuf::from("runs/desk"),
            workers: 0,
            dataset: DatasetPlan {
                source: DatasetSource::Toy(DatasetKind::SyntheticDigits8x8),
                train_per_class: 200,
                test_per_class: 40,
                seed: 11,
            },
            ebm: EbmPlan {
                network: digits_energy(),
                n_sweep: vec![5, 10, 20, 40],
                total_batches: 1500,
                batch_size: 64,
                first_mode: OptimizerMode::Adam,
                first_lr: 1e-3,
                switch_batch: 1500,
                second_mode: OptimizerMode::Sgd,
                second_lr: 1e-5,
                sgld_step: 0.01,
                sgld_noise: 0.01,
                clamp: true,
                buffer_capacity: 2000,
                reinit_prob: 0.5,
                data_jitter: 0.005,
                divergence_bound: 1e3,
                l2: 0.0,
            },
            classifier: ClassifierPlan {
                network: digits_classifier(),
                epochs: 60,
                batch_size: 50,
                lr_schedule: vec![(0, 0.5), (40, 0.05), (50, 0.005)],
                l2: 2e-4,
            },
            attack: AttackPlan {
                eps_255: vec![0.0, 2.0, 4.0, 8.0],
                steps: 40,
                step_factor: 2.5,
                random_start: true,
                images: 200,
                subset_seed: 5,
            },
            defense: DefensePlan {
                langevin_steps: 100,
                trials: 16,
                step_size: 0.01,
                noise: 0.01,
                clamp: true,
            },
            bpda: BpdaPlan {
                enabled: true,
                eps_255: 8.0,
                images: 60,
                steps: 10,
                step_factor: 2.5,
                samples: 4,
                langevin_steps: 100,
                n_values: Vec::new(),
                gradient_point: GradientPoint::Purified,
            },
        }
    }

    /// Full-scale CIFAR-10 sweep with the published budgets.
    pub fn paper_cifar10() -> Self {
        let ebm = crate::gibbs::TrainConfig::<f64>::paper_cifar10(50, 0);
        let clf = crate::classifier::ClassifierConfig::<f64>::paper_cifar10(0);
        Self {
            name: "paper-cifar10".into(),
            master_seed: 0,
            seeds: vec![1],
            out_dir: PathBuf::from("runs/paper-cifar10"),
            workers: 0,
            dataset: DatasetPlan {
                source: DatasetSource::Cifar10 {
                    train_files: (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
                    test_files: vec!["test_batch.bin".into()],
                },
                train_per_class: 0,
                test_per_class: 0,
                seed: 0,
            },
            ebm: EbmPlan {
                network: ebm.network,
                n_sweep: vec![50, 75, 100, 150, 200],
                total_batches: ebm.total_batches,
                batch_size: ebm.batch_size,
                first_mode: ebm.first_phase.mode,
                first_lr: ebm.first_phase.learning_rate,
                switch_batch: ebm.switch_batch,
                second_mode: ebm.second_phase.mode,
                second_lr: ebm.second_phase.learning_rate,
                sgld_step: ebm.sgld.step_size,
                sgld_noise: ebm.sgld.noise_scale,
                clamp: true,
                buffer_capacity: ebm.buffer_capacity,
                reinit_prob: ebm.reinit_prob,
                data_jitter: ebm.data_jitter,
                divergence_bound: ebm.divergence_bound,
                l2: ebm.l2_coeff,
            },
            classifier: ClassifierPlan {
                network: clf.network,
                epochs: clf.epochs,
                batch_size: clf.batch_size,
                lr_schedule: clf.lr_schedule,
                l2: clf.l2_coeff,
            },
            attack: AttackPlan {
                eps_255: (0..=11).map(f64::from).collect(),
                steps: crate::adversarial::DEFAULT_PGD_STEPS,
                step_factor: 2.5,
                random_start: true,
                images: 1000,
                subset_seed: 0,
            },
            defense: DefensePlan {
                langevin_steps: 1500,
                trials: 150,
                step_size: 0.01,
                noise: 0.01,
                clamp: true,
            },
            bpda: BpdaPlan {
                enabled: true,
                eps_255: 8.0,
                images: 1000,
                steps: crate::adversarial::DEFAULT_PGD_STEPS,
                step_factor: 2.5,
                samples: 150,
                langevin_steps: 1500,
                n_values: Vec::new(),
                gradient_point: GradientPoint::Purified,
            },
        }
    }

    pub fn preset(name: &str) -> Result<Self, HarnessError> {
        match name.trim() {
            "desk" => Ok(Self::desk()),
            "paper-cifar10" => Ok(Self::paper_cifar10()),
            other => Err(HarnessError::Plan {
                line: 0,
                reason: format!("unknown preset '{other}' (expected desk or paper-cifar10)"),
            }),
        }
    }

    /// Energy models attacked by the adaptive attack.
    pub fn bpda_n_values(&self) -> Vec<usize> {
        if !self.bpda.n_values.is_empty() {
            return self.bpda.n_values.clone();
        }
        let lo = self.ebm.n_sweep.iter().copied().min();
        let hi = self.ebm.n_sweep.iter().copied().max();
        lo.into_iter().chain(hi).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |reason: String| Err(HarnessError::Plan { line: 0, reason });
        if self.ebm.n_sweep.is_empty() {
            return bad("n_sweep must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.ebm.n_sweep.iter().collect::<BTreeSet<_>>().len() != self.ebm.n_sweep.len() {
            return bad("n_sweep entries must be distinct".into());
        }
        if self.attack.eps_255.is_empty() {
            return bad("eps grid must not be empty".into());
        }
        if self.attack.eps_255.iter().any(|e| !(*e >= 0.0 && *e <= 255.0)) {
            return bad("eps values must lie in [0, 255]".into());
        }
        if self.attack.images == 0 || self.defense.trials == 0 {
            return bad("images and trials must be positive".into());
        }
        if self.bpda.enabled && (self.bpda.samples == 0 || self.bpda.images == 0) {
            return bad("bpda samples and images must be positive".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let flist = |v: &[f64]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("master_seed", self.master_seed.to_string());
        kv(
            "seeds",
            self.seeds.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        );
        kv("out", self.out_dir.display().to_string());
        kv("workers", self.workers.to_string());
        s.push_str("\n[dataset]\n");
        let d = &self.dataset;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match &d.source {
            DatasetSource::Toy(kind) => kv("kind", kind.to_string()),
            DatasetSource::Cifar10 {
                train_files,
                test_files,
            } => {
                kv("kind", "cifar10".into());
                kv("train_files", train_files.join(","));
                kv("test_files", test_files.join(","));
            }
        }
        kv("train_per_class", d.train_per_class.to_string());
        kv("test_per_class", d.test_per_class.to_string());
        kv("seed", d.seed.to_string());
        s.push_str("\n[ebm]\n");
        let e = &self.ebm;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("input_shape", shape_text(&e.network.input_shape));
        kv("layers", e.network.layers_string());
        kv("n_sweep", list(&e.n_sweep));
        kv("total_batches", e.total_batches.to_string());
        kv("batch_size", e.batch_size.to_string());
        kv("first_mode", e.first_mode.as_str().into());
        kv("first_lr", e.first_lr.to_string());
        kv("switch_batch", e.switch_batch.to_string());
        kv("second_mode", e.second_mode.as_str().into());
        kv("second_lr", e.second_lr.to_string());
        kv("sgld_step", e.sgld_step.to_string());
        kv("sgld_noise", e.sgld_noise.to_string());
        kv("clamp", e.clamp.to_string());
        kv("buffer_capacity", e.buffer_capacity.to_string());
        kv("reinit_prob", e.reinit_prob.to_string());
        kv("data_jitter", e.data_jitter.to_string());
        kv("divergence_bound", e.divergence_bound.to_string());
        kv("l2", e.l2.to_string());
        s.push_str("\n[classifier]\n");
        let c = &self.classifier;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("input_shape", shape_text(&c.network.input_shape));
        kv("layers", c.network.layers_string());
        kv("epochs", c.epochs.to_string());
        kv("batch_size", c.batch_size.to_string());
        kv(
            "lr_schedule",
            c.lr_schedule
                .iter()
                .map(|(e, lr)| format!("{e}:{lr}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("l2", c.l2.to_string());
        s.push_str("\n[attack]\n");
        let a = &self.attack;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("eps_255", flist(&a.eps_255));
        kv("steps", a.steps.to_string());
        kv("step_factor", a.step_factor.to_string());
        kv("random_start", a.random_start.to_string());
        kv("images", a.images.to_string());
        kv("subset_seed", a.subset_seed.to_string());
        s.push_str("\n[defense]\n");
        let f = &self.defense;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("langevin_steps", f.langevin_steps.to_string());
        kv("trials", f.trials.to_string());
        kv("step_size", f.step_size.to_string());
        kv("noise", f.noise.to_string());
        kv("clamp", f.clamp.to_string());
        s.push_str("\n[bpda]\n");
        let b = &self.bpda;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("enabled", b.enabled.to_string());
        kv("eps_255", b.eps_255.to_string());
        kv("images", b.images.to_string());
        kv("steps", b.steps.to_string());
        kv("step_factor", b.step_factor.to_string());
        kv("samples", b.samples.to_string());
        kv("langevin_steps", b.langevin_steps.to_string());
        kv("n_values", list(&b.n_values));
        kv(
            "gradient_point",
            match b.gradient_point {
                GradientPoint::Purified => "purified",
                GradientPoint::Input => "input",
            }
            .into(),
        );
        s
    }

    /// Parses plan text. Keys left unset keep the value of the preset named
    /// by a leading `preset = ...` line, or of the desk preset.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut plan = Self::desk();
        let mut section = String::new();
        let mut ebm_shape: Option<String> = None;
        let mut ebm_layers: Option<String> = None;
        let mut clf_shape: Option<String> = None;
        let mut clf_layers: Option<String> = None;
        let mut saw_key = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| HarnessError::Plan { line: line_no, reason };
            if let Some(name) = line.strip_prefix('[') {
                section = name
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header".into()))?
                    .trim()
                    .to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, found '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if section.is_empty() && key == "preset" {
                if saw_key {
                    return Err(err("preset must come before other keys".into()));
                }
                plan = Self::preset(value).map_err(|_| err(format!("unknown preset '{value}'")))?;
                continue;
            }
            saw_key = true;
            let v = Value {
                raw: value,
                line: line_no,
            };
            match (section.as_str(), key) {
                ("", "name") => plan.name = value.to_string(),
                ("", "master_seed") => plan.master_seed = v.parse()?,
                ("", "seeds") => plan.seeds = v.list()?,
                ("", "out") => plan.out_dir = PathBuf::from(value),
                ("", "workers") => plan.workers = v.parse()?,
                ("dataset", "kind") => {
                    plan.dataset.source = if value == "cifar10" {
                        match &plan.dataset.source {
                            s @ DatasetSource::Cifar10 { .. } => s.clone(),
                            DatasetSource::Toy(_) => DatasetSource::Cifar10 {
                                train_files: Vec::new(),
                                test_files: Vec::new(),
                            },
                        }
                    } else {
                        DatasetSource::Toy(value.parse().map_err(|e: HarnessError| err(e.to_string()))?)
                    }
                }
                ("dataset", "train_files") | ("dataset", "test_files") => {
                    let files: Vec<String> = v.list()?;
                    match &mut plan.dataset.source {
                        DatasetSource::Cifar10 {
                            train_files,
                            test_files,
                        } => {
                            if key == "train_files" {
                                *train_files = files;
                            } else {
                                *test_files = files;
                            }
                        }
                        DatasetSource::Toy(_) => return Err(err("file lists need kind = cifar10".into())),
                    }
                }
                ("dataset", "train_per_class") => plan.dataset.train_per_class = v.parse()?,
                ("dataset", "test_per_class") => plan.dataset.test_per_class = v.parse()?,
                ("dataset", "seed") => plan.dataset.seed = v.parse()?,
                ("ebm", "input_shape") => ebm_shape = Some(value.to_string()),
                ("ebm", "layers") => ebm_layers = Some(value.to_string()),
                ("ebm", "n_sweep") => plan.ebm.n_sweep = v.list()?,
                ("ebm", "total_batches") => plan.ebm.total_batches = v.parse()?,
                ("ebm", "batch_size") => plan.ebm.batch_size = v.parse()?,
                ("ebm", "first_mode") => plan.ebm.first_mode = v.mode()?,
                ("ebm", "first_lr") => plan.ebm.first_lr = v.parse()?,
                ("ebm", "switch_batch") => plan.ebm.switch_batch = v.parse()?,
                ("ebm", "second_mode") => plan.ebm.second_mode = v.mode()?,
                ("ebm", "second_lr") => plan.ebm.second_lr = v.parse()?,
                ("ebm", "sgld_step") => plan.ebm.sgld_step = v.parse()?,
                ("ebm", "sgld_noise") => plan.ebm.sgld_noise = v.parse()?,
                ("ebm", "clamp") => plan.ebm.clamp = v.parse()?,
                ("ebm", "buffer_capacity") => plan.ebm.buffer_capacity = v.parse()?,
                ("ebm", "reinit_prob") => plan.ebm.reinit_prob = v.parse()?,
                ("ebm", "data_jitter") => plan.ebm.data_jitter = v.parse()?,
                ("ebm", "divergence_bound") => plan.ebm.divergence_bound = v.parse()?,
                ("ebm", "l2") => plan.ebm.l2 = v.parse()?,
                ("classifier", "input_shape") => clf_shape = Some(value.to_string()),
                ("classifier", "layers") => clf_layers = Some(value.to_string()),
                ("classifier", "epochs") => plan.classifier.epochs = v.parse()?,
                ("classifier", "batch_size") => plan.classifier.batch_size = v.parse()?,
                ("classifier", "lr_schedule") => {
                    plan.classifier.lr_schedule = value
                        .split(',')
                        .map(|pair| {
                            let (e, lr) = pair
                                .split_once(':')
                                .ok_or_else(|| err(format!("expected epoch:lr, found '{pair}'")))?;
                            Ok((
                                e.trim().parse().map_err(|_| err(format!("bad epoch '{e}'")))?,
                                lr.trim()
                                    .parse()
                                    .map_err(|_| err(format!("bad learning rate '{lr}'")))?,
                            ))
                        })
                        .collect::<Result<_, HarnessError>>()?
                }
                ("classifier", "l2") => plan.classifier.l2 = v.parse()?,
                ("attack", "eps_255") => plan.attack.eps_255 = v.list()?,
                ("attack", "steps") => plan.attack.steps = v.parse()?,
                ("attack", "step_factor") => plan.attack.step_factor = v.parse()?,
                ("attack", "random_start") => plan.attack.random_start = v.parse()?,
                ("attack", "images") => plan.attack.images = v.parse()?,
                ("attack", "subset_seed") => plan.attack.subset_seed = v.parse()?,
                ("defense", "langevin_steps") => plan.defense.langevin_steps = v.parse()?,
                ("defense", "trials") => plan.defense.trials = v.parse()?,
                ("defense", "step_size") => plan.defense.step_size = v.parse()?,
                ("defense", "noise") => plan.defense.noise = v.parse()?,
                ("defense", "clamp") => plan.defense.clamp = v.parse()?,
                ("bpda", "enabled") => plan.bpda.enabled = v.parse()?,
                ("bpda", "eps_255") => plan.bpda.eps_255 = v.parse()?,
                ("bpda", "images") => plan.bpda.images = v.parse()?,
                ("bpda", "steps") => plan.bpda.steps = v.parse()?,
                ("bpda", "step_factor") => plan.bpda.step_factor = v.parse()?,
                ("bpda", "samples") => plan.bpda.samples = v.parse()?,
                ("bpda", "langevin_steps") => plan.bpda.langevin_steps = v.parse()?,
                ("bpda", "n_values") => plan.bpda.n_values = v.list()?,
                ("bpda", "gradient_point") => {
                    plan.bpda.gradient_point = match value {
                        "purified" => GradientPoint::Purified,
                        "input" => GradientPoint::Input,
                        other => return Err(err(format!("gradient_point must be purified or input, got '{other}'"))),
                    }
                }
                (sec, k) => return Err(err(format!("unknown key '{k}' in section [{sec}]"))),
            }
        }
        let net = |shape: Option<String>, layers: Option<String>, current: &NetworkSpec| {
            if shape.is_none() && layers.is_none() {
                return Ok(current.clone());
            }
            let shape = shape.unwrap_or_else(|| shape_text(&current.input_shape));
            let layers = layers.unwrap_or_else(|| current.layers_string());
            NetworkSpec::parse(&shape, &layers).map_err(|e| HarnessError::Plan {
                line: 0,
                reason: format!("network: {e}"),
            })
        };
        plan.ebm.network = net(ebm_shape, ebm_layers, &plan.ebm.network)?;
        plan.classifier.network = net(clf_shape, clf_layers, &plan.classifier.network)?;
        plan.validate()?;
        Ok(plan)
    }
}

fn shape_text(shape: &[usize]) -> String {
    shape.iter().map(ToString::to_string).collect::<Vec<_>>().join("x")
}

struct Value<'a> {
    raw: &'a str,
    line: usize,
}

impl Value<'_> {
    fn parse<X: std::str::FromStr>(&self) -> Result<X, HarnessError> {
        self.raw.parse().map_err(|_| HarnessError::Plan {
            line: self.line,
            reason: format!("cannot parse '{}'", self.raw),
        })
    }

    fn list<X: std::str::FromStr>(&self) -> Result<Vec<X>, HarnessError> {
        self.raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| HarnessError::Plan {
                    line: self.line,
                    reason: format!("cannot parse list item '{s}'"),
                })
            })
            .collect()
    }

    fn mode(&self) -> Result<OptimizerMode, HarnessError> {
        self.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_text() {
        for plan in [ExperimentPlan::desk(), ExperimentPlan::paper_cifar10()] {
            let text = plan.to_text();
            assert_eq!(ExperimentPlan::parse(&text).unwrap(), plan, "{text}");
        }
    }

    #[test]
    fn overrides_and_errors() {
        let p = ExperimentPlan::parse("preset = desk\nseeds = 4,5\n[attack]\nimages = 12\n").unwrap();
        assert_eq!(p.seeds, vec![4, 5]);
        assert_eq!(p.attack.images, 12);
        assert_eq!(p.ebm.n_sweep, vec![5, 10, 20, 40]);
        match ExperimentPlan::parse("[attack]\nbogus = 1\n") {
            Err(HarnessError::Plan { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ExperimentPlan::parse("seeds = 1,1\n").is_err());
        assert!(ExperimentPlan::parse("[ebm]\nn_sweep =\n").is_err());
    }

    #[test]
    fn bpda_defaults_to_sweep_extremes() {
        assert_eq!(ExperimentPlan::desk().bpda_n_values(), vec![5, 40]);
    }
}
