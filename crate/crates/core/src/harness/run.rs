use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{generate_toy_dataset, parse_cifar10, DatasetSource, ExperimentPlan, HarnessError};
use crate::adversarial::{
    bpda_eot_attack, eot_defend, pgd_attack, AttackConfig, AttackReport, BpdaConfig, DefenseConfig, ImageRecord,
};
use crate::checkpoint::Checkpoint;
use crate::classifier::{train_classifier, ClassifierConfig, ClassifierModel, LabeledDataset, Split};
use crate::gibbs::{train_ebm, DomainBox, EnergyModel, OptimizerPhase, SgldConfig, TrainConfig};
use crate::io_util::write_atomic;
use crate::metrics::{ece, DEFAULT_ECE_BINS};
use crate::rng::{derive_seed, stream};
use crate::tensor::Tensor;

/// Environment variable naming the dataset root for file-backed datasets.
pub const DATA_DIR_ENV: &str = "STOCHSEC_DATA_DIR";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Load checkpoints instead of training; missing ones are an error.
    pub no_train: bool,
    /// Dataset root; falls back to `STOCHSEC_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
}

/// File names inside a run directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn plan(&self) -> PathBuf {
        self.root.join("plan.txt")
    }

    pub fn classifier(&self) -> PathBuf {
        self.root.join("classifier.ckpt")
    }

    pub fn classifier_log(&self) -> PathBuf {
        self.root.join("classifier_log.csv")
    }

    pub fn ebm(&self, n: usize) -> PathBuf {
        self.root.join(format!("ebm_n{n}.ckpt"))
    }

    pub fn ebm_log(&self, n: usize) -> PathBuf {
        self.root.join(format!("ebm_n{n}_log.csv"))
    }

    pub fn adversarial(&self, seed: u64) -> PathBuf {
        self.root.join(format!("adversarial_seed{seed}.ckpt"))
    }

    pub fn attack_report(&self, seed: u64) -> PathBuf {
        self.root.join(format!("attack_report_seed{seed}.csv"))
    }

    pub fn bpda_report(&self, seed: u64) -> PathBuf {
        self.root.join(format!("bpda_report_seed{seed}.csv"))
    }

    pub fn bpda_summary(&self) -> PathBuf {
        self.root.join("bpda.csv")
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn fits(&self) -> PathBuf {
        self.root.join("fits.csv")
    }

    pub fn fits_abs(&self) -> PathBuf {
        self.root.join("fits_abs_error.csv")
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    write_atomic(path, text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String, HarnessError> {
    if !path.exists() {
        return Err(HarnessError::Missing(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, HarnessError> {
    if !path.exists() {
        return Err(HarnessError::Missing(path.to_path_buf()));
    }
    Ok(Checkpoint::load(path)?)
}

/// Builds or reads the plan's dataset.
pub fn load_dataset(plan: &ExperimentPlan, opts: &RunOptions) -> Result<LabeledDataset<f64>, HarnessError> {
    match &plan.dataset.source {
        DatasetSource::Toy(kind) => generate_toy_dataset(
            *kind,
            plan.dataset.train_per_class,
            plan.dataset.test_per_class,
            plan.dataset.seed,
        ),
        DatasetSource::Cifar10 {
            train_files,
            test_files,
        } => {
            let root = opts
                .data_dir
                .clone()
                .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
                .ok_or_else(|| HarnessError::Dataset(format!("CIFAR-10 needs {DATA_DIR_ENV} or --data-dir")))?;
            let mut inputs = Vec::new();
            let mut labels = Vec::new();
            let mut splits = Vec::new();
            for (files, split) in [(train_files, Split::Train), (test_files, Split::Test)] {
                for f in files {
                    let path = root.join(f);
                    if !path.exists() {
                        return Err(HarnessError::Missing(path));
                    }
                    let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
                    let part = parse_cifar10(&bytes, split)?;
                    inputs.extend(part.inputs().iter().cloned());
                    labels.extend_from_slice(part.labels());
                    splits.extend_from_slice(part.splits());
                }
            }
            Ok(LabeledDataset::new(
                super::CIFAR_SHAPE.to_vec(),
                super::CIFAR_CLASSES,
                inputs,
                labels,
                splits,
            )?)
        }
    }
}

fn classifier_config(plan: &ExperimentPlan) -> ClassifierConfig<f64> {
    ClassifierConfig {
        network: plan.classifier.network.clone(),
        epochs: plan.classifier.epochs,
        batch_size: plan.classifier.batch_size,
        lr_schedule: plan.classifier.lr_schedule.clone(),
        l2_coeff: plan.classifier.l2,
        seed: derive_seed(plan.master_seed, "classifier", &[]),
    }
}

/// Trains the classifier and writes its checkpoint and accuracy log, or
/// loads the checkpoint under `no_train`.
pub fn stage_classifier(
    plan: &ExperimentPlan,
    data: &LabeledDataset<f64>,
    layout: &RunLayout,
    opts: &RunOptions,
) -> Result<ClassifierModel<f64>, HarnessError> {
    if opts.no_train {
        let ck = load_checkpoint(&layout.classifier())?;
        return Ok(ClassifierModel::from_checkpoint(plan.classifier.network.clone(), &ck)?);
    }
    let (model, log) = train_classifier(&classifier_config(plan), data)?;
    model.to_checkpoint().save(&layout.classifier())?;
    write_file(&layout.classifier_log(), &log.to_csv())?;
    Ok(model)
}

pub(crate) fn ebm_config(plan: &ExperimentPlan, n: usize) -> TrainConfig<f64> {
    let e = &plan.ebm;
    let mut sgld = SgldConfig::new(n, e.sgld_step, e.sgld_noise);
    sgld.clamp = e.clamp;
    TrainConfig {
        network: e.network.clone(),
        domain: DomainBox::unit(e.network.input_len()),
        total_batches: e.total_batches,
        batch_size: e.batch_size,
        first_phase: OptimizerPhase {
            mode: e.first_mode,
            learning_rate: e.first_lr,
        },
        switch_batch: e.switch_batch,
        second_phase: OptimizerPhase {
            mode: e.second_mode,
            learning_rate: e.second_lr,
        },
        sgld,
        buffer_capacity: e.buffer_capacity,
        reinit_prob: e.reinit_prob,
        data_jitter: e.data_jitter,
        divergence_bound: e.divergence_bound,
        l2_coeff: e.l2,
        beta: None,
        seed: derive_seed(plan.master_seed, "ebm", &[n as u64]),
    }
}

/// Trains (or loads) one energy model per entry of the `n` sweep, in sweep
/// order. Models train concurrently when the pool has several workers.
pub fn stage_ebms(
    plan: &ExperimentPlan,
    data: &LabeledDataset<f64>,
    layout: &RunLayout,
    opts: &RunOptions,
) -> Result<Vec<(usize, EnergyModel<f64>)>, HarnessError> {
    let train: Vec<&[f64]> = data.split_inputs(Split::Train);
    plan.ebm
        .n_sweep
        .par_iter()
        .map(|&n| {
            if opts.no_train {
                let ck = load_checkpoint(&layout.ebm(n))?;
                return Ok((n, EnergyModel::from_checkpoint(plan.ebm.network.clone(), &ck)?));
            }
            let (model, log) = train_ebm(&ebm_config(plan, n), &train)?;
            model.to_checkpoint().save(&layout.ebm(n))?;
            write_file(&layout.ebm_log(n), &log.to_csv())?;
            Ok((n, model))
        })
        .collect()
}

/// Test-set indices attacked in every cell: a seeded random subset of the
/// plan's size, in ascending order.
pub fn attack_subset(plan: &ExperimentPlan, data: &LabeledDataset<f64>) -> Vec<usize> {
    let mut idx = data.indices(Split::Test);
    idx.shuffle(&mut stream(plan.attack.subset_seed, "attack-subset", &[]));
    idx.truncate(plan.attack.images);
    idx.sort_unstable();
    idx
}

fn attack_config(eps_255: f64, steps: usize, factor: f64, random_start: bool) -> AttackConfig<f64> {
    let epsilon = eps_255 / 255.0;
    AttackConfig {
        epsilon,
        step_size: factor * epsilon / steps.max(1) as f64,
        steps,
        random_start,
    }
}

fn defense_config(plan: &ExperimentPlan, steps: usize, trials: usize) -> DefenseConfig<f64> {
    let mut sgld = SgldConfig::new(steps, plan.defense.step_size, plan.defense.noise);
    sgld.clamp = plan.defense.clamp;
    DefenseConfig { sgld, trials }
}

/// PGD adversarial examples for every seed, eps and subset image, stored one
/// checkpoint per seed (`adv.eps{k}` has one row per subset image).
pub fn stage_attacks(
    plan: &ExperimentPlan,
    data: &LabeledDataset<f64>,
    classifier: &ClassifierModel<f64>,
    layout: &RunLayout,
) -> Result<(), HarnessError> {
    let subset = attack_subset(plan, data);
    let dim = data.dim();
    for &seed in &plan.seeds {
        let mut ck = Checkpoint::new();
        ck.push(
            "meta.image_ids",
            &Tensor::from_vec(subset.iter().map(|i| *i as f64).collect()),
        );
        ck.push("meta.eps_255", &Tensor::from_vec(plan.attack.eps_255.clone()));
        for (k, &eps) in plan.attack.eps_255.iter().enumerate() {
            let cfg = attack_config(
                eps,
                plan.attack.steps,
                plan.attack.step_factor,
                plan.attack.random_start,
            );
            let rows = subset
                .par_iter()
                .map(|&i| {
                    let mut r = stream(seed, "pgd", &[k as u64, i as u64]);
                    pgd_attack(classifier, &data.inputs()[i], data.labels()[i], &cfg, &mut r)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let t = Tensor::new(vec![subset.len().max(1), dim], flat)
                .map_err(|e| HarnessError::Dataset(format!("attack subset is empty: {e}")))?;
            ck.push(format!("adv.eps{k}"), &t);
        }
        ck.save(&layout.adversarial(seed))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn defend_images(
    ebm: &EnergyModel<f64>,
    classifier: &ClassifierModel<f64>,
    data: &LabeledDataset<f64>,
    images: &[(usize, Vec<f64>)],
    defense: &DefenseConfig<f64>,
    eps: f64,
    n: usize,
    seed: u64,
    tag: &str,
    cell: &[u64],
) -> Result<Vec<ImageRecord>, HarnessError> {
    images
        .par_iter()
        .map(|(i, adv)| {
            let x = &data.inputs()[*i];
            let label = data.labels()[*i];
            let mut idx = cell.to_vec();
            idx.push(*i as u64);
            let post = eot_defend(ebm, classifier, adv, defense, &mut stream(seed, tag, &idx))?;
            Ok(ImageRecord {
                image_id: *i,
                eps,
                n_train_sgld: n,
                clean_pred: classifier.predict(x)?.label,
                adv_pred: classifier.predict(adv)?.label,
                post_pred: post.prediction.label,
                confidence: post.prediction.confidence,
                label,
            })
        })
        .collect()
}

/// Purifies every stored adversarial example with every energy model and
/// writes one attack report per seed, ordered by eps, then `n`, then image.
pub fn stage_defense(
    plan: &ExperimentPlan,
    data: &LabeledDataset<f64>,
    classifier: &ClassifierModel<f64>,
    ebms: &[(usize, EnergyModel<f64>)],
    layout: &RunLayout,
) -> Result<(), HarnessError> {
    let defense = defense_config(plan, plan.defense.langevin_steps, plan.defense.trials);
    for &seed in &plan.seeds {
        let ck = load_checkpoint(&layout.adversarial(seed))?;
        let ids: Vec<usize> = ck.get("meta.image_ids")?.values().iter().map(|v| *v as usize).collect();
        let mut report = AttackReport::default();
        for (k, &eps_255) in plan.attack.eps_255.iter().enumerate() {
            let adv = ck.get(&format!("adv.eps{k}"))?;
            let dim = data.dim();
            let images: Vec<(usize, Vec<f64>)> = ids
                .iter()
                .enumerate()
                .map(|(row, &i)| (i, adv.values()[row * dim..(row + 1) * dim].to_vec()))
                .collect();
            let cells = ebms
                .par_iter()
                .map(|(n, ebm)| {
                    defend_images(
                        ebm,
                        classifier,
                        data,
                        &images,
                        &defense,
                        eps_255 / 255.0,
                        *n,
                        seed,
                        "eot",
                        &[k as u64, *n as u64],
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            report.records.extend(cells.into_iter().flatten());
        }
        write_file(&layout.attack_report(seed), &report.to_csv())?;
    }
    Ok(())
}

/// Adaptive attack at the plan's BPDA strength against the selected energy
/// models. Writes per-seed reports and a summary comparing post-defense
/// accuracy under the adaptive attack with that under plain PGD on the same
/// images.
pub fn stage_bpda(
    plan: &ExperimentPlan,
    data: &LabeledDataset<f64>,
    classifier: &ClassifierModel<f64>,
    ebms: &[(usize, EnergyModel<f64>)],
    layout: &RunLayout,
) -> Result<(), HarnessError> {
    let b = &plan.bpda;
    let mut subset = attack_subset(plan, data);
    subset.truncate(b.images);
    let eps = b.eps_255 / 255.0;
    let defense = defense_config(plan, plan.defense.langevin_steps, plan.defense.trials);
    let cfg = BpdaConfig {
        attack: attack_config(b.eps_255, b.steps, b.step_factor, plan.attack.random_start),
        defense: defense_config(plan, b.langevin_steps, b.samples),
        gradient_point: b.gradient_point,
    };
    let pgd_cfg = attack_config(
        b.eps_255,
        plan.attack.steps,
        plan.attack.step_factor,
        plan.attack.random_start,
    );
    let targets = plan.bpda_n_values();
    let mut summary = String::from("eps,n,seed,images,pgd_post_acc,bpda_post_acc\n");
    for &seed in &plan.seeds {
        let mut report = AttackReport::default();
        for &n in &targets {
            let ebm = &ebms
                .iter()
                .find(|(m, _)| *m == n)
                .ok_or_else(|| HarnessError::Plan {
                    line: 0,
                    reason: format!("bpda n={n} is not in the sweep"),
                })?
                .1;
            let pgd_images = subset
                .par_iter()
                .map(|&i| {
                    let mut r = stream(seed, "bpda-ref-pgd", &[i as u64]);
                    Ok((
                        i,
                        pgd_attack(classifier, &data.inputs()[i], data.labels()[i], &pgd_cfg, &mut r)?,
                    ))
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let reference = defend_images(
                ebm,
                classifier,
                data,
                &pgd_images,
                &defense,
                eps,
                n,
                seed,
                "bpda-ref-eot",
                &[n as u64],
            )?;
            let bpda_images = subset
                .par_iter()
                .map(|&i| {
                    let mut r = stream(seed, "bpda", &[n as u64, i as u64]);
                    Ok((
                        i,
                        bpda_eot_attack(ebm, classifier, &data.inputs()[i], data.labels()[i], &cfg, &mut r)?,
                    ))
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let attacked = defend_images(
                ebm,
                classifier,
                data,
                &bpda_images,
                &defense,
                eps,
                n,
                seed,
                "bpda-eot",
                &[n as u64],
            )?;
            let acc = |rs: &[ImageRecord]| AttackReport { records: rs.to_vec() }.post_accuracy();
            summary.push_str(&format!(
                "{eps},{n},{seed},{},{},{}\n",
                subset.len(),
                acc(&reference),
                acc(&attacked)
            ));
            report.records.extend(attacked);
        }
        write_file(&layout.bpda_report(seed), &report.to_csv())?;
    }
    write_file(&layout.bpda_summary(), &summary)
}

pub(crate) struct MetricsRow {
    pub eps: f64,
    pub n: usize,
    pub seed: u64,
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub post_acc: f64,
    pub rel_error: Option<f64>,
    pub ece: f64,
}

pub(crate) const METRICS_HEADER: &str = "eps,n,seed,clean_acc,adv_acc,post_acc,rel_error,ece";

/// Aggregates for one `(eps, n)` group of per-image records.
pub(crate) fn aggregate(records: &[ImageRecord]) -> Result<(f64, f64, f64, Option<f64>, f64), HarnessError> {
    let report = AttackReport {
        records: records.to_vec(),
    };
    let clean = report.clean_accuracy();
    let post = report.post_accuracy();
    let rel = if clean < 1.0 {
        Some(crate::metrics::relative_error(1.0 - post, 1.0 - clean)?)
    } else {
        None
    };
    let conf: Vec<f64> = records.iter().map(|r| r.confidence).collect();
    let ok: Vec<bool> = records.iter().map(ImageRecord::correct_post).collect();
    Ok((
        clean,
        report.adv_accuracy(),
        post,
        rel,
        ece(&conf, &ok, DEFAULT_ECE_BINS)?,
    ))
}

/// Groups records by `(eps, n)` in first-appearance order.
pub(crate) fn group_records(records: &[ImageRecord]) -> Vec<((f64, usize), Vec<ImageRecord>)> {
    let mut groups: Vec<((f64, usize), Vec<ImageRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(key, _)| *key == (r.eps, r.n_train_sgld)) {
            Some((_, g)) => g.push(r.clone()),
            None => groups.push(((r.eps, r.n_train_sgld), vec![r.clone()])),
        }
    }
    groups
}

/// Reads the per-seed attack reports and writes `metrics.csv` plus the
/// relative- and absolute-error decay fits.
pub fn stage_evaluate(plan: &ExperimentPlan, layout: &RunLayout) -> Result<(), HarnessError> {
    let mut rows = Vec::new();
    for &seed in &plan.seeds {
        let path = layout.attack_report(seed);
        let report = AttackReport::from_csv(&read_file(&path)?)?;
        for ((eps, n), group) in group_records(&report.records) {
            let (clean_acc, adv_acc, post_acc, rel_error, ece) = aggregate(&group)?;
            rows.push(MetricsRow {
                eps,
                n,
                seed,
                clean_acc,
                adv_acc,
                post_acc,
                rel_error,
                ece,
            });
        }
    }
    rows.sort_by(|a, b| a.eps.total_cmp(&b.eps).then(a.n.cmp(&b.n)).then(a.seed.cmp(&b.seed)));
    let mut text = format!("{METRICS_HEADER}\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.eps,
            r.n,
            r.seed,
            r.clean_acc,
            r.adv_acc,
            r.post_acc,
            r.rel_error.map(|v| v.to_string()).unwrap_or_default(),
            r.ece
        ));
    }
    write_file(&layout.metrics(), &text)?;
    let table = super::report::parse_metrics(&text, &layout.metrics())?;
    let fits = super::report::decay_fits(&table);
    write_file(&layout.fits(), &super::report::fits_csv(&fits, false))?;
    write_file(&layout.fits_abs(), &super::report::fits_csv(&fits, true))?;
    Ok(())
}

/// Runs every stage of `plan` into its output directory and emits the report.
/// `progress` receives one line per completed stage. Jobs run on a pool of
/// `plan.workers` threads (0 picks one per core); results do not depend on it.
pub fn run_experiment(
    plan: &ExperimentPlan,
    opts: &RunOptions,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<PathBuf, HarnessError> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| run_stages(plan, opts, progress))
}

fn run_stages(
    plan: &ExperimentPlan,
    opts: &RunOptions,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<PathBuf, HarnessError> {
    let layout = RunLayout::new(&plan.out_dir);
    std::fs::create_dir_all(&layout.root).map_err(|e| HarnessError::io(&layout.root, e))?;
    write_file(&layout.plan(), &plan.to_text())?;
    let data = load_dataset(plan, opts)?;
    progress(&format!("dataset: {} examples, {} classes", data.len(), data.classes()));
    let classifier = stage_classifier(plan, &data, &layout, opts)?;
    progress(&format!(
        "classifier: test accuracy {}",
        crate::classifier::accuracy(&classifier, &data, Split::Test)?
    ));
    let ebms = stage_ebms(plan, &data, &layout, opts)?;
    progress(&format!("energy models: n = {:?}", plan.ebm.n_sweep));
    stage_attacks(plan, &data, &classifier, &layout)?;
    progress("attacks done");
    stage_defense(plan, &data, &classifier, &ebms, &layout)?;
    progress("defense done");
    stage_evaluate(plan, &layout)?;
    if plan.bpda.enabled {
        stage_bpda(plan, &data, &classifier, &ebms, &layout)?;
        progress("adaptive attack done");
    }
    let summary = super::emit_report(&layout.root)?;
    progress(&format!("report: {} tables written", summary.tables.len()));
    Ok(layout.root)
}
