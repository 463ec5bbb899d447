//! Acceptance checks, one PASS/FAIL line each. Criteria 6 to 11 share two
//! full desk runs (about four minutes each on one core).

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochsec::adversarial::ThreatSet;
use stochsec::checkpoint::Checkpoint;
use stochsec::classifier::Split;
use stochsec::fpe::{apply_generator, evolve, stable_time_step, DensityField, PeriodicLattice, PotentialField};
use stochsec::gibbs::{sgld_trajectory, Quadratic, SgldConfig};
use stochsec::graph::{finite_diff_check, Network};
use stochsec::harness::{
    fpe_check, load_dataset, parse_cifar10, read_csv_table, run_experiment, serialize_cifar10, CsvTable,
    ExperimentPlan, FpeCheckConfig, RunLayout, RunOptions, CIFAR_RECORD_LEN,
};
use stochsec::metrics::{ece, fit_decay, project_full_purification, spearman, Projection};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: u64, detail: String) -> Outcome {
    check(
        elapsed.as_secs() < limit_s,
        format!("{detail}; {:.1}s (limit {limit_s}s)", elapsed.as_secs_f64()),
    )
}

fn timed<F: FnOnce() -> Outcome>(limit_s: u64, f: F) -> Outcome {
    let start = Instant::now();
    let detail = f()?;
    within(start.elapsed(), limit_s, detail)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn gradients() -> Outcome {
    timed(60, || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst: f64 = 0.0;
        for trial in 0..20 {
            let spec = common::random_spec(&mut rng);
            let outputs = spec.output_len().map_err(|e| e.to_string())?;
            let net = Network::<f64>::build(spec, trial).map_err(|e| e.to_string())?;
            let x: Vec<f64> = (0..net.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cot: Vec<f64> = (0..outputs).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = finite_diff_check(&net, &x, 1e-5, Some(&cot)).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_rel_error);
        }
        check(worst < 1e-5, format!("max relative error {worst:.2e} over 20 networks"))
    })
}

fn sgld_stationarity() -> Outcome {
    timed(120, || {
        let energy = Quadratic::new(vec![0.0], 1.0);
        let (burn, thin, samples) = (2000, 200, 100_000);
        let cfg = SgldConfig::new(burn + thin * samples, 0.01, 0.01).unclamped();
        let mut kept = Vec::with_capacity(samples);
        sgld_trajectory(&energy, &[0.0], &cfg, &mut ChaCha8Rng::seed_from_u64(17), |step, x| {
            if step > burn && (step - burn) % thin == 0 {
                kept.push(x[0]);
            }
        })
        .map_err(|e| e.to_string())?;
        let n = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / n;
        let var = kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let rho = kept.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / ((n - 1.0) * var);
        let se = (var / n * (1.0 + rho) / (1.0 - rho)).sqrt();
        let rel = (var / 0.005 - 1.0).abs();
        check(
            rel < 0.05 && mean.abs() < 3.0 * se,
            format!(
                "variance {var:.6} ({:.2}% off 0.005), mean {mean:.2e} ({:.2} SE)",
                rel * 100.0,
                mean.abs() / se
            ),
        )
    })
}

fn spectral_generator() -> Outcome {
    timed(10, || {
        let lattice = PeriodicLattice::<f64>::torus(1, 64).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (mut worst_gibbs, mut worst_mass): (f64, f64) = (0.0, 0.0);
        for _ in 0..5 {
            let modes: Vec<(f64, f64, f64)> = (1..=4)
                .map(|k| (k as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let potential = PotentialField::from_fn(lattice.clone(), |x| {
                modes
                    .iter()
                    .map(|(k, a, b)| a * (k * x[0]).cos() + b * (k * x[0]).sin())
                    .sum()
            })
            .map_err(|e| e.to_string())?;
            let gibbs = DensityField::gibbs(&potential);
            let lg = apply_generator(&potential, gibbs.values()).map_err(|e| e.to_string())?;
            worst_gibbs = worst_gibbs.max(max_abs(&lg) / max_abs(gibbs.values()));
            let u: Vec<f64> = (0..lattice.len()).map(|_| rng.random_range(0.0..1.0)).collect();
            let lu = apply_generator(&potential, &u).map_err(|e| e.to_string())?;
            let mass = lu.iter().sum::<f64>() * lattice.cell_volume();
            worst_mass = worst_mass.max(mass.abs() / max_abs(&lu));
        }
        check(
            worst_gibbs < 1e-10 && worst_mass < 1e-10,
            format!("|L gibbs|/|gibbs| {worst_gibbs:.2e}, mass of L u {worst_mass:.2e}"),
        )
    })
}

fn fpe_convergence() -> Outcome {
    timed(60, || {
        let lattice = PeriodicLattice::<f64>::torus(1, 64).map_err(|e| e.to_string())?;
        let potential = PotentialField::from_fn(lattice.clone(), |x| 2.0 * x[0].cos()).map_err(|e| e.to_string())?;
        let weights: Vec<f64> = (0..lattice.len())
            .map(|j| (-2.0 * lattice.coordinate(j).cos()).exp())
            .collect();
        let z = weights.iter().sum::<f64>() * lattice.cell_volume();
        let exact = DensityField::normalized(lattice.clone(), weights.iter().map(|w| w / z).collect())
            .map_err(|e| e.to_string())?;
        let dt = stable_time_step(&potential).map_err(|e| e.to_string())?;
        let out = evolve(&DensityField::uniform(lattice), &potential, 25.0, dt).map_err(|e| e.to_string())?;
        let l2 = out.density.l2_distance(&exact);
        check(l2 < 1e-4, format!("L2 to Gibbs {l2:.2e} after {} steps", out.steps))
    })
}

fn sampler_bridge() -> Outcome {
    timed(300, || {
        let out = fpe_check(&FpeCheckConfig {
            chains: 100_000,
            ..FpeCheckConfig::default()
        })
        .map_err(|e| e.to_string())?;
        check(
            out.total_variation < 0.05,
            format!("TV {:.4} with 100000 chains", out.total_variation),
        )
    })
}

/// Per-seed metrics rows of one desk run.
struct Metrics {
    eps: Vec<f64>,
    n: Vec<f64>,
    clean: Vec<f64>,
    adv: Vec<f64>,
    post: Vec<f64>,
    ece: Vec<f64>,
}

impl Metrics {
    fn read(dir: &Path) -> Result<Self, String> {
        let t = read_csv_table(&RunLayout::new(dir).metrics()).map_err(|e| e.to_string())?;
        let col = |name: &str| t.required(name).map_err(|e| e.to_string());
        Ok(Self {
            eps: col("eps")?,
            n: col("n")?,
            clean: col("clean_acc")?,
            adv: col("adv_acc")?,
            post: col("post_acc")?,
            ece: col("ece")?,
        })
    }

    fn mean_where(&self, values: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
        let picked: Vec<f64> = (0..values.len()).filter(|&i| keep(i)).map(|i| values[i]).collect();
        picked.iter().sum::<f64>() / picked.len() as f64
    }

    fn is_eps(&self, i: usize, k: f64) -> bool {
        (self.eps[i] - k / 255.0).abs() < 1e-12
    }

    /// Spearman correlation of `f`'s seed mean with n at eps = k/255.
    fn trend(&self, k: f64, ns: &[usize], f: &[f64]) -> Option<f64> {
        let means: Vec<f64> = ns
            .iter()
            .map(|&n| self.mean_where(f, |i| self.is_eps(i, k) && self.n[i] == n as f64))
            .collect();
        let nf: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
        spearman(&nf, &means)
    }
}

fn attack_potency(plan: &ExperimentPlan, dir: &Path, m: &Metrics) -> Outcome {
    let data = load_dataset(plan, &RunOptions::default()).map_err(|e| e.to_string())?;
    let layout = RunLayout::new(dir);
    let mut audited = 0;
    for &seed in &plan.seeds {
        let ck = Checkpoint::load(&layout.adversarial(seed)).map_err(|e| e.to_string())?;
        let ids = ck.get("meta.image_ids").map_err(|e| e.to_string())?.values().to_vec();
        for (k, eps255) in plan.attack.eps_255.iter().enumerate() {
            let adv = ck.get(&format!("adv.eps{k}")).map_err(|e| e.to_string())?;
            let dim = adv.shape()[1];
            for (row, id) in adv.values().chunks(dim).zip(&ids) {
                let set = ThreatSet::new(&data.inputs()[*id as usize], eps255 / 255.0);
                if let Some(c) = set.violation(row) {
                    return Err(format!(
                        "seed {seed}, eps {eps255}/255, image {id}: coordinate {c} outside S"
                    ));
                }
                audited += 1;
            }
        }
    }
    let clean = m.mean_where(&m.clean, |i| m.is_eps(i, 8.0));
    let adv = m.mean_where(&m.adv, |i| m.is_eps(i, 8.0));
    check(
        adv <= 0.3 * clean,
        format!(
            "{audited} adversarial outputs in S; accuracy at 8/255 {adv:.3} vs clean {clean:.3} ({:.0}%)",
            100.0 * adv / clean
        ),
    )
}

fn purification_trend(plan: &ExperimentPlan, m: &Metrics, elapsed: Duration) -> Outcome {
    let ns = &plan.ebm.n_sweep;
    let mut rhos = Vec::new();
    for k in [2.0, 4.0, 8.0] {
        let error: Vec<f64> = m.post.iter().map(|p| 1.0 - p).collect();
        rhos.push(
            m.trend(k, ns, &error)
                .ok_or_else(|| format!("eps {k}/255: error constant in n"))?,
        );
    }
    let rho = rhos.iter().sum::<f64>() / rhos.len() as f64;
    let n_max = *ns.iter().max().unwrap() as f64;
    let clean = m.mean_where(&m.clean, |i| m.is_eps(i, 2.0));
    let post = m.mean_where(&m.post, |i| m.is_eps(i, 2.0) && m.n[i] == n_max);
    let detail = format!(
        "mean spearman(n, error) {rho:.3} {rhos:.3?}; eps 2/255 at n={n_max}: {post:.3} = {:.0}% of clean",
        100.0 * post / clean
    );
    let ok = rho <= -0.8 && post >= 0.7 * clean;
    within(elapsed, 7200, check(ok, detail)?)
}

fn calibration_trend(plan: &ExperimentPlan, m: &Metrics) -> Outcome {
    let mut rhos = Vec::new();
    for k in [2.0, 4.0, 8.0] {
        rhos.push(
            m.trend(k, &plan.ebm.n_sweep, &m.ece)
                .ok_or_else(|| format!("eps {k}/255: ECE constant in n"))?,
        );
    }
    let rho = rhos.iter().sum::<f64>() / rhos.len() as f64;
    // 20 bins of width 0.05: {0.05}, {0.55, 0.56}, {0.95}.
    let hand = ece(&[0.05, 0.55, 0.56, 0.95], &[false, true, false, true], 20).map_err(|e| e.to_string())?;
    let expected = 0.25 * 0.05 + 0.5 * (0.555 - 0.5) + 0.25 * 0.05;
    let hand_err = (hand - expected).abs();
    check(
        rho <= -0.6 && hand_err < 1e-12,
        format!("mean spearman(n, ECE) {rho:.3} {rhos:.3?}; hand case error {hand_err:.1e}"),
    )
}

fn projection(plan: &ExperimentPlan, dir: &Path) -> Outcome {
    let (a, b) = (4.0f64.ln(), -0.01);
    let ns = [5.0, 10.0, 20.0, 40.0];
    let errors: Vec<f64> = ns.iter().map(|n| (a + b * n).exp()).collect();
    let fit = fit_decay(&ns, &errors).map_err(|e| e.to_string())?;
    let fit_err = (fit.slope - b).abs().max((fit.intercept - a).abs());
    let inverted = project_full_purification(&fit) == Projection::Steps((-a / b).round() as u64);

    let t: CsvTable = read_csv_table(&dir.join("table_projection.csv")).map_err(|e| e.to_string())?;
    let eps = t.required("eps").map_err(|e| e.to_string())?;
    let mut expected: Vec<f64> = plan.attack.eps_255.iter().map(|k| k / 255.0).collect();
    expected.dedup();
    let n_star: Vec<&str> = t.rows.iter().map(|r| r[t.column("n_star").unwrap()].as_str()).collect();
    check(
        fit_err < 1e-12 && inverted && eps == expected,
        format!(
            "synthetic fit error {fit_err:.1e}, exact n* {inverted}; desk projection rows {} with n* {n_star:?}",
            eps.len()
        ),
    )
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .map(|d| d.filter_map(Result::ok).map(|e| e.path()).collect::<Vec<_>>())
        .unwrap_or_default()
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap_or_default(),
            )
        })
        .collect();
    out.sort();
    out
}

fn reproducibility(a: &Path, b: &Path) -> Outcome {
    let (fa, fb) = (csv_bytes(a), csv_bytes(b));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let mut bytes = Vec::with_capacity(2 * CIFAR_RECORD_LEN);
    for r in 0..2u8 {
        bytes.push(r * 7);
        bytes.extend((0..3072u32).map(|i| ((i * 31 + u32::from(r)) % 256) as u8));
    }
    let parsed = parse_cifar10(&bytes, Split::Train).map_err(|e| e.to_string())?;
    let round_trip = serialize_cifar10(&parsed).map_err(|e| e.to_string())? == bytes;
    check(
        !fa.is_empty() && fa.len() == fb.len() && differing.is_empty() && round_trip,
        format!(
            "{} CSVs compared, differing {differing:?}; CIFAR fixture round trip {round_trip}",
            fa.len()
        ),
    )
}

fn bpda_degradation(dir: &Path) -> Outcome {
    let t = read_csv_table(&RunLayout::new(dir).bpda_summary()).map_err(|e| e.to_string())?;
    let col = |name: &str| t.required(name).map_err(|e| e.to_string());
    let (n, seed, pgd, bpda) = (col("n")?, col("seed")?, col("pgd_post_acc")?, col("bpda_post_acc")?);
    let mut seeds = seed.clone();
    seeds.dedup();
    let mut wins = 0;
    let mut lines = Vec::new();
    for s in &seeds {
        let rows: Vec<usize> = (0..n.len()).filter(|&i| seed[i] == *s).collect();
        let lo = *rows.iter().min_by(|&&a, &&b| n[a].total_cmp(&n[b])).unwrap();
        let hi = *rows.iter().max_by(|&&a, &&b| n[a].total_cmp(&n[b])).unwrap();
        let below = rows.iter().all(|&i| bpda[i] < pgd[i]);
        let ordered = bpda[hi] > bpda[lo];
        wins += usize::from(below && ordered);
        lines.push(format!(
            "seed {s}: n={} {:.3}/{:.3}, n={} {:.3}/{:.3}",
            n[lo], bpda[lo], pgd[lo], n[hi], bpda[hi], pgd[hi]
        ));
    }
    check(
        2 * wins > seeds.len(),
        format!(
            "{wins}/{} seeds (bpda/pgd post accuracy) {}",
            seeds.len(),
            lines.join("; ")
        ),
    )
}

fn desk_run(out: &Path, workers: usize) -> Result<(ExperimentPlan, Duration), String> {
    let mut plan = ExperimentPlan::desk();
    plan.out_dir = out.to_path_buf();
    plan.workers = workers;
    let start = Instant::now();
    run_experiment(&plan, &RunOptions::default(), &|line: &str| {
        eprintln!("  [{}] {line}", out.display())
    })
    .map_err(|e| e.to_string())?;
    Ok((plan, start.elapsed()))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {id:>2} {name}: {detail}");
    };
    report(1, "gradient correctness", gradients());
    report(2, "SGLD stationarity", sgld_stationarity());
    report(3, "spectral generator", spectral_generator());
    report(4, "FPE convergence", fpe_convergence());
    report(5, "sampler-solver bridge", sampler_bridge());

    let first = tempfile::tempdir().expect("temp dir");
    let second = tempfile::tempdir().expect("temp dir");
    let runs = desk_run(first.path(), 0).and_then(|a| desk_run(second.path(), 2).map(|b| (a, b)));
    match runs.and_then(|r| Metrics::read(first.path()).map(|m| (r, m))) {
        Ok((((plan, elapsed), _), m)) => {
            let dir = first.path();
            report(6, "attack feasibility and potency", attack_potency(&plan, dir, &m));
            report(7, "purification trend", purification_trend(&plan, &m, elapsed));
            report(8, "calibration trend", calibration_trend(&plan, &m));
            report(9, "regression and projection", projection(&plan, dir));
            report(10, "reproducibility", reproducibility(dir, second.path()));
            report(11, "BPDA+EOT degradation", bpda_degradation(dir));
        }
        Err(e) => {
            for (id, name) in [
                (6, "attack feasibility and potency"),
                (7, "purification trend"),
                (8, "calibration trend"),
                (9, "regression and projection"),
                (10, "reproducibility"),
                (11, "BPDA+EOT degradation"),
            ] {
                report(id, name, Err(format!("desk run failed: {e}")));
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
