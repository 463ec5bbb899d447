use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use stochsec::harness::{
    emit_report, fpe_check, load_dataset, run_experiment, stage_attacks, stage_bpda, stage_classifier, stage_defense,
    stage_ebms, stage_evaluate, ExperimentPlan, FpeCheckConfig, RunLayout, RunOptions, DATA_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "stochsec", version, about = "Energy-based purification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    PaperCifar10,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::PaperCifar10 => "paper-cifar10",
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Plan file (`key = value` lines with `[section]` headers).
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Built-in plan used when no plan file is given.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Overrides the plan's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the plan's.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Load checkpoints from the output directory instead of training.
    #[arg(long)]
    no_train: bool,
    /// Dataset root for file-backed datasets.
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
}

impl PlanArgs {
    fn load(&self) -> Result<(ExperimentPlan, RunOptions)> {
        let mut plan = match &self.plan {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentPlan::parse(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentPlan::preset(self.preset.name())?,
        };
        if let Some(seed) = self.seed {
            plan.master_seed = seed;
        }
        if let Some(w) = self.workers {
            plan.workers = w;
        }
        if let Some(out) = &self.out {
            plan.out_dir = out.clone();
        }
        plan.validate()?;
        let opts = RunOptions {
            no_train: self.no_train,
            data_dir: self.data_dir.clone(),
        };
        Ok((plan, opts))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the classifier.
    TrainClf(PlanArgs),
    /// Train one energy model per Langevin budget in the sweep.
    TrainEbm(PlanArgs),
    /// Generate PGD adversarial examples with the trained classifier.
    Attack(PlanArgs),
    /// Purify the stored adversarial examples with every energy model.
    Defend {
        #[command(flatten)]
        plan: PlanArgs,
        /// Also run the adaptive BPDA+EOT attack.
        #[arg(long)]
        bpda: bool,
    },
    /// Aggregate the attack reports into metrics.csv and decay fits.
    Evaluate(PlanArgs),
    /// Compare Langevin chains with the Fokker-Planck stationary density.
    FpeCheck {
        /// Output CSV file.
        #[arg(long, default_value = "fpe_check.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long, default_value_t = 20_000)]
        chains: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Write summary tables for a run directory.
    Report {
        /// Run directory.
        dir: PathBuf,
    },
    /// Run the whole plan and emit the report.
    Run(PlanArgs),
}

fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(f))
}

fn staged(args: &PlanArgs, no_train: bool) -> Result<(ExperimentPlan, RunOptions, RunLayout)> {
    let (plan, mut opts) = args.load()?;
    opts.no_train |= no_train;
    let layout = RunLayout::new(&plan.out_dir);
    std::fs::create_dir_all(&layout.root)?;
    std::fs::write(layout.plan(), plan.to_text())?;
    Ok((plan, opts, layout))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::TrainClf(args) => {
            let (plan, opts, layout) = staged(&args, false)?;
            with_pool(plan.workers, || -> Result<()> {
                let data = load_dataset(&plan, &opts)?;
                stage_classifier(&plan, &data, &layout, &opts)?;
                Ok(())
            })??;
            eprintln!("wrote {}", layout.classifier().display());
        }
        Command::TrainEbm(args) => {
            let (plan, opts, layout) = staged(&args, false)?;
            with_pool(plan.workers, || -> Result<()> {
                let data = load_dataset(&plan, &opts)?;
                stage_ebms(&plan, &data, &layout, &opts)?;
                Ok(())
            })??;
            eprintln!("wrote energy models for n = {:?}", plan.ebm.n_sweep);
        }
        Command::Attack(args) => {
            let (plan, opts, layout) = staged(&args, true)?;
            with_pool(plan.workers, || -> Result<()> {
                let data = load_dataset(&plan, &opts)?;
                let clf = stage_classifier(&plan, &data, &layout, &opts)?;
                stage_attacks(&plan, &data, &clf, &layout)?;
                Ok(())
            })??;
            eprintln!("wrote adversarial examples to {}", layout.root.display());
        }
        Command::Defend { plan: args, bpda } => {
            let (plan, opts, layout) = staged(&args, true)?;
            with_pool(plan.workers, || -> Result<()> {
                let data = load_dataset(&plan, &opts)?;
                let clf = stage_classifier(&plan, &data, &layout, &opts)?;
                let ebms = stage_ebms(&plan, &data, &layout, &opts)?;
                stage_defense(&plan, &data, &clf, &ebms, &layout)?;
                if bpda {
                    stage_bpda(&plan, &data, &clf, &ebms, &layout)?;
                }
                Ok(())
            })??;
            eprintln!("wrote attack reports to {}", layout.root.display());
        }
        Command::Evaluate(args) => {
            let (plan, _, layout) = staged(&args, true)?;
            stage_evaluate(&plan, &layout)?;
            eprintln!("wrote {} and {}", layout.metrics().display(), layout.fits().display());
        }
        Command::FpeCheck {
            out,
            points,
            chains,
            seed,
        } => {
            let cfg = FpeCheckConfig {
                points,
                chains,
                seed,
                ..FpeCheckConfig::default()
            };
            let outcome = fpe_check(&cfg)?;
            std::fs::write(&out, &outcome.csv).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "total variation {:.5}, solver L2 error {:.3e}",
                outcome.total_variation, outcome.solver_l2
            );
        }
        Command::Report { dir } => {
            let summary = emit_report(&dir)?;
            for t in &summary.tables {
                println!("{}", t.display());
            }
        }
        Command::Run(args) => {
            let (plan, opts) = args.load()?;
            let dir = run_experiment(&plan, &opts, &|line: &str| eprintln!("{line}"))?;
            println!("{}", dir.display());
        }
    }
    Ok(())
}
