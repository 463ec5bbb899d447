use super::HarnessError;
use crate::fpe::{compare_sampler, periodize_arccos, CompareConfig, DensityField, PeriodicLattice};
use crate::gibbs::{FnEnergy, SgldConfig};

/// Settings for the sampler-versus-solver check on the polynomial energy
/// `E(x) = sum_k coefficients[k] x^(k+1)` over `[-1, 1]`, lifted to the
/// circle by `x = cos phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpeCheckConfig {
    pub points: usize,
    pub coefficients: Vec<f64>,
    pub chains: usize,
    pub sgld_steps: usize,
    pub step_size: f64,
    pub noise: f64,
    pub relax_time: f64,
    pub seed: u64,
}

impl Default for FpeCheckConfig {
    fn default() -> Self {
        Self {
            points: 64,
            coefficients: vec![1.5, -1.0],
            chains: 20_000,
            sgld_steps: 2000,
            step_size: 0.005,
            noise: 0.1,
            relax_time: 20.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpeCheckOutcome {
    /// `point,exact_density,evolved_density,sgld_histogram`, one row per
    /// lattice point; all three columns are densities on the circle.
    pub csv: String,
    pub total_variation: f64,
    /// L2 distance between the evolved and the exact stationary density.
    pub solver_l2: f64,
}

fn polynomial(coefficients: &[f64], x: f64) -> (f64, f64) {
    let mut e = 0.0;
    let mut de = 0.0;
    let mut pow = 1.0;
    for (k, c) in coefficients.iter().enumerate() {
        de += c * (k + 1) as f64 * pow;
        pow *= x;
        e += c * pow;
    }
    (e, de)
}

/// Evolves the Fokker-Planck equation of the lifted potential to stationarity,
/// runs Langevin chains on the same potential and tabulates both next to the
/// exact Gibbs density.
pub fn fpe_check(cfg: &FpeCheckConfig) -> Result<FpeCheckOutcome, HarnessError> {
    let sgld = SgldConfig::new(cfg.sgld_steps, cfg.step_size, cfg.noise);
    let beta = sgld.implied_beta().ok_or_else(|| HarnessError::Plan {
        line: 0,
        reason: "fpe check needs a positive noise scale".into(),
    })?;
    let lattice = PeriodicLattice::<f64>::torus(1, cfg.points)?;
    let coefficients = cfg.coefficients.clone();
    let potential = periodize_arccos(&lattice, |x| polynomial(&coefficients, x[0]).0)?.scaled(beta);
    let energy = FnEnergy::new(1, move |x: &[f64], g: &mut [f64]| {
        let (e, de) = polynomial(&cfg.coefficients, x[0]);
        g[0] = de;
        e
    });
    let cmp = compare_sampler(
        &energy,
        &potential,
        &CompareConfig {
            chains: cfg.chains,
            sgld,
            relax_time: cfg.relax_time,
            seed: cfg.seed,
        },
    )?;
    let exact = DensityField::gibbs(&potential);
    let h = lattice.cell_volume();
    let mut csv = String::from("point,exact_density,evolved_density,sgld_histogram\n");
    for j in 0..lattice.len() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            lattice.coordinate(j),
            exact.values()[j],
            cmp.stationary.values()[j],
            cmp.histogram[j] / h
        ));
    }
    Ok(FpeCheckOutcome {
        csv,
        total_variation: cmp.total_variation,
        solver_l2: cmp.stationary.l2_distance(&exact),
    })
}
