use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochsec::fpe::{
    apply_generator, compare_sampler, evolve, periodize_arccos, stable_time_step, CompareConfig, DensityField,
    PeriodicLattice, PotentialField,
};
use stochsec::gibbs::{FnEnergy, SgldConfig};
use stochsec::harness::{fpe_check, FpeCheckConfig};

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Trigonometric polynomial with up to four random modes.
fn random_potential(lattice: &PeriodicLattice<f64>, rng: &mut ChaCha8Rng) -> PotentialField<f64> {
    let modes: Vec<(f64, f64, f64)> = (1..=4)
        .map(|k| (k as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    PotentialField::from_fn(lattice.clone(), |x| {
        modes
            .iter()
            .map(|(k, a, b)| a * (k * x[0]).cos() + b * (k * x[0]).sin())
            .sum()
    })
    .unwrap()
}

#[test]
fn generator_annihilates_gibbs_and_conserves_mass() {
    let lattice = PeriodicLattice::<f64>::torus(1, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let potential = random_potential(&lattice, &mut rng);
        let gibbs = DensityField::gibbs(&potential);
        let residual = apply_generator(&potential, gibbs.values()).unwrap();
        assert!(max_abs(&residual) / max_abs(gibbs.values()) < 1e-10);

        let u: Vec<f64> = (0..lattice.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let lu = apply_generator(&potential, &u).unwrap();
        let mass: f64 = lu.iter().sum::<f64>() * lattice.cell_volume();
        assert!(mass.abs() / max_abs(&lu) < 1e-10, "mass drift {mass}");
    }
}

#[test]
fn cosine_potential_relaxes_to_gibbs() {
    let lattice = PeriodicLattice::<f64>::torus(1, 64).unwrap();
    let potential = PotentialField::from_fn(lattice.clone(), |x| 2.0 * x[0].cos()).unwrap();
    // Brute-force Gibbs density: exp(-E) normalized by the lattice sum.
    let weights: Vec<f64> = (0..lattice.len())
        .map(|j| (-2.0 * lattice.coordinate(j).cos()).exp())
        .collect();
    let z: f64 = weights.iter().sum::<f64>() * lattice.cell_volume();
    let exact = DensityField::normalized(lattice.clone(), weights.iter().map(|w| w / z).collect()).unwrap();

    let dt = stable_time_step(&potential).unwrap();
    let out = evolve(&DensityField::uniform(lattice), &potential, 25.0, dt).unwrap();
    let l2 = out.density.l2_distance(&exact);
    assert!(l2 < 1e-4, "L2 distance {l2}");
}

#[test]
fn langevin_histogram_matches_stationary_density() {
    // The default check's potential: E(x) = 1.5 x - x^2 lifted by x = cos(phi).
    let outcome = fpe_check(&FpeCheckConfig {
        chains: 100_000,
        ..FpeCheckConfig::default()
    })
    .unwrap();
    assert!(outcome.total_variation < 0.05, "TV {}", outcome.total_variation);
    assert!(outcome.solver_l2 < 1e-4);
    assert_eq!(outcome.csv.lines().count(), 65);
}

#[test]
fn sampler_bridge_detects_a_wrong_temperature() {
    let lattice = PeriodicLattice::<f64>::torus(1, 32).unwrap();
    let energy = FnEnergy::new(1, |x: &[f64], g: &mut [f64]| {
        g[0] = 2.0;
        2.0 * x[0]
    });
    let sgld = SgldConfig::new(1500, 0.005, 0.1);
    // Chains sample beta = 1; the reference below is built at beta = 3.
    let potential = periodize_arccos(&lattice, |x| 2.0 * x[0]).unwrap().scaled(3.0);
    let cmp = compare_sampler(
        &energy,
        &potential,
        &CompareConfig {
            chains: 20_000,
            sgld,
            relax_time: 20.0,
            seed: 1,
        },
    )
    .unwrap();
    assert!(cmp.total_variation > 0.1, "TV {}", cmp.total_variation);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lifted_potentials_are_even(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, c3 in -1.0f64..1.0) {
        let lattice = PeriodicLattice::<f64>::torus(1, 32).unwrap();
        let p = periodize_arccos(&lattice, |x| c1 * x[0] + c2 * x[0] * x[0] + c3 * x[0].powi(3)).unwrap();
        let v = p.values();
        for j in 1..32 {
            prop_assert_eq!(v[j], v[32 - j]);
        }
    }

    #[test]
    fn gibbs_density_has_unit_mass(amp in 0.0f64..3.0, k in 1usize..5) {
        let lattice = PeriodicLattice::<f64>::torus(1, 64).unwrap();
        let p = PotentialField::from_fn(lattice, |x| amp * (k as f64 * x[0]).sin()).unwrap();
        prop_assert!((DensityField::gibbs(&p).mass() - 1.0).abs() < 1e-12);
    }
}
