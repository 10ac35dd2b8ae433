mod common;

use common::*;
use proptest::prelude::*;
use stepp_core::etd::{covariate_marginal, ego_log_density};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginal_matches_quadrature(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cfg, wave, theta) = random_small(&mut r);
        for ego in wave.actors.clone() {
            let pmf = covariate_marginal(&ego, &wave, &theta, &cfg).unwrap();
            for (x, want) in all_candidates(&cfg).iter().zip(oracle_pmf(&ego, &wave, &theta, &cfg)) {
                let got = pmf.prob(x).unwrap();
                prop_assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn density_matches_quadrature(seed in any::<u64>(), dz in prop::collection::vec(-2.0f64..2.0, 2)) {
        let mut r = rng(seed);
        let (cfg, wave, theta) = random_small(&mut r);
        let ego = wave.actors.iter().next().unwrap().clone();
        let z: Vec<f64> = wave.positions[&ego].iter().zip(&dz).map(|(a, b)| a + b).collect();
        for x in all_candidates(&cfg) {
            let got = ego_log_density(&z, &x, &ego, &wave, &theta, &cfg).unwrap();
            let want = oracle_log_density(&z, &x, &ego, &wave, &theta, &cfg);
            prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn marginal_sums_to_one(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cfg, wave, theta) = random_small(&mut r);
        let ego = wave.actors.iter().next().unwrap().clone();
        let total: f64 = covariate_marginal(&ego, &wave, &theta, &cfg).unwrap().probs.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_equivariant_under_rigid_motion(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cfg, wave, theta) = random_small(&mut r);
        let g = random_rigid(cfg.d, &mut r, 4.0);
        let mut moved = wave.clone();
        for z in moved.positions.values_mut() {
            *z = g.apply(z);
        }
        let ego = wave.actors.iter().next().unwrap().clone();
        let z: Vec<f64> = wave.positions[&ego].iter().map(|v| v + 0.3).collect();
        let x = wave.covariates[&ego].clone();
        let a = ego_log_density(&z, &x, &ego, &wave, &theta, &cfg).unwrap();
        let b = ego_log_density(&g.apply(&z), &x, &ego, &moved, &theta, &cfg).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn f32_agrees_with_f64() {
    let mut r = rng(3);
    let (cfg, wave, theta) = random_small(&mut r);
    let ego = wave.actors.iter().next().unwrap().clone();
    let cfg32 = stepp_core::ModelConfig::<f32> {
        d: cfg.d,
        supports: cfg.supports.clone(),
        k: cfg.k,
        c: cfg.c as f32,
        homophily: cfg.homophily.clone(),
        heterophily: cfg.heterophily.clone(),
    };
    let mut wave32 = stepp_core::WaveState::<f32>::new(0);
    for id in &wave.actors {
        wave32.insert(id.clone(), wave.positions[id].iter().map(|&v| v as f32).collect(), wave.covariates[id].clone());
    }
    let theta32 = stepp_core::ParamVector::<f32> {
        delta0: theta.delta0 as f32,
        delta1: theta.delta1 as f32,
        rho: theta.rho.iter().map(|&v| v as f32).collect(),
        homo: theta.homo.iter().map(|&v| v as f32).collect(),
        hetero: theta.hetero.iter().map(|&v| v as f32).collect(),
        migration: stepp_core::MigrationParams::closed(&cfg32),
    };
    let a = covariate_marginal(&ego, &wave, &theta, &cfg).unwrap();
    let b = covariate_marginal(&ego, &wave32, &theta32, &cfg32).unwrap();
    for (p, q) in a.probs.iter().zip(&b.probs) {
        assert!((p - *q as f64).abs() < 1e-4, "{p} vs {q}");
    }
}
