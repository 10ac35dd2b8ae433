mod common;

use common::*;
use stepp_core::inference::{fit_migration, gof_summaries};
use stepp_core::simulation::{random_seed_wave, simulate_replicates, simulate_trajectory, SeedStream};
use stepp_core::{ModelConfig, ParamVector};

#[test]
fn basic_drift_displacement_matches_expectation() {
    let cfg = ModelConfig::binary(2, 1);
    let delta0 = 0.8;
    let theta: ParamVector<f64> = ParamVector::basic_drift(delta0, vec![0.7], &cfg);
    let seed = random_seed_wave(200, 1.0, &[vec![0.5, 0.5]], &cfg, SeedStream::new(1));
    let panel = simulate_trajectory(&seed, &theta, &cfg, 10, SeedStream::new(2)).unwrap();
    let rows = gof_summaries(&panel);
    let n = rows.iter().map(|r| r.persistent).sum::<usize>() as f64;
    let msd = rows.iter().map(|r| r.mean_sq_displacement.unwrap() * r.persistent as f64).sum::<f64>() / n;
    let var = 1.0 / (2.0 * delta0);
    let expected = 2.0 * var;
    let sd = (2.0 * 2.0_f64).sqrt() * var / n.sqrt();
    assert!((msd - expected).abs() <= 3.0 * sd, "msd {msd} expected {expected} sd {sd}");

    let kept = rows.iter().map(|r| r.persistence[0].unwrap() * r.persistent as f64).sum::<f64>() / n;
    assert!((kept - 0.7).abs() <= 3.0 * (0.21 / n).sqrt(), "persistence {kept}");
}

#[test]
fn full_persistence_and_closed_population() {
    let cfg = recovery_config();
    let mut theta = recovery_theta(&cfg);
    theta.rho = vec![1.0];
    let panel = simulate_trajectory(&recovery_seed_wave(&cfg, SeedStream::new(4)), &theta, &cfg, 5, SeedStream::new(5)).unwrap();
    for r in gof_summaries(&panel) {
        assert_eq!(r.persistence, vec![Some(1.0)]);
        assert_eq!((r.immigrants, r.emigrants), (0, 0));
        assert_eq!(r.actors_before, 50);
        let h = r.homophily[0].unwrap();
        assert!((0.0..=1.0).contains(&h));
    }
}

#[test]
fn migration_estimates_recover_rates() {
    let cfg = ModelConfig::binary(2, 1);
    let mut theta: ParamVector<f64> = ParamVector::basic_drift(1.0, vec![0.8], &cfg);
    theta.migration.emigration_prob = 0.1;
    theta.migration.immigration_rate = 6.0;
    theta.migration.immigrant_covariate_probs = vec![vec![0.25, 0.75]];
    theta.migration.immigrant_position_spread = 0.5;
    let seed = random_seed_wave(60, 1.0, &[vec![0.5, 0.5]], &cfg, SeedStream::new(8));
    let panel = simulate_trajectory(&seed, &theta, &cfg, 40, SeedStream::new(9)).unwrap();
    let m = fit_migration(&panel).unwrap();
    let at_risk: usize = panel.waves[..40].iter().map(|w| w.len()).sum();
    let p_sd = (0.1 * 0.9 / at_risk as f64).sqrt();
    assert!((m.emigration_prob - 0.1).abs() <= 3.0 * p_sd, "{}", m.emigration_prob);
    assert!((m.immigration_rate - 6.0).abs() <= 3.0 * (6.0f64 / 40.0).sqrt(), "{}", m.immigration_rate);
    assert!((m.immigrant_covariate_probs[0][1] - 0.75).abs() < 0.1);
    assert!((m.immigrant_position_spread - 0.5).abs() < 0.1, "{}", m.immigrant_position_spread);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = recovery_config();
    let theta = recovery_theta(&cfg);
    let seed = recovery_seed_wave(&cfg, SeedStream::new(3));
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_replicates(&seed, &theta, &cfg, 3, 4, SeedStream::new(6)).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn replicates_differ_and_are_reproducible() {
    let cfg = recovery_config();
    let theta = recovery_theta(&cfg);
    let seed = recovery_seed_wave(&cfg, SeedStream::new(3));
    let a = simulate_replicates(&seed, &theta, &cfg, 2, 3, SeedStream::new(6)).unwrap();
    assert_ne!(a[0], a[1]);
    assert_eq!(a[2], simulate_trajectory(&seed, &theta, &cfg, 2, SeedStream::new(6).replicate(2)).unwrap());
}
