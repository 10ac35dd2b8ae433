//! Shared test helpers: an independent raw-exponent oracle with grid
//! quadrature, random small configurations and the recovery-study regime.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stepp_core::geometry::{atomic_weight, neighbor_set};
use stepp_core::simulation::{random_seed_wave, SeedStream};
use stepp_core::{ForceMode, ModelConfig, ParamVector, WaveState};

pub type Wave = WaveState<f64>;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(weight, target)` pairs of the exponent, built straight from the model
/// definition: neighbor sets over the filtered pools, atomic weights, and
/// reflected targets for repulsion.
pub fn raw_terms(ego: &str, x: &[usize], prev: &Wave, theta: &ParamVector<f64>, cfg: &ModelConfig<f64>) -> Vec<(f64, Vec<f64>)> {
    let zi = prev.positions[ego].clone();
    let mut pool: BTreeMap<String, Vec<f64>> = prev.positions.clone();
    pool.remove(ego);
    let mut terms = vec![(theta.delta0, zi.clone())];
    let weight = |j: &str| atomic_weight(&zi, &prev.positions[j], cfg.c).unwrap();
    for j in neighbor_set(&zi, &pool, cfg.k).unwrap().members {
        terms.push((theta.delta1 * weight(&j), prev.positions[&j].clone()));
    }
    let target = |j: &str, mode: ForceMode| match mode {
        ForceMode::Attraction => prev.positions[j].clone(),
        ForceMode::Repulsion => zi.iter().zip(&prev.positions[j]).map(|(a, b)| 2.0 * a - b).collect(),
    };
    for m in 0..cfg.q() {
        let same: BTreeMap<String, Vec<f64>> =
            pool.iter().filter(|(j, _)| prev.covariates[*j][m] == x[m]).map(|(j, z)| (j.clone(), z.clone())).collect();
        let diff: BTreeMap<String, Vec<f64>> =
            pool.iter().filter(|(j, _)| prev.covariates[*j][m] != x[m]).map(|(j, z)| (j.clone(), z.clone())).collect();
        for j in neighbor_set(&zi, &same, cfg.k).unwrap().members {
            terms.push((theta.homo[m] * weight(&j), target(&j, cfg.homophily[m])));
        }
        for j in neighbor_set(&zi, &diff, cfg.k).unwrap().members {
            terms.push((theta.hetero[m] * weight(&j), target(&j, cfg.heterophily[m])));
        }
    }
    terms
}

pub fn raw_exponent(z: &[f64], terms: &[(f64, Vec<f64>)]) -> f64 {
    terms.iter().map(|(w, mu)| w * sq(z, mu)).sum()
}

pub fn persistence(x: &[usize], prev_x: &[usize], rho: &[f64], cfg: &ModelConfig<f64>) -> f64 {
    x.iter()
        .zip(prev_x)
        .enumerate()
        .map(|(m, (a, b))| if a == b { rho[m] } else { (1.0 - rho[m]) / (cfg.supports[m].len() - 1) as f64 })
        .product()
}

/// `ln of integral exp(-E(z)) dz` by the trapezoid rule on a grid covering the
/// targets with a wide margin. For a Gaussian integrand the rule converges
/// geometrically in the grid step.
pub fn log_integral(terms: &[(f64, Vec<f64>)], d: usize) -> f64 {
    let total: f64 = terms.iter().map(|t| t.0).sum();
    let sigma = (1.0 / (2.0 * total)).sqrt();
    let h = sigma / 6.0;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (w, mu) in terms {
        if *w == 0.0 {
            continue;
        }
        for i in 0..d {
            lo[i] = lo[i].min(mu[i] - 12.0 * sigma);
            hi[i] = hi[i].max(mu[i] + 12.0 * sigma);
        }
    }
    let n: Vec<usize> = (0..d).map(|i| ((hi[i] - lo[i]) / h).ceil() as usize + 1).collect();
    let count: usize = n.iter().product();
    let mut values = Vec::with_capacity(count);
    let mut z = vec![0.0; d];
    for flat in 0..count {
        let mut rem = flat;
        for i in 0..d {
            z[i] = lo[i] + (rem % n[i]) as f64 * h;
            rem /= n[i];
        }
        values.push(-raw_exponent(&z, terms));
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln() + d as f64 * h.ln()
}

pub fn all_candidates(cfg: &ModelConfig<f64>) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for s in &cfg.supports {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| (0..s.len()).map(move |v| [p.clone(), vec![v]].concat()))
            .collect();
    }
    out
}

/// Oracle pmf over [`all_candidates`].
pub fn oracle_pmf(ego: &str, prev: &Wave, theta: &ParamVector<f64>, cfg: &ModelConfig<f64>) -> Vec<f64> {
    let logs: Vec<f64> = all_candidates(cfg)
        .iter()
        .map(|x| persistence(x, &prev.covariates[ego], &theta.rho, cfg).ln() + log_integral(&raw_terms(ego, x, prev, theta, cfg), cfg.d))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    logs.iter().map(|l| (l - max).exp() / norm).collect()
}

/// Oracle joint log density of `(z, x)`.
pub fn oracle_log_density(z: &[f64], x: &[usize], ego: &str, prev: &Wave, theta: &ParamVector<f64>, cfg: &ModelConfig<f64>) -> f64 {
    let pmf = oracle_pmf(ego, prev, theta, cfg);
    let idx = all_candidates(cfg).iter().position(|c| c == x).unwrap();
    let terms = raw_terms(ego, x, prev, theta, cfg);
    pmf[idx].ln() - raw_exponent(z, &terms) - log_integral(&terms, cfg.d)
}

/// Random small configuration: up to 6 actors, `d` and `q` in `{1, 2}`,
/// random supports, modes, `k`, `c` and parameters.
pub fn random_small(rng: &mut ChaCha8Rng) -> (ModelConfig<f64>, Wave, ParamVector<f64>) {
    let d = rng.random_range(1..=2);
    let q = rng.random_range(1..=2);
    let supports = (0..q).map(|_| (0..rng.random_range(2..=3)).map(|v| (v as i64).into()).collect()).collect();
    let mode = |r: &mut ChaCha8Rng| if r.random::<bool>() { ForceMode::Attraction } else { ForceMode::Repulsion };
    let homophily = (0..q).map(|_| mode(rng)).collect();
    let heterophily = (0..q).map(|_| mode(rng)).collect();
    let cfg = ModelConfig::new(d, supports)
        .with_k(rng.random_range(1..=3))
        .with_c(rng.random_range(0.3..=1.0))
        .with_modes(homophily, heterophily);
    let n = rng.random_range(2..=6);
    let mut wave = WaveState::new(0);
    for i in 0..n {
        let z = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let x = cfg.supports.iter().map(|s| rng.random_range(0..s.len())).collect();
        wave.insert(format!("a{i}"), z, x);
    }
    let mut theta = ParamVector::basic_drift(rng.random_range(0.3..2.0), (0..q).map(|_| rng.random_range(0.2..0.95)).collect(), &cfg);
    theta.delta1 = rng.random_range(0.0..1.5);
    theta.homo = (0..q).map(|_| rng.random_range(0.0..1.5)).collect();
    theta.hetero = (0..q).map(|_| rng.random_range(0.0..1.5)).collect();
    (cfg, wave, theta)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Spread of the seed-wave positions in the recovery-study regime.
pub const RECOVERY_SPREAD: f64 = 1.0;

pub fn recovery_config() -> ModelConfig<f64> {
    ModelConfig::binary(2, 1)
}

/// `(delta0, delta1, alpha1, upsilon_tilde1, rho1) = (0.5, 0.5, 1.0, 0.75, 0.8)`.
pub fn recovery_theta(cfg: &ModelConfig<f64>) -> ParamVector<f64> {
    let mut th = ParamVector::basic_drift(0.5, vec![0.8], cfg);
    th.delta1 = 0.5;
    th.homo = vec![1.0];
    th.hetero = vec![0.75];
    th
}

pub fn recovery_seed_wave(cfg: &ModelConfig<f64>, seeds: SeedStream) -> Wave {
    random_seed_wave(50, RECOVERY_SPREAD, &[vec![0.5, 0.5]], cfg, seeds)
}

/// Random orthogonal matrix (possibly a reflection) and translation.
pub fn random_rigid(d: usize, rng: &mut ChaCha8Rng, shift: f64) -> stepp_core::alignment::RigidTransform<f64> {
    let m = nalgebra::DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    stepp_core::alignment::RigidTransform {
        rotation: (0..d * d).map(|i| q[(i / d, i % d)]).collect(),
        translation: (0..d).map(|_| rng.random_range(-shift..shift)).collect(),
    }
}

/// Applies `g` to every position of every wave.
pub fn move_panel(panel: &stepp_core::Panel<f64>, g: &stepp_core::alignment::RigidTransform<f64>) -> stepp_core::Panel<f64> {
    let mut out = panel.clone();
    for w in &mut out.waves {
        for z in w.positions.values_mut() {
            *z = g.apply(z);
        }
    }
    out
}
