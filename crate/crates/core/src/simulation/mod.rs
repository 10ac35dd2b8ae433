//! Trajectory simulation: migration, then covariates drawn from their
//! marginal, then positions drawn from the conditional Gaussian.

mod migration;
mod rng;
mod scenario;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use migration::{migration_step, IdAllocator, Immigrant, MigrationOutcome, MigrationProcess};
pub use rng::{SeedStream, StreamRng};
pub use scenario::{run_scenario, Intervention, PrevalenceRow, Scenario, ScenarioReport, Selector};

use crate::error::{Result, SteppError};
use crate::etd::EgoDesign;
use crate::model::{ActorId, ModelConfig, Panel, ParamVector, WaveState};
use crate::scalar::Real;

use migration::sample_categorical;

/// Seed wave of `n` actors with positions `N(0, spread^2 I)` and covariates
/// drawn from `covariate_probs`. Ids are `a000`, `a001`, ...
pub fn random_seed_wave<T: Real>(
    n: usize,
    spread: T,
    covariate_probs: &[Vec<T>],
    cfg: &ModelConfig<T>,
    seeds: SeedStream,
) -> WaveState<T> {
    let width = n.saturating_sub(1).to_string().len().max(3);
    let mut rng = seeds.rng(0, "seed-wave", None);
    let mut wave = WaveState::new(0);
    for i in 0..n {
        let position = (0..cfg.d).map(|_| spread * T::lit(StandardNormal.sample(&mut rng))).collect();
        let covariates = covariate_probs.iter().map(|pmf| sample_categorical(pmf, rng.random::<f64>())).collect();
        wave.insert(format!("a{i:0width$}"), position, covariates);
    }
    wave
}

/// Draws `(x, z)` for one persistent actor from its own stream.
fn sample_actor<T: Real>(
    id: &str,
    prev: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
    seeds: &SeedStream,
    t: u64,
) -> Result<(Vec<T>, Vec<usize>)> {
    let design = EgoDesign::build(id, prev, cfg)?;
    let pmf = design.covariate_pmf(theta, cfg)?;
    let mut rng = seeds.rng(t, "actor", Some(id));
    let pick = sample_categorical(&pmf.probs, rng.random::<f64>());
    let x = pmf.support[pick].clone();
    let g = design.gaussian(&x, theta)?;
    let sd = g.variance.sqrt();
    let z = g.mean.iter().map(|&m| m + sd * T::lit(StandardNormal.sample(&mut rng))).collect();
    Ok((z, x))
}

fn transition<T: Real>(
    prev: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
    seeds: &SeedStream,
    ids: &mut IdAllocator,
) -> Result<WaveState<T>> {
    use migration::MigrationProcess as _;
    let t = prev.t + 1;
    let mut mig_rng = seeds.rng(t, "migration", None);
    let outcome = theta.migration.step(prev, t, ids, &mut mig_rng);

    let survivors: Vec<&ActorId> = outcome.survivors.iter().collect();
    let draws: Vec<(Vec<T>, Vec<usize>)> = survivors
        .par_iter()
        .map(|id| sample_actor(id, prev, theta, cfg, seeds, t))
        .collect::<Result<_>>()?;

    let mut next = WaveState::new(t);
    for (id, (z, x)) in survivors.into_iter().zip(draws) {
        next.insert(id.clone(), z, x);
    }
    for imm in outcome.immigrants {
        next.insert(imm.id, imm.position, imm.covariates);
    }
    Ok(next)
}

fn check_inputs<T: Real>(prev: &WaveState<T>, theta: &ParamVector<T>, cfg: &ModelConfig<T>) -> Result<()> {
    cfg.validate()?;
    theta.validate(cfg)?;
    let probe = Panel::new(cfg.clone(), vec![prev.clone()]);
    if let Some(v) = crate::model::validate_panel(&probe).first() {
        return Err(SteppError::InvalidPanel(v.to_string()));
    }
    Ok(())
}

/// One STEPP transition out of `prev` into wave `prev.t + 1`.
pub fn sample_transition<T: Real>(
    prev: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
    seeds: SeedStream,
) -> Result<WaveState<T>> {
    check_inputs(prev, theta, cfg)?;
    let mut ids = IdAllocator::new(&prev.actors);
    transition(prev, theta, cfg, &seeds, &mut ids)
}

/// Runs `transitions` steps from `seed_wave`; `before_step` may edit each
/// wave (by index) before the next transition is drawn from it.
pub(crate) fn simulate_with<T: Real>(
    seed_wave: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
    transitions: usize,
    seeds: SeedStream,
    mut before_step: impl FnMut(usize, &mut WaveState<T>) -> Result<()>,
) -> Result<Panel<T>> {
    if transitions == 0 {
        return Err(SteppError::InvalidScenario("need at least one transition".into()));
    }
    check_inputs(seed_wave, theta, cfg)?;
    let mut ids = IdAllocator::new(&seed_wave.actors);
    let mut waves = Vec::with_capacity(transitions + 1);
    let mut current = seed_wave.clone();
    for w in 0..transitions {
        before_step(w, &mut current)?;
        let next = transition(&current, theta, cfg, &seeds, &mut ids)?;
        waves.push(std::mem::replace(&mut current, next));
    }
    before_step(transitions, &mut current)?;
    waves.push(current);
    Ok(Panel::new(cfg.clone(), waves))
}

/// Panel of `transitions + 1` waves; wave 0 is `seed_wave` unchanged. Output
/// is a pure function of the inputs and `seeds`.
pub fn simulate_trajectory<T: Real>(
    seed_wave: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
    transitions: usize,
    seeds: SeedStream,
) -> Result<Panel<T>> {
    simulate_with(seed_wave, theta, cfg, transitions, seeds, |_, _| Ok(()))
}

/// Independent replicates `0..replicates`, run in parallel.
pub fn simulate_replicates<T: Real>(
    seed_wave: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
    transitions: usize,
    replicates: usize,
    seeds: SeedStream,
) -> Result<Vec<Panel<T>>> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| simulate_trajectory(seed_wave, theta, cfg, transitions, seeds.replicate(r)))
        .collect()
}

/// Fraction of present actors holding each level, `[m][level]`.
pub fn prevalence<T: Real>(wave: &WaveState<T>, cfg: &ModelConfig<T>) -> Vec<Vec<f64>> {
    let n = wave.len().max(1) as f64;
    let mut counts: Vec<Vec<usize>> = cfg.supports.iter().map(|s| vec![0; s.len()]).collect();
    for id in &wave.actors {
        if let Some(x) = wave.covariates.get(id) {
            for (m, &level) in x.iter().enumerate() {
                counts[m][level] += 1;
            }
        }
    }
    counts.into_iter().map(|c| c.into_iter().map(|v| v as f64 / n).collect()).collect()
}

/// In-degree of every actor in the directed k-nearest-neighbor graph.
pub fn neighbor_in_degree<T: Real>(wave: &WaveState<T>, k: usize) -> Result<BTreeMap<ActorId, usize>> {
    let mut degree: BTreeMap<ActorId, usize> = wave.actors.iter().map(|id| (id.clone(), 0)).collect();
    for (id, z) in &wave.positions {
        let mut pool = wave.positions.clone();
        pool.remove(id);
        for member in crate::geometry::neighbor_set(z, &pool, k)?.members {
            *degree.entry(member).or_default() += 1;
        }
    }
    Ok(degree)
}
