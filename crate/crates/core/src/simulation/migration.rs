//! Exogenous entry and exit of actors.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::model::{ActorId, MigrationParams, WaveState};
use crate::scalar::Real;

use super::rng::StreamRng;

#[derive(Clone, Debug, PartialEq)]
pub struct Immigrant<T> {
    pub id: ActorId,
    pub position: Vec<T>,
    pub covariates: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MigrationOutcome<T> {
    pub survivors: BTreeSet<ActorId>,
    pub immigrants: Vec<Immigrant<T>>,
}

/// Hands out actor ids never seen before in a panel.
#[derive(Clone, Debug, Default)]
pub struct IdAllocator {
    used: BTreeSet<ActorId>,
}

impl IdAllocator {
    pub fn new<'a>(seen: impl IntoIterator<Item = &'a ActorId>) -> Self {
        Self { used: seen.into_iter().cloned().collect() }
    }

    pub fn observe<'a>(&mut self, ids: impl IntoIterator<Item = &'a ActorId>) {
        self.used.extend(ids.into_iter().cloned());
    }

    pub fn fresh(&mut self, t: u64) -> ActorId {
        let mut n = 0usize;
        loop {
            let id = format!("m{t}_{n}");
            if self.used.insert(id.clone()) {
                return id;
            }
            n += 1;
        }
    }
}

/// An exogenous model for which actors are present at each wave.
pub trait MigrationProcess<T: Real> {
    /// Draws survivors of `prev` and the entrants of wave `t`.
    fn step(&self, prev: &WaveState<T>, t: u64, ids: &mut IdAllocator, rng: &mut StreamRng) -> MigrationOutcome<T>;

    /// Log probability of the actor-set change from `prev` to `next`.
    fn log_prob(&self, prev: &WaveState<T>, next: &WaveState<T>) -> T;
}

pub(crate) fn sample_categorical<T: Real>(probs: &[T], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last_positive = i;
            cum += p;
            if u < cum {
                return i;
            }
        }
    }
    last_positive
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Binomial emigration with Poisson immigration. Entrants are placed
/// isotropically around the survivor centroid and draw covariates from the
/// declared per-covariate pmfs.
impl<T: Real> MigrationProcess<T> for MigrationParams<T> {
    fn step(&self, prev: &WaveState<T>, t: u64, ids: &mut IdAllocator, rng: &mut StreamRng) -> MigrationOutcome<T> {
        let stay = 1.0 - self.emigration_prob.as_f64();
        let survivors: BTreeSet<ActorId> = prev.actors.iter().filter(|_| rng.random::<f64>() < stay).cloned().collect();

        let rate = self.immigration_rate.as_f64();
        let count = if rate > 0.0 {
            Poisson::new(rate).map(|p| p.sample(rng) as usize).unwrap_or(0)
        } else {
            0
        };

        let d = prev.positions.values().next().map_or(0, Vec::len);
        let anchor: Vec<&Vec<T>> = if survivors.is_empty() {
            prev.positions.values().collect()
        } else {
            survivors.iter().filter_map(|id| prev.positions.get(id)).collect()
        };
        let mut centroid = vec![T::zero(); d];
        for z in &anchor {
            for (c, &v) in centroid.iter_mut().zip(z.iter()) {
                *c += v;
            }
        }
        if !anchor.is_empty() {
            let n = T::lit(anchor.len() as f64);
            centroid.iter_mut().for_each(|c| *c /= n);
        }

        let spread = self.immigrant_position_spread;
        let immigrants = (0..count)
            .map(|_| {
                let position = centroid
                    .iter()
                    .map(|&c| c + spread * T::lit(StandardNormal.sample(rng)))
                    .collect();
                let covariates = self
                    .immigrant_covariate_probs
                    .iter()
                    .map(|pmf| sample_categorical(pmf, rng.random::<f64>()))
                    .collect();
                Immigrant { id: ids.fresh(t), position, covariates }
            })
            .collect();
        MigrationOutcome { survivors, immigrants }
    }

    fn log_prob(&self, prev: &WaveState<T>, next: &WaveState<T>) -> T {
        let n = prev.len() as u64;
        let emigrants = prev.actors.iter().filter(|id| !next.actors.contains(*id)).count() as u64;
        let immigrants = next.actors.iter().filter(|id| !prev.actors.contains(*id)).count() as u64;
        let p = self.emigration_prob.as_f64();
        let rate = self.immigration_rate.as_f64();
        let binom = ln_binomial(n, emigrants) + xlogy(emigrants as f64, p) + xlogy((n - emigrants) as f64, 1.0 - p);
        let pois = xlogy(immigrants as f64, rate) - rate - ln_factorial(immigrants);
        T::lit(binom + pois)
    }
}

/// One migration draw from `prev` into wave `prev.t + 1`.
pub fn migration_step<T: Real>(
    prev: &WaveState<T>,
    params: &MigrationParams<T>,
    ids: &mut IdAllocator,
    rng: &mut StreamRng,
) -> MigrationOutcome<T> {
    params.step(prev, prev.t + 1, ids, rng)
}
