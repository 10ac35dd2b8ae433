//! Intervention scenarios: paired control and intervention runs that share
//! every random stream except the intervention draws themselves.

use std::collections::BTreeSet;

use rand::seq::IteratorRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, SteppError};
use crate::model::{ActorId, ModelConfig, Panel, ParamVector, WaveState};
use crate::scalar::Real;

use super::rng::SeedStream;
use super::{neighbor_in_degree, prevalence, simulate_with};

/// Which actors an intervention targets.
#[derive(Clone, Debug, PartialEq)]
pub enum Selector {
    All,
    Ids(Vec<ActorId>),
    /// Actors currently holding `level` on `covariate`.
    Having { covariate: usize, level: usize },
    /// The `count` actors named most often in others' neighbor sets.
    MostCentral { count: usize },
    /// `count` actors chosen uniformly at random.
    Random { count: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intervention<T> {
    /// Wave time at which the intervention acts, before the next transition.
    pub time: u64,
    pub selector: Selector,
    pub covariate: usize,
    /// Level index forced on success.
    pub value: usize,
    pub success_prob: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T> {
    pub base: WaveState<T>,
    pub config: ModelConfig<T>,
    pub theta: ParamVector<T>,
    pub horizon: usize,
    pub replicates: usize,
    pub interventions: Vec<Intervention<T>>,
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SteppError::InvalidScenario(msg));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        self.config.validate()?;
        self.theta.validate(&self.config)?;
        for (i, iv) in self.interventions.iter().enumerate() {
            if !(iv.success_prob >= T::zero() && iv.success_prob <= T::one()) {
                return bad(format!("intervention {i}: success_prob outside [0, 1]"));
            }
            if iv.covariate >= self.config.q() || iv.value >= self.config.support_size(iv.covariate) {
                return bad(format!("intervention {i}: forced value outside the covariate support"));
            }
            if let Selector::Having { covariate, level } = iv.selector {
                if covariate >= self.config.q() || level >= self.config.support_size(covariate) {
                    return bad(format!("intervention {i}: selector level outside the covariate support"));
                }
            }
        }
        Ok(())
    }
}

/// Mean and spread over replicates of the fraction holding one level.
#[derive(Clone, Debug, PartialEq)]
pub struct PrevalenceRow {
    pub wave: usize,
    pub t: u64,
    pub covariate: usize,
    pub level: usize,
    pub control_mean: f64,
    /// `None` with a single replicate.
    pub control_sd: Option<f64>,
    pub intervention_mean: f64,
    pub intervention_sd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub replicates: usize,
    pub rows: Vec<PrevalenceRow>,
    pub warnings: Vec<String>,
}

fn select<T: Real>(
    selector: &Selector,
    wave: &WaveState<T>,
    cfg: &ModelConfig<T>,
    seeds: &SeedStream,
    index: usize,
) -> Result<BTreeSet<ActorId>> {
    Ok(match selector {
        Selector::All => wave.actors.clone(),
        Selector::Ids(ids) => ids.iter().filter(|id| wave.actors.contains(*id)).cloned().collect(),
        Selector::Having { covariate, level } => wave
            .covariates
            .iter()
            .filter(|(_, x)| x[*covariate] == *level)
            .map(|(id, _)| id.clone())
            .collect(),
        Selector::MostCentral { count } => {
            let mut ranked: Vec<(usize, ActorId)> =
                neighbor_in_degree(wave, cfg.k)?.into_iter().map(|(id, deg)| (deg, id)).collect();
            ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            ranked.into_iter().take(*count).map(|(_, id)| id).collect()
        }
        Selector::Random { count } => {
            let mut rng = seeds.rng(wave.t, &format!("select/{index}"), None);
            wave.actors.iter().cloned().choose_multiple(&mut rng, *count).into_iter().collect()
        }
    })
}

fn apply_interventions<T: Real>(
    wave: &mut WaveState<T>,
    interventions: &[Intervention<T>],
    cfg: &ModelConfig<T>,
    seeds: &SeedStream,
    warnings: &mut Vec<String>,
) -> Result<()> {
    for (i, iv) in interventions.iter().enumerate().filter(|(_, iv)| iv.time == wave.t) {
        let targets = select(&iv.selector, wave, cfg, seeds, i)?;
        if targets.is_empty() {
            warnings.push(format!(
                "replicate {}: intervention {i} at t = {} matched no actors",
                seeds.replicate, wave.t
            ));
            continue;
        }
        let p = iv.success_prob.as_f64();
        let purpose = format!("intervention/{i}");
        for id in targets {
            let mut rng = seeds.rng(wave.t, &purpose, Some(&id));
            if rng.random::<f64>() < p {
                if let Some(x) = wave.covariates.get_mut(&id) {
                    x[iv.covariate] = iv.value;
                }
            }
        }
    }
    Ok(())
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Simulates every replicate twice, without and with the interventions, from
/// the same streams, and summarizes per-wave prevalence of every level.
pub fn run_scenario<T: Real>(scenario: &Scenario<T>, seeds: SeedStream) -> Result<ScenarioReport> {
    scenario.validate()?;
    let cfg = &scenario.config;
    let runs: Vec<(Panel<T>, Panel<T>, Vec<String>)> = (0..scenario.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let s = seeds.replicate(r);
            let control = simulate_with(&scenario.base, &scenario.theta, cfg, scenario.horizon, s, |_, _| Ok(()))?;
            let mut warnings = Vec::new();
            let treated = simulate_with(&scenario.base, &scenario.theta, cfg, scenario.horizon, s, |_, wave| {
                apply_interventions(wave, &scenario.interventions, cfg, &s, &mut warnings)
            })?;
            Ok((control, treated, warnings))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for w in 0..=scenario.horizon {
        let control: Vec<Vec<Vec<f64>>> = runs.iter().map(|(c, _, _)| prevalence(&c.waves[w], cfg)).collect();
        let treated: Vec<Vec<Vec<f64>>> = runs.iter().map(|(_, t, _)| prevalence(&t.waves[w], cfg)).collect();
        for m in 0..cfg.q() {
            for level in 0..cfg.support_size(m) {
                let c: Vec<f64> = control.iter().map(|p| p[m][level]).collect();
                let t: Vec<f64> = treated.iter().map(|p| p[m][level]).collect();
                let (control_mean, control_sd) = mean_sd(&c);
                let (intervention_mean, intervention_sd) = mean_sd(&t);
                rows.push(PrevalenceRow {
                    wave: w,
                    t: runs[0].0.waves[w].t,
                    covariate: m,
                    level,
                    control_mean,
                    control_sd,
                    intervention_mean,
                    intervention_sd,
                });
            }
        }
    }
    Ok(ScenarioReport {
        replicates: scenario.replicates,
        rows,
        warnings: runs.into_iter().flat_map(|(_, _, w)| w).collect(),
    })
}
