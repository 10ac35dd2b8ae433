//! Panel log-likelihood over persistent actors, with the parameter-free
//! neighbor structure built once per panel.

use rayon::prelude::*;

use crate::error::{Result, SteppError};
use crate::etd::EgoDesign;
use crate::model::{MigrationParams, ModelConfig, Panel, ParamVector};
use crate::scalar::{CompensatedSum, Real};
use crate::simulation::MigrationProcess;

struct Observation<T> {
    design: EgoDesign<T>,
    z: Vec<T>,
    x: Vec<usize>,
}

/// Everything about a panel the likelihood needs that does not depend on θ.
pub struct LikelihoodData<'a, T> {
    panel: &'a Panel<T>,
    observations: Vec<Observation<T>>,
}

impl<'a, T: Real> LikelihoodData<'a, T> {
    pub fn new(panel: &'a Panel<T>) -> Result<Self> {
        panel.config.validate()?;
        if panel.waves.len() < 2 {
            return Err(SteppError::TooFewWaves);
        }
        if let Some(v) = crate::model::validate_panel(panel).first() {
            return Err(SteppError::InvalidPanel(v.to_string()));
        }
        let cfg = &panel.config;
        let pairs: Vec<(usize, &str)> = panel
            .waves
            .windows(2)
            .enumerate()
            .flat_map(|(w, pair)| {
                pair[0].actors.intersection(&pair[1].actors).map(move |id| (w, id.as_str()))
            })
            .collect();
        let observations = pairs
            .par_iter()
            .map(|&(w, id)| {
                let next = &panel.waves[w + 1];
                Ok(Observation {
                    design: EgoDesign::build(id, &panel.waves[w], cfg)?,
                    z: next.positions[id].clone(),
                    x: next.covariates[id].clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { panel, observations })
    }

    pub fn config(&self) -> &ModelConfig<T> {
        &self.panel.config
    }

    pub fn panel(&self) -> &Panel<T> {
        self.panel
    }

    /// Number of persistent (ego, transition) pairs.
    pub fn pairs(&self) -> usize {
        self.observations.len()
    }

    /// ℓ(θ) without validating θ; used by the optimizer and finite
    /// differences, which may probe just outside the constraint set. Errors
    /// map to NaN.
    pub fn evaluate(&self, theta: &ParamVector<T>) -> T {
        let cfg = self.config();
        let terms: Vec<T> = self
            .observations
            .par_iter()
            .map(|o| o.design.log_density(&o.z, &o.x, theta, cfg).unwrap_or_else(|_| T::nan()))
            .collect();
        terms.into_iter().collect::<CompensatedSum<T>>().total()
    }

    pub fn log_likelihood(&self, theta: &ParamVector<T>) -> Result<T> {
        theta.validate(self.config())?;
        let cfg = self.config();
        let terms = self
            .observations
            .par_iter()
            .map(|o| o.design.log_density(&o.z, &o.x, theta, cfg))
            .collect::<Result<Vec<T>>>()?;
        Ok(terms.into_iter().collect::<CompensatedSum<T>>().total())
    }
}

/// Sum over persistent egos of the transition log density. Entrants have no
/// previous state and contribute nothing; migration is a separate factor.
pub fn log_likelihood<T: Real>(panel: &Panel<T>, theta: &ParamVector<T>) -> Result<T> {
    LikelihoodData::new(panel)?.log_likelihood(theta)
}

/// Log probability of the observed entries and exits.
pub fn migration_log_likelihood<T: Real>(panel: &Panel<T>, params: &MigrationParams<T>) -> Result<T> {
    params.validate(&panel.config)?;
    if panel.waves.len() < 2 {
        return Err(SteppError::TooFewWaves);
    }
    Ok(panel
        .waves
        .windows(2)
        .map(|p| params.log_prob(&p[0], &p[1]))
        .collect::<CompensatedSum<T>>()
        .total())
}

/// Closed-form MLE of the migration family from entry and exit counts, plus
/// the empirical spread and covariate frequencies of entrants.
pub fn fit_migration<T: Real>(panel: &Panel<T>) -> Result<MigrationParams<T>> {
    if panel.waves.len() < 2 {
        return Err(SteppError::TooFewWaves);
    }
    let cfg = &panel.config;
    let mut out = MigrationParams::closed(cfg);
    let (mut at_risk, mut left, mut entered) = (0usize, 0usize, 0usize);
    let mut counts: Vec<Vec<f64>> = cfg.supports.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut sq_spread = 0.0;
    for pair in panel.waves.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        at_risk += prev.len();
        let survivors: Vec<&Vec<T>> =
            prev.actors.intersection(&next.actors).filter_map(|id| prev.positions.get(id)).collect();
        left += prev.len() - survivors.len();
        let anchor: Vec<&Vec<T>> = if survivors.is_empty() { prev.positions.values().collect() } else { survivors };
        let d = cfg.d;
        let mut centroid = vec![0.0; d];
        for z in &anchor {
            for (c, v) in centroid.iter_mut().zip(z.iter()) {
                *c += v.as_f64() / anchor.len() as f64;
            }
        }
        for id in next.actors.difference(&prev.actors) {
            entered += 1;
            if let Some(z) = next.positions.get(id) {
                sq_spread += z.iter().zip(&centroid).map(|(a, c)| (a.as_f64() - c).powi(2)).sum::<f64>() / d as f64;
            }
            if let Some(x) = next.covariates.get(id) {
                for (m, &level) in x.iter().enumerate() {
                    counts[m][level] += 1.0;
                }
            }
        }
    }
    if at_risk > 0 {
        out.emigration_prob = T::lit(left as f64 / at_risk as f64);
    }
    out.immigration_rate = T::lit(entered as f64 / panel.transitions() as f64);
    if entered > 0 {
        out.immigrant_position_spread = T::lit((sq_spread / entered as f64).sqrt());
        out.immigrant_covariate_probs =
            counts.iter().map(|c| c.iter().map(|&v| T::lit(v / entered as f64)).collect()).collect();
    }
    Ok(out)
}
