//! Domain types: waves, panels, model configuration and parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SteppError};
use crate::scalar::Real;

/// Opaque actor identifier. Identity across waves is exact string equality.
pub type ActorId = String;

/// One declared value of a discrete covariate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovariateLevel {
    Int(i64),
    Text(String),
}

impl fmt::Display for CovariateLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateLevel::Int(v) => write!(f, "{v}"),
            CovariateLevel::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for CovariateLevel {
    fn from(v: i64) -> Self {
        CovariateLevel::Int(v)
    }
}

impl From<&str> for CovariateLevel {
    fn from(v: &str) -> Self {
        CovariateLevel::Text(v.to_owned())
    }
}

/// Whether a homophily or heterophily force pulls toward neighbors or toward
/// their reflection through the ego.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForceMode {
    Attraction,
    Repulsion,
}

/// Structural model settings shared by every wave of a panel.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig<T> {
    /// Dimension of the social space.
    pub d: usize,
    /// Declared support of each covariate; covariate values are stored as
    /// indices into these lists.
    pub supports: Vec<Vec<CovariateLevel>>,
    /// Neighbor-set size.
    pub k: usize,
    /// Atomic-weight threshold in `(0, 1]`.
    pub c: T,
    pub homophily: Vec<ForceMode>,
    pub heterophily: Vec<ForceMode>,
}

impl<T: Real> ModelConfig<T> {
    /// Config with `k = 5`, `c = 1`, homophilous attraction and heterophilous
    /// repulsion on every covariate.
    pub fn new(d: usize, supports: Vec<Vec<CovariateLevel>>) -> Self {
        let q = supports.len();
        Self {
            d,
            supports,
            k: 5,
            c: T::one(),
            homophily: vec![ForceMode::Attraction; q],
            heterophily: vec![ForceMode::Repulsion; q],
        }
    }

    /// `q` binary covariates with levels `0` and `1`.
    pub fn binary(d: usize, q: usize) -> Self {
        Self::new(d, vec![vec![0.into(), 1.into()]; q])
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_c(mut self, c: T) -> Self {
        self.c = c;
        self
    }

    pub fn with_modes(mut self, homophily: Vec<ForceMode>, heterophily: Vec<ForceMode>) -> Self {
        self.homophily = homophily;
        self.heterophily = heterophily;
        self
    }

    pub fn q(&self) -> usize {
        self.supports.len()
    }

    pub fn support_size(&self, m: usize) -> usize {
        self.supports[m].len()
    }

    pub fn level_index(&self, m: usize, level: &CovariateLevel) -> Option<usize> {
        self.supports.get(m)?.iter().position(|l| l == level)
    }

    /// Number of points in the product support of the covariate vector.
    pub fn joint_support_size(&self) -> usize {
        self.supports.iter().map(Vec::len).product()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SteppError::InvalidConfig(msg));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.c > T::zero() && self.c <= T::one()) {
            return bad(format!("c = {} must lie in (0, 1]", self.c));
        }
        for (m, support) in self.supports.iter().enumerate() {
            if support.is_empty() {
                return bad(format!("support of covariate {m} is empty"));
            }
            let distinct: BTreeSet<_> = support.iter().collect();
            if distinct.len() != support.len() {
                return bad(format!("support of covariate {m} has duplicate levels"));
            }
        }
        if self.homophily.len() != self.q() || self.heterophily.len() != self.q() {
            return bad(format!(
                "need one homophily and one heterophily mode per covariate (q = {})",
                self.q()
            ));
        }
        Ok(())
    }
}

/// Exogenous migration family: binomial emigration, Poisson immigration.
#[derive(Clone, Debug, PartialEq)]
pub struct MigrationParams<T> {
    /// Probability that each present actor leaves during a transition.
    pub emigration_prob: T,
    /// Poisson mean of the number of entrants per transition.
    pub immigration_rate: T,
    /// Per-coordinate standard deviation of entrant positions around the
    /// survivor centroid.
    pub immigrant_position_spread: T,
    /// Per-covariate pmf over the declared support, for entrants.
    pub immigrant_covariate_probs: Vec<Vec<T>>,
}

impl<T: Real> MigrationParams<T> {
    /// No entry, no exit.
    pub fn closed<U>(cfg: &ModelConfig<U>) -> Self {
        Self {
            emigration_prob: T::zero(),
            immigration_rate: T::zero(),
            immigrant_position_spread: T::one(),
            immigrant_covariate_probs: cfg
                .supports
                .iter()
                .map(|s| vec![T::one() / T::lit(s.len() as f64); s.len()])
                .collect(),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.emigration_prob == T::zero() && self.immigration_rate == T::zero()
    }

    pub fn validate<U>(&self, cfg: &ModelConfig<U>) -> Result<()> {
        let bad = |msg: String| Err(SteppError::InvalidParams(msg));
        if !(self.emigration_prob >= T::zero() && self.emigration_prob <= T::one()) {
            return bad(format!("emigration_prob = {} outside [0, 1]", self.emigration_prob));
        }
        if !(self.immigration_rate >= T::zero() && self.immigration_rate.is_finite()) {
            return bad(format!("immigration_rate = {} must be nonnegative", self.immigration_rate));
        }
        if !(self.immigrant_position_spread >= T::zero() && self.immigrant_position_spread.is_finite()) {
            return bad("immigrant_position_spread must be nonnegative".into());
        }
        if self.immigrant_covariate_probs.len() != cfg.supports.len() {
            return bad("need one immigrant covariate pmf per covariate".into());
        }
        for (m, (pmf, support)) in self.immigrant_covariate_probs.iter().zip(&cfg.supports).enumerate() {
            if pmf.len() != support.len() {
                return bad(format!("immigrant pmf {m} has {} entries, support has {}", pmf.len(), support.len()));
            }
            if pmf.iter().any(|&p| !(p >= T::zero())) {
                return bad(format!("immigrant pmf {m} has a negative entry"));
            }
            let total: T = pmf.iter().copied().sum();
            if (total - T::one()).abs() > T::lit(1e-6) {
                return bad(format!("immigrant pmf {m} sums to {total}"));
            }
        }
        Ok(())
    }
}

/// Complete parameter vector. The meaning of `homo[m]` and `hetero[m]`
/// (attraction or repulsion coefficient) follows the model config.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<T> {
    /// Basic drift.
    pub delta0: T,
    /// Atomic drift.
    pub delta1: T,
    /// Behavior persistence per covariate.
    pub rho: Vec<T>,
    pub homo: Vec<T>,
    pub hetero: Vec<T>,
    pub migration: MigrationParams<T>,
}

impl<T: Real> ParamVector<T> {
    /// Only basic drift and persistence; no forces, closed population.
    pub fn basic_drift<U>(delta0: T, rho: Vec<T>, cfg: &ModelConfig<U>) -> Self {
        let q = cfg.supports.len();
        Self {
            delta0,
            delta1: T::zero(),
            rho,
            homo: vec![T::zero(); q],
            hetero: vec![T::zero(); q],
            migration: MigrationParams::closed(cfg),
        }
    }

    /// Null hypothesis where basic drift is the only process at work and
    /// persistence is a fair coin: `delta0 = 1`, `rho = 0.5`.
    pub fn drift_null<U>(cfg: &ModelConfig<U>) -> Self {
        Self::basic_drift(T::one(), vec![T::lit(0.5); cfg.supports.len()], cfg)
    }

    pub fn q(&self) -> usize {
        self.rho.len()
    }

    /// Spatial coefficients in the order `delta0, delta1, homo.., hetero..`.
    pub fn spatial_coefficients(&self) -> Vec<T> {
        let mut v = vec![self.delta0, self.delta1];
        v.extend_from_slice(&self.homo);
        v.extend_from_slice(&self.hetero);
        v
    }

    pub fn validate<U: Real>(&self, cfg: &ModelConfig<U>) -> Result<()> {
        let q = cfg.q();
        let bad = |msg: String| Err(SteppError::InvalidParams(msg));
        if self.rho.len() != q || self.homo.len() != q || self.hetero.len() != q {
            return bad(format!("expected {q} persistence, homophily and heterophily values"));
        }
        let nonneg = |name: &str, v: T| -> Result<()> {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(SteppError::InvalidParams(format!("{name} = {v} must be a finite nonnegative number")))
            }
        };
        nonneg("delta0", self.delta0)?;
        nonneg("delta1", self.delta1)?;
        for m in 0..q {
            nonneg("homophily coefficient", self.homo[m])?;
            nonneg("heterophily coefficient", self.hetero[m])?;
            if !(self.rho[m] >= T::zero() && self.rho[m] <= T::one()) {
                return bad(format!("rho[{m}] = {} outside [0, 1]", self.rho[m]));
            }
        }
        self.migration.validate(cfg)
    }
}

/// Names of the non-migration parameters in their canonical flat order
/// `delta0, delta1, rho.., homophily.., heterophily..`.
pub fn parameter_names<T>(cfg: &ModelConfig<T>) -> Vec<String> {
    let q = cfg.supports.len();
    let mut names = vec!["delta0".to_owned(), "delta1".to_owned()];
    names.extend((1..=q).map(|m| format!("rho{m}")));
    names.extend(cfg.homophily.iter().enumerate().map(|(m, mode)| match mode {
        ForceMode::Attraction => format!("alpha{}", m + 1),
        ForceMode::Repulsion => format!("alpha_tilde{}", m + 1),
    }));
    names.extend(cfg.heterophily.iter().enumerate().map(|(m, mode)| match mode {
        ForceMode::Attraction => format!("upsilon{}", m + 1),
        ForceMode::Repulsion => format!("upsilon_tilde{}", m + 1),
    }));
    names
}

/// One time slice: present actors with their positions and covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState<T> {
    pub t: u64,
    pub actors: BTreeSet<ActorId>,
    pub positions: BTreeMap<ActorId, Vec<T>>,
    /// Covariate values as indices into the config's supports.
    pub covariates: BTreeMap<ActorId, Vec<usize>>,
}

impl<T: Real> WaveState<T> {
    pub fn new(t: u64) -> Self {
        Self {
            t,
            actors: BTreeSet::new(),
            positions: BTreeMap::new(),
            covariates: BTreeMap::new(),
        }
    }

    /// Adds (or replaces) an actor.
    pub fn insert(&mut self, id: impl Into<ActorId>, position: Vec<T>, covariates: Vec<usize>) {
        let id = id.into();
        self.positions.insert(id.clone(), position);
        self.covariates.insert(id.clone(), covariates);
        self.actors.insert(id);
    }

    pub fn with_actor(mut self, id: impl Into<ActorId>, position: Vec<T>, covariates: Vec<usize>) -> Self {
        self.insert(id, position, covariates);
        self
    }

    pub fn remove(&mut self, id: &str) {
        self.actors.remove(id);
        self.positions.remove(id);
        self.covariates.remove(id);
    }

    pub fn len(&self) -> usize {
        self.actors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actors.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<&[T]> {
        self.positions.get(id).map(Vec::as_slice)
    }

    pub fn covariates_of(&self, id: &str) -> Option<&[usize]> {
        self.covariates.get(id).map(Vec::as_slice)
    }
}

/// Ordered sequence of waves sharing one model configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel<T> {
    pub config: ModelConfig<T>,
    pub waves: Vec<WaveState<T>>,
}

impl<T: Real> Panel<T> {
    pub fn new(config: ModelConfig<T>, waves: Vec<WaveState<T>>) -> Self {
        Self { config, waves }
    }

    /// Builds a panel and rejects it unless it validates cleanly.
    pub fn validated(config: ModelConfig<T>, waves: Vec<WaveState<T>>) -> Result<Self> {
        let panel = Self::new(config, waves);
        let violations = validate_panel(&panel);
        if let Some(v) = violations.first() {
            return Err(SteppError::InvalidPanel(format!("{v} ({} violation(s) total)", violations.len())));
        }
        Ok(panel)
    }

    pub fn transitions(&self) -> usize {
        self.waves.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    InvalidConfig(String),
    NonIncreasingTime { previous: u64, found: u64 },
    OrphanPosition,
    OrphanCovariates,
    MissingPosition,
    MissingCovariates,
    DimensionMismatch { expected: usize, found: usize },
    NonFinitePosition,
    CovariateCountMismatch { expected: usize, found: usize },
    OutOfSupport { covariate: usize, level: usize },
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Rule::NonIncreasingTime { previous, found } => {
                write!(f, "time {found} does not follow {previous}")
            }
            Rule::OrphanPosition => f.write_str("orphan position"),
            Rule::OrphanCovariates => f.write_str("orphan covariates"),
            Rule::MissingPosition => f.write_str("missing position"),
            Rule::MissingCovariates => f.write_str("missing covariates"),
            Rule::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Rule::NonFinitePosition => f.write_str("non-finite position"),
            Rule::CovariateCountMismatch { expected, found } => {
                write!(f, "covariate count mismatch: expected {expected}, found {found}")
            }
            Rule::OutOfSupport { covariate, level } => {
                write!(f, "covariate {covariate} level index {level} outside support")
            }
        }
    }
}

/// One breach of a wave or panel invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub wave: usize,
    pub actor: Option<ActorId>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.actor {
            Some(id) => write!(f, "wave {}, actor `{id}`: {}", self.wave, self.rule),
            None => write!(f, "wave {}: {}", self.wave, self.rule),
        }
    }
}

/// Checks every wave and panel invariant; an empty result means the panel is
/// well formed. Dimension and covariate-count mismatches are reported once
/// per wave, naming the first offending actor.
pub fn validate_panel<T: Real>(panel: &Panel<T>) -> Vec<Violation> {
    let cfg = &panel.config;
    let mut out = Vec::new();
    if let Err(e) = cfg.validate() {
        out.push(Violation { wave: 0, actor: None, rule: Rule::InvalidConfig(e.to_string()) });
        return out;
    }
    let q = cfg.q();
    let mut previous_t: Option<u64> = None;
    for (w, wave) in panel.waves.iter().enumerate() {
        let mut push = |actor: Option<&str>, rule: Rule| {
            out.push(Violation { wave: w, actor: actor.map(str::to_owned), rule });
        };
        if let Some(prev) = previous_t {
            if wave.t <= prev {
                push(None, Rule::NonIncreasingTime { previous: prev, found: wave.t });
            }
        }
        previous_t = Some(wave.t);

        for id in wave.positions.keys().filter(|id| !wave.actors.contains(*id)) {
            push(Some(id), Rule::OrphanPosition);
        }
        for id in wave.covariates.keys().filter(|id| !wave.actors.contains(*id)) {
            push(Some(id), Rule::OrphanCovariates);
        }

        let mut dim_reported = false;
        let mut count_reported = false;
        for id in &wave.actors {
            match wave.positions.get(id) {
                None => push(Some(id), Rule::MissingPosition),
                Some(z) if z.len() != cfg.d => {
                    if !dim_reported {
                        dim_reported = true;
                        push(Some(id), Rule::DimensionMismatch { expected: cfg.d, found: z.len() });
                    }
                }
                Some(z) if z.iter().any(|v| !v.is_finite()) => push(Some(id), Rule::NonFinitePosition),
                Some(_) => {}
            }
            match wave.covariates.get(id) {
                None => push(Some(id), Rule::MissingCovariates),
                Some(x) if x.len() != q => {
                    if !count_reported {
                        count_reported = true;
                        push(Some(id), Rule::CovariateCountMismatch { expected: q, found: x.len() });
                    }
                }
                Some(x) => {
                    for (m, &level) in x.iter().enumerate() {
                        if level >= cfg.support_size(m) {
                            push(Some(id), Rule::OutOfSupport { covariate: m, level });
                        }
                    }
                }
            }
        }
    }
    out
}
