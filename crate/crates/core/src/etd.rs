//! Ego transition distributions.
//!
//! Every process contributes terms `w_j * |z - mu_j|^2` to the exponent of an
//! ego's next position. Their sum is a single isotropic quadratic, so given a
//! candidate covariate vector the next position is Gaussian with mean
//! `sum(w_j mu_j) / w*` and variance `1 / (2 w*)`; integrating it out gives
//! the covariate marginal. Repulsion is attraction toward the reflected
//! target `2 z_i - z_j`, so both forces share one code path.

use crate::error::{Result, SteppError};
use crate::geometry::{check_threshold, sq_dist, tie_inclusive_prefix, weight_from_sq_norm};
use crate::model::{ForceMode, ModelConfig, ParamVector, WaveState};
use crate::scalar::{log_sum_exp, Real};

/// Which process produced a term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermSource {
    Basic,
    Atomic,
    Homophily(usize),
    Heterophily(usize),
}

/// One weighted target in an ego's transition exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct Term<T> {
    pub weight: T,
    pub target: Vec<T>,
    pub source: TermSource,
}

/// Closed form of `exp(-sum_j w_j |z - mu_j|^2)` as an isotropic Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianEtd<T> {
    pub mean: Vec<T>,
    /// Per-coordinate variance `1 / (2 w*)`.
    pub variance: T,
    /// `w* = sum_j w_j`.
    pub total_weight: T,
    /// Minimum of the exponent, `sum_j w_j |mu_j - mean|^2`.
    pub log_offset: T,
}

impl<T: Real> GaussianEtd<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `log of integral exp(-sum_j w_j |z - mu_j|^2) dz = -c0 + (d/2) log(pi / w*)`.
    pub fn log_normalizer(&self) -> T {
        let half_d = T::lit(self.dim() as f64 / 2.0);
        -self.log_offset + half_d * (T::PI() / self.total_weight).ln()
    }

    /// Log density of the normalized Gaussian at `z`.
    pub fn log_density(&self, z: &[T]) -> T {
        gaussian_log_density(self.total_weight, sq_dist(z, &self.mean), self.dim())
    }
}

#[inline]
fn gaussian_log_density<T: Real>(total_weight: T, sq_residual: T, d: usize) -> T {
    T::lit(d as f64 / 2.0) * (total_weight / T::PI()).ln() - total_weight * sq_residual
}

/// Two-pass reduction of weighted targets to `(mean, w*, c0)`. `visit` must
/// replay the same terms on each call.
fn reduce_terms<T: Real>(d: usize, mut visit: impl FnMut(&mut dyn FnMut(T, &[T]))) -> Result<(Vec<T>, T, T)> {
    let mut total = T::zero();
    let mut weighted = vec![T::zero(); d];
    visit(&mut |w, mu| {
        total += w;
        for (acc, &m) in weighted.iter_mut().zip(mu) {
            *acc += w * m;
        }
    });
    if !(total > T::zero()) {
        return Err(SteppError::DegenerateEtd);
    }
    let mean: Vec<T> = weighted.into_iter().map(|v| v / total).collect();
    let mut offset = T::zero();
    visit(&mut |w, mu| offset += w * sq_dist(mu, &mean));
    Ok((mean, total, offset))
}

/// Collapses a term list into its Gaussian. Fails when the weights sum to zero.
pub fn gaussian_from_terms<T: Real>(terms: &[Term<T>]) -> Result<GaussianEtd<T>> {
    let d = terms.first().map_or(0, |t| t.target.len());
    if let Some(bad) = terms.iter().find(|t| t.target.len() != d) {
        return Err(SteppError::DimensionMismatch { expected: d, found: bad.target.len() });
    }
    if terms.iter().any(|t| !(t.weight >= T::zero())) {
        return Err(SteppError::InvalidParams("term weights must be nonnegative".into()));
    }
    let (mean, total_weight, log_offset) = reduce_terms(d, |f| {
        for t in terms {
            f(t.weight, &t.target);
        }
    })?;
    Ok(GaussianEtd { mean, variance: (T::lit(2.0) * total_weight).recip(), total_weight, log_offset })
}

/// Probability mass function of an ego's next covariate vector over the full
/// product support.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariatePmf<T> {
    pub support: Vec<Vec<usize>>,
    pub probs: Vec<T>,
}

impl<T: Real> CovariatePmf<T> {
    pub fn prob(&self, x: &[usize]) -> Option<T> {
        self.support.iter().position(|s| s.as_slice() == x).map(|i| self.probs[i])
    }
}

/// Every covariate vector in the product of the declared supports, in
/// lexicographic order.
pub fn enumerate_support<T>(cfg: &ModelConfig<T>) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for support in &cfg.supports {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..support.len()).map(move |v| {
                    let mut x = prefix.clone();
                    x.push(v);
                    x
                })
            })
            .collect();
    }
    out
}

/// Log of the persistence factor: `rho_m` when `x_m` keeps its previous
/// value, otherwise `(1 - rho_m)` spread uniformly over the other levels.
pub fn log_persistence<T: Real>(x: &[usize], previous: &[usize], rho: &[T], cfg: &ModelConfig<T>) -> T {
    x.iter()
        .zip(previous)
        .enumerate()
        .map(|(m, (&now, &before))| {
            if now == before {
                rho[m].ln()
            } else {
                let others = T::lit((cfg.support_size(m) - 1) as f64);
                ((T::one() - rho[m]) / others).ln()
            }
        })
        .sum()
}

#[derive(Clone, Debug)]
struct Neighbor<T> {
    weight: T,
    position: Vec<T>,
    /// `z_j - z_i`.
    offset: Vec<T>,
}

/// Parameter-free ingredients of one ego's transition: its neighbors, their
/// atomic weights and every neighbor set the exponent can use. Neighbor sets
/// for covariate `m` are built for each candidate level of `x_m`.
#[derive(Clone, Debug)]
pub struct EgoDesign<T> {
    position: Vec<T>,
    previous_x: Vec<usize>,
    neighbors: Vec<Neighbor<T>>,
    atomic: Vec<usize>,
    /// `[m][level]` -> neighbors sharing `level` on covariate `m`.
    homo: Vec<Vec<Vec<usize>>>,
    /// `[m][level]` -> neighbors differing from `level` on covariate `m`.
    hetero: Vec<Vec<Vec<usize>>>,
    homo_mode: Vec<ForceMode>,
    hetero_mode: Vec<ForceMode>,
    support: Vec<Vec<usize>>,
}

impl<T: Real> EgoDesign<T> {
    pub fn build(ego: &str, prev: &WaveState<T>, cfg: &ModelConfig<T>) -> Result<Self> {
        check_threshold(cfg.c)?;
        if !prev.actors.contains(ego) {
            return Err(SteppError::NotPersistent(ego.to_owned()));
        }
        let missing = || SteppError::InvalidPanel(format!("actor `{ego}` lacks a position or covariates"));
        let position = prev.position(ego).ok_or_else(missing)?.to_vec();
        let previous_x = prev.covariates_of(ego).ok_or_else(missing)?.to_vec();
        if position.len() != cfg.d {
            return Err(SteppError::DimensionMismatch { expected: cfg.d, found: position.len() });
        }
        check_covariates(&previous_x, cfg)?;

        let mut neighbors = Vec::with_capacity(prev.len().saturating_sub(1));
        let mut levels = Vec::with_capacity(neighbors.capacity());
        let mut dist = Vec::with_capacity(neighbors.capacity());
        for id in prev.actors.iter().filter(|id| id.as_str() != ego) {
            let other = prev.position(id).ok_or_else(|| SteppError::InvalidPanel(format!("actor `{id}` lacks a position")))?;
            if other.len() != cfg.d {
                return Err(SteppError::DimensionMismatch { expected: cfg.d, found: other.len() });
            }
            let x = prev.covariates_of(id).ok_or_else(|| SteppError::InvalidPanel(format!("actor `{id}` lacks covariates")))?;
            check_covariates(x, cfg)?;
            let sq = sq_dist(&position, other);
            let coincident = other == position.as_slice();
            dist.push(sq);
            neighbors.push(Neighbor {
                weight: weight_from_sq_norm(sq, coincident, cfg.c),
                position: other.to_vec(),
                offset: other.iter().zip(&position).map(|(&a, &b)| a - b).collect(),
            });
            levels.push(x.to_vec());
        }

        let mut order: Vec<usize> = (0..neighbors.len()).collect();
        order.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));

        let select = |keep: &dyn Fn(usize) -> bool| -> Vec<usize> {
            let pool: Vec<usize> = order.iter().copied().filter(|&j| keep(j)).collect();
            let take = tie_inclusive_prefix(pool.iter().map(|&j| dist[j]), cfg.k);
            pool[..take].to_vec()
        };

        let atomic = select(&|_| true);
        let q = cfg.q();
        let mut homo = Vec::with_capacity(q);
        let mut hetero = Vec::with_capacity(q);
        for m in 0..q {
            let size = cfg.support_size(m);
            homo.push((0..size).map(|v| select(&|j| levels[j][m] == v)).collect());
            hetero.push((0..size).map(|v| select(&|j| levels[j][m] != v)).collect());
        }

        Ok(Self {
            position,
            previous_x,
            neighbors,
            atomic,
            homo,
            hetero,
            homo_mode: cfg.homophily.clone(),
            hetero_mode: cfg.heterophily.clone(),
            support: enumerate_support(cfg),
        })
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    pub fn position(&self) -> &[T] {
        &self.position
    }

    pub fn previous_covariates(&self) -> &[usize] {
        &self.previous_x
    }

    /// Visits `(source, weight, sign, neighbor)` for every active term given
    /// candidate `x`; `neighbor == None` is the basic-drift term. A sign of
    /// `-1` marks a reflected (repulsion) target. Zero coefficients emit
    /// nothing.
    fn visit(&self, x: &[usize], theta: &ParamVector<T>, f: &mut dyn FnMut(TermSource, T, T, Option<&Neighbor<T>>)) {
        let one = T::one();
        if theta.delta0 != T::zero() {
            f(TermSource::Basic, theta.delta0, one, None);
        }
        if theta.delta1 != T::zero() {
            for &j in &self.atomic {
                let n = &self.neighbors[j];
                f(TermSource::Atomic, theta.delta1 * n.weight, one, Some(n));
            }
        }
        let sign = |mode: ForceMode| if mode == ForceMode::Attraction { one } else { -one };
        for (m, &level) in x.iter().enumerate() {
            if theta.homo[m] != T::zero() {
                for &j in &self.homo[m][level] {
                    let n = &self.neighbors[j];
                    f(TermSource::Homophily(m), theta.homo[m] * n.weight, sign(self.homo_mode[m]), Some(n));
                }
            }
            if theta.hetero[m] != T::zero() {
                for &j in &self.hetero[m][level] {
                    let n = &self.neighbors[j];
                    f(TermSource::Heterophily(m), theta.hetero[m] * n.weight, sign(self.hetero_mode[m]), Some(n));
                }
            }
        }
    }

    /// Terms with absolute targets.
    pub fn terms(&self, x: &[usize], theta: &ParamVector<T>) -> Vec<Term<T>> {
        let two = T::lit(2.0);
        let mut out = Vec::new();
        self.visit(x, theta, &mut |source, weight, sign, n| {
            let target = match n {
                None => self.position.clone(),
                Some(n) if sign > T::zero() => n.position.clone(),
                Some(n) => self.position.iter().zip(&n.position).map(|(&zi, &zj)| two * zi - zj).collect(),
            };
            out.push(Term { weight, target, source });
        });
        out
    }

    /// Gaussian in ego-centred coordinates: mean is relative to the ego's
    /// previous position.
    fn centred(&self, x: &[usize], theta: &ParamVector<T>) -> Result<(Vec<T>, T, T)> {
        let d = self.dim();
        let zero = vec![T::zero(); d];
        let mut scratch = vec![T::zero(); d];
        reduce_terms(d, |f| {
            self.visit(x, theta, &mut |_, w, sign, n| match n {
                None => f(w, &zero),
                Some(n) => {
                    for (s, &o) in scratch.iter_mut().zip(&n.offset) {
                        *s = sign * o;
                    }
                    f(w, &scratch)
                }
            })
        })
    }

    pub fn gaussian(&self, x: &[usize], theta: &ParamVector<T>) -> Result<GaussianEtd<T>> {
        let (offset_mean, total_weight, log_offset) = self.centred(x, theta)?;
        Ok(GaussianEtd {
            mean: self.position.iter().zip(&offset_mean).map(|(&p, &o)| p + o).collect(),
            variance: (T::lit(2.0) * total_weight).recip(),
            total_weight,
            log_offset,
        })
    }

    /// Unnormalized log mass of candidate `x` after integrating out position.
    pub fn log_mass(&self, x: &[usize], theta: &ParamVector<T>, cfg: &ModelConfig<T>) -> Result<T> {
        let (_, total, offset) = self.centred(x, theta)?;
        let pers = log_persistence(x, &self.previous_x, &theta.rho, cfg);
        if pers == T::neg_infinity() {
            return Ok(pers);
        }
        let half_d = T::lit(self.dim() as f64 / 2.0);
        Ok(pers - offset + half_d * (T::PI() / total).ln())
    }

    /// Candidate covariate vectors, in the order used by [`CovariatePmf`].
    pub fn support(&self) -> &[Vec<usize>] {
        &self.support
    }

    fn log_masses(&self, theta: &ParamVector<T>, cfg: &ModelConfig<T>) -> Result<(Vec<T>, T)> {
        let logs = self.support.iter().map(|x| self.log_mass(x, theta, cfg)).collect::<Result<Vec<T>>>()?;
        let norm = log_sum_exp(&logs);
        if norm == T::neg_infinity() {
            return Err(SteppError::ZeroMass);
        }
        Ok((logs, norm))
    }

    pub fn covariate_pmf(&self, theta: &ParamVector<T>, cfg: &ModelConfig<T>) -> Result<CovariatePmf<T>> {
        let (logs, norm) = self.log_masses(theta, cfg)?;
        let probs = logs.iter().map(|&l| (l - norm).exp()).collect();
        Ok(CovariatePmf { support: self.support.clone(), probs })
    }

    /// `log P(x)` under the covariate marginal.
    pub fn log_covariate_prob(&self, x: &[usize], theta: &ParamVector<T>, cfg: &ModelConfig<T>) -> Result<T> {
        check_covariates(x, cfg)?;
        let (logs, norm) = self.log_masses(theta, cfg)?;
        let own = self.support.iter().position(|c| c.as_slice() == x).expect("support enumerates every valid x");
        Ok(logs[own] - norm)
    }

    /// Joint log density of `(z, x)`: covariate marginal times the
    /// conditional Gaussian.
    pub fn log_density(&self, z: &[T], x: &[usize], theta: &ParamVector<T>, cfg: &ModelConfig<T>) -> Result<T> {
        if z.len() != self.dim() {
            return Err(SteppError::DimensionMismatch { expected: self.dim(), found: z.len() });
        }
        check_covariates(x, cfg)?;
        let half_d = T::lit(self.dim() as f64 / 2.0);
        let mut logs = Vec::with_capacity(self.support.len());
        let mut own = None;
        for candidate in &self.support {
            let (mean, total, offset) = self.centred(candidate, theta)?;
            let pers = log_persistence(candidate, &self.previous_x, &theta.rho, cfg);
            let log_mass = if pers == T::neg_infinity() {
                pers
            } else {
                pers - offset + half_d * (T::PI() / total).ln()
            };
            if candidate.as_slice() == x {
                own = Some((logs.len(), mean, total));
            }
            logs.push(log_mass);
        }
        let (idx, mean, total) = own.expect("support enumerates every valid x");
        let norm = log_sum_exp(&logs);
        if norm == T::neg_infinity() {
            return Err(SteppError::ZeroMass);
        }
        let log_px = logs[idx] - norm;
        if log_px == T::neg_infinity() {
            return Ok(log_px);
        }
        let residual = z
            .iter()
            .zip(&self.position)
            .zip(&mean)
            .fold(T::zero(), |acc, ((&zv, &p), &m)| {
                let r = (zv - p) - m;
                acc + r * r
            });
        Ok(log_px + gaussian_log_density(total, residual, self.dim()))
    }
}

fn check_covariates<T: Real>(x: &[usize], cfg: &ModelConfig<T>) -> Result<()> {
    if x.len() != cfg.q() {
        return Err(SteppError::DimensionMismatch { expected: cfg.q(), found: x.len() });
    }
    for (m, &level) in x.iter().enumerate() {
        if level >= cfg.support_size(m) {
            return Err(SteppError::OutOfSupport { covariate: m, level });
        }
    }
    Ok(())
}

fn prepare<T: Real>(ego: &str, prev: &WaveState<T>, theta: &ParamVector<T>, cfg: &ModelConfig<T>) -> Result<EgoDesign<T>> {
    cfg.validate()?;
    theta.validate(cfg)?;
    EgoDesign::build(ego, prev, cfg)
}

/// Weight/target terms of `ego`'s exponent given candidate covariates.
pub fn assemble_terms<T: Real>(
    ego: &str,
    candidate_x: &[usize],
    prev: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
) -> Result<Vec<Term<T>>> {
    let design = prepare(ego, prev, theta, cfg)?;
    check_covariates(candidate_x, cfg)?;
    Ok(design.terms(candidate_x, theta))
}

/// Marginal distribution of `ego`'s next covariate vector.
pub fn covariate_marginal<T: Real>(
    ego: &str,
    prev: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
) -> Result<CovariatePmf<T>> {
    prepare(ego, prev, theta, cfg)?.covariate_pmf(theta, cfg)
}

/// Exact joint log density of `ego` moving to `z_t` with covariates `x_t`.
pub fn ego_log_density<T: Real>(
    z_t: &[T],
    x_t: &[usize],
    ego: &str,
    prev: &WaveState<T>,
    theta: &ParamVector<T>,
    cfg: &ModelConfig<T>,
) -> Result<T> {
    prepare(ego, prev, theta, cfg)?.log_density(z_t, x_t, theta, cfg)
}
