//! Constrained maximum likelihood: multi-start BFGS on an unconstrained
//! scale, then a boundary check and re-polish with boundary values held.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Result, SteppError};
use crate::model::{parameter_names, Panel, ParamVector};
use crate::scalar::Real;
use crate::simulation::SeedStream;

use super::gof::gof_summaries;
use super::hessian::{standard_errors_with, ParamStatus, StdError};
use super::likelihood::{fit_migration, migration_log_likelihood, LikelihoodData};
use super::optimize::{minimize, BfgsOptions};
use super::params::{constraints, from_flat, to_flat, Constraint};

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions<T> {
    /// Number of built-in starts: null-like, data-heuristic, then random.
    pub starts: usize,
    /// Seed for the random starts.
    pub seed: u64,
    pub bfgs: BfgsOptions,
    /// Flat parameter indices held at the given values.
    pub fixed: Vec<(usize, T)>,
    /// Also estimate the migration process from entry and exit counts.
    pub fit_migration: bool,
    pub standard_errors: bool,
}

impl<T> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            starts: 3,
            seed: 0,
            bfgs: BfgsOptions::default(),
            fixed: Vec::new(),
            fit_migration: false,
            standard_errors: true,
        }
    }
}

/// Outcome of one optimizer start.
#[derive(Clone, Debug, PartialEq)]
pub struct StartOutcome<T> {
    pub label: String,
    pub log_lik: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult<T> {
    pub theta_hat: ParamVector<T>,
    /// Transition log-likelihood at the estimate, plus the migration term when
    /// migration was fitted.
    pub log_lik: T,
    pub migration_log_lik: Option<T>,
    /// Flat order: `delta0, delta1, rho.., homo.., hetero..`.
    pub parameter_names: Vec<String>,
    pub status: Vec<ParamStatus>,
    pub std_errors: Vec<StdError<T>>,
    pub converged: bool,
    pub iterations: usize,
    pub boundary_params: BTreeSet<String>,
    pub starts: Vec<StartOutcome<T>>,
    /// Persistent (ego, transition) pairs in the likelihood.
    pub pairs: usize,
}

impl<T: Real> FitResult<T> {
    pub fn estimates(&self) -> Vec<T> {
        to_flat(&self.theta_hat)
    }
}

struct Problem<'d, 'p, T> {
    data: &'d LikelihoodData<'p, T>,
    template: ParamVector<T>,
    cons: Vec<Constraint>,
    bfgs: BfgsOptions,
}

impl<T: Real> Problem<'_, '_, T> {
    fn log_lik(&self, flat: &[T]) -> T {
        self.data.evaluate(&from_flat(flat, &self.template))
    }

    /// Maximizes over the `free` coordinates of `flat`.
    fn polish(&self, flat: &[T], free: &[usize]) -> (Vec<T>, T, usize, bool) {
        let u0: Vec<T> = free.iter().map(|&i| self.cons[i].to_free(flat[i])).collect();
        let objective = |u: &[T]| {
            let mut v = flat.to_vec();
            for (k, &i) in free.iter().enumerate() {
                v[i] = self.cons[i].from_free(u[k]);
            }
            -self.log_lik(&v)
        };
        let m = minimize(objective, u0, &self.bfgs);
        let mut out = flat.to_vec();
        for (k, &i) in free.iter().enumerate() {
            out[i] = self.cons[i].from_free(m.x[k]);
        }
        let ll = self.log_lik(&out);
        (out, ll, m.iterations, m.converged)
    }
}

fn heuristic_start<T: Real>(panel: &Panel<T>, q: usize) -> Vec<T> {
    let rows = gof_summaries(panel);
    let mut pairs = 0.0;
    let mut msd = 0.0;
    let mut kept = vec![0.0; q];
    for r in &rows {
        let n = r.persistent as f64;
        if n == 0.0 {
            continue;
        }
        pairs += n;
        msd += r.mean_sq_displacement.unwrap_or(0.0) * n;
        for (k, f) in kept.iter_mut().zip(&r.persistence) {
            *k += f.unwrap_or(0.5) * n;
        }
    }
    let d = panel.config.d as f64;
    let msd = if pairs > 0.0 && msd > 0.0 { msd / pairs } else { d / 2.0 };
    let total = (d / (2.0 * msd)).clamp(1e-3, 1e6);
    let mut v = vec![T::lit(0.5 * total), T::lit(0.1 * total)];
    v.extend(kept.iter().map(|&k| T::lit(if pairs > 0.0 { (k / pairs).clamp(0.05, 0.95) } else { 0.5 })));
    v.extend(std::iter::repeat_n(T::lit(0.1 * total), 2 * q));
    v
}

fn null_like_start<T: Real>(q: usize) -> Vec<T> {
    let mut v = vec![T::one(), T::lit(0.01)];
    v.extend(std::iter::repeat_n(T::lit(0.5), q));
    v.extend(std::iter::repeat_n(T::lit(0.01), 2 * q));
    v
}

fn random_start<T: Real>(q: usize, seeds: &SeedStream, index: u64) -> Vec<T> {
    let mut rng = seeds.rng(index, "fit-start", None);
    let mut v = vec![T::lit(rng.random_range(0.1..2.0)), T::lit(rng.random_range(0.01..1.5))];
    v.extend((0..q).map(|_| T::lit(rng.random_range(0.2..0.9))));
    v.extend((0..2 * q).map(|_| T::lit(rng.random_range(0.01..1.5))));
    v
}

/// Whether coordinate `j` belongs on bound `b`: ℓ does not drop when it is
/// moved there and does not rise when stepping back into the interior.
fn sits_on_bound<T: Real>(problem: &Problem<'_, '_, T>, flat: &[T], j: usize, b: T, inward: T, ll: T) -> bool {
    let tol = T::lit(1e-6) * ll.abs().max(T::one());
    let mut at = flat.to_vec();
    at[j] = b;
    let ll_b = problem.log_lik(&at);
    if !ll_b.is_finite() || ll_b < ll - tol {
        return false;
    }
    let h = T::lit(1e-4);
    at[j] = b + inward * h;
    let ll_in = problem.log_lik(&at);
    ll_in.is_finite() && (ll_in - ll_b) / h <= tol
}

/// Maximum likelihood estimate of the non-migration parameters over force
/// coefficients `>= 0` and `rho` in `[0, 1]`. `init`, when given, is tried as
/// an extra first start and supplies the migration parameters.
pub fn fit_mle<T: Real>(panel: &Panel<T>, init: Option<&ParamVector<T>>, opts: &FitOptions<T>) -> Result<FitResult<T>> {
    let data = LikelihoodData::new(panel)?;
    if data.pairs() == 0 {
        return Err(SteppError::InvalidPanel("no actor is present in two consecutive waves".into()));
    }
    let cfg = &panel.config;
    let q = cfg.q();
    let cons = constraints(q);
    let n = cons.len();
    if let Some(th) = init {
        th.validate(cfg)?;
    }
    let template = init.cloned().unwrap_or_else(|| ParamVector::drift_null(cfg));

    let mut status = vec![ParamStatus::Free; n];
    for &(i, v) in &opts.fixed {
        if i >= n {
            return Err(SteppError::InvalidConfig(format!("fixed parameter index {i} out of range (have {n})")));
        }
        let ok = v >= cons[i].lower::<T>() && cons[i].upper::<T>().is_none_or(|u| v <= u) && v.is_finite();
        if !ok {
            return Err(SteppError::InvalidParams(format!("fixed value {v} violates the constraint on parameter {i}")));
        }
        status[i] = ParamStatus::Fixed;
    }
    let apply_fixed = |mut v: Vec<T>| {
        for &(i, val) in &opts.fixed {
            v[i] = val;
        }
        v
    };

    let seeds = SeedStream::new(opts.seed);
    let mut starts: Vec<(String, Vec<T>)> = Vec::new();
    if let Some(th) = init {
        starts.push(("init".into(), to_flat(th)));
    }
    for s in 0..opts.starts {
        starts.push(match s {
            0 => ("null-like".into(), null_like_start(q)),
            1 => ("heuristic".into(), heuristic_start(panel, q)),
            _ => (format!("random{}", s - 1), random_start(q, &seeds, s as u64)),
        });
    }
    if starts.is_empty() {
        return Err(SteppError::InvalidConfig("need at least one optimizer start".into()));
    }

    let problem = Problem { data: &data, template: template.clone(), cons: cons.clone(), bfgs: opts.bfgs.clone() };
    let free = |status: &[ParamStatus]| -> Vec<usize> { (0..n).filter(|&i| status[i] == ParamStatus::Free).collect() };

    let mut outcomes = Vec::new();
    let mut best: Option<(Vec<T>, T, usize, bool)> = None;
    for (label, start) in starts {
        let start = apply_fixed(start);
        let (flat, ll, iterations, converged) = problem.polish(&start, &free(&status));
        outcomes.push(StartOutcome { label, log_lik: ll, iterations, converged });
        let better = match &best {
            None => true,
            Some((_, b, _, _)) => ll > *b || (!b.is_finite() && ll.is_finite()),
        };
        if better {
            best = Some((flat, ll, iterations, converged));
        }
    }
    let (mut flat, mut ll, mut iterations, mut converged) = best.expect("at least one start");

    // Boundary pass. delta0 has no reachable boundary.
    for _ in 0..n {
        let mut flagged = false;
        for j in free(&status) {
            let (lo, hi) = (cons[j].lower::<T>(), cons[j].upper::<T>());
            if cons[j] == Constraint::Floor {
                continue;
            }
            let near = T::lit(1e-3);
            let mut bounds = vec![(lo, T::one())];
            if let Some(hi) = hi {
                bounds.push((hi, -T::one()));
            }
            for (b, inward) in bounds {
                if (flat[j] - b).abs() <= near && sits_on_bound(&problem, &flat, j, b, inward, ll) {
                    flat[j] = b;
                    status[j] = ParamStatus::Boundary;
                    flagged = true;
                    break;
                }
            }
        }
        if !flagged {
            break;
        }
        let (f, l, it, c) = problem.polish(&flat, &free(&status));
        flat = f;
        ll = l;
        iterations += it;
        converged = converged && c;
    }

    let mut theta_hat = from_flat(&flat, &template);
    let names = parameter_names(cfg);
    let std_errors = if opts.standard_errors {
        standard_errors_with(&data, &theta_hat, &status)?
    } else {
        status
            .iter()
            .map(|s| match s {
                ParamStatus::Free => StdError::Unavailable("not computed".into()),
                ParamStatus::Boundary => StdError::Boundary,
                ParamStatus::Fixed => StdError::Fixed,
            })
            .collect()
    };
    let mut migration_log_lik = None;
    let mut log_lik = ll;
    if opts.fit_migration {
        theta_hat.migration = fit_migration(panel)?;
        let m = migration_log_likelihood(panel, &theta_hat.migration)?;
        migration_log_lik = Some(m);
        log_lik += m;
    }
    let boundary_params =
        names.iter().zip(&status).filter(|(_, s)| **s == ParamStatus::Boundary).map(|(n, _)| n.clone()).collect();
    Ok(FitResult {
        theta_hat,
        log_lik,
        migration_log_lik,
        parameter_names: names,
        status,
        std_errors,
        converged: converged && ll.is_finite(),
        iterations,
        boundary_params,
        starts: outcomes,
        pairs: data.pairs(),
    })
}
