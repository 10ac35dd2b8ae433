//! Standard errors from a central-difference Hessian on the natural scale.

use crate::error::{Result, SteppError};
use crate::linalg::spd_inverse;
use crate::model::{Panel, ParamVector};
use crate::scalar::Real;

use super::likelihood::LikelihoodData;
use super::params::{constraints, from_flat, to_flat, Constraint};

/// How a parameter was treated by the fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamStatus {
    Free,
    /// Estimate sits on a constraint boundary.
    Boundary,
    /// Held at a given value.
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StdError<T> {
    Value(T),
    /// No numeric SE: the estimate is on the boundary of the parameter space.
    Boundary,
    Fixed,
    /// The Hessian could not be inverted (or evaluated) at the estimate.
    Unavailable(String),
}

impl<T: Real> StdError<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            StdError::Value(v) => Some(*v),
            _ => None,
        }
    }
}

fn step<T: Real>(value: T, c: Constraint) -> T {
    let base = T::lit(1e-4);
    let mut h = base.max(base * value.abs());
    // Force coefficients enter the likelihood analytically and may be probed
    // below zero; delta0 and rho must stay inside their domain.
    match c {
        Constraint::Floor => h = h.min(T::lit(0.5) * (value - c.lower::<T>())),
        Constraint::Probability => h = h.min(T::lit(0.5) * value.min(T::one() - value)),
        Constraint::NonNegative => {}
    }
    h
}

pub(crate) fn standard_errors_with<T: Real>(
    data: &LikelihoodData<'_, T>,
    theta_hat: &ParamVector<T>,
    status: &[ParamStatus],
) -> Result<Vec<StdError<T>>> {
    let flat = to_flat(theta_hat);
    let cons = constraints(theta_hat.q());
    if status.len() != flat.len() {
        return Err(SteppError::DimensionMismatch { expected: flat.len(), found: status.len() });
    }
    let free: Vec<usize> = (0..flat.len()).filter(|&i| status[i] == ParamStatus::Free).collect();
    let mut out: Vec<StdError<T>> = status
        .iter()
        .map(|s| match s {
            ParamStatus::Boundary => StdError::Boundary,
            ParamStatus::Fixed => StdError::Fixed,
            ParamStatus::Free => StdError::Unavailable(String::new()),
        })
        .collect();
    if free.is_empty() {
        return Ok(out);
    }

    let h: Vec<T> = free.iter().map(|&i| step(flat[i], cons[i])).collect();
    if h.iter().any(|&v| !(v > T::zero())) {
        let reason = "estimate is too close to the edge of the parameter space for a finite-difference Hessian";
        for &i in &free {
            out[i] = StdError::Unavailable(reason.into());
        }
        return Ok(out);
    }
    let eval = |shifts: &[(usize, T)]| {
        let mut v = flat.clone();
        for &(a, d) in shifts {
            v[free[a]] += d;
        }
        data.evaluate(&from_flat(&v, theta_hat))
    };

    let n = free.len();
    let f0 = eval(&[]);
    let mut info = vec![T::zero(); n * n];
    for a in 0..n {
        let up = eval(&[(a, h[a])]);
        let down = eval(&[(a, -h[a])]);
        info[a * n + a] = -(up - f0 - f0 + down) / (h[a] * h[a]);
        for b in 0..a {
            let pp = eval(&[(a, h[a]), (b, h[b])]);
            let pm = eval(&[(a, h[a]), (b, -h[b])]);
            let mp = eval(&[(a, -h[a]), (b, h[b])]);
            let mm = eval(&[(a, -h[a]), (b, -h[b])]);
            let v = -(pp - pm - mp + mm) / (T::lit(4.0) * h[a] * h[b]);
            info[a * n + b] = v;
            info[b * n + a] = v;
        }
    }

    let fail = |reason: &str, out: &mut Vec<StdError<T>>| {
        for &i in &free {
            out[i] = StdError::Unavailable(reason.to_owned());
        }
    };
    if info.iter().any(|v| !v.is_finite()) {
        fail("log-likelihood not finite around the estimate", &mut out);
        return Ok(out);
    }
    match spd_inverse(&info, n) {
        Some(cov) => {
            for (a, &i) in free.iter().enumerate() {
                out[i] = StdError::Value(cov[a * n + a].sqrt());
            }
        }
        None => fail("Hessian is not negative definite at the estimate", &mut out),
    }
    Ok(out)
}

/// SEs for every non-migration parameter, in flat order. `status` marks
/// parameters that get a flag instead of a number.
pub fn standard_errors<T: Real>(
    panel: &Panel<T>,
    theta_hat: &ParamVector<T>,
    status: &[ParamStatus],
) -> Result<Vec<StdError<T>>> {
    theta_hat.validate(&panel.config)?;
    standard_errors_with(&LikelihoodData::new(panel)?, theta_hat, status)
}
