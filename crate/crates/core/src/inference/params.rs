//! Flat parameter vectors and the unconstrained reparameterization used by
//! the optimizer.

use crate::model::ParamVector;
use crate::scalar::Real;

/// Lower bound kept on `delta0` so the transition is always proper.
pub const DELTA0_FLOOR: f64 = 1e-8;

/// Constraint family of one flat parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    /// `> DELTA0_FLOOR`.
    Floor,
    /// `>= 0`.
    NonNegative,
    /// In `[0, 1]`.
    Probability,
}

impl Constraint {
    pub fn lower<T: Real>(self) -> T {
        match self {
            Constraint::Floor => T::lit(DELTA0_FLOOR),
            _ => T::zero(),
        }
    }

    pub fn upper<T: Real>(self) -> Option<T> {
        match self {
            Constraint::Probability => Some(T::one()),
            _ => None,
        }
    }

    /// Natural value to optimizer coordinate. Values on a boundary are pulled
    /// just inside it.
    pub fn to_free<T: Real>(self, v: T) -> T {
        let tiny = T::lit(1e-12);
        match self {
            Constraint::Floor => (v - T::lit(DELTA0_FLOOR)).max(tiny).ln(),
            Constraint::NonNegative => v.max(tiny).ln(),
            Constraint::Probability => {
                let p = v.max(tiny).min(T::one() - tiny);
                (p / (T::one() - p)).ln()
            }
        }
    }

    pub fn from_free<T: Real>(self, u: T) -> T {
        match self {
            Constraint::Floor => T::lit(DELTA0_FLOOR) + u.exp(),
            Constraint::NonNegative => u.exp(),
            Constraint::Probability => T::one() / (T::one() + (-u).exp()),
        }
    }
}

/// Constraint of every flat parameter, in the order
/// `delta0, delta1, rho.., homo.., hetero..`.
pub fn constraints(q: usize) -> Vec<Constraint> {
    let mut c = vec![Constraint::Floor, Constraint::NonNegative];
    c.extend(std::iter::repeat_n(Constraint::Probability, q));
    c.extend(std::iter::repeat_n(Constraint::NonNegative, 2 * q));
    c
}

pub fn to_flat<T: Real>(theta: &ParamVector<T>) -> Vec<T> {
    let mut v = vec![theta.delta0, theta.delta1];
    v.extend_from_slice(&theta.rho);
    v.extend_from_slice(&theta.homo);
    v.extend_from_slice(&theta.hetero);
    v
}

/// Rebuilds a parameter vector from flat values, keeping `template`'s
/// migration parameters.
pub fn from_flat<T: Real>(flat: &[T], template: &ParamVector<T>) -> ParamVector<T> {
    let q = template.q();
    assert_eq!(flat.len(), 2 + 3 * q, "flat parameter length");
    ParamVector {
        delta0: flat[0],
        delta1: flat[1],
        rho: flat[2..2 + q].to_vec(),
        homo: flat[2 + q..2 + 2 * q].to_vec(),
        hetero: flat[2 + 2 * q..].to_vec(),
        migration: template.migration.clone(),
    }
}
