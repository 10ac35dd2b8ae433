//! Deviance, rescaled coefficients and nominal-normal p-values.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SteppError};
use crate::model::{Panel, ParamVector};
use crate::scalar::Real;

use super::likelihood::LikelihoodData;

/// `2 (ℓ(θ̂) - ℓ(θ_null))`. Fails if the null fits better by more than the
/// optimizer tolerance, which means `theta_hat` is not a maximizer.
pub fn deviance<T: Real>(panel: &Panel<T>, theta_hat: &ParamVector<T>, theta_null: &ParamVector<T>) -> Result<T> {
    let data = LikelihoodData::new(panel)?;
    let full = data.log_likelihood(theta_hat)?;
    let null = data.log_likelihood(theta_null)?;
    let dev = T::lit(2.0) * (full - null);
    if dev < T::lit(-1e-6) {
        return Err(SteppError::NegativeDeviance(dev.as_f64()));
    }
    Ok(dev)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RescaledReport<T> {
    /// Sum of the raw spatial coefficients.
    pub tau: T,
    /// Spatial coefficients divided by `tau`, in the order
    /// `delta0, delta1, homo.., hetero..`.
    pub starred: Vec<T>,
    pub rho: Vec<T>,
}

/// Shares of the total spatial pull attributable to each process.
pub fn rescale<T: Real>(theta_hat: &ParamVector<T>) -> Result<RescaledReport<T>> {
    let raw = theta_hat.spatial_coefficients();
    if raw.iter().any(|v| !(*v >= T::zero() && v.is_finite())) {
        return Err(SteppError::InvalidParams("spatial coefficients must be finite and nonnegative".into()));
    }
    let tau: T = raw.iter().copied().sum();
    if !(tau > T::zero()) {
        return Err(SteppError::ZeroScale);
    }
    Ok(RescaledReport { tau, starred: raw.iter().map(|&v| v / tau).collect(), rho: theta_hat.rho.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `H1: theta > null`.
    Greater,
}

/// p-value of `estimate` against `null` from the nominal normal limit.
pub fn p_value(estimate: f64, se: f64, null: f64, alternative: Alternative) -> Option<f64> {
    if !(se > 0.0) || !se.is_finite() || !estimate.is_finite() {
        return None;
    }
    let z = (estimate - null) / se;
    let std = Normal::standard();
    Some(match alternative {
        Alternative::TwoSided => 2.0 * std.sf(z.abs()),
        Alternative::Greater => std.sf(z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn theta(c: [f64; 6]) -> ParamVector<f64> {
        let cfg = ModelConfig::<f64>::binary(2, 2);
        let mut th = ParamVector::basic_drift(c[0], vec![0.7, 0.6], &cfg);
        th.delta1 = c[1];
        th.homo = vec![c[2], c[3]];
        th.hetero = vec![c[4], c[5]];
        th
    }

    #[test]
    fn rescale_sums_to_one() {
        let r = rescale(&theta([0.3, 0.1, 0.2, 0.0, 0.4, 0.05])).unwrap();
        let s: f64 = r.starred.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(r.rho, vec![0.7, 0.6]);
    }

    #[test]
    fn rescale_symmetry_and_single() {
        let r = rescale(&theta([0.2; 6])).unwrap();
        assert!(r.starred.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
        let r = rescale(&theta([0.0, 0.0, 0.0, 0.7, 0.0, 0.0])).unwrap();
        assert_eq!(r.starred, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(rescale(&theta([0.0; 6])), Err(SteppError::ZeroScale));
    }

    #[test]
    fn p_values() {
        let two = p_value(1.96, 1.0, 0.0, Alternative::TwoSided).unwrap();
        assert!((two - 0.05).abs() < 1e-3);
        let one = p_value(1.645, 1.0, 0.0, Alternative::Greater).unwrap();
        assert!((one - 0.05).abs() < 1e-3);
        assert!(p_value(1.0, 0.0, 0.0, Alternative::TwoSided).is_none());
    }
}
