//! Rigid (rotation or reflection plus translation) alignment of embedded
//! wave positions onto a common reference.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Result, SteppError};
use crate::geometry::sq_dist;
use crate::model::ActorId;
use crate::scalar::Real;

pub type PositionMap<T> = BTreeMap<ActorId, Vec<T>>;

/// `z -> rotation * z + translation` with an orthogonal `rotation`.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidTransform<T> {
    /// Row-major `d x d` orthogonal matrix.
    pub rotation: Vec<T>,
    pub translation: Vec<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn identity(d: usize) -> Self {
        let mut rotation = vec![T::zero(); d * d];
        for i in 0..d {
            rotation[i * d + i] = T::one();
        }
        Self { rotation, translation: vec![T::zero(); d] }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, z: &[T]) -> Vec<T> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).fold(self.translation[i], |acc, j| acc + self.rotation[i * d + j] * z[j]))
            .collect()
    }

    /// Transform undoing `self`.
    pub fn inverse(&self) -> Self {
        let d = self.dim();
        let mut rotation = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                rotation[i * d + j] = self.rotation[j * d + i];
            }
        }
        let translation = (0..d)
            .map(|i| -(0..d).fold(T::zero(), |acc, j| acc + rotation[i * d + j] * self.translation[j]))
            .collect();
        Self { rotation, translation }
    }

    /// `max |R^T R - I|`.
    pub fn orthogonality_error(&self) -> T {
        let d = self.dim();
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                let v: T = (0..d).map(|k| self.rotation[k * d + i] * self.rotation[k * d + j]).sum();
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// Result of aligning one set of positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment<T> {
    pub transform: RigidTransform<T>,
    /// Every target actor, shared or not, after the transform.
    pub aligned: PositionMap<T>,
    /// Sum of squared distances over shared actors after alignment.
    pub residual: T,
    /// The same sum before alignment.
    pub unaligned_residual: T,
}

/// Sum of squared distances between the actors two maps share.
pub fn shared_residual<T: Real>(reference: &PositionMap<T>, target: &PositionMap<T>) -> T {
    reference
        .iter()
        .filter_map(|(id, r)| target.get(id).map(|t| sq_dist(r, t)))
        .sum()
}

/// Least-squares rigid transform of `target` onto `reference` over shared
/// ids, applied to all of `target`. No scaling; reflections are allowed.
pub fn procrustes_align<T: Real>(reference: &PositionMap<T>, target: &PositionMap<T>) -> Result<Alignment<T>> {
    align_one(0, reference, target)
}

fn align_one<T: Real>(wave: usize, reference: &PositionMap<T>, target: &PositionMap<T>) -> Result<Alignment<T>> {
    let fail = |reason: String| SteppError::Alignment { wave, reason };
    let shared: Vec<(&Vec<T>, &Vec<T>)> = reference
        .iter()
        .filter_map(|(id, r)| target.get(id).map(|t| (r, t)))
        .collect();
    let d = match shared.first() {
        Some((r, _)) => r.len(),
        None => return Err(fail("no shared actors with the reference".into())),
    };
    if shared.iter().any(|(r, t)| r.len() != d || t.len() != d) || target.values().any(|t| t.len() != d) {
        return Err(fail("positions have inconsistent dimensions".into()));
    }
    if shared.len() < d + 1 {
        return Err(fail(format!("{} shared actors, need at least {}", shared.len(), d + 1)));
    }

    let n = shared.len();
    let mut r_mat = DMatrix::<f64>::zeros(n, d);
    let mut t_mat = DMatrix::<f64>::zeros(n, d);
    for (row, (r, t)) in shared.iter().enumerate() {
        for j in 0..d {
            r_mat[(row, j)] = r[j].as_f64();
            t_mat[(row, j)] = t[j].as_f64();
        }
    }
    let r_mean = r_mat.row_mean();
    let t_mean = t_mat.row_mean();
    for mut row in r_mat.row_iter_mut() {
        row -= &r_mean;
    }
    for mut row in t_mat.row_iter_mut() {
        row -= &t_mean;
    }

    let spread = t_mat.clone().svd(false, false).singular_values;
    let largest = spread.max();
    let smallest = spread.min();
    if largest == 0.0 || smallest <= 1e-10 * largest {
        return Err(fail("shared target positions are degenerate (collinear or coplanar)".into()));
    }

    // Minimize sum |r_i - (R t_i + v)|^2: with H = T^T R = U S V^T, R = V U^T.
    let h = t_mat.transpose() * &r_mat;
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(fail("singular value decomposition failed".into())),
    };
    let rot = v_t.transpose() * u.transpose();
    let translation_f = r_mean.transpose() - &rot * t_mean.transpose();

    let transform = RigidTransform {
        rotation: (0..d * d).map(|idx| T::lit(rot[(idx / d, idx % d)])).collect(),
        translation: (0..d).map(|i| T::lit(translation_f[i])).collect(),
    };
    let aligned: PositionMap<T> = target.iter().map(|(id, z)| (id.clone(), transform.apply(z))).collect();
    Ok(Alignment {
        residual: shared_residual(reference, &aligned),
        unaligned_residual: shared_residual(reference, target),
        transform,
        aligned,
    })
}

/// Aligns each wave independently to one common reference. Errors name the
/// offending wave index.
pub fn align_sequence<T: Real>(waves: &[PositionMap<T>], reference: &PositionMap<T>) -> Result<Vec<Alignment<T>>> {
    waves.iter().enumerate().map(|(w, wave)| align_one(w, reference, wave)).collect()
}
