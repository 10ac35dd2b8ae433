//! Distance machinery: the squared-Euclidean norm, the practical atomic
//! weighting and tie-inclusive neighbor sets.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Result, SteppError};
use crate::model::ActorId;
use crate::scalar::Real;

/// Squared Euclidean distance `sum_i (a_i - b_i)^2`.
pub fn sq_norm<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(SteppError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(sq_dist(a, b))
}

#[inline]
pub(crate) fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let diff = x - y;
        acc + diff * diff
    })
}

pub(crate) fn check_threshold<T: Real>(c: T) -> Result<()> {
    if c > T::zero() && c <= T::one() {
        Ok(())
    } else {
        Err(SteppError::InvalidConfig(format!("atomic-weight threshold c = {c} must lie in (0, 1]")))
    }
}

/// Atomic weight from a precomputed squared distance.
///
/// `1` for coincident points, the squared distance itself below `c`, and the
/// inverse squared distance at or above `c`, clamped to `1` so the codomain
/// stays `[0, 1]` when `c < 1`.
#[inline]
pub fn weight_from_sq_norm<T: Real>(sq: T, coincident: bool, c: T) -> T {
    if coincident {
        T::one()
    } else if sq < c {
        sq
    } else {
        sq.recip().min(T::one())
    }
}

/// Practical atomic weighting between two positions with threshold `c`.
pub fn atomic_weight<T: Real>(a: &[T], b: &[T], c: T) -> Result<T> {
    check_threshold(c)?;
    let sq = sq_norm(a, b)?;
    Ok(weight_from_sq_norm(sq, a == b, c))
}

/// Members of `B_k(z, E)` together with `|E|`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSet {
    pub members: BTreeSet<ActorId>,
    pub defining_expression_size: usize,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.contains(id)
    }
}

/// Union of `k` successive argmin sets of squared distance from `z` over
/// `pool`. Every argmin set keeps all minimizers, so ties can push the result
/// above `k` members. The caller excludes the ego from `pool`.
pub fn neighbor_set<T: Real>(z: &[T], pool: &BTreeMap<ActorId, Vec<T>>, k: usize) -> Result<NeighborSet> {
    let mut dists = Vec::with_capacity(pool.len());
    for (id, p) in pool {
        dists.push((sq_norm(z, p)?, id));
    }
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let take = tie_inclusive_prefix(dists.iter().map(|d| d.0), k);
    Ok(NeighborSet {
        members: dists[..take].iter().map(|(_, id)| (*id).clone()).collect(),
        defining_expression_size: pool.len(),
    })
}

/// Given distances in ascending order, the length of the prefix spanned by
/// the first `k` distinct distance values.
pub fn tie_inclusive_prefix<T: Real>(sorted: impl IntoIterator<Item = T>, k: usize) -> usize {
    let mut groups = 0;
    let mut last: Option<T> = None;
    let mut len = 0;
    for d in sorted {
        if last != Some(d) {
            if groups == k {
                break;
            }
            groups += 1;
            last = Some(d);
        }
        len += 1;
    }
    len
}
