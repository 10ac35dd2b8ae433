//! Per-transition summary statistics for comparing observed and simulated
//! panels.

use crate::geometry::neighbor_set;
use crate::model::{Panel, WaveState};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct GofRow {
    /// 1-based transition index; the row describes waves `transition - 1`
    /// and `transition`.
    pub transition: usize,
    pub t: u64,
    pub actors_before: usize,
    pub actors_after: usize,
    pub persistent: usize,
    pub immigrants: usize,
    pub emigrants: usize,
    /// Per covariate, fraction of persistent actors whose value is
    /// unchanged. `None` without persistent actors.
    pub persistence: Vec<Option<f64>>,
    pub mean_sq_displacement: Option<f64>,
    /// Per covariate, average over actors of the fraction of their k nearest
    /// neighbors sharing their value, in the later wave.
    pub homophily: Vec<Option<f64>>,
}

fn homophily_index<T: Real>(wave: &WaveState<T>, q: usize, k: usize) -> Vec<Option<f64>> {
    let mut sums = vec![0.0; q];
    let mut egos = 0usize;
    for (id, z) in &wave.positions {
        let mut pool = wave.positions.clone();
        pool.remove(id);
        let Ok(set) = neighbor_set(z, &pool, k) else { continue };
        if set.is_empty() {
            continue;
        }
        let x = &wave.covariates[id];
        egos += 1;
        for (m, s) in sums.iter_mut().enumerate() {
            let same = set.members.iter().filter(|j| wave.covariates[*j][m] == x[m]).count();
            *s += same as f64 / set.len() as f64;
        }
    }
    sums.into_iter().map(|s| (egos > 0).then(|| s / egos as f64)).collect()
}

pub fn gof_summaries<T: Real>(panel: &Panel<T>) -> Vec<GofRow> {
    let cfg = &panel.config;
    let q = cfg.q();
    panel
        .waves
        .windows(2)
        .enumerate()
        .map(|(w, pair)| {
            let (prev, next) = (&pair[0], &pair[1]);
            let persistent: Vec<&String> = prev.actors.intersection(&next.actors).collect();
            let n = persistent.len();
            let mut kept = vec![0usize; q];
            let mut sq = 0.0;
            for id in &persistent {
                let (a, b) = (&prev.covariates[*id], &next.covariates[*id]);
                for m in 0..q {
                    kept[m] += usize::from(a[m] == b[m]);
                }
                sq += prev.positions[*id]
                    .iter()
                    .zip(&next.positions[*id])
                    .map(|(u, v)| (v.as_f64() - u.as_f64()).powi(2))
                    .sum::<f64>();
            }
            let frac = |c: usize| (n > 0).then(|| c as f64 / n as f64);
            GofRow {
                transition: w + 1,
                t: next.t,
                actors_before: prev.len(),
                actors_after: next.len(),
                persistent: n,
                immigrants: next.len() - n,
                emigrants: prev.len() - n,
                persistence: kept.into_iter().map(frac).collect(),
                mean_sq_displacement: (n > 0).then(|| sq / n as f64),
                homophily: homophily_index(next, q, cfg.k),
            }
        })
        .collect()
}
