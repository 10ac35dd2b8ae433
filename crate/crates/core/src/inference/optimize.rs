//! Quasi-Newton minimization with finite-difference gradients.

use crate::linalg::{dot, mat_vec};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when `(f_old - f_new) / max(|f_old|, 1)` falls below this.
    pub rel_tol: f64,
    /// Stop when the accepted step is shorter than this.
    pub step_tol: f64,
    /// Relative finite-difference step for gradients.
    pub grad_step: f64,
    /// Cap on the length of a single step.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iterations: 500, rel_tol: 1e-9, step_tol: 1e-8, grad_step: 1e-5, max_step: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub f: T,
    pub iterations: usize,
    pub converged: bool,
}

fn gradient<T: Real>(f: &impl Fn(&[T]) -> T, x: &[T], fx: T, rel: T) -> Vec<T> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel * x[i].abs().max(T::one());
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            match (up.is_finite(), down.is_finite()) {
                (true, true) => (up - down) / (h + h),
                (true, false) => (up - fx) / h,
                (false, true) => (fx - down) / h,
                (false, false) => T::zero(),
            }
        })
        .collect()
}

fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut h = vec![T::zero(); n * n];
    for i in 0..n {
        h[i * n + i] = T::one();
    }
    h
}

/// Minimizes `f` from `x0` with BFGS and Armijo backtracking. Non-finite
/// objective values are treated as infeasible and backtracked away from.
pub fn minimize<T: Real>(f: impl Fn(&[T]) -> T, x0: Vec<T>, opts: &BfgsOptions) -> Minimum<T> {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    if n == 0 || !fx.is_finite() {
        return Minimum { x, f: fx, iterations: 0, converged: n == 0 };
    }
    let rel = T::lit(opts.grad_step);
    let mut g = gradient(&f, &x, fx, rel);
    let mut h_inv = identity::<T>(n);
    let mut fresh = true;
    let armijo = T::lit(1e-4);
    let mut small_steps = 0;

    for iter in 1..=opts.max_iterations {
        let mut p: Vec<T> = mat_vec(&h_inv, &g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &p);
        if !(slope < T::zero()) {
            h_inv = identity(n);
            fresh = true;
            p = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &p);
        }
        let norm = dot(&p, &p).sqrt();
        let cap = T::lit(opts.max_step);
        let mut alpha = if norm > cap { cap / norm } else { T::one() };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<T> = x.iter().zip(&p).map(|(&xi, &pi)| xi + alpha * pi).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + armijo * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= T::lit(0.5);
        }

        let Some((x_new, f_new)) = accepted else {
            if fresh {
                return Minimum { x, f: fx, iterations: iter, converged: true };
            }
            h_inv = identity(n);
            fresh = true;
            continue;
        };

        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let step_norm = dot(&s, &s).sqrt();
        let improvement = (fx - f_new) / fx.abs().max(T::one());
        let g_new = gradient(&f, &x_new, f_new, rel);
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        x = x_new;
        fx = f_new;
        g = g_new;

        // Two consecutive small steps, so one short backtracked step does not
        // end the run.
        if improvement < T::lit(opts.rel_tol) || step_norm < T::lit(opts.step_tol) {
            small_steps += 1;
            if small_steps >= 2 {
                return Minimum { x, f: fx, iterations: iter, converged: true };
            }
        } else {
            small_steps = 0;
        }

        let sy = dot(&s, &y);
        if sy > T::lit(1e-12) * step_norm * dot(&y, &y).sqrt() {
            if fresh {
                // Scale the initial inverse Hessian to the observed curvature.
                let scale = sy / dot(&y, &y);
                h_inv.iter_mut().for_each(|v| *v *= scale);
            }
            let hy = mat_vec(&h_inv, &y);
            let yhy = dot(&y, &hy);
            let rho = sy.recip();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i * n + j] += rho * ((T::one() + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }
    }
    Minimum { x, f: fx, iterations: opts.max_iterations, converged: false }
}
