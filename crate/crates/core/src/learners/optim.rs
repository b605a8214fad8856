//! Deterministic full-batch minimizers.

use serde::{Deserialize, Serialize};

use super::linalg::{dot, inf_norm, solve_spd};
use crate::scalar::Real;

/// Smooth objective over a flat parameter vector.
pub trait Objective<T: Real> {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the value.
    fn value_gradient(&self, x: &[T], grad: &mut [T]) -> T;

    fn value(&self, x: &[T]) -> T {
        let mut g = vec![T::zero(); self.dim()];
        self.value_gradient(x, &mut g)
    }

    fn has_hessian(&self) -> bool {
        false
    }

    /// Writes the dense row-major Hessian; `false` if unavailable.
    fn hessian(&self, _x: &[T], _h: &mut [T]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Newton when the Hessian is available and small enough, else L-BFGS.
    #[default]
    Auto,
    Newton,
    Lbfgs,
    GradientDescent,
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions<T> {
    pub max_iterations: usize,
    /// Convergence when the gradient's largest component is below this.
    pub tolerance: T,
    pub learning_rate: T,
    pub learning_rate_decay: T,
    /// Parameter count above which `Auto` avoids forming the Hessian.
    pub newton_max_dim: usize,
    /// Euclidean norm bound on the parameters; exceeded iterates are scaled
    /// back and the run stops with `capped` set.
    pub norm_cap: Option<T>,
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient_norm: T,
    pub iterations: usize,
    pub converged: bool,
    pub capped: bool,
}

pub fn minimize<T: Real, O: Objective<T>>(obj: &O, x0: Vec<T>, solver: Solver, opts: &MinimizeOptions<T>) -> Minimum<T> {
    match solver {
        Solver::Newton => newton(obj, x0, opts),
        Solver::Lbfgs => lbfgs(obj, x0, opts),
        Solver::GradientDescent => gradient_descent(obj, x0, opts),
        Solver::Auto => {
            if obj.has_hessian() && obj.dim() <= opts.newton_max_dim {
                newton(obj, x0, opts)
            } else {
                lbfgs(obj, x0, opts)
            }
        }
    }
}

fn effective_tolerance<T: Real>(tol: T) -> T {
    tol.max(T::epsilon() * T::lit(100.0))
}

/// No descent step is representable: accept if the gradient is at the
/// rounding level of the objective.
fn stalled_at_precision<T: Real>(g: &[T], f: T) -> bool {
    inf_norm(g) <= T::epsilon_sqrt() * f.abs().max(T::one())
}

fn apply_cap<T: Real>(x: &mut [T], cap: Option<T>) -> bool {
    let Some(cap) = cap else { return false };
    let norm = dot(x, x).sqrt();
    if norm > cap {
        let s = cap / norm;
        x.iter_mut().for_each(|v| *v *= s);
        true
    } else {
        false
    }
}

/// Backtracking Armijo search along `dir`. Returns the accepted step and value.
fn backtrack<T: Real, O: Objective<T>>(obj: &O, x: &[T], f: T, slope: T, dir: &[T], t0: T, trial: &mut [T]) -> Option<(T, T)> {
    let c1 = T::lit(1e-4);
    let mut t = t0;
    for _ in 0..60 {
        for ((tr, &xi), &di) in trial.iter_mut().zip(x).zip(dir) {
            *tr = xi + t * di;
        }
        let ft = obj.value(trial);
        if ft.is_finite() && ft <= f + c1 * t * slope {
            return Some((t, ft));
        }
        t *= T::lit(0.5);
    }
    None
}

fn newton<T: Real, O: Objective<T>>(obj: &O, mut x: Vec<T>, opts: &MinimizeOptions<T>) -> Minimum<T> {
    let n = obj.dim();
    let tol = effective_tolerance(opts.tolerance);
    let mut g = vec![T::zero(); n];
    let mut h = vec![T::zero(); n * n];
    let mut dir = vec![T::zero(); n];
    let mut trial = vec![T::zero(); n];
    let mut f = obj.value_gradient(&x, &mut g);
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= tol;
    let mut capped = false;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        if !obj.hessian(&x, &mut h) {
            break;
        }
        dir.iter_mut().zip(&g).for_each(|(d, &gi)| *d = -gi);
        if solve_spd(&h, n, &mut dir).is_none() {
            dir.iter_mut().zip(&g).for_each(|(d, &gi)| *d = -gi);
        }
        let mut slope = dot(&g, &dir);
        if !(slope < T::zero()) {
            dir.iter_mut().zip(&g).for_each(|(d, &gi)| *d = -gi);
            slope = dot(&g, &dir);
        }
        match backtrack(obj, &x, f, slope, &dir, T::one(), &mut trial) {
            Some(_) => std::mem::swap(&mut x, &mut trial),
            None => {
                converged = stalled_at_precision(&g, f);
                break;
            }
        }
        if apply_cap(&mut x, opts.norm_cap) {
            capped = true;
            f = obj.value_gradient(&x, &mut g);
            break;
        }
        f = obj.value_gradient(&x, &mut g);
        converged = inf_norm(&g) <= tol;
    }
    Minimum {
        gradient_norm: inf_norm(&g),
        x,
        value: f,
        iterations,
        converged,
        capped,
    }
}

fn lbfgs<T: Real, O: Objective<T>>(obj: &O, mut x: Vec<T>, opts: &MinimizeOptions<T>) -> Minimum<T> {
    const MEMORY: usize = 10;
    let n = obj.dim();
    let tol = effective_tolerance(opts.tolerance);
    let mut g = vec![T::zero(); n];
    let mut f = obj.value_gradient(&x, &mut g);
    let mut s_hist: Vec<Vec<T>> = Vec::new();
    let mut y_hist: Vec<Vec<T>> = Vec::new();
    let mut rho: Vec<T> = Vec::new();
    let mut dir = vec![T::zero(); n];
    let mut trial = vec![T::zero(); n];
    let mut g_new = vec![T::zero(); n];
    let mut alpha = [T::zero(); MEMORY];
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= tol;
    let mut capped = false;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        // Two-loop recursion.
        dir.copy_from_slice(&g);
        let k = s_hist.len();
        for i in (0..k).rev() {
            alpha[i] = rho[i] * dot(&s_hist[i], &dir);
            for (d, &y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alpha[i] * y;
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            T::one() / inf_norm(&g).max(T::one())
        };
        dir.iter_mut().for_each(|d| *d *= gamma);
        for i in 0..k {
            let beta = rho[i] * dot(&y_hist[i], &dir);
            for (d, &s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alpha[i] - beta) * s;
            }
        }
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&g, &dir);
        if !(slope < T::zero()) {
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            dir.iter_mut().zip(&g).for_each(|(d, &gi)| *d = -gi);
            slope = dot(&g, &dir);
        }
        if backtrack(obj, &x, f, slope, &dir, T::one(), &mut trial).is_none() {
            converged = stalled_at_precision(&g, f);
            break;
        }
        if apply_cap(&mut trial, opts.norm_cap) {
            capped = true;
            x.copy_from_slice(&trial);
            f = obj.value_gradient(&x, &mut g);
            break;
        }
        let f_new = obj.value_gradient(&trial, &mut g_new);
        let s: Vec<T> = trial.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y) {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho.remove(0);
            }
            rho.push(T::one() / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        converged = inf_norm(&g) <= tol;
    }
    Minimum {
        gradient_norm: inf_norm(&g),
        x,
        value: f,
        iterations,
        converged,
        capped,
    }
}

fn gradient_descent<T: Real, O: Objective<T>>(obj: &O, mut x: Vec<T>, opts: &MinimizeOptions<T>) -> Minimum<T> {
    let n = obj.dim();
    let tol = effective_tolerance(opts.tolerance);
    let mut g = vec![T::zero(); n];
    let mut f = obj.value_gradient(&x, &mut g);
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= tol;
    let mut capped = false;
    while !converged && iterations < opts.max_iterations {
        let lr = opts.learning_rate / (T::one() + opts.learning_rate_decay * T::from_count(iterations));
        iterations += 1;
        x.iter_mut().zip(&g).for_each(|(xi, &gi)| *xi -= lr * gi);
        if apply_cap(&mut x, opts.norm_cap) {
            capped = true;
            f = obj.value_gradient(&x, &mut g);
            break;
        }
        f = obj.value_gradient(&x, &mut g);
        converged = inf_norm(&g) <= tol;
    }
    Minimum {
        gradient_norm: inf_norm(&g),
        x,
        value: f,
        iterations,
        converged,
        capped,
    }
}
