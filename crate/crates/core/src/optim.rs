//! Limited-memory BFGS with a backtracking line search.
//!
//! Steps are accepted by the Armijo sufficient-decrease rule. Once energy
//! differences fall to roundoff level, the approximate Wolfe test of Hager and
//! Zhang (function value within the noise, directional derivative reduced) is
//! used instead, so descent can continue until the gradient itself is small.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// A smooth function on `R^n`.
pub trait Objective {
    fn len(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient into `g` and returns the value.
    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64;

    /// Stationarity measure compared against the tolerance.
    fn stationarity(&self, _x: &[f64], g: &[f64]) -> f64 {
        sup_norm(g)
    }

    /// Called after every accepted step.
    fn accepted(&self, _x: &[f64]) {}
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsParams {
    pub tolerance: f64,
    pub max_iter: usize,
    pub memory: usize,
    /// Armijo constant
    pub sufficient_decrease: f64,
    /// backtracking factor in (0, 1)
    pub contraction: f64,
    pub max_backtracks: usize,
    /// relative size of the energy noise floor
    pub noise: f64,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        LbfgsParams {
            tolerance: 1e-8,
            max_iter: 20_000,
            memory: 10,
            sufficient_decrease: 1e-4,
            contraction: 0.5,
            max_backtracks: 60,
            noise: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// value after each accepted step, starting with the initial value
    pub trace: Vec<f64>,
}

/// Minimizes `obj` from `x0`. The value sequence in `trace` is nonincreasing
/// up to the noise floor.
pub fn minimize(obj: &dyn Objective, x0: &[f64], params: &LbfgsParams) -> MinimizeOutcome {
    let n = obj.len();
    assert_eq!(x0.len(), n);
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_and_gradient(&x, &mut g);
    let mut evaluations = 1;
    let mut trace = vec![f];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut d = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut alpha_buf = vec![0.0; params.memory.max(1)];
    let mut stat = obj.stationarity(&x, &g);

    for it in 0..params.max_iter {
        if stat <= params.tolerance {
            return MinimizeOutcome { x, value: f, stationarity: stat, iterations: it, evaluations, converged: true, trace };
        }
        two_loop(&mem, &g, &mut d, &mut alpha_buf);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&g, &d);
        }
        let mut step = if mem.is_empty() { (1.0 / crate::fmath::sqrt(dot(&g, &g))).min(1.0) } else { 1.0 };
        let noise = params.noise * f.abs().max(f64::MIN_POSITIVE);
        let mut accepted = None;
        for _ in 0..params.max_backtracks {
            xt.iter_mut().zip(x.iter().zip(&d)).for_each(|(t, (xi, di))| *t = xi + step * di);
            let ft = obj.value_and_gradient(&xt, &mut gt);
            evaluations += 1;
            if ft.is_finite() {
                let armijo = ft <= f + params.sufficient_decrease * step * slope;
                let dslope = dot(&gt, &d);
                let approx_wolfe = ft <= f + noise && dslope >= 0.9 * slope && dslope <= -0.8 * slope;
                if armijo || approx_wolfe {
                    accepted = Some(ft);
                    break;
                }
            }
            step *= params.contraction;
        }
        let Some(ft) = accepted else {
            if mem.is_empty() {
                return MinimizeOutcome { x, value: f, stationarity: stat, iterations: it, evaluations, converged: false, trace };
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if mem.len() == params.memory.max(1) {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        core::mem::swap(&mut x, &mut xt);
        core::mem::swap(&mut g, &mut gt);
        f = ft;
        obj.accepted(&x);
        trace.push(f);
        stat = obj.stationarity(&x, &g);
    }
    let converged = stat <= params.tolerance;
    MinimizeOutcome { x, value: f, stationarity: stat, iterations: params.max_iter, evaluations, converged, trace }
}

fn two_loop(mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64], d: &mut [f64], alpha: &mut [f64]) {
    d.iter_mut().zip(g).for_each(|(di, gi)| *di = -gi);
    for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
        let a = rho * dot(s, d);
        alpha[k] = a;
        d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        d.iter_mut().for_each(|di| *di *= gamma);
    }
    for (k, (s, y, rho)) in mem.iter().enumerate() {
        let b = rho * dot(y, d);
        d.iter_mut().zip(s).for_each(|(di, si)| *di += (alpha[k] - b) * si);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;
    impl Objective for Rosenbrock {
        fn len(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            g[1] = 200.0 * (x[1] - x[0] * x[0]);
            self.value(x)
        }
    }

    struct Quadratic(Vec<f64>);
    impl Objective for Quadratic {
        fn len(&self) -> usize {
            self.0.len()
        }
        fn value(&self, x: &[f64]) -> f64 {
            0.5 * x.iter().zip(&self.0).map(|(xi, a)| a * xi * xi).sum::<f64>()
        }
        fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
            for ((gi, xi), a) in g.iter_mut().zip(x).zip(&self.0) {
                *gi = a * xi;
            }
            self.value(x)
        }
    }

    #[test]
    fn rosenbrock_to_tight_tolerance() {
        let p = LbfgsParams { tolerance: 1e-10, ..Default::default() };
        let out = minimize(&Rosenbrock, &[-1.2, 1.0], &p);
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let a: Vec<f64> = (0..200).map(|i| 1.0 + 1e4 * i as f64 / 199.0).collect();
        let x0 = vec![1.0; 200];
        let out = minimize(&Quadratic(a), &x0, &LbfgsParams::default());
        assert!(out.converged);
        assert!(sup_norm(&out.x) < 1e-8);
    }

    #[test]
    fn already_stationary() {
        let out = minimize(&Quadratic(vec![1.0; 4]), &[0.0; 4], &LbfgsParams::default());
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![0.0; 4]);
    }
}
