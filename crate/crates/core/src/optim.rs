//! Quasi-Newton minimization with an Armijo backtracking line search.
//!
//! Dense BFGS keeps the full inverse-Hessian approximation; above a size
//! threshold the caller switches to L-BFGS with a short history. The line
//! search only ever accepts points that satisfy the Armijo condition, so the
//! objective is monotonically non-increasing along the iterates.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Objective with an analytic gradient. `value` is used for backtracking
/// trials, where the gradient is not needed.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> Result<f64>;
    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuasiNewtonOptions {
    pub max_iter: usize,
    /// Absolute tolerance on the Euclidean gradient norm.
    pub gtol: f64,
    /// Stop when an accepted step lowers `f` by less than `ftol · max(|f|, f_scale)`.
    pub ftol: f64,
    /// Objective scale used by `ftol` near a zero minimum.
    pub f_scale: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// L-BFGS history length; `None` selects dense BFGS.
    pub memory: Option<usize>,
    /// Inverse-Hessian scale for the very first step.
    pub initial_scale: f64,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            gtol: 1e-8,
            ftol: 0.0,
            f_scale: 1.0,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
            memory: None,
            initial_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    SmallDecrease,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct QuasiNewtonOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub f_initial: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective at the start and after every accepted step.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

enum InverseHessian {
    Dense { h: Vec<f64>, n: usize },
    Limited { pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>, memory: usize, gamma: f64 },
}

impl InverseHessian {
    fn new(n: usize, memory: Option<usize>, scale: f64) -> Self {
        match memory {
            Some(m) => InverseHessian::Limited {
                pairs: VecDeque::with_capacity(m),
                memory: m.max(1),
                gamma: scale,
            },
            None => {
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    h[i * n + i] = scale;
                }
                InverseHessian::Dense { h, n }
            }
        }
    }

    fn reset(&mut self, scale: f64) {
        match self {
            InverseHessian::Dense { h, n } => {
                h.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..*n {
                    h[i * *n + i] = scale;
                }
            }
            InverseHessian::Limited { pairs, gamma, .. } => {
                pairs.clear();
                *gamma = scale;
            }
        }
    }

    /// `-H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        match self {
            InverseHessian::Dense { h, n } => (0..*n).map(|i| -dot(&h[i * n..(i + 1) * n], g)).collect(),
            InverseHessian::Limited { pairs, gamma, .. } => {
                let mut q = g.to_vec();
                let mut alphas = Vec::with_capacity(pairs.len());
                for (s, y, rho) in pairs.iter().rev() {
                    let a = rho * dot(s, &q);
                    q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                    alphas.push(a);
                }
                q.iter_mut().for_each(|qi| *qi *= *gamma);
                for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
                    let b = rho * dot(y, &q);
                    q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
                }
                q.iter_mut().for_each(|qi| *qi = -*qi);
                q
            }
        }
    }

    fn update(&mut self, s: Vec<f64>, y: Vec<f64>, first: bool) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * norm(&s) * norm(&y) {
            return;
        }
        let rho = 1.0 / sy;
        let gamma = sy / dot(&y, &y);
        match self {
            InverseHessian::Dense { h, n } => {
                let n = *n;
                if first {
                    // Rescale the initial guess before the first update.
                    h.iter_mut().for_each(|v| *v = 0.0);
                    for i in 0..n {
                        h[i * n + i] = gamma;
                    }
                }
                let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
                let yhy = dot(&y, &hy);
                let c = (sy + yhy) * rho * rho;
                for i in 0..n {
                    let row = &mut h[i * n..(i + 1) * n];
                    for j in 0..n {
                        row[j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                    }
                }
            }
            InverseHessian::Limited { pairs, memory, gamma: g } => {
                if pairs.len() == *memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, rho));
                *g = gamma;
            }
        }
    }
}

/// Minimizes `objective` from `x0`.
pub fn minimize<O: Objective>(objective: &mut O, x0: Vec<f64>, opts: &QuasiNewtonOptions) -> Result<QuasiNewtonOutcome> {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = objective.value_and_gradient(&x)?;
    let f_initial = f;
    let mut history = vec![f];
    let mut evaluations = 1;
    let mut hinv = InverseHessian::new(n, opts.memory, opts.initial_scale);
    let mut first_update = true;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut just_reset = false;

    while iterations < opts.max_iter {
        let gnorm = norm(&g);
        if gnorm <= opts.gtol {
            termination = Termination::GradientTolerance;
            break;
        }
        let mut d = hinv.direction(&g);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hinv.reset(opts.initial_scale);
            first_update = true;
            d = hinv.direction(&g);
            slope = dot(&g, &d);
        }

        let mut step = 1.0;
        let mut accepted: Option<(Vec<f64>, f64, Vec<f64>)> = None;
        for attempt in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let armijo = f + opts.armijo_c * step * slope;
            if attempt == 0 {
                let (ft, gt) = objective.value_and_gradient(&trial)?;
                evaluations += 1;
                if ft.is_finite() && ft <= armijo && ft <= f {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            } else {
                let ft = objective.value(&trial)?;
                evaluations += 1;
                if ft.is_finite() && ft <= armijo && ft <= f {
                    let (ft, gt) = objective.value_and_gradient(&trial)?;
                    evaluations += 1;
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= opts.backtrack;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if just_reset {
                termination = Termination::LineSearchFailed;
                break;
            }
            // Retry once along steepest descent.
            hinv.reset(opts.initial_scale);
            first_update = true;
            just_reset = true;
            continue;
        };
        just_reset = false;
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        hinv.update(s, y, first_update);
        first_update = false;

        let decrease = f - f_new;
        x = x_new;
        g = g_new;
        let f_prev = f;
        f = f_new;
        history.push(f);
        if opts.ftol > 0.0 && decrease <= opts.ftol * f_prev.abs().max(opts.f_scale) {
            termination = Termination::SmallDecrease;
            break;
        }
    }

    Ok(QuasiNewtonOutcome {
        grad_norm: norm(&g),
        x,
        f,
        f_initial,
        iterations,
        evaluations,
        termination,
        history,
    })
}
