//! Preconditioned L-BFGS on a scale-invariant objective with a projection
//! ("retraction") onto the admissible set after every trial step.

use std::collections::VecDeque;
use std::ops::Range;

use crate::error::{Error, Result};

/// A scale-invariant objective over a flat variable vector.
pub(crate) trait Objective {
    fn dim(&self) -> usize;

    /// Moves `x` onto the admissible set.
    fn retract(&mut self, x: &mut [f64]) -> Result<()>;

    /// Value and gradient at an admissible point. Inadmissible or degenerate
    /// points report `+inf`.
    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Rescales `x` to its normalized representative and returns the factor
    /// applied to each block of variables.
    fn normalize(&mut self, x: &mut [f64]) -> Vec<(Range<usize>, f64)>;

    /// Stationarity measure; the iteration stops once it drops below the
    /// gradient tolerance.
    fn stationarity(&self, x: &[f64], grad: &[f64]) -> f64;

    /// Applies the inverse preconditioner in place.
    fn precondition(&self, r: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct MinimizeOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub step0: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub memory: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The stationarity measure reached the gradient tolerance.
    Converged,
    /// The iteration budget ran out first.
    MaxIterations,
    /// No decrease is representable in floating point any more.
    PrecisionFloor,
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub stationarity: f64,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    cap: usize,
}

impl Memory {
    fn direction<O: Objective>(&self, obj: &O, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        obj.precondition(&mut q);
        if let Some((s, y, _)) = self.pairs.back() {
            let mut hy = y.clone();
            obj.precondition(&mut hy);
            let gamma = dot(s, y) / dot(y, &hy);
            if gamma.is_finite() && gamma > 0.0 {
                q.iter_mut().for_each(|x| *x *= gamma);
            }
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q.iter_mut().for_each(|x| *x = -*x);
        q
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy.is_nan() || sy <= 1e-300 || !sy.is_finite() {
            return;
        }
        if self.pairs.len() == self.cap {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    fn rescale(&mut self, blocks: &[(Range<usize>, f64)]) {
        for (s, y, rho) in self.pairs.iter_mut() {
            for (r, f) in blocks {
                s[r.clone()].iter_mut().for_each(|x| *x *= f);
                y[r.clone()].iter_mut().for_each(|x| *x /= f);
            }
            *rho = 1.0 / dot(s, y);
        }
        self.pairs.retain(|(_, _, rho)| rho.is_finite() && *rho > 0.0);
    }
}

/// Minimizes `obj` starting from `x0`. The returned history holds the value
/// after every accepted step (non-increasing).
pub(crate) fn minimize<O: Objective>(obj: &mut O, x0: Vec<f64>, opts: &MinimizeOptions) -> Result<Minimum> {
    let n = obj.dim();
    let mut x = x0;
    obj.retract(&mut x)?;
    obj.normalize(&mut x);
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    if !f.is_finite() {
        return Err(Error::Admissibility(
            "initial field pair is degenerate (zero energy or coupling)".into(),
        ));
    }
    let mut history = vec![f];
    let mut mem = Memory {
        pairs: VecDeque::new(),
        cap: opts.memory,
    };
    let mut stationarity = obj.stationarity(&x, &g);
    let mut iterations = 0;
    let mut g_new = vec![0.0; n];
    let mut x_new = vec![0.0; n];

    let stop = loop {
        if stationarity <= opts.tol {
            break StopReason::Converged;
        }
        if iterations >= opts.max_iter {
            break StopReason::MaxIterations;
        }

        let mut accepted = false;
        let mut floor = false;
        // first try the quasi-Newton direction, then plain preconditioned descent
        for attempt in 0..2 {
            if attempt == 1 {
                if mem.pairs.is_empty() && iterations > 0 {
                    break;
                }
                mem.pairs.clear();
            }
            let mut d = mem.direction(obj, &g);
            let mut slope = dot(&g, &d);
            if slope.is_nan() || slope >= 0.0 {
                mem.pairs.clear();
                d = mem.direction(obj, &g);
                slope = dot(&g, &d);
                if slope.is_nan() || slope >= 0.0 {
                    floor = true;
                    break;
                }
            }
            let mut t = if mem.pairs.is_empty() {
                opts.step0 * inf_norm(&x).max(f64::MIN_POSITIVE) / inf_norm(&d).max(f64::MIN_POSITIVE)
            } else {
                1.0
            };
            for _ in 0..opts.max_backtracks {
                for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&d) {
                    *xn = xi + t * di;
                }
                if obj.retract(&mut x_new).is_ok() {
                    let fn_ = obj.value_grad(&x_new, &mut g_new);
                    if fn_.is_finite() && fn_ < f && fn_ <= f + 1e-4 * t * slope {
                        accepted = true;
                        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                        mem.push(s, y);
                        std::mem::swap(&mut x, &mut x_new);
                        std::mem::swap(&mut g, &mut g_new);
                        f = fn_;
                        break;
                    }
                }
                // predicted decrease below what the value can resolve
                if (t * slope).abs() <= 4.0 * f64::EPSILON * f.abs().max(1e-300) {
                    floor = true;
                    break;
                }
                t *= opts.backtrack;
            }
            if accepted {
                break;
            }
        }

        if !accepted {
            if floor || stationarity <= opts.tol.sqrt() {
                break StopReason::PrecisionFloor;
            }
            return Err(Error::Stagnation {
                iterations,
                quotient: f,
                residual: stationarity,
            });
        }

        iterations += 1;
        let blocks = obj.normalize(&mut x);
        for (r, fct) in &blocks {
            g[r.clone()].iter_mut().for_each(|v| *v /= fct);
        }
        mem.rescale(&blocks);
        history.push(f);
        stationarity = obj.stationarity(&x, &g);
    };

    Ok(Minimum {
        x,
        value: f,
        history,
        iterations,
        stationarity,
        stop,
    })
}
