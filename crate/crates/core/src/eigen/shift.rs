//! The shift constant `K` with `sum w |u|^alpha |v-K|^(beta-2) (v-K) = 0`.

use crate::calculus::{Exponents, FieldPair};
use crate::error::{Error, Result};
use crate::geometry::GridDomain;
use crate::numerics::ln_abs;

/// Relative root tolerance: `|phi(K)| <= SHIFT_REL_TOL * sum |terms|`.
pub const SHIFT_REL_TOL: f64 = 1e-13;

/// Finds `K` in `[min v, max v]` with
/// `sum_k exp(log_weight[k]) * sign(v[k]-K) |v[k]-K|^power = 0`.
///
/// `phi` is strictly decreasing in `K`, so the root is unique. The search is
/// a bisection safeguarded Newton iteration. Entries with
/// `log_weight = -inf` are ignored.
pub(crate) fn shift_root(v: &[f64], log_weight: &[f64], power: f64) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&x, &lw) in v.iter().zip(log_weight) {
        if lw > f64::NEG_INFINITY {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if lo > hi {
        return Err(Error::Admissibility(
            "u vanishes on the support of the weights, shift constant undefined".into(),
        ));
    }
    if lo == hi {
        return Ok(lo);
    }
    let eval = |k: f64| -> (f64, f64) {
        // relative value and relative derivative, both scaled by the same
        // factor exp(-max term)
        let mut max_t = f64::NEG_INFINITY;
        for (&x, &lw) in v.iter().zip(log_weight) {
            if lw > f64::NEG_INFINITY && x != k {
                max_t = max_t.max(lw + power * ln_abs(x - k));
            }
        }
        if max_t == f64::NEG_INFINITY {
            return (0.0, -1.0);
        }
        let mut sum = 0.0;
        let mut abs = 0.0;
        let mut deriv = 0.0;
        for (&x, &lw) in v.iter().zip(log_weight) {
            if lw == f64::NEG_INFINITY || x == k {
                continue;
            }
            let la = ln_abs(x - k);
            let e = (lw + power * la - max_t).exp();
            if x > k {
                sum += e;
            } else {
                sum -= e;
            }
            abs += e;
            deriv -= power * (lw + (power - 1.0) * la - max_t).exp();
        }
        (sum / abs, deriv / abs)
    };

    let (mut a, mut b) = (lo, hi);
    let mut k = 0.0_f64.clamp(a, b);
    for _ in 0..400 {
        let (f, df) = eval(k);
        if f.abs() <= SHIFT_REL_TOL {
            return Ok(k);
        }
        if f > 0.0 {
            a = k;
        } else {
            b = k;
        }
        let newton = k - f / df;
        k = if df.is_finite() && df < 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(k)
}

/// `K` with `constraint_value(u, v - K) = 0`.
pub fn shift_constant(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> Result<f64> {
    if e.beta <= 1.0 {
        return Err(Error::Unsupported(format!(
            "shift constant needs beta > 1, got {}",
            e.beta
        )));
    }
    let mut v = Vec::new();
    let mut lw = Vec::new();
    for ((u, x), w) in fp.u.iter().zip(fp.v.iter()).zip(dom.weights().iter()) {
        if *w > 0.0 && *u != 0.0 {
            v.push(*x);
            lw.push(w.ln() + e.alpha * ln_abs(*u));
        }
    }
    if v.is_empty() {
        return Err(Error::Admissibility("u is identically zero".into()));
    }
    shift_root(&v, &lw, e.beta - 1.0)
}
