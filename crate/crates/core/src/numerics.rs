//! Small numeric helpers shared across modules.

/// Streaming `log(sum(exp(t_k)))` with a running maximum, so that terms like
/// `|x|^p` for large `p` can be accumulated without overflow or underflow.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t <= self.max {
            self.sum += (t - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        }
    }

    /// `log` of the accumulated sum; `-inf` if nothing was added.
    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Signed variant: accumulates `sum(s_k * exp(t_k))` and reports it relative
/// to `sum(exp(t_k))`, which is what sign-balance constraints need.
#[derive(Debug, Clone, Copy)]
pub struct SignedLogSum {
    max: f64,
    pos: f64,
    neg: f64,
}

impl Default for SignedLogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl SignedLogSum {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            pos: 0.0,
            neg: 0.0,
        }
    }

    pub fn add(&mut self, positive: bool, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            let f = (self.max - t).exp();
            self.pos *= f;
            self.neg *= f;
            self.max = t;
        }
        let e = (t - self.max).exp();
        if positive {
            self.pos += e;
        } else {
            self.neg += e;
        }
    }

    /// `(signed sum) / (absolute sum)`, in `[-1, 1]`; zero when empty.
    pub fn relative(&self) -> f64 {
        let total = self.pos + self.neg;
        if total == 0.0 {
            0.0
        } else {
            (self.pos - self.neg) / total
        }
    }

    /// `log` of the absolute sum.
    pub fn log_scale(&self) -> f64 {
        let total = self.pos + self.neg;
        if total == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + total.ln()
        }
    }

    /// The signed sum itself (may overflow for huge scales).
    pub fn signed(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            0.0
        } else {
            (self.pos - self.neg) * self.max.exp()
        }
    }
}

/// `ln|x|`, with `-inf` at zero.
#[inline]
pub fn ln_abs(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        x.abs().ln()
    }
}

/// Enough golden-section steps to shrink any bracket to a few ulps.
const MAX_GOLDEN_STEPS: usize = 2000;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // below a few ulps the bracket stops shrinking
    let tol = tol.max(4.0 * f64::EPSILON * a.abs().max(b.abs()));
    for _ in 0..MAX_GOLDEN_STEPS {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = (c, fc);
    for x in [a, b, d] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Dense scan of `f` over `n + 1` equispaced samples of `[a, b]` followed by
/// golden-section refinement in the bracketing cells of the best sample.
pub fn scan_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> (f64, f64) {
    let step = (b - a) / n as f64;
    let mut best_k = 0;
    let mut best_v = f64::NEG_INFINITY;
    for k in 0..=n {
        let v = f(a + step * k as f64);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let lo = a + step * best_k.saturating_sub(1) as f64;
    let hi = (a + step * (best_k + 1) as f64).min(b);
    let tol = (b - a).abs() * 1e-13 + 1e-300;
    let (x, v) = golden_max(&f, lo, hi, tol);
    if v >= best_v {
        (x, v)
    } else {
        (a + step * best_k as f64, best_v)
    }
}
