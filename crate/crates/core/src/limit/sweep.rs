use serde::{Deserialize, Serialize};

use super::LimitSpec;
use crate::calculus::Exponents;
use crate::eigen::{solve_first_eigenpair, EigenResult, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::GridDomain;

pub const DEFAULT_SCHEDULE: [f64; 5] = [4.0, 8.0, 16.0, 32.0, 64.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub lambda_root_p: f64,
    pub reference: Option<f64>,
    pub rel_gap: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the solve started from the previous row's fields.
    pub warm_started: bool,
}

/// Rows completed so far, and the failure that stopped the sweep, if any.
#[derive(Debug)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub last: Option<EigenResult>,
    pub failure: Option<(f64, Error)>,
}

/// Solves along `alpha = Γ p`, `q = Q p` in schedule order, each solve
/// warm-started from the previous one (the first from `opts.warm_start` if
/// given, otherwise cold). Each row is compared with the closed-form limit.
pub fn continuation_sweep(dom: &GridDomain, s: &LimitSpec, schedule: &[f64], opts: &SolverOptions) -> Result<Sweep> {
    s.check_domain(dom)?;
    let reference = s.closed_form()?;
    let mut exps = Vec::with_capacity(schedule.len());
    for &p in schedule {
        let e = Exponents::from_schedule(p, s.gamma, s.big_q)?;
        if !e.theory_flag() {
            return Err(Error::Unsupported(format!(
                "schedule entry p = {p} gives beta = {} <= 1",
                e.beta
            )));
        }
        exps.push(e);
    }

    let mut rows = Vec::with_capacity(exps.len());
    let mut opts = opts.clone();
    let mut last: Option<EigenResult> = None;
    for e in exps {
        let warm = opts.warm_start.is_some();
        match solve_first_eigenpair(dom, &e, &opts) {
            Ok(res) => {
                rows.push(SweepRow {
                    p: e.p,
                    q: e.q,
                    alpha: e.alpha,
                    beta: e.beta,
                    lambda: res.lambda,
                    lambda_root_p: res.lambda_root_p,
                    reference: Some(reference),
                    rel_gap: Some((res.lambda_root_p - reference).abs() / reference),
                    iterations: res.iterations,
                    converged: res.converged(),
                    warm_started: warm,
                });
                opts.warm_start = Some(res.fields.clone());
                last = Some(res);
            }
            Err(err) => {
                return Ok(Sweep {
                    rows,
                    last,
                    failure: Some((e.p, err)),
                })
            }
        }
    }
    Ok(Sweep {
        rows,
        last,
        failure: None,
    })
}
