use ndarray::Array2;
use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::calculus::{constraint_value, coupling, Exponents, FieldPair};
use crate::error::{Error, Result};
use crate::geometry::GridDomain;

use super::lbfgs::{minimize, MinimizeOptions, StopReason};
use super::problem::{Kind, Problem};
use super::residual::euler_lagrange_residual;

/// Amplitude of the seeded noise added to the initial `v`.
pub const INIT_NOISE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stopping tolerance on the relative Euler-Lagrange residual.
    pub tol_grad: f64,
    /// Largest accepted `|constraint_value|` of the returned pair.
    pub tol_constraint: f64,
    /// First trial step, relative to the sup norm of the iterate.
    pub step0: f64,
    pub backtrack_factor: f64,
    pub seed: u64,
    /// L-BFGS memory length.
    pub memory: usize,
    #[serde(skip)]
    pub warm_start: Option<FieldPair>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol_grad: 1e-6,
            tol_constraint: 1e-8,
            step0: 0.1,
            backtrack_factor: 0.5,
            seed: 0,
            memory: 10,
            warm_start: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_grad", self.tol_grad),
            ("tol_constraint", self.tol_constraint),
            ("step0", self.step0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Config(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        if self.memory == 0 {
            return Err(Error::Config("memory must be at least 1".into()));
        }
        Ok(())
    }

    fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            max_iter: self.max_iter,
            tol: self.tol_grad,
            step0: self.step0,
            backtrack: self.backtrack_factor,
            max_backtracks: 80,
            memory: self.memory,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    pub lambda_root_p: f64,
    /// Minimizing pair at unit coupling and balanced energies.
    pub fields: FieldPair,
    pub iterations: usize,
    /// Quotient after every accepted step.
    pub quotient_history: Vec<f64>,
    pub constraint_residual: f64,
    /// Weak-form residuals divided by `lambda`.
    pub el_residual_u: f64,
    pub el_residual_v: f64,
    pub stop: StopReason,
}

impl EigenResult {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

fn to_grid(dom: &GridDomain, flat: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec(dom.shape(), flat).expect("grid shape")
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.as_standard_layout().iter().copied().collect()
}

/// Initial pair: `u` the distance to the boundary, `v = x` plus seeded noise.
pub fn initial_pair(dom: &GridDomain, seed: u64) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, ny) = dom.shape();
    let mut u = Array2::zeros((nx, ny));
    let mut v = Array2::zeros((nx, ny));
    for i in 0..nx {
        for j in 0..ny {
            if dom.is_interior(i, j) {
                u[[i, j]] = dom.distance_to_boundary(i, j);
            }
            if dom.in_domain(i, j) {
                let noise: f64 = rng.random_range(-1.0..1.0);
                v[[i, j]] = dom.x(i) + INIT_NOISE * dom.r() * noise;
            }
        }
    }
    FieldPair { u, v }
}

/// Output conventions: `u` positive in sum, `v >= 0` at the node nearest to
/// `(R/2, 0)`.
fn orient(fp: &mut FieldPair, dom: &GridDomain) {
    if fp.u.sum() < 0.0 {
        fp.u.mapv_inplace(|x| -x);
    }
    if let Some((i, j)) = dom.nearest_node(0.5 * dom.r(), 0.0) {
        if fp.v[[i, j]] < 0.0 {
            fp.v.mapv_inplace(|x| -x);
        }
    }
}

/// First nontrivial eigenpair of the coupled system: the minimum of the
/// balanced quotient over pairs with `u = 0` on the boundary and
/// `int |u|^alpha |v|^(beta-2) v = 0`.
pub fn solve_first_eigenpair(dom: &GridDomain, e: &Exponents, opts: &SolverOptions) -> Result<EigenResult> {
    if !e.theory_flag() {
        return Err(Error::Unsupported(format!(
            "the variational characterization needs beta > 1, got {}",
            e.beta
        )));
    }
    opts.validate()?;
    let start = match &opts.warm_start {
        Some(fp) => {
            dom.check_shape(fp.u.dim())?;
            dom.check_shape(fp.v.dim())?;
            fp.clone()
        }
        None => initial_pair(dom, opts.seed),
    };
    let mut prob = Problem::new(dom, Kind::Coupled(*e))?;
    let x0 = prob.gather(&flat(&start.u), &flat(&start.v));
    let m = minimize(&mut prob, x0, &opts.minimize_options())?;
    let (u, v) = prob.expand(&m.x);
    let mut fields = FieldPair::new(to_grid(dom, u), to_grid(dom, v), dom)?;
    orient(&mut fields, dom);

    let lambda = (e.p * m.value).exp();
    let constraint_residual = constraint_value(&fields, e, dom)?.abs();
    let el = euler_lagrange_residual(&fields, lambda, e, dom)?;
    let c = coupling(&fields, e, dom)?;
    if (c - 1.0).abs() > 1e-8 {
        return Err(Error::Admissibility(format!("final coupling {c} is not normalized")));
    }
    let stop = if m.stop == StopReason::Converged && constraint_residual > opts.tol_constraint {
        StopReason::PrecisionFloor
    } else {
        m.stop
    };
    Ok(EigenResult {
        lambda,
        lambda_root_p: m.value.exp(),
        fields,
        iterations: m.iterations,
        quotient_history: m.history.iter().map(|f| (e.p * f).exp()).collect(),
        constraint_residual,
        el_residual_u: el.r_u / lambda,
        el_residual_v: el.r_v / lambda,
        stop,
    })
}

/// Outcome of a scalar eigenvalue solve.
#[derive(Debug, Clone)]
pub struct ScalarEigen {
    pub lambda: f64,
    pub field: Array2<f64>,
    pub iterations: usize,
    pub stationarity: f64,
    pub stop: StopReason,
}

fn check_exponent(name: &str, p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponents(format!("{name} must exceed 1, got {p}")));
    }
    Ok(())
}

/// First Dirichlet eigenvalue `min int|∇u|^p / int|u|^p` over `u` vanishing
/// on the boundary.
pub fn scalar_dirichlet_eig(dom: &GridDomain, p: f64, opts: &SolverOptions) -> Result<ScalarEigen> {
    check_exponent("p", p)?;
    opts.validate()?;
    let mut prob = Problem::new(dom, Kind::Dirichlet { p })?;
    let start = match &opts.warm_start {
        Some(fp) => flat(&fp.u),
        None => flat(&initial_pair(dom, opts.seed).u),
    };
    let x0 = prob.gather(&start, &[]);
    let m = minimize(&mut prob, x0, &opts.minimize_options())?;
    let (u, _) = prob.expand(&m.x);
    let mut field = to_grid(dom, u);
    if field.sum() < 0.0 {
        field.mapv_inplace(|x| -x);
    }
    Ok(ScalarEigen {
        lambda: (p * m.value).exp(),
        field,
        iterations: m.iterations,
        stationarity: m.stationarity,
        stop: m.stop,
    })
}

/// First nontrivial Neumann eigenvalue `min int|∇v|^q / int|v|^q` over `v`
/// with `int |v|^(q-2) v = 0`.
pub fn scalar_neumann_eig(dom: &GridDomain, q: f64, opts: &SolverOptions) -> Result<ScalarEigen> {
    check_exponent("q", q)?;
    opts.validate()?;
    let mut prob = Problem::new(dom, Kind::Neumann { q })?;
    let start = match &opts.warm_start {
        Some(fp) => flat(&fp.v),
        None => flat(&initial_pair(dom, opts.seed).v),
    };
    let x0 = prob.gather(&[], &start);
    let m = minimize(&mut prob, x0, &opts.minimize_options())?;
    let (_, v) = prob.expand(&m.x);
    let mut field = to_grid(dom, v);
    if let Some((i, j)) = dom.nearest_node(0.5 * dom.r(), 0.0) {
        if field[[i, j]] < 0.0 {
            field.mapv_inplace(|x| -x);
        }
    }
    Ok(ScalarEigen {
        lambda: (q * m.value).exp(),
        field,
        iterations: m.iterations,
        stationarity: m.stationarity,
        stop: m.stop,
    })
}
