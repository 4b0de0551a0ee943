//! Objectives for the minimizer: the coupled quotient and the two scalar
//! quotients, all in the form `F = ln(quotient) / p`.
//!
//! Variables are `u` at interior nodes followed by `v` at in-domain nodes.
//! Every objective is invariant under the relevant scalings, so the minimizer
//! is free to renormalize after each step.

use std::ops::Range;

use crate::calculus::{EnergyMesh, Exponents};
use crate::error::{Error, Result};
use crate::geometry::GridDomain;
use crate::numerics::{ln_abs, LogSumExp};

use super::banded::BandedCholesky;
use super::lbfgs::Objective;
use super::shift::shift_root;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Kind {
    Coupled(Exponents),
    Dirichlet { p: f64 },
    Neumann { q: f64 },
}

impl Kind {
    /// The exponent `F` is divided by.
    pub fn root(&self) -> f64 {
        match *self {
            Kind::Coupled(e) => e.p,
            Kind::Dirichlet { p } => p,
            Kind::Neumann { q } => q,
        }
    }
}

/// Relative floor on the triangle weights `|∇f|^(p-2)` of the preconditioner.
const HESSIAN_FLOOR: f64 = 1e-8;

/// Diagonal boost of the Neumann block, which is singular along constants.
const NEUMANN_SHIFT: f64 = 1e-3;

/// Accepted steps between preconditioner rebuilds.
const REFRESH_EVERY: usize = 4;

pub(crate) struct Problem {
    pub kind: Kind,
    mesh: EnergyMesh,
    size: usize,
    u_nodes: Vec<usize>,
    v_nodes: Vec<usize>,
    u_index: Vec<Option<usize>>,
    v_index: Vec<Option<usize>>,
    log_w: Vec<f64>,
    area: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    gu: Vec<f64>,
    gv: Vec<f64>,
    pre_u: Option<BandedCholesky>,
    pre_v: Option<BandedCholesky>,
    since_refresh: usize,
}

/// Restricts lower-triangle triplets to the variables in `index` and factors.
fn factor_block(
    entries: &[(usize, usize, f64)],
    index: &[Option<usize>],
    n: usize,
    scale: f64,
    shift: f64,
) -> Option<BandedCholesky> {
    let mut local = Vec::with_capacity(entries.len());
    let mut diag = vec![0.0; n];
    for &(a, b, c) in entries {
        if let (Some(ia), Some(ib)) = (index[a], index[b]) {
            if ia == ib {
                diag[ia] += scale * c;
            } else {
                local.push((ia, ib, scale * c));
            }
        }
    }
    let top = diag.iter().fold(0.0_f64, |m, d| m.max(*d));
    for (k, d) in diag.into_iter().enumerate() {
        local.push((k, k, d * (1.0 + shift) + 1e-14 * top));
    }
    BandedCholesky::factor(n, &local).ok()
}

impl Problem {
    pub fn new(dom: &GridDomain, kind: Kind) -> Result<Self> {
        let (nx, ny) = dom.shape();
        let size = nx * ny;
        let mesh = EnergyMesh::new(dom);
        let mut u_nodes = Vec::new();
        let mut v_nodes = Vec::new();
        let mut log_w = vec![f64::NEG_INFINITY; size];
        for i in 0..nx {
            for j in 0..ny {
                let k = i * ny + j;
                let w = dom.weights()[[i, j]];
                if w > 0.0 {
                    log_w[k] = w.ln();
                }
                if dom.in_domain(i, j) {
                    v_nodes.push(k);
                }
                if dom.is_interior(i, j) {
                    u_nodes.push(k);
                }
            }
        }
        if u_nodes.is_empty() {
            return Err(Error::InvalidDomain("domain has no interior nodes".into()));
        }
        match kind {
            Kind::Coupled(_) => {}
            Kind::Dirichlet { .. } => v_nodes.clear(),
            Kind::Neumann { .. } => u_nodes.clear(),
        }
        let mut u_index = vec![None; size];
        for (n, &k) in u_nodes.iter().enumerate() {
            u_index[k] = Some(n);
        }
        let mut v_index = vec![None; size];
        for (n, &k) in v_nodes.iter().enumerate() {
            v_index[k] = Some(n);
        }

        Ok(Self {
            kind,
            mesh,
            size,
            u_nodes,
            v_nodes,
            u_index,
            v_index,
            log_w,
            area: dom.area(),
            u: vec![0.0; size],
            v: vec![0.0; size],
            gu: vec![0.0; size],
            gv: vec![0.0; size],
            pre_u: None,
            pre_v: None,
            since_refresh: 0,
        })
    }

    pub fn n_u(&self) -> usize {
        self.u_nodes.len()
    }

    pub fn n_v(&self) -> usize {
        self.v_nodes.len()
    }

    fn scatter(&mut self, x: &[f64]) {
        let nu = self.n_u();
        for (n, &k) in self.u_nodes.iter().enumerate() {
            self.u[k] = x[n];
        }
        for (n, &k) in self.v_nodes.iter().enumerate() {
            self.v[k] = x[nu + n];
        }
    }

    /// Flat variable vector from full grids (row-major, `i * ny + j`).
    pub fn gather(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.u_nodes
            .iter()
            .map(|&k| u[k])
            .chain(self.v_nodes.iter().map(|&k| v[k]))
            .collect()
    }

    /// Full grids from a flat variable vector.
    pub fn expand(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; self.size];
        let mut v = vec![0.0; self.size];
        let nu = self.n_u();
        for (n, &k) in self.u_nodes.iter().enumerate() {
            u[k] = x[n];
        }
        for (n, &k) in self.v_nodes.iter().enumerate() {
            v[k] = x[nu + n];
        }
        (u, v)
    }

    /// `ln sum w |f|^power * |g|^extra` style mass integrals.
    fn log_mass(&self, f: &[f64], nodes: &[usize], power: f64) -> f64 {
        let mut acc = LogSumExp::new();
        for &k in nodes {
            if f[k] != 0.0 {
                acc.add(self.log_w[k] + power * ln_abs(f[k]));
            }
        }
        acc.value()
    }

    fn log_coupling(&self, e: &Exponents) -> f64 {
        let mut acc = LogSumExp::new();
        for &k in &self.u_nodes {
            if self.u[k] != 0.0 && self.v[k] != 0.0 {
                acc.add(self.log_w[k] + e.alpha * ln_abs(self.u[k]) + e.beta * ln_abs(self.v[k]));
            }
        }
        acc.value()
    }

    /// Log integrals `(ln int|∇u|^p, ln int|∇v|^q, ln coupling)` at the
    /// current scattered state (coupled kind only).
    fn coupled_logs(&self, e: &Exponents) -> (f64, f64, f64) {
        (
            self.mesh.log_power(&self.mesh.u_tris, &self.u, e.p),
            self.mesh.log_power(&self.mesh.v_tris, &self.v, e.q),
            self.log_coupling(e),
        )
    }

    /// Rebuilds the block preconditioner from the Hessians of the gradient
    /// energies at the current state, weighted as they enter `F`.
    fn refresh_preconditioner(&mut self) {
        let (pu, cu, pv, cv) = match self.kind {
            Kind::Coupled(e) => (e.p, e.alpha / e.p, e.q, e.beta / e.p),
            Kind::Dirichlet { p } => (p, 1.0, 0.0, 0.0),
            Kind::Neumann { q } => (0.0, 0.0, q, 1.0),
        };
        if !self.u_nodes.is_empty() {
            let li = self.mesh.log_power(&self.mesh.u_tris, &self.u, pu);
            if li.is_finite() {
                let entries = self
                    .mesh
                    .hessian_entries(&self.mesh.u_tris, &self.u, pu, li, HESSIAN_FLOOR);
                if let Some(f) = factor_block(&entries, &self.u_index, self.u_nodes.len(), cu, 0.0) {
                    self.pre_u = Some(f);
                }
            }
        }
        if !self.v_nodes.is_empty() {
            let li = self.mesh.log_power(&self.mesh.v_tris, &self.v, pv);
            if li.is_finite() {
                let entries = self
                    .mesh
                    .hessian_entries(&self.mesh.v_tris, &self.v, pv, li, HESSIAN_FLOOR);
                if let Some(f) = factor_block(&entries, &self.v_index, self.v_nodes.len(), cv, NEUMANN_SHIFT) {
                    self.pre_v = Some(f);
                }
            }
        }
    }

    fn log_theta(e: &Exponents, (lu, lv, lc): (f64, f64, f64)) -> f64 {
        if !(lu.is_finite() && lv.is_finite() && lc.is_finite()) {
            return f64::INFINITY;
        }
        e.alpha / e.p * (lu - e.alpha.ln()) + e.beta / e.q * (lv - e.beta.ln()) - lc
    }
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        self.n_u() + self.n_v()
    }

    fn retract(&mut self, x: &mut [f64]) -> Result<()> {
        let nu = self.n_u();
        let (vals, lw, power) = match self.kind {
            Kind::Dirichlet { .. } => return Ok(()),
            Kind::Neumann { q } => {
                let lw: Vec<f64> = self.v_nodes.iter().map(|&k| self.log_w[k]).collect();
                (x.to_vec(), lw, q - 1.0)
            }
            Kind::Coupled(e) => {
                self.scatter(x);
                // only interior nodes carry weight: u vanishes elsewhere
                let mut vals = Vec::with_capacity(nu);
                let mut lw = Vec::with_capacity(nu);
                for &k in &self.u_nodes {
                    if self.u[k] != 0.0 {
                        vals.push(self.v[k]);
                        lw.push(self.log_w[k] + e.alpha * ln_abs(self.u[k]));
                    }
                }
                if vals.is_empty() {
                    return Err(Error::Admissibility("u is identically zero".into()));
                }
                (vals, lw, e.beta - 1.0)
            }
        };
        let k = shift_root(&vals, &lw, power)?;
        x[nu..].iter_mut().for_each(|v| *v -= k);
        Ok(())
    }

    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.scatter(x);
        self.gu.iter_mut().for_each(|g| *g = 0.0);
        self.gv.iter_mut().for_each(|g| *g = 0.0);
        let value = match self.kind {
            Kind::Coupled(e) => {
                let logs = self.coupled_logs(&e);
                let lt = Self::log_theta(&e, logs);
                if !lt.is_finite() {
                    return f64::INFINITY;
                }
                let (lu, lv, lc) = logs;
                let p = e.p;
                self.mesh
                    .add_log_power_grad(&self.mesh.u_tris, &self.u, p, lu, e.alpha / (p * p), &mut self.gu);
                self.mesh
                    .add_log_power_grad(&self.mesh.v_tris, &self.v, e.q, lv, e.beta / (e.q * p), &mut self.gv);
                for &k in &self.u_nodes {
                    let (u, v) = (self.u[k], self.v[k]);
                    if u == 0.0 || v == 0.0 {
                        continue;
                    }
                    let base = self.log_w[k] - lc + e.alpha * ln_abs(u) + e.beta * ln_abs(v);
                    self.gu[k] -= e.alpha / p * (base - ln_abs(u)).exp() * u.signum();
                    self.gv[k] -= e.beta / p * (base - ln_abs(v)).exp() * v.signum();
                }
                lt / p
            }
            Kind::Dirichlet { p } => {
                let lg = self.mesh.log_power(&self.mesh.u_tris, &self.u, p);
                let lm = self.log_mass(&self.u, &self.u_nodes, p);
                if !(lg.is_finite() && lm.is_finite()) {
                    return f64::INFINITY;
                }
                self.mesh
                    .add_log_power_grad(&self.mesh.u_tris, &self.u, p, lg, 1.0 / p, &mut self.gu);
                for &k in &self.u_nodes {
                    let u = self.u[k];
                    if u != 0.0 {
                        self.gu[k] -= (self.log_w[k] + (p - 1.0) * ln_abs(u) - lm).exp() * u.signum();
                    }
                }
                (lg - lm) / p
            }
            Kind::Neumann { q } => {
                let lg = self.mesh.log_power(&self.mesh.v_tris, &self.v, q);
                let lm = self.log_mass(&self.v, &self.v_nodes, q);
                if !(lg.is_finite() && lm.is_finite()) {
                    return f64::INFINITY;
                }
                self.mesh
                    .add_log_power_grad(&self.mesh.v_tris, &self.v, q, lg, 1.0 / q, &mut self.gv);
                for &k in &self.v_nodes {
                    let v = self.v[k];
                    if v != 0.0 {
                        self.gv[k] -= (self.log_w[k] + (q - 1.0) * ln_abs(v) - lm).exp() * v.signum();
                    }
                }
                (lg - lm) / q
            }
        };
        let nu = self.n_u();
        for (n, &k) in self.u_nodes.iter().enumerate() {
            grad[n] = self.gu[k];
        }
        for (n, &k) in self.v_nodes.iter().enumerate() {
            grad[nu + n] = self.gv[k];
        }
        value
    }

    fn normalize(&mut self, x: &mut [f64]) -> Vec<(Range<usize>, f64)> {
        self.scatter(x);
        let nu = self.n_u();
        let n = self.dim();
        let (la, lb) = match self.kind {
            Kind::Coupled(e) => {
                let logs = self.coupled_logs(&e);
                let lt = Self::log_theta(&e, logs);
                if !lt.is_finite() {
                    return Vec::new();
                }
                ((lt + e.alpha.ln() - logs.0) / e.p, (lt + e.beta.ln() - logs.1) / e.q)
            }
            Kind::Dirichlet { p } => (-self.log_mass(&self.u, &self.u_nodes, p) / p, 0.0),
            Kind::Neumann { q } => (0.0, -self.log_mass(&self.v, &self.v_nodes, q) / q),
        };
        let (a, b) = (la.exp(), lb.exp());
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Vec::new();
        }
        x[..nu].iter_mut().for_each(|v| *v *= a);
        x[nu..].iter_mut().for_each(|v| *v *= b);
        self.scatter(x);

        if self.since_refresh.is_multiple_of(REFRESH_EVERY) {
            self.refresh_preconditioner();
        }
        self.since_refresh += 1;
        vec![(0..nu, a), (nu..n, b)]
    }

    fn stationarity(&self, _x: &[f64], grad: &[f64]) -> f64 {
        let root = self.kind.root();
        let nu = self.n_u();
        let mut r: f64 = 0.0;
        for (n, &k) in self.u_nodes.iter().enumerate() {
            r = r.max((root * grad[n]).abs() * (-0.5 * self.log_w[k]).exp());
        }
        let mut total = 0.0;
        for (n, &k) in self.v_nodes.iter().enumerate() {
            let g = root * grad[nu + n];
            total += g;
            if self.log_w[k] > f64::NEG_INFINITY {
                r = r.max(g.abs() * (-0.5 * self.log_w[k]).exp());
            }
        }
        r.max(total.abs() / self.area.sqrt())
    }

    fn precondition(&self, r: &mut [f64]) {
        let nu = self.n_u();
        if let Some(pu) = &self.pre_u {
            pu.solve_in_place(&mut r[..nu]);
        }
        if let Some(pv) = &self.pre_v {
            pv.solve_in_place(&mut r[nu..]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(dom: &GridDomain, kind: Kind) {
        let mut prob = Problem::new(dom, kind).unwrap();
        let (nx, ny) = dom.shape();
        let u = dom.sample(|x, y| (1.0 - x * x - y * y).max(0.0) * (1.0 + 0.3 * x));
        let v = dom.sample(|x, y| x + 0.2 * y * y - 0.1);
        let mut ug = u.into_raw_vec_and_offset().0;
        for i in 0..nx {
            for j in 0..ny {
                if !dom.is_interior(i, j) {
                    ug[i * ny + j] = 0.0;
                }
            }
        }
        let mut x = prob.gather(&ug, &v.into_raw_vec_and_offset().0);
        prob.retract(&mut x).unwrap();
        let n = prob.dim();
        let mut g = vec![0.0; n];
        prob.value_grad(&x, &mut g);
        let mut scratch = vec![0.0; n];
        for k in (0..n).step_by(n / 7 + 1) {
            let step = 1e-6 * x[k].abs().max(1e-2);
            let mut xp = x.clone();
            xp[k] += step;
            let mut xm = x.clone();
            xm[k] -= step;
            let fd = (prob.value_grad(&xp, &mut scratch) - prob.value_grad(&xm, &mut scratch)) / (2.0 * step);
            assert!(
                (fd - g[k]).abs() <= 1e-4 * g[k].abs().max(1e-6),
                "k={k} fd={fd} g={}",
                g[k]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = GridDomain::disk(1.0, 13).unwrap();
        fd_check(&d, Kind::Coupled(Exponents::with_derived_beta(4.0, 3.0, 2.0).unwrap()));
        fd_check(&d, Kind::Dirichlet { p: 3.0 });
        fd_check(&d, Kind::Neumann { q: 2.5 });
    }

    #[test]
    fn retraction_zeroes_the_constraint_derivative_along_constants() {
        let d = GridDomain::rectangle(1.0, 0.5, 11, 9).unwrap();
        let e = Exponents::with_derived_beta(4.0, 4.0, 2.0).unwrap();
        let mut prob = Problem::new(&d, Kind::Coupled(e)).unwrap();
        let u = d.sample(|x, y| (1.0 - x * x) * (0.25 - y * y));
        let v = d.sample(|x, y| x + y + 0.5);
        let mut x = prob.gather(&u.into_raw_vec_and_offset().0, &v.into_raw_vec_and_offset().0);
        prob.retract(&mut x).unwrap();
        let mut g = vec![0.0; prob.dim()];
        prob.value_grad(&x, &mut g);
        let along: f64 = g[prob.n_u()..].iter().sum();
        let scale: f64 = g[prob.n_u()..].iter().map(|a| a.abs()).sum();
        assert!(along.abs() <= 1e-12 * scale);
    }
}
