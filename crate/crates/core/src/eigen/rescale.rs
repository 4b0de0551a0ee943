//! Optimal rescaling `(u, v) -> (a u, b v)` at unit coupling.
//!
//! Minimizing `a^p A + b^q B` subject to `a^alpha b^beta C = 1` gives the
//! stationarity system `p a^p A = theta alpha`, `q b^q B = theta beta`, and
//! since `alpha/p + beta/q = 1`,
//!
//! ```text
//! theta = (pA/alpha)^(alpha/p) (qB/beta)^(beta/q) / C
//! ```
//!
//! which is also the minimal energy. `theta` is invariant under both
//! scalings, so it is the quotient the solver descends on.

use crate::calculus::{log_coupling, EnergyMesh, Exponents, FieldPair};
use crate::error::{Component, Error, Result};
use crate::geometry::GridDomain;

/// Logs of the three integrals `int |∇u|^p`, `int |∇v|^q`, `int |u|^alpha |v|^beta`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogIntegrals {
    pub grad_u: f64,
    pub grad_v: f64,
    pub coupling: f64,
}

impl LogIntegrals {
    pub fn compute(fp: &FieldPair, e: &Exponents, dom: &GridDomain, mesh: &EnergyMesh) -> Self {
        let u = fp.u.as_slice().expect("standard layout");
        let v = fp.v.as_slice().expect("standard layout");
        Self {
            grad_u: mesh.log_power(&mesh.u_tris, u, e.p),
            grad_v: mesh.log_power(&mesh.v_tris, v, e.q),
            coupling: log_coupling(fp, e, dom),
        }
    }

    /// `ln theta`; `+inf` when any integral vanishes.
    pub fn log_theta(&self, e: &Exponents) -> f64 {
        if !(self.grad_u.is_finite() && self.grad_v.is_finite() && self.coupling.is_finite()) {
            return f64::INFINITY;
        }
        e.alpha / e.p * (self.grad_u - e.alpha.ln()) + e.beta / e.q * (self.grad_v - e.beta.ln()) - self.coupling
    }

    /// `(ln a, ln b)` of the optimal rescale.
    pub fn log_factors(&self, e: &Exponents) -> (f64, f64) {
        let lt = self.log_theta(e);
        (
            (lt + e.alpha.ln() - self.grad_u) / e.p,
            (lt + e.beta.ln() - self.grad_v) / e.q,
        )
    }

    pub fn check(&self) -> Result<()> {
        if self.grad_u == f64::NEG_INFINITY {
            return Err(Error::FlatComponent(Component::U));
        }
        if self.grad_v == f64::NEG_INFINITY {
            return Err(Error::FlatComponent(Component::V));
        }
        if self.coupling == f64::NEG_INFINITY {
            return Err(Error::Admissibility("coupling integral vanishes".into()));
        }
        Ok(())
    }
}

/// The `(a, b)` minimizing the energy of `(a u, b v)` at unit coupling.
pub fn optimal_rescale(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> Result<(f64, f64)> {
    dom.check_shape(fp.u.dim())?;
    dom.check_shape(fp.v.dim())?;
    let mesh = EnergyMesh::new(dom);
    let li = LogIntegrals::compute(fp, e, dom, &mesh);
    li.check()?;
    let (la, lb) = li.log_factors(e);
    Ok((la.exp(), lb.exp()))
}

/// The balanced quotient `theta`: the least Rayleigh quotient over all
/// rescalings `(a u, b v)`.
pub fn balanced_quotient(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> Result<f64> {
    let mesh = EnergyMesh::new(dom);
    let li = LogIntegrals::compute(fp, e, dom, &mesh);
    li.check()?;
    Ok(li.log_theta(e).exp())
}
