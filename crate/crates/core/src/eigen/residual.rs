use crate::calculus::{EnergyMesh, Exponents, FieldPair};
use crate::error::Result;
use crate::geometry::GridDomain;
use crate::numerics::ln_abs;

/// Weak-form defect of a candidate eigenpair, tested against nodal hat
/// functions normalized in the lumped L2 norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElResidual {
    /// Largest defect over hat functions at interior nodes.
    pub r_u: f64,
    /// Largest defect over hat functions at all domain nodes and the
    /// constant test function.
    pub r_v: f64,
    /// The `v` equation tested with `z = 1`. Only the coupling term survives,
    /// so this is `lambda * beta * int |u|^alpha |v|^(beta-2) v`.
    pub constant_test: f64,
}

/// Residuals of
/// `int |∇u|^(p-2) ∇u·∇w = lambda alpha int |u|^(alpha-2) u |v|^beta w` and
/// `int |∇v|^(q-2) ∇v·∇z = lambda beta int |u|^alpha |v|^(beta-2) v z`.
pub fn euler_lagrange_residual(fp: &FieldPair, lambda: f64, e: &Exponents, dom: &GridDomain) -> Result<ElResidual> {
    let fp = FieldPair::unchecked(fp.u.clone(), fp.v.clone(), dom)?;
    let mesh = EnergyMesh::new(dom);
    let u = fp.u.as_slice().expect("standard layout");
    let v = fp.v.as_slice().expect("standard layout");
    let n = u.len();
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    mesh.add_log_power_grad(&mesh.u_tris, u, e.p, e.p.ln(), 1.0, &mut du);
    mesh.add_log_power_grad(&mesh.v_tris, v, e.q, e.q.ln(), 1.0, &mut dv);

    let ny = dom.ny();
    let mut r_u: f64 = 0.0;
    let mut r_v: f64 = 0.0;
    let mut constant = 0.0;
    let mut grad_sum = 0.0;
    for ((i, j), &w) in dom.weights().indexed_iter() {
        if w <= 0.0 {
            continue;
        }
        let k = i * ny + j;
        let (a, b) = (u[k], v[k]);
        let (cu, cv) = if a != 0.0 && b != 0.0 {
            let base = w.ln() + e.alpha * ln_abs(a) + e.beta * ln_abs(b);
            (
                e.alpha * (base - ln_abs(a)).exp() * a.signum(),
                e.beta * (base - ln_abs(b)).exp() * b.signum(),
            )
        } else {
            (0.0, 0.0)
        };
        let norm = w.sqrt();
        if dom.is_interior(i, j) {
            r_u = r_u.max((du[k] - lambda * cu).abs() / norm);
        }
        r_v = r_v.max((dv[k] - lambda * cv).abs() / norm);
        constant += lambda * cv;
        grad_sum += dv[k];
    }
    r_v = r_v.max((grad_sum - constant).abs() / dom.area().sqrt());
    Ok(ElResidual {
        r_u,
        r_v,
        constant_test: constant,
    })
}
