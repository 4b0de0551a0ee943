//! Discrete differential and integral operators on a [`GridDomain`].
//!
//! Two gradient discretizations live here:
//!
//! * [`gradient_field`] gives nodal central differences (one-sided where a
//!   neighbour is missing). It feeds the pointwise operators such as
//!   [`infinity_laplacian`] and the viscosity residuals.
//! * The energies use piecewise-linear gradients on the four corner triangles
//!   of every cell (the average of both diagonal splittings). Nodal central
//!   differences annihilate the checkerboard mode and cannot be minimized.
//!
//! Powers `|x|^p` are always formed as `exp(p ln|x|)` with zero short-circuited,
//! and large sums are accumulated in log space.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{corner_triangles, GridDomain};
use crate::numerics::{ln_abs, LogSumExp, SignedLogSum};

/// Tolerance on the coupling identity `alpha/p + beta/q = 1`.
pub const EXPONENT_IDENTITY_TOL: f64 = 1e-12;

/// Largest exponent argument accepted before [`energy`] reports a scale error.
pub const MAX_EXP_ARG: f64 = 700.0;

/// The exponent quadruple `(p, q, alpha, beta)` tied by `alpha/p + beta/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64, alpha: f64, beta: f64) -> Result<Self> {
        let e = Self { p, q, alpha, beta };
        e.validate()?;
        Ok(e)
    }

    /// `beta = q (1 - alpha/p)`.
    pub fn with_derived_beta(p: f64, q: f64, alpha: f64) -> Result<Self> {
        Self::new(p, q, alpha, q * (1.0 - alpha / p))
    }

    /// Schedule form `alpha = gamma p`, `q = big_q p`, `beta = q (1 - alpha/p)`.
    pub fn from_schedule(p: f64, gamma: f64, big_q: f64) -> Result<Self> {
        let alpha = gamma * p;
        let q = big_q * p;
        Self::new(p, q, alpha, q * (1.0 - alpha / p))
    }

    fn validate(&self) -> Result<()> {
        let Self { p, q, alpha, beta } = *self;
        for (name, v) in [("p", p), ("q", q), ("alpha", alpha), ("beta", beta)] {
            if !v.is_finite() {
                return Err(Error::InvalidExponents(format!("{name} is not finite")));
            }
        }
        if p <= 1.0 || q <= 1.0 {
            return Err(Error::InvalidExponents(format!(
                "need p > 1 and q > 1, got p = {p}, q = {q}"
            )));
        }
        if alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidExponents(format!(
                "need alpha > 0 and beta > 0, got alpha = {alpha}, beta = {beta}"
            )));
        }
        let defect = alpha / p + beta / q - 1.0;
        if defect.abs() > EXPONENT_IDENTITY_TOL {
            return Err(Error::InvalidExponents(format!("alpha/p + beta/q - 1 = {defect:e}")));
        }
        Ok(())
    }

    /// Whether `beta > 1`, the hypothesis under which the first nontrivial
    /// eigenvalue is characterized variationally.
    pub fn theory_flag(&self) -> bool {
        self.beta > 1.0
    }
}

/// The pair `(u, v)`: `u` carries the Dirichlet condition, `v` is free on the
/// boundary. Off-domain entries are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl FieldPair {
    /// Validates shapes, finiteness, and `u = 0` on the boundary mask.
    pub fn new(u: Array2<f64>, v: Array2<f64>, dom: &GridDomain) -> Result<Self> {
        let fp = Self::unchecked(u, v, dom)?;
        for ((i, j), &x) in fp.u.indexed_iter() {
            if dom.is_boundary(i, j) && x.abs() > 1e-14 {
                return Err(Error::Admissibility(format!("u = {x:e} on boundary node ({i}, {j})")));
            }
        }
        Ok(fp)
    }

    /// Like [`FieldPair::new`] but without the boundary-trace check; used when
    /// a test or oracle deliberately feeds a field that is nonzero on the
    /// boundary.
    pub fn unchecked(u: Array2<f64>, v: Array2<f64>, dom: &GridDomain) -> Result<Self> {
        dom.check_shape(u.dim())?;
        dom.check_shape(v.dim())?;
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("field pair"));
        }
        let mut u = u.as_standard_layout().into_owned();
        let mut v = v.as_standard_layout().into_owned();
        for ((i, j), k) in dom.nodes().indexed_iter() {
            if *k == crate::geometry::NodeKind::Outside {
                u[[i, j]] = 0.0;
                v[[i, j]] = 0.0;
            }
        }
        Ok(Self { u, v })
    }

    /// `(a u, b v)`.
    pub fn scaled(&self, a: f64, b: f64) -> Self {
        Self {
            u: &self.u * a,
            v: &self.v * b,
        }
    }
}

/// Gradient field as two grid components.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

/// Scalar grid field with a per-node "defined" mask.
#[derive(Debug, Clone)]
pub struct MaskedField {
    pub values: Array2<f64>,
    pub defined: Array2<bool>,
}

fn check_field(f: &Array2<f64>, dom: &GridDomain, what: &'static str) -> Result<()> {
    dom.check_shape(f.dim())?;
    for ((i, j), x) in f.indexed_iter() {
        if dom.in_domain(i, j) && !x.is_finite() {
            return Err(Error::NonFinite(what));
        }
    }
    Ok(())
}

/// Nodal gradient: central differences where both neighbours along an axis
/// are in the domain, one-sided where only one is, zero otherwise.
pub fn gradient_field(f: &Array2<f64>, dom: &GridDomain) -> Result<VectorField> {
    dom.check_shape(f.dim())?;
    let (nx, ny) = dom.shape();
    let mut gx = Array2::zeros((nx, ny));
    let mut gy = Array2::zeros((nx, ny));
    for i in 0..nx {
        for j in 0..ny {
            if !dom.in_domain(i, j) {
                continue;
            }
            let left = i > 0 && dom.in_domain(i - 1, j);
            let right = i + 1 < nx && dom.in_domain(i + 1, j);
            gx[[i, j]] = match (left, right) {
                (true, true) => (f[[i + 1, j]] - f[[i - 1, j]]) / (2.0 * dom.hx()),
                (false, true) => (f[[i + 1, j]] - f[[i, j]]) / dom.hx(),
                (true, false) => (f[[i, j]] - f[[i - 1, j]]) / dom.hx(),
                (false, false) => 0.0,
            };
            let down = j > 0 && dom.in_domain(i, j - 1);
            let up = j + 1 < ny && dom.in_domain(i, j + 1);
            gy[[i, j]] = match (down, up) {
                (true, true) => (f[[i, j + 1]] - f[[i, j - 1]]) / (2.0 * dom.hy()),
                (false, true) => (f[[i, j + 1]] - f[[i, j]]) / dom.hy(),
                (true, false) => (f[[i, j]] - f[[i, j - 1]]) / dom.hy(),
                (false, false) => 0.0,
            };
        }
    }
    Ok(VectorField { x: gx, y: gy })
}

/// `sum f(node) * weight(node)` with the lumped (trapezoid on rectangles)
/// weights of the domain.
pub fn integrate(f: &Array2<f64>, dom: &GridDomain) -> Result<f64> {
    check_field(f, dom, "integrand")?;
    Ok(f.iter()
        .zip(dom.weights().iter())
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, w)| x * w)
        .sum())
}

/// `sum(|∇u|^p)/p + sum(|∇v|^q)/q` over corner triangles.
pub fn energy(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> Result<f64> {
    let mesh = EnergyMesh::new(dom);
    check_pair(fp, dom)?;
    let u = fp.u.as_slice().expect("standard layout");
    let v = fp.v.as_slice().expect("standard layout");
    for (tris, f, p, what) in [(&mesh.u_tris, u, e.p, "grad u"), (&mesh.v_tris, v, e.q, "grad v")] {
        let lg = mesh.max_log_grad(tris, f);
        if lg > 0.0 && p * lg > MAX_EXP_ARG {
            return Err(Error::Scale { what, exponent: p * lg });
        }
    }
    let a = mesh.log_power(&mesh.u_tris, u, e.p).exp() / e.p;
    let b = mesh.log_power(&mesh.v_tris, v, e.q).exp() / e.q;
    Ok(a + b)
}

/// Derivatives of [`energy`] with respect to every nodal value of `u` and
/// of `v`.
pub fn energy_gradient(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> Result<(Array2<f64>, Array2<f64>)> {
    check_pair(fp, dom)?;
    let mesh = EnergyMesh::new(dom);
    let u = fp.u.as_slice().expect("standard layout");
    let v = fp.v.as_slice().expect("standard layout");
    let mut du = vec![0.0; u.len()];
    let mut dv = vec![0.0; v.len()];
    mesh.add_log_power_grad(&mesh.u_tris, u, e.p, e.p.ln(), 1.0, &mut du);
    mesh.add_log_power_grad(&mesh.v_tris, v, e.q, e.q.ln(), 1.0, &mut dv);
    let shape = dom.shape();
    Ok((
        Array2::from_shape_vec(shape, du).expect("grid shape"),
        Array2::from_shape_vec(shape, dv).expect("grid shape"),
    ))
}

/// `sum |u|^alpha |v|^beta` with the domain weights.
pub fn coupling(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> Result<f64> {
    check_pair(fp, dom)?;
    Ok(log_coupling(fp, e, dom).exp())
}

pub(crate) fn log_coupling(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> f64 {
    let mut acc = LogSumExp::new();
    for ((u, v), w) in fp.u.iter().zip(fp.v.iter()).zip(dom.weights().iter()) {
        if *w > 0.0 && *u != 0.0 && *v != 0.0 {
            acc.add(w.ln() + e.alpha * ln_abs(*u) + e.beta * ln_abs(*v));
        }
    }
    acc.value()
}

/// Signed sum `sum |u|^alpha |v|^(beta-2) v`, kept in relative form.
pub(crate) fn constraint_sum(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> SignedLogSum {
    let mut acc = SignedLogSum::new();
    for ((u, v), w) in fp.u.iter().zip(fp.v.iter()).zip(dom.weights().iter()) {
        if *w > 0.0 && *u != 0.0 && *v != 0.0 {
            acc.add(*v > 0.0, w.ln() + e.alpha * ln_abs(*u) + (e.beta - 1.0) * ln_abs(*v));
        }
    }
    acc
}

/// `sum |u|^alpha |v|^(beta-2) v`, taking the value 0 where `v = 0`.
pub fn constraint_value(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> Result<f64> {
    if e.beta <= 1.0 {
        return Err(Error::Unsupported(format!("constraint needs beta > 1, got {}", e.beta)));
    }
    check_pair(fp, dom)?;
    Ok(constraint_sum(fp, e, dom).signed())
}

/// Energy over coupling.
pub fn rayleigh_quotient(fp: &FieldPair, e: &Exponents, dom: &GridDomain) -> Result<f64> {
    let c = coupling(fp, e, dom)?;
    if c <= 0.0 {
        return Err(Error::Admissibility(
            "coupling integral vanishes, quotient undefined".into(),
        ));
    }
    Ok(energy(fp, e, dom)? / c)
}

/// `<D²f ∇f, ∇f>` by central differences at interior nodes whose full 3x3
/// stencil lies in the domain; other nodes are left undefined.
pub fn infinity_laplacian(f: &Array2<f64>, dom: &GridDomain) -> Result<MaskedField> {
    dom.check_shape(f.dim())?;
    let (nx, ny) = dom.shape();
    let mut values = Array2::zeros((nx, ny));
    let mut defined = Array2::from_elem((nx, ny), false);
    for i in 1..nx.saturating_sub(1) {
        for j in 1..ny.saturating_sub(1) {
            if !dom.is_interior(i, j) || !full_stencil(dom, i, j) {
                continue;
            }
            let d = Derivatives::central(f, dom, i, j);
            values[[i, j]] = d.infinity_laplacian();
            defined[[i, j]] = true;
        }
    }
    Ok(MaskedField { values, defined })
}

pub(crate) fn full_stencil(dom: &GridDomain, i: usize, j: usize) -> bool {
    let (nx, ny) = dom.shape();
    if i == 0 || j == 0 || i + 1 >= nx || j + 1 >= ny {
        return false;
    }
    (i - 1..=i + 1).all(|a| (j - 1..=j + 1).all(|b| dom.in_domain(a, b)))
}

/// First and second derivatives at one node.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Derivatives {
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fyy: f64,
    pub fxy: f64,
}

impl Derivatives {
    /// Central differences; the caller guarantees a full 3x3 stencil.
    pub fn central(f: &Array2<f64>, dom: &GridDomain, i: usize, j: usize) -> Self {
        let (hx, hy) = (dom.hx(), dom.hy());
        let c = f[[i, j]];
        Self {
            fx: (f[[i + 1, j]] - f[[i - 1, j]]) / (2.0 * hx),
            fy: (f[[i, j + 1]] - f[[i, j - 1]]) / (2.0 * hy),
            fxx: (f[[i + 1, j]] - 2.0 * c + f[[i - 1, j]]) / (hx * hx),
            fyy: (f[[i, j + 1]] - 2.0 * c + f[[i, j - 1]]) / (hy * hy),
            fxy: (f[[i + 1, j + 1]] - f[[i + 1, j - 1]] - f[[i - 1, j + 1]] + f[[i - 1, j - 1]]) / (4.0 * hx * hy),
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.fx.hypot(self.fy)
    }

    pub fn laplacian(&self) -> f64 {
        self.fxx + self.fyy
    }

    pub fn infinity_laplacian(&self) -> f64 {
        self.fx * self.fx * self.fxx + 2.0 * self.fx * self.fy * self.fxy + self.fy * self.fy * self.fyy
    }
}

fn check_pair(fp: &FieldPair, dom: &GridDomain) -> Result<()> {
    check_field(&fp.u, dom, "u")?;
    check_field(&fp.v, dom, "v")?;
    if !fp.u.is_standard_layout() || !fp.v.is_standard_layout() {
        return Err(Error::Unsupported("fields must be in standard layout".into()));
    }
    Ok(())
}

/// One corner triangle, stored as the flat indices of its horizontal edge
/// `(left, right)` and vertical edge `(low, high)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tri {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

/// Triangle sets and spacings for the discrete energies.
///
/// `u_tris` holds every triangle with an interior vertex or with all vertices
/// in the domain (`u` is extended by zero outside). `v_tris` holds only
/// triangles with all three vertices in the domain.
#[derive(Debug, Clone)]
pub(crate) struct EnergyMesh {
    pub hx: f64,
    pub hy: f64,
    ln_weight: f64,
    pub u_tris: Vec<Tri>,
    pub v_tris: Vec<Tri>,
}

impl EnergyMesh {
    pub fn new(dom: &GridDomain) -> Self {
        let (nx, ny) = dom.shape();
        let flat = |(i, j): (usize, usize)| i * ny + j;
        let mut u_tris = Vec::new();
        let mut v_tris = Vec::new();
        for t in corner_triangles(nx, ny) {
            let [c, hn, vn] = t;
            let (x0, x1) = if c.0 < hn.0 { (c, hn) } else { (hn, c) };
            let (y0, y1) = if c.1 < vn.1 { (c, vn) } else { (vn, c) };
            let tri = Tri {
                x0: flat(x0),
                x1: flat(x1),
                y0: flat(y0),
                y1: flat(y1),
            };
            let all_in = t.iter().all(|&(i, j)| dom.in_domain(i, j));
            let any_interior = t.iter().any(|&(i, j)| dom.is_interior(i, j));
            if all_in {
                v_tris.push(tri);
            }
            if all_in || any_interior {
                u_tris.push(tri);
            }
        }
        Self {
            hx: dom.hx(),
            hy: dom.hy(),
            ln_weight: (dom.hx() * dom.hy() / 4.0).ln(),
            u_tris,
            v_tris,
        }
    }

    #[inline]
    fn grad(&self, t: &Tri, f: &[f64]) -> (f64, f64) {
        ((f[t.x1] - f[t.x0]) / self.hx, (f[t.y1] - f[t.y0]) / self.hy)
    }

    /// `max ln|∇f|` over the triangles (`-inf` for a flat field).
    pub fn max_log_grad(&self, tris: &[Tri], f: &[f64]) -> f64 {
        tris.iter()
            .map(|t| {
                let (gx, gy) = self.grad(t, f);
                0.5 * (gx * gx + gy * gy).ln()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ln sum_T w |∇f|^p`.
    pub fn log_power(&self, tris: &[Tri], f: &[f64], p: f64) -> f64 {
        let mut acc = LogSumExp::new();
        for t in tris {
            let (gx, gy) = self.grad(t, f);
            let s = gx * gx + gy * gy;
            if s > 0.0 {
                acc.add(0.5 * p * s.ln());
            }
        }
        acc.value() + self.ln_weight
    }

    /// Adds `scale * d(ln sum_T w |∇f|^p)/df` into `grad` (flat indexing).
    pub fn add_log_power_grad(&self, tris: &[Tri], f: &[f64], p: f64, log_int: f64, scale: f64, grad: &mut [f64]) {
        let offset = self.ln_weight - log_int + p.ln();
        for t in tris {
            let (gx, gy) = self.grad(t, f);
            let s = gx * gx + gy * gy;
            if s <= 0.0 {
                continue;
            }
            let c = scale * (0.5 * (p - 2.0) * s.ln() + offset).exp();
            let dx = c * gx / self.hx;
            let dy = c * gy / self.hy;
            grad[t.x1] += dx;
            grad[t.x0] -= dx;
            grad[t.y1] += dy;
            grad[t.y0] -= dy;
        }
    }

    /// Lower-triangle triplets `(row, col, value)` of
    /// `exp(-log_int) * sum_T w |∇f|^(p-2) (|∇δ|^2 + (p-2) (n·∇δ)^2)`, the
    /// Hessian of `sum_T w |∇f|^p / exp(log_int)` up to the factor `p`.
    /// Triangle weights are floored at `floor` times the largest one.
    pub fn hessian_entries(
        &self,
        tris: &[Tri],
        f: &[f64],
        p: f64,
        log_int: f64,
        floor: f64,
    ) -> Vec<(usize, usize, f64)> {
        let lws: Vec<(f64, f64, f64)> = tris
            .iter()
            .map(|t| {
                let (gx, gy) = self.grad(t, f);
                let s = gx * gx + gy * gy;
                let lw = if s > 0.0 {
                    0.5 * (p - 2.0) * s.ln()
                } else {
                    f64::NEG_INFINITY
                };
                (lw, gx, gy)
            })
            .collect();
        let max_lw = lws.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let lfloor = max_lw + floor.ln();
        let base = self.ln_weight - log_int;
        let mut out = Vec::with_capacity(10 * tris.len());
        for (t, &(lw, gx, gy)) in tris.iter().zip(&lws) {
            let c = (lw.max(lfloor) + base).exp();
            let s = gx * gx + gy * gy;
            let (nx, ny) = if s > 0.0 && lw >= lfloor {
                let r = s.sqrt();
                (gx / r, gy / r)
            } else {
                (0.0, 0.0)
            };
            let a = [
                [c * (1.0 + (p - 2.0) * nx * nx), c * (p - 2.0) * nx * ny],
                [c * (p - 2.0) * nx * ny, c * (1.0 + (p - 2.0) * ny * ny)],
            ];
            // ∇δ = B δ over the slots (x0, x1, y0, y1)
            let idx = [t.x0, t.x1, t.y0, t.y1];
            let b = [
                [-1.0 / self.hx, 1.0 / self.hx, 0.0, 0.0],
                [0.0, 0.0, -1.0 / self.hy, 1.0 / self.hy],
            ];
            for sa in 0..4 {
                for sb in 0..4 {
                    if idx[sa] < idx[sb] {
                        continue;
                    }
                    let mut m = 0.0;
                    for k in 0..2 {
                        for l in 0..2 {
                            m += b[k][sa] * a[k][l] * b[l][sb];
                        }
                    }
                    if m != 0.0 {
                        out.push((idx[sa], idx[sb], m));
                    }
                }
            }
        }
        out
    }
}
