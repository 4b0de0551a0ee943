//! Pointwise residuals of the limit operators and of the finite-`p`
//! operator on grid fields.
//!
//! * [`h_infinity_residual`]: `min{-Δ∞u, |∇u| - Λ u^Γ |v|^((1-Γ)Q)}`.
//! * [`f_infinity_residual`]: the three-region operator for `v`, a min-form
//!   where `v > 0`, the mirrored max-form where `v < 0` and `-Δ∞v` in a
//!   deadband around `{v = 0}`, with the Neumann operator `⟨∇v, ν⟩` on the
//!   boundary.
//! * [`h_p_residual`]: the expanded `p`-Laplacian equation for `u`,
//!   evaluated in log scale and reported as `sign(r) |r|^(1/p)`.
//!
//! The strong forms are classically undefined on kinks of the fields (cone
//! apexes, ridges, the edge of a support). Nodes within
//! [`EXCLUSION_FACTOR`]` * h` of a detected kink keep their value in the
//! residual field but are tagged [`Region::Excluded`] and left out of the sup.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::calculus::{full_stencil, gradient_field, Derivatives, Exponents, MaskedField, VectorField};
use crate::error::Result;
use crate::geometry::GridDomain;
use crate::limit::LimitSpec;
use crate::numerics::{ln_abs, SignedLogSum};

/// Exclusion radius around singular nodes, in grid spacings.
pub const EXCLUSION_FACTOR: f64 = 3.0;

/// Half-width of the `{v = 0}` band, in units of `h ‖∇v‖∞`.
pub const DEADBAND_KAPPA: f64 = 2.0;

/// A node is a kink when its forward and backward differences along an axis
/// differ by more than this fraction of the central gradient norm.
pub const KINK_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    VPos,
    VNeg,
    VZero,
    Boundary,
    Excluded,
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub residual_field: MaskedField,
    /// `max |residual|` over defined nodes not tagged [`Region::Excluded`].
    pub sup_defect: f64,
    /// One tag per domain node, `None` outside the domain.
    pub region_tags: Array2<Option<Region>>,
    pub excluded_radius: f64,
    /// `max |⟨∇v, ν⟩|` over boundary nodes, recorded for the `v` operator.
    pub boundary_normal_defect: Option<f64>,
}

impl ResidualReport {
    fn finish(
        values: Array2<f64>,
        defined: Array2<bool>,
        region_tags: Array2<Option<Region>>,
        excluded_radius: f64,
        boundary_normal_defect: Option<f64>,
    ) -> Self {
        let sup_defect = values
            .iter()
            .zip(defined.iter())
            .zip(region_tags.iter())
            .filter(|((_, &d), t)| d && **t != Some(Region::Excluded))
            .fold(0.0_f64, |m, ((x, _), _)| m.max(x.abs()));
        Self {
            residual_field: MaskedField { values, defined },
            sup_defect,
            region_tags,
            excluded_radius,
            boundary_normal_defect,
        }
    }

    /// Number of nodes carrying `region`.
    pub fn count(&self, region: Region) -> usize {
        self.region_tags.iter().filter(|t| **t == Some(region)).count()
    }

    /// `max |residual|` over defined nodes tagged `region`.
    pub fn sup_in(&self, region: Region) -> f64 {
        let f = &self.residual_field;
        f.values
            .iter()
            .zip(f.defined.iter())
            .zip(self.region_tags.iter())
            .filter(|((_, &d), t)| d && **t == Some(region))
            .fold(0.0_f64, |m, ((x, _), _)| m.max(x.abs()))
    }
}

/// Interior nodes where `f` has a kink: a jump between the one-sided
/// differences that is large against the central gradient, or a nonzero
/// value at the edge of a zero plateau.
pub fn singular_nodes(f: &Array2<f64>, dom: &GridDomain) -> Result<Vec<(usize, usize)>> {
    dom.check_shape(f.dim())?;
    let scale = f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let tiny = 64.0 * f64::EPSILON * scale;
    let (hx, hy) = (dom.hx(), dom.hy());
    let mut out = Vec::new();
    let (nx, ny) = dom.shape();
    for i in 1..nx.saturating_sub(1) {
        for j in 1..ny.saturating_sub(1) {
            if !dom.is_interior(i, j) {
                continue;
            }
            let c = f[[i, j]];
            let (xp, xm) = ((f[[i + 1, j]] - c) / hx, (c - f[[i - 1, j]]) / hx);
            let (yp, ym) = ((f[[i, j + 1]] - c) / hy, (c - f[[i, j - 1]]) / hy);
            // off-domain entries are placeholders, so only compare one-sided
            // differences along axes with both neighbours in the domain
            let x_ok = dom.in_domain(i + 1, j) && dom.in_domain(i - 1, j);
            let y_ok = dom.in_domain(i, j + 1) && dom.in_domain(i, j - 1);
            let jump_x = if x_ok { (xp - xm).abs() } else { 0.0 };
            let jump_y = if y_ok { (yp - ym).abs() } else { 0.0 };
            let jump = jump_x.max(jump_y);
            let one_sided = |ok: bool, plus_in: bool, p: f64, m: f64| match (ok, plus_in) {
                (true, _) => 0.5 * (p + m),
                (false, true) => p,
                (false, false) => m,
            };
            let gx = one_sided(x_ok, dom.in_domain(i + 1, j), xp, xm);
            let gy = one_sided(y_ok, dom.in_domain(i, j + 1), yp, ym);
            let grad = gx.hypot(gy);
            let edge = c != 0.0 && support_edge(f, dom, i, j);
            if edge || (jump * hx.min(hy) > tiny && jump > KINK_RATIO * grad) {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// Whether a neighbour of `(i, j)` is an exact zero that continues as zero
/// (or leaves the domain) one step further along the same axis. A sign change
/// through a zero node, as in an odd plane, does not count.
fn support_edge(f: &Array2<f64>, dom: &GridDomain, i: usize, j: usize) -> bool {
    let (nx, ny) = dom.shape();
    let zero_or_off = |a: isize, b: isize| {
        a < 0
            || b < 0
            || a as usize >= nx
            || b as usize >= ny
            || !dom.in_domain(a as usize, b as usize)
            || f[[a as usize, b as usize]] == 0.0
    };
    let (i, j) = (i as isize, j as isize);
    [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(di, dj)| {
        let (a, b) = ((i + di) as usize, (j + dj) as usize);
        dom.in_domain(a, b) && f[[a, b]] == 0.0 && zero_or_off(i + 2 * di, j + 2 * dj)
    })
}

/// Mask of domain nodes within `radius` of any of `centers`.
fn exclusion_mask(dom: &GridDomain, centers: &[(usize, usize)], radius: f64) -> Array2<bool> {
    let (nx, ny) = dom.shape();
    let mut mask = Array2::from_elem((nx, ny), false);
    let (ri, rj) = ((radius / dom.hx()).ceil() as usize, (radius / dom.hy()).ceil() as usize);
    let r2 = radius * radius * (1.0 + 1e-9);
    for &(ci, cj) in centers {
        for i in ci.saturating_sub(ri)..(ci + ri + 1).min(nx) {
            for j in cj.saturating_sub(rj)..(cj + rj + 1).min(ny) {
                let (dx, dy) = (dom.x(i) - dom.x(ci), dom.y(j) - dom.y(cj));
                if dx * dx + dy * dy <= r2 {
                    mask[[i, j]] = true;
                }
            }
        }
    }
    mask
}

/// Derivatives at a node: central differences on a full stencil, otherwise
/// the nodal gradient and the symmetrized gradient of the gradient.
struct Stencils {
    grad: VectorField,
    gxx: VectorField,
    gyy: VectorField,
}

impl Stencils {
    fn new(f: &Array2<f64>, dom: &GridDomain) -> Result<Self> {
        let grad = gradient_field(f, dom)?;
        let gxx = gradient_field(&grad.x, dom)?;
        let gyy = gradient_field(&grad.y, dom)?;
        Ok(Self { grad, gxx, gyy })
    }

    fn at(&self, f: &Array2<f64>, dom: &GridDomain, i: usize, j: usize) -> Derivatives {
        if full_stencil(dom, i, j) {
            return Derivatives::central(f, dom, i, j);
        }
        Derivatives {
            fx: self.grad.x[[i, j]],
            fy: self.grad.y[[i, j]],
            fxx: second_difference(f, dom, (i, j), (1, 0)).unwrap_or(self.gxx.x[[i, j]]),
            fyy: second_difference(f, dom, (i, j), (0, 1)).unwrap_or(self.gyy.y[[i, j]]),
            fxy: 0.5 * (self.gxx.y[[i, j]] + self.gyy.x[[i, j]]),
        }
    }
}

/// Second difference along `dir`: centered when both neighbours are in the
/// domain, otherwise over the two next nodes on whichever side has them.
/// (Differencing the one-sided gradient instead would halve the value.)
fn second_difference(f: &Array2<f64>, dom: &GridDomain, (i, j): (usize, usize), dir: (isize, isize)) -> Option<f64> {
    let (nx, ny) = dom.shape();
    let at = |k: isize| {
        let (a, b) = (i as isize + k * dir.0, j as isize + k * dir.1);
        (a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny && dom.in_domain(a as usize, b as usize))
            .then(|| f[[a as usize, b as usize]])
    };
    let h = if dir.0 != 0 { dom.hx() } else { dom.hy() };
    let c = f[[i, j]];
    let d = match (at(-1), at(1)) {
        (Some(m), Some(p)) => m - 2.0 * c + p,
        (None, Some(p)) => c - 2.0 * p + at(2)?,
        (Some(m), None) => c - 2.0 * m + at(-2)?,
        (None, None) => return None,
    };
    Some(d / (h * h))
}

/// `ln(u^Γ |v|^((1-Γ)Q))`.
fn log_coupling(s: &LimitSpec, u: f64, v: f64) -> f64 {
    s.gamma * ln_abs(u) + s.v_power() * ln_abs(v)
}

/// Residual of `min{-Δ∞u, |∇u| - Λ u^Γ |v|^((1-Γ)Q)} = 0` at interior nodes
/// with a full stencil and of `u = 0` at boundary nodes. `u` is taken in
/// absolute value.
pub fn h_infinity_residual(
    u: &Array2<f64>,
    v: &Array2<f64>,
    lambda: f64,
    s: &LimitSpec,
    dom: &GridDomain,
) -> Result<ResidualReport> {
    dom.check_shape(u.dim())?;
    dom.check_shape(v.dim())?;
    let radius = EXCLUSION_FACTOR * dom.h();
    let excluded = exclusion_mask(dom, &singular_nodes(u, dom)?, radius);
    let tags = region_tags(v, dom, &excluded)?;
    let (nx, ny) = dom.shape();
    let mut values = Array2::zeros((nx, ny));
    let mut defined = Array2::from_elem((nx, ny), false);
    for i in 0..nx {
        for j in 0..ny {
            if dom.is_boundary(i, j) {
                values[[i, j]] = u[[i, j]].abs();
                defined[[i, j]] = true;
            } else if dom.is_interior(i, j) && full_stencil(dom, i, j) {
                let d = Derivatives::central(u, dom, i, j);
                let source = lambda * log_coupling(s, u[[i, j]], v[[i, j]]).exp();
                values[[i, j]] = (-d.infinity_laplacian()).min(d.grad_norm() - source);
                defined[[i, j]] = true;
            }
        }
    }
    Ok(ResidualReport::finish(values, defined, tags, radius, None))
}

/// The min-form `min{-Δ∞v, |∇v| - c}` with `c = Λ^(1/Q) u^(Γ/Q) |v|^(1-Γ)`.
fn min_form(d: &Derivatives, c: f64) -> f64 {
    (-d.infinity_laplacian()).min(d.grad_norm() - c)
}

/// The max-form used where `v < 0`: `max{-Δ∞v, c - |∇v|}`, the negated
/// min-form of `-v`.
fn max_form(d: &Derivatives, c: f64) -> f64 {
    (-d.infinity_laplacian()).max(c - d.grad_norm())
}

/// Residual of the three-region operator for `v`. Boundary nodes report
/// `min(|F|, |B|)` with `B = ⟨∇v, ν⟩`, approximating the viscosity boundary
/// condition; the sup of `|B|` alone is kept in
/// [`ResidualReport::boundary_normal_defect`].
pub fn f_infinity_residual(
    v: &Array2<f64>,
    u: &Array2<f64>,
    lambda: f64,
    s: &LimitSpec,
    dom: &GridDomain,
) -> Result<ResidualReport> {
    dom.check_shape(u.dim())?;
    dom.check_shape(v.dim())?;
    let radius = EXCLUSION_FACTOR * dom.h();
    let mut centers = singular_nodes(v, dom)?;
    centers.extend(apexes(u, dom)?);
    let excluded = exclusion_mask(dom, &centers, radius);
    let tags = region_tags(v, dom, &excluded)?;
    let st = Stencils::new(v, dom)?;
    let ln_root = lambda.ln() / s.big_q;
    let band = v_band(v, dom);
    let (nx, ny) = dom.shape();
    let mut values = Array2::zeros((nx, ny));
    let mut defined = Array2::from_elem((nx, ny), false);
    let mut normal_defect: f64 = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let interior = dom.is_interior(i, j) && full_stencil(dom, i, j);
            if !interior && !dom.is_boundary(i, j) {
                continue;
            }
            let d = st.at(v, dom, i, j);
            let (a, b) = (u[[i, j]], v[[i, j]]);
            let c = (ln_root + s.gamma / s.big_q * ln_abs(a) + (1.0 - s.gamma) * ln_abs(b)).exp();
            let f = match sign_region(b, band) {
                Region::VPos => min_form(&d, c),
                Region::VNeg => max_form(&d, c),
                _ => -d.infinity_laplacian(),
            };
            values[[i, j]] = if let Some(n) = dom.normal(i, j) {
                let bn = d.fx * n[0] + d.fy * n[1];
                normal_defect = normal_defect.max(bn.abs());
                if f.abs() <= bn.abs() {
                    f
                } else {
                    bn
                }
            } else {
                f
            };
            defined[[i, j]] = true;
        }
    }
    Ok(ResidualReport::finish(
        values,
        defined,
        tags,
        radius,
        Some(normal_defect),
    ))
}

/// Residual of
/// `-|∇u|^(p-4) (|∇u|² Δu + (p-2) Δ∞u) - alpha lambda |u|^(alpha-2) u |v|^beta`
/// at interior nodes with a full stencil, reported as `sign(r) |r|^(1/p)`.
/// For `p < 4`, nodes with `∇u = 0` are left undefined.
pub fn h_p_residual(
    u: &Array2<f64>,
    v: &Array2<f64>,
    lambda: f64,
    e: &Exponents,
    dom: &GridDomain,
) -> Result<ResidualReport> {
    dom.check_shape(u.dim())?;
    dom.check_shape(v.dim())?;
    if e.p < 2.0 {
        return Err(crate::error::Error::Unsupported(format!(
            "the expanded p-Laplacian needs p >= 2, got {}",
            e.p
        )));
    }
    let excluded = Array2::from_elem(dom.shape(), false);
    let tags = region_tags(v, dom, &excluded)?;
    let ln_source = (e.alpha * lambda).ln();
    let (nx, ny) = dom.shape();
    let mut values = Array2::zeros((nx, ny));
    let mut defined = Array2::from_elem((nx, ny), false);
    for i in 0..nx {
        for j in 0..ny {
            if !dom.is_interior(i, j) || !full_stencil(dom, i, j) {
                continue;
            }
            let d = Derivatives::central(u, dom, i, j);
            let g = d.grad_norm();
            if g == 0.0 && e.p < 4.0 {
                continue;
            }
            let bracket = g * g * d.laplacian() + (e.p - 2.0) * d.infinity_laplacian();
            let mut r = SignedLogSum::new();
            // with p = 4 and g = 0 the power is 0^0 = 1
            let ln_g = if e.p == 4.0 { 0.0 } else { (e.p - 4.0) * ln_abs(g) };
            r.add(bracket < 0.0, ln_g + ln_abs(bracket));
            let (a, b) = (u[[i, j]], v[[i, j]]);
            r.add(a < 0.0, ln_source + (e.alpha - 1.0) * ln_abs(a) + e.beta * ln_abs(b));
            let ln_mag = r.log_scale() + r.relative().abs().ln();
            values[[i, j]] = r.relative().signum() * (ln_mag / e.p).exp();
            defined[[i, j]] = true;
        }
    }
    Ok(ResidualReport::finish(values, defined, tags, 0.0, None))
}

/// Interior local maxima of `|u|` among the 8 neighbours, with a positive value.
fn apexes(u: &Array2<f64>, dom: &GridDomain) -> Result<Vec<(usize, usize)>> {
    dom.check_shape(u.dim())?;
    let mut out = Vec::new();
    let (nx, ny) = dom.shape();
    for i in 1..nx.saturating_sub(1) {
        for j in 1..ny.saturating_sub(1) {
            let c = u[[i, j]].abs();
            if !dom.is_interior(i, j) || c == 0.0 {
                continue;
            }
            let top = (i - 1..=i + 1).all(|a| (j - 1..=j + 1).all(|b| u[[a, b]].abs() <= c));
            if top {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// Half-width `κ h ‖∇v‖∞` of the `{v = 0}` band.
fn v_band(v: &Array2<f64>, dom: &GridDomain) -> f64 {
    let g = gradient_field(v, dom).expect("shape checked by caller");
    let sup = g.x.iter().zip(g.y.iter()).fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)));
    DEADBAND_KAPPA * dom.h() * sup
}

fn sign_region(v: f64, band: f64) -> Region {
    if v.abs() <= band {
        Region::VZero
    } else if v > 0.0 {
        Region::VPos
    } else {
        Region::VNeg
    }
}

/// Tags every domain node: boundary, excluded, or by the sign of `v`.
pub fn region_tags(v: &Array2<f64>, dom: &GridDomain, excluded: &Array2<bool>) -> Result<Array2<Option<Region>>> {
    dom.check_shape(v.dim())?;
    let band = v_band(v, dom);
    Ok(Array2::from_shape_fn(dom.shape(), |(i, j)| {
        if !dom.in_domain(i, j) {
            None
        } else if dom.is_boundary(i, j) {
            Some(Region::Boundary)
        } else if excluded[[i, j]] {
            Some(Region::Excluded)
        } else {
            Some(sign_region(v[[i, j]], band))
        }
    }))
}
