//! Discretized 2-D domains: the rectangle `(-R,R) x (-L,L)` and the disk of
//! radius `R`, both as node masks on a uniform Cartesian grid.
//!
//! Nodes are indexed `(i, j)` with `x_i = -R + i*hx` and `y_j = -L + j*hy`.
//! Coordinates are generated as `(2i - (nx-1)) * R/(nx-1)` so that mirrored
//! nodes carry exactly negated coordinates.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the disk boundary band, in units of the grid spacing.
pub const BOUNDARY_BAND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Rectangle,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone)]
pub struct GridDomain {
    kind: DomainKind,
    r: f64,
    l: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
    nodes: Array2<NodeKind>,
    normals: Array2<[f64; 2]>,
    weights: Array2<f64>,
}

fn symmetric_axis(half: f64, n: usize) -> Vec<f64> {
    let step = half / (n - 1) as f64;
    (0..n).map(|i| (2.0 * i as f64 - (n - 1) as f64) * step).collect()
}

fn check_length(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::InvalidDomain(format!(
            "{name} must be finite and positive, got {value}"
        )));
    }
    Ok(())
}

impl GridDomain {
    /// Rectangle `(-r, r) x (-l, l)` with `nx * ny` nodes. The outer ring of
    /// nodes is the Dirichlet trace set.
    pub fn rectangle(r: f64, l: f64, nx: usize, ny: usize) -> Result<Self> {
        check_length("R", r)?;
        check_length("L", l)?;
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidDomain(format!(
                "rectangle needs at least 3 nodes per axis, got {nx}x{ny}"
            )));
        }
        let xs = symmetric_axis(r, nx);
        let ys = symmetric_axis(l, ny);
        let mut nodes = Array2::from_elem((nx, ny), NodeKind::Interior);
        let mut normals = Array2::from_elem((nx, ny), [0.0; 2]);
        for i in 0..nx {
            for j in 0..ny {
                let sx = if i == 0 {
                    -1.0
                } else if i == nx - 1 {
                    1.0
                } else {
                    0.0
                };
                let sy = if j == 0 {
                    -1.0
                } else if j == ny - 1 {
                    1.0
                } else {
                    0.0
                };
                if sx != 0.0 || sy != 0.0 {
                    nodes[[i, j]] = NodeKind::Boundary;
                    let norm = f64::hypot(sx, sy);
                    normals[[i, j]] = [sx / norm, sy / norm];
                }
            }
        }
        Ok(Self::finish(DomainKind::Rectangle, r, l, xs, ys, nodes, normals))
    }

    /// Disk of radius `r` on an `n x n` grid over `[-r, r]^2`. `n` must be odd
    /// so that the center is a node.
    pub fn disk(r: f64, n: usize) -> Result<Self> {
        check_length("R", r)?;
        if n < 5 {
            return Err(Error::InvalidDomain(format!(
                "disk needs at least 5 nodes per axis, got {n}"
            )));
        }
        if n.is_multiple_of(2) {
            return Err(Error::InvalidDomain(format!(
                "disk node count must be odd so the center is a node, got {n}"
            )));
        }
        let xs = symmetric_axis(r, n);
        let ys = xs.clone();
        let h = 2.0 * r / (n - 1) as f64;
        let inner = r * r - BOUNDARY_BAND * h;
        let mut nodes = Array2::from_elem((n, n), NodeKind::Outside);
        let mut normals = Array2::from_elem((n, n), [0.0; 2]);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (xs[i], ys[j]);
                let r2 = x * x + y * y;
                if r2 < inner {
                    nodes[[i, j]] = NodeKind::Interior;
                } else if r2 < r * r {
                    nodes[[i, j]] = NodeKind::Boundary;
                    let rad = r2.sqrt();
                    normals[[i, j]] = [x / rad, y / rad];
                }
            }
        }
        Ok(Self::finish(DomainKind::Disk, r, r, xs, ys, nodes, normals))
    }

    fn finish(
        kind: DomainKind,
        r: f64,
        l: f64,
        xs: Vec<f64>,
        ys: Vec<f64>,
        nodes: Array2<NodeKind>,
        normals: Array2<[f64; 2]>,
    ) -> Self {
        let (nx, ny) = nodes.dim();
        let hx = 2.0 * r / (nx - 1) as f64;
        let hy = 2.0 * l / (ny - 1) as f64;
        let mut dom = Self {
            kind,
            r,
            l,
            nx,
            ny,
            hx,
            hy,
            xs,
            ys,
            nodes,
            normals,
            weights: Array2::zeros((nx, ny)),
        };
        dom.weights = dom.lumped_weights();
        dom
    }

    /// Lumped quadrature weights: every corner triangle of a cell (the four
    /// triangles of the two diagonal splittings, each of effective area
    /// `hx*hy/4`) whose three vertices lie in the domain hands a third of its
    /// area to each vertex. On the rectangle this is the tensor trapezoid rule.
    fn lumped_weights(&self) -> Array2<f64> {
        let mut w = Array2::zeros((self.nx, self.ny));
        let share = self.hx * self.hy / 12.0;
        for tri in corner_triangles(self.nx, self.ny) {
            if tri.iter().all(|&(i, j)| self.in_domain(i, j)) {
                for &(i, j) in &tri {
                    w[[i, j]] += share;
                }
            }
        }
        w
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// Half-width (rectangle) or radius (disk).
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Half-height; equals `r` for the disk.
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// The larger of the two spacings.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.xs[i]
    }

    pub fn y(&self, j: usize) -> f64 {
        self.ys[j]
    }

    pub fn node(&self, i: usize, j: usize) -> NodeKind {
        self.nodes[[i, j]]
    }

    pub fn nodes(&self) -> &Array2<NodeKind> {
        &self.nodes
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.nodes[[i, j]] == NodeKind::Interior
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        self.nodes[[i, j]] == NodeKind::Boundary
    }

    pub fn in_domain(&self, i: usize, j: usize) -> bool {
        self.nodes[[i, j]] != NodeKind::Outside
    }

    pub fn interior_mask(&self) -> Array2<bool> {
        self.nodes.mapv(|k| k == NodeKind::Interior)
    }

    pub fn boundary_mask(&self) -> Array2<bool> {
        self.nodes.mapv(|k| k == NodeKind::Boundary)
    }

    pub fn domain_mask(&self) -> Array2<bool> {
        self.nodes.mapv(|k| k != NodeKind::Outside)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|&&k| k == kind).count()
    }

    /// Outward unit normal at a boundary node.
    pub fn normal(&self, i: usize, j: usize) -> Option<[f64; 2]> {
        self.is_boundary(i, j).then(|| self.normals[[i, j]])
    }

    /// Quadrature weight of each node (zero outside the domain).
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// Area of the discrete domain, i.e. the sum of the quadrature weights.
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Distance from a node to the continuous boundary (zero off-domain).
    pub fn distance_to_boundary(&self, i: usize, j: usize) -> f64 {
        let (x, y) = (self.xs[i], self.ys[j]);
        let d = match self.kind {
            DomainKind::Rectangle => (self.r - x.abs()).min(self.l - y.abs()),
            DomainKind::Disk => self.r - x.hypot(y),
        };
        d.max(0.0)
    }

    /// Index of the in-domain node closest to `(x, y)`.
    pub fn nearest_node(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for i in 0..self.nx {
            for j in 0..self.ny {
                if !self.in_domain(i, j) {
                    continue;
                }
                let d = (self.xs[i] - x).hypot(self.ys[j] - y);
                if d < best_d {
                    best_d = d;
                    best = Some((i, j));
                }
            }
        }
        best
    }

    pub fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        if shape != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: shape,
            });
        }
        Ok(())
    }

    /// Grid field sampled from a function of the coordinates, zero off-domain.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Array2<f64> {
        Array2::from_shape_fn((self.nx, self.ny), |(i, j)| {
            if self.in_domain(i, j) {
                f(self.xs[i], self.ys[j])
            } else {
                0.0
            }
        })
    }
}

/// Every corner triangle of every cell, as three node indices:
/// the corner itself, its horizontal neighbour and its vertical neighbour.
pub(crate) fn corner_triangles(nx: usize, ny: usize) -> impl Iterator<Item = [(usize, usize); 3]> {
    (0..nx - 1).flat_map(move |i| {
        (0..ny - 1).flat_map(move |j| {
            [
                [(i, j), (i + 1, j), (i, j + 1)],
                [(i + 1, j), (i, j), (i + 1, j + 1)],
                [(i, j + 1), (i + 1, j + 1), (i, j)],
                [(i + 1, j + 1), (i, j + 1), (i + 1, j)],
            ]
        })
    })
}
