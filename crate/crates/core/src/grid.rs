//! Rectangular grids and the Kronecker-product extension of 1D SBP operators.
//!
//! Nodes are numbered x-major: `k = ix * ny + iy`. Every module uses this
//! ordering, so a y-line is contiguous in memory and an x-line has stride `ny`.

use crate::error::{Error, Result};
use crate::sbp::{build_sbp_1d, SbpOperator1D};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

/// Minimum nodes per direction a grid must have for the given order.
pub fn grid_min_width(order: usize) -> Result<usize> {
    match order {
        2 => Ok(4),
        4 => Ok(8),
        other => Err(Error::UnsupportedOrder(other)),
    }
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64, order: usize) -> Result<Self> {
        let min = grid_min_width(order)?;
        if nx < min || ny < min {
            return Err(Error::TooFewNodes {
                order,
                n: nx.min(ny),
                min,
            });
        }
        if !(x1 > x0 && y1 > y0) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid(format!("degenerate extents [{x0},{x1}]x[{y0},{y1}]")));
        }
        Ok(Grid2D {
            nx,
            ny,
            hx: (x1 - x0) / (nx - 1) as f64,
            hy: (y1 - y0) / (ny - 1) as f64,
            x0,
            y0,
            x1,
            y1,
        })
    }

    /// Unit square with `n × n` nodes.
    pub fn unit(n: usize, order: usize) -> Result<Self> {
        Self::new(n, n, 0.0, 1.0, 0.0, 1.0, order)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    #[inline]
    pub fn ix_iy(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    pub fn x(&self, ix: usize) -> f64 {
        if ix == self.nx - 1 {
            self.x1
        } else {
            self.x0 + ix as f64 * self.hx
        }
    }

    pub fn y(&self, iy: usize) -> f64 {
        if iy == self.ny - 1 {
            self.y1
        } else {
            self.y0 + iy as f64 * self.hy
        }
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (ix, iy) = self.ix_iy(k);
        (self.x(ix), self.y(iy))
    }

    /// Sample a function at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (x, y) = self.coords(k);
                f(x, y)
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Edge {
    West,
    East,
    South,
    North,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::West, Edge::East, Edge::South, Edge::North];

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Edge::West => [-1.0, 0.0],
            Edge::East => [1.0, 0.0],
            Edge::South => [0.0, -1.0],
            Edge::North => [0.0, 1.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::West => "west",
            Edge::East => "east",
            Edge::South => "south",
            Edge::North => "north",
        }
    }

    pub fn from_name(s: &str) -> Option<Edge> {
        Edge::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Nodes, normals and boundary quadrature weights of one edge.
///
/// The weights are the nonzero entries of `𝔹ₓ = Bₓ ⊗ P_y` (west/east) or
/// `𝔹_y = Pₓ ⊗ B_y` (south/north) with the sign moved into the normal.
#[derive(Debug, Clone)]
pub struct EdgeGeometry {
    pub edge: Edge,
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    pub normal: [f64; 2],
    /// Arc-length coordinate of each node, normalised to `[0, 1]` along the edge.
    pub s: Vec<f64>,
}

impl EdgeGeometry {
    pub fn tangent(&self) -> [f64; 2] {
        [-self.normal[1], self.normal[0]]
    }

    /// Rotation `N = [[n₁, n₂], [-n₂, n₁]]`.
    pub fn rotation(&self) -> [[f64; 2]; 2] {
        let [n1, n2] = self.normal;
        [[n1, n2], [-n2, n1]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Two-dimensional SBP operators on a tensor grid.
#[derive(Debug, Clone)]
pub struct TensorOps2D {
    pub grid: Grid2D,
    pub opx: SbpOperator1D,
    pub opy: SbpOperator1D,
    /// Diagonal of `ℙ = Pₓ ⊗ P_y` as a nodal field.
    pub pp: Vec<f64>,
    /// West, east, south, north.
    pub edges: [EdgeGeometry; 4],
}

pub fn tensorize(grid: &Grid2D, opx: SbpOperator1D, opy: SbpOperator1D) -> Result<TensorOps2D> {
    if opx.n != grid.nx || opy.n != grid.ny {
        return Err(Error::SizeMismatch(format!(
            "operators ({}, {}) do not match grid ({}, {})",
            opx.n, opy.n, grid.nx, grid.ny
        )));
    }
    if (opx.h - grid.hx).abs() > 1e-12 * grid.hx || (opy.h - grid.hy).abs() > 1e-12 * grid.hy {
        return Err(Error::SizeMismatch("operator spacing differs from grid spacing".into()));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let mut pp = vec![0.0; grid.len()];
    for ix in 0..nx {
        for iy in 0..ny {
            pp[grid.idx(ix, iy)] = opx.p_weights[ix] * opy.p_weights[iy];
        }
    }
    let sx: Vec<f64> = (0..nx).map(|i| i as f64 / (nx - 1) as f64).collect();
    let sy: Vec<f64> = (0..ny).map(|i| i as f64 / (ny - 1) as f64).collect();
    let make = |edge: Edge, nodes: Vec<usize>, weights: Vec<f64>, s: Vec<f64>| EdgeGeometry {
        edge,
        nodes,
        weights,
        normal: edge.normal(),
        s,
    };
    let edges = [
        make(
            Edge::West,
            (0..ny).map(|iy| grid.idx(0, iy)).collect(),
            opy.p_weights.clone(),
            sy.clone(),
        ),
        make(
            Edge::East,
            (0..ny).map(|iy| grid.idx(nx - 1, iy)).collect(),
            opy.p_weights.clone(),
            sy,
        ),
        make(
            Edge::South,
            (0..nx).map(|ix| grid.idx(ix, 0)).collect(),
            opx.p_weights.clone(),
            sx.clone(),
        ),
        make(
            Edge::North,
            (0..nx).map(|ix| grid.idx(ix, ny - 1)).collect(),
            opx.p_weights.clone(),
            sx,
        ),
    ];
    Ok(TensorOps2D {
        grid: grid.clone(),
        opx,
        opy,
        pp,
        edges,
    })
}

impl TensorOps2D {
    /// Build both 1D operators for `grid` and tensorize them.
    pub fn new(grid: &Grid2D, order: usize) -> Result<Self> {
        let opx = build_sbp_1d(order, grid.nx, grid.hx)?;
        let opy = build_sbp_1d(order, grid.ny, grid.hy)?;
        tensorize(grid, opx, opy)
    }

    pub fn order(&self) -> usize {
        self.opx.order
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn edge(&self, edge: Edge) -> &EdgeGeometry {
        &self.edges[edge as usize]
    }

    /// `𝔻ₓ f = (Dₓ ⊗ I_y) f`.
    pub fn dx(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.dx_into(f, &mut out);
        out
    }

    pub fn dx_into(&self, f: &[f64], out: &mut [f64]) {
        let ny = self.grid.ny;
        for iy in 0..ny {
            self.opx.apply_strided(f, iy, ny, out, iy, ny);
        }
    }

    /// `𝔻_y f = (Iₓ ⊗ D_y) f`.
    pub fn dy(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.dy_into(f, &mut out);
        out
    }

    pub fn dy_into(&self, f: &[f64], out: &mut [f64]) {
        let ny = self.grid.ny;
        for ix in 0..self.grid.nx {
            self.opy.apply_strided(f, ix * ny, 1, out, ix * ny, 1);
        }
    }

    /// Apply the derivative along direction `j` (0 = x, 1 = y).
    pub fn d(&self, j: usize, f: &[f64]) -> Vec<f64> {
        if j == 0 {
            self.dx(f)
        } else {
            self.dy(f)
        }
    }

    /// Nonzeros `(node, coefficient)` of row `k` of `𝔻ₓ` (j = 0) or `𝔻_y` (j = 1).
    pub fn d_row(&self, j: usize, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (ix, iy) = self.grid.ix_iy(k);
        let ny = self.grid.ny;
        let (row, x_dir) = if j == 0 {
            (self.opx.row(ix), true)
        } else {
            (self.opy.row(iy), false)
        };
        row.iter()
            .map(move |&(m, c)| if x_dir { (m * ny + iy, c) } else { (ix * ny + m, c) })
    }

    /// `uᵀ 𝔹ⱼ v`, the boundary quadrature of `u v nⱼ`.
    pub fn boundary_form(&self, j: usize, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for geom in &self.edges {
            let nj = geom.normal[j];
            if nj == 0.0 {
                continue;
            }
            for (&k, &w) in geom.nodes.iter().zip(&geom.weights) {
                acc += nj * w * u[k] * v[k];
            }
        }
        acc
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        quad_inner(&self.pp, u, v)
    }

    /// `‖u‖_ℙ`.
    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }
}

/// Discrete `∫ u v dΩ` with nodal quadrature weights.
pub fn quad_inner(pp: &[f64], u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(pp.len(), u.len());
    debug_assert_eq!(pp.len(), v.len());
    pp.iter().zip(u).zip(v).map(|((w, a), b)| w * a * b).sum()
}
