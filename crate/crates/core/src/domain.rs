//! Geometry and discretization: intervals and radially symmetric balls,
//! boundary-graded grids, the distance function, boundary strips and a
//! quadrature that integrates the singular weights `d^beta` (`beta > -1`)
//! exactly against piecewise-linear functions.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::quadrature::{gauss_legendre, piece_integral, Piece};

/// Minimum admissible node count.
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainDesc {
    Interval { a: f64, b: f64 },
    /// Ball of radius `radius` in `R^dim`, reduced to the radial coordinate.
    RadialBall { radius: f64, dim: usize },
}

impl DomainDesc {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainDesc::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return config(format!("interval needs a < b, got [{a}, {b}]"));
                }
            }
            DomainDesc::RadialBall { radius, dim } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return config(format!("ball radius must be positive, got {radius}"));
                }
                if dim < 2 {
                    return config(format!("ball dimension must be >= 2, got {dim}"));
                }
            }
        }
        Ok(())
    }

    /// Spatial dimension of the underlying domain (1 for the interval testbed).
    pub fn dim(&self) -> usize {
        match *self {
            DomainDesc::Interval { .. } => 1,
            DomainDesc::RadialBall { dim, .. } => dim,
        }
    }

    /// Lebesgue measure `|Omega|`.
    pub fn measure(&self) -> f64 {
        match *self {
            DomainDesc::Interval { a, b } => b - a,
            DomainDesc::RadialBall { radius, dim } => {
                sphere_area(dim) * radius.powi(dim as i32) / dim as f64
            }
        }
    }

    /// `d_* = max d` over the closure.
    pub fn max_distance(&self) -> f64 {
        match *self {
            DomainDesc::Interval { a, b } => 0.5 * (b - a),
            DomainDesc::RadialBall { radius, .. } => radius,
        }
    }

    /// Area of the boundary `|dOmega|`.
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            DomainDesc::Interval { .. } => 2.0,
            DomainDesc::RadialBall { radius, dim } => {
                sphere_area(dim) * radius.powi(dim as i32 - 1)
            }
        }
    }

    /// Whether `1 < p < N` holds; the interval testbed never satisfies it.
    pub fn within_standing_hypothesis(&self, p: f64) -> bool {
        p > 1.0 && p < self.dim() as f64
    }

    fn density_coef(&self) -> (f64, usize) {
        match *self {
            DomainDesc::Interval { .. } => (1.0, 0),
            DomainDesc::RadialBall { dim, .. } => (sphere_area(dim), dim - 1),
        }
    }
}

/// Area of the unit sphere `S^{n-1}`: `2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    // Gamma(n/2) by recursion from Gamma(1) or Gamma(1/2)
    let (mut g, mut x) = if n % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = n as f64 / 2.0;
    while x < target - 1e-12 {
        g *= x;
        x += 1.0;
    }
    2.0 * PI.powf(target) / g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: DomainDesc,
    nodes: Vec<f64>,
    dist: Vec<f64>,
    /// `int phi_j dmu` per node (lumped mass, includes `|S^{N-1}| r^{N-1}`).
    weights: Vec<f64>,
    /// Cell mean of the measure density; multiplies fluxes.
    cell_coef: Vec<f64>,
    grading: Grading,
}

/// Part of a cell with the hat-function values at its two ends.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellPiece {
    pub piece: Piece,
    pub left: (f64, f64),
    pub right: (f64, f64),
}

/// A boundary node together with its interior neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    pub neighbour: usize,
}

impl Grid {
    pub fn domain(&self) -> &DomainDesc {
        &self.domain
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn distances(&self) -> &[f64] {
        &self.dist
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn cell_coef(&self) -> &[f64] {
        &self.cell_coef
    }
    pub fn grading(&self) -> Grading {
        self.grading
    }
    pub fn cell_width(&self, c: usize) -> f64 {
        self.nodes[c + 1] - self.nodes[c]
    }
    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn boundary(&self) -> Vec<BoundaryNode> {
        let n = self.len();
        match self.domain {
            DomainDesc::Interval { .. } => vec![
                BoundaryNode { node: 0, neighbour: 1 },
                BoundaryNode { node: n - 1, neighbour: n - 2 },
            ],
            DomainDesc::RadialBall { .. } => vec![BoundaryNode { node: n - 1, neighbour: n - 2 }],
        }
    }

    pub fn is_boundary(&self, j: usize) -> bool {
        match self.domain {
            DomainDesc::Interval { .. } => j == 0 || j + 1 == self.len(),
            DomainDesc::RadialBall { .. } => j + 1 == self.len(),
        }
    }

    /// Plain-text table `node x d weight` for plotting.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("node\tx\td\tweight\n");
        for j in 0..self.len() {
            let _ = writeln!(
                s,
                "{}\t{:.17e}\t{:.17e}\t{:.17e}",
                j, self.nodes[j], self.dist[j], self.weights[j]
            );
        }
        s
    }

    /// Splits cell `c` into pieces on which `d` is affine, clipped to
    /// `lo <= d <= hi`, together with the values of the two hat functions of
    /// the cell at the ends of each piece.
    pub(crate) fn cell_pieces(&self, c: usize, lo: f64, hi: f64) -> Vec<CellPiece> {
        let (x0, x1) = (self.nodes[c], self.nodes[c + 1]);
        let h = x1 - x0;
        let mut raw = Vec::with_capacity(2);
        match self.domain {
            DomainDesc::Interval { a, b } => {
                let m = 0.5 * (a + b);
                if x0 < m && m < x1 {
                    raw.push((x0, m, true));
                    raw.push((m, x1, false));
                } else {
                    raw.push((x0, x1, x1 <= m));
                }
            }
            DomainDesc::RadialBall { .. } => raw.push((x0, x1, false)),
        }
        let mut out = Vec::with_capacity(2);
        for (xa, xb, increasing) in raw {
            // affine extension of d over the whole cell
            let ext = |x: f64| match self.domain {
                DomainDesc::Interval { a, b } => {
                    if increasing {
                        x - a
                    } else {
                        b - x
                    }
                }
                DomainDesc::RadialBall { radius, .. } => radius - x,
            };
            // offsets from the cell ends computed through d to keep precision at the boundary
            let hat = |d: f64| -> (f64, f64) {
                let (from0, to1) =
                    if increasing { (d - ext(x0), ext(x1) - d) } else { (ext(x0) - d, d - ext(x1)) };
                (to1 / h, from0 / h)
            };
            let (da, db) = (self.distance_at(xa), self.distance_at(xb));
            let (d_lo, x_lo, d_hi, x_hi) = if da <= db { (da, xa, db, xb) } else { (db, xb, da, xa) };
            let full = Piece { d_lo, d_hi, x_at_lo: x_lo, x_at_hi: x_hi };
            let cl = d_lo.max(lo);
            let ch = d_hi.min(hi);
            if ch <= cl {
                continue;
            }
            let (l_lo, r_lo) = hat(cl);
            let (l_hi, r_hi) = hat(ch);
            out.push(CellPiece {
                piece: Piece { d_lo: cl, d_hi: ch, x_at_lo: full.x_of(cl), x_at_hi: full.x_of(ch) },
                left: (l_lo, l_hi),
                right: (r_lo, r_hi),
            });
        }
        out
    }

    pub fn distance_at(&self, x: f64) -> f64 {
        match self.domain {
            DomainDesc::Interval { a, b } => (x - a).min(b - x).max(0.0),
            DomainDesc::RadialBall { radius, .. } => (radius - x).max(0.0),
        }
    }
}

/// Nodal values over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return config(format!(
                "grid function has {} values for {} nodes",
                values.len(),
                grid.len()
            ));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        GridFunction { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        GridFunction { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, t: f64) -> Self {
        self.map(|v| t * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Gradient on each cell.
    pub fn cell_gradients(&self) -> Vec<f64> {
        let x = self.grid.nodes();
        self.values.windows(2).zip(x.windows(2)).map(|(u, x)| (u[1] - u[0]) / (x[1] - x[0])).collect()
    }

    /// Nodal gradient: three-point formula at interior nodes, one-sided at the
    /// ends, and zero at the centre of a ball.
    pub fn nodal_gradient(&self) -> Vec<f64> {
        let x = self.grid.nodes();
        let u = &self.values;
        let n = u.len();
        let mut g = vec![0.0; n];
        for j in 1..n - 1 {
            let (h0, h1) = (x[j] - x[j - 1], x[j + 1] - x[j]);
            g[j] = (-h1 / (h0 * (h0 + h1))) * u[j - 1]
                + ((h1 - h0) / (h0 * h1)) * u[j]
                + (h0 / (h1 * (h0 + h1))) * u[j + 1];
        }
        g[0] = match self.grid.domain() {
            DomainDesc::RadialBall { .. } => 0.0,
            DomainDesc::Interval { .. } => (u[1] - u[0]) / (x[1] - x[0]),
        };
        g[n - 1] = (u[n - 1] - u[n - 2]) / (x[n - 1] - x[n - 2]);
        g
    }
}

/// Subsets of the domain described through the distance function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Whole,
    /// `{ d < delta }` (the closure is the same up to a null set).
    Strip(f64),
    /// `{ d > delta }`.
    Core(f64),
    /// `{ lo <= d <= hi }`.
    Band { lo: f64, hi: f64 },
}

impl Region {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            Region::Whole => (0.0, f64::INFINITY),
            Region::Strip(delta) => (0.0, delta),
            Region::Core(delta) => (delta, f64::INFINITY),
            Region::Band { lo, hi } => (lo, hi),
        }
    }
}

pub fn build_grid(desc: DomainDesc, n: usize, grading_exponent: f64) -> Result<Arc<Grid>> {
    desc.validate()?;
    if n < MIN_NODES {
        return config(format!("grid needs at least {MIN_NODES} nodes, got {n}"));
    }
    if !(grading_exponent.is_finite() && grading_exponent >= 1.0) {
        return config(format!("grading exponent must be >= 1, got {grading_exponent}"));
    }
    let g = grading_exponent;
    let last = (n - 1) as f64;
    let nodes: Vec<f64> = match desc {
        DomainDesc::Interval { a, b } => {
            let hw = 0.5 * (b - a);
            (0..n)
                .map(|i| {
                    if i == 0 {
                        return a;
                    }
                    if i == n - 1 {
                        return b;
                    }
                    let s = i as f64 / last;
                    if 2 * i <= n - 1 {
                        a + hw * (2.0 * s).powf(g)
                    } else {
                        b - hw * (2.0 - 2.0 * s).powf(g)
                    }
                })
                .collect()
        }
        DomainDesc::RadialBall { radius, .. } => (0..n)
            .map(|i| {
                if i == n - 1 {
                    return radius;
                }
                let s = i as f64 / last;
                radius * (1.0 - (1.0 - s).powf(g))
            })
            .collect(),
    };
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return config("grid nodes are not strictly increasing (too many nodes for the grading)");
    }
    let (coef, power) = desc.density_coef();
    let density = |x: f64| coef * x.powi(power as i32);
    let rule = gauss_legendre();
    let mut weights = vec![0.0; n];
    let mut cell_coef = vec![0.0; n - 1];
    for c in 0..n - 1 {
        let (x0, x1) = (nodes[c], nodes[c + 1]);
        let h = x1 - x0;
        let (mut left, mut right, mut total) = (0.0, 0.0, 0.0);
        for &(t, w) in rule {
            let s = 0.5 * (1.0 + t);
            let x = x0 + h * s;
            let rho = density(x) * 0.5 * w * h;
            total += rho;
            left += rho * (1.0 - s);
            right += rho * s;
        }
        weights[c] += left;
        weights[c + 1] += right;
        cell_coef[c] = total / h;
    }
    let mut grid = Grid {
        domain: desc,
        nodes,
        dist: Vec::new(),
        weights,
        cell_coef,
        grading: Grading { exponent: g },
    };
    grid.dist = grid.nodes.iter().map(|&x| grid.distance_at(x)).collect();
    // boundary nodes are exactly on the boundary
    for b in grid.boundary() {
        grid.dist[b.node] = 0.0;
    }
    Ok(Arc::new(grid))
}

/// Nodal values of `d(x) = dist(x, boundary)`.
pub fn distance(grid: &Arc<Grid>) -> GridFunction {
    GridFunction { grid: grid.clone(), values: grid.distances().to_vec() }
}

/// Nodes of the closed strip `{ d <= delta }`.
pub fn delta_strip(grid: &Grid, delta: f64) -> Result<Vec<usize>> {
    let d_max = grid.distances().iter().cloned().fold(0.0, f64::max);
    if !(delta.is_finite() && delta > 0.0 && delta <= d_max) {
        return config(format!("strip width {delta} outside (0, {d_max}]"));
    }
    Ok((0..grid.len()).filter(|&j| grid.distances()[j] <= delta).collect())
}

/// `int_region d^beta |u| dx` with `|u|` interpolated linearly between nodes.
pub fn integrate_weighted(grid: &Grid, beta: f64, u: &GridFunction, region: Region) -> Result<f64> {
    if !(beta > -1.0) {
        return Err(Error::Singularity { beta });
    }
    integrate_weighted_shifted(grid, beta + 1.0, u, region)
}

/// Same as [`integrate_weighted`] with the exponent given as `beta + 1 > 0`.
pub fn integrate_weighted_shifted(
    grid: &Grid,
    beta_plus_one: f64,
    u: &GridFunction,
    region: Region,
) -> Result<f64> {
    if !(beta_plus_one > 0.0) {
        return Err(Error::Singularity { beta: beta_plus_one - 1.0 });
    }
    if u.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let (lo, hi) = region.bounds();
    let (coef, power) = grid.domain.density_coef();
    let mut total = 0.0;
    for c in 0..grid.n_cells() {
        let (ua, ub) = (u.values[c].abs(), u.values[c + 1].abs());
        for cp in grid.cell_pieces(c, lo, hi) {
            let lin = [(ua * cp.left.0 + ub * cp.right.0, ua * cp.left.1 + ub * cp.right.1)];
            total += piece_integral(beta_plus_one, &cp.piece, &lin, coef, power);
        }
    }
    Ok(total)
}

/// Load vector `int_region d^beta phi_j dx` against the nodal hat functions.
pub fn weighted_load(grid: &Grid, beta_plus_one: f64, region: Region) -> Result<Vec<f64>> {
    if !(beta_plus_one > 0.0) {
        return Err(Error::Singularity { beta: beta_plus_one - 1.0 });
    }
    let (lo, hi) = region.bounds();
    let (coef, power) = grid.domain.density_coef();
    let mut load = vec![0.0; grid.len()];
    for c in 0..grid.n_cells() {
        for cp in grid.cell_pieces(c, lo, hi) {
            load[c] += piece_integral(beta_plus_one, &cp.piece, &[cp.left], coef, power);
            load[c + 1] += piece_integral(beta_plus_one, &cp.piece, &[cp.right], coef, power);
        }
    }
    Ok(load)
}
