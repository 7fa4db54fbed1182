//! Flux-form discretization of the p-Laplacian and a damped Newton solver
//! with epsilon continuation for scalar problems `-Delta_p u = F(x, u)`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Grid, GridFunction};
use crate::error::{config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    DirichletZero,
    NeumannZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Regularization levels, relative to the natural gradient scale.
    pub eps_schedule: Vec<f64>,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub damping: f64,
    pub max_backtracks: usize,
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_schedule: vec![1e-2, 1e-4, 1e-6, 1e-10],
            newton_tol: 1e-10,
            max_newton: 200,
            damping: 0.5,
            max_backtracks: 60,
            verbose: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_schedule.is_empty() {
            return config("eps schedule is empty");
        }
        if self.eps_schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return config("eps schedule must be positive");
        }
        if self.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return config("eps schedule must be strictly decreasing");
        }
        if !(self.newton_tol > 0.0) {
            return config("newton tolerance must be positive");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return config("damping factor must lie in (0, 1)");
        }
        if self.max_newton == 0 {
            return config("max_newton must be positive");
        }
        Ok(())
    }
}

/// Relative step size below which Newton has reached the rounding floor.
const ROUNDOFF_STEP: f64 = 1e-13;
/// Largest scaled residual still accepted when stagnating at that floor.
const FLOOR_ACCEPT: f64 = 1e-6;

fn check_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return config(format!("exponent p must exceed 1, got {p}"));
    }
    Ok(())
}

/// `|g|_eps^{p-2} g`.
#[inline]
pub(crate) fn reg_flux(g: f64, p: f64, eps: f64) -> f64 {
    if g == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return g;
    }
    let m2 = g * g + eps * eps;
    g * m2.powf(0.5 * (p - 2.0))
}

/// Derivative of [`reg_flux`] with respect to `g`.
#[inline]
fn reg_flux_deriv(g: f64, p: f64, eps: f64) -> f64 {
    if p == 2.0 {
        return 1.0;
    }
    let m2 = g * g + eps * eps;
    if m2 == 0.0 {
        return if p > 2.0 { 0.0 } else { f64::INFINITY };
    }
    m2.powf(0.5 * (p - 4.0)) * ((p - 1.0) * g * g + eps * eps)
}

/// Cell fluxes `a_c |u'|_eps^{p-2} u'`.
pub fn cell_fluxes(grid: &Grid, u: &[f64], p: f64, eps: f64) -> Vec<f64> {
    let x = grid.nodes();
    let a = grid.cell_coef();
    (0..grid.n_cells())
        .map(|c| a[c] * reg_flux((u[c + 1] - u[c]) / (x[c + 1] - x[c]), p, eps))
        .collect()
}

/// Weak form `<A_p u, phi_j>` for every hat function, with zero flux through
/// the boundary (and through the centre of a ball).
pub fn plap_weak(u: &GridFunction, p: f64, eps: f64) -> Result<Vec<f64>> {
    check_p(p)?;
    Ok(weak_from_fluxes(&cell_fluxes(u.grid(), &u.values, p, eps)))
}

fn weak_from_fluxes(flux: &[f64]) -> Vec<f64> {
    let n = flux.len() + 1;
    let mut k = vec![0.0; n];
    for (c, f) in flux.iter().enumerate() {
        k[c] -= f;
        k[c + 1] += f;
    }
    k
}

/// Nodal residual of `-Delta_p u` (weak form divided by the nodal mass).
/// Dirichlet boundary rows hold the constraint residual `u - 0`.
pub fn apply_plap(u: &GridFunction, p: f64, eps: f64, bc: BoundaryCondition) -> Result<GridFunction> {
    let k = plap_weak(u, p, eps)?;
    let grid = u.grid();
    let w = grid.weights();
    let values = (0..grid.len())
        .map(|j| {
            if bc == BoundaryCondition::DirichletZero && grid.is_boundary(j) {
                u.values[j]
            } else {
                k[j] / w[j]
            }
        })
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// Weak right-hand side `fixed_j + w_j F(j, u_j)`.
pub struct Load<'a> {
    /// Precomputed `int s phi_j dmu` for a u-independent source `s`.
    pub fixed: Vec<f64>,
    /// Nodal closure lumped with the mass `w_j`.
    pub nodal: Option<&'a (dyn Fn(usize, f64) -> f64 + Sync)>,
}

impl<'a> Load<'a> {
    pub fn fixed(fixed: Vec<f64>) -> Self {
        Load { fixed, nodal: None }
    }

    fn eval(&self, grid: &Grid, u: &[f64], out: &mut [f64]) {
        let w = grid.weights();
        for j in 0..u.len() {
            let mut v = self.fixed[j];
            if let Some(f) = self.nodal {
                v += w[j] * f(j, u[j]);
            }
            out[j] = v;
        }
    }

    fn derivative(&self, grid: &Grid, u: &[f64], out: &mut [f64]) {
        let w = grid.weights();
        match self.nodal {
            None => out.iter_mut().for_each(|o| *o = 0.0),
            Some(f) => {
                for j in 0..u.len() {
                    let h = 1e-7 * (1.0 + u[j].abs());
                    out[j] = w[j] * (f(j, u[j] + h) - f(j, u[j] - h)) / (2.0 * h);
                }
            }
        }
    }

    fn is_u_independent(&self, n: usize) -> bool {
        match self.nodal {
            None => true,
            Some(f) => (0..n).all(|j| {
                let f0 = f(j, 0.0);
                [-1e3, -1.0, 1.0, 1e3].iter().all(|&s| f(j, s) == f0)
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub stage: usize,
    pub eps: f64,
    pub iteration: usize,
    pub residual: f64,
    pub backtracks: usize,
    pub shift: f64,
}

#[derive(Debug, Clone)]
pub struct ScalarSolve {
    pub u: GridFunction,
    /// Final max-norm of the nodal residual in the units of the equation.
    pub residual: f64,
    /// Load scale `max(1, max |F|)` used to make the tolerance relative.
    pub scale: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

pub fn trace_to_tsv(trace: &[TraceRow]) -> String {
    let mut s = String::from("stage\teps\titeration\tresidual\tbacktracks\tshift\n");
    for r in trace {
        let _ = writeln!(
            s,
            "{}\t{:e}\t{}\t{:e}\t{}\t{:e}",
            r.stage, r.eps, r.iteration, r.residual, r.backtracks, r.shift
        );
    }
    s
}

/// Solves `-Delta_p u = rhs(j, u_j)` with the nodal right-hand side lumped.
pub fn solve_scalar(
    rhs: &(dyn Fn(usize, f64) -> f64 + Sync),
    p: f64,
    bc: BoundaryCondition,
    cfg: &SolverConfig,
    u0: &GridFunction,
) -> Result<GridFunction> {
    let load = Load { fixed: vec![0.0; u0.len()], nodal: Some(rhs) };
    Ok(solve_scalar_with(&load, p, bc, cfg, u0)?.u)
}

/// General scalar solver over an explicit weak load.
pub fn solve_scalar_with(
    load: &Load<'_>,
    p: f64,
    bc: BoundaryCondition,
    cfg: &SolverConfig,
    u0: &GridFunction,
) -> Result<ScalarSolve> {
    check_p(p)?;
    cfg.validate()?;
    let grid = u0.grid().clone();
    let n = grid.len();
    if load.fixed.len() != n {
        return Err(Error::GridMismatch);
    }
    let w = grid.weights().to_vec();
    let mut pinned = vec![false; n];
    if bc == BoundaryCondition::DirichletZero {
        for b in grid.boundary() {
            pinned[b.node] = true;
        }
    }
    let mut zero_mean = false;
    if bc == BoundaryCondition::NeumannZero && load.is_u_independent(n) {
        let mut l = vec![0.0; n];
        load.eval(&grid, &u0.values, &mut l);
        let integral: f64 = l.iter().sum();
        let size: f64 = l.iter().map(|v| v.abs()).sum();
        if integral.abs() > 1e-10 * size.max(f64::MIN_POSITIVE) {
            return Err(Error::Compatibility { integral });
        }
        // the remaining equations determine u up to a constant
        pinned[0] = true;
        zero_mean = true;
    }

    let mut l0 = vec![0.0; n];
    load.eval(&grid, &u0.values, &mut l0);
    let lam = (0..n)
        .filter(|&j| !pinned[j])
        .map(|j| l0[j].abs() / w[j])
        .fold(1.0f64, f64::max);
    let scale = lam;
    let s = lam.powf(1.0 / (p - 1.0));
    let sp = lam;

    let mut v: Vec<f64> = u0.values.iter().map(|x| x / s).collect();
    for j in 0..n {
        if pinned[j] && !zero_mean {
            v[j] = 0.0;
        }
    }
    if zero_mean {
        v[0] = 0.0;
    }

    let mut ctx = Newton {
        grid: &grid,
        load,
        p,
        s,
        sp,
        pinned: &pinned,
        w: &w,
        cfg,
        trace: Vec::new(),
        iterations: 0,
    };
    let stages = cfg.eps_schedule.len();
    let mut last_res = f64::INFINITY;
    for (stage, &eps) in cfg.eps_schedule.iter().enumerate() {
        let tol = if stage + 1 == stages { cfg.newton_tol } else { cfg.newton_tol.max(1e-8) };
        last_res = ctx.run(&mut v, eps, stage, tol)?;
    }

    let mut u: Vec<f64> = v.iter().map(|x| x * s).collect();
    if zero_mean {
        let mean = u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        u.iter_mut().for_each(|x| *x -= mean);
    }
    let trace = std::mem::take(&mut ctx.trace);
    Ok(ScalarSolve {
        u: GridFunction::new(grid.clone(), u)?,
        residual: last_res * sp,
        scale,
        iterations: ctx.iterations,
        trace,
    })
}

struct Newton<'a, 'b> {
    grid: &'a Arc<Grid>,
    load: &'a Load<'b>,
    p: f64,
    s: f64,
    sp: f64,
    pinned: &'a [bool],
    w: &'a [f64],
    cfg: &'a SolverConfig,
    trace: Vec<TraceRow>,
    iterations: usize,
}

impl Newton<'_, '_> {
    /// Scaled residual `K(v) - load(S v) / S^{p-1}` on free rows, zero on pinned rows.
    fn residual(&self, v: &[f64], eps: f64, out: &mut [f64]) {
        let n = v.len();
        let flux = cell_fluxes(self.grid, v, self.p, eps);
        let u: Vec<f64> = v.iter().map(|x| x * self.s).collect();
        let mut l = vec![0.0; n];
        self.load.eval(self.grid, &u, &mut l);
        for j in 0..n {
            out[j] = 0.0;
        }
        for (c, f) in flux.iter().enumerate() {
            out[c] -= f;
            out[c + 1] += f;
        }
        for j in 0..n {
            out[j] = if self.pinned[j] { 0.0 } else { out[j] - l[j] / self.sp };
        }
    }

    fn merit(&self, r: &[f64]) -> f64 {
        r.iter().zip(self.w).map(|(a, b)| a * a / b).sum::<f64>()
    }

    fn max_norm(&self, r: &[f64]) -> f64 {
        r.iter().zip(self.w).fold(0.0, |m, (a, b)| m.max((a / b).abs()))
    }

    fn jacobian(&self, v: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = v.len();
        let x = self.grid.nodes();
        let a = self.grid.cell_coef();
        let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for c in 0..n - 1 {
            let h = x[c + 1] - x[c];
            let g = (v[c + 1] - v[c]) / h;
            let k = a[c] * reg_flux_deriv(g, self.p, eps) / h;
            di[c] += k;
            di[c + 1] += k;
            up[c] -= k;
            lo[c + 1] -= k;
        }
        let u: Vec<f64> = v.iter().map(|x| x * self.s).collect();
        let mut dl = vec![0.0; n];
        self.load.derivative(self.grid, &u, &mut dl);
        for j in 0..n {
            if self.pinned[j] {
                di[j] = 1.0;
                lo[j] = 0.0;
                up[j] = 0.0;
            } else {
                di[j] -= dl[j] * self.s / self.sp;
            }
        }
        (lo, di, up)
    }

    fn run(&mut self, v: &mut [f64], eps: f64, stage: usize, tol: f64) -> Result<f64> {
        let n = v.len();
        let mut r = vec![0.0; n];
        let mut r_new = vec![0.0; n];
        let mut trial = vec![0.0; n];
        self.residual(v, eps, &mut r);
        let mut res = self.max_norm(&r);
        for it in 0..self.cfg.max_newton {
            if res <= tol {
                return Ok(res);
            }
            self.iterations += 1;
            let phi = self.merit(&r);
            let (lo, di, up) = self.jacobian(v, eps);
            let dscale = di.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
            let wmax = self.w.iter().fold(0.0f64, |m, x| m.max(*x));
            let mut accepted = None;
            for &shift in &[0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4] {
                let mut d = di.clone();
                if shift > 0.0 {
                    for j in 0..n {
                        if !self.pinned[j] {
                            d[j] += shift * dscale * self.w[j] / wmax;
                        }
                    }
                }
                let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
                let Some(step) = thomas(&lo, &d, &up, &rhs) else { continue };
                let mut t = 1.0;
                for bt in 0..=self.cfg.max_backtracks {
                    for j in 0..n {
                        trial[j] = v[j] + t * step[j];
                    }
                    self.residual(&trial, eps, &mut r_new);
                    let phi_new = self.merit(&r_new);
                    if phi_new.is_finite() && phi_new <= (1.0 - 1e-4 * t) * phi {
                        let moved = t * step.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                        accepted = Some((bt, shift, moved));
                        break;
                    }
                    t *= self.cfg.damping;
                }
                if accepted.is_some() {
                    break;
                }
                // step already at roundoff: the residual cannot decrease further
                let vnorm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let snorm = step.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if shift == 0.0 && snorm <= ROUNDOFF_STEP * (1.0 + vnorm) && res <= FLOOR_ACCEPT {
                    self.push_trace(stage, eps, it, res, self.cfg.max_backtracks, shift);
                    return Ok(res);
                }
            }
            let Some((bt, shift, moved)) = accepted else {
                if res <= FLOOR_ACCEPT {
                    return Ok(res);
                }
                return Err(Error::Convergence {
                    iterations: self.iterations,
                    stage,
                    residual: res * self.sp,
                    last_iterate: v.iter().map(|x| x * self.s).collect(),
                });
            };
            v.copy_from_slice(&trial);
            std::mem::swap(&mut r, &mut r_new);
            res = self.max_norm(&r);
            self.push_trace(stage, eps, it, res, bt, shift);
            let vnorm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if moved <= ROUNDOFF_STEP * (1.0 + vnorm) && res <= FLOOR_ACCEPT {
                return Ok(res);
            }
        }
        if res <= tol {
            return Ok(res);
        }
        Err(Error::Convergence {
            iterations: self.iterations,
            stage,
            residual: res * self.sp,
            last_iterate: v.iter().map(|x| x * self.s).collect(),
        })
    }

    fn push_trace(&mut self, stage: usize, eps: f64, iteration: usize, residual: f64, backtracks: usize, shift: f64) {
        let row = TraceRow { stage, eps, iteration, residual: residual * self.sp, backtracks, shift };
        if self.cfg.verbose {
            eprintln!("{}\t{:e}\t{}\t{:e}\t{}\t{:e}", stage, eps, iteration, row.residual, backtracks, shift);
        }
        self.trace.push(row);
    }
}

/// Tridiagonal solve; `None` on a vanishing or non-finite pivot.
pub(crate) fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = di[0];
    if !(piv.abs() > 1e-300) || !piv.is_finite() {
        return None;
    }
    c[0] = up[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = di[i] - lo[i] * c[i - 1];
        if !(piv.abs() > 1e-300) || !piv.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { up[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Outward derivative and conormal flux at one boundary node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFlux {
    pub node: usize,
    /// `du/deta`.
    pub normal_derivative: f64,
    /// `|u'|^{p-2} du/deta`.
    pub conormal: f64,
}

/// One-sided second-order normal derivatives at every boundary component.
pub fn boundary_flux(u: &GridFunction, p: f64) -> Vec<BoundaryFlux> {
    let grid = u.grid();
    let x = grid.nodes();
    let n = grid.len();
    grid.boundary()
        .into_iter()
        .map(|b| {
            let (j0, j1, j2, sign) = if b.node == 0 { (0, 1, 2, -1.0) } else { (n - 1, n - 2, n - 3, 1.0) };
            let (x0, x1, x2) = (x[j0], x[j1], x[j2]);
            let (u0, u1, u2) = (u.values[j0], u.values[j1], u.values[j2]);
            // derivative of the quadratic interpolant at x0
            let du = u0 * (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
                + u1 * (x0 - x2) / ((x1 - x0) * (x1 - x2))
                + u2 * (x0 - x1) / ((x2 - x0) * (x2 - x1));
            let dn = sign * du;
            let conormal = if dn == 0.0 { 0.0 } else { dn.abs().powf(p - 2.0) * dn };
            BoundaryFlux { node: b.node, normal_derivative: dn, conormal }
        })
        .collect()
}
