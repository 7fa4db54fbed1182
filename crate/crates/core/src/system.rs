//! Penalized truncated system, its block Gauss-Seidel solve, and the
//! a-posteriori certificates of box containment, weak residual and sign
//! structure.

use std::fmt::Write as _;

use crate::barriers::{BarrierKind, BarrierSet};
use crate::domain::{Grid, GridFunction};
use crate::error::{config, Error, Result};
use crate::model::{weight_h_load, NonlinearitySpec, SingularWeightParams};
use crate::plap::{plap_weak, solve_scalar_with, BoundaryCondition, Load, SolverConfig};
use crate::report::{CertificationReport, Check, Worst};

pub const DEFAULT_MAX_OUTER: usize = 200;

/// Relative outer tolerance; the absolute one is this times the box scale.
pub const DEFAULT_OUTER_TOL: f64 = 1e-9;

/// Nodal clamp of `w` into `[lo, hi]`.
pub fn truncate(w: &GridFunction, lo: &GridFunction, hi: &GridFunction) -> Result<GridFunction> {
    w.same_grid(lo)?;
    w.same_grid(hi)?;
    if let Some(j) = (0..w.len()).find(|&j| !(lo.values[j] <= hi.values[j])) {
        return config(format!(
            "truncation box is empty at node {j}: {:e} > {:e}",
            lo.values[j], hi.values[j]
        ));
    }
    let values = (0..w.len()).map(|j| w.values[j].clamp(lo.values[j], hi.values[j])).collect();
    GridFunction::new(w.grid().clone(), values)
}

/// `-(lo - s)_+^{p-1} + (s - hi)_+^{p-1}`.
pub fn penalty_value(s: f64, lo: f64, hi: f64, p: f64) -> f64 {
    let below = (lo - s).max(0.0);
    let above = (s - hi).max(0.0);
    let pw = |t: f64| if t > 0.0 { t.powf(p - 1.0) } else { 0.0 };
    pw(above) - pw(below)
}

pub fn penalty(w: &GridFunction, lo: &GridFunction, hi: &GridFunction, p: f64) -> Result<GridFunction> {
    w.same_grid(lo)?;
    w.same_grid(hi)?;
    let values = (0..w.len()).map(|j| penalty_value(w.values[j], lo.values[j], hi.values[j], p)).collect();
    GridFunction::new(w.grid().clone(), values)
}

/// Order box `[lo_1, hi_1] x [lo_2, hi_2]`.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub lo: [GridFunction; 2],
    pub hi: [GridFunction; 2],
}

impl Bounds {
    pub fn new(u_lo: GridFunction, u_hi: GridFunction, v_lo: GridFunction, v_hi: GridFunction) -> Result<Self> {
        for (a, b) in [(&u_lo, &u_hi), (&v_lo, &v_hi), (&u_lo, &v_lo)] {
            a.same_grid(b)?;
        }
        for (lo, hi) in [(&u_lo, &u_hi), (&v_lo, &v_hi)] {
            if let Some(j) = (0..lo.len()).find(|&j| !(lo.values[j] <= hi.values[j])) {
                return config(format!("box is empty at node {j}: {:e} > {:e}", lo.values[j], hi.values[j]));
            }
        }
        Ok(Bounds { lo: [u_lo, v_lo], hi: [u_hi, v_hi] })
    }

    /// Box spanned by a barrier set; the lower barrier is clipped to the
    /// upper one where they cross, which only happens for uncertified sets.
    pub fn from_barriers(bs: &BarrierSet) -> Self {
        let clip = |lo: &GridFunction, hi: &GridFunction| {
            let v = lo.values.iter().zip(&hi.values).map(|(a, b)| a.min(*b)).collect();
            GridFunction::new(lo.grid().clone(), v).expect("same grid")
        };
        Bounds {
            lo: [clip(&bs.u_sub, &bs.u_sup), clip(&bs.v_sub, &bs.v_sup)],
            hi: [bs.u_sup.clone(), bs.v_sup.clone()],
        }
    }

    pub fn grid(&self) -> &std::sync::Arc<Grid> {
        self.lo[0].grid()
    }

    pub fn scale(&self) -> f64 {
        self.lo.iter().chain(&self.hi).map(|g| g.max_abs()).fold(1.0, f64::max)
    }

    pub fn midpoint(&self, i: usize) -> GridFunction {
        let (lo, hi) = (&self.lo[i - 1], &self.hi[i - 1]);
        let v = lo.values.iter().zip(&hi.values).map(|(a, b)| 0.5 * (a + b)).collect();
        GridFunction::new(lo.grid().clone(), v).expect("same grid")
    }
}

/// Parameters of the penalized system. `lambda = 0` drops the weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub p1: f64,
    pub p2: f64,
    pub lambda: f64,
    pub mu: f64,
    pub weight: Option<SingularWeightParams>,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return config(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.mu > 0.0) {
            return config(format!("penalty coefficient must be positive, got {}", self.mu));
        }
        if self.lambda > 0.0 && self.weight.is_none() {
            return config("lambda > 0 needs singular weight parameters");
        }
        Ok(())
    }

    pub fn p(&self, i: usize) -> f64 {
        if i == 1 {
            self.p1
        } else {
            self.p2
        }
    }

    /// Parameters matching a barrier set.
    pub fn from_barriers(bs: &BarrierSet) -> Self {
        let bp = &bs.params;
        SystemParams {
            p1: bp.exps.p1,
            p2: bp.exps.p2,
            lambda: bp.lambda(),
            mu: bp.mu,
            weight: Some(bp.weight),
        }
    }

    /// Weak load `lambda int h_i phi_j`.
    fn weight_load(&self, i: usize, grid: &Grid) -> Result<Vec<f64>> {
        match self.weight {
            Some(w) if self.lambda > 0.0 => {
                Ok(weight_h_load(&w, i, grid)?.into_iter().map(|v| self.lambda * v).collect())
            }
            _ => Ok(vec![0.0; grid.len()]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub u: GridFunction,
    pub v: GridFunction,
    pub residual_u: f64,
    pub residual_v: f64,
    pub iterations: usize,
    pub box_ok: bool,
    /// `max |chi_1(u)|`, `max |chi_2(v)|`.
    pub penalty_active: [f64; 2],
    /// Successive max-norm changes of the outer iteration.
    pub changes: Vec<f64>,
    pub notice: Option<String>,
}

impl SolutionPair {
    pub fn component(&self, i: usize) -> &GridFunction {
        if i == 1 {
            &self.u
        } else {
            &self.v
        }
    }

    pub fn to_tsv(&self, bounds: &Bounds) -> String {
        let grid = self.u.grid();
        let thr = sign_threshold(self);
        let sign = |x: f64| {
            if x > thr {
                "+"
            } else if x < -thr {
                "-"
            } else {
                "0"
            }
        };
        let mut s = String::from("node\td\tu\tv\tu_sub\tu_sup\tv_sub\tv_sup\tsign_u\tsign_v\n");
        for j in 0..grid.len() {
            let _ = writeln!(
                s,
                "{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{}\t{}",
                j,
                grid.distances()[j],
                self.u.values[j],
                self.v.values[j],
                bounds.lo[0].values[j],
                bounds.hi[0].values[j],
                bounds.lo[1].values[j],
                bounds.hi[1].values[j],
                sign(self.u.values[j]),
                sign(self.v.values[j])
            );
        }
        s
    }
}

fn eval_pair(spec: &NonlinearitySpec, i: usize, x: f64, own: f64, other: f64) -> f64 {
    if i == 1 {
        spec.eval(1, x, own, other)
    } else {
        spec.eval(2, x, other, own)
    }
}

fn vanishes(spec: &NonlinearitySpec, grid: &Grid) -> bool {
    let probe = [-1e3, -1.0, 0.0, 1.0, 1e3];
    grid.nodes().iter().step_by((grid.len() / 8).max(1)).all(|&x| {
        probe.iter().all(|&s| probe.iter().all(|&t| spec.eval(1, x, s, t) == 0.0 && spec.eval(2, x, s, t) == 0.0))
    })
}

/// Block Gauss-Seidel solve of the penalized truncated Neumann system,
/// started from the midpoint of the box.
pub fn solve_penalized_system(
    bounds: &Bounds,
    spec: &NonlinearitySpec,
    params: &SystemParams,
    cfg: &SolverConfig,
    outer_tol: f64,
    max_outer: usize,
) -> Result<SolutionPair> {
    params.validate()?;
    if !(outer_tol > 0.0) || max_outer == 0 {
        return config("outer tolerance and iteration cap must be positive");
    }
    let grid = bounds.grid().clone();
    let x = grid.nodes().to_vec();
    let loads = [params.weight_load(1, &grid)?, params.weight_load(2, &grid)?];
    let mut comp = [bounds.midpoint(1), bounds.midpoint(2)];
    let mut changes = Vec::new();
    let mut converged = false;
    for _ in 0..max_outer {
        let mut change = 0.0f64;
        for i in 1..=2 {
            let k = i - 1;
            let other = comp[1 - k].clone();
            let (olo, ohi) = (&bounds.lo[1 - k].values, &bounds.hi[1 - k].values);
            let (lo, hi) = (&bounds.lo[k].values, &bounds.hi[k].values);
            let p = params.p(i);
            let mu = params.mu;
            let rhs = |j: usize, s: f64| {
                let t = other.values[j].clamp(olo[j], ohi[j]);
                let own = s.clamp(lo[j], hi[j]);
                eval_pair(spec, i, x[j], own, t) - mu * penalty_value(s, lo[j], hi[j], p)
            };
            let load = Load { fixed: loads[k].clone(), nodal: Some(&rhs) };
            let next = solve_scalar_with(&load, p, BoundaryCondition::NeumannZero, cfg, &comp[k])?.u;
            change = change.max(next.max_abs_diff(&comp[k])?);
            comp[k] = next;
        }
        changes.push(change);
        if change <= outer_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::OuterConvergence {
            iterations: changes.len(),
            change: changes.last().copied().unwrap_or(f64::NAN),
        });
    }
    let [u, v] = comp;
    let (residual_u, residual_v) = weak_residual(&u, &v, spec, params)?;
    let tol = 1e-6 * bounds.scale();
    let mut box_ok = true;
    let mut penalty_active = [0.0f64; 2];
    for (k, w) in [&u, &v].into_iter().enumerate() {
        let (lo, hi) = (&bounds.lo[k].values, &bounds.hi[k].values);
        for j in 0..w.len() {
            let s = w.values[j];
            if s < lo[j] - tol || s > hi[j] + tol {
                box_ok = false;
            }
            penalty_active[k] = penalty_active[k].max(penalty_value(s, lo[j], hi[j], params.p(k + 1)).abs());
        }
    }
    let notice = (params.lambda == 0.0 && vanishes(spec, &grid)).then(|| {
        String::from("degenerate kernel: every constant pair in the box solves; the iterate is one representative")
    });
    Ok(SolutionPair {
        u,
        v,
        residual_u,
        residual_v,
        iterations: changes.len(),
        box_ok,
        penalty_active,
        changes,
        notice,
    })
}

/// Max over hat test functions of the weak defect of the un-truncated,
/// un-penalized system, divided by the nodal mass.
pub fn weak_residual(
    u: &GridFunction,
    v: &GridFunction,
    spec: &NonlinearitySpec,
    params: &SystemParams,
) -> Result<(f64, f64)> {
    u.same_grid(v)?;
    let grid = u.grid();
    let x = grid.nodes();
    let w = grid.weights();
    let mut out = [0.0f64; 2];
    for i in 1..=2 {
        let (own, other) = if i == 1 { (u, v) } else { (v, u) };
        let k = plap_weak(own, params.p(i), 0.0)?;
        let h = params.weight_load(i, grid)?;
        for j in 0..grid.len() {
            let rhs = h[j] + w[j] * eval_pair(spec, i, x[j], own.values[j], other.values[j]);
            out[i - 1] = out[i - 1].max((k[j] - rhs).abs() / w[j]);
        }
    }
    Ok((out[0], out[1]))
}

fn sign_threshold(sp: &SolutionPair) -> f64 {
    1e-10 * sp.u.max_abs().max(sp.v.max_abs())
}

/// Nodal or positive sign certificates of a solved pair.
pub fn classify_solution(sp: &SolutionPair, bs: &BarrierSet) -> CertificationReport {
    let grid = sp.u.grid();
    let x = grid.nodes();
    let d = grid.distances();
    let thr = sign_threshold(sp);
    let params = &bs.params;
    let mut rep = CertificationReport::new("solution classification");
    match bs.kind {
        BarrierKind::Nodal => {
            let inner = params.inner_radius();
            let delta = params.delta();
            rep.value("inner_radius", inner);
            rep.value("delta", delta);
            for (i, name) in [(1, "u"), (2, "v")] {
                let w = sp.component(i);
                let mut neg = Worst::default();
                let mut pos = Worst::default();
                let (mut n_pos, mut n_neg) = (0usize, 0usize);
                for j in 0..grid.len() {
                    let s = w.values[j];
                    if s > thr {
                        n_pos += 1;
                    } else if s < -thr {
                        n_neg += 1;
                    }
                    if d[j] < inner {
                        neg.push(j, -s - thr, 0.0);
                    }
                    if d[j] > delta {
                        pos.push(j, s - thr, 0.0);
                    }
                }
                for (wst, id) in [(neg, format!("{name}<0 near boundary")), (pos, format!("{name}>0 in core"))] {
                    let mut c = wst.into_check(id, x);
                    if wst.node.is_some() {
                        c.pass = wst.margin > 0.0;
                    } else {
                        c = Check::new(c.id, false, f64::NAN).with_note("no node in the region");
                    }
                    rep.push(c);
                }
                let nodal = n_pos > 0 && n_neg > 0;
                rep.push(
                    Check::new(format!("{name} nodal"), nodal, n_pos.min(n_neg) as f64)
                        .with_note(format!("{n_pos} positive, {n_neg} negative nodes")),
                );
            }
        }
        BarrierKind::Positive => {
            let mut c_emp = f64::INFINITY;
            let mut at = 0;
            for j in 0..grid.len() {
                if grid.is_boundary(j) || d[j] <= 0.0 {
                    continue;
                }
                let r = sp.u.values[j].min(sp.v.values[j]) / d[j];
                if r < c_emp {
                    c_emp = r;
                    at = j;
                }
            }
            let c_proof = params.positive_constant();
            rep.value("c_emp", c_emp);
            rep.value("c_lower", c_proof);
            rep.push(Check::new("c_emp>0", c_emp > 0.0, c_emp).at(at, x[at]));
            rep.push(Check::new("c_emp>=l/(8 lambda)", c_emp >= c_proof / 4.0, c_emp - c_proof / 4.0).at(at, x[at]));
        }
    }
    rep
}

/// Box containment and penalty inactivity of a solved pair.
pub fn certify_containment(sp: &SolutionPair, bounds: &Bounds, tol_rel: f64) -> CertificationReport {
    let grid = sp.u.grid();
    let x = grid.nodes();
    let tol = tol_rel * bounds.scale();
    let mut rep = CertificationReport::new("box containment");
    for (k, name) in [(0, "u"), (1, "v")] {
        let w = sp.component(k + 1);
        let mut lo = Worst::default();
        let mut hi = Worst::default();
        for j in 0..grid.len() {
            lo.push(j, w.values[j] - bounds.lo[k].values[j], tol);
            hi.push(j, bounds.hi[k].values[j] - w.values[j], tol);
        }
        rep.push(lo.into_check(format!("{name}>=sub"), x));
        rep.push(hi.into_check(format!("{name}<=sup"), x));
        rep.push(Check::new(
            format!("chi{} inactive", k + 1),
            sp.penalty_active[k] <= tol_rel,
            tol_rel - sp.penalty_active[k],
        ));
    }
    rep.value("residual_u", sp.residual_u);
    rep.value("residual_v", sp.residual_v);
    rep.value("outer_iterations", sp.iterations as f64);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainDesc};
    use crate::model::lookup_nonlinearity;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn interval(n: usize) -> Arc<Grid> {
        build_grid(DomainDesc::Interval { a: 0.0, b: 1.0 }, n, 1.0).unwrap()
    }

    fn consts(g: &Arc<Grid>, c: f64) -> GridFunction {
        GridFunction::constant(g, c)
    }

    #[test]
    fn truncate_examples() {
        let g = interval(17);
        let lo = consts(&g, -1.0);
        let hi = consts(&g, 1.0);
        let inside = GridFunction::from_fn(&g, |x| x - 0.5);
        assert_eq!(truncate(&inside, &lo, &hi).unwrap(), inside);
        assert_eq!(truncate(&consts(&g, -2.0), &lo, &hi).unwrap(), lo);
        assert_eq!(truncate(&consts(&g, 6.0), &lo, &hi).unwrap(), hi);
        assert!(matches!(truncate(&inside, &hi, &lo), Err(Error::Config(_))));
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty_value(0.3, -1.0, 1.0, 3.0), 0.0);
        assert_eq!(penalty_value(2.0, -1.0, 1.0, 3.0), 1.0);
        assert_eq!(penalty_value(-3.0, -1.0, 1.0, 3.0), -4.0);
    }

    #[test]
    fn zero_spec_returns_constant_in_box() {
        let g = interval(33);
        let b = Bounds::new(consts(&g, -1.0), consts(&g, 1.0), consts(&g, -1.0), consts(&g, 1.0)).unwrap();
        let spec = lookup_nonlinearity("zero").unwrap();
        let sp = SystemParams { p1: 2.0, p2: 2.5, lambda: 0.0, mu: 1.0, weight: None };
        let sol = solve_penalized_system(&b, &spec, &sp, &SolverConfig::default(), 1e-9, 200).unwrap();
        assert!(sol.box_ok);
        assert!(sol.residual_u <= 1e-9 && sol.residual_v <= 1e-9);
        let c = sol.u.values[0];
        assert!(sol.u.values.iter().all(|v| (v - c).abs() < 1e-12));
        assert!(sol.notice.is_some());
    }

    #[test]
    fn manufactured_recovers_cosine() {
        let g = interval(257);
        let b = Bounds::new(consts(&g, -5.0), consts(&g, 5.0), consts(&g, -5.0), consts(&g, 5.0)).unwrap();
        let spec = lookup_nonlinearity("manufactured").unwrap();
        let sp = SystemParams { p1: 2.0, p2: 2.0, lambda: 0.0, mu: 1.0, weight: None };
        let sol = solve_penalized_system(&b, &spec, &sp, &SolverConfig::default(), 1e-9, 200).unwrap();
        let exact = GridFunction::from_fn(&g, |x| (PI * x).cos());
        assert!(sol.u.max_abs_diff(&exact).unwrap() < 1e-3);
        assert!(sol.v.max_abs_diff(&exact).unwrap() < 1e-3);
        assert!(sol.residual_u < 1e-8);
        assert_eq!(sol.penalty_active, [0.0, 0.0]);
    }

    #[test]
    fn zero_pair_has_zero_residual() {
        let g = interval(33);
        let z = consts(&g, 0.0);
        let spec = lookup_nonlinearity("zero").unwrap();
        let sp = SystemParams { p1: 2.0, p2: 3.0, lambda: 0.0, mu: 1.0, weight: None };
        assert_eq!(weak_residual(&z, &z, &spec, &sp).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn outer_cap_is_reported() {
        let g = interval(33);
        let b = Bounds::new(consts(&g, -5.0), consts(&g, 5.0), consts(&g, -5.0), consts(&g, 5.0)).unwrap();
        let spec = lookup_nonlinearity("manufactured").unwrap();
        let sp = SystemParams { p1: 2.0, p2: 2.0, lambda: 0.0, mu: 1.0, weight: None };
        let r = solve_penalized_system(&b, &spec, &sp, &SolverConfig::default(), 1e-300, 1);
        assert!(matches!(r, Err(Error::OuterConvergence { iterations: 1, .. })));
    }
}
