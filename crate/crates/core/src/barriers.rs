//! Sub- and super-solution barriers built from torsion functions, the
//! parameter search, and the nodal certificates of ordering and of the
//! differential inequalities.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::auxiliary::{extract_constants, perturbed_torsion, torsion, TorsionConstants};
use crate::domain::{Grid, GridFunction};
use crate::error::{config, Error, Result};
use crate::model::{weight_h, weight_power, Exponents, NonlinearitySpec, SingularWeightParams};
use crate::plap::{apply_plap, BoundaryCondition, SolverConfig};
use crate::report::{CertificationReport, Check, Worst};

/// Number of samples of the frozen component per node.
pub const BOX_SAMPLES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    /// Sign-changing pair `(z_delta - l delta/2)/lambda`, `lambda^{p'}(z^w - (L delta/lambda^theta)^w)`.
    Nodal,
    /// Positive pair `z_delta/lambda`, `lambda^{p'} z^w`.
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub exps: Exponents,
    pub weight: SingularWeightParams,
    pub mu: f64,
    /// Constants valid for both torsion functions.
    pub constants: TorsionConstants,
    pub component_constants: [TorsionConstants; 2],
    pub d_star: f64,
}

impl BarrierParams {
    pub fn new(
        exps: Exponents,
        weight: SingularWeightParams,
        mu: f64,
        component_constants: [TorsionConstants; 2],
        d_star: f64,
    ) -> Result<Self> {
        if !(mu > 0.0) {
            return config(format!("penalty coefficient must be positive, got {mu}"));
        }
        let constants = TorsionConstants::combine(&component_constants[0], &component_constants[1]);
        if !(constants.l > 0.0 && constants.l <= constants.big_l) {
            return config(format!("need 0 < l <= L, got l = {}, L = {}", constants.l, constants.big_l));
        }
        Ok(BarrierParams { exps, weight, mu, constants, component_constants, d_star })
    }

    pub fn lambda(&self) -> f64 {
        self.weight.lambda
    }

    pub fn theta(&self) -> f64 {
        self.weight.theta
    }

    pub fn delta(&self) -> f64 {
        self.weight.delta
    }

    /// `lambda^{-theta} delta`, below which the super-solutions are negative.
    pub fn inner_radius(&self) -> f64 {
        self.delta() * (-self.theta() * self.lambda().ln()).exp()
    }

    /// `C_i = (L d_*)^{omega_i}`.
    pub fn c_i(&self, i: usize) -> f64 {
        (self.constants.big_l * self.d_star).powf(self.weight.omega(i))
    }

    /// `C = 2 M_1 C_1^{alpha_1} C_2^{beta_1}` for component `i`.
    pub fn envelope_constant(&self, spec: &NonlinearitySpec, i: usize) -> f64 {
        let g = spec.growth[i - 1];
        2.0 * g.m * self.c_i(1).powf(g.alpha) * self.c_i(2).powf(g.beta)
    }

    /// Lower-bound constant `l/(2 lambda)` of the positive barriers.
    pub fn positive_constant(&self) -> f64 {
        self.constants.l / (2.0 * self.lambda())
    }
}

/// `l delta/(2 lambda) < min rho_i`.
pub fn delta_admissible(l: f64, delta: f64, lambda: f64, rho_min: f64) -> bool {
    l * delta / (2.0 * lambda) < rho_min
}

#[derive(Debug, Clone)]
pub struct BarrierSet {
    pub u_sub: GridFunction,
    pub v_sub: GridFunction,
    pub u_sup: GridFunction,
    pub v_sup: GridFunction,
    pub params: BarrierParams,
    pub kind: BarrierKind,
    /// Torsion functions behind the super-solutions.
    pub z: [GridFunction; 2],
    /// Perturbed torsion functions behind the sub-solutions.
    pub z_delta: [GridFunction; 2],
}

impl BarrierSet {
    pub fn grid(&self) -> &Arc<Grid> {
        self.u_sub.grid()
    }

    pub fn sub(&self, i: usize) -> &GridFunction {
        if i == 1 {
            &self.u_sub
        } else {
            &self.v_sub
        }
    }

    pub fn sup(&self, i: usize) -> &GridFunction {
        if i == 1 {
            &self.u_sup
        } else {
            &self.v_sup
        }
    }

    /// Largest absolute barrier value, used to scale tolerances.
    pub fn box_scale(&self) -> f64 {
        [&self.u_sub, &self.u_sup, &self.v_sub, &self.v_sup]
            .iter()
            .map(|g| g.max_abs())
            .fold(1.0, f64::max)
    }

    pub fn to_tsv(&self) -> Result<String> {
        let grid = self.grid();
        let h1 = weight_h(&self.params.weight, 1, grid)?;
        let h2 = weight_h(&self.params.weight, 2, grid)?;
        let mut s = String::from("node\td\tu_sub\tu_sup\tv_sub\tv_sup\th1\th2\n");
        for j in 0..grid.len() {
            let _ = writeln!(
                s,
                "{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}",
                j,
                grid.distances()[j],
                self.u_sub.values[j],
                self.u_sup.values[j],
                self.v_sub.values[j],
                self.v_sup.values[j],
                h1.values[j],
                h2.values[j]
            );
        }
        Ok(s)
    }
}

fn same_grid(a: &GridFunction, b: &GridFunction) -> Result<()> {
    a.same_grid(b)
}

/// `u_sub = (z_{1,delta} - l delta/2)/lambda` and likewise for `v_sub`.
pub fn build_sub(params: &BarrierParams, z1d: &GridFunction, z2d: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    same_grid(z1d, z2d)?;
    let lam = params.lambda();
    let shift = params.constants.l * params.delta() / 2.0;
    Ok((z1d.map(|z| (z - shift) / lam), z2d.map(|z| (z - shift) / lam)))
}

/// `lambda^{p'} z^omega`, exactly zero where `z = 0`.
fn scaled_power(z: &GridFunction, lam_pow: f64, omega: f64) -> Result<GridFunction> {
    if let Some(j) = z.values.iter().position(|v| *v < 0.0) {
        return Err(Error::Positivity { node: j, value: z.values[j] });
    }
    Ok(z.map(|v| if v == 0.0 { 0.0 } else { lam_pow * (omega * v.ln()).exp() }))
}

/// `u_sup = lambda^{p1'}(z_1^{omega_1} - (L delta/lambda^theta)^{omega_1})`.
pub fn build_super(params: &BarrierParams, z1: &GridFunction, z2: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    same_grid(z1, z2)?;
    let lam = params.lambda();
    let ln_corner = params.constants.big_l.ln() + params.delta().ln() - params.theta() * lam.ln();
    let mut out = Vec::with_capacity(2);
    for (i, z) in [(1, z1), (2, z2)] {
        let omega = params.weight.omega(i);
        let lp = lam.powf(params.exps.conj(i));
        let corner = lp * (omega * ln_corner).exp();
        out.push(scaled_power(z, lp, omega)?.map(|v| v - corner));
    }
    let v = out.pop().unwrap();
    let u = out.pop().unwrap();
    Ok((u, v))
}

/// Positive barriers `(z_{i,delta}/lambda)` and `(lambda^{p_i'} z_i^{omega_i})`.
pub fn build_positive_barriers(
    params: &BarrierParams,
    z1: &GridFunction,
    z2: &GridFunction,
    z1d: &GridFunction,
    z2d: &GridFunction,
) -> Result<BarrierSet> {
    same_grid(z1, z1d)?;
    same_grid(z2, z2d)?;
    let lam = params.lambda();
    let mut sup = Vec::with_capacity(2);
    for (i, z) in [(1, z1), (2, z2)] {
        sup.push(scaled_power(z, lam.powf(params.exps.conj(i)), params.weight.omega(i))?);
    }
    let v_sup = sup.pop().unwrap();
    let u_sup = sup.pop().unwrap();
    Ok(BarrierSet {
        u_sub: z1d.map(|z| z / lam),
        v_sub: z2d.map(|z| z / lam),
        u_sup,
        v_sup,
        params: *params,
        kind: BarrierKind::Positive,
        z: [z1.clone(), z2.clone()],
        z_delta: [z1d.clone(), z2d.clone()],
    })
}

pub fn build_nodal_barriers(
    params: &BarrierParams,
    z1: &GridFunction,
    z2: &GridFunction,
    z1d: &GridFunction,
    z2d: &GridFunction,
) -> Result<BarrierSet> {
    let (u_sub, v_sub) = build_sub(params, z1d, z2d)?;
    let (u_sup, v_sup) = build_super(params, z1, z2)?;
    same_grid(&u_sub, &u_sup)?;
    Ok(BarrierSet {
        u_sub,
        v_sub,
        u_sup,
        v_sup,
        params: *params,
        kind: BarrierKind::Nodal,
        z: [z1.clone(), z2.clone()],
        z_delta: [z1d.clone(), z2d.clone()],
    })
}

/// Lower-bound certificate `u_sub, v_sub >= (l/(2 lambda)) d` of positive barriers.
pub fn positive_lower_bound(bs: &BarrierSet) -> Check {
    let grid = bs.grid();
    let c = bs.params.positive_constant();
    let d = grid.distances();
    let mut w = Worst::default();
    for j in 0..grid.len() {
        if grid.is_boundary(j) {
            continue;
        }
        let m = bs.u_sub.values[j].min(bs.v_sub.values[j]) - c * d[j];
        w.push(j, m, 1e-8 * c * d[j]);
    }
    w.into_check("positive.lower_bound", grid.nodes())
}

fn local_tol(a: f64, b: f64) -> f64 {
    1e-8 * 1f64.max(a.abs()).max(b.abs())
}

pub fn certify_ordering(bs: &BarrierSet) -> CertificationReport {
    let mut rep = CertificationReport::new("barrier ordering");
    let grid = bs.grid();
    let x = grid.nodes();
    for i in 1..=2 {
        let (lo, hi) = (bs.sub(i), bs.sup(i));
        let mut w = Worst::default();
        for j in 0..grid.len() {
            w.push(j, hi.values[j] - lo.values[j], local_tol(lo.values[j], hi.values[j]));
        }
        rep.push(w.into_check(format!("ordering{i}"), x));
    }
    if bs.kind == BarrierKind::Nodal {
        for i in 1..=2 {
            let mut w = Worst::default();
            for b in grid.boundary() {
                let v = bs.sup(i).values[b.node];
                w.push(b.node, -v, 0.0);
                if !(v < 0.0) {
                    w.ok = false;
                }
            }
            rep.push(w.into_check(format!("boundary.sup{i}<0"), x));
        }
    }
    rep
}

/// Classical `-Delta_p` of the sub-solution of component `i` at distance `d`.
pub fn sub_strong_form(params: &BarrierParams, i: usize, d: f64) -> f64 {
    let p = params.exps.p(i);
    let lam = params.lambda();
    if d > params.delta() {
        lam.powf(1.0 - p)
    } else {
        let e = (params.theta() - 1.0) * p + 1.0;
        -lam.powf(e) * weight_power(d, params.weight.gamma_plus_one(i))
    }
}

/// Classical `-Delta_p (lambda^{p'} z^omega)` from `z` and `|z'|`.
pub fn super_strong_form(params: &BarrierParams, i: usize, z: f64, dz: f64) -> f64 {
    let p = params.exps.p(i);
    let lam = params.lambda();
    let om1 = params.weight.omega_minus_one(i);
    let omega = 1.0 + om1;
    let bracket = z - om1 * (p - 1.0) * dz.abs().powf(p);
    lam.powf(p) * omega.powf(p - 1.0) * bracket * weight_power(z, params.weight.gamma_plus_one(i))
}

/// `lambda h_i(d)` away from the boundary.
fn lambda_h(params: &BarrierParams, i: usize, d: f64) -> f64 {
    let w = weight_power(d, params.weight.gamma_plus_one(i));
    let s = if d < params.delta() { -1.0 } else { 1.0 };
    params.lambda() * s * w
}

/// Deterministic samples of the frozen component over `[lo, hi]` per node.
pub fn box_samples(lo: &GridFunction, hi: &GridFunction, seed: u64) -> Vec<[f64; BOX_SAMPLES]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lo.values
        .iter()
        .zip(&hi.values)
        .map(|(&a, &b)| {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let mut s = [a, b, 0.5 * (a + b), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            for v in s.iter_mut().skip(3) {
                let t: f64 = rng.gen();
                *v = a + t * (b - a);
            }
            s
        })
        .collect()
}

fn skip_node(grid: &Grid, j: usize, delta: f64) -> bool {
    grid.is_boundary(j) || grid.distances()[j] == delta
}

fn eval_component(spec: &NonlinearitySpec, i: usize, x: f64, own: f64, other: f64) -> f64 {
    if i == 1 {
        spec.eval(1, x, own, other)
    } else {
        spec.eval(2, x, other, own)
    }
}

pub fn certify_sub_inequality(bs: &BarrierSet, spec: &NonlinearitySpec, params: &BarrierParams, seed: u64) -> CertificationReport {
    let mut rep = CertificationReport::new(format!("sub-solution inequalities ({})", spec.label));
    let grid = bs.grid();
    let x = grid.nodes();
    let d = grid.distances();
    for i in 1..=2 {
        let other = 3 - i;
        let samples = box_samples(bs.sub(other), bs.sup(other), seed.wrapping_add(i as u64));
        let mut w = Worst::default();
        for j in 0..grid.len() {
            if skip_node(grid, j, params.delta()) {
                continue;
            }
            let lhs = sub_strong_form(params, i, d[j]) - lambda_h(params, i, d[j]);
            let own = bs.sub(i).values[j];
            let rhs = samples[j]
                .iter()
                .map(|&t| eval_component(spec, i, x[j], own, t))
                .fold(f64::INFINITY, f64::min);
            w.push(j, rhs - lhs, local_tol(lhs, rhs));
        }
        rep.push(w.into_check(format!("sub{i}"), x));
    }
    rep
}

pub fn certify_super_inequality(
    bs: &BarrierSet,
    spec: &NonlinearitySpec,
    params: &BarrierParams,
    seed: u64,
) -> CertificationReport {
    let mut rep = CertificationReport::new(format!("super-solution inequalities ({})", spec.label));
    let grid = bs.grid();
    let x = grid.nodes();
    let d = grid.distances();
    let q = spec.q_max(&params.exps);
    for i in 1..=2 {
        let other = 3 - i;
        let z = &bs.z[i - 1];
        let dz = z.nodal_gradient();
        let samples = box_samples(bs.sub(other), bs.sup(other), seed.wrapping_add(10 + i as u64));
        let mut w = Worst::default();
        let mut env = Worst::default();
        let bound = params.envelope_constant(spec, i) * params.lambda().powf(spec.q(&params.exps, i));
        for j in 0..grid.len() {
            if skip_node(grid, j, params.delta()) {
                continue;
            }
            let lhs = super_strong_form(params, i, z.values[j], dz[j]);
            let own = bs.sup(i).values[j];
            let fmax = samples[j]
                .iter()
                .map(|&t| eval_component(spec, i, x[j], own, t))
                .fold(f64::NEG_INFINITY, f64::max);
            let rhs = fmax + lambda_h(params, i, d[j]);
            w.push(j, lhs - rhs, local_tol(lhs, rhs));
            env.push(j, bound - fmax, local_tol(bound, fmax));
        }
        rep.push(w.into_check(format!("super{i}"), x));
        if q < 1.0 {
            rep.push(env.into_check(format!("envelope{i}"), x));
        } else {
            rep.push(Check::skipped(format!("envelope{i}"), format!("growth exponent q = {q:.4} >= 1")));
        }
        rep.value(format!("C{i}"), params.c_i(i));
        rep.value(format!("C.envelope{i}"), bound);
    }
    rep
}

/// Nodal sign structure of a nodal barrier set.
pub fn certify_sign_structure(bs: &BarrierSet) -> CertificationReport {
    let mut rep = CertificationReport::new("barrier sign structure");
    let grid = bs.grid();
    let x = grid.nodes();
    let d = grid.distances();
    let inner = bs.params.inner_radius();
    let delta = bs.params.delta();
    for i in 1..=2 {
        let mut neg = Worst::default();
        let mut pos = Worst::default();
        for j in 0..grid.len() {
            if d[j] < inner {
                neg.push(j, -bs.sup(i).values[j], 0.0);
                if !(bs.sup(i).values[j] < 0.0) {
                    neg.ok = false;
                }
            }
            if d[j] > delta {
                pos.push(j, bs.sub(i).values[j], 0.0);
                if !(bs.sub(i).values[j] > 0.0) {
                    pos.ok = false;
                }
            }
        }
        rep.push(neg.into_check(format!("sup{i}<0 near boundary"), x));
        rep.push(pos.into_check(format!("sub{i}>0 in core"), x));
    }
    rep
}

/// Largest relative gap between the discrete and the classical `-Delta_p`
/// of the sub-solutions at nodes whose stencil stays `margin` away from the
/// interface and the boundary.
pub fn strong_form_crosscheck(bs: &BarrierSet, margin: f64) -> Result<f64> {
    let grid = bs.grid();
    let d = grid.distances();
    let delta = bs.params.delta();
    let mut worst = 0.0f64;
    for i in 1..=2 {
        let p = bs.params.exps.p(i);
        let disc = apply_plap(bs.sub(i), p, 0.0, BoundaryCondition::DirichletZero)?;
        for j in 1..grid.len() - 1 {
            let lo = d[j - 1].min(d[j]).min(d[j + 1]);
            let hi = d[j - 1].max(d[j]).max(d[j + 1]);
            if grid.is_boundary(j) || lo < margin || (lo - margin <= delta && delta <= hi + margin) {
                continue;
            }
            let a = sub_strong_form(&bs.params, i, d[j]);
            worst = worst.max((disc.values[j] - a).abs() / a.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok(worst)
}

/// Sampled bound `M_rho` of `|f|, |g|` over the barrier box.
pub fn box_bound(bs: &BarrierSet, spec: &NonlinearitySpec, seed: u64) -> f64 {
    let grid = bs.grid();
    let x = grid.nodes();
    let su = box_samples(&bs.u_sub, &bs.u_sup, seed);
    let sv = box_samples(&bs.v_sub, &bs.v_sup, seed.wrapping_add(1));
    let mut m = 0.0f64;
    for j in 0..grid.len() {
        for &s in &su[j] {
            for &t in &sv[j] {
                m = m.max(spec.eval(1, x[j], s, t).abs()).max(spec.eval(2, x[j], s, t).abs());
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Caps {
    pub lambda_max: f64,
    pub theta_max: f64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { lambda_max: 65536.0, theta_max: 64.0 }
    }
}

/// Torsion functions and their constants shared by every candidate.
#[derive(Debug, Clone)]
pub struct TorsionData {
    pub z: [GridFunction; 2],
    pub constants: [TorsionConstants; 2],
}

impl TorsionData {
    pub fn compute(exps: &Exponents, grid: &Arc<Grid>, cfg: &SolverConfig) -> Result<Self> {
        let z1 = torsion(exps.p1, grid, cfg)?;
        let z2 = torsion(exps.p2, grid, cfg)?;
        let constants = [extract_constants(&z1, exps.p1)?, extract_constants(&z2, exps.p2)?];
        Ok(TorsionData { z: [z1, z2], constants })
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub params: BarrierParams,
    pub barriers: BarrierSet,
    pub ordering: CertificationReport,
    pub sub: CertificationReport,
    pub sup: CertificationReport,
    /// Strip widths tried for the selected pair.
    pub delta_trials: usize,
}

/// Builds and certifies the barriers for one parameter triple.
pub fn evaluate_candidate(
    spec: &NonlinearitySpec,
    exps: &Exponents,
    data: &TorsionData,
    weight: SingularWeightParams,
    kind: BarrierKind,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Selection> {
    let grid = data.z[0].grid().clone();
    let d_star = grid.domain().max_distance();
    let z1d = perturbed_torsion(exps.p1, weight.lambda, weight.theta, weight.delta, &grid, cfg)?;
    let z2d = perturbed_torsion(exps.p2, weight.lambda, weight.theta, weight.delta, &grid, cfg)?;
    // provisional mu; the box bound needs the barriers first
    let provisional = BarrierParams::new(*exps, weight, 1.0, data.constants, d_star)?;
    let mut bs = match kind {
        BarrierKind::Nodal => build_nodal_barriers(&provisional, &data.z[0], &data.z[1], &z1d, &z2d)?,
        BarrierKind::Positive => build_positive_barriers(&provisional, &data.z[0], &data.z[1], &z1d, &z2d)?,
    };
    let mu = 1.0 + box_bound(&bs, spec, seed);
    let params = BarrierParams { mu, ..provisional };
    bs.params = params;
    let ordering = certify_ordering(&bs);
    let sub = certify_sub_inequality(&bs, spec, &params, seed);
    let sup = certify_super_inequality(&bs, spec, &params, seed);
    Ok(Selection { params, barriers: bs, ordering, sub, sup, delta_trials: 1 })
}

impl Selection {
    pub fn passed(&self) -> bool {
        self.ordering.passed() && self.sub.passed() && self.sup.passed()
    }

    fn failure(&self) -> String {
        for r in [&self.ordering, &self.sub, &self.sup] {
            if let Some(c) = r.first_failure() {
                return format!(
                    "lambda = {}, theta = {}, delta = {:e}: {} failed with margin {:e}",
                    self.params.lambda(),
                    self.params.theta(),
                    self.params.delta(),
                    c.id,
                    c.worst_margin
                );
            }
        }
        String::from("passed")
    }
}

/// `theta` ladder start `ceil(1 + max p') + 1`.
pub fn theta_start(exps: &Exponents) -> f64 {
    (1.0 + exps.max_conj()).ceil() + 1.0
}

/// Ladder of `(lambda, theta)` pairs in lexicographic order.
pub fn parameter_ladder(exps: &Exponents, caps: Caps) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut lam = 2.0;
    while lam <= caps.lambda_max {
        let mut th = theta_start(exps);
        while th <= caps.theta_max {
            out.push((lam, th));
            th *= 2.0;
        }
        lam *= 2.0;
    }
    out
}

/// Descending strip widths `delta_cap 2^{-k}`.
pub fn delta_ladder(delta_cap: f64, len: usize) -> Vec<f64> {
    (0..len).map(|k| delta_cap * 0.5f64.powi(k as i32)).collect()
}

/// Number of rungs of the strip-width ladder.
pub const DELTA_RUNGS: usize = 48;

/// Smallest passing strip width for a fixed `(lambda, theta)`.
fn search_delta(
    spec: &NonlinearitySpec,
    exps: &Exponents,
    data: &TorsionData,
    lambda: f64,
    theta: f64,
    kind: BarrierKind,
    cfg: &SolverConfig,
    seed: u64,
) -> std::result::Result<Selection, String> {
    let grid = data.z[0].grid();
    let l = TorsionConstants::combine(&data.constants[0], &data.constants[1]).l;
    let d_star = grid.domain().max_distance();
    // largest delta with l delta/(2 lambda) < min rho, with a factor 2 margin
    let cap = (lambda * spec.rho_min() / l).min(0.5 * d_star);
    let base = SingularWeightParams::new(exps, lambda, theta, cap).map_err(|e| e.to_string())?;
    let mut best: Option<Selection> = None;
    let mut last_failure = String::new();
    let mut trials = 0;
    for delta in delta_ladder(cap, DELTA_RUNGS) {
        if !delta_admissible(l, delta, lambda, spec.rho_min()) {
            continue;
        }
        trials += 1;
        let weight = base.with_delta(delta).map_err(|e| e.to_string())?;
        match evaluate_candidate(spec, exps, data, weight, kind, cfg, seed) {
            Ok(sel) if sel.passed() => best = Some(sel),
            Ok(sel) => {
                last_failure = sel.failure();
                if best.is_some() {
                    break;
                }
            }
            Err(e) => {
                last_failure = format!("lambda = {lambda}, theta = {theta}, delta = {delta:e}: {e}");
                if best.is_some() {
                    break;
                }
            }
        }
    }
    match best {
        Some(mut sel) => {
            sel.delta_trials = trials;
            Ok(sel)
        }
        None => Err(last_failure),
    }
}

/// Lexicographically smallest `(lambda, theta)` on the ladder whose barriers
/// pass ordering and both inequality certificates, with the smallest passing
/// strip width on a dyadic ladder.
pub fn select_parameters(
    spec: &NonlinearitySpec,
    exps: &Exponents,
    data: &TorsionData,
    caps: Caps,
    kind: BarrierKind,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Selection> {
    let ladder = parameter_ladder(exps, caps);
    if ladder.is_empty() {
        return Err(Error::Selection { last_failure: "empty parameter ladder".into() });
    }
    let chunk = rayon::current_num_threads().max(1);
    let mut last = String::new();
    for block in ladder.chunks(chunk) {
        let results: Vec<std::result::Result<Selection, String>> = block
            .par_iter()
            .map(|&(lam, th)| search_delta(spec, exps, data, lam, th, kind, cfg, seed))
            .collect();
        for r in results {
            match r {
                Ok(sel) => return Ok(sel),
                Err(e) => last = e,
            }
        }
    }
    Err(Error::Selection { last_failure: last })
}
