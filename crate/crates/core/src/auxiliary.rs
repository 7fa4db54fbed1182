//! Torsion functions, their strip-perturbed variants, the comparison
//! constants with the distance function, and the first-lemma certificates.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::domain::{weighted_load, Grid, GridFunction, Region};
use crate::error::{config, Error, Result};
use crate::plap::{boundary_flux, solve_scalar_with, BoundaryCondition, Load, SolverConfig};
use crate::report::{CertificationReport, Check, Worst};

/// Solves `-Delta_p z = 1`, `z = 0` on the boundary.
pub fn torsion(p: f64, grid: &Arc<Grid>, cfg: &SolverConfig) -> Result<GridFunction> {
    let load = Load::fixed(grid.weights().to_vec());
    let u0 = GridFunction::constant(grid, 0.0);
    Ok(solve_scalar_with(&load, p, BoundaryCondition::DirichletZero, cfg, &u0)?.u)
}

/// `gamma + 1 = lambda^{-theta p} (p - 1)` after the range checks.
pub fn strip_gamma_plus_one(p: f64, lambda: f64, theta: f64) -> Result<f64> {
    if !(p > 1.0) {
        return config(format!("exponent p must exceed 1, got {p}"));
    }
    let gp = (-theta * p * lambda.ln()).exp() * (p - 1.0);
    if !(gp > 0.0 && gp < 1.0) || !lambda.powf(theta * p).is_finite() {
        return config(format!(
            "gamma = lambda^(-theta p)(p-1) - 1 outside (-1, 0) for lambda = {lambda}, theta = {theta}, p = {p}"
        ));
    }
    Ok(gp)
}

/// Solves `-Delta_p z = 1` off the strip and `-lambda^{theta p} d^gamma` on
/// `{d < delta}`, `z = 0` on the boundary.
pub fn perturbed_torsion(
    p: f64,
    lambda: f64,
    theta: f64,
    delta: f64,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GridFunction> {
    let gp = strip_gamma_plus_one(p, lambda, theta)?;
    let dmax = grid.domain().max_distance();
    if !(delta > 0.0 && delta <= dmax) {
        return config(format!("strip width {delta} outside (0, {dmax}]"));
    }
    let amp = lambda.powf(theta * p);
    let core = weighted_load(grid, 1.0, Region::Core(delta))?;
    let strip = weighted_load(grid, gp, Region::Strip(delta))?;
    let fixed = core.iter().zip(&strip).map(|(c, s)| c - amp * s).collect();
    let u0 = GridFunction::constant(grid, 0.0);
    Ok(solve_scalar_with(&Load::fixed(fixed), p, BoundaryCondition::DirichletZero, cfg, &u0)?.u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsionConstants {
    /// Bound on `|z'|`.
    pub l_hat: f64,
    /// `l d <= z`.
    pub l: f64,
    /// `z <= L d`.
    pub big_l: f64,
}

impl TorsionConstants {
    /// Constants valid for two torsion functions simultaneously.
    pub fn combine(a: &TorsionConstants, b: &TorsionConstants) -> TorsionConstants {
        TorsionConstants {
            l_hat: a.l_hat.max(b.l_hat),
            l: a.l.min(b.l),
            big_l: a.big_l.max(b.big_l),
        }
    }
}

/// Ratios `z / d`, with the one-sided limit `-dz/deta` at boundary nodes.
pub fn distance_ratio(z: &GridFunction, p: f64) -> Vec<f64> {
    let grid = z.grid();
    let d = grid.distances();
    let mut ratio: Vec<f64> = z.values.iter().zip(d).map(|(v, d)| if *d > 0.0 { v / d } else { 0.0 }).collect();
    for b in boundary_flux(z, p) {
        ratio[b.node] = -b.normal_derivative;
    }
    ratio
}

pub fn extract_constants(z: &GridFunction, p: f64) -> Result<TorsionConstants> {
    let grid = z.grid();
    for j in 0..grid.len() {
        if !grid.is_boundary(j) && !(z.values[j] > 0.0) {
            return Err(Error::Positivity { node: j, value: z.values[j] });
        }
    }
    let mut l_hat = z.cell_gradients().iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for b in boundary_flux(z, p) {
        l_hat = l_hat.max(b.normal_derivative.abs());
    }
    let ratio = distance_ratio(z, p);
    let l = ratio.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = ratio.iter().cloned().fold(0.0f64, f64::max);
    if !(l > 0.0) {
        let j = ratio.iter().position(|r| !(*r > 0.0)).unwrap_or(0);
        return Err(Error::Positivity { node: j, value: ratio[j] });
    }
    Ok(TorsionConstants { l_hat, l, big_l: l_hat.max(max_ratio) })
}

/// Nodal certificate of `l d <= z <= L d`, `|z'| <= L_hat` and `dz/deta < 0`.
pub fn certify_constants(z: &GridFunction, p: f64, c: &TorsionConstants) -> CertificationReport {
    let mut rep = CertificationReport::new(format!("torsion constants (p = {p})"));
    let grid = z.grid();
    let x = grid.nodes();
    let d = grid.distances();
    let scale = 1e-12 * z.max_abs();
    rep.value("l", c.l);
    rep.value("L", c.big_l);
    rep.value("L_hat", c.l_hat);
    rep.push(Check::new("l>0", c.l > 0.0, c.l));
    let mut lower = Worst::default();
    let mut upper = Worst::default();
    for j in 0..grid.len() {
        lower.push(j, z.values[j] - c.l * d[j], scale);
        upper.push(j, c.big_l * d[j] - z.values[j], scale);
    }
    rep.push(lower.into_check("l*d<=z", x));
    rep.push(upper.into_check("z<=L*d", x));
    let mut grad = Worst::default();
    for (k, g) in z.cell_gradients().iter().enumerate() {
        grad.push(k, c.l_hat - g.abs(), 1e-12 * c.l_hat);
    }
    rep.push(grad.into_check("|z'|<=L_hat", x));
    let mut normal = Worst::default();
    for b in boundary_flux(z, p) {
        normal.push(b.node, -b.normal_derivative, 0.0);
        if !(b.normal_derivative < 0.0) {
            normal.ok = false;
        }
    }
    rep.push(normal.into_check("dz/deta<0", x));
    rep
}

#[derive(Debug, Clone)]
pub struct TorsionPair {
    pub z: GridFunction,
    pub z_delta: GridFunction,
    pub p: f64,
    pub lambda: f64,
    pub theta: f64,
    pub delta: f64,
    pub gamma_plus_one: f64,
    pub constants: TorsionConstants,
}

impl TorsionPair {
    pub fn compute(p: f64, lambda: f64, theta: f64, delta: f64, grid: &Arc<Grid>, cfg: &SolverConfig) -> Result<Self> {
        let z = torsion(p, grid, cfg)?;
        Self::with_torsion(z, p, lambda, theta, delta, cfg)
    }

    /// Reuses an already computed torsion function.
    pub fn with_torsion(z: GridFunction, p: f64, lambda: f64, theta: f64, delta: f64, cfg: &SolverConfig) -> Result<Self> {
        let grid = z.grid().clone();
        let constants = extract_constants(&z, p)?;
        let z_delta = perturbed_torsion(p, lambda, theta, delta, &grid, cfg)?;
        Ok(TorsionPair {
            z,
            z_delta,
            p,
            lambda,
            theta,
            delta,
            gamma_plus_one: strip_gamma_plus_one(p, lambda, theta)?,
            constants,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_plus_one - 1.0
    }

    pub fn to_tsv(&self) -> String {
        let grid = self.z.grid();
        let ratio = distance_ratio(&self.z, self.p);
        let mut s = String::from("node\td\tz\tz_delta\tz_over_d\tz_delta_over_z\n");
        for j in 0..grid.len() {
            let q = if self.z.values[j] != 0.0 { self.z_delta.values[j] / self.z.values[j] } else { f64::NAN };
            let _ = writeln!(
                s,
                "{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}",
                j,
                grid.distances()[j],
                self.z.values[j],
                self.z_delta.values[j],
                ratio[j],
                q
            );
        }
        s
    }
}

/// Checks `dz_delta/deta < dz/deta / 2 < 0` on the boundary and
/// `z_delta >= z / 2` at every node.
pub fn check_l3_first(tp: &TorsionPair) -> CertificationReport {
    check_first_lemma(&tp.z, &tp.z_delta, tp.p)
}

pub fn check_first_lemma(z: &GridFunction, z_delta: &GridFunction, p: f64) -> CertificationReport {
    let mut rep = CertificationReport::new("first comparison lemma");
    let grid = z.grid();
    let x = grid.nodes();
    let fz = boundary_flux(z, p);
    let fzd = boundary_flux(z_delta, p);
    let mut j1 = Worst::default();
    for (a, b) in fz.iter().zip(&fzd) {
        let half = 0.5 * a.normal_derivative;
        // strict inequalities: both margins must be positive
        let margin = (half - b.normal_derivative).min(-half);
        j1.push(a.node, margin, 0.0);
        if !(margin > 0.0) {
            j1.ok = false;
        }
    }
    rep.push(j1.into_check("j1.flux", x));
    let zmax = z.max_abs();
    let tol_abs = 1e-8 * zmax;
    let mut j2 = Worst::default();
    for j in 0..grid.len() {
        j2.push(j, z_delta.values[j] - 0.5 * z.values[j], tol_abs);
    }
    rep.push(j2.into_check("j2.half", x));
    rep
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaThreshold {
    /// Largest strip width found for which the lemma certifies.
    pub delta0: f64,
    /// Smallest width tried that fails, if any.
    pub failing: Option<f64>,
    pub evaluations: usize,
}

/// Bisection in `log delta` with the first-lemma certificate as predicate.
pub fn find_delta0(
    p: f64,
    lambda: f64,
    theta: f64,
    z: &GridFunction,
    cfg: &SolverConfig,
) -> Result<DeltaThreshold> {
    let grid = z.grid().clone();
    let mut evaluations = 0;
    let mut passes = |delta: f64| -> Result<bool> {
        evaluations += 1;
        let zd = perturbed_torsion(p, lambda, theta, delta, &grid, cfg)?;
        Ok(check_first_lemma(z, &zd, p).passed())
    };
    let hi0 = grid.domain().max_distance();
    if passes(hi0)? {
        return Ok(DeltaThreshold { delta0: hi0, failing: None, evaluations: 1 });
    }
    let mut hi = hi0;
    let mut lo = hi0;
    let mut found = false;
    for _ in 0..1100 {
        lo *= 0.5;
        if lo < 1e-300 {
            break;
        }
        if passes(lo)? {
            found = true;
            break;
        }
        hi = lo;
    }
    if !found {
        return Err(Error::Selection { last_failure: "no strip width certifies the first lemma".into() });
    }
    for _ in 0..40 {
        if hi / lo < 1.0 + 1e-3 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DeltaThreshold { delta0: lo, failing: Some(hi), evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderQuotient {
    pub seminorm_estimate: f64,
    pub c1tau_norm: f64,
    pub ratio: f64,
}

/// Grid-sampled comparison of `[u/d]_{tau/(tau+1)}` with `|u|_{C^{1,tau}}`.
pub fn holder_quotient(u: &GridFunction, tau: f64) -> Result<HolderQuotient> {
    if !(tau > 0.0 && tau < 1.0) {
        return config(format!("Holder exponent must lie in (0, 1), got {tau}"));
    }
    let grid = u.grid();
    let umax = u.max_abs();
    for b in grid.boundary() {
        if u.values[b.node].abs() > 1e-14 * umax.max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition(format!(
                "function does not vanish at boundary node {}",
                b.node
            )));
        }
    }
    let x = grid.nodes();
    let q = distance_ratio(u, 2.0);
    let du = u.nodal_gradient();
    let reach = grid.domain().max_distance();
    let a = tau / (tau + 1.0);
    let n = x.len();
    let mut semi_q = 0.0f64;
    let mut semi_du = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let h = x[j] - x[i];
            if h >= reach {
                break;
            }
            semi_q = semi_q.max((q[j] - q[i]).abs() / h.powf(a));
            semi_du = semi_du.max((du[j] - du[i]).abs() / h.powf(tau));
        }
    }
    let dmax = du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm = umax + dmax + semi_du;
    Ok(HolderQuotient {
        seminorm_estimate: semi_q,
        c1tau_norm: norm,
        ratio: if norm > 0.0 { semi_q / norm } else { 0.0 },
    })
}
