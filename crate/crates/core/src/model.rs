//! Exponents, the singular weights `h_i`, the nonlinearity catalog and the
//! sampled validators for the growth and behaviour hypotheses.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::domain::{weighted_load, Grid, GridFunction, Region};
use crate::error::{config, Result};
use crate::report::{CertificationReport, Check};

/// Conjugate exponent `p / (p - 1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub p1: f64,
    pub p2: f64,
    pub dim: usize,
}

impl Exponents {
    pub fn new(p1: f64, p2: f64, dim: usize) -> Result<Self> {
        for p in [p1, p2] {
            if !(p.is_finite() && p > 1.0) {
                return config(format!("exponent must exceed 1, got {p}"));
            }
        }
        Ok(Exponents { p1, p2, dim })
    }

    pub fn p(&self, i: usize) -> f64 {
        if i == 1 {
            self.p1
        } else {
            self.p2
        }
    }

    pub fn conj(&self, i: usize) -> f64 {
        conjugate(self.p(i))
    }

    pub fn max_conj(&self) -> f64 {
        self.conj(1).max(self.conj(2))
    }

    /// False when `1 < p_i < N` fails (always the case on the interval).
    pub fn within_standing_hypothesis(&self) -> bool {
        let n = self.dim as f64;
        self.p1 < n && self.p2 < n
    }
}

/// `lambda, theta, delta` and the derived `gamma_i`, `omega_i`.
///
/// `gamma_i + 1 = lambda^{-theta p_i} (p_i - 1)` and
/// `omega_i - 1 = lambda^{-theta p_i}` are stored directly since both are
/// tiny for realistic parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularWeightParams {
    pub lambda: f64,
    pub theta: f64,
    pub delta: f64,
    gamma_plus_one: [f64; 2],
    omega_minus_one: [f64; 2],
}

impl SingularWeightParams {
    pub fn new(exps: &Exponents, lambda: f64, theta: f64, delta: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 1.0) {
            return config(format!("lambda must exceed 1, got {lambda}"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return config(format!("delta must be positive, got {delta}"));
        }
        for i in 1..=2 {
            if !(theta > 1.0 + exps.conj(i)) {
                return config(format!(
                    "theta = {theta} must exceed 1 + p{i}' = {}",
                    1.0 + exps.conj(i)
                ));
            }
        }
        let mut gamma_plus_one = [0.0; 2];
        let mut omega_minus_one = [0.0; 2];
        for i in 1..=2 {
            let p = exps.p(i);
            let om = (-theta * p * lambda.ln()).exp();
            let gp = om * (p - 1.0);
            if !(gp > 0.0) || !(lambda.powf(theta * p)).is_finite() {
                return config(format!(
                    "lambda^(theta p{i}) leaves the floating point range (lambda = {lambda}, theta = {theta})"
                ));
            }
            if !(gp < 1.0) {
                return config(format!("gamma{i} = {} is not negative", gp - 1.0));
            }
            gamma_plus_one[i - 1] = gp;
            omega_minus_one[i - 1] = om;
        }
        Ok(SingularWeightParams { lambda, theta, delta, gamma_plus_one, omega_minus_one })
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return config(format!("delta must be positive, got {delta}"));
        }
        Ok(SingularWeightParams { delta, ..*self })
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.gamma_plus_one[i - 1] - 1.0
    }

    pub fn gamma_plus_one(&self, i: usize) -> f64 {
        self.gamma_plus_one[i - 1]
    }

    pub fn omega(&self, i: usize) -> f64 {
        1.0 + self.omega_minus_one[i - 1]
    }

    pub fn omega_minus_one(&self, i: usize) -> f64 {
        self.omega_minus_one[i - 1]
    }

    /// `lambda^{theta p_i}`.
    pub fn strip_amplitude(&self, exps: &Exponents, i: usize) -> f64 {
        self.lambda.powf(self.theta * exps.p(i))
    }
}

/// Pointwise `d^gamma` from `gamma + 1`.
pub fn weight_power(d: f64, gamma_plus_one: f64) -> f64 {
    (gamma_plus_one * d.ln()).exp() / d
}

/// Nodal `h_i = sgn(d - delta) d^{gamma_i}`; boundary nodes carry `-inf`.
pub fn weight_h(params: &SingularWeightParams, i: usize, grid: &Arc<Grid>) -> Result<GridFunction> {
    if !(i == 1 || i == 2) {
        return config(format!("component index must be 1 or 2, got {i}"));
    }
    let gp = params.gamma_plus_one(i);
    if !(gp > 0.0 && gp < 1.0) {
        return config(format!("gamma{i} outside (-1, 0)"));
    }
    let values = grid.distances().iter().map(|&d| h_value(d, params.delta, gp)).collect();
    GridFunction::new(grid.clone(), values)
}

fn h_value(d: f64, delta: f64, gp: f64) -> f64 {
    if d <= 0.0 {
        f64::NEG_INFINITY
    } else if d == delta {
        0.0
    } else if d < delta {
        -weight_power(d, gp)
    } else {
        weight_power(d, gp)
    }
}

/// Weak load `int h_i phi_j dmu`, exact in the singular weight.
pub fn weight_h_load(params: &SingularWeightParams, i: usize, grid: &Grid) -> Result<Vec<f64>> {
    let gp = params.gamma_plus_one(i);
    let core = weighted_load(grid, gp, Region::Core(params.delta))?;
    let strip = weighted_load(grid, gp, Region::Strip(params.delta))?;
    Ok(core.iter().zip(&strip).map(|(a, b)| a - b).collect())
}

pub type Field = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Growth constants of the form `|f| <= M (1 + |s|^alpha)(1 + |t|^beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub alpha: f64,
    pub beta: f64,
    pub m: f64,
}

/// Behaviour near zero: `inf f(x, s, t) > -m` for small `|s|`, `t >= -rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Behaviour {
    pub m: f64,
    pub rho: f64,
}

#[derive(Clone)]
pub struct NonlinearitySpec {
    pub label: String,
    pub f: Field,
    pub g: Field,
    pub growth: [Growth; 2],
    pub behaviour: [Behaviour; 2],
    /// False for entries that deliberately violate the hypotheses.
    pub theorem_compliant: bool,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("label", &self.label)
            .field("growth", &self.growth)
            .field("behaviour", &self.behaviour)
            .field("theorem_compliant", &self.theorem_compliant)
            .finish()
    }
}

impl NonlinearitySpec {
    /// `q_i = alpha_i p1' + beta_i p2'`.
    pub fn q(&self, exps: &Exponents, i: usize) -> f64 {
        let g = self.growth[i - 1];
        g.alpha * exps.conj(1) + g.beta * exps.conj(2)
    }

    pub fn q_max(&self, exps: &Exponents) -> f64 {
        self.q(exps, 1).max(self.q(exps, 2))
    }

    pub fn eval(&self, i: usize, x: f64, s: f64, t: f64) -> f64 {
        if i == 1 {
            (self.f)(x, s, t)
        } else {
            (self.g)(x, s, t)
        }
    }

    pub fn rho_min(&self) -> f64 {
        self.behaviour[0].rho.min(self.behaviour[1].rho)
    }
}

pub fn builtin_nonlinearities() -> Vec<NonlinearitySpec> {
    let unit_growth = Growth { alpha: 0.0, beta: 0.0, m: 1.0 };
    let unit_behaviour = Behaviour { m: 1.0, rho: 1.0 };
    let power_growth = Growth { alpha: 0.2, beta: 0.2, m: 1.0 };
    let src = PI * PI + 1.0;
    vec![
        NonlinearitySpec {
            label: "zero".into(),
            f: Arc::new(|_, _, _| 0.0),
            g: Arc::new(|_, _, _| 0.0),
            growth: [unit_growth; 2],
            behaviour: [unit_behaviour; 2],
            theorem_compliant: true,
        },
        NonlinearitySpec {
            label: "trig".into(),
            f: Arc::new(|_, s: f64, t: f64| s.sin() * t.cos()),
            g: Arc::new(|_, s: f64, t: f64| s.cos() * t.sin()),
            growth: [Growth { m: 2.0, ..unit_growth }; 2],
            behaviour: [unit_behaviour; 2],
            theorem_compliant: true,
        },
        NonlinearitySpec {
            label: "power".into(),
            f: Arc::new(|_, s: f64, t: f64| s.abs().powf(0.2) * t.abs().powf(0.2)),
            g: Arc::new(|_, s: f64, t: f64| s.abs().powf(0.2) * t.abs().powf(0.2)),
            growth: [power_growth; 2],
            behaviour: [unit_behaviour; 2],
            theorem_compliant: true,
        },
        NonlinearitySpec {
            label: "manufactured".into(),
            f: Arc::new(move |x: f64, s: f64, _| src * (PI * x).cos() - s),
            g: Arc::new(move |x: f64, _, t: f64| src * (PI * x).cos() - t),
            growth: [
                Growth { alpha: 1.0, beta: 0.0, m: src },
                Growth { alpha: 0.0, beta: 1.0, m: src },
            ],
            behaviour: [Behaviour { m: src + 1.0, rho: 1.0 }; 2],
            theorem_compliant: false,
        },
    ]
}

pub fn lookup_nonlinearity(label: &str) -> Result<NonlinearitySpec> {
    builtin_nonlinearities()
        .into_iter()
        .find(|s| s.label == label)
        .map_or_else(|| config(format!("unknown nonlinearity '{label}'")), Ok)
}

/// Sampling ranges for the growth check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub s: (f64, f64),
    pub t: (f64, f64),
}

fn lattice(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

fn sample_x(grid: &Grid, n: usize) -> Vec<f64> {
    let x = grid.nodes();
    let stride = (x.len() / n.max(1)).max(1);
    let mut v: Vec<f64> = x.iter().step_by(stride).cloned().collect();
    if v.last() != x.last() {
        v.push(*x.last().unwrap());
    }
    v
}

pub fn validate_h1(
    spec: &NonlinearitySpec,
    exps: &Exponents,
    grid: &Grid,
    sample: SampleBox,
    n_samples: usize,
) -> CertificationReport {
    let mut rep = CertificationReport::new(format!("growth ({})", spec.label));
    let xs = sample_x(grid, n_samples);
    for i in 1..=2 {
        let q = spec.q(exps, i);
        rep.value(format!("q{i}"), q);
        rep.push(Check::new(format!("growth.q{i}<1"), q < 1.0, 1.0 - q));
        let gr = spec.growth[i - 1];
        let mut worst = 0.0f64;
        let mut arg = (0.0, 0.0, 0.0);
        for &x in &xs {
            for s in lattice(sample.s.0, sample.s.1, n_samples) {
                for t in lattice(sample.t.0, sample.t.1, n_samples) {
                    let env = gr.m * (1.0 + s.abs().powf(gr.alpha)) * (1.0 + t.abs().powf(gr.beta));
                    let ratio = spec.eval(i, x, s, t).abs() / env;
                    if !(ratio <= worst) {
                        worst = ratio;
                        arg = (x, s, t);
                    }
                }
            }
        }
        rep.value(format!("growth{i}.worst_ratio"), worst);
        let mut c = Check::new(format!("growth.envelope{i}"), worst <= 1.0 + 1e-12, 1.0 - worst)
            .with_note(format!("worst at s={:.4e} t={:.4e}", arg.1, arg.2));
        c.coordinate = Some(arg.0);
        rep.push(c);
    }
    rep
}

/// Probe radii used to approximate the `lim inf` as `|s| -> 0`.
pub fn default_eta_probe() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-k)).collect()
}

pub fn validate_h2(
    spec: &NonlinearitySpec,
    grid: &Grid,
    eta_probe: &[f64],
    caps: [f64; 2],
    n_samples: usize,
) -> CertificationReport {
    let mut rep = CertificationReport::new(format!("behaviour ({})", spec.label));
    let xs = sample_x(grid, n_samples);
    for i in 1..=2 {
        let b = spec.behaviour[i - 1];
        // the other argument ranges over [-rho_i, cap]
        let other_hi = caps[i - 1].max(-b.rho);
        let mut infs = Vec::with_capacity(eta_probe.len());
        for &eta in eta_probe {
            let mut inf = f64::INFINITY;
            for &x in &xs {
                for small in lattice(-eta, eta, n_samples) {
                    for other in lattice(-b.rho, other_hi, n_samples) {
                        let v = if i == 1 { spec.eval(1, x, small, other) } else { spec.eval(2, x, other, small) };
                        inf = inf.min(v);
                    }
                }
            }
            infs.push(inf);
        }
        let tail = &infs[infs.len().saturating_sub(3)..];
        let worst = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        if let Some(last) = infs.last() {
            rep.value(format!("behaviour{i}.inf"), *last);
        }
        rep.push(
            Check::new(format!("behaviour{i}"), worst > -b.m, worst + b.m)
                .with_note(format!("sampled inf over the last {} probes", tail.len())),
        );
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainDesc};

    fn grid() -> Arc<Grid> {
        build_grid(DomainDesc::Interval { a: 0.0, b: 1.0 }, 33, 1.0).unwrap()
    }

    fn wide() -> SampleBox {
        SampleBox { s: (-5.0, 5.0), t: (-5.0, 5.0) }
    }

    #[test]
    fn gamma_from_parameters() {
        let e = Exponents::new(2.0, 2.0, 1).unwrap();
        let w = SingularWeightParams::new(&e, 2.0, 4.0, 0.1).unwrap();
        assert_eq!(w.gamma(1), -255.0 / 256.0);
        assert_eq!(w.omega(1), 1.0 + 1.0 / 256.0);
        assert!(SingularWeightParams::new(&e, 2.0, 3.0, 0.1).is_err());
    }

    #[test]
    fn extreme_parameters_are_rejected() {
        let e = Exponents::new(2.2, 2.8, 3).unwrap();
        assert!(SingularWeightParams::new(&e, 65536.0, 64.0, 0.1).is_err());
    }

    #[test]
    fn h_values() {
        let e = Exponents::new(2.0, 2.0, 1).unwrap();
        let w = SingularWeightParams::new(&e, 2.0, 4.0, 0.25).unwrap();
        assert_eq!(h_value(0.25, 0.25, 0.5), 0.0);
        assert!((h_value(0.04, 0.25, 0.5) + 5.0).abs() < 1e-13);
        assert!((h_value(1.0, 0.25, 0.5) - 1.0).abs() < 1e-15);
        let h = weight_h(&w, 1, &grid()).unwrap();
        assert_eq!(h.values[0], f64::NEG_INFINITY);
        assert!(h.values[16] > 0.0);
        assert!(h.values[2] < 0.0);
    }

    #[test]
    fn h_load_integrates_the_weight() {
        let e = Exponents::new(2.0, 2.0, 1).unwrap();
        let w = SingularWeightParams::new(&e, 1.5, 4.0, 0.25).unwrap();
        let g = grid();
        let load = weight_h_load(&w, 1, &g).unwrap();
        let gp = w.gamma_plus_one(1);
        let exact = 2.0 * (0.5f64.powf(gp) - 2.0 * 0.25f64.powf(gp)) / gp;
        let total: f64 = load.iter().sum();
        assert!((total - exact).abs() <= 1e-9 * exact.abs());
    }

    #[test]
    fn catalog_constants() {
        let e = Exponents::new(2.0, 2.0, 1).unwrap();
        let g = grid();
        let zero = lookup_nonlinearity("zero").unwrap();
        assert_eq!(zero.q(&e, 1), 0.0);
        assert!(validate_h1(&zero, &e, &g, wide(), 9).passed());
        assert!(validate_h2(&zero, &g, &default_eta_probe(), [10.0; 2], 9).passed());
        let trig = lookup_nonlinearity("trig").unwrap();
        assert_eq!(trig.q_max(&e), 0.0);
        assert!(validate_h1(&trig, &e, &g, wide(), 9).passed());
        assert!(validate_h2(&trig, &g, &default_eta_probe(), [10.0; 2], 9).passed());
        let man = lookup_nonlinearity("manufactured").unwrap();
        assert!(!man.theorem_compliant);
        assert!(!validate_h1(&man, &e, &g, wide(), 9).passed());
        assert!(lookup_nonlinearity("nope").is_err());
    }

    #[test]
    fn growth_exponent_arithmetic() {
        let e = Exponents::new(2.0, 2.0, 3).unwrap();
        let mut s = lookup_nonlinearity("power").unwrap();
        s.growth[0] = Growth { alpha: 0.1, beta: 0.1, m: 1.0 };
        assert!((s.q(&e, 1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constant_below_minus_m_fails_behaviour() {
        let mut s = lookup_nonlinearity("zero").unwrap();
        s.f = Arc::new(|_, _, _| -2.0);
        let rep = validate_h2(&s, &grid(), &default_eta_probe(), [1.0; 2], 5);
        assert!(!rep.get("behaviour1").unwrap().pass);
        assert!(rep.get("behaviour2").unwrap().pass);
    }

    #[test]
    fn conjugate_identity() {
        for &p in &[1.1, 1.5, 2.0, 2.8, 7.0] {
            let q = conjugate(p);
            assert!((p * q - (p + q)).abs() <= 1e-14 * p * q);
        }
    }
}
