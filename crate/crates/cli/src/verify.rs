//! Invariant suites of every module, aggregated by `verify-all`.

use nodal_core::auxiliary::{
    certify_constants, extract_constants, holder_quotient, perturbed_torsion, torsion,
};
use nodal_core::domain::{build_grid, integrate_weighted, DomainDesc, GridFunction, Region};
use nodal_core::model::{builtin_nonlinearities, default_eta_probe, validate_h1, validate_h2, SampleBox};
use nodal_core::plap::{plap_weak, SolverConfig};
use nodal_core::report::{CertificationReport, Check};
use nodal_core::system::{penalty_value, truncate};
use nodal_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

const OPERATOR_PAIRS: usize = 100;

/// Closed-form torsion function of the ball of radius `r0` in `R^n`.
pub fn radial_torsion(p: f64, n: usize, r0: f64, r: f64) -> f64 {
    let q = p / (p - 1.0);
    (r0.powf(q) - r.powf(q)) / (q * (n as f64).powf(1.0 / (p - 1.0)))
}

pub fn verify_all(cfg: &RunConfig) -> Result<Vec<CertificationReport>> {
    let solver = cfg.solver();
    Ok(vec![
        operator_suite(cfg)?,
        torsion_suite(cfg, &solver)?,
        quadrature_suite(cfg)?,
        constants_suite(cfg, &solver)?,
        perturbation_suite(cfg, &solver)?,
        truncation_suite(cfg)?,
        holder_suite(cfg, &solver)?,
        hypotheses_suite(cfg)?,
    ])
}

fn operator_suite(cfg: &RunConfig) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new("operator properties");
    let grid = build_grid(cfg.domain_desc(), cfg.n, cfg.grading)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for p in [1.5, 2.0, 3.0] {
        let k = plap_weak(&GridFunction::constant(&grid, 3.7), p, 0.0)?;
        let worst = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rep.push(Check::new(format!("kernel p={p}"), worst == 0.0, -worst));

        let u = GridFunction::from_fn(&grid, |x| (3.0 * x).sin() + x * x);
        let ku = plap_weak(&u, p, 0.0)?;
        let scale = ku.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for t in [-2.0, 0.5, 3.0] {
            let kt = plap_weak(&u.scaled(t), p, 0.0)?;
            let f = t.abs().powf(p - 2.0) * t;
            for (a, b) in kt.iter().zip(&ku) {
                worst = worst.max((a - f * b).abs() / (f.abs() * scale));
            }
        }
        rep.push(Check::new(format!("homogeneity p={p}"), worst <= 1e-10, 1e-10 - worst));

        let mut min = f64::INFINITY;
        for _ in 0..OPERATOR_PAIRS {
            let a: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ga = GridFunction::new(grid.clone(), a)?;
            let gb = GridFunction::new(grid.clone(), b)?;
            let (ka, kb) = (plap_weak(&ga, p, 0.0)?, plap_weak(&gb, p, 0.0)?);
            let s: f64 = (0..grid.len()).map(|j| (ka[j] - kb[j]) * (ga.values[j] - gb.values[j])).sum();
            min = min.min(s);
        }
        rep.push(Check::new(format!("monotone p={p}"), min >= -1e-12, min + 1e-12));
    }
    Ok(rep)
}

fn torsion_suite(cfg: &RunConfig, solver: &SolverConfig) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new("torsion oracles");
    let g = build_grid(DomainDesc::Interval { a: 0.0, b: 1.0 }, cfg.n, cfg.grading)?;
    let z = torsion(2.0, &g, solver)?;
    let exact = GridFunction::from_fn(&g, |x| 0.5 * x * (1.0 - x));
    let err = z.max_abs_diff(&exact)?;
    rep.push(Check::new("interval p=2", err <= 1e-9, 1e-9 - err));
    rep.value("max_z.interval", z.max_abs());
    let g = build_grid(DomainDesc::RadialBall { radius: 1.0, dim: 3 }, cfg.n, cfg.grading)?;
    for p in [1.5, 2.0, 2.5] {
        let z = torsion(p, &g, solver)?;
        let exact = GridFunction::from_fn(&g, |r| radial_torsion(p, 3, 1.0, r));
        let err = z.max_abs_diff(&exact)?;
        rep.push(Check::new(format!("ball p={p}"), err <= 1e-4, 1e-4 - err));
    }
    Ok(rep)
}

fn quadrature_suite(cfg: &RunConfig) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new("singular quadrature");
    let g = build_grid(DomainDesc::Interval { a: 0.0, b: 1.0 }, cfg.n, cfg.grading)?;
    let one = GridFunction::constant(&g, 1.0);
    let delta: f64 = 0.1;
    for beta in [-0.9, -0.5, -0.1] {
        // both end points carry a strip
        let exact = 2.0 * delta.powf(beta + 1.0) / (beta + 1.0);
        let got = integrate_weighted(&g, beta, &one, Region::Strip(delta))?;
        let rel = (got - exact).abs() / exact;
        rep.push(Check::new(format!("beta={beta}"), rel <= 1e-6, 1e-6 - rel));
    }
    Ok(rep)
}

fn constants_suite(cfg: &RunConfig, solver: &SolverConfig) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new("torsion constants");
    for desc in [DomainDesc::Interval { a: 0.0, b: 1.0 }, DomainDesc::RadialBall { radius: 1.0, dim: 3 }] {
        let g = build_grid(desc, cfg.n, cfg.grading)?;
        for p in [1.5, 2.0, 3.0] {
            let z = torsion(p, &g, solver)?;
            let c = extract_constants(&z, p)?;
            let r = certify_constants(&z, p, &c);
            let tag = if matches!(desc, DomainDesc::Interval { .. }) { "interval" } else { "ball" };
            for mut ch in r.checks {
                ch.id = format!("{tag} p={p} {}", ch.id);
                rep.push(ch);
            }
        }
    }
    Ok(rep)
}

fn perturbation_suite(cfg: &RunConfig, solver: &SolverConfig) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new("perturbed torsion convergence");
    let g = build_grid(DomainDesc::Interval { a: 0.0, b: 1.0 }, cfg.n, cfg.grading)?;
    let (p, lambda, theta) = (2.0, 2.0, 4.0);
    let z = torsion(p, &g, solver)?;
    let mut prev = f64::INFINITY;
    for delta in [0.1, 0.05, 0.025, 0.0125] {
        let zd = perturbed_torsion(p, lambda, theta, delta, &g, solver)?;
        let dist = zd.max_abs_diff(&z)?;
        rep.value(format!("dist(delta={delta})"), dist);
        rep.push(Check::new(format!("decrease at delta={delta}"), dist < prev, prev - dist));
        prev = dist;
    }
    Ok(rep)
}

fn truncation_suite(cfg: &RunConfig) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new("truncation and penalty");
    let g = build_grid(cfg.domain_desc(), cfg.n, cfg.grading)?;
    let lo = GridFunction::from_fn(&g, |x| -1.0 - x);
    let hi = GridFunction::from_fn(&g, |x| 1.0 + x);
    let inside = GridFunction::from_fn(&g, |x| 0.5 * x);
    rep.push(Check::new("identity in box", truncate(&inside, &lo, &hi)? == inside, 0.0));
    let below = lo.map(|v| v - 1.0);
    rep.push(Check::new("clamp below", truncate(&below, &lo, &hi)? == lo, 0.0));
    let zero = inside.values.iter().all(|&s| penalty_value(s, -1.0, 1.0, 2.5) == 0.0);
    rep.push(Check::new("penalty vanishes in box", zero, 0.0));
    let signs = penalty_value(2.0, -1.0, 1.0, 3.0) == 1.0 && penalty_value(-3.0, -1.0, 1.0, 3.0) == -4.0;
    rep.push(Check::new("penalty values", signs, 0.0));
    Ok(rep)
}

fn holder_suite(cfg: &RunConfig, solver: &SolverConfig) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new("distance quotient");
    let g = build_grid(cfg.domain_desc(), cfg.n, cfg.grading)?;
    for p in [1.5, 2.0, 3.0] {
        let z = torsion(p, &g, solver)?;
        let h = holder_quotient(&z, cfg.tau)?;
        rep.value(format!("ratio p={p}"), h.ratio);
        rep.push(Check::new(format!("finite p={p}"), h.ratio.is_finite(), h.ratio));
    }
    Ok(rep)
}

fn hypotheses_suite(cfg: &RunConfig) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new("hypotheses of the builtin nonlinearities");
    let g = build_grid(cfg.domain_desc(), cfg.n, cfg.grading)?;
    let exps = cfg.exponents()?;
    let sample = SampleBox { s: (-10.0, 10.0), t: (-10.0, 10.0) };
    for spec in builtin_nonlinearities().into_iter().filter(|s| s.theorem_compliant) {
        let mut r = validate_h1(&spec, &exps, &g, sample, 16);
        r.merge(validate_h2(&spec, &g, &default_eta_probe(), [10.0; 2], 16));
        for mut c in r.checks {
            c.id = format!("{} {}", spec.label, c.id);
            rep.push(c);
        }
    }
    Ok(rep)
}
