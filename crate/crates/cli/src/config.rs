//! Flat TOML run configuration.
//!
//! Every key is optional; missing keys take the defaults below.
//!
//! ```toml
//! mode = "nodal"            # nodal | positive | torsion | verify-all | sweep
//! solve = true              # false stops after the barrier certificates
//! domain = "ball"           # interval | ball
//! a = 0.0                   # interval end points
//! b = 1.0
//! radius = 1.0              # ball radius and dimension
//! dim = 3
//! n = 512                   # node count
//! grading = 2.0             # boundary grading exponent
//! p1 = 2.2
//! p2 = 2.8
//! nonlinearity = "trig"     # zero | trig | power | manufactured
//! m1 = 1.0                  # optional overrides of the behaviour constants
//! rho1 = 1.0
//! newton_tol = 1e-10
//! max_newton = 200
//! outer_tol = 1e-9          # relative to the box scale
//! max_outer = 200
//! lambda_max = 65536.0
//! theta_max = 64.0
//! lambda = 4.0              # torsion mode: parameters of the first lemma
//! theta = 8.0
//! tau = 0.5                 # Holder exponent of the distance-quotient check
//! seed = 1
//! out = "out"
//! sweep_lambda = [2.0, 4.0]
//! sweep_theta = [4.0, 8.0]
//! sweep_delta = [0.25]
//! sweep_p = []              # empty keeps p1, p2
//! ```

use std::path::Path;

use nodal_core::barriers::Caps;
use nodal_core::domain::{DomainDesc, MIN_NODES};
use nodal_core::model::{lookup_nonlinearity, Exponents, NonlinearitySpec};
use nodal_core::plap::SolverConfig;
use nodal_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Nodal,
    Positive,
    Torsion,
    VerifyAll,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Interval,
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub solve: bool,
    pub domain: DomainKind,
    pub a: f64,
    pub b: f64,
    pub radius: f64,
    pub dim: usize,
    pub n: usize,
    pub grading: f64,
    pub p1: f64,
    pub p2: f64,
    pub nonlinearity: String,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub lambda_max: f64,
    pub theta_max: f64,
    pub lambda: Option<f64>,
    pub theta: Option<f64>,
    pub tau: f64,
    pub seed: u64,
    pub out: String,
    pub verbose: bool,
    pub sweep_lambda: Vec<f64>,
    pub sweep_theta: Vec<f64>,
    pub sweep_delta: Vec<f64>,
    pub sweep_p: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Nodal,
            solve: true,
            domain: DomainKind::Ball,
            a: 0.0,
            b: 1.0,
            radius: 1.0,
            dim: 3,
            n: 512,
            grading: 2.0,
            p1: 2.2,
            p2: 2.8,
            nonlinearity: "trig".into(),
            m1: None,
            m2: None,
            rho1: None,
            rho2: None,
            newton_tol: 1e-10,
            max_newton: 200,
            outer_tol: 1e-9,
            max_outer: 200,
            lambda_max: 65536.0,
            theta_max: 64.0,
            lambda: None,
            theta: None,
            tau: 0.5,
            seed: 1,
            out: "out".into(),
            verbose: false,
            sweep_lambda: Vec::new(),
            sweep_theta: Vec::new(),
            sweep_delta: Vec::new(),
            sweep_p: Vec::new(),
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.domain_desc().validate()?;
        if self.n < MIN_NODES {
            return bad(format!("n must be at least {MIN_NODES}, got {}", self.n));
        }
        if !(self.grading >= 1.0 && self.grading.is_finite()) {
            return bad(format!("grading exponent must be >= 1, got {}", self.grading));
        }
        self.exponents()?;
        self.nonlinearity()?;
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("outer_tol", self.outer_tol),
            ("lambda_max", self.lambda_max),
            ("theta_max", self.theta_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_newton == 0 || self.max_outer == 0 {
            return bad("iteration caps must be positive");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        for (name, r) in [
            ("sweep_lambda", &self.sweep_lambda),
            ("sweep_theta", &self.sweep_theta),
            ("sweep_delta", &self.sweep_delta),
            ("sweep_p", &self.sweep_p),
        ] {
            if r.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name} must contain finite values"));
            }
        }
        Ok(())
    }

    pub fn domain_desc(&self) -> DomainDesc {
        match self.domain {
            DomainKind::Interval => DomainDesc::Interval { a: self.a, b: self.b },
            DomainKind::Ball => DomainDesc::RadialBall { radius: self.radius, dim: self.dim },
        }
    }

    pub fn exponents(&self) -> Result<Exponents> {
        Exponents::new(self.p1, self.p2, self.domain_desc().dim())
    }

    /// Catalog entry with the behaviour overrides applied.
    pub fn nonlinearity(&self) -> Result<NonlinearitySpec> {
        let mut spec = lookup_nonlinearity(&self.nonlinearity)?;
        for (k, m, rho) in [(0, self.m1, self.rho1), (1, self.m2, self.rho2)] {
            if let Some(m) = m {
                if !(m > 0.0) {
                    return bad(format!("m{} must be positive", k + 1));
                }
                spec.behaviour[k].m = m;
            }
            if let Some(rho) = rho {
                if !(rho > 0.0) {
                    return bad(format!("rho{} must be positive", k + 1));
                }
                spec.behaviour[k].rho = rho;
            }
        }
        Ok(spec)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
            verbose: self.verbose,
            ..SolverConfig::default()
        }
    }

    pub fn caps(&self) -> Caps {
        Caps { lambda_max: self.lambda_max, theta_max: self.theta_max }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.mode = Mode::Sweep;
        c.sweep_lambda = vec![2.0, 4.0];
        c.rho1 = Some(0.5);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml("nonlinearity = \"nope\"").is_err());
        assert!(RunConfig::from_toml("n = 4").is_err());
        assert!(RunConfig::from_toml("unknown_key = 1").is_err());
        assert!(RunConfig::from_toml("outer_tol = -1.0").is_err());
        let e = RunConfig::from_toml("p1 = 0.5").unwrap_err();
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::from_toml("nonlinearity = \"zero\"\nrho2 = 0.25").unwrap();
        assert_eq!(c.nonlinearity().unwrap().behaviour[1].rho, 0.25);
    }
}
