//! Pipeline orchestration and report emission.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nodal_core::auxiliary::{
    certify_constants, check_first_lemma, find_delta0, holder_quotient, perturbed_torsion, torsion,
    TorsionConstants,
};
use nodal_core::barriers::{
    certify_sign_structure, positive_lower_bound, select_parameters, strong_form_crosscheck, BarrierKind,
    TorsionData,
};
use nodal_core::domain::{build_grid, Grid, GridFunction};
use nodal_core::model::{default_eta_probe, validate_h1, validate_h2, SampleBox};
use nodal_core::report::{CertificationReport, Check};
use nodal_core::system::{
    certify_containment, classify_solution, solve_penalized_system, Bounds, SystemParams,
};
use nodal_core::Result;

use crate::config::{Mode, RunConfig};
use crate::sweep::sweep;
use crate::verify::verify_all;

/// Samples per axis of the hypothesis checks.
const HYPOTHESIS_SAMPLES: usize = 24;
/// Half-width of the box sampled by the growth check.
const GROWTH_BOX: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct Entry {
    pub report: CertificationReport,
    /// Mandatory reports decide the verdict; the others are informational.
    pub mandatory: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub entries: Vec<Entry>,
    pub values: Vec<(String, f64)>,
    pub notes: Vec<String>,
    /// Seconds per stage; kept out of the machine-readable report.
    pub timings: Vec<(String, f64)>,
    /// File name and contents of each plot table.
    pub tables: Vec<(String, String, String)>,
}

impl RunReport {
    fn new(config: &RunConfig) -> Self {
        RunReport {
            config: config.clone(),
            entries: Vec::new(),
            values: Vec::new(),
            notes: Vec::new(),
            timings: Vec::new(),
            tables: Vec::new(),
        }
    }

    fn mandatory(&mut self, r: CertificationReport) {
        self.entries.push(Entry { report: r, mandatory: true });
    }

    fn info(&mut self, r: CertificationReport) {
        self.entries.push(Entry { report: r, mandatory: false });
    }

    fn value(&mut self, k: impl Into<String>, v: f64) {
        self.values.push((k.into(), v));
    }

    fn table(&mut self, name: &str, about: &str, body: String) {
        self.tables.push((name.into(), about.into(), body));
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().filter(|e| e.mandatory).all(|e| e.report.passed())
    }

    /// 0 when every mandatory certificate passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }

    pub fn get(&self, title: &str) -> Option<&CertificationReport> {
        self.entries.iter().map(|e| &e.report).find(|r| r.title == title)
    }

    pub fn get_value(&self, key: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Machine-readable `key=value` blocks; identical inputs give identical bytes.
    pub fn to_dat(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "seed={}", self.config.seed);
        let _ = writeln!(s, "verdict={}", if self.passed() { "pass" } else { "fail" });
        let _ = writeln!(s, "[config]");
        for line in self.config.to_toml().lines().filter(|l| !l.trim().is_empty()) {
            let _ = writeln!(s, "{}", line.replacen(" = ", "=", 1));
        }
        let _ = writeln!(s, "[values]");
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k}={v:e}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "[note]\ntext={n}");
        }
        for e in &self.entries {
            let _ = writeln!(s, "mandatory={}", e.mandatory);
            s.push_str(&e.report.to_records());
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "nodal run: mode {:?}, {:?}, n = {}, p = ({}, {}), nonlinearity {}, seed {}",
            self.config.mode,
            self.config.domain_desc(),
            self.config.n,
            self.config.p1,
            self.config.p2,
            self.config.nonlinearity,
            self.config.seed
        );
        let _ = writeln!(s, "verdict: {}\n", if self.passed() { "PASS" } else { "FAIL" });
        if !self.values.is_empty() {
            let _ = writeln!(s, "derived constants");
            for (k, v) in &self.values {
                let _ = writeln!(s, "   {k:<24} {v:.6e}");
            }
            s.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        for e in &self.entries {
            if !e.mandatory {
                s.push_str("(informational) ");
            }
            s.push_str(&e.report.to_text());
        }
        if !self.timings.is_empty() {
            let _ = writeln!(s, "\ntimings");
            for (k, t) in &self.timings {
                let _ = writeln!(s, "   {k:<24} {t:.3} s");
            }
        }
        s
    }

    /// Writes `report.txt`, `report.dat`, the tables and a manifest into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        std::fs::write(dir.join("report.dat"), self.to_dat())?;
        let mut manifest = String::new();
        for (name, about, body) in &self.tables {
            std::fs::write(dir.join(name), body)?;
            let cols = body.lines().next().unwrap_or("").replace('\t', ", ");
            let _ = writeln!(manifest, "{name}\t{about}\tcolumns: {cols}");
        }
        std::fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }
}

struct Clock(Instant);

impl Clock {
    fn start() -> Self {
        Clock(Instant::now())
    }

    fn lap(&mut self, rep: &mut RunReport, stage: &str) {
        rep.timings.push((stage.into(), self.0.elapsed().as_secs_f64()));
        self.0 = Instant::now();
    }
}

fn torsion_table(grid: &Grid, z: &[&GridFunction], names: &[&str]) -> String {
    let mut s = String::from("node\tx\td");
    for n in names {
        let _ = write!(s, "\t{n}");
    }
    s.push('\n');
    for j in 0..grid.len() {
        let _ = write!(s, "{}\t{:.17e}\t{:.17e}", j, grid.nodes()[j], grid.distances()[j]);
        for f in z {
            let _ = write!(s, "\t{:.17e}", f.values[j]);
        }
        s.push('\n');
    }
    s
}

pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Torsion => run_torsion(cfg),
        Mode::Nodal => run_pipeline(cfg, BarrierKind::Nodal),
        Mode::Positive => run_pipeline(cfg, BarrierKind::Positive),
        Mode::VerifyAll => {
            let mut rep = RunReport::new(cfg);
            let mut clock = Clock::start();
            for r in verify_all(cfg)? {
                rep.mandatory(r);
            }
            clock.lap(&mut rep, "verify-all");
            Ok(rep)
        }
        Mode::Sweep => {
            let mut rep = RunReport::new(cfg);
            let mut clock = Clock::start();
            let table = sweep(cfg)?;
            rep.value("sweep.rows", table.rows.len() as f64);
            rep.value("sweep.passing_rows", table.rows.iter().filter(|r| r.passed()).count() as f64);
            rep.table("sweep.tsv", "feasibility of each parameter combination", table.to_tsv());
            clock.lap(&mut rep, "sweep");
            Ok(rep)
        }
    }
}

fn grid_of(cfg: &RunConfig) -> Result<Arc<Grid>> {
    build_grid(cfg.domain_desc(), cfg.n, cfg.grading)
}

fn standing_note(rep: &mut RunReport, cfg: &RunConfig) {
    let desc = cfg.domain_desc();
    if !(desc.within_standing_hypothesis(cfg.p1) && desc.within_standing_hypothesis(cfg.p2)) {
        rep.notes.push("outside the hypotheses 1 < p_i < N: engineering testbed".into());
    }
}

fn run_torsion(cfg: &RunConfig) -> Result<RunReport> {
    let mut rep = RunReport::new(cfg);
    standing_note(&mut rep, cfg);
    let mut clock = Clock::start();
    let grid = grid_of(cfg)?;
    let solver = cfg.solver();
    let mut zs = Vec::new();
    for (i, p) in [(1, cfg.p1), (2, cfg.p2)] {
        let z = torsion(p, &grid, &solver)?;
        let c = nodal_core::auxiliary::extract_constants(&z, p)?;
        rep.value(format!("max_z{i}"), z.max_abs());
        push_constants(&mut rep, i, &c);
        rep.mandatory(certify_constants(&z, p, &c));
        let hq = holder_quotient(&z, cfg.tau)?;
        rep.value(format!("holder{i}.ratio"), hq.ratio);
        if let (Some(lam), Some(th)) = (cfg.lambda, cfg.theta) {
            let t = find_delta0(p, lam, th, &z, &solver)?;
            rep.value(format!("delta0_{i}"), t.delta0);
            let zd = perturbed_torsion(p, lam, th, 0.5 * t.delta0, &grid, &solver)?;
            let mut r = check_first_lemma(&z, &zd, p);
            r.title = format!("first comparison lemma (p = {p}, delta = delta0/2)");
            rep.mandatory(r);
        }
        zs.push(z);
    }
    clock.lap(&mut rep, "torsion");
    rep.table("grid.tsv", "grid nodes, distances and lumped masses", grid.to_tsv());
    rep.table("torsion.tsv", "torsion functions", torsion_table(&grid, &[&zs[0], &zs[1]], &["z1", "z2"]));
    Ok(rep)
}

fn push_constants(rep: &mut RunReport, i: usize, c: &TorsionConstants) {
    rep.value(format!("l{i}"), c.l);
    rep.value(format!("L{i}"), c.big_l);
    rep.value(format!("L_hat{i}"), c.l_hat);
}

fn run_pipeline(cfg: &RunConfig, kind: BarrierKind) -> Result<RunReport> {
    let mut rep = RunReport::new(cfg);
    standing_note(&mut rep, cfg);
    let mut clock = Clock::start();
    let grid = grid_of(cfg)?;
    let exps = cfg.exponents()?;
    let spec = cfg.nonlinearity()?;
    let solver = cfg.solver();
    if !spec.theorem_compliant {
        rep.notes.push(format!("nonlinearity '{}' violates the growth or behaviour hypotheses by design", spec.label));
    }

    let sample = SampleBox { s: (-GROWTH_BOX, GROWTH_BOX), t: (-GROWTH_BOX, GROWTH_BOX) };
    rep.mandatory(validate_h1(&spec, &exps, &grid, sample, HYPOTHESIS_SAMPLES));
    rep.mandatory(validate_h2(&spec, &grid, &default_eta_probe(), [GROWTH_BOX; 2], HYPOTHESIS_SAMPLES));
    clock.lap(&mut rep, "hypotheses");

    let data = TorsionData::compute(&exps, &grid, &solver)?;
    for i in 1..=2 {
        push_constants(&mut rep, i, &data.constants[i - 1]);
        rep.mandatory(certify_constants(&data.z[i - 1], exps.p(i), &data.constants[i - 1]));
    }
    clock.lap(&mut rep, "torsion");

    let sel = select_parameters(&spec, &exps, &data, cfg.caps(), kind, &solver, cfg.seed)?;
    clock.lap(&mut rep, "selection");
    let params = sel.params;
    let bs = &sel.barriers;
    rep.value("lambda", params.lambda());
    rep.value("theta", params.theta());
    rep.value("delta", params.delta());
    rep.value("delta_trials", sel.delta_trials as f64);
    rep.value("mu", params.mu);
    rep.value("d_star", params.d_star);
    rep.value("l", params.constants.l);
    rep.value("L", params.constants.big_l);
    rep.value("L_hat", params.constants.l_hat);
    for i in 1..=2 {
        rep.value(format!("gamma{i}"), params.weight.gamma(i));
        rep.value(format!("gamma{i}+1"), params.weight.gamma_plus_one(i));
        rep.value(format!("omega{i}"), params.weight.omega(i));
        rep.value(format!("omega{i}-1"), params.weight.omega_minus_one(i));
        rep.value(format!("C{i}"), params.c_i(i));
        rep.value(format!("C.envelope{i}"), params.envelope_constant(&spec, i));
    }
    rep.mandatory(sel.ordering.clone());
    rep.mandatory(sel.sub.clone());
    rep.mandatory(sel.sup.clone());

    match kind {
        BarrierKind::Nodal => rep.mandatory(certify_sign_structure(bs)),
        BarrierKind::Positive => {
            let mut r = CertificationReport::new("positive barrier lower bound");
            r.value("c", params.positive_constant());
            r.push(positive_lower_bound(bs));
            rep.mandatory(r);
        }
    }
    let gap = strong_form_crosscheck(bs, 0.05 * params.d_star)?;
    rep.value("strong_form_gap", gap);

    // strip-width threshold of the first comparison lemma at the selected (lambda, theta)
    let mut lemma = CertificationReport::new("first comparison lemma at the selected parameters");
    let mut delta0 = f64::INFINITY;
    for i in 1..=2 {
        match find_delta0(exps.p(i), params.lambda(), params.theta(), &data.z[i - 1], &solver) {
            Ok(t) => {
                rep.value(format!("delta0_{i}"), t.delta0);
                delta0 = delta0.min(t.delta0);
            }
            Err(e) => lemma.push(Check::new(format!("delta0_{i}"), false, f64::NAN).with_note(e.to_string())),
        }
    }
    for i in 1..=2 {
        let zd = &bs.z_delta[i - 1];
        let mut r = check_first_lemma(&data.z[i - 1], zd, exps.p(i));
        for c in &mut r.checks {
            c.id = format!("{}{} at selected delta", c.id, i);
        }
        lemma.merge(r);
    }
    lemma.value("delta0", delta0);
    rep.info(lemma);
    clock.lap(&mut rep, "barriers");

    rep.table("grid.tsv", "grid nodes, distances and lumped masses", grid.to_tsv());
    rep.table(
        "torsion.tsv",
        "torsion and perturbed torsion functions",
        torsion_table(&grid, &[&data.z[0], &data.z[1], &bs.z_delta[0], &bs.z_delta[1]], &["z1", "z2", "z1_delta", "z2_delta"]),
    );
    rep.table("barriers.tsv", "sub- and super-solutions and weights", bs.to_tsv()?);

    if !cfg.solve {
        return Ok(rep);
    }
    let bounds = Bounds::from_barriers(bs);
    let sp = SystemParams::from_barriers(bs);
    let outer_tol = cfg.outer_tol * bounds.scale();
    let sol = solve_penalized_system(&bounds, &spec, &sp, &solver, outer_tol, cfg.max_outer)?;
    clock.lap(&mut rep, "system");
    if let Some(n) = &sol.notice {
        rep.notes.push(n.clone());
    }
    let mut cont = certify_containment(&sol, &bounds, 1e-6);
    let worst = sol.residual_u.max(sol.residual_v);
    cont.push(Check::new("weak residual<=10 outer_tol", worst <= 10.0 * outer_tol, 10.0 * outer_tol - worst));
    cont.value("outer_tol", outer_tol);
    rep.mandatory(cont);
    let class = classify_solution(&sol, bs);
    if let Some(c) = class.get_value("c_emp") {
        rep.value("c_emp", c);
    }
    rep.mandatory(class);
    rep.table("solution.tsv", "solution pair, barriers and nodal signs", sol.to_tsv(&bounds));
    let mut outer = String::from("iteration\tchange\n");
    for (k, c) in sol.changes.iter().enumerate() {
        let _ = writeln!(outer, "{}\t{:e}", k + 1, c);
    }
    rep.table("outer.tsv", "successive changes of the block iteration", outer);
    Ok(rep)
}
