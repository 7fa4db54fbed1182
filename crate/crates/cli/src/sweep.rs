//! Feasibility table over a grid of `(lambda, theta, delta, p)` values.

use std::fmt::Write as _;

use nodal_core::barriers::{certify_sign_structure, evaluate_candidate, BarrierKind, TorsionData};
use nodal_core::domain::build_grid;
use nodal_core::model::{Exponents, SingularWeightParams};
use nodal_core::Result;
use rayon::prelude::*;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Not evaluated because an earlier stage failed.
    Skip,
}

impl Status {
    fn of(b: bool) -> Self {
        if b {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub theta: f64,
    pub delta: f64,
    pub p1: f64,
    pub p2: f64,
    pub precondition: Status,
    pub ordering: Status,
    pub sub: Status,
    pub sup: Status,
    pub sign: Status,
    pub note: String,
}

impl SweepRow {
    pub fn passed(&self) -> bool {
        [self.precondition, self.ordering, self.sub, self.sup].iter().all(|s| *s == Status::Pass)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("lambda\ttheta\tdelta\tp1\tp2\tprecondition\tordering\tsub\tsuper\tsign\tnote\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{:e}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.lambda,
                r.theta,
                r.delta,
                r.p1,
                r.p2,
                r.precondition.as_str(),
                r.ordering.as_str(),
                r.sub.as_str(),
                r.sup.as_str(),
                r.sign.as_str(),
                r.note
            );
        }
        s
    }
}

/// One row per combination; rows are computed in parallel and emitted in
/// the lexicographic order of the input ranges.
pub fn sweep(cfg: &RunConfig) -> Result<SweepTable> {
    let grid = build_grid(cfg.domain_desc(), cfg.n, cfg.grading)?;
    let spec = cfg.nonlinearity()?;
    let solver = cfg.solver();
    let dim = cfg.domain_desc().dim();
    let pairs: Vec<(f64, f64)> = if cfg.sweep_p.is_empty() {
        vec![(cfg.p1, cfg.p2)]
    } else {
        cfg.sweep_p.iter().map(|&p| (p, p)).collect()
    };
    let mut combos = Vec::new();
    for &(p1, p2) in &pairs {
        for &lambda in &cfg.sweep_lambda {
            for &theta in &cfg.sweep_theta {
                for &delta in &cfg.sweep_delta {
                    combos.push((lambda, theta, delta, p1, p2));
                }
            }
        }
    }
    if combos.is_empty() {
        return Ok(SweepTable::default());
    }
    let data: Vec<Result<(Exponents, TorsionData)>> = pairs
        .par_iter()
        .map(|&(p1, p2)| {
            let e = Exponents::new(p1, p2, dim)?;
            Ok((e, TorsionData::compute(&e, &grid, &solver)?))
        })
        .collect();
    let rows = combos
        .par_iter()
        .map(|&(lambda, theta, delta, p1, p2)| {
            let mut row = SweepRow {
                lambda,
                theta,
                delta,
                p1,
                p2,
                precondition: Status::Skip,
                ordering: Status::Skip,
                sub: Status::Skip,
                sup: Status::Skip,
                sign: Status::Skip,
                note: String::new(),
            };
            let k = pairs.iter().position(|&q| q == (p1, p2)).expect("pair listed");
            let (exps, td) = match &data[k] {
                Ok(d) => d,
                Err(e) => {
                    row.precondition = Status::Fail;
                    row.note = e.to_string();
                    return row;
                }
            };
            let weight = match SingularWeightParams::new(exps, lambda, theta, delta) {
                Ok(w) => w,
                Err(e) => {
                    row.precondition = Status::Fail;
                    row.note = e.to_string();
                    return row;
                }
            };
            row.precondition = Status::Pass;
            match evaluate_candidate(&spec, exps, td, weight, BarrierKind::Nodal, &solver, cfg.seed) {
                Ok(sel) => {
                    row.ordering = Status::of(sel.ordering.passed());
                    row.sub = Status::of(sel.sub.passed());
                    row.sup = Status::of(sel.sup.passed());
                    row.sign = Status::of(certify_sign_structure(&sel.barriers).passed());
                }
                Err(e) => row.note = e.to_string(),
            }
            row
        })
        .collect();
    Ok(SweepTable { rows })
}
