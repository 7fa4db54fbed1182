use std::fmt::Write as _;

/// Outcome of one inequality or property check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub pass: bool,
    /// Smallest slack found; negative means violated.
    pub worst_margin: f64,
    pub node: Option<usize>,
    pub coordinate: Option<f64>,
    pub skipped: bool,
    pub note: String,
}

impl Check {
    pub fn new(id: impl Into<String>, pass: bool, worst_margin: f64) -> Self {
        Check {
            id: id.into(),
            pass,
            worst_margin,
            node: None,
            coordinate: None,
            skipped: false,
            note: String::new(),
        }
    }

    pub fn skipped(id: impl Into<String>, note: impl Into<String>) -> Self {
        Check {
            id: id.into(),
            pass: true,
            worst_margin: f64::NAN,
            node: None,
            coordinate: None,
            skipped: true,
            note: note.into(),
        }
    }

    pub fn at(mut self, node: usize, x: f64) -> Self {
        self.node = Some(node);
        self.coordinate = Some(x);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Tracks the worst slack of a nodal inequality `margin >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct Worst {
    pub margin: f64,
    pub node: Option<usize>,
    pub ok: bool,
}

impl Default for Worst {
    fn default() -> Self {
        Worst { margin: f64::INFINITY, node: None, ok: true }
    }
}

impl Worst {
    /// Records `margin` at `node`; `tol` is the admissible violation.
    pub fn push(&mut self, node: usize, margin: f64, tol: f64) {
        let fails = !(margin >= -tol);
        if fails {
            self.ok = false;
        }
        if margin < self.margin || (margin.is_nan() && self.margin.is_finite()) || self.node.is_none() {
            self.margin = margin;
            self.node = Some(node);
        }
    }

    pub fn into_check(self, id: impl Into<String>, nodes: &[f64]) -> Check {
        let c = Check::new(id, self.ok, self.margin);
        match self.node {
            Some(j) => c.at(j, nodes[j]),
            None => c,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CertificationReport {
    pub title: String,
    pub checks: Vec<Check>,
    /// Derived quantities echoed alongside the checks.
    pub values: Vec<(String, f64)>,
}

impl CertificationReport {
    pub fn new(title: impl Into<String>) -> Self {
        CertificationReport { title: title.into(), ..Default::default() }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.push((key.into(), v));
    }

    pub fn get(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn get_value(&self, key: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.skipped || c.pass)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.skipped && !c.pass)
    }

    pub fn merge(&mut self, other: CertificationReport) {
        self.checks.extend(other.checks);
        self.values.extend(other.values);
    }

    /// `key=value` records, one block per check.
    pub fn to_records(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[report {}]", self.title);
        let _ = writeln!(s, "pass={}", self.passed());
        for (k, v) in &self.values {
            let _ = writeln!(s, "value.{k}={v:e}");
        }
        for c in &self.checks {
            let _ = writeln!(s, "[check {}]", c.id);
            let status = if c.skipped { "skipped" } else if c.pass { "pass" } else { "fail" };
            let _ = writeln!(s, "status={status}");
            let _ = writeln!(s, "worst_margin={:e}", c.worst_margin);
            if let Some(j) = c.node {
                let _ = writeln!(s, "node={j}");
            }
            if let Some(x) = c.coordinate {
                let _ = writeln!(s, "x={x:e}");
            }
            if !c.note.is_empty() {
                let _ = writeln!(s, "note={}", c.note);
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== {} [{}]", self.title, if self.passed() { "PASS" } else { "FAIL" });
        for (k, v) in &self.values {
            let _ = writeln!(s, "   {k:<24} {v:.6e}");
        }
        for c in &self.checks {
            let status = if c.skipped { "SKIP" } else if c.pass { "ok" } else { "FAIL" };
            let _ = write!(s, "   {status:<5} {:<28} margin {:>13.5e}", c.id, c.worst_margin);
            if let (Some(j), Some(x)) = (c.node, c.coordinate) {
                let _ = write!(s, " at node {j} (x = {x:.6e})");
            }
            if !c.note.is_empty() {
                let _ = write!(s, "  {}", c.note);
            }
            s.push('\n');
        }
        s
    }
}
