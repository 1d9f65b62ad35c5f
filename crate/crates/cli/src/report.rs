//! Machine-readable reports and their json / csv / text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::config::OutputFormat;
use crate::CliError;

pub const SCHEMA: &str = "hemiwidth/1";

/// Short names of the mathematical statements a check exercises.
pub mod citation {
    pub const HEMISPHERE_WIDTH: &str = "hemisphere width formula ω_p = π·⌊(−1+√(1+8p))/2⌋";
    pub const SPHERE_WIDTH: &str = "sphere width formula ω_p = 2π·⌊√p⌋";
    pub const RP2_WIDTH: &str = "projective plane width formula ω_p = 2π·⌊(1+√(1+8p))/4⌋";
    pub const DEGREE_INDEX: &str = "degree index f(p) = d for D(d−1) ≤ p ≤ D(d)−1, D(d) = (d+1)(d+2)/2";
    pub const COUNTING: &str = "perturbed length spectrum n₁π + n₂(π+μ) + n₃(2π+μ) has (d+1)(d+4)/2 values";
    pub const MONOTONE: &str = "perturbed widths are strictly increasing in p";
    pub const CALIBRATION: &str = "hemi-ellipsoid principal curves of lengths π, π+μ, 2π+μ";
    pub const GEODESIC_FLOW: &str = "geodesic flow on the ellipsoid a₁x₁²+a₂x₂²+a₃x₃² = 1";
    pub const JOACHIMSTHAL: &str = "Joachimsthal first integral of ellipsoid geodesics";
    pub const BILLIARD_RIGIDITY: &str = "closed billiard trajectories below the length cap are principal curves";
    pub const DOUBLING: &str = "billiard trajectories unfold to closed geodesics of the doubled surface";
    pub const BEZOUT: &str = "Bezout bound: a degree-d curve meets a great circle in at most 2d points";
    pub const CROFTON: &str = "Crofton formula: length = ¼ ∫ #(curve ∩ ξ^⊥) dξ over S²";
    pub const SWEEPOUT_BOUND: &str = "degree-d polynomial sweepout has mass at most π·d";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

impl Relation {
    fn symbol(&self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Equal => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub citation: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, threshold: f64, citation: &'static str) -> Self {
        let passed = match relation {
            Relation::AtMost => measured <= threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Equal => measured == threshold,
        };
        Self {
            name: name.into(),
            passed,
            measured,
            relation,
            threshold,
            citation,
            detail: None,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64, citation: &'static str) -> Self {
        Self::new(name, measured, Relation::AtMost, threshold, citation)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64, citation: &'static str) -> Self {
        Self::new(name, measured, Relation::AtLeast, threshold, citation)
    }

    pub fn equal(name: impl Into<String>, measured: f64, expected: f64, citation: &'static str) -> Self {
        Self::new(name, measured, Relation::Equal, expected, citation)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    /// Check name to the statement it exercises.
    pub provenance: BTreeMap<String, &'static str>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    /// Human-readable result lines for text output.
    #[serde(skip)]
    pub text: Vec<String>,
    /// Table replacing the per-check rows in csv output.
    #[serde(skip)]
    pub table: Option<(Vec<String>, Vec<Vec<String>>)>,
}

impl Report {
    pub fn new(command: &str, inputs: Value) -> Self {
        Self {
            schema: SCHEMA,
            command: command.to_string(),
            inputs,
            results: Value::Null,
            checks: Vec::new(),
            provenance: BTreeMap::new(),
            notes: Vec::new(),
            artifacts: Vec::new(),
            timing: None,
            text: Vec::new(),
            table: None,
        }
    }

    pub fn check(&mut self, c: Check) {
        debug_assert!(
            !self.provenance.contains_key(&c.name),
            "duplicate check name {}",
            c.name
        );
        self.provenance.insert(c.name.clone(), c.citation);
        self.checks.push(c);
    }

    pub fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }

    pub fn line(&mut self, l: impl Into<String>) {
        self.text.push(l.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    /// Folds another report in, prefixing its check names with `section.`
    /// and filing its results under `section`.
    pub fn absorb(&mut self, section: &str, other: Report) {
        if !self.results.is_object() {
            self.results = Value::Object(serde_json::Map::new());
        }
        if let Value::Object(m) = &mut self.results {
            m.insert(section.to_string(), other.results);
        }
        for mut c in other.checks {
            c.name = format!("{section}.{}", c.name);
            self.check(c);
        }
        for n in other.notes {
            // sections sharing a note keep only the first copy
            if !self.notes.iter().any(|m| m.ends_with(&format!(": {n}"))) {
                self.notes.push(format!("{section}: {n}"));
            }
        }
        self.artifacts.extend(other.artifacts);
        for l in other.text {
            self.text.push(format!("[{section}] {l}"));
        }
    }

    pub fn render(&self, format: OutputFormat) -> Result<String, CliError> {
        match format {
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            OutputFormat::Csv => self.render_csv(),
            OutputFormat::Text => Ok(self.render_text()),
        }
    }

    fn render_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        if let Some((header, rows)) = &self.table {
            w.write_record(header).map_err(io)?;
            for r in rows {
                w.write_record(r).map_err(io)?;
            }
        } else {
            w.write_record(["name", "passed", "measured", "relation", "threshold", "citation"])
                .map_err(io)?;
            for c in &self.checks {
                w.write_record([
                    c.name.as_str(),
                    if c.passed { "true" } else { "false" },
                    &c.measured.to_string(),
                    c.relation.symbol(),
                    &c.threshold.to_string(),
                    c.citation,
                ])
                .map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }

    fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hemiwidth {}", self.command);
        if let Value::Object(m) = &self.inputs {
            for (k, v) in m {
                let _ = writeln!(s, "  {k}: {v}");
            }
        }
        if !self.text.is_empty() {
            s.push('\n');
            for l in &self.text {
                let _ = writeln!(s, "{l}");
            }
        }
        if !self.checks.is_empty() {
            s.push('\n');
            for c in &self.checks {
                let _ = writeln!(
                    s,
                    "[{}] {}: {} {} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    fmt_num(c.measured),
                    c.relation.symbol(),
                    fmt_num(c.threshold)
                );
                if let Some(d) = &c.detail {
                    let _ = writeln!(s, "       {d}");
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        for a in &self.artifacts {
            let _ = writeln!(s, "wrote {a}");
        }
        if let Some(t) = &self.timing {
            let _ = writeln!(s, "time: {:.3} s", t.wall_seconds);
        }
        let total = self.checks.len();
        if total > 0 {
            let failed = self.failed();
            if failed == 0 {
                let _ = writeln!(s, "all {total} checks passed");
            } else {
                let _ = writeln!(s, "{failed} of {total} checks failed");
            }
        }
        s
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.6e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Report {
        let mut r = Report::new("demo", json!({"d": 2}));
        r.check(Check::at_most("a", 1e-9, 1e-8, citation::BEZOUT));
        r.check(Check::at_least("b", 1.0, 2.0, citation::CROFTON).with_detail("too small"));
        r.line("hello");
        r
    }

    #[test]
    fn pass_fail_and_provenance() {
        let r = sample();
        assert!(!r.passed());
        assert_eq!(r.failed(), 1);
        assert_eq!(r.provenance["b"], citation::CROFTON);
        assert!(Check::equal("c", 3.0, 3.0, citation::COUNTING).passed);
        assert!(!Check::at_most("nan", f64::NAN, 1.0, citation::COUNTING).passed);
    }

    #[test]
    fn renderings() {
        let r = sample();
        let j: Value = serde_json::from_str(&r.render(OutputFormat::Json).unwrap()).unwrap();
        assert_eq!(j["schema"], "hemiwidth/1");
        assert_eq!(j["checks"][1]["passed"], false);
        assert_eq!(j["checks"][1]["measured"], 1.0);
        assert_eq!(j["checks"][1]["threshold"], 2.0);
        assert!(j.get("timing").is_none());
        let csv = r.render(OutputFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("name,passed,measured,relation,threshold,citation"));
        let text = r.render(OutputFormat::Text).unwrap();
        assert!(text.contains("[FAIL] b: 1 >= 2"));
        assert!(text.contains("1 of 2 checks failed"));
    }

    #[test]
    fn absorb_prefixes_names() {
        let mut top = Report::new("all", json!({}));
        top.absorb("x", sample());
        assert_eq!(top.checks[0].name, "x.a");
        assert!(top.provenance.contains_key("x.b"));
        assert!(top.results.get("x").is_some());
    }
}
