use std::time::Instant;

use serde::Serialize;

/// How `lhs` and `rhs` are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `lhs <= rhs + tolerance`
    AtMost,
    /// `|lhs - rhs| <= tolerance`
    Equal,
    /// Pass/fail decided by a property check; `lhs`/`rhs` are diagnostics.
    Property,
}

/// Record of one certified claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub claim: String,
    pub inputs: Vec<(String, String)>,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    pub wall_time_s: f64,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn inequality(claim: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::build(claim, lhs, rhs, tolerance, Relation::AtMost, lhs <= rhs + tolerance)
    }

    pub fn equality(claim: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::build(claim, lhs, rhs, tolerance, Relation::Equal, (lhs - rhs).abs() <= tolerance)
    }

    pub fn property(claim: &str, lhs: f64, rhs: f64, tolerance: f64, pass: bool) -> Self {
        Self::build(claim, lhs, rhs, tolerance, Relation::Property, pass)
    }

    fn build(claim: &str, lhs: f64, rhs: f64, tolerance: f64, relation: Relation, pass: bool) -> Self {
        VerificationReport {
            claim: claim.to_string(),
            inputs: Vec::new(),
            lhs,
            rhs,
            tolerance,
            relation,
            pass: pass && lhs.is_finite() && rhs.is_finite(),
            wall_time_s: 0.0,
            notes: Vec::new(),
        }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.push((key.to_string(), value.to_string()));
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn timed(mut self, start: Instant) -> Self {
        self.wall_time_s = start.elapsed().as_secs_f64();
        self
    }

    /// Forces a failure (e.g. a violated precondition) and says why.
    pub fn fail(mut self, why: impl Into<String>) -> Self {
        self.pass = false;
        self.notes.push(why.into());
        self
    }

    pub fn inputs_string(&self) -> String {
        self.inputs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn summary_line(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::Equal => "==",
            Relation::Property => "~",
        };
        format!(
            "[{}] {} ({}): lhs={:.6e} {} rhs={:.6e} tol={:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.claim,
            self.inputs_string(),
            self.lhs,
            rel,
            self.rhs,
            self.tolerance
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(VerificationReport::inequality("x", 1.0, 1.0, 0.0).pass);
        assert!(!VerificationReport::inequality("x", 1.0 + 1e-8, 1.0, 1e-9).pass);
        assert!(VerificationReport::equality("x", 1.0, 1.0 + 1e-10, 1e-9).pass);
        assert!(!VerificationReport::equality("x", f64::NAN, 1.0, 1e-9).pass);
        let r = VerificationReport::inequality("x", 0.0, 1.0, 0.0).fail("precondition failed");
        assert!(!r.pass);
        assert!(r.summary_line().starts_with("[FAIL] x"));
    }
}
