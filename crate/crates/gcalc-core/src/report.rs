//! Report containers with deterministic CSV emission.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Outcome of one axiom / inequality check over a batch of sampled inputs.
#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub check_id: String,
    pub axiom: String,
    /// Largest violation seen over the batch (0 when the law held everywhere).
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Inputs that produced the worst violation.
    pub witness: String,
}

impl AxiomCheck {
    pub fn new(
        check_id: impl Into<String>,
        axiom: impl Into<String>,
        worst_violation: f64,
        tolerance: f64,
        witness: impl Into<String>,
    ) -> Self {
        AxiomCheck {
            check_id: check_id.into(),
            axiom: axiom.into(),
            worst_violation,
            tolerance,
            pass: worst_violation <= tolerance,
            witness: witness.into(),
        }
    }
}

/// A batch of axiom checks.
#[derive(Debug, Clone, Default)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn push(&mut self, check: AxiomCheck) {
        self.checks.push(check);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().fold(0.0, |m, c| m.max(c.worst_violation))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check_id,axiom,worst_violation,tolerance,pass,witness\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.check_id,
                c.axiom,
                c.worst_violation,
                c.tolerance,
                c.pass,
                csv_quote(&c.witness)
            );
        }
        out
    }
}

/// One row of a verification suite: a named quantity against its reference.
#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub check_id: String,
    pub quantity: String,
    pub expected: f64,
    pub computed: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerifyRow {
    /// Two-sided check: |expected - computed| within tolerance.
    pub fn two_sided(
        check_id: impl Into<String>,
        quantity: impl Into<String>,
        expected: f64,
        computed: f64,
        tolerance: f64,
    ) -> Self {
        let abs_error = (expected - computed).abs();
        VerifyRow {
            check_id: check_id.into(),
            quantity: quantity.into(),
            expected,
            computed,
            abs_error,
            tolerance,
            pass: abs_error <= tolerance,
        }
    }

    /// One-sided check: computed may not fall below expected by more than tolerance.
    /// `abs_error` records only the shortfall.
    pub fn lower_bound(
        check_id: impl Into<String>,
        quantity: impl Into<String>,
        expected: f64,
        computed: f64,
        tolerance: f64,
    ) -> Self {
        let abs_error = (expected - computed).max(0.0);
        VerifyRow {
            check_id: check_id.into(),
            quantity: quantity.into(),
            expected,
            computed,
            abs_error,
            tolerance,
            pass: abs_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn push(&mut self, row: VerifyRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: VerifyReport) {
        self.rows.extend(other.rows);
    }

    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn all_pass(&self) -> bool {
        self.failed() == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check_id,quantity,expected,computed,abs_error,tolerance,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.check_id,
                csv_quote(&r.quantity),
                r.expected,
                r.computed,
                r.abs_error,
                r.tolerance,
                r.pass
            );
        }
        let failed = self.failed();
        if failed > 0 {
            let _ = writeln!(out, "# failed={failed}");
        }
        out
    }

    /// Write the CSV through a temp file + rename so readers never see a torn report.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv())
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
        )),
        None => std::path::PathBuf::from(format!(".{}.tmp", path.display())),
    };
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
