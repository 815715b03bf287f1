//! Experiment reports: CSV table, slope fits, pass/fail checks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::Experiment;
use crate::fit::FitOutcome;

/// Fixed-precision float formatting shared by every CSV cell.
pub fn num(x: f64) -> String {
    format!("{x:.10e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub fits: Vec<(String, FitOutcome)>,
    pub checks: Vec<Check>,
    /// Free-form lines for the summary (per-δ tables, exclusions, choices).
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: Experiment, header: &[&str]) -> Self {
        Self {
            experiment,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn fit(&self, name: &str) -> Option<&FitOutcome> {
        self.fits.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.experiment.name());
        let _ = writeln!(s, "rows: {}", self.rows.len());
        for line in &self.notes {
            let _ = writeln!(s, "{line}");
        }
        for (name, fit) in &self.fits {
            let _ = writeln!(s, "fit {name}: {}", fit.describe());
        }
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    /// Writes `<experiment>.csv` and `<experiment>.summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.experiment.name()));
        let summary = dir.join(format!("{}.summary.txt", self.experiment.name()));
        std::fs::write(&csv, self.csv())?;
        std::fs::write(&summary, self.summary())?;
        Ok((csv, summary))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_summary_agree() {
        let mut r = ExperimentReport::new(Experiment::Dispersion, &["x", "y"]);
        r.push_row(vec![num(1.0), num(2.5e-4)]);
        r.check("a", true, "ok");
        assert_eq!(r.csv(), "x,y\n1.0000000000e0,2.5000000000e-4\n");
        assert!(r.passed());
        r.check("b", false, "bad");
        assert!(!r.passed());
        let s = r.summary();
        assert!(s.contains("rows: 1") && s.contains("[FAIL] b: bad") && s.ends_with("overall: FAIL\n"));
        assert!(!ExperimentReport::new(Experiment::Dtn, &[]).passed());
    }
}
