//! Report files: JSON for machines, CSV per sweep, plot columns, summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fit::fit_exponent;
use super::sweep::{SweepKind, SweepResult, Verdict};
use crate::error::{GapError, Result};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub sweeps: Vec<SweepResult>,
}

impl Report {
    pub fn new(sweeps: Vec<SweepResult>) -> Self {
        Report {
            schema_version: REPORT_SCHEMA,
            sweeps,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let r: Report = serde_json::from_str(text).map_err(|e| GapError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if r.schema_version != REPORT_SCHEMA {
            return Err(GapError::Parse {
                path: path.to_path_buf(),
                message: format!("report schema {} is not supported", r.schema_version),
            });
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GapError::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// Worst verdict over all sweeps.
    pub fn verdict(&self) -> Verdict {
        Verdict::combine(self.sweeps.iter().map(|s| s.verdict))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub csv: Vec<PathBuf>,
    pub plot: Vec<PathBuf>,
    pub summary: String,
}

impl ReportFiles {
    pub fn all(&self) -> Vec<&Path> {
        let mut v = vec![self.json.as_path()];
        v.extend(self.csv.iter().map(|p| p.as_path()));
        v.extend(self.plot.iter().map(|p| p.as_path()));
        v
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn kind_str(k: SweepKind) -> &'static str {
    match k {
        SweepKind::Upper => "upper",
        SweepKind::Lower => "lower",
    }
}

/// Per-`ε` table.
pub fn to_csv(s: &SweepResult) -> String {
    let mut out = String::from(
        "epsilon,max_gradient,max_gradient_radius,omega,amplitude,witness,gap_max_gradient,residual,runtime_s\n",
    );
    for r in &s.records {
        let cols = [
            num(r.epsilon),
            num(r.max_gradient),
            num(r.max_gradient_radius),
            opt(r.omega),
            opt(r.amplitude),
            opt(r.witness),
            opt(r.gap_max_gradient),
            num(r.residual),
            format!("{:.3}", r.runtime),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Whitespace-separated `log10` columns with the fitted lines.
pub fn to_plot_data(s: &SweepResult) -> String {
    let names: Vec<&str> = s
        .checks
        .iter()
        .filter(|c| c.measured.is_some() && c.predicted.is_some())
        .map(|c| c.name.as_str())
        .collect();
    let mut out = format!("# {} sweep {}: log10 values and fitted lines\n# log10_eps", kind_str(s.kind), s.label);
    for n in &names {
        let _ = write!(out, " log10_{n} fit_{n}");
    }
    out.push('\n');
    let fits: Vec<_> = names.iter().map(|n| fit_exponent(&s.series(n)).ok()).collect();
    for r in &s.records {
        out.push_str(&num(r.epsilon.log10()));
        for (n, fit) in names.iter().zip(&fits) {
            let v = s.series(n).iter().find(|p| p.0 == r.epsilon).map(|p| p.1);
            let line = fit
                .as_ref()
                .map(|f| (f.intercept + f.slope * r.epsilon.ln()) / std::f64::consts::LN_10);
            let _ = write!(
                out,
                " {} {}",
                v.map(|v| num(v.log10())).unwrap_or_else(|| "nan".into()),
                line.map(num).unwrap_or_else(|| "nan".into())
            );
        }
        out.push('\n');
    }
    out
}

/// One line per check plus an overall verdict.
pub fn summary(sweeps: &[SweepResult]) -> String {
    let mut out = String::new();
    for s in sweeps {
        let _ = writeln!(
            out,
            "{} sweep {} (n = {}, alpha = {:.6}, {} eps values): {}",
            kind_str(s.kind),
            s.label,
            s.n,
            s.alpha,
            s.records.len(),
            s.verdict.as_str()
        );
        for c in &s.checks {
            let mut line = format!("  {:<5} {}", c.verdict.as_str(), c.name);
            match (c.measured, c.predicted) {
                (Some(m), Some(p)) => {
                    let _ = write!(line, ": slope {m:.4} vs predicted {p:.4}");
                    if let Some(h) = c.halfwidth {
                        let _ = write!(line, " (+/- {h:.4})");
                    }
                }
                (Some(m), None) => {
                    let _ = write!(line, ": {m:.4e}");
                }
                _ => {}
            }
            if !c.detail.is_empty() {
                let _ = write!(line, " [{}]", c.detail);
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        for n in &s.notes {
            let _ = writeln!(out, "  note: {n}");
        }
    }
    let worst = Verdict::combine(sweeps.iter().map(|s| s.verdict));
    let _ = writeln!(out, "overall: {}", worst.as_str());
    out
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| GapError::io(&path, e))?;
    Ok(path)
}

/// Writes `report.json` and, per sweep, `<kind>_<label>.csv` and
/// `<kind>_<label>_plot.dat` under `dir`; returns the paths and the summary.
pub fn emit_report(sweeps: &[SweepResult], dir: &Path) -> Result<ReportFiles> {
    if sweeps.is_empty() {
        return Err(GapError::usage("no sweep results to report"));
    }
    fs::create_dir_all(dir).map_err(|e| GapError::io(dir, e))?;
    let report = Report::new(sweeps.to_vec());
    let json = write(dir.join("report.json"), &report.to_json())?;
    let mut stems: Vec<String> = Vec::new();
    let (mut csv, mut plot) = (Vec::new(), Vec::new());
    for s in sweeps {
        let base = format!("{}_{}", kind_str(s.kind), s.label);
        let mut stem = base.clone();
        let mut k = 2;
        while stems.contains(&stem) {
            stem = format!("{base}_{k}");
            k += 1;
        }
        csv.push(write(dir.join(format!("{stem}.csv")), &to_csv(s))?);
        plot.push(write(dir.join(format!("{stem}_plot.dat")), &to_plot_data(s))?);
        stems.push(stem);
    }
    Ok(ReportFiles {
        json,
        csv,
        plot,
        summary: summary(sweeps),
    })
}

/// Records of an aborted sweep, written next to where the report would go.
pub fn persist_partial(label: &str, records: &[super::sweep::SweepRecord], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| GapError::io(dir, e))?;
    let text = serde_json::to_string_pretty(records).expect("records serialize");
    write(dir.join(format!("{label}_partial.json")), &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::{Check, SweepRecord};

    fn synthetic(kind: SweepKind, slope: f64) -> SweepResult {
        let records: Vec<SweepRecord> = [1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&e: &f64| SweepRecord {
                epsilon: e,
                max_gradient: 0.7 * e.powf(slope),
                max_gradient_radius: 0.1 * e.sqrt(),
                omega: Some(e.powf(0.2)),
                amplitude: None,
                witness: None,
                gap_max_gradient: None,
                residual: 1e-12,
                runtime: 0.25,
            })
            .collect();
        SweepResult {
            kind,
            label: "synthetic".into(),
            n: 3,
            lambda1: Some(1.0),
            lambda1_error: Some(1e-9),
            alpha: 2f64.sqrt() - 1.0,
            tolerance: 0.05,
            records,
            checks: vec![Check {
                name: "max_gradient".into(),
                predicted: Some(-0.29289321881345254),
                measured: Some(slope),
                halfwidth: Some(0.0),
                r_squared: Some(1.0),
                verdict: Verdict::Pass,
                detail: String::new(),
            }],
            verdict: Verdict::Pass,
            notes: vec![],
        }
    }

    #[test]
    fn empty_results_are_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], dir.path()).unwrap_err().is_usage());
    }

    #[test]
    fn single_sweep_writes_three_files_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let s = synthetic(SweepKind::Upper, -0.3);
        let files = emit_report(std::slice::from_ref(&s), dir.path()).unwrap();
        assert_eq!(files.all().len(), 3);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 3);
        let text = fs::read_to_string(&files.json).unwrap();
        let back = Report::from_json(&text, &files.json).unwrap();
        assert_eq!(back.to_json(), text);
        assert_eq!(back.sweeps[0].records[0].runtime, 0.0);
        let csv = fs::read_to_string(&files.csv[0]).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(1).unwrap().starts_with("1.0000000000000000e-2,"));
        let plot = fs::read_to_string(&files.plot[0]).unwrap();
        let row: Vec<f64> = plot.lines().nth(2).unwrap().split(' ').map(|v| v.parse().unwrap()).collect();
        assert!((row[0] + 2.0).abs() < 1e-15 && (row[1] - row[2]).abs() < 1e-12);
    }

    #[test]
    fn duplicate_stems_get_suffixes() {
        let dir = tempfile::tempdir().unwrap();
        let s = synthetic(SweepKind::Lower, -0.3);
        let files = emit_report(&[s.clone(), s], dir.path()).unwrap();
        assert!(files.csv[1].ends_with("lower_synthetic_2.csv"));
    }

    #[test]
    fn summary_lists_every_check() {
        let mut bad = synthetic(SweepKind::Lower, -0.4);
        bad.checks[0].verdict = Verdict::Fail;
        bad.verdict = Verdict::Fail;
        let text = summary(&[synthetic(SweepKind::Upper, -0.3), bad]);
        assert!(text.contains("upper sweep synthetic"));
        assert!(text.contains("  FAIL  max_gradient: slope -0.4000 vs predicted -0.2929"));
        assert!(text.ends_with("overall: FAIL\n"));
    }
}
