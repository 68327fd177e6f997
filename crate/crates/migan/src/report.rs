//! Result schemas and writers: per-trial training reports (CSV and JSON with
//! the same shape), training-loss curves, outer-iteration logs, and benchmark
//! timing tables.
//!
//! CSV floats carry 10 significant digits in a fixed column order, so result
//! files are byte-stable for a fixed seed (timing columns aside). The JSON
//! mirror keeps full `f64` precision and round-trips exactly.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gan::LossRecord;
use crate::linalg::{mean, std_dev};
use crate::opf::Candidate;
use crate::recursive::OuterRecord;

pub const RESULT_HEADER: &str =
    "case,trial,rho,objective,oracle_objective,mae_pct,recursive_iters,seconds";

/// Ten significant digits, scientific notation.
pub fn fmt_g10(v: f64) -> String {
    format!("{v:.9e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub rho: f64,
    pub objective: f64,
    pub oracle_objective: f64,
    pub mae_pct: f64,
    pub recursive_iters: usize,
    pub seconds: f64,
    pub best: Candidate,
}

impl TrialResult {
    pub fn new(
        trial: usize,
        rho: f64,
        oracle_objective: f64,
        best: Candidate,
        recursive_iters: usize,
        seconds: f64,
    ) -> Self {
        let objective = best.objective;
        let mae_pct = 100.0 * (objective - oracle_objective).abs() / oracle_objective.abs();
        Self { trial, rho, objective, oracle_objective, mae_pct, recursive_iters, seconds, best }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub std: f64,
}

fn stat(values: Vec<f64>) -> SummaryStat {
    SummaryStat { mean: mean(&values), std: std_dev(&values) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub objective: SummaryStat,
    pub mae_pct: SummaryStat,
    pub recursive_iters: SummaryStat,
    pub seconds: SummaryStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub case: String,
    pub trials: Vec<TrialResult>,
    pub summary: Summary,
}

impl TrainReport {
    pub fn new(case: impl Into<String>, trials: Vec<TrialResult>) -> Self {
        let summary = Summary {
            objective: stat(trials.iter().map(|t| t.objective).collect()),
            mae_pct: stat(trials.iter().map(|t| t.mae_pct).collect()),
            recursive_iters: stat(trials.iter().map(|t| t.recursive_iters as f64).collect()),
            seconds: stat(trials.iter().map(|t| t.seconds).collect()),
        };
        Self { case: case.into(), trials, summary }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(RESULT_HEADER);
        out.push('\n');
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.case,
                t.trial,
                fmt_g10(t.rho),
                fmt_g10(t.objective),
                fmt_g10(t.oracle_objective),
                fmt_g10(t.mae_pct),
                t.recursive_iters,
                fmt_g10(t.seconds),
            ));
        }
        if !self.trials.is_empty() {
            let s = &self.summary;
            let rho = fmt_g10(mean(&self.trials.iter().map(|t| t.rho).collect::<Vec<_>>()));
            out.push_str(&format!(
                "{},mean,{},{},,{},{},{}\n",
                self.case,
                rho,
                fmt_g10(s.objective.mean),
                fmt_g10(s.mae_pct.mean),
                fmt_g10(s.recursive_iters.mean),
                fmt_g10(s.seconds.mean),
            ));
            out.push_str(&format!(
                "{},std,{},{},,{},{},{}\n",
                self.case,
                rho,
                fmt_g10(s.objective.std),
                fmt_g10(s.mae_pct.std),
                fmt_g10(s.recursive_iters.std),
                fmt_g10(s.seconds.std),
            ));
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Write a report in the requested format.
pub fn write_results(report: &TrainReport, path: &Path, format: ReportFormat) -> io::Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv_string(),
        ReportFormat::Json => report.to_json_string(),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)
}

/// Training curves: one row per iteration.
pub fn write_loss_csv(history: &[LossRecord], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "iteration,l_generator,l_critic")?;
    for (i, record) in history.iter().enumerate() {
        writeln!(w, "{},{},{}", i + 1, fmt_g10(record.l_generator), fmt_g10(record.l_critic))?;
    }
    Ok(())
}

/// Outer-iteration log of a recursive run.
pub fn write_outer_csv(records: &[OuterRecord], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "k,f_min,feasible_emitted")?;
    for r in records {
        writeln!(w, "{},{},{}", r.k, fmt_g10(r.f_min), r.feasible_emitted)?;
    }
    Ok(())
}

/// Sampled or emitted candidates as rows of dispatch values.
pub fn write_pool_csv(pool: &crate::selector::SolutionPool, mut w: impl Write) -> io::Result<()> {
    let n_g = pool.candidates().first().map_or(0, |c| c.p_g.len());
    let mut header: Vec<String> = (0..n_g).map(|g| format!("p_g_{g}")).collect();
    header.push("objective".into());
    header.push("feasible".into());
    writeln!(w, "{}", header.join(","))?;
    for c in pool.iter() {
        let mut row: Vec<String> = c.p_g.iter().map(|v| fmt_g10(*v)).collect();
        row.push(fmt_g10(c.objective));
        row.push(format!("{}", c.is_feasible()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// One benchmark measurement: wall time per unit of work for a method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: String,
    pub method: String,
    /// Seconds per solve (simplex) or per recursive iteration (adversarial).
    pub seconds: f64,
    pub objective: f64,
}

pub fn write_bench_csv(rows: &[BenchRow], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "case,method,seconds,objective")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.case, r.method, fmt_g10(r.seconds), fmt_g10(r.objective))?;
    }
    Ok(())
}
