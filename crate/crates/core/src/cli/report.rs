use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{Format, RunConfig};
use crate::error::{KacError, Result};
use crate::montecarlo::Verdict;

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 10] = [
    "task_id",
    "op",
    "verdict",
    "engine_value",
    "engine_error",
    "mc_mean",
    "mc_std_error",
    "z_score",
    "wall_time_s",
    "detail",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task_id: String,
    pub op: String,
    pub verdict: Verdict,
    pub engine_value: Option<f64>,
    pub engine_error: Option<f64>,
    pub mc_mean: Option<f64>,
    pub mc_std_error: Option<f64>,
    pub z_score: Option<f64>,
    pub wall_time_s: f64,
    pub detail: String,
}

impl ReportRow {
    pub fn new(task_id: String, op: &str) -> Self {
        ReportRow {
            task_id,
            op: op.to_owned(),
            verdict: Verdict::NotApplicable,
            engine_value: None,
            engine_error: None,
            mc_mean: None,
            mc_std_error: None,
            z_score: None,
            wall_time_s: 0.0,
            detail: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub config_digest: String,
    /// The configuration that produced the rows, after command-line
    /// overrides.
    pub config: RunConfig,
    pub rows: Vec<ReportRow>,
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        Some(v) => v.to_string(),
        None => String::new(),
    }
}

fn quoted(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

impl Report {
    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Fail)
    }

    /// CSV: three `#` header lines (version, digest, echoed configuration as
    /// one-line JSON), the column line, then one line per task.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let echo = serde_json::to_string(&self.config).map_err(|e| KacError::Io(e.to_string()))?;
        writeln!(w, "# tool_version={}", self.tool_version)?;
        writeln!(w, "# config_digest={}", self.config_digest)?;
        writeln!(w, "# config={echo}")?;
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                quoted(&r.task_id),
                r.op,
                r.verdict.as_str(),
                num(r.engine_value),
                num(r.engine_error),
                num(r.mc_mean),
                num(r.mc_std_error),
                num(r.z_score),
                num(Some(r.wall_time_s)),
                quoted(&r.detail),
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| KacError::Io(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn write<W: Write>(&self, format: Format, w: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::Json => self.write_json(w),
        }
    }
}

/// Recovers the echoed configuration from a report in either format.
pub fn echoed_config(report_text: &str) -> Result<RunConfig> {
    if let Some(line) = report_text.lines().find_map(|l| l.strip_prefix("# config=")) {
        return RunConfig::parse(line);
    }
    let report: Report =
        serde_json::from_str(report_text).map_err(|e| KacError::Config { line: Some(e.line()), message: e.to_string() })?;
    report.config.validate()?;
    Ok(report.config)
}
