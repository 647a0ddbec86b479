use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_json;
use crate::error::{KacError, Result};
use crate::kernels::TransitionKernel;
use crate::measures::RevuzMeasure;
use crate::moments::{OrderMode, Terminal};
use crate::montecarlo::KillingDetection;
use crate::quadrature::QuadratureSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// A run file: named kernels and measures, tasks over them, and optional
/// simulation, output and quadrature settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub kernels: BTreeMap<String, TransitionKernel>,
    #[serde(default)]
    pub measures: BTreeMap<String, RevuzMeasure>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum TaskSpec {
    KernelCheck(KernelCheckTask),
    Kato(KatoTask),
    Moment(MomentTask),
    McCompare(MomentTask),
    ExpBound(ExpBoundTask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// All built-in families when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatoTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kernel: String,
    pub measure: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kernel: String,
    /// Measure names; with `k` a single name repeated `k` times.
    pub measures: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Identical-power when every measure is the same, permutation-sum
    /// otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<OrderMode>,
    pub x: f64,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Terminal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub killed_domain: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

fn default_k_max() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpBoundTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kernel: String,
    pub measure: String,
    #[serde(default)]
    pub x: f64,
    pub t_values: Vec<f64>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalTimeKind {
    #[default]
    EpsilonOccupation,
    Downcrossing,
}

fn default_dt() -> f64 {
    1e-4
}

fn default_epsilon() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub seed: u64,
    pub n_paths: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub method: LocalTimeKind,
    #[serde(default)]
    pub killing: KillingDetection,
    #[serde(default)]
    pub stream_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn default_verbosity() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    /// Standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default = "default_verbosity")]
    pub verbosity: u8,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            format: Format::Csv,
            path: None,
            verbosity: default_verbosity(),
        }
    }
}

impl TaskSpec {
    pub fn op(&self) -> &'static str {
        match self {
            TaskSpec::KernelCheck(_) => "kernel-check",
            TaskSpec::Kato(_) => "kato",
            TaskSpec::Moment(_) => "moment",
            TaskSpec::McCompare(_) => "mc-compare",
            TaskSpec::ExpBound(_) => "exp-bound",
        }
    }

    fn explicit_id(&self) -> Option<&str> {
        match self {
            TaskSpec::KernelCheck(t) => t.id.as_deref(),
            TaskSpec::Kato(t) => t.id.as_deref(),
            TaskSpec::Moment(t) | TaskSpec::McCompare(t) => t.id.as_deref(),
            TaskSpec::ExpBound(t) => t.id.as_deref(),
        }
    }

    /// The declared id, or `task<N>` by 1-based position.
    pub fn id(&self, index: usize) -> String {
        self.explicit_id()
            .map(str::to_owned)
            .unwrap_or_else(|| format!("task{}", index + 1))
    }

    fn kernel_refs(&self) -> Vec<&str> {
        match self {
            TaskSpec::KernelCheck(t) => t.kernel.iter().map(String::as_str).collect(),
            TaskSpec::Kato(t) => vec![&t.kernel],
            TaskSpec::Moment(t) | TaskSpec::McCompare(t) => vec![&t.kernel],
            TaskSpec::ExpBound(t) => vec![&t.kernel],
        }
    }

    fn measure_refs(&self) -> Vec<&str> {
        match self {
            TaskSpec::KernelCheck(_) => Vec::new(),
            TaskSpec::Kato(t) => vec![&t.measure],
            TaskSpec::Moment(t) | TaskSpec::McCompare(t) => t.measures.iter().map(String::as_str).collect(),
            TaskSpec::ExpBound(t) => vec![&t.measure],
        }
    }
}

/// 1-based line of the first quoted occurrence of `name` at or after the
/// `"tasks"` key, falling back to the whole text.
fn line_of(text: &str, name: &str) -> Option<usize> {
    let needle = format!("\"{name}\"");
    let start = text.find("\"tasks\"").unwrap_or(0);
    let pos = text[start..].find(&needle).map(|p| p + start).or_else(|| text.find(&needle))?;
    Some(text[..pos].matches('\n').count() + 1)
}

fn config_error(line: Option<usize>, message: String) -> KacError {
    KacError::Config { line, message }
}

impl RunConfig {
    /// Parses and validates a run file.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| config_error(Some(e.line()), e.to_string()))?;
        cfg.validate_with(Some(text))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(None)
    }

    fn validate_with(&self, text: Option<&str>) -> Result<()> {
        let locate = |name: &str| text.and_then(|t| line_of(t, name));
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(
                text.and_then(|t| line_of(t, "schema_version")),
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        for (name, k) in &self.kernels {
            TransitionKernel::new(k.family())
                .map_err(|e| config_error(locate(name), format!("kernel \"{name}\": {e}")))?;
        }
        let mut ids = std::collections::HashSet::new();
        for (i, task) in self.tasks.iter().enumerate() {
            let id = task.id(i);
            if !ids.insert(id.clone()) {
                return Err(config_error(locate(&id), format!("duplicate task id \"{id}\"")));
            }
            for k in task.kernel_refs() {
                if !self.kernels.contains_key(k) {
                    return Err(config_error(locate(k), format!("task \"{id}\" references undeclared kernel \"{k}\"")));
                }
            }
            for m in task.measure_refs() {
                if !self.measures.contains_key(m) {
                    return Err(config_error(locate(m), format!("task \"{id}\" references undeclared measure \"{m}\"")));
                }
            }
            self.validate_task(task, &id)
                .map_err(|msg| config_error(locate(&id), format!("task \"{id}\": {msg}")))?;
        }
        if let Some(mc) = &self.mc {
            if mc.n_paths < 2 || !(mc.dt > 0.0) || !(mc.epsilon > 0.0) {
                return Err(config_error(
                    text.and_then(|t| line_of(t, "mc")),
                    "mc block needs n_paths >= 2 and positive dt and epsilon".into(),
                ));
            }
        }
        Ok(())
    }

    fn validate_task(&self, task: &TaskSpec, _id: &str) -> std::result::Result<(), String> {
        match task {
            TaskSpec::Moment(m) | TaskSpec::McCompare(m) => {
                if m.measures.is_empty() {
                    return Err("at least one measure is required".into());
                }
                if let Some(k) = m.k {
                    if m.measures.len() != 1 || k == 0 {
                        return Err("k needs exactly one measure and k >= 1".into());
                    }
                }
                if !(m.t > 0.0) {
                    return Err(format!("horizon must be positive, got {}", m.t));
                }
                if let Some([l, u]) = m.killed_domain {
                    if !(l < u) {
                        return Err(format!("killed domain ({l}, {u}) is empty"));
                    }
                }
                if matches!(task, TaskSpec::McCompare(_)) {
                    if self.mc.is_none() {
                        return Err("mc-compare needs an mc block".into());
                    }
                    if m.mode == Some(OrderMode::Ordered) && m.measures.len() > 1 {
                        return Err("ordered integrals of several measures have no simulation counterpart".into());
                    }
                }
            }
            TaskSpec::ExpBound(e) => {
                if e.t_values.is_empty() || e.t_values.iter().any(|t| !(*t > 0.0)) {
                    return Err("t_values must be positive and non-empty".into());
                }
            }
            TaskSpec::Kato(_) | TaskSpec::KernelCheck(_) => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form; stable under re-parsing the echo.
    pub fn digest(&self) -> String {
        sha256_json(self)
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
  "schema_version": 1,
  "kernels": { "bm": { "family": "brownian" } },
  "measures": { "d0": { "atoms": [ { "location": 0, "weight": 1 } ] } },
  "tasks": [
    { "op": "moment", "kernel": "bm", "measures": ["d0"], "k": 2, "x": 0, "t": 1 },
    { "op": "kato", "kernel": "bm", "measure": "mu9" }
  ]
}"#;

    #[test]
    fn unknown_measure_is_reported_with_its_line() {
        match RunConfig::parse(SAMPLE) {
            Err(KacError::Config { line, message }) => {
                assert_eq!(line, Some(7));
                assert!(message.contains("mu9"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let text = SAMPLE.replace("\"k\": 2", "\"kk\": 2");
        assert!(matches!(RunConfig::parse(&text), Err(KacError::Config { line: Some(_), .. })));
    }

    #[test]
    fn ids_default_to_position() {
        let cfg: RunConfig = serde_json::from_str(SAMPLE).unwrap();
        assert_eq!(cfg.tasks[1].id(1), "task2");
        assert_eq!(cfg.tasks[0].op(), "moment");
    }
}
