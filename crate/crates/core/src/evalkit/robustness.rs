//! Scripted multi-turn scenarios with per-step expectations.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::{request_with_uploads, EvalError, Target};
use crate::analysis::TaskKind;
use crate::response::AttachmentKind;
use crate::types::{ErrorCode, Turn};

pub const SHIPPED_SCENARIOS: &[(&str, &str)] = &[
    ("long_chain.json", include_str!("../../data/scenarios/long_chain.json")),
    ("unsupported.json", include_str!("../../data/scenarios/unsupported.json")),
    ("tool_error.json", include_str!("../../data/scenarios/tool_error.json")),
    ("context_break.json", include_str!("../../data/scenarios/context_break.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioCategory {
    LongChain,
    Unsupported,
    ToolError,
    ContextBreak,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

/// Checks on one turn. A step without `error_code` expects no error.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<ErrorCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attachment_kinds: Option<Vec<AttachmentKind>>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub text_contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_equals: Option<String>,
    /// When true, the turn must not have produced any tool output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_outputs: Option<bool>,
}

impl Expectation {
    fn is_empty(&self) -> bool {
        self.task.is_none()
            && self.error_code.is_none()
            && self.attachment_kinds.is_none()
            && self.text_contains.is_empty()
            && self.text_equals.is_none()
            && self.no_outputs.is_none()
    }

    /// Returns one message per unmet expectation.
    pub fn check(&self, turn: &Turn) -> Vec<String> {
        let mut f = Vec::new();
        let code = turn.error.as_ref().map(|e| e.code);
        if code != self.error_code {
            f.push(format!(
                "error: expected {}, got {}",
                self.error_code.map_or("none".into(), |c| c.to_string()),
                turn.error.as_ref().map_or("none".into(), |e| e.to_string())
            ));
        }
        if let Some(e) = &turn.error {
            if e.suggestion.trim().is_empty() {
                f.push("error has an empty suggestion".into());
            }
        }
        if let Some(t) = self.task {
            let got = turn.args.as_ref().map(|a| a.task);
            if !got.is_some_and(|g| g.same_task(t)) {
                f.push(format!("task: expected {t}, got {got:?}"));
            }
        }
        if let Some(kinds) = &self.attachment_kinds {
            let want: BTreeSet<String> = kinds.iter().map(|k| format!("{k:?}")).collect();
            let got: BTreeSet<String> = turn.attachments.iter().map(|a| format!("{:?}", a.kind)).collect();
            if want != got {
                f.push(format!("attachments: expected {want:?}, got {got:?}"));
            }
        }
        for s in &self.text_contains {
            if !turn.response_text.contains(s.as_str()) {
                f.push(format!("text does not contain {s:?}: {:?}", turn.response_text));
            }
        }
        if let Some(s) = &self.text_equals {
            if &turn.response_text != s {
                f.push(format!("text: expected {s:?}, got {:?}", turn.response_text));
            }
        }
        if self.no_outputs == Some(true) && !turn.outputs.is_empty() {
            f.push(format!("expected no tool outputs, got {}", turn.outputs.len()));
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub query: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uploads: Vec<String>,
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default)]
    pub name: String,
    pub category: ScenarioCategory,
    pub steps: Vec<ScenarioStep>,
}

impl ScenarioScript {
    pub fn parse(raw: &str, name: &str) -> Result<Self, EvalError> {
        let mut s: ScenarioScript =
            serde_json::from_str(raw).map_err(|e| EvalError::Invalid(format!("{name}: {e}")))?;
        if s.name.is_empty() {
            s.name = name.to_string();
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.steps.is_empty() {
            return Err(EvalError::Invalid(format!("{}: no steps", self.name)));
        }
        for (i, st) in self.steps.iter().enumerate() {
            if st.expect.is_empty() {
                return Err(EvalError::Invalid(format!("{}: step {} has no expectation", self.name, i + 1)));
            }
        }
        Ok(())
    }
}

pub fn shipped_scripts() -> Vec<ScenarioScript> {
    SHIPPED_SCENARIOS
        .iter()
        .map(|(n, raw)| ScenarioScript::parse(raw, n).expect("shipped scenario is valid"))
        .collect()
}

/// Every `*.json` in `dir`, sorted by file name.
pub fn load_scripts(dir: &Path) -> Result<Vec<ScenarioScript>, EvalError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| EvalError::Invalid(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let raw = std::fs::read_to_string(p).map_err(|e| EvalError::Invalid(format!("{}: {e}", p.display())))?;
            ScenarioScript::parse(&raw, &p.file_name().unwrap_or_default().to_string_lossy())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: usize,
    pub query: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptResult {
    pub name: String,
    pub category: ScenarioCategory,
    pub passed: bool,
    pub steps: Vec<StepResult>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub passed: usize,
    pub failed: usize,
    pub scripts: Vec<ScriptResult>,
}

/// Runs each script in its own fresh session.
pub fn run_robustness(scripts: &[ScenarioScript], target: &dyn Target, base: &Path) -> Result<RobustnessReport, EvalError> {
    let mut report = RobustnessReport::default();
    for s in scripts {
        s.validate()?;
        let session = target.new_session()?;
        let mut steps = Vec::new();
        for (i, st) in s.steps.iter().enumerate() {
            let req = request_with_uploads(&st.query, &st.uploads, base)?;
            let turn = target.post(&session, req)?;
            let failures = st.expect.check(&turn);
            steps.push(StepResult {
                step: i + 1,
                query: st.query.clone(),
                passed: failures.is_empty(),
                failures,
            });
        }
        let passed = steps.iter().all(|s| s.passed);
        if passed {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
        report.scripts.push(ScriptResult {
            name: s.name.clone(),
            category: s.category,
            passed,
            steps,
        });
    }
    Ok(report)
}
