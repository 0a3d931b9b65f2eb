//! Seed expansion and routing consistency.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{request_with_uploads, EvalError, Target};
use crate::analysis::{DialogueEngine, TaskKind};
use crate::types::{ErrorReport, Turn};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPrompt {
    pub prompt: String,
    pub task_name: TaskKind,
    /// Files sent with every probe of this seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uploads: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub seed: SeedPrompt,
    pub paraphrases: Vec<String>,
}

impl CorpusEntry {
    /// The seed prompt followed by its paraphrases.
    pub fn probes(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.seed.prompt.as_str()).chain(self.paraphrases.iter().map(String::as_str))
    }
}

pub fn parse_seeds(raw: &str) -> Result<Vec<SeedPrompt>, EvalError> {
    serde_json::from_str(raw).map_err(|e| EvalError::Invalid(format!("seeds: {e}")))
}

pub fn expand_seeds(
    seeds: &[SeedPrompt],
    k: usize,
    engine: &dyn DialogueEngine,
) -> Result<Vec<CorpusEntry>, ErrorReport> {
    if k == 0 {
        return Err(ErrorReport::bad_format("k must be at least 1"));
    }
    seeds
        .iter()
        .map(|s| {
            Ok(CorpusEntry {
                seed: s.clone(),
                paraphrases: engine.paraphrase(&s.prompt, k)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskAccuracy {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub total: usize,
    pub correct: usize,
    pub overall_accuracy: f64,
    pub per_task: BTreeMap<String, TaskAccuracy>,
    /// "expected -> routed" with counts; only misses are listed.
    pub confusions: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

/// What a turn was routed to: the first stage's task, `Chat`, or the error.
pub fn routed_label(turn: &Turn) -> (Option<TaskKind>, String) {
    match (&turn.args, &turn.error) {
        (Some(a), _) => (Some(a.task), a.task.to_string()),
        (None, Some(e)) => (None, format!("Error({})", e.code)),
        (None, None) => (None, "Chat".to_string()),
    }
}

fn ratio(c: usize, t: usize) -> f64 {
    if t == 0 {
        0.0
    } else {
        c as f64 / t as f64
    }
}

/// Sends every probe in a fresh session and compares the routed task with
/// the seed's label. Stops early if the target becomes unreachable.
pub fn run_consistency(corpus: &[CorpusEntry], target: &dyn Target, base: &Path) -> RoutingReport {
    let mut report = RoutingReport::default();
    'outer: for entry in corpus {
        let expected = entry.seed.task_name;
        for probe in entry.probes() {
            let outcome = request_with_uploads(probe, &entry.seed.uploads, base)
                .and_then(|req| target.new_session().and_then(|s| target.post(&s, req)));
            let turn = match outcome {
                Ok(t) => t,
                Err(EvalError::Invalid(e)) => {
                    report.aborted = Some(e);
                    break 'outer;
                }
                Err(e) => {
                    report.aborted = Some(e.to_string());
                    break 'outer;
                }
            };
            let (routed, label) = routed_label(&turn);
            let ok = routed.is_some_and(|r| r.same_task(expected));
            let t = report.per_task.entry(expected.to_string()).or_default();
            t.total += 1;
            report.total += 1;
            if ok {
                t.correct += 1;
                report.correct += 1;
            } else {
                *report.confusions.entry(format!("{expected} -> {label}")).or_default() += 1;
            }
        }
    }
    for t in report.per_task.values_mut() {
        t.accuracy = ratio(t.correct, t.total);
    }
    report.overall_accuracy = ratio(report.correct, report.total);
    report
}
