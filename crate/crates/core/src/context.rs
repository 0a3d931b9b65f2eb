//! Turn history and reference resolution against it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::{ErrorReport, Modality, Resource, ResourceId, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub session_id: String,
    #[serde(default)]
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("turn index {got} does not follow the last turn (expected {expected})")]
    IndexGap { expected: usize, got: usize },
}

impl Context {
    pub fn new(session_id: impl Into<String>) -> Self {
        Context {
            session_id: session_id.into(),
            turns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn next_index(&self) -> usize {
        self.turns.len() + 1
    }

    pub fn turn(&self, index: usize) -> Option<&Turn> {
        index.checked_sub(1).and_then(|i| self.turns.get(i))
    }

    /// Appends a turn. Indices must stay contiguous from 1.
    pub fn append_turn(&mut self, turn: Turn) -> Result<(), ContextError> {
        let expected = self.next_index();
        if turn.index != expected {
            return Err(ContextError::IndexGap {
                expected,
                got: turn.index,
            });
        }
        self.turns.push(turn);
        Ok(())
    }

    /// Builder-style variant of [`Context::append_turn`].
    pub fn with_turn(mut self, turn: Turn) -> Result<Self, ContextError> {
        self.append_turn(turn)?;
        Ok(self)
    }
}

/// How a query points at a resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceExpr {
    Explicit(ResourceId),
    /// Most recent resource of the required modality.
    Latest,
    FromTurn(usize),
    /// Zero-based position among uploads.
    Uploaded(usize),
}

impl fmt::Display for ReferenceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceExpr::Explicit(id) => write!(f, "id:{id}"),
            ReferenceExpr::Latest => f.write_str("latest"),
            ReferenceExpr::FromTurn(k) => write!(f, "turn:{k}"),
            ReferenceExpr::Uploaded(p) => write!(f, "upload:{p}"),
        }
    }
}

impl FromStr for ReferenceExpr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("latest") {
            return Ok(ReferenceExpr::Latest);
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("unrecognized reference '{s}'"))?;
        match kind {
            "id" if !rest.is_empty() => Ok(ReferenceExpr::Explicit(ResourceId(rest.to_string()))),
            "turn" => rest
                .parse()
                .ok()
                .filter(|&k: &usize| k >= 1)
                .map(ReferenceExpr::FromTurn)
                .ok_or_else(|| format!("bad turn number in '{s}'")),
            "upload" => rest
                .parse()
                .map(ReferenceExpr::Uploaded)
                .map_err(|_| format!("bad upload position in '{s}'")),
            _ => Err(format!("unrecognized reference '{s}'")),
        }
    }
}

/// Everything a reference may point at while a turn is being processed:
/// the prior context, this turn's uploads, and outputs of chain stages that
/// already ran in this turn.
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    pub context: &'a Context,
    pub current_index: usize,
    pub current_uploads: &'a [Resource],
    pub stage_outputs: &'a [Resource],
}

impl<'a> Scope<'a> {
    pub fn of(context: &'a Context) -> Self {
        Scope {
            context,
            current_index: context.next_index(),
            current_uploads: &[],
            stage_outputs: &[],
        }
    }

    pub fn with_uploads(mut self, uploads: &'a [Resource]) -> Self {
        self.current_uploads = uploads;
        self
    }

    pub fn with_stage_outputs(mut self, outputs: &'a [Resource]) -> Self {
        self.stage_outputs = outputs;
        self
    }

    /// Every reachable resource, most recent first. Within a turn, tool
    /// outputs come before uploads.
    pub fn most_recent_first(&self) -> impl Iterator<Item = &'a Resource> + '_ {
        self.stage_outputs
            .iter()
            .rev()
            .chain(self.current_uploads.iter().rev())
            .chain(
                self.context
                    .turns
                    .iter()
                    .rev()
                    .flat_map(|t| t.tool_outputs().rev().chain(t.uploads().rev())),
            )
    }

    fn in_turn(&self, k: usize) -> Option<Vec<&'a Resource>> {
        if k == self.current_index {
            return Some(
                self.stage_outputs
                    .iter()
                    .rev()
                    .chain(self.current_uploads.iter().rev())
                    .collect(),
            );
        }
        let turn = self.context.turn(k)?;
        Some(turn.tool_outputs().rev().chain(turn.uploads().rev()).collect())
    }

    fn uploads_in_order(&self) -> Vec<&'a Resource> {
        if !self.current_uploads.is_empty() {
            return self.current_uploads.iter().collect();
        }
        self.context.turns.iter().flat_map(|t| t.uploads()).collect()
    }
}

fn check_modality(r: &Resource, required: Modality) -> Result<Resource, ErrorReport> {
    if r.modality == required {
        Ok(r.clone())
    } else {
        Err(ErrorReport::bad_format(format!(
            "resource {} is {}, but {} is required here",
            r.id, r.modality, required
        )))
    }
}

pub fn resolve_reference(
    expr: &ReferenceExpr,
    scope: &Scope<'_>,
    required: Modality,
) -> Result<Resource, ErrorReport> {
    let noun = required.as_str().to_lowercase();
    match expr {
        ReferenceExpr::Explicit(id) => {
            let r = scope
                .most_recent_first()
                .find(|r| &r.id == id)
                .ok_or_else(|| ErrorReport::missing(format!("no resource with id '{id}' in this conversation")))?;
            check_modality(r, required)
        }
        ReferenceExpr::Latest => scope
            .most_recent_first()
            .find(|r| r.modality == required)
            .cloned()
            .ok_or_else(|| {
                ErrorReport::missing(format!("there is no {noun} in this conversation yet"))
                    .with_suggestion(format!(
                        "Upload a {noun} file or ask me to generate one first."
                    ))
            }),
        ReferenceExpr::FromTurn(k) => {
            let in_turn = scope.in_turn(*k).ok_or_else(|| {
                ErrorReport::missing(format!("turn {k} does not exist"))
                    .with_suggestion(format!(
                        "Refer to a turn between 1 and {}.",
                        scope.context.len()
                    ))
            })?;
            in_turn
                .into_iter()
                .find(|r| r.modality == required)
                .cloned()
                .ok_or_else(|| ErrorReport::missing(format!("turn {k} produced no {noun}")))
        }
        ReferenceExpr::Uploaded(p) => {
            let uploads = scope.uploads_in_order();
            let r = uploads.get(*p).ok_or_else(|| {
                ErrorReport::missing(format!(
                    "upload #{} was requested but only {} file(s) were uploaded",
                    p + 1,
                    uploads.len()
                ))
            })?;
            check_modality(r, required)
        }
    }
}
