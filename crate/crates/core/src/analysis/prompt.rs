//! Prompt manager: renders the engine prompt from the selected family's
//! tool catalog, a digest of recent turns, and the user's description.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::task::{TaskFamily, TaskKind};
use crate::context::Context;
use crate::execution::ToolDescriptor;
use crate::types::{ErrorReport, Modality};

/// How many recent turns the context digest covers.
pub const DEFAULT_DIGEST_TURNS: usize = 8;

pub const SYSTEM_PREAMBLE: &str = "You are the task analyst of an audio assistant. \
Pick exactly one tool from the catalog that fulfils the user's request, fill in its \
parameters, and point at the input resources it needs. Resources are referenced as \
\"latest\", \"turn:<k>\", \"upload:<position>\" or \"id:<resource id>\".";

pub const REPLY_INSTRUCTION: &str = "Answer with a single JSON object and nothing else: \
{\"tool_id\": string, \"params\": object, \"input_refs\": [string]}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub tool_id: String,
    pub task: TaskKind,
    pub input_sig: Vec<Modality>,
    pub output_sig: Vec<Modality>,
    pub priority: i64,
    pub description: String,
}

impl From<&ToolDescriptor> for CatalogEntry {
    fn from(t: &ToolDescriptor) -> Self {
        CatalogEntry {
            tool_id: t.id.clone(),
            task: t.task,
            input_sig: t.input_sig.clone(),
            output_sig: t.output_sig.clone(),
            priority: t.priority,
            description: t.description.clone(),
        }
    }
}

fn sig(m: &[Modality]) -> String {
    m.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+")
}

impl CatalogEntry {
    pub fn line(&self) -> String {
        format!(
            "- {} [{}] {} -> {}: {}",
            self.tool_id,
            self.task,
            sig(&self.input_sig),
            sig(&self.output_sig),
            self.description
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub family: TaskFamily,
    pub system_preamble: String,
    pub catalog: Vec<CatalogEntry>,
    pub context_digest: Vec<String>,
    pub description: String,
    /// Modalities attached to the current query.
    pub attached: Vec<Modality>,
    /// Set on a retry after an invalid engine reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction: Option<String>,
}

impl PromptBundle {
    pub fn text(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.system_preamble);
        let _ = write!(s, "\n\nTask family: {}\nTools:\n", self.family);
        for e in &self.catalog {
            s.push_str(&e.line());
            s.push('\n');
        }
        s.push_str("\nConversation so far:\n");
        if self.context_digest.is_empty() {
            s.push_str("(none)\n");
        }
        for line in &self.context_digest {
            s.push_str(line);
            s.push('\n');
        }
        if !self.attached.is_empty() {
            let _ = writeln!(s, "\nAttached with this request: {}", sig(&self.attached));
        }
        let _ = write!(s, "\nUser request: {}\n\n{}", self.description, REPLY_INSTRUCTION);
        if let Some(c) = &self.correction {
            let _ = write!(s, "\n\nYour previous answer was rejected: {c}");
        }
        s
    }
}

/// One line per recent turn, oldest first.
pub fn context_digest(context: &Context, depth: usize) -> Vec<String> {
    let skip = context.turns.len().saturating_sub(depth);
    context.turns[skip..]
        .iter()
        .map(|t| {
            let desc = t.query.description.as_text().unwrap_or("(audio)");
            let action = match (&t.args, &t.error) {
                (_, Some(e)) => format!("error {}", e.code),
                (Some(a), None) => a.tool_id.clone(),
                (None, None) => "chat".to_string(),
            };
            let outs = t
                .tool_outputs()
                .map(|r| format!("{}:{}", r.modality, r.id))
                .chain(t.uploads().map(|r| format!("upload {}:{}", r.modality, r.id)))
                .collect::<Vec<_>>();
            let mut line = format!("turn {}: \"{}\" -> {}", t.index, desc, action);
            if !outs.is_empty() {
                let _ = write!(line, " [{}]", outs.join(", "));
            }
            line
        })
        .collect()
}

pub fn render_prompt(
    family: TaskFamily,
    catalog: &[&ToolDescriptor],
    description: &str,
    context: &Context,
    attached: &[Modality],
    digest_turns: usize,
) -> Result<PromptBundle, ErrorReport> {
    if catalog.is_empty() {
        return Err(ErrorReport::unsupported(format!(
            "no tool is available for {family} requests"
        ))
        .with_suggestion(format!(
            "Supported task families: {}.",
            TaskFamily::supported_list()
        )));
    }
    Ok(PromptBundle {
        family,
        system_preamble: SYSTEM_PREAMBLE.to_string(),
        catalog: catalog.iter().map(|t| CatalogEntry::from(*t)).collect(),
        context_digest: context_digest(context, digest_turns),
        description: description.to_string(),
        attached: attached.to_vec(),
        correction: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution::Registry;
    use crate::types::ErrorCode;

    fn catalog(reg: &Registry, family: TaskFamily) -> Vec<&ToolDescriptor> {
        reg.enabled_in_family(family).collect()
    }

    #[test]
    fn catalog_section_has_one_line_per_tool() {
        let reg = Registry::builtin();
        let tools = catalog(&reg, TaskFamily::AudioToText);
        let b = render_prompt(
            TaskFamily::AudioToText,
            &tools[..2],
            "transcribe it",
            &Context::new("s"),
            &[],
            DEFAULT_DIGEST_TURNS,
        )
        .unwrap();
        let text = b.text();
        let lines = text.lines().filter(|l| l.starts_with("- ")).count();
        assert_eq!(lines, 2);
        assert!(text.contains(REPLY_INSTRUCTION));
    }

    #[test]
    fn rendering_is_deterministic() {
        let reg = Registry::builtin();
        let tools = catalog(&reg, TaskFamily::AudioToAudio);
        let r = || {
            render_prompt(
                TaskFamily::AudioToAudio,
                &tools,
                "denoise it",
                &Context::new("s"),
                &[Modality::Audio],
                8,
            )
            .unwrap()
            .text()
        };
        assert_eq!(r().as_bytes(), r().as_bytes());
    }

    #[test]
    fn empty_catalog_is_unsupported() {
        let e = render_prompt(TaskFamily::ScoreToAudio, &[], "sing", &Context::new("s"), &[], 8)
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::UnsupportedTask);
        assert!(e.suggestion.contains("Score-to-Audio"));
    }
}
