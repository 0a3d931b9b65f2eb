//! Dialogue engines: the deterministic rule engine and an adapter for an
//! external chat-completion endpoint.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::intent::{Grammar, Params};
use super::paraphrase::builtin_paraphrases;
use super::prompt::PromptBundle;
use super::task::TaskFamily;
use crate::types::ErrorReport;

pub const ENGINE_URL_VAR: &str = "ORCH_ENGINE_URL";
pub const ENGINE_KEY_VAR: &str = "ORCH_ENGINE_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for EngineSettings {
    /// Greedy decoding with a 2048-token budget.
    fn default() -> Self {
        EngineSettings {
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

/// Constrained reply: `{"tool_id", "params", "input_refs"}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EngineReply {
    pub tool_id: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub input_refs: Vec<String>,
}

pub trait DialogueEngine: Send + Sync {
    fn name(&self) -> &str;

    fn settings(&self) -> EngineSettings;

    /// Picks a tool from the prompt's catalog.
    fn select(&self, prompt: &PromptBundle) -> Result<EngineReply, ErrorReport>;

    /// `n` distinct rewordings of `prompt`.
    fn paraphrase(&self, prompt: &str, n: usize) -> Result<Vec<String>, ErrorReport>;

    /// Reply for a turn that needs no tool.
    fn chat(&self, description: &str) -> Result<String, ErrorReport> {
        let _ = description;
        Ok(chat_reply())
    }
}

pub fn chat_reply() -> String {
    format!(
        "I'm an audio assistant. I can work with speech, music, sound and talking heads. \
         Supported task families: {}.",
        TaskFamily::supported_list()
    )
}

/// Deterministic engine driven by the keyword grammar.
#[derive(Debug, Clone)]
pub struct RuleEngine {
    grammar: Arc<Grammar>,
}

impl Default for RuleEngine {
    fn default() -> Self {
        RuleEngine {
            grammar: Arc::new(Grammar::builtin()),
        }
    }
}

impl RuleEngine {
    pub fn new(grammar: Arc<Grammar>) -> Self {
        RuleEngine { grammar }
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }
}

impl DialogueEngine for RuleEngine {
    fn name(&self) -> &str {
        "builtin"
    }

    fn settings(&self) -> EngineSettings {
        EngineSettings::default()
    }

    fn select(&self, prompt: &PromptBundle) -> Result<EngineReply, ErrorReport> {
        let intent = self
            .grammar
            .parse_with(&prompt.description, &prompt.attached)
            .first()
            .clone();
        let best = |pred: &dyn Fn(&super::prompt::CatalogEntry) -> bool| {
            prompt
                .catalog
                .iter()
                .enumerate()
                .filter(|(_, e)| pred(e))
                // highest priority, earliest registration on ties
                .max_by_key(|(i, e)| (e.priority, std::cmp::Reverse(*i)))
                .map(|(_, e)| e)
        };
        let chosen = match intent.task {
            Some(k) => best(&|e| e.task.same_task(k)),
            None => None,
        };
        // A family with a single task kind needs no keyword match.
        let chosen = chosen.or_else(|| {
            let first = prompt.catalog.first()?.task;
            prompt
                .catalog
                .iter()
                .all(|e| e.task.same_task(first))
                .then(|| best(&|_| true))
                .flatten()
        });
        let entry = chosen.ok_or_else(|| {
            ErrorReport::unsupported(format!(
                "no {} tool handles \"{}\"",
                prompt.family, prompt.description
            ))
            .with_suggestion(format!(
                "Supported task families: {}.",
                TaskFamily::supported_list()
            ))
        })?;
        Ok(EngineReply {
            tool_id: entry.tool_id.clone(),
            params: intent.params,
            input_refs: intent.refs.iter().map(ToString::to_string).collect(),
        })
    }

    fn paraphrase(&self, prompt: &str, n: usize) -> Result<Vec<String>, ErrorReport> {
        Ok(builtin_paraphrases(&self.grammar, prompt, n))
    }
}

/// Adapter for an OpenAI-style `chat/completions` endpoint.
pub struct ExternalEngine {
    url: String,
    key: Option<String>,
    model: String,
    settings: EngineSettings,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for ExternalEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalEngine")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("settings", &self.settings)
            .finish()
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl ExternalEngine {
    pub fn new(url: impl Into<String>, key: Option<String>) -> Result<Self, ErrorReport> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ErrorReport::engine_unavailable(format!("HTTP client: {e}")))?;
        Ok(ExternalEngine {
            url: url.into(),
            key,
            model: std::env::var("ORCH_ENGINE_MODEL").unwrap_or_else(|_| "gpt-3.5-turbo".into()),
            settings: EngineSettings::default(),
            client,
        })
    }

    /// Reads `ORCH_ENGINE_URL` / `ORCH_ENGINE_KEY`.
    pub fn from_env() -> Result<Self, ErrorReport> {
        let url = std::env::var(ENGINE_URL_VAR)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .ok_or_else(|| {
                ErrorReport::engine_unavailable(format!(
                    "the external engine needs {ENGINE_URL_VAR} to be set"
                ))
            })?;
        Self::new(url, std::env::var(ENGINE_KEY_VAR).ok())
    }

    fn complete(&self, system: &str, user: &str) -> Result<String, ErrorReport> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": self.settings.temperature,
            "max_tokens": self.settings.max_tokens,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let resp = req
            .send()
            .map_err(|e| ErrorReport::engine_unavailable(format!("engine request failed: {e}")))?;
        if !resp.status().is_success() {
            return Err(ErrorReport::engine_unavailable(format!(
                "engine answered HTTP {}",
                resp.status()
            )));
        }
        let c: Completion = resp
            .json()
            .map_err(|e| ErrorReport::engine_unavailable(format!("unreadable engine reply: {e}")))?;
        c.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ErrorReport::engine_unavailable("engine reply had no choices"))
    }
}

/// Pulls the first JSON object out of a free-form completion.
pub fn extract_reply(content: &str) -> Option<EngineReply> {
    let start = content.find('{')?;
    let end = content.rfind('}')?;
    serde_json::from_str(content.get(start..=end)?).ok()
}

impl DialogueEngine for ExternalEngine {
    fn name(&self) -> &str {
        "external"
    }

    fn settings(&self) -> EngineSettings {
        self.settings
    }

    fn select(&self, prompt: &PromptBundle) -> Result<EngineReply, ErrorReport> {
        let content = self.complete(&prompt.system_preamble, &prompt.text())?;
        // An unparseable reply is returned as an empty tool id so the caller's
        // validation and retry path handles it.
        Ok(extract_reply(&content).unwrap_or_default())
    }

    fn paraphrase(&self, prompt: &str, n: usize) -> Result<Vec<String>, ErrorReport> {
        let content = self.complete(
            "Rewrite user requests with the same meaning but different wording.",
            &format!(
                "Give {n} different rewordings of the request below, one per line, \
                 without numbering.\n\nRequest: {prompt}"
            ),
        )?;
        let mut out: Vec<String> = Vec::new();
        for line in content.lines() {
            let l = line.trim().trim_start_matches(['-', '*', ' ']).trim();
            if !l.is_empty() && l != prompt && !out.iter().any(|o| o == l) {
                out.push(l.to_string());
            }
        }
        out.truncate(n);
        if out.len() < n {
            return Err(ErrorReport::engine_unavailable(format!(
                "engine produced {} of {n} paraphrases",
                out.len()
            )));
        }
        Ok(out)
    }

    fn chat(&self, description: &str) -> Result<String, ErrorReport> {
        self.complete(
            "You are a friendly audio assistant. Answer briefly.",
            description,
        )
    }
}
