//! Task analysis: classify the family, render the prompt, consult the
//! dialogue engine, and validate its reply into structured arguments.

pub mod engine;
pub mod family;
pub mod intent;
pub mod paraphrase;
pub mod prompt;
pub mod task;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use engine::{DialogueEngine, EngineReply, EngineSettings, ExternalEngine, RuleEngine};
pub use family::classify_family;
pub use intent::{parse_intent, Grammar, IntentSketch, Params, ParsedIntent, MAX_CHAIN_STAGES};
pub use prompt::{render_prompt, PromptBundle, DEFAULT_DIGEST_TURNS};
pub use task::{TaskFamily, TaskKind};

use crate::context::{resolve_reference, Context, ReferenceExpr, Scope};
use crate::execution::{Registry, ToolDescriptor};
use crate::types::{ErrorReport, Modality, Query, Resource, ResourceId};

/// One input slot of a tool invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputBinding {
    pub modality: Modality,
    pub reference: ReferenceExpr,
    /// Filled once the reference has been resolved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<ResourceId>,
}

/// The analysis result for one tool call, with any follow-on chain stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredArguments {
    pub tool_id: String,
    pub task: TaskKind,
    #[serde(default)]
    pub inputs: Vec<InputBinding>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chain: Vec<StructuredArguments>,
}

impl StructuredArguments {
    /// This stage followed by its chain, as a flat list of single stages.
    pub fn stages(&self) -> Vec<StructuredArguments> {
        let mut head = self.clone();
        let rest = std::mem::take(&mut head.chain);
        let mut out = vec![head];
        for s in rest {
            out.extend(s.stages());
        }
        out
    }

    /// Inverse of [`StructuredArguments::stages`].
    pub fn from_stages(mut stages: Vec<StructuredArguments>) -> Option<Self> {
        if stages.is_empty() {
            return None;
        }
        let mut head = stages.remove(0);
        head.chain = stages;
        Some(head)
    }
}

/// Parameters that stand in for a text input slot.
const TEXT_PARAMS: [&str; 2] = ["text", "description"];

fn text_slot_satisfied(params: &Params) -> bool {
    TEXT_PARAMS
        .iter()
        .any(|k| params.get(*k).and_then(|v| v.as_str()).is_some_and(|s| !s.is_empty()))
}

#[derive(Debug, Clone)]
pub struct Analyzer {
    grammar: Arc<Grammar>,
    digest_turns: usize,
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer {
            grammar: Arc::new(Grammar::builtin()),
            digest_turns: DEFAULT_DIGEST_TURNS,
        }
    }
}

impl Analyzer {
    pub fn new(grammar: Arc<Grammar>, digest_turns: usize) -> Self {
        Analyzer {
            grammar,
            digest_turns,
        }
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    /// Turns a text query into structured arguments. `Ok(None)` means the
    /// query is small talk and needs no tool.
    ///
    /// `uploads` are the records of `query.resources`.
    pub fn analyze(
        &self,
        query: &Query,
        uploads: &[Resource],
        context: &Context,
        engine: &dyn DialogueEngine,
        registry: &Registry,
    ) -> Result<Option<StructuredArguments>, ErrorReport> {
        let description = query
            .description
            .as_text()
            .ok_or_else(|| ErrorReport::bad_format("query description must be text before analysis"))?;
        let attached: Vec<Modality> = uploads.iter().map(|r| r.modality).collect();
        let parsed = self.grammar.parse_with(description, &attached);
        if parsed.stages.len() > MAX_CHAIN_STAGES {
            return Err(ErrorReport::unsupported(format!(
                "the request chains {} steps; at most {MAX_CHAIN_STAGES} are supported",
                parsed.stages.len()
            ))
            .with_suggestion(format!(
                "Split the request into chains of at most {MAX_CHAIN_STAGES} steps."
            )));
        }

        let scope = Scope::of(context).with_uploads(uploads);
        let mut stages = Vec::with_capacity(parsed.stages.len());
        for (i, (intent, segment)) in parsed.stages.iter().zip(&parsed.segments).enumerate() {
            let family = if i == 0 {
                classify_family(&attached, intent)
            } else {
                intent.task.map(TaskKind::family)
            };
            let family = match family {
                Some(TaskFamily::Chat) if !parsed.is_chain() => return Ok(None),
                Some(f) if f != TaskFamily::Chat => f,
                _ => return Err(unsupported(segment, i, parsed.is_chain())),
            };
            let catalog: Vec<&ToolDescriptor> = registry.enabled_in_family(family).collect();
            let bundle = render_prompt(
                family,
                &catalog,
                segment,
                context,
                if i == 0 { &attached } else { &[] },
                self.digest_turns,
            )?;
            let (tool, reply, refs) = consult(engine, bundle, &catalog)?;
            let first = (i == 0).then_some((&scope, uploads));
            let inputs = bind_inputs(tool, &reply.params, refs, first)?;
            stages.push(StructuredArguments {
                tool_id: tool.id.clone(),
                task: tool.task,
                inputs,
                params: reply.params,
                chain: Vec::new(),
            });
        }
        Ok(StructuredArguments::from_stages(stages))
    }
}

fn unsupported(segment: &str, stage: usize, chain: bool) -> ErrorReport {
    let message = if chain {
        format!("I could not map step {} (\"{segment}\") to a supported task", stage + 1)
    } else {
        format!("\"{segment}\" is not a task I can perform")
    };
    ErrorReport::unsupported(message).with_suggestion(format!(
        "Supported task families: {}.",
        TaskFamily::supported_list()
    ))
}

/// Asks the engine, validating the reply against the catalog. An invalid
/// reply is retried once with the problem spelled out in the prompt.
fn consult<'r>(
    engine: &dyn DialogueEngine,
    mut bundle: PromptBundle,
    catalog: &[&'r ToolDescriptor],
) -> Result<(&'r ToolDescriptor, EngineReply, Vec<ReferenceExpr>), ErrorReport> {
    let mut last_problem = String::new();
    for _ in 0..2 {
        let reply = engine.select(&bundle)?;
        match validate_reply(&reply, catalog) {
            Ok((tool, refs)) => return Ok((tool, reply, refs)),
            Err(problem) => {
                bundle.correction = Some(format!(
                    "{problem}. Choose tool_id from: {}.",
                    catalog.iter().map(|t| t.id.as_str()).collect::<Vec<_>>().join(", ")
                ));
                last_problem = problem;
            }
        }
    }
    Err(ErrorReport::engine_unavailable(format!(
        "the dialogue engine returned an invalid selection twice ({last_problem})"
    )))
}

fn validate_reply<'r>(
    reply: &EngineReply,
    catalog: &[&'r ToolDescriptor],
) -> Result<(&'r ToolDescriptor, Vec<ReferenceExpr>), String> {
    let tool = catalog
        .iter()
        .find(|t| t.id == reply.tool_id)
        .copied()
        .ok_or_else(|| format!("unknown tool_id \"{}\"", reply.tool_id))?;
    let refs = reply
        .input_refs
        .iter()
        .map(|r| r.parse::<ReferenceExpr>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok((tool, refs))
}

/// Binds the tool's input slots. For the first stage (`first` is set) every
/// binding is resolved now; later chain stages are resolved by the pipeline
/// against the outputs of the stages before them.
fn bind_inputs(
    tool: &ToolDescriptor,
    params: &Params,
    refs: Vec<ReferenceExpr>,
    first: Option<(&Scope<'_>, &[Resource])>,
) -> Result<Vec<InputBinding>, ErrorReport> {
    let mut refs = refs.into_iter();
    let mut used: HashSet<ResourceId> = HashSet::new();
    let mut out = Vec::new();
    for &m in &tool.input_sig {
        if m == Modality::Text && text_slot_satisfied(params) {
            continue;
        }
        let explicit = refs.next();
        let Some((scope, uploads)) = first else {
            out.push(InputBinding {
                modality: m,
                reference: explicit.unwrap_or(ReferenceExpr::Latest),
                resolved: None,
            });
            continue;
        };
        let unused_upload = uploads
            .iter()
            .find(|u| u.modality == m && !used.contains(&u.id))
            .map(|u| ReferenceExpr::Explicit(u.id.clone()));
        let reference = match explicit {
            Some(ReferenceExpr::Latest) | None if unused_upload.is_some() => unused_upload.unwrap(),
            Some(r) => r,
            None if out.is_empty() => ReferenceExpr::Latest,
            None => scope
                .most_recent_first()
                .find(|r| r.modality == m && !used.contains(&r.id))
                .map(|r| ReferenceExpr::Explicit(r.id.clone()))
                .ok_or_else(|| {
                    ErrorReport::missing(format!(
                        "{} needs {} {} inputs",
                        tool.task.label(),
                        tool.input_sig.iter().filter(|&&s| s == m).count(),
                        m.as_str().to_lowercase()
                    ))
                })?,
        };
        let r = resolve_reference(&reference, scope, m)?;
        used.insert(r.id.clone());
        out.push(InputBinding {
            modality: m,
            reference,
            resolved: Some(r.id),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ErrorCode, Origin, Turn};

    fn audio(tag: &str, origin: Origin) -> Resource {
        Resource {
            id: ResourceId(tag.into()),
            modality: Modality::Audio,
            locator: String::new(),
            origin,
            meta: None,
        }
    }

    fn tts_context() -> Context {
        let out = audio(
            "tts-out",
            Origin::ToolOutput {
                turn: 1,
                tool_id: "tts-stub".into(),
            },
        );
        let mut c = Context::new("s");
        c.append_turn(Turn {
            index: 1,
            query: Query::text("say 'hi'"),
            description_audio: None,
            args: None,
            outputs: vec![out.id.clone()],
            resources: vec![out],
            response_text: String::new(),
            attachments: vec![],
            error: None,
        })
        .unwrap();
        c
    }

    fn run(q: &str, uploads: &[Resource], c: &Context, reg: &Registry) -> Result<Option<StructuredArguments>, ErrorReport> {
        let mut query = Query::text(q);
        query.resources = uploads.iter().map(|u| u.id.clone()).collect();
        Analyzer::default().analyze(&query, uploads, c, &RuleEngine::default(), reg)
    }

    #[test]
    fn transcribe_after_tts() {
        let reg = Registry::builtin();
        let a = run("transcribe the last audio", &[], &tts_context(), &reg).unwrap().unwrap();
        assert_eq!(a.tool_id, "asr-stub");
        assert_eq!(a.task, TaskKind::SpeechRecognition);
        assert_eq!(a.inputs.len(), 1);
        assert_eq!(a.inputs[0].resolved, Some(ResourceId::from("tts-out")));
    }

    #[test]
    fn chat_returns_none() {
        let reg = Registry::builtin();
        assert!(run("how are you?", &[], &Context::new("s"), &reg).unwrap().is_none());
    }

    #[test]
    fn unsupported_lists_families() {
        let reg = Registry::builtin();
        let e = run("detect dolphins' dreams", &[], &Context::new("s"), &reg).unwrap_err();
        assert_eq!(e.code, ErrorCode::UnsupportedTask);
        assert!(e.suggestion.contains("Audio-to-Text"));
        assert!(e.suggestion.contains("Score-to-Audio"));
    }

    #[test]
    fn missing_resource() {
        let reg = Registry::builtin();
        let e = run("transcribe it", &[], &Context::new("s"), &reg).unwrap_err();
        assert_eq!(e.code, ErrorCode::MissingResource);
    }

    #[test]
    fn chain_stages_are_deferred() {
        let reg = Registry::builtin();
        let a = run("say 'abc' then transcribe it", &[], &Context::new("s"), &reg)
            .unwrap()
            .unwrap();
        assert_eq!(a.tool_id, "tts-stub");
        assert!(a.inputs.is_empty());
        assert_eq!(a.params["text"], "abc");
        assert_eq!(a.chain.len(), 1);
        assert_eq!(a.chain[0].tool_id, "asr-stub");
        assert_eq!(a.chain[0].inputs[0].reference, ReferenceExpr::Latest);
        assert_eq!(a.chain[0].inputs[0].resolved, None);
        assert_eq!(a.stages().len(), 2);
    }

    #[test]
    fn five_stage_chain_is_rejected() {
        let reg = Registry::builtin();
        let e = run(
            "say 'a' then transcribe it then say it then transcribe it then say it",
            &[],
            &Context::new("s"),
            &reg,
        )
        .unwrap_err();
        assert_eq!(e.code, ErrorCode::UnsupportedTask);
    }

    #[test]
    fn two_uploads_fill_style_transfer_slots_in_order() {
        let reg = Registry::builtin();
        let ups = vec![
            audio("src", Origin::UserUpload { turn: 1 }),
            audio("ref", Origin::UserUpload { turn: 1 }),
        ];
        let a = run("transfer the style", &ups, &Context::new("s"), &reg).unwrap().unwrap();
        let ids: Vec<_> = a.inputs.iter().map(|b| b.resolved.clone().unwrap()).collect();
        assert_eq!(ids, vec![ResourceId::from("src"), ResourceId::from("ref")]);
    }

    #[test]
    fn deterministic() {
        let reg = Registry::builtin();
        let c = tts_context();
        let a = run("transcribe it", &[], &c, &reg).unwrap();
        let b = run("transcribe it", &[], &c, &reg).unwrap();
        assert_eq!(a, b);
    }

    struct Flaky {
        calls: std::sync::Mutex<Vec<Option<String>>>,
        replies: Vec<&'static str>,
    }

    impl DialogueEngine for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn settings(&self) -> EngineSettings {
            EngineSettings::default()
        }
        fn select(&self, p: &PromptBundle) -> Result<EngineReply, ErrorReport> {
            let mut calls = self.calls.lock().unwrap();
            calls.push(p.correction.clone());
            let id = self.replies[(calls.len() - 1).min(self.replies.len() - 1)];
            Ok(EngineReply {
                tool_id: id.into(),
                params: Params::new(),
                input_refs: vec!["latest".into()],
            })
        }
        fn paraphrase(&self, _: &str, _: usize) -> Result<Vec<String>, ErrorReport> {
            Ok(vec![])
        }
    }

    #[test]
    fn invalid_tool_id_is_retried_once_with_annotation() {
        let reg = Registry::builtin();
        let e = Flaky {
            calls: Default::default(),
            replies: vec!["whisper-xl", "asr-stub"],
        };
        let a = Analyzer::default()
            .analyze(&Query::text("transcribe it"), &[], &tts_context(), &e, &reg)
            .unwrap()
            .unwrap();
        assert_eq!(a.tool_id, "asr-stub");
        let calls = e.calls.lock().unwrap();
        assert_eq!(calls.len(), 2);
        assert!(calls[0].is_none());
        assert!(calls[1].as_deref().unwrap().contains("whisper-xl"));
    }

    #[test]
    fn twice_invalid_is_engine_unavailable() {
        let reg = Registry::builtin();
        let e = Flaky {
            calls: Default::default(),
            replies: vec!["nope"],
        };
        let err = Analyzer::default()
            .analyze(&Query::text("transcribe it"), &[], &tts_context(), &e, &reg)
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::EngineUnavailable);
        assert_eq!(e.calls.lock().unwrap().len(), 2);
    }
}
