//! Tool registry, executors, and chained execution.

pub mod external;
pub mod stubs;

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{StructuredArguments, TaskFamily, TaskKind, MAX_CHAIN_STAGES};
use crate::context::{resolve_reference, Scope};
use crate::modality::sniff_modality;
use crate::store::ResourceStore;
use crate::types::{ErrorCode, ErrorReport, Modality, Origin, Resource, ResourceId};

pub const DEFAULT_TOOLS: &str = include_str!("../../data/tools.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutorSpec {
    Builtin { stub: String },
    /// Argument template with `{in0}`, `{out0}` and `{params}` placeholders.
    Subprocess { argv: Vec<String> },
    Http { url: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub id: String,
    pub task: TaskKind,
    pub input_sig: Vec<Modality>,
    pub output_sig: Vec<Modality>,
    pub executor: ExecutorSpec,
    #[serde(default)]
    pub priority: i64,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub onset_s: f64,
    pub offset_s: f64,
    pub label: String,
    pub score: f64,
}

/// What an executor hands back before anything is persisted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawOutput {
    /// Binary outputs (audio, images, scores) in signature order.
    pub payloads: Vec<Vec<u8>>,
    pub text: Option<String>,
    pub events: Option<Vec<EventRecord>>,
    pub posterior: Option<Vec<Vec<f64>>>,
    pub categories: Vec<String>,
    /// Frame rate and encoded frames.
    pub video: Option<(usize, Vec<Vec<u8>>)>,
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub tool_id: String,
    pub task: TaskKind,
    /// One persisted resource per output-signature slot.
    pub resources: Vec<Resource>,
    /// Video frames referenced by a video manifest.
    #[serde(default)]
    pub frames: Vec<Resource>,
    #[serde(default)]
    pub events: Option<Vec<EventRecord>>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub posterior: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default)]
    pub diagnostics: String,
    #[serde(default)]
    pub elapsed_ms: u64,
}

impl ToolOutput {
    pub fn modalities(&self) -> Vec<Modality> {
        self.resources.iter().map(|r| r.modality).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisteredTool {
    pub descriptor: ToolDescriptor,
    pub enabled: bool,
    #[serde(default)]
    pub diagnostics: String,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("tool config is not valid JSON: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("duplicate tool id \"{0}\"")]
    DuplicateId(String),
    #[error("tool \"{id}\": {reason}")]
    Inconsistent { id: String, reason: String },
}

/// Immutable after loading; shared read-only between sessions.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    tools: Vec<RegisteredTool>,
}

fn check_descriptor(d: &ToolDescriptor) -> Result<(), String> {
    if d.id.trim().is_empty() {
        return Err("id is empty".into());
    }
    if d.input_sig.first() != Some(&d.task.input_modality()) {
        return Err(format!(
            "input_sig must start with {} for {}",
            d.task.input_modality(),
            d.task
        ));
    }
    if d.output_sig.first() != Some(&d.task.output_modality()) {
        return Err(format!(
            "output_sig must start with {} for {}",
            d.task.output_modality(),
            d.task
        ));
    }
    if let ExecutorSpec::Builtin { stub } = &d.executor {
        let task = stubs::stub_task(stub).ok_or_else(|| format!("unknown builtin stub \"{stub}\""))?;
        if !task.same_task(d.task) {
            return Err(format!("stub \"{stub}\" implements {task}, not {}", d.task));
        }
        if d.input_sig != task.input_signature() || d.output_sig != task.output_signature() {
            return Err(format!("signatures do not match stub \"{stub}\""));
        }
    }
    Ok(())
}

fn health(d: &ToolDescriptor) -> Result<(), String> {
    match &d.executor {
        ExecutorSpec::Builtin { .. } => Ok(()),
        ExecutorSpec::Subprocess { argv } => external::probe_subprocess(argv),
        ExecutorSpec::Http { url } => external::probe_http(url),
    }
}

/// Parses a JSON array of descriptors and health-checks external tools.
/// Unhealthy tools stay registered but disabled.
pub fn load_registry(config: &[u8]) -> Result<Registry, RegistryError> {
    let descriptors: Vec<ToolDescriptor> = serde_json::from_slice(config)?;
    Registry::from_descriptors(descriptors)
}

impl Registry {
    /// The shipped stub suite.
    pub fn builtin() -> Self {
        load_registry(DEFAULT_TOOLS.as_bytes()).expect("shipped tool config is valid")
    }

    pub fn from_descriptors(descriptors: Vec<ToolDescriptor>) -> Result<Self, RegistryError> {
        let mut seen = HashSet::new();
        for d in &descriptors {
            if !seen.insert(d.id.clone()) {
                return Err(RegistryError::DuplicateId(d.id.clone()));
            }
            check_descriptor(d).map_err(|reason| RegistryError::Inconsistent {
                id: d.id.clone(),
                reason,
            })?;
        }
        let tools = descriptors
            .into_iter()
            .map(|d| match health(&d) {
                Ok(()) => RegisteredTool {
                    descriptor: d,
                    enabled: true,
                    diagnostics: String::new(),
                },
                Err(why) => {
                    log::warn!("tool {} registered disabled: {why}", d.id);
                    RegisteredTool {
                        descriptor: d,
                        enabled: false,
                        diagnostics: why,
                    }
                }
            })
            .collect();
        Ok(Registry { tools })
    }

    pub fn tools(&self) -> &[RegisteredTool] {
        &self.tools
    }

    pub fn get(&self, id: &str) -> Option<&RegisteredTool> {
        self.tools.iter().find(|t| t.descriptor.id == id)
    }

    pub fn enabled(&self) -> impl Iterator<Item = &ToolDescriptor> {
        self.tools.iter().filter(|t| t.enabled).map(|t| &t.descriptor)
    }

    /// Enabled tools of one family, in registration order.
    pub fn enabled_in_family(&self, family: TaskFamily) -> impl Iterator<Item = &ToolDescriptor> {
        self.enabled().filter(move |d| d.task.family() == family)
    }

    /// Returns a copy with the given tool disabled.
    pub fn without(&self, id: &str, reason: &str) -> Self {
        let mut r = self.clone();
        for t in r.tools.iter_mut().filter(|t| t.descriptor.id == id) {
            t.enabled = false;
            t.diagnostics = reason.to_string();
        }
        r
    }
}

fn shape_error(tool: &str, expected: &[Modality], got: &str) -> ErrorReport {
    ErrorReport::tool_failed(format!(
        "{tool} returned {got}, but declares {}",
        expected.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+")
    ))
}

/// Loads the bound inputs, runs the tool and persists its outputs with a
/// `ToolOutput` origin.
pub fn assign_and_execute(
    registry: &Registry,
    args: &StructuredArguments,
    store: &ResourceStore,
    turn: usize,
) -> Result<ToolOutput, ErrorReport> {
    let tool = registry
        .get(&args.tool_id)
        .filter(|t| t.enabled)
        .ok_or_else(|| {
            ErrorReport::tool_failed(format!("tool {} is not available", args.tool_id))
                .with_suggestion("Try again later or ask for a different task.")
        })?;
    let d = &tool.descriptor;

    let mut loaded: Vec<(Modality, Vec<u8>)> = Vec::with_capacity(args.inputs.len());
    for (slot, b) in args.inputs.iter().enumerate() {
        let id = b.resolved.as_ref().ok_or_else(|| {
            ErrorReport::missing(format!("input {} of {} was never resolved", slot + 1, d.id))
        })?;
        let bytes = store.load(id)?;
        let actual = sniff_modality(&bytes, "")?;
        if actual != b.modality || !d.input_sig.contains(&b.modality) {
            return Err(ErrorReport::bad_format(format!(
                "{} expects {} input, but resource {id} is {actual}",
                d.id,
                b.modality.as_str().to_lowercase()
            ))
            .with_suggestion(format!(
                "Give {} a {} resource.",
                d.task.label(),
                b.modality.as_str().to_lowercase()
            )));
        }
        loaded.push((actual, bytes));
    }

    let started = Instant::now();
    let raw = match &d.executor {
        ExecutorSpec::Builtin { stub } => {
            let inputs: Vec<stubs::StubInput<'_>> = loaded
                .iter()
                .map(|(m, b)| stubs::StubInput {
                    modality: *m,
                    bytes: b,
                })
                .collect();
            stubs::run_stub(stub, &inputs, &args.params)?
        }
        ExecutorSpec::Subprocess { argv } => {
            let ins: Vec<(Modality, &[u8])> = loaded.iter().map(|(m, b)| (*m, b.as_slice())).collect();
            external::run_subprocess(argv, &ins, &d.output_sig, &args.params)?
        }
        ExecutorSpec::Http { url } => {
            let ins: Vec<(Modality, &[u8])> = loaded.iter().map(|(m, b)| (*m, b.as_slice())).collect();
            external::run_http(url, &d.id, &ins, &d.output_sig, &args.params)?
        }
    };
    let elapsed_ms = started.elapsed().as_millis() as u64;
    persist_outputs(d, raw, store, turn, elapsed_ms)
}

fn persist_outputs(
    d: &ToolDescriptor,
    raw: RawOutput,
    store: &ResourceStore,
    turn: usize,
    elapsed_ms: u64,
) -> Result<ToolOutput, ErrorReport> {
    let origin = Origin::ToolOutput {
        turn,
        tool_id: d.id.clone(),
    };
    let put = |bytes: &[u8], name: &str| {
        store.store_resource(bytes, name, origin.clone()).map_err(|e| {
            ErrorReport::tool_failed(format!("{} produced an unusable {name}: {}", d.id, e.message))
        })
    };
    let mut payloads = raw.payloads.into_iter();
    let mut resources = Vec::with_capacity(d.output_sig.len());
    let mut frames = Vec::new();
    for &m in &d.output_sig {
        let r = match m {
            Modality::Text => {
                let t = raw.text.as_deref().filter(|t| !t.is_empty());
                put(t.ok_or_else(|| shape_error(&d.id, &d.output_sig, "no text"))?.as_bytes(), "text")?
            }
            Modality::Event => {
                let ev = raw
                    .events
                    .as_ref()
                    .ok_or_else(|| shape_error(&d.id, &d.output_sig, "no events"))?;
                let body = serde_json::to_vec(&serde_json::json!({ "events": ev })).expect("events serialize");
                put(&body, "events")?
            }
            Modality::Video if raw.video.is_some() => {
                let (fps, imgs) = raw.video.as_ref().unwrap();
                for img in imgs {
                    frames.push(put(img, "frame")?);
                }
                let ids: Vec<&str> = frames.iter().map(|f| f.id.as_str()).collect();
                let body = serde_json::to_vec(&serde_json::json!({ "fps": fps, "frames": ids })).expect("manifest");
                put(&body, "manifest")?
            }
            _ => {
                let bytes = payloads
                    .next()
                    .ok_or_else(|| shape_error(&d.id, &d.output_sig, "too few outputs"))?;
                put(&bytes, "output")?
            }
        };
        if r.modality != m {
            return Err(shape_error(&d.id, &d.output_sig, r.modality.as_str()));
        }
        resources.push(r);
    }
    Ok(ToolOutput {
        tool_id: d.id.clone(),
        task: d.task,
        resources,
        frames,
        events: raw.events,
        text: raw.text,
        posterior: raw.posterior,
        categories: raw.categories,
        diagnostics: raw.diagnostics,
        elapsed_ms,
    })
}

/// Result of a chained run. On failure `outputs` holds the stages that
/// completed before the error.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    /// Stage arguments with every input binding resolved.
    pub stages: Vec<StructuredArguments>,
    pub outputs: Vec<ToolOutput>,
    pub error: Option<ErrorReport>,
}

fn sig_names(m: &[Modality]) -> String {
    m.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+")
}

/// Runs the stages in order. Unresolved references of a later stage are
/// resolved against the outputs of the stages before it.
pub fn run_pipeline(
    registry: &Registry,
    stages: &[StructuredArguments],
    store: &ResourceStore,
    scope: Scope<'_>,
    turn: usize,
) -> PipelineRun {
    let mut run = PipelineRun {
        stages: Vec::new(),
        outputs: Vec::new(),
        error: None,
    };
    if stages.is_empty() || stages.len() > MAX_CHAIN_STAGES {
        run.error = Some(ErrorReport::unsupported(format!(
            "a chain must have 1 to {MAX_CHAIN_STAGES} steps, got {}",
            stages.len()
        )));
        return run;
    }
    let mut produced: Vec<Resource> = Vec::new();
    for (i, stage) in stages.iter().enumerate() {
        let mut stage = stage.clone();
        stage.chain.clear();
        if i > 0 {
            let prev = &run.outputs[i - 1];
            let here = registry.get(&stage.tool_id).map(|t| t.descriptor.input_sig.clone()).unwrap_or_default();
            let made = prev.modalities();
            if !made.iter().any(|m| here.contains(m)) {
                run.error = Some(
                    ErrorReport::new(
                        ErrorCode::PipelineModalityMismatch,
                        format!(
                            "step {} ({}) produces {}, but step {} ({}) needs {}",
                            i,
                            prev.task.label(),
                            sig_names(&made),
                            i + 1,
                            stage.task.label(),
                            sig_names(&here)
                        ),
                    )
                    .with_suggestion(format!(
                        "Put a step that turns {} into {} in between, or reorder the chain.",
                        sig_names(&made),
                        sig_names(&here)
                    )),
                );
                return run;
            }
        }
        let local = Scope {
            context: scope.context,
            current_index: scope.current_index,
            current_uploads: scope.current_uploads,
            stage_outputs: &produced,
        };
        for b in stage.inputs.iter_mut().filter(|b| b.resolved.is_none()) {
            match resolve_reference(&b.reference, &local, b.modality) {
                Ok(r) => b.resolved = Some(r.id),
                Err(e) => {
                    run.stages.push(stage);
                    run.error = Some(e);
                    return run;
                }
            }
        }
        let result = assign_and_execute(registry, &stage, store, turn);
        run.stages.push(stage);
        match result {
            Ok(out) => {
                produced.extend(out.resources.iter().cloned());
                run.outputs.push(out);
            }
            Err(e) => {
                run.error = Some(e);
                return run;
            }
        }
    }
    run
}

/// Ids of every resource a set of outputs persisted, in order.
pub fn output_ids(outputs: &[ToolOutput]) -> Vec<ResourceId> {
    outputs
        .iter()
        .flat_map(|o| o.resources.iter().map(|r| r.id.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{InputBinding, Params};
    use crate::context::{Context, ReferenceExpr};
    use crate::modality::{encode_text_audio, read_wav, write_wav, GrayImage};

    fn args(tool: &str, task: TaskKind, inputs: Vec<InputBinding>, params: Params) -> StructuredArguments {
        StructuredArguments {
            tool_id: tool.into(),
            task,
            inputs,
            params,
            chain: vec![],
        }
    }

    fn text_param(k: &str, v: &str) -> Params {
        let mut p = Params::new();
        p.insert(k.into(), v.into());
        p
    }

    #[test]
    fn builtin_registry_covers_every_stub() {
        let reg = Registry::builtin();
        assert_eq!(reg.tools().len(), stubs::STUBS.len());
        assert!(reg.tools().iter().all(|t| t.enabled));
        for k in TaskKind::ALL {
            assert!(reg.enabled().any(|d| d.task.same_task(k)), "{k}");
        }
    }

    #[test]
    fn duplicate_and_malformed_configs_are_rejected() {
        let one = r#"{"id":"asr-stub","task":"SpeechRecognition","input_sig":["Audio"],"output_sig":["Text"],"executor":{"kind":"builtin","stub":"asr"}}"#;
        let e = load_registry(format!("[{one},{one}]").as_bytes()).unwrap_err();
        assert!(e.to_string().contains("asr-stub"));
        assert!(matches!(load_registry(b"[{"), Err(RegistryError::Malformed(_))));
        let wrong = one.replace("[\"Text\"]", "[\"Audio\"]");
        assert!(matches!(
            load_registry(format!("[{wrong}]").as_bytes()),
            Err(RegistryError::Inconsistent { .. })
        ));
    }

    #[test]
    fn dead_http_tool_is_disabled() {
        let cfg = r#"[{"id":"remote-asr","task":"SpeechRecognition","input_sig":["Audio"],"output_sig":["Text"],
            "executor":{"kind":"http","url":"http://127.0.0.1:9/infer"}}]"#;
        let reg = load_registry(cfg.as_bytes()).unwrap();
        assert!(!reg.tools()[0].enabled);
        assert!(!reg.tools()[0].diagnostics.is_empty());
        assert_eq!(reg.enabled_in_family(TaskFamily::AudioToText).count(), 0);
    }

    #[test]
    fn tts_produces_expected_length() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResourceStore::open(dir.path()).unwrap();
        let reg = Registry::builtin();
        let out = assign_and_execute(
            &reg,
            &args("tts-stub", TaskKind::TextToSpeech, vec![], text_param("text", "hi")),
            &store,
            1,
        )
        .unwrap();
        assert_eq!(out.resources.len(), 1);
        let a = store.load_audio(&out.resources[0].id).unwrap();
        assert_eq!(a.num_samples(), 3200);
        assert_eq!(
            out.resources[0].origin,
            Origin::ToolOutput {
                turn: 1,
                tool_id: "tts-stub".into()
            }
        );
    }

    #[test]
    fn asr_on_image_is_rejected_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResourceStore::open(dir.path()).unwrap();
        let img = store
            .store_resource(&GrayImage::new(4, 4).encode(), "x.pgm", Origin::UserUpload { turn: 1 })
            .unwrap();
        let a = args(
            "asr-stub",
            TaskKind::SpeechRecognition,
            vec![InputBinding {
                modality: Modality::Audio,
                reference: ReferenceExpr::Explicit(img.id.clone()),
                resolved: Some(img.id),
            }],
            Params::new(),
        );
        let e = assign_and_execute(&Registry::builtin(), &a, &store, 2).unwrap_err();
        assert_eq!(e.code, ErrorCode::BadResourceFormat);
    }

    #[test]
    fn every_builtin_obeys_the_shape_law() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResourceStore::open(dir.path()).unwrap();
        let up = |bytes: Vec<u8>| store.store_resource(&bytes, "u", Origin::UserUpload { turn: 1 }).unwrap();
        let mut speech = encode_text_audio("hello world").unwrap();
        // add a loud burst so detection and extraction find something
        for s in speech.channels[0].iter_mut() {
            *s *= 1.5;
        }
        let audio = up(write_wav(&speech));
        let image = up(GrayImage::new(8, 8).encode());
        let score = up(br#"{"notes":[{"text":"la","midi":69,"dur":0.2}]}"#.to_vec());
        let reg = Registry::builtin();
        for d in reg.enabled() {
            let inputs = d
                .input_sig
                .iter()
                .filter(|m| **m != Modality::Text)
                .map(|m| {
                    let r = match m {
                        Modality::Audio => &audio,
                        Modality::Image => &image,
                        _ => &score,
                    };
                    InputBinding {
                        modality: *m,
                        reference: ReferenceExpr::Explicit(r.id.clone()),
                        resolved: Some(r.id.clone()),
                    }
                })
                .collect();
            let mut params = text_param("text", "hello");
            params.insert("description".into(), "rain on a roof".into());
            params.insert("mask".into(), serde_json::json!([0.1, 0.2]));
            let a = args(&d.id, d.task, inputs, params);
            let o1 = assign_and_execute(&reg, &a, &store, 2).unwrap_or_else(|e| panic!("{}: {e}", d.id));
            assert_eq!(o1.modalities(), d.output_sig, "{}", d.id);
            let o2 = assign_and_execute(&reg, &a, &store, 2).unwrap();
            assert_eq!(output_ids(&[o1]), output_ids(&[o2]), "{} is not deterministic", d.id);
        }
    }

    fn run_chain(desc: &[(&str, TaskKind, Params, bool)]) -> (PipelineRun, ResourceStore, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let store = ResourceStore::open(dir.path()).unwrap();
        let reg = Registry::builtin();
        let stages: Vec<_> = desc
            .iter()
            .map(|(tool, task, p, needs_audio)| {
                let sig = &reg.get(tool).unwrap().descriptor.input_sig;
                let inputs = if *needs_audio {
                    vec![InputBinding {
                        modality: sig[0],
                        reference: ReferenceExpr::Latest,
                        resolved: None,
                    }]
                } else {
                    vec![]
                };
                args(tool, *task, inputs, p.clone())
            })
            .collect();
        let ctx = Context::new("s");
        let run = run_pipeline(&reg, &stages, &store, Scope::of(&ctx), 1);
        (run, store, dir)
    }

    #[test]
    fn tts_then_asr_round_trips() {
        let (run, _, _dir) = run_chain(&[
            ("tts-stub", TaskKind::TextToSpeech, text_param("text", "abc"), false),
            ("asr-stub", TaskKind::SpeechRecognition, Params::new(), true),
        ]);
        assert!(run.error.is_none(), "{:?}", run.error);
        assert_eq!(run.outputs[1].text.as_deref(), Some("abc"));
        assert_eq!(run.stages[1].inputs[0].resolved, Some(run.outputs[0].resources[0].id.clone()));
    }

    #[test]
    fn detection_then_tts_is_a_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResourceStore::open(dir.path()).unwrap();
        let reg = Registry::builtin();
        let audio = store
            .store_resource(&write_wav(&encode_text_audio("x").unwrap()), "a", Origin::UserUpload { turn: 1 })
            .unwrap();
        let stages = vec![
            args(
                "detect-stub",
                TaskKind::SoundDetection,
                vec![InputBinding {
                    modality: Modality::Audio,
                    reference: ReferenceExpr::Latest,
                    resolved: Some(audio.id.clone()),
                }],
                Params::new(),
            ),
            args(
                "tts-stub",
                TaskKind::TextToSpeech,
                vec![InputBinding {
                    modality: Modality::Text,
                    reference: ReferenceExpr::Latest,
                    resolved: None,
                }],
                Params::new(),
            ),
        ];
        let ctx = Context::new("s");
        let ups = [audio];
        let run = run_pipeline(&reg, &stages, &store, Scope::of(&ctx).with_uploads(&ups), 1);
        assert_eq!(run.error.unwrap().code, ErrorCode::PipelineModalityMismatch);
        assert_eq!(run.outputs.len(), 1);
    }

    #[test]
    fn failure_keeps_partial_outputs() {
        let mut bad = Params::new();
        bad.insert("mask".into(), serde_json::json!([5.0, 2.0]));
        let (run, _, _dir) = run_chain(&[
            ("tts-stub", TaskKind::TextToSpeech, text_param("text", "ab"), false),
            ("inpaint-stub", TaskKind::AudioInpainting, bad, true),
        ]);
        assert_eq!(run.outputs.len(), 1);
        assert_eq!(run.error.unwrap().code, ErrorCode::BadResourceFormat);
    }

    #[test]
    fn stereo_tool_output_is_readable() {
        let (run, store, _dir) = run_chain(&[
            ("tts-stub", TaskKind::TextToSpeech, text_param("text", "a"), false),
            ("binaural-stub", TaskKind::MonoToBinaural, Params::new(), true),
        ]);
        let a = read_wav(&store.load(&run.outputs[1].resources[0].id).unwrap()).unwrap();
        assert_eq!(a.channels.len(), 2);
    }
}
