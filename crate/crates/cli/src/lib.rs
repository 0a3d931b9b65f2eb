//! Operator front end: an in-process REPL, scripted dialogues and the
//! evaluation commands. `main.rs` only parses arguments.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use audiochat_core::evalkit::{fixtures, request_with_uploads, EvalError};
use audiochat_core::execution::{load_registry, RegistryError};
use audiochat_core::service::{ServiceError, Upload};
use audiochat_core::{Orchestrator, Registry, Turn, TurnRequest};
use serde::{Deserialize, Serialize};

pub const DEFAULT_STORE_DIR: &str = "audiochat-data";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("tool registry: {0}")]
    Registry(#[from] RegistryError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 1 for usage problems, 2 for everything that failed at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

/// Builtin tools, or the descriptors in `tools` when given.
pub fn registry(tools: Option<&Path>) -> Result<Registry, CliError> {
    match tools {
        None => Ok(Registry::builtin()),
        Some(p) => Ok(load_registry(&std::fs::read(p).map_err(CliError::io(p))?)?),
    }
}

pub fn orchestrator(store_dir: &Path, tools: Option<&Path>) -> Result<Orchestrator, CliError> {
    Ok(Orchestrator::new(store_dir, registry(tools)?)?)
}

/// Prints a turn the way the REPL shows it.
pub fn print_turn(out: &mut impl Write, turn: &Turn) -> std::io::Result<()> {
    writeln!(out, "[{}] {}", turn.index, turn.response_text)?;
    if let Some(e) = &turn.error {
        writeln!(out, "    error {}", e.code)?;
    }
    for a in &turn.attachments {
        writeln!(out, "    {:?} {}", a.kind, a.resource_id)?;
    }
    Ok(())
}

/// Line loop: plain text is a query, `:upload <path>` queues a file for the
/// next query, `:play <id>` prints where the resource is stored, `:quit`
/// ends. Returns the number of turns taken.
pub fn repl(
    orch: &Orchestrator,
    engine: Option<&str>,
    input: impl BufRead,
    out: &mut impl Write,
) -> Result<usize, CliError> {
    let session = orch.create_session(engine)?;
    writeln!(out, "session {}", session.session_id).map_err(CliError::io("stdout"))?;
    let mut pending: Vec<Upload> = Vec::new();
    let mut turns = 0;
    for line in input.lines() {
        let line = line.map_err(CliError::io("stdin"))?;
        let line = line.trim();
        let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(CliError::io("stdout"));
        if line.is_empty() {
            continue;
        }
        if let Some(cmd) = line.strip_prefix(':') {
            let (cmd, arg) = cmd.split_once(char::is_whitespace).unwrap_or((cmd, ""));
            let arg = arg.trim();
            match cmd {
                "quit" | "q" | "exit" => break,
                "upload" if !arg.is_empty() => match fixtures::load_upload(arg, Path::new(".")) {
                    Ok((name, bytes)) => {
                        w(out, format!("queued {name} ({} bytes)", bytes.len()))?;
                        pending.push(Upload { name, bytes });
                    }
                    Err(e) => w(out, format!("error: {}", e.message))?,
                },
                "play" if !arg.is_empty() => match orch.get_resource(arg) {
                    Ok((_, ct)) => {
                        let rid = audiochat_core::ResourceId(arg.to_string());
                        w(out, format!("{} ({ct})", orch.store().path_of(&rid).display()))?
                    }
                    Err(e) => w(out, format!("error: {e}"))?,
                },
                _ => w(out, "commands: :upload <path>, :play <resource id>, :quit".to_string())?,
            }
            continue;
        }
        let req = TurnRequest {
            description: audiochat_core::service::DescriptionInput::Text(line.to_string()),
            uploads: std::mem::take(&mut pending),
        };
        let turn = orch.post_turn(&session.session_id, req)?;
        print_turn(out, &turn).map_err(CliError::io("stdout"))?;
        turns += 1;
    }
    Ok(turns)
}

/// One scripted round. `note` is for readers and is ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub description: String,
    #[serde(default)]
    pub uploads: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Where each bound input of the first stage should come from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect_inputs: Vec<ExpectedInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Output,
    Upload,
}

/// "The `index`-th output (or upload) of turn `turn`".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedInput {
    pub turn: usize,
    pub from: InputSource,
    #[serde(default)]
    pub index: usize,
}

/// Compares resolved inputs with the script's annotations. Returns one
/// message per mismatch; empty means every annotated reference resolved
/// to the expected resource.
pub fn check_expected_inputs(entries: &[ScriptEntry], transcript: &Transcript) -> Vec<String> {
    let mut problems = Vec::new();
    for (e, turn) in entries.iter().zip(&transcript.turns) {
        if e.expect_inputs.is_empty() {
            continue;
        }
        let resolved: Vec<_> = turn
            .args
            .as_ref()
            .map(|a| a.inputs.iter().filter_map(|b| b.resolved.clone()).collect())
            .unwrap_or_default();
        for (i, want) in e.expect_inputs.iter().enumerate() {
            let source = transcript.turns.get(want.turn.wrapping_sub(1));
            let expected = source.and_then(|t| match want.from {
                InputSource::Output => t.outputs.get(want.index).cloned(),
                InputSource::Upload => t.uploads().nth(want.index).map(|r| r.id.clone()),
            });
            match (expected, resolved.get(i)) {
                (Some(x), Some(got)) if &x == got => {}
                (x, got) => problems.push(format!(
                    "turn {}: input {} expected {:?} {} of turn {} ({:?}), resolved {:?}",
                    turn.index, i, want.from, want.index, want.turn, x, got
                )),
            }
        }
    }
    problems
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub turns: Vec<Turn>,
}

pub fn read_script(path: &Path) -> Result<Vec<ScriptEntry>, CliError> {
    let raw = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(serde_json::from_slice(&raw)?)
}

/// Runs the entries in one fresh session. Uploads resolve relative to
/// `base`; a missing upload aborts before that turn is sent.
pub fn run_script(
    orch: &Orchestrator,
    engine: Option<&str>,
    entries: &[ScriptEntry],
    base: &Path,
) -> Result<Transcript, CliError> {
    let session = orch.create_session(engine)?;
    let mut turns = Vec::with_capacity(entries.len());
    for e in entries {
        let req = request_with_uploads(&e.description, &e.uploads, base)?;
        turns.push(orch.post_turn(&session.session_id, req)?);
    }
    Ok(Transcript { turns })
}

/// Writes pretty JSON to `out`, or to stdout.
pub fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    match out {
        Some(p) => std::fs::write(p, s).map_err(CliError::io(p)),
        None => std::io::stdout().write_all(s.as_bytes()).map_err(CliError::io("stdout")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orch() -> (tempfile::TempDir, Orchestrator) {
        let d = tempfile::tempdir().unwrap();
        let o = Orchestrator::new(d.path(), Registry::builtin()).unwrap();
        (d, o)
    }

    #[test]
    fn repl_keeps_going_after_a_bad_upload() {
        let (_d, o) = orch();
        let input = ":upload missing.wav\nsay 'ok'\n:bogus\n:quit\nsay 'never'\n";
        let mut out = Vec::new();
        assert_eq!(repl(&o, None, input.as_bytes(), &mut out).unwrap(), 1);
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("error: cannot read upload"));
        assert!(text.contains("AudioFile"));
        assert!(!text.contains("never"));
    }

    #[test]
    fn play_prints_the_store_path() {
        let (_d, o) = orch();
        let mut out = Vec::new();
        repl(&o, None, "say 'x'\n".as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let id = text.lines().find(|l| l.contains("AudioFile")).unwrap().split_whitespace().last().unwrap();
        let mut out = Vec::new();
        repl(&o, None, format!(":play {id}\n:play nope\n").as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains(id) && text.contains("audio/wav"));
        assert!(text.contains("error: no resource"));
    }

    #[test]
    fn empty_script_gives_empty_transcript() {
        let (d, o) = orch();
        assert!(run_script(&o, None, &[], d.path()).unwrap().turns.is_empty());
    }

    #[test]
    fn missing_upload_aborts_the_script() {
        let (d, o) = orch();
        let entries = vec![ScriptEntry {
            description: "transcribe this".into(),
            uploads: vec!["nope.wav".into()],
            note: None,
            expect_inputs: vec![],
        }];
        assert!(matches!(run_script(&o, None, &entries, d.path()), Err(CliError::Eval(_))));
    }
}
