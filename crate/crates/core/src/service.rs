//! Session-scoped orchestration: runs whole turns end to end, journals them,
//! and serves stored resources.
//!
//! On-disk layout under the data directory:
//! `store/` holds resources, `sessions/<id>.jsonl` one turn per line, and
//! `sessions/<id>.meta.json` the session header.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::analysis::{Analyzer, DialogueEngine, ExternalEngine, RuleEngine, StructuredArguments};
use crate::context::{Context, Scope};
use crate::execution::{output_ids, run_pipeline, Registry};
use crate::modality::{sniff_modality, transform_query, SineCodecTranscriber, Transcriber};
use crate::response::{render_error, render_outputs};
use crate::store::ResourceStore;
use crate::types::{Description, ErrorReport, Modality, Origin, Query, Resource, ResourceId, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Builtin,
    External,
}

impl FromStr for EngineChoice {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "builtin" => Ok(EngineChoice::Builtin),
            "external" => Ok(EngineChoice::External),
            other => Err(ServiceError::UnknownEngine(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub engine: EngineChoice,
}

/// A live session: header, dialogue context, and its engine. The engine is
/// absent when an external engine could not be configured on restore.
pub struct Session {
    pub meta: SessionMeta,
    pub context: Context,
    engine: Option<Arc<dyn DialogueEngine>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub meta: SessionMeta,
    pub turns: Vec<Turn>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown engine \"{0}\" (expected builtin or external)")]
    UnknownEngine(String),
    #[error("no resource with id {0}")]
    UnknownResource(String),
    #[error("{0}")]
    Report(#[from] ErrorReport),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot encode journal entry: {0}")]
    Encode(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescriptionInput {
    Text(String),
    /// WAV bytes of a spoken request.
    Audio(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Upload {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnRequest {
    pub description: DescriptionInput,
    pub uploads: Vec<Upload>,
}

impl TurnRequest {
    pub fn text(s: impl Into<String>) -> Self {
        TurnRequest {
            description: DescriptionInput::Text(s.into()),
            uploads: Vec::new(),
        }
    }

    pub fn with_upload(mut self, name: impl Into<String>, bytes: Vec<u8>) -> Self {
        self.uploads.push(Upload {
            name: name.into(),
            bytes,
        });
        self
    }
}

/// Result of reading a journal back.
#[derive(Debug, Clone, PartialEq)]
pub struct Restored {
    pub turns: Vec<Turn>,
    /// Byte length of the valid prefix.
    pub valid_len: u64,
    pub warnings: Vec<String>,
}

/// Reads turns up to the first line that does not parse or breaks the
/// index sequence.
pub fn read_journal(raw: &[u8]) -> Restored {
    let mut turns: Vec<Turn> = Vec::new();
    let mut warnings = Vec::new();
    let mut offset = 0usize;
    for (n, line) in raw.split_inclusive(|&b| b == b'\n').enumerate() {
        let complete = line.ends_with(b"\n");
        let body = line.strip_suffix(b"\n").unwrap_or(line);
        if body.iter().all(u8::is_ascii_whitespace) && complete {
            offset += line.len();
            continue;
        }
        let parsed = if complete {
            serde_json::from_slice::<Turn>(body).map_err(|e| e.to_string())
        } else {
            Err("line is truncated".to_string())
        };
        match parsed {
            Ok(t) if t.index == turns.len() + 1 => {
                turns.push(t);
                offset += line.len();
            }
            Ok(t) => {
                warnings.push(format!(
                    "journal line {} has turn index {}, expected {}; ignoring it and everything after",
                    n + 1,
                    t.index,
                    turns.len() + 1
                ));
                break;
            }
            Err(e) => {
                warnings.push(format!(
                    "journal line {} is corrupt ({e}); ignoring it and everything after",
                    n + 1
                ));
                break;
            }
        }
    }
    Restored {
        turns,
        valid_len: offset as u64,
        warnings,
    }
}

pub fn content_type(payload: &[u8]) -> &'static str {
    match sniff_modality(payload, "") {
        Ok(Modality::Audio) => "audio/wav",
        Ok(Modality::Image) if payload.starts_with(b"P5") => "image/x-portable-graymap",
        Ok(Modality::Image) => "image/png",
        Ok(Modality::Score | Modality::Event | Modality::Video) => "application/json",
        Ok(Modality::Text) if payload.starts_with(b"time_s,") => "text/csv; charset=utf-8",
        _ => "text/plain; charset=utf-8",
    }
}

pub struct Orchestrator {
    data_dir: PathBuf,
    store: ResourceStore,
    registry: Arc<Registry>,
    analyzer: Analyzer,
    builtin: Arc<RuleEngine>,
    transcriber: Arc<dyn Transcriber>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl Orchestrator {
    pub fn new(data_dir: impl Into<PathBuf>, registry: Registry) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        let store_dir = data_dir.join("store");
        let store = ResourceStore::open(&store_dir).map_err(|e| ServiceError::Io {
            path: store_dir.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
        let sessions = data_dir.join("sessions");
        fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        let analyzer = Analyzer::default();
        let builtin = Arc::new(RuleEngine::default());
        Ok(Orchestrator {
            data_dir,
            store,
            registry: Arc::new(registry),
            analyzer,
            builtin,
            transcriber: Arc::new(SineCodecTranscriber),
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_transcriber(mut self, t: Arc<dyn Transcriber>) -> Self {
        self.transcriber = t;
        self
    }

    pub fn with_analyzer(mut self, analyzer: Analyzer) -> Self {
        self.analyzer = analyzer;
        self
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn store(&self) -> &ResourceStore {
        &self.store
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    fn journal_path(&self, id: &str) -> PathBuf {
        self.data_dir.join("sessions").join(format!("{id}.jsonl"))
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.data_dir.join("sessions").join(format!("{id}.meta.json"))
    }

    fn engine_for(&self, choice: EngineChoice) -> Result<Arc<dyn DialogueEngine>, ErrorReport> {
        match choice {
            EngineChoice::Builtin => Ok(self.builtin.clone()),
            EngineChoice::External => Ok(Arc::new(ExternalEngine::from_env()?)),
        }
    }

    /// Creates and persists an empty session. `engine` is "builtin"
    /// (default) or "external".
    pub fn create_session(&self, engine: Option<&str>) -> Result<SessionMeta, ServiceError> {
        let choice: EngineChoice = engine.unwrap_or("builtin").parse()?;
        let engine = self.engine_for(choice)?;
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        let id = loop {
            let candidate = format!("{:016x}", rand::random::<u64>());
            if !sessions.contains_key(&candidate) && !self.meta_path(&candidate).exists() {
                break candidate;
            }
        };
        let meta = SessionMeta {
            session_id: id.clone(),
            created_at: Utc::now(),
            engine: choice,
        };
        write_atomic(&self.meta_path(&id), &serde_json::to_vec_pretty(&meta)?)?;
        let journal = self.journal_path(&id);
        fs::File::create(&journal).map_err(io_err(&journal))?;
        sessions.insert(
            id.clone(),
            Arc::new(Mutex::new(Session {
                meta: meta.clone(),
                context: Context::new(id),
                engine: Some(engine),
            })),
        );
        Ok(meta)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        if let Some(s) = self.sessions.lock().expect("session table poisoned").get(id) {
            return Ok(s.clone());
        }
        let (session, warnings) = self.restore_session(id)?;
        for w in warnings {
            log::warn!("session {id}: {w}");
        }
        let mut table = self.sessions.lock().expect("session table poisoned");
        Ok(table.entry(id.to_string()).or_insert_with(|| Arc::new(Mutex::new(session))).clone())
    }

    /// Loads a session from disk. A corrupt tail is cut off so later turns
    /// append after the last valid one.
    pub fn restore_session(&self, id: &str) -> Result<(Session, Vec<String>), ServiceError> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(ServiceError::UnknownSession(id.to_string()));
        }
        let meta_path = self.meta_path(id);
        let journal = self.journal_path(id);
        if !meta_path.exists() && !journal.exists() {
            return Err(ServiceError::UnknownSession(id.to_string()));
        }
        let mut warnings = Vec::new();
        let meta = match fs::read(&meta_path).ok().and_then(|b| serde_json::from_slice::<SessionMeta>(&b).ok()) {
            Some(m) => m,
            None => {
                warnings.push("session header missing or unreadable; assuming the builtin engine".into());
                SessionMeta {
                    session_id: id.to_string(),
                    created_at: Utc::now(),
                    engine: EngineChoice::Builtin,
                }
            }
        };
        let raw = match fs::read(&journal) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&journal)(e)),
        };
        let restored = read_journal(&raw);
        warnings.extend(restored.warnings);
        if restored.valid_len < raw.len() as u64 {
            let f = OpenOptions::new().write(true).open(&journal).map_err(io_err(&journal))?;
            f.set_len(restored.valid_len).map_err(io_err(&journal))?;
        }
        let engine = match self.engine_for(meta.engine) {
            Ok(e) => Some(e),
            Err(e) => {
                warnings.push(e.message);
                None
            }
        };
        let mut context = Context::new(id);
        context.turns = restored.turns;
        Ok((
            Session {
                meta,
                context,
                engine,
            },
            warnings,
        ))
    }

    pub fn get_session(&self, id: &str) -> Result<SessionView, ServiceError> {
        let s = self.session(id)?;
        let s = s.lock().expect("session poisoned");
        Ok(SessionView {
            meta: s.meta.clone(),
            turns: s.context.turns.clone(),
        })
    }

    pub fn context(&self, id: &str) -> Result<Context, ServiceError> {
        let s = self.session(id)?;
        let ctx = s.lock().expect("session poisoned").context.clone();
        Ok(ctx)
    }

    /// Stored bytes and a content type.
    pub fn get_resource(&self, id: &str) -> Result<(Vec<u8>, &'static str), ServiceError> {
        let rid = ResourceId(id.to_string());
        match self.store.load(&rid) {
            Ok(bytes) => {
                let ct = content_type(&bytes);
                Ok((bytes, ct))
            }
            Err(_) => Err(ServiceError::UnknownResource(id.to_string())),
        }
    }

    /// Runs one full turn and journals it. Failures of the dialogue itself
    /// come back inside `Turn::error`; only a missing session or a journal
    /// write failure is an `Err`.
    pub fn post_turn(&self, session_id: &str, req: TurnRequest) -> Result<Turn, ServiceError> {
        let session = self.session(session_id)?;
        let mut session = session.lock().expect("session poisoned");
        let turn = self.process(&session, req);
        let line = serde_json::to_string(&turn)?;
        append_line(&self.journal_path(session_id), &line)?;
        session
            .context
            .append_turn(turn.clone())
            .expect("turn index follows the context");
        Ok(turn)
    }

    fn process(&self, session: &Session, req: TurnRequest) -> Turn {
        let ctx = &session.context;
        let mut turn = Turn {
            index: ctx.next_index(),
            query: Query::text(""),
            description_audio: None,
            args: None,
            outputs: Vec::new(),
            resources: Vec::new(),
            response_text: String::new(),
            attachments: Vec::new(),
            error: None,
        };
        if let Err(e) = self.fill_turn(session, req, &mut turn) {
            let r = render_error(&e);
            turn.response_text = if turn.response_text.is_empty() {
                r.text
            } else {
                format!("{}\n{}", turn.response_text, r.text)
            };
            turn.error = Some(e);
        }
        turn
    }

    fn fill_turn(&self, session: &Session, req: TurnRequest, turn: &mut Turn) -> Result<(), ErrorReport> {
        let index = turn.index;
        for u in &req.uploads {
            let r = self
                .store
                .store_resource(&u.bytes, &u.name, Origin::UserUpload { turn: index })?;
            turn.resources.push(r);
        }
        let uploads: Vec<Resource> = turn.resources.clone();
        let mut query = Query {
            description: Description::Text(String::new()),
            resources: uploads.iter().map(|r| r.id.clone()).collect(),
        };
        match req.description {
            DescriptionInput::Text(t) => query.description = Description::Text(t),
            DescriptionInput::Audio(bytes) => {
                let r = self
                    .store
                    .store_resource(&bytes, "description.wav", Origin::UserUpload { turn: index })?;
                if r.modality != Modality::Audio {
                    return Err(ErrorReport::bad_format(format!(
                        "the spoken request must be WAV audio, got {}",
                        r.modality
                    )));
                }
                turn.description_audio = Some(r.id.clone());
                query.description = Description::Audio(r.id);
            }
        }
        turn.query = query.clone();
        let query = transform_query(query, &self.store, self.transcriber.as_ref())?;
        turn.query = query.clone();

        let engine = session.engine.as_ref().ok_or_else(|| {
            ErrorReport::engine_unavailable("the session's external engine is not configured")
        })?;
        let Some(args) = self
            .analyzer
            .analyze(&query, &uploads, &session.context, engine.as_ref(), &self.registry)?
        else {
            let desc = query.description.as_text().unwrap_or_default();
            turn.response_text = engine.chat(desc)?;
            return Ok(());
        };

        let stages = args.stages();
        let scope = Scope::of(&session.context).with_uploads(&uploads);
        let run = run_pipeline(&self.registry, &stages, &self.store, scope, index);
        let mut recorded = run.stages.clone();
        recorded.extend(stages[run.stages.len()..].iter().cloned());
        turn.args = StructuredArguments::from_stages(recorded);
        turn.outputs = output_ids(&run.outputs);
        for o in &run.outputs {
            turn.resources.extend(o.resources.iter().cloned());
        }
        let rendered = render_outputs(&run.outputs, &self.store)?;
        turn.response_text = rendered.text;
        turn.attachments = rendered.attachments;
        match run.error {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let dir = path.parent().expect("file has a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

/// One `write` of the whole line, then fsync.
fn append_line(path: &Path, line: &str) -> Result<(), ServiceError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut buf = Vec::with_capacity(line.len() + 1);
    buf.extend_from_slice(line.as_bytes());
    buf.push(b'\n');
    f.write_all(&buf).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))?;
    Ok(())
}
