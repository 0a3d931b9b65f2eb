//! Domain types shared by every stage of the turn pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::StructuredArguments;
use crate::response::Attachment;

/// Media type of a resource. Closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    Text,
    Audio,
    Image,
    Video,
    Event,
    Score,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::Text,
        Modality::Audio,
        Modality::Image,
        Modality::Video,
        Modality::Event,
        Modality::Score,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "Text",
            Modality::Audio => "Audio",
            Modality::Image => "Image",
            Modality::Video => "Video",
            Modality::Event => "Event",
            Modality::Score => "Score",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Content id: 16 hex digits of FNV-1a-64 followed by 8 hex digits of length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(pub String);

impl ResourceId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ResourceId {
    fn from(s: &str) -> Self {
        ResourceId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    UserUpload { turn: usize },
    ToolOutput { turn: usize, tool_id: String },
}

impl Origin {
    pub fn turn(&self) -> usize {
        match self {
            Origin::UserUpload { turn } | Origin::ToolOutput { turn, .. } => *turn,
        }
    }

    pub fn is_tool_output(&self) -> bool {
        matches!(self, Origin::ToolOutput { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioMeta {
    pub sample_rate: u32,
    pub channels: u16,
    pub num_samples: usize,
}

/// Handle to one stored piece of typed media.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub id: ResourceId,
    pub modality: Modality,
    /// Store-relative path.
    pub locator: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<AudioMeta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Description {
    Text(String),
    Audio(ResourceId),
}

impl Description {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Description::Text(s) => Some(s),
            Description::Audio(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub description: Description,
    #[serde(default)]
    pub resources: Vec<ResourceId>,
}

impl Query {
    pub fn text(description: impl Into<String>) -> Self {
        Query {
            description: Description::Text(description.into()),
            resources: Vec::new(),
        }
    }
}

/// One dialogue round as persisted in the session journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    /// The query after modality transformation.
    pub query: Query,
    /// Set when the description arrived as audio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description_audio: Option<ResourceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub args: Option<StructuredArguments>,
    #[serde(default)]
    pub outputs: Vec<ResourceId>,
    /// Records for every upload and tool output introduced by this turn.
    #[serde(default)]
    pub resources: Vec<Resource>,
    pub response_text: String,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

impl Turn {
    pub fn uploads(&self) -> impl DoubleEndedIterator<Item = &Resource> {
        self.resources
            .iter()
            .filter(|r| matches!(r.origin, Origin::UserUpload { .. }))
    }

    pub fn tool_outputs(&self) -> impl DoubleEndedIterator<Item = &Resource> {
        self.resources.iter().filter(|r| r.origin.is_tool_output())
    }

    pub fn resource(&self, id: &ResourceId) -> Option<&Resource> {
        self.resources.iter().find(|r| &r.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    UnsupportedTask,
    ToolExecutionFailed,
    MissingResource,
    BadResourceFormat,
    PipelineModalityMismatch,
    EngineUnavailable,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnsupportedTask => "UNSUPPORTED_TASK",
            ErrorCode::ToolExecutionFailed => "TOOL_EXECUTION_FAILED",
            ErrorCode::MissingResource => "MISSING_RESOURCE",
            ErrorCode::BadResourceFormat => "BAD_RESOURCE_FORMAT",
            ErrorCode::PipelineModalityMismatch => "PIPELINE_MODALITY_MISMATCH",
            ErrorCode::EngineUnavailable => "ENGINE_UNAVAILABLE",
        }
    }

    /// Fallback advice used when a caller has nothing more specific.
    pub fn default_suggestion(self) -> &'static str {
        match self {
            ErrorCode::UnsupportedTask => {
                "Try one of the supported task families: Audio-to-Text, Audio-to-Audio, \
                 Audio-to-Event, Audio-to-Video, Text-to-Audio, Image-to-Audio, Score-to-Audio."
            }
            ErrorCode::ToolExecutionFailed => {
                "Check the input format and parameters, then try again."
            }
            ErrorCode::MissingResource => {
                "Upload the file you want processed, or refer to an earlier turn \
                 (for example \"the audio from turn 1\")."
            }
            ErrorCode::BadResourceFormat => {
                "Provide 16-bit PCM WAV audio (mono or stereo), a P5 PGM or PNG image, \
                 or a JSON score with a \"notes\" list, and check parameter ranges."
            }
            ErrorCode::PipelineModalityMismatch => {
                "Reorder the chain so each step consumes the kind of output the \
                 previous step produces."
            }
            ErrorCode::EngineUnavailable => {
                "Check ORCH_ENGINE_URL and ORCH_ENGINE_KEY, or use the builtin engine."
            }
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// User-facing failure. The suggestion is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ErrorReport {
    pub code: ErrorCode,
    pub message: String,
    pub suggestion: String,
}

impl ErrorReport {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ErrorReport {
            code,
            message: message.into(),
            suggestion: code.default_suggestion().to_string(),
        }
    }

    pub fn with_suggestion(mut self, suggestion: impl Into<String>) -> Self {
        let s = suggestion.into();
        if !s.trim().is_empty() {
            self.suggestion = s;
        }
        self
    }

    pub fn unsupported(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::UnsupportedTask, message)
    }

    pub fn missing(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::MissingResource, message)
    }

    pub fn bad_format(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadResourceFormat, message)
    }

    pub fn tool_failed(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::ToolExecutionFailed, message)
    }

    pub fn engine_unavailable(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::EngineUnavailable, message)
    }
}
