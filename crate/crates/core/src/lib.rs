//! Modality-aware dialogue orchestration over a registry of audio task
//! executors.
//!
//! A turn flows through four stages: the spoken description (if any) is
//! transcribed, the text is analysed into structured arguments, the chosen
//! tool or chain runs, and its outputs are rendered as a response.

pub mod analysis;
pub mod context;
pub mod evalkit;
pub mod execution;
pub mod modality;
pub mod response;
pub mod service;
pub mod store;
pub mod types;

pub use analysis::{Analyzer, StructuredArguments, TaskFamily, TaskKind};
pub use context::{Context, ReferenceExpr};
pub use execution::{Registry, ToolDescriptor, ToolOutput};
pub use response::{Attachment, AttachmentKind, Response};
pub use service::{Orchestrator, TurnRequest};
pub use store::ResourceStore;
pub use types::{Description, ErrorCode, ErrorReport, Modality, Query, Resource, ResourceId, Turn};
