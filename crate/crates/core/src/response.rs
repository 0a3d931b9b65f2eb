//! Turns tool outputs into user-facing responses with attachments.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{TaskFamily, TaskKind};
use crate::execution::ToolOutput;
use crate::modality::{AudioBuffer, GrayImage};
use crate::store::ResourceStore;
use crate::types::{ErrorCode, ErrorReport, Modality, Origin, ResourceId};

pub const WAVEFORM_WIDTH: usize = 512;
pub const WAVEFORM_HEIGHT: usize = 128;
const WAVEFORM_CENTER: usize = 64;
const WAVEFORM_HALF: f64 = 63.0;
/// Seconds between posteriorgram rows.
pub const POSTERIOR_STEP_S: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttachmentKind {
    AudioFile,
    WaveformImage,
    VideoFrames,
    PosteriorgramCsv,
    TextBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub resource_id: ResourceId,
    pub kind: AttachmentKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub caption: String,
}

impl Attachment {
    fn new(resource_id: ResourceId, kind: AttachmentKind, caption: impl Into<String>) -> Self {
        Attachment {
            resource_id,
            kind,
            caption: caption.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub text: String,
    pub attachments: Vec<Attachment>,
}

/// Attachment kinds produced for a task, decided by its output modality.
pub fn attachment_recipe(task: TaskKind) -> &'static [AttachmentKind] {
    match task.output_modality() {
        Modality::Audio => &[AttachmentKind::AudioFile, AttachmentKind::WaveformImage],
        Modality::Text => &[AttachmentKind::TextBlock],
        Modality::Video => &[AttachmentKind::VideoFrames],
        Modality::Event => &[AttachmentKind::PosteriorgramCsv],
        Modality::Image | Modality::Score => &[],
    }
}

/// 512×128 bar plot of per-column peak magnitude, centred on row 64.
pub fn render_waveform_image(a: &AudioBuffer) -> GrayImage {
    let mut img = GrayImage::new(WAVEFORM_WIDTH, WAVEFORM_HEIGHT);
    let n = a.num_samples();
    for j in 0..WAVEFORM_WIDTH {
        let lo = j * n / WAVEFORM_WIDTH;
        let hi = (j + 1) * n / WAVEFORM_WIDTH;
        let peak = a
            .channels
            .iter()
            .flat_map(|c| c[lo..hi].iter())
            .fold(0.0f64, |m, &s| m.max((s as f64).abs()))
            .min(1.0);
        let h = (WAVEFORM_HALF * peak).round() as usize;
        img.fill_rect(WAVEFORM_CENTER - h..WAVEFORM_CENTER + h + 1, j..j + 1, 255);
    }
    img
}

/// CSV with a `time_s` column and one column per category.
pub fn render_posteriorgram(categories: &[String], posterior: &[Vec<f64>]) -> Result<String, ErrorReport> {
    let mut out = String::from("time_s");
    for c in categories {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, row) in posterior.iter().enumerate() {
        if row.len() != categories.len() {
            return Err(ErrorReport::bad_format(format!(
                "posterior row {i} has {} values for {} categories",
                row.len(),
                categories.len()
            )));
        }
        let _ = write!(out, "{:.2}", i as f64 * POSTERIOR_STEP_S);
        for v in row {
            let _ = write!(out, ",{v:.4}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn derived(store: &ResourceStore, bytes: &[u8], o: &ToolOutput) -> Result<ResourceId, ErrorReport> {
    let turn = o.resources.first().map(|r| r.origin.turn()).unwrap_or(0);
    Ok(store
        .store_resource(
            bytes,
            "attachment",
            Origin::ToolOutput {
                turn,
                tool_id: o.tool_id.clone(),
            },
        )?
        .id)
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("1 {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn event_summary(o: &ToolOutput) -> String {
    let events = o.events.as_deref().unwrap_or(&[]);
    if events.is_empty() {
        return "No sound events detected.".into();
    }
    let items: Vec<String> = events
        .iter()
        .map(|e| format!("{} from {:.2} s to {:.2} s (score {:.2})", e.label, e.onset_s, e.offset_s, e.score))
        .collect();
    format!("Detected {}: {}.", plural(events.len(), "sound event"), items.join("; "))
}

/// Renders one tool's output. Derived files (waveforms, CSV) go to the store
/// but are not added to the conversation's resources.
pub fn render_response(o: &ToolOutput, store: &ResourceStore) -> Result<Response, ErrorReport> {
    let mut r = Response::default();
    match o.task.output_modality() {
        Modality::Text => {
            r.text = o.text.clone().unwrap_or_default();
            for res in &o.resources {
                r.attachments.push(Attachment::new(res.id.clone(), AttachmentKind::TextBlock, ""));
            }
        }
        Modality::Event => {
            r.text = event_summary(o);
            let csv = render_posteriorgram(&o.categories, o.posterior.as_deref().unwrap_or(&[]))?;
            let id = derived(store, csv.as_bytes(), o)?;
            r.attachments.push(Attachment::new(id, AttachmentKind::PosteriorgramCsv, "posteriorgram"));
        }
        Modality::Video => {
            let n = o.frames.len();
            let fps = o.resources.first().map(|m| manifest_fps(store, &m.id)).unwrap_or(0);
            r.text = format!("Generated a {}: {} at {fps} fps.", o.task.label().to_lowercase(), plural(n, "frame"));
            for m in &o.resources {
                r.attachments.push(Attachment::new(m.id.clone(), AttachmentKind::VideoFrames, "manifest"));
            }
            let mut picks = vec![0, n / 2, n.saturating_sub(1)];
            picks.dedup();
            for i in picks.into_iter().filter(|&i| i < n) {
                r.attachments.push(Attachment::new(
                    o.frames[i].id.clone(),
                    AttachmentKind::VideoFrames,
                    format!("frame {} of {n}", i + 1),
                ));
            }
        }
        Modality::Audio => {
            let mut secs = Vec::new();
            for res in &o.resources {
                let audio = store.load_audio(&res.id)?;
                secs.push(format!("{:.2} s", audio.duration_s()));
                r.attachments.push(Attachment::new(res.id.clone(), AttachmentKind::AudioFile, ""));
                let pgm = render_waveform_image(&audio).encode();
                let id = derived(store, &pgm, o)?;
                r.attachments.push(Attachment::new(id, AttachmentKind::WaveformImage, "waveform"));
            }
            r.text = format!(
                "{}: generated {} ({}).",
                o.task.label(),
                plural(o.resources.len(), "audio file"),
                secs.join(", ")
            );
        }
        Modality::Image | Modality::Score => {}
    }
    if !o.diagnostics.is_empty() {
        log::debug!("{}: {}", o.tool_id, o.diagnostics);
    }
    Ok(r)
}

fn manifest_fps(store: &ResourceStore, id: &ResourceId) -> u64 {
    store
        .load(id)
        .ok()
        .and_then(|b| serde_json::from_slice::<serde_json::Value>(&b).ok())
        .and_then(|v| v.get("fps").and_then(|f| f.as_u64()))
        .unwrap_or(0)
}

/// Renders every stage of a chain in order.
pub fn render_outputs(outputs: &[ToolOutput], store: &ResourceStore) -> Result<Response, ErrorReport> {
    let mut all = Response::default();
    let mut texts = Vec::new();
    for o in outputs {
        let r = render_response(o, store)?;
        texts.push(r.text);
        all.attachments.extend(r.attachments);
    }
    all.text = texts.join("\n");
    Ok(all)
}

/// Message plus suggestion. Unsupported-task errors always name the
/// supported families.
pub fn render_error(e: &ErrorReport) -> Response {
    let mut suggestion = e.suggestion.clone();
    if e.code == ErrorCode::UnsupportedTask && !TaskFamily::SUPPORTED.iter().all(|f| suggestion.contains(f.label())) {
        let _ = write!(suggestion, " Supported task families: {}.", TaskFamily::supported_list());
    }
    let mut text = e.message.trim_end_matches('.').to_string();
    text.push_str(". ");
    text.push_str(suggestion.trim());
    Response {
        text,
        attachments: Vec::new(),
    }
}
