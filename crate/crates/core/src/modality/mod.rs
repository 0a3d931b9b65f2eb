//! Modality handling: sniffing uploads, the WAV codec, and turning spoken
//! query descriptions into text before analysis.

pub mod codec;
pub mod pgm;
pub mod wav;

pub use codec::{decode_audio_text, encode_text_audio};
pub use pgm::GrayImage;
pub use wav::{read_wav, write_wav};

use crate::store::ResourceStore;
use crate::types::{Description, ErrorCode, ErrorReport, Modality, Query};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decoded PCM audio. Every channel has the same length; samples are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f32>>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f32>>) -> Result<Self, ErrorReport> {
        if channels.is_empty() || channels.len() > 2 {
            return Err(ErrorReport::bad_format(format!(
                "audio must have 1 or 2 channels, got {}",
                channels.len()
            )));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(ErrorReport::bad_format("audio channels differ in length"));
        }
        if channels.iter().flatten().any(|s| !s.is_finite()) {
            return Err(ErrorReport::bad_format("audio contains non-finite samples"));
        }
        Ok(AudioBuffer {
            sample_rate,
            channels,
        })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f32>) -> Result<Self, ErrorReport> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn num_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_mono(&self) -> bool {
        self.channels.len() == 1
    }

    pub fn duration_s(&self) -> f64 {
        self.num_samples() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0f32, |m, s| m.max(s.abs()))
    }
}

/// Speech-to-text used by the modality transformer.
pub trait Transcriber: Send + Sync {
    fn transcribe(&self, audio: &AudioBuffer) -> Result<String, ErrorReport>;
}

/// Built-in transcriber: the sine-codec decoder.
#[derive(Debug, Default, Clone, Copy)]
pub struct SineCodecTranscriber;

impl Transcriber for SineCodecTranscriber {
    fn transcribe(&self, audio: &AudioBuffer) -> Result<String, ErrorReport> {
        decode_audio_text(audio)
    }
}

/// Classifies a payload by magic bytes. The name is not consulted.
pub fn sniff_modality(payload: &[u8], _name: &str) -> Result<Modality, ErrorReport> {
    if payload.starts_with(b"RIFF") {
        if payload.len() < 12 {
            return Err(ErrorReport::bad_format("truncated RIFF header"));
        }
        if &payload[8..12] == b"WAVE" {
            return Ok(Modality::Audio);
        }
    }
    if payload.starts_with(b"P5") {
        GrayImage::decode(payload)?;
        return Ok(Modality::Image);
    }
    if payload.len() < PNG_MAGIC.len() && PNG_MAGIC.starts_with(payload) && payload.len() >= 4 {
        return Err(ErrorReport::bad_format("truncated PNG signature"));
    }
    if payload.starts_with(PNG_MAGIC) {
        // signature + IHDR chunk
        if payload.len() < 33 || &payload[12..16] != b"IHDR" {
            return Err(ErrorReport::bad_format("truncated PNG header"));
        }
        return Ok(Modality::Image);
    }
    let trimmed = payload.trim_ascii_start();
    if trimmed.first() == Some(&b'{') {
        if let Ok(serde_json::Value::Object(map)) = serde_json::from_slice(payload) {
            if map.contains_key("notes") {
                return Ok(Modality::Score);
            }
            if map.contains_key("events") {
                return Ok(Modality::Event);
            }
            if map.contains_key("fps") && map.contains_key("frames") {
                return Ok(Modality::Video);
            }
        }
    }
    Ok(Modality::Text)
}

/// Rewrites the query so its description is text. Text descriptions and
/// the resource list pass through untouched.
pub fn transform_query(
    query: Query,
    store: &ResourceStore,
    transcriber: &dyn Transcriber,
) -> Result<Query, ErrorReport> {
    match &query.description {
        Description::Text(_) => Ok(query),
        Description::Audio(id) => {
            let audio = store.load_audio(id)?;
            let text = transcriber.transcribe(&audio).map_err(|e| {
                ErrorReport::new(
                    ErrorCode::BadResourceFormat,
                    format!("could not transcribe the spoken request: {}", e.message),
                )
                .with_suggestion("Type the request instead, or record it again more clearly.")
            })?;
            Ok(Query {
                description: Description::Text(text),
                resources: query.resources,
            })
        }
    }
}
