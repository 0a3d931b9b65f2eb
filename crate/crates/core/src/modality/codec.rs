//! Sine codec: an invertible text <-> audio mapping that stands in for
//! speech synthesis and recognition.
//!
//! Each byte `b` becomes a 100 ms tone at `200 + 8·b` Hz. Decoding counts
//! sign changes per segment, so no spectral transform is needed.

use std::f64::consts::PI;

use super::AudioBuffer;
use crate::types::ErrorReport;

pub const CODEC_SAMPLE_RATE: u32 = 16_000;
pub const SEGMENT_SAMPLES: usize = 1_600;
pub const CODEC_AMPLITUDE: f64 = 0.5;
pub const MAX_TEXT_BYTES: usize = 4_096;

pub fn byte_frequency(b: u8) -> f64 {
    200.0 + 8.0 * b as f64
}

/// Appends `len` samples of `amp·sin(2π·freq·t/rate)` with `t` starting at 0.
pub(crate) fn push_tone(out: &mut Vec<f32>, freq: f64, amp: f64, rate: u32, len: usize) {
    out.extend((0..len).map(|t| (amp * (2.0 * PI * freq * t as f64 / rate as f64).sin()) as f32));
}

pub fn encode_text_audio(text: &str) -> Result<AudioBuffer, ErrorReport> {
    let bytes = text.as_bytes();
    if bytes.is_empty() {
        return Err(ErrorReport::bad_format("cannot synthesize empty text")
            .with_suggestion("Provide the text to speak, for example: say 'hello'."));
    }
    if bytes.len() > MAX_TEXT_BYTES {
        return Err(ErrorReport::bad_format(format!(
            "text is {} bytes, the limit is {MAX_TEXT_BYTES}",
            bytes.len()
        ))
        .with_suggestion("Split the text into shorter requests."));
    }
    let mut samples = Vec::with_capacity(bytes.len() * SEGMENT_SAMPLES);
    for &b in bytes {
        push_tone(
            &mut samples,
            byte_frequency(b),
            CODEC_AMPLITUDE,
            CODEC_SAMPLE_RATE,
            SEGMENT_SAMPLES,
        );
    }
    AudioBuffer::mono(CODEC_SAMPLE_RATE, samples)
}

/// Sign changes between successive non-zero samples.
pub fn sign_changes(segment: &[f32]) -> usize {
    let mut prev: Option<bool> = None;
    let mut n = 0;
    for &s in segment {
        if s == 0.0 {
            continue;
        }
        let pos = s > 0.0;
        if let Some(p) = prev {
            if p != pos {
                n += 1;
            }
        }
        prev = Some(pos);
    }
    n
}

/// Maps a per-segment crossing count back to a byte.
///
/// A tone at `f` Hz starting at phase 0 crosses zero `ceil(f/5) - 1` times
/// inside a 1600-sample segment, so `f` lies in `(5z, 5z + 5]`; the bin
/// center is used as the estimate.
pub fn crossings_to_byte(z: usize) -> u8 {
    let f_hat = 5.0 * z as f64 + 2.5;
    ((f_hat - 200.0) / 8.0).round().clamp(0.0, 255.0) as u8
}

pub fn decode_audio_text(audio: &AudioBuffer) -> Result<String, ErrorReport> {
    if audio.num_samples() == 0 {
        return Err(ErrorReport::bad_format("cannot transcribe empty audio"));
    }
    if audio.channels.len() != 1 {
        return Err(ErrorReport::bad_format("transcription expects mono audio")
            .with_suggestion("Convert the recording to a single channel first."));
    }
    if audio.sample_rate != CODEC_SAMPLE_RATE {
        return Err(ErrorReport::bad_format(format!(
            "transcription expects 16 kHz audio, got {} Hz",
            audio.sample_rate
        )));
    }
    let samples = &audio.channels[0];
    if samples.len() < SEGMENT_SAMPLES {
        return Err(ErrorReport::bad_format(
            "audio is shorter than one 100 ms segment",
        ));
    }
    let bytes: Vec<u8> = samples
        .chunks_exact(SEGMENT_SAMPLES)
        .map(|seg| crossings_to_byte(sign_changes(seg)))
        .collect();
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}
