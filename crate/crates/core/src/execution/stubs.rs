//! Deterministic stand-ins for the audio foundation models.
//!
//! Every tunable number lives in [`STUB_CONFIG`].

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{EventRecord, RawOutput};
use crate::analysis::{Params, TaskKind};
use crate::modality::codec::push_tone;
use crate::modality::{decode_audio_text, encode_text_audio, read_wav, write_wav, AudioBuffer, GrayImage};
use crate::store::fnv1a64;
use crate::types::{ErrorReport, Modality};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StubConfig {
    pub sample_rate: u32,
    pub detect_frame: usize,
    pub detect_hop: usize,
    pub detect_threshold: f64,
    pub detect_min_frames: usize,
    pub posterior_full_scale: f64,
    pub enhance_peak: f64,
    pub enhance_floor: f64,
    pub binaural_delay: usize,
    pub midi_min: i64,
    pub midi_max: i64,
    pub sing_amplitude: f64,
    pub video_fps: usize,
    pub video_size: usize,
    pub face_lo: usize,
    pub face_hi: usize,
    pub face_value: u8,
    pub mouth_width: usize,
    pub mouth_row: usize,
    pub mouth_max_height: f64,
    pub mouth_full_scale: f64,
    pub mouth_value: u8,
    pub separation_alpha: f64,
    pub hash_tones: usize,
    pub hash_tone_s: f64,
    pub hash_tone_amplitude: f64,
}

pub const STUB_CONFIG: StubConfig = StubConfig {
    sample_rate: 16_000,
    detect_frame: 400,
    detect_hop: 160,
    detect_threshold: 0.1,
    detect_min_frames: 5,
    posterior_full_scale: 0.5,
    enhance_peak: 0.9,
    enhance_floor: 1e-6,
    binaural_delay: 16,
    midi_min: 21,
    midi_max: 108,
    sing_amplitude: 0.5,
    video_fps: 10,
    video_size: 64,
    face_lo: 8,
    face_hi: 55,
    face_value: 128,
    mouth_width: 24,
    mouth_row: 44,
    mouth_max_height: 20.0,
    mouth_full_scale: 0.5,
    mouth_value: 255,
    separation_alpha: 0.1,
    hash_tones: 4,
    hash_tone_s: 0.5,
    hash_tone_amplitude: 0.4,
};

/// Builtin stub names and the task each implements.
pub const STUBS: &[(&str, TaskKind)] = &[
    ("asr", TaskKind::SpeechRecognition),
    ("translate", TaskKind::SpeechTranslation),
    ("style", TaskKind::StyleTransfer),
    ("enhance", TaskKind::SpeechEnhancement),
    ("separate", TaskKind::SpeechSeparation),
    ("binaural", TaskKind::MonoToBinaural),
    ("inpaint", TaskKind::AudioInpainting),
    ("extract", TaskKind::SoundExtraction),
    ("detect", TaskKind::SoundDetection),
    ("talking_head", TaskKind::TalkingHeadSynthesis),
    ("tts", TaskKind::TextToSpeech),
    ("tta", TaskKind::TextToAudio),
    ("caption", TaskKind::AudioCaption),
    ("image2audio", TaskKind::ImageToAudio),
    ("sing", TaskKind::SingingSynthesis),
];

pub fn stub_task(name: &str) -> Option<TaskKind> {
    STUBS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

fn require_mono(a: &AudioBuffer, what: &str) -> Result<(), ErrorReport> {
    if a.is_mono() {
        Ok(())
    } else {
        Err(ErrorReport::bad_format(format!("{what} needs mono audio, got {} channels", a.channels.len()))
            .with_suggestion("Convert the audio to a single channel and try again."))
    }
}

fn require_samples(a: &AudioBuffer, what: &str) -> Result<(), ErrorReport> {
    if a.num_samples() == 0 {
        Err(ErrorReport::bad_format(format!("{what} got empty audio")))
    } else {
        Ok(())
    }
}

/// Average of all channels.
pub fn mixdown(a: &AudioBuffer) -> Vec<f32> {
    let k = a.channels.len() as f32;
    (0..a.num_samples())
        .map(|i| a.channels.iter().map(|c| c[i]).sum::<f32>() / k)
        .collect()
}

pub fn rms(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / x.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub events: Vec<EventRecord>,
    /// Per-frame activation in [0, 1].
    pub posterior: Vec<f64>,
    pub frame_rms: Vec<f64>,
}

/// Frame-wise RMS with zero padding for clips shorter than one frame.
pub fn frame_rms(x: &[f32]) -> Vec<f64> {
    let c = &STUB_CONFIG;
    if x.len() <= c.detect_frame {
        return vec![rms(x) * (x.len() as f64 / c.detect_frame as f64).sqrt()];
    }
    let n = 1 + (x.len() - c.detect_frame) / c.detect_hop;
    (0..n)
        .map(|i| rms(&x[i * c.detect_hop..i * c.detect_hop + c.detect_frame]))
        .collect()
}

pub fn event_detect(a: &AudioBuffer) -> Result<Detection, ErrorReport> {
    require_mono(a, "sound detection")?;
    require_samples(a, "sound detection")?;
    let c = &STUB_CONFIG;
    let frame_rms = frame_rms(&a.channels[0]);
    let step = c.detect_hop as f64 / a.sample_rate as f64;
    let mut events = Vec::new();
    let mut i = 0;
    while i < frame_rms.len() {
        if frame_rms[i] <= c.detect_threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i < frame_rms.len() && frame_rms[i] > c.detect_threshold {
            i += 1;
        }
        if i - start >= c.detect_min_frames {
            let run = &frame_rms[start..i];
            events.push(EventRecord {
                onset_s: start as f64 * step,
                offset_s: i as f64 * step,
                label: "sound".into(),
                score: run.iter().sum::<f64>() / run.len() as f64,
            });
        }
    }
    let posterior = frame_rms
        .iter()
        .map(|r| (r / c.posterior_full_scale).min(1.0))
        .collect();
    Ok(Detection {
        events,
        posterior,
        frame_rms,
    })
}

pub fn enhance(a: &AudioBuffer) -> Result<AudioBuffer, ErrorReport> {
    require_mono(a, "speech enhancement")?;
    let x = &a.channels[0];
    let c = &STUB_CONFIG;
    let mean = x.iter().map(|&s| s as f64).sum::<f64>() / x.len().max(1) as f64;
    let peak = x.iter().fold(0.0f64, |m, &s| m.max((s as f64 - mean).abs()));
    let y = if peak < c.enhance_floor {
        vec![0.0; x.len()]
    } else {
        let g = c.enhance_peak / peak;
        x.iter().map(|&s| ((s as f64 - mean) * g) as f32).collect()
    };
    AudioBuffer::mono(a.sample_rate, y)
}

pub fn mono_to_binaural(a: &AudioBuffer) -> Result<AudioBuffer, ErrorReport> {
    require_mono(a, "mono-to-binaural")?;
    let x = &a.channels[0];
    let d = STUB_CONFIG.binaural_delay.min(x.len());
    let mut right = vec![0.0; d];
    right.extend_from_slice(&x[..x.len() - d]);
    AudioBuffer::new(a.sample_rate, vec![x.clone(), right])
}

/// Replaces `[t0, t1)` by a straight line between the samples bordering it.
pub fn inpaint(a: &AudioBuffer, t0: f64, t1: f64) -> Result<AudioBuffer, ErrorReport> {
    let dur = a.duration_s();
    let eps = 0.5 / a.sample_rate as f64;
    if !(t0.is_finite() && t1.is_finite()) || t0 < 0.0 || t0 >= t1 || t1 > dur + eps {
        return Err(ErrorReport::bad_format(format!(
            "mask [{t0}, {t1}) is not a valid range inside the {dur:.2} s clip"
        ))
        .with_suggestion(format!(
            "Give a mask with 0 <= start < end <= {dur:.2}, for example \"from 0.5 s to 1.0 s\"."
        )));
    }
    let n = a.num_samples();
    let s0 = ((t0 * a.sample_rate as f64).round() as usize).min(n);
    let s1 = ((t1 * a.sample_rate as f64).round() as usize).min(n);
    let channels = a
        .channels
        .iter()
        .map(|x| {
            let mut y = x.clone();
            let left = if s0 == 0 { 0.0 } else { x[s0 - 1] as f64 };
            let right = if s1 >= n { 0.0 } else { x[s1] as f64 };
            let span = (s1 - s0 + 1) as f64;
            for (k, v) in y[s0..s1].iter_mut().enumerate() {
                *v = (left + (right - left) * (k + 1) as f64 / span) as f32;
            }
            y
        })
        .collect();
    AudioBuffer::new(a.sample_rate, channels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    #[serde(default)]
    pub text: String,
    pub midi: i64,
    pub dur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub notes: Vec<Note>,
}

impl Score {
    pub fn parse(bytes: &[u8]) -> Result<Self, ErrorReport> {
        serde_json::from_slice(bytes).map_err(|e| {
            ErrorReport::bad_format(format!("score is not valid JSON: {e}")).with_suggestion(
                "Use {\"notes\":[{\"text\":\"la\",\"midi\":69,\"dur\":0.5}]}.",
            )
        })
    }
}

pub fn midi_frequency(midi: i64) -> f64 {
    440.0 * 2f64.powf((midi - 69) as f64 / 12.0)
}

pub fn sing(score: &Score) -> Result<AudioBuffer, ErrorReport> {
    let c = &STUB_CONFIG;
    if score.notes.is_empty() {
        return Err(ErrorReport::bad_format("the score has no notes"));
    }
    let mut out = Vec::new();
    for (i, n) in score.notes.iter().enumerate() {
        if n.midi < c.midi_min || n.midi > c.midi_max {
            return Err(ErrorReport::bad_format(format!(
                "note {} has midi {}, outside {}..{}",
                i + 1,
                n.midi,
                c.midi_min,
                c.midi_max
            )));
        }
        if !(n.dur.is_finite() && n.dur > 0.0) {
            return Err(ErrorReport::bad_format(format!("note {} has a non-positive duration", i + 1)));
        }
        let len = (n.dur * c.sample_rate as f64).round() as usize;
        push_tone(&mut out, midi_frequency(n.midi), c.sing_amplitude, c.sample_rate, len);
    }
    AudioBuffer::mono(c.sample_rate, out)
}

pub fn mouth_height(window_rms: f64) -> usize {
    let c = &STUB_CONFIG;
    (c.mouth_max_height * (window_rms / c.mouth_full_scale).min(1.0)).round() as usize
}

/// One frame for a given mouth opening.
pub fn portrait_frame(h: usize) -> GrayImage {
    let c = &STUB_CONFIG;
    let mut img = GrayImage::new(c.video_size, c.video_size);
    img.fill_rect(c.face_lo..c.face_hi + 1, c.face_lo..c.face_hi + 1, c.face_value);
    if h > 0 {
        let top = c.mouth_row - h / 2;
        let left = (c.video_size - c.mouth_width) / 2;
        img.fill_rect(top..top + h, left..left + c.mouth_width, c.mouth_value);
    }
    img
}

pub fn talking_head(a: &AudioBuffer) -> Result<Vec<GrayImage>, ErrorReport> {
    require_mono(a, "talking head synthesis")?;
    require_samples(a, "talking head synthesis")?;
    let c = &STUB_CONFIG;
    let x = &a.channels[0];
    let rate = a.sample_rate as usize;
    let frames = (x.len() * c.video_fps).div_ceil(rate);
    Ok((0..frames)
        .map(|k| {
            let lo = k * rate / c.video_fps;
            let hi = ((k + 1) * rate / c.video_fps).min(x.len());
            portrait_frame(mouth_height(rms(&x[lo..hi])))
        })
        .collect())
}

fn dictionaries() -> &'static BTreeMap<String, BTreeMap<String, String>> {
    static D: OnceLock<BTreeMap<String, BTreeMap<String, String>>> = OnceLock::new();
    D.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/dictionary.json")).expect("shipped dictionary parses")
    })
}

/// Word-for-word dictionary translation. Unknown words pass through.
pub fn translate_text(text: &str, target: &str) -> Result<String, ErrorReport> {
    let dict = dictionaries().get(target).ok_or_else(|| {
        ErrorReport::bad_format(format!("no dictionary for target language '{target}'")).with_suggestion(format!(
            "Available targets: {}.",
            dictionaries().keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let words: Vec<String> = text
        .split(' ')
        .map(|w| {
            let core = w.trim_matches(|c: char| !c.is_alphanumeric());
            match dict.get(&core.to_lowercase()) {
                Some(t) if !core.is_empty() => w.replacen(core, t, 1),
                _ => w.to_string(),
            }
        })
        .collect();
    Ok(words.join(" "))
}

/// Rescales `source` so its peak equals the peak of `reference`.
pub fn style_transfer(source: &AudioBuffer, reference: &AudioBuffer) -> Result<AudioBuffer, ErrorReport> {
    let ps = source.peak();
    let g = if ps > 0.0 { reference.peak() / ps } else { 1.0 };
    AudioBuffer::new(
        source.sample_rate,
        source.channels.iter().map(|c| c.iter().map(|&s| s * g).collect()).collect(),
    )
}

/// One-pole low-pass and its complement.
pub fn separate(a: &AudioBuffer) -> Result<(AudioBuffer, AudioBuffer), ErrorReport> {
    let x = mixdown(a);
    let alpha = STUB_CONFIG.separation_alpha;
    let mut low = Vec::with_capacity(x.len());
    let mut y = 0.0f64;
    for &s in &x {
        y += alpha * (s as f64 - y);
        low.push(y as f32);
    }
    let high = x.iter().zip(&low).map(|(a, b)| a - b).collect();
    Ok((AudioBuffer::mono(a.sample_rate, low)?, AudioBuffer::mono(a.sample_rate, high)?))
}

/// Crops the highest-scoring detected event.
pub fn extract(a: &AudioBuffer) -> Result<AudioBuffer, ErrorReport> {
    let mono = AudioBuffer::mono(a.sample_rate, mixdown(a))?;
    let det = event_detect(&mono)?;
    let best = det
        .events
        .iter()
        .enumerate()
        .max_by(|(i, x), (j, y)| x.score.total_cmp(&y.score).then(j.cmp(i)))
        .map(|(_, e)| e)
        .ok_or_else(|| {
            ErrorReport::tool_failed("no events found")
                .with_suggestion("Check that the input audio contains an audible sound, then try again.")
        })?;
    let n = mono.num_samples();
    let lo = ((best.onset_s * a.sample_rate as f64).round() as usize).min(n);
    let hi = ((best.offset_s * a.sample_rate as f64).round() as usize).clamp(lo, n);
    AudioBuffer::mono(a.sample_rate, mono.channels[0][lo..hi].to_vec())
}

pub fn caption(a: &AudioBuffer) -> Result<String, ErrorReport> {
    require_samples(a, "audio captioning")?;
    let mono = AudioBuffer::mono(a.sample_rate, mixdown(a))?;
    let n = event_detect(&mono)?.events.len();
    Ok(format!("Audio: {:.1}s, {} events, peak {:.2}", a.duration_s(), n, a.peak()))
}

/// Four short tones whose pitches come from the hash of `seed`.
pub fn hash_tones(seed: &[u8]) -> Result<AudioBuffer, ErrorReport> {
    let c = &STUB_CONFIG;
    let h = fnv1a64(seed).to_be_bytes();
    let len = (c.hash_tone_s * c.sample_rate as f64).round() as usize;
    let mut out = Vec::with_capacity(len * c.hash_tones);
    for &b in h.iter().take(c.hash_tones) {
        push_tone(&mut out, 200.0 + 8.0 * b as f64, c.hash_tone_amplitude, c.sample_rate, len);
    }
    AudioBuffer::mono(c.sample_rate, out)
}

fn param_str<'p>(params: &'p Params, key: &str) -> Option<&'p str> {
    params.get(key).and_then(|v| v.as_str()).filter(|s| !s.is_empty())
}

fn mask_param(params: &Params) -> Result<(f64, f64), ErrorReport> {
    let bad = || {
        ErrorReport::bad_format("inpainting needs a mask [start_s, end_s]")
            .with_suggestion("Say which part to fill, for example \"inpaint it from 0.5 s to 1.0 s\".")
    };
    let arr = params.get("mask").and_then(|v| v.as_array()).ok_or_else(bad)?;
    match arr.as_slice() {
        [a, b] => Ok((a.as_f64().ok_or_else(bad)?, b.as_f64().ok_or_else(bad)?)),
        _ => Err(bad()),
    }
}

/// One loaded input, in slot order.
pub struct StubInput<'a> {
    pub modality: Modality,
    pub bytes: &'a [u8],
}

fn audio_at(inputs: &[StubInput<'_>], i: usize) -> Result<AudioBuffer, ErrorReport> {
    let inp = inputs
        .get(i)
        .ok_or_else(|| ErrorReport::missing(format!("input {} (audio) was not provided", i + 1)))?;
    read_wav(inp.bytes)
}

fn text_input(inputs: &[StubInput<'_>], params: &Params, key: &str) -> Result<String, ErrorReport> {
    if let Some(s) = param_str(params, key).or_else(|| param_str(params, "text")) {
        return Ok(s.to_string());
    }
    match inputs.first() {
        Some(i) if i.modality == Modality::Text => Ok(String::from_utf8_lossy(i.bytes).into_owned()),
        _ => Err(ErrorReport::missing(format!("no {key} was given"))
            .with_suggestion("Put the text in quotes, for example: say 'good morning'.")),
    }
}

fn audio_out(a: &AudioBuffer) -> Vec<u8> {
    write_wav(a)
}

/// Runs the named builtin stub on already-validated inputs.
pub fn run_stub(name: &str, inputs: &[StubInput<'_>], params: &Params) -> Result<RawOutput, ErrorReport> {
    let mut out = RawOutput::default();
    match name {
        "asr" => out.text = Some(decode_audio_text(&audio_at(inputs, 0)?)?),
        "translate" => {
            let heard = decode_audio_text(&audio_at(inputs, 0)?)?;
            let target = param_str(params, "target").unwrap_or("fr");
            out.text = Some(translate_text(&heard, target)?);
        }
        "style" => out.payloads.push(audio_out(&style_transfer(&audio_at(inputs, 0)?, &audio_at(inputs, 1)?)?)),
        "enhance" => out.payloads.push(audio_out(&enhance(&audio_at(inputs, 0)?)?)),
        "separate" => {
            let (lo, hi) = separate(&audio_at(inputs, 0)?)?;
            out.payloads.push(audio_out(&lo));
            out.payloads.push(audio_out(&hi));
            out.diagnostics = "placeholder split: one-pole low-pass and its residual".into();
        }
        "binaural" => out.payloads.push(audio_out(&mono_to_binaural(&audio_at(inputs, 0)?)?)),
        "inpaint" => {
            let (t0, t1) = mask_param(params)?;
            out.payloads.push(audio_out(&inpaint(&audio_at(inputs, 0)?, t0, t1)?));
        }
        "extract" => out.payloads.push(audio_out(&extract(&audio_at(inputs, 0)?)?)),
        "detect" => {
            let det = event_detect(&audio_at(inputs, 0)?)?;
            out.posterior = Some(det.posterior.iter().map(|&p| vec![p]).collect());
            out.categories = vec!["sound".into()];
            out.events = Some(det.events);
        }
        "talking_head" => {
            let frames = talking_head(&audio_at(inputs, 0)?)?;
            out.video = Some((STUB_CONFIG.video_fps, frames.iter().map(GrayImage::encode).collect()));
        }
        "tts" => out.payloads.push(audio_out(&encode_text_audio(&text_input(inputs, params, "text")?)?)),
        "tta" => {
            let d = text_input(inputs, params, "description")?;
            out.payloads.push(audio_out(&hash_tones(d.as_bytes())?));
        }
        "caption" => out.text = Some(caption(&audio_at(inputs, 0)?)?),
        "image2audio" => {
            let img = inputs
                .first()
                .ok_or_else(|| ErrorReport::missing("no image was provided"))?;
            out.payloads.push(audio_out(&hash_tones(img.bytes)?));
        }
        "sing" => {
            let score = inputs
                .first()
                .ok_or_else(|| ErrorReport::missing("no score was provided"))?;
            out.payloads.push(audio_out(&sing(&Score::parse(score.bytes)?)?));
        }
        other => return Err(ErrorReport::tool_failed(format!("unknown builtin stub '{other}'"))),
    }
    Ok(out)
}
