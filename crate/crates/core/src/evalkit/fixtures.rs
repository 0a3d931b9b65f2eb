//! Synthetic upload fixtures, addressed by `fixture:<kind>[:<arg>]` specs.
//!
//! | spec | payload |
//! |---|---|
//! | `fixture:speech:<text>` | codec speech of `<text>` |
//! | `fixture:noisy:<text>` | codec speech with a DC offset and hiss |
//! | `fixture:tone:<hz>:<secs>` | 0.5-amplitude sine |
//! | `fixture:silence:<secs>` | zeros |
//! | `fixture:burst` | 0.25 s silence, 0.5 s tone, 0.25 s silence |
//! | `fixture:image` | 32×32 gradient PGM |
//! | `fixture:score:<midi,...>` | 0.3 s notes |

use std::path::Path;

use rand::{Rng, SeedableRng};

use crate::execution::stubs::{Note, Score};
use crate::modality::{encode_text_audio, write_wav, AudioBuffer, GrayImage};
use crate::types::ErrorReport;

pub const FIXTURE_PREFIX: &str = "fixture:";
const RATE: u32 = 16_000;

fn tone(freq: f64, amp: f64, secs: f64) -> Vec<f32> {
    let n = (secs * RATE as f64).round() as usize;
    (0..n)
        .map(|t| (amp * (2.0 * std::f64::consts::PI * freq * t as f64 / RATE as f64).sin()) as f32)
        .collect()
}

fn secs(arg: Option<&str>, default: f64) -> Result<f64, ErrorReport> {
    match arg {
        None | Some("") => Ok(default),
        Some(s) => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v > 0.0 && *v <= 600.0)
            .ok_or_else(|| ErrorReport::bad_format(format!("bad duration '{s}' in fixture spec"))),
    }
}

fn wav(samples: Vec<f32>) -> Result<Vec<u8>, ErrorReport> {
    Ok(write_wav(&AudioBuffer::mono(RATE, samples)?))
}

/// Builds the payload for a `fixture:` spec.
pub fn fixture_bytes(spec: &str) -> Result<Vec<u8>, ErrorReport> {
    let body = spec
        .strip_prefix(FIXTURE_PREFIX)
        .ok_or_else(|| ErrorReport::bad_format(format!("'{spec}' is not a fixture spec")))?;
    let (kind, arg) = match body.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (body, None),
    };
    match kind {
        "speech" => Ok(write_wav(&encode_text_audio(arg.unwrap_or("hello world"))?)),
        "noisy" => {
            let clean = encode_text_audio(arg.unwrap_or("hello world"))?;
            let mut rng = rand::rngs::StdRng::seed_from_u64(7);
            let x = clean.channels[0]
                .iter()
                .map(|s| 0.6 * s + 0.2 + rng.random_range(-0.01f32..0.01))
                .collect();
            wav(x)
        }
        "tone" => {
            let (f, d) = match arg.and_then(|a| a.split_once(':')) {
                Some((f, d)) => (f, Some(d)),
                None => (arg.unwrap_or("440"), None),
            };
            let f: f64 = f
                .parse()
                .map_err(|_| ErrorReport::bad_format(format!("bad frequency '{f}' in fixture spec")))?;
            wav(tone(f, 0.5, secs(d, 1.0)?))
        }
        "silence" => wav(vec![0.0; (secs(arg, 1.0)? * RATE as f64).round() as usize]),
        "burst" => {
            let mut x = vec![0.0; RATE as usize / 4];
            x.extend(tone(440.0, 0.5, 0.5));
            x.extend(vec![0.0; RATE as usize / 4]);
            wav(x)
        }
        "image" => {
            let mut img = GrayImage::new(32, 32);
            for r in 0..32 {
                for c in 0..32 {
                    img.set(r, c, (r * 8) as u8 ^ (c * 4) as u8);
                }
            }
            Ok(img.encode())
        }
        "score" => {
            let notes = arg
                .unwrap_or("60,62,64,65,67")
                .split(',')
                .map(|m| {
                    m.trim()
                        .parse::<i64>()
                        .map(|midi| Note {
                            text: "la".into(),
                            midi,
                            dur: 0.3,
                        })
                        .map_err(|_| ErrorReport::bad_format(format!("bad midi '{m}' in fixture spec")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(serde_json::to_vec(&Score { notes }).expect("score serializes"))
        }
        other => Err(ErrorReport::bad_format(format!("unknown fixture kind '{other}'"))),
    }
}

/// Resolves an upload entry: a fixture spec, or a path relative to `base`.
/// Returns a display name and the bytes.
pub fn load_upload(entry: &str, base: &Path) -> Result<(String, Vec<u8>), ErrorReport> {
    if entry.starts_with(FIXTURE_PREFIX) {
        return Ok((entry.to_string(), fixture_bytes(entry)?));
    }
    let path = base.join(entry);
    let bytes = std::fs::read(&path).map_err(|e| {
        ErrorReport::missing(format!("cannot read upload {}: {e}", path.display()))
            .with_suggestion("Check the file path.")
    })?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| entry.to_string());
    Ok((name, bytes))
}
