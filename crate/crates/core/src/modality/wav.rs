//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.

use super::AudioBuffer;
use crate::types::ErrorReport;

const PCM_FORMAT: u16 = 1;
const BITS_PER_SAMPLE: u16 = 16;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn is_wav(bytes: &[u8]) -> bool {
    bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WAVE"
}

/// Parses a PCM 16-bit little-endian WAV. The fmt chunk must precede data;
/// unknown chunks are skipped.
pub fn read_wav(bytes: &[u8]) -> Result<AudioBuffer, ErrorReport> {
    if !is_wav(bytes) {
        return Err(ErrorReport::bad_format("not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u32)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(ErrorReport::bad_format("truncated WAV fmt chunk"));
                }
                let format = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if format != PCM_FORMAT {
                    return Err(ErrorReport::bad_format(format!(
                        "compressed WAV (format tag {format}) is not supported"
                    )));
                }
                if bits != BITS_PER_SAMPLE {
                    return Err(ErrorReport::bad_format(format!(
                        "{bits}-bit WAV is not supported, expected 16-bit PCM"
                    )));
                }
                if channels == 0 || channels > 2 {
                    return Err(ErrorReport::bad_format(format!(
                        "{channels}-channel WAV is not supported, expected mono or stereo"
                    )));
                }
                if rate == 0 {
                    return Err(ErrorReport::bad_format("WAV sample rate is zero"));
                }
                fmt = Some((channels, rate));
            }
            b"data" => {
                let Some((channels, rate)) = fmt else {
                    return Err(ErrorReport::bad_format("WAV data chunk precedes fmt chunk"));
                };
                if body + size > bytes.len() {
                    return Err(ErrorReport::bad_format("truncated WAV data chunk"));
                }
                let data = &bytes[body..body + size];
                let frame = 2 * channels as usize;
                let frames = data.len() / frame;
                let mut out = vec![Vec::with_capacity(frames); channels as usize];
                for f in 0..frames {
                    for (c, ch) in out.iter_mut().enumerate() {
                        let at = f * frame + 2 * c;
                        let v = i16::from_le_bytes([data[at], data[at + 1]]);
                        ch.push(v as f32 / 32768.0);
                    }
                }
                return AudioBuffer::new(rate, out);
            }
            _ => {}
        }
        // chunks are word-aligned
        pos = body + size + (size & 1);
    }
    Err(ErrorReport::bad_format("WAV has no data chunk"))
}

fn quantize(s: f32) -> i16 {
    (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes a canonical 44-byte-header PCM 16-bit WAV.
pub fn write_wav(audio: &AudioBuffer) -> Vec<u8> {
    let channels = audio.channels.len() as u16;
    let frames = audio.num_samples();
    let data_len = frames * channels as usize * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&audio.sample_rate.to_le_bytes());
    let block_align = channels * 2;
    out.extend_from_slice(&(audio.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&BITS_PER_SAMPLE.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for f in 0..frames {
        for ch in &audio.channels {
            out.extend_from_slice(&quantize(ch[f]).to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ErrorCode;
    use proptest::prelude::*;

    fn header(channels: u16, rate: u32, bits: u16, format: u16, data_len: u32) -> Vec<u8> {
        let mut h = Vec::new();
        h.extend_from_slice(b"RIFF");
        h.extend_from_slice(&(36 + data_len).to_le_bytes());
        h.extend_from_slice(b"WAVEfmt ");
        h.extend_from_slice(&16u32.to_le_bytes());
        h.extend_from_slice(&format.to_le_bytes());
        h.extend_from_slice(&channels.to_le_bytes());
        h.extend_from_slice(&rate.to_le_bytes());
        let align = channels * bits / 8;
        h.extend_from_slice(&(rate * align as u32).to_le_bytes());
        h.extend_from_slice(&align.to_le_bytes());
        h.extend_from_slice(&bits.to_le_bytes());
        h.extend_from_slice(b"data");
        h.extend_from_slice(&data_len.to_le_bytes());
        h
    }

    #[test]
    fn one_second_of_silence() {
        let mut bytes = header(1, 16000, 16, 1, 32000);
        bytes.extend(std::iter::repeat_n(0u8, 32000));
        let a = read_wav(&bytes).unwrap();
        assert_eq!(a.sample_rate, 16000);
        assert_eq!(a.channels.len(), 1);
        assert_eq!(a.num_samples(), 16000);
        assert!(a.channels[0].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn rejects_24_bit() {
        let mut bytes = header(1, 16000, 24, 1, 6);
        bytes.extend([0u8; 6]);
        let e = read_wav(&bytes).unwrap_err();
        assert_eq!(e.code, ErrorCode::BadResourceFormat);
    }

    #[test]
    fn rejects_compressed_and_multichannel() {
        let mut adpcm = header(1, 16000, 16, 2, 4);
        adpcm.extend([0u8; 4]);
        assert_eq!(read_wav(&adpcm).unwrap_err().code, ErrorCode::BadResourceFormat);
        let mut quad = header(4, 16000, 16, 1, 8);
        quad.extend([0u8; 8]);
        assert_eq!(read_wav(&quad).unwrap_err().code, ErrorCode::BadResourceFormat);
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = b"RIFF\0\0\0\0WAVELIST\x03\0\0\0abc\0".to_vec();
        let h = header(1, 8000, 16, 1, 4);
        bytes.extend_from_slice(&h[12..]);
        bytes.extend_from_slice(&[0x00, 0x40, 0x00, 0xc0]);
        let a = read_wav(&bytes).unwrap();
        assert_eq!(a.channels[0], vec![0.5, -0.5]);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let mut bytes = header(1, 16000, 16, 1, 100);
        bytes.extend([0u8; 10]);
        assert_eq!(read_wav(&bytes).unwrap_err().code, ErrorCode::BadResourceFormat);
    }

    proptest! {
        #[test]
        fn canonical_bytes_round_trip(
            stereo in any::<bool>(),
            frames in prop::collection::vec(any::<(i16, i16)>(), 0..300),
            rate in 1u32..96000,
        ) {
            let channels: u16 = if stereo { 2 } else { 1 };
            let mut bytes = header(channels, rate, 16, 1, frames.len() as u32 * 2 * channels as u32);
            for (l, r) in &frames {
                bytes.extend_from_slice(&l.to_le_bytes());
                if stereo {
                    bytes.extend_from_slice(&r.to_le_bytes());
                }
            }
            let a = read_wav(&bytes).unwrap();
            prop_assert_eq!(write_wav(&a), bytes);
        }
    }
}
