//! RIFF/WAVE, PCM 16-bit little-endian, mono.
//!
//! Reading maps a stored sample `q` to `q / 32768`. Writing maps `x` to
//! `round(x · 32768)` (halves away from zero) clamped to `[−32768, 32767]`.

use std::path::Path;

use crate::{Error, Result};

const HEADER_LEN: usize = 44;

fn bad(field: &'static str, detail: impl Into<String>) -> Error {
    Error::Wav { field, detail: detail.into() }
}

pub fn quantize(x: f32) -> i16 {
    (x as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn dequantize(q: i16) -> f32 {
    q as f32 / 32768.0
}

/// Canonical 44-byte header followed by the samples.
pub fn encode(samples: &[f32], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(HEADER_LEN + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses a mono PCM16 file image, returning samples and sample rate.
/// Unknown chunks are skipped.
pub fn decode(bytes: &[u8]) -> Result<(Vec<f32>, u32)> {
    if bytes.len() < 12 {
        return Err(bad("riff_header", format!("{} bytes is shorter than a RIFF header", bytes.len())));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(bad("riff_id", format!("found {:?}", String::from_utf8_lossy(&bytes[0..4]))));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(bad("wave_id", format!("found {:?}", String::from_utf8_lossy(&bytes[8..12]))));
    }
    let mut pos = 12;
    let mut rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).filter(|&e| e <= bytes.len());
        match id {
            b"fmt " => {
                let end = end.ok_or_else(|| bad("fmt_size", "fmt chunk runs past end of file"))?;
                if size < 16 {
                    return Err(bad("fmt_size", format!("{size} bytes, need 16")));
                }
                let fmt = &bytes[body..end];
                let format = u16_at(fmt, 0);
                if format != 1 {
                    return Err(bad("audio_format", format!("{format} is not PCM (1)")));
                }
                let channels = u16_at(fmt, 2);
                if channels != 1 {
                    return Err(bad("channels", format!("{channels} channels, only mono is supported")));
                }
                let bits = u16_at(fmt, 14);
                if bits != 16 {
                    return Err(bad("bits_per_sample", format!("{bits} bits, only 16 is supported")));
                }
                let align = u16_at(fmt, 12);
                if align != 2 {
                    return Err(bad("block_align", format!("{align}, expected 2")));
                }
                rate = Some(u32_at(fmt, 4));
            }
            b"data" => {
                let rate = rate.ok_or_else(|| bad("fmt", "data chunk before fmt chunk"))?;
                let end = end.ok_or_else(|| bad("data_size", format!("{size} bytes declared, file truncated")))?;
                if !size.is_multiple_of(2) {
                    return Err(bad("data_size", format!("{size} bytes is not a whole number of samples")));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| dequantize(i16::from_le_bytes([c[0], c[1]])))
                    .collect();
                return Ok((samples, rate));
            }
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    Err(bad(if rate.is_some() { "data" } else { "fmt" }, "chunk missing"))
}

pub fn read(path: impl AsRef<Path>) -> Result<(Vec<f32>, u32)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write(path: impl AsRef<Path>, samples: &[f32], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(samples, sample_rate)).map_err(|e| Error::io(path, e))
}
