//! Writes a tone to 16-bit PCM, reads it back and reports the error.
//!
//! ```bash
//! cargo run --release -p mossformer2 --example wav_roundtrip
//! ```

use mossformer2::data::wav;

fn main() -> mossformer2::Result<()> {
    let rate = 8000;
    let tone: Vec<f32> = (0..rate).map(|i| 0.5 * (i as f32 * 440.0 * std::f32::consts::TAU / rate as f32).sin()).collect();
    let path = std::env::temp_dir().join("mossformer2_tone.wav");
    wav::write(&path, &tone, rate as u32)?;
    let bytes = std::fs::metadata(&path).map_err(|e| mossformer2::Error::io(&path, e))?.len();
    let (back, r) = wav::read(&path)?;
    let err = tone.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    println!("{} samples at {r} Hz, {bytes} bytes, max error {err:.2e} (bound {:.2e})", back.len(), 1.0 / 32768.0);
    Ok(())
}
