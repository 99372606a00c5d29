//! Writes a few seconds of every synthetic noise kind as 16-bit WAV files.

use std::path::PathBuf;

use ancsim::data_io::{synth_noise, write_wav, NoiseKind, WavEncoding};

fn main() -> ancsim::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "noises".into()));
    std::fs::create_dir_all(&dir).map_err(|e| ancsim::AncError::Io { path: dir.clone(), source: e })?;
    for (i, kind) in [NoiseKind::White, NoiseKind::Pink, NoiseKind::EngineHarmonics, NoiseKind::ModulatedBabbleLike]
        .into_iter()
        .enumerate()
    {
        let x = synth_noise(kind, 5.0, i as u64)?;
        let path = dir.join(format!("{}.wav", kind.name()));
        let report = write_wav(&x, &path, WavEncoding::Pcm16)?;
        println!("{} ({} samples, {} clipped)", path.display(), x.len(), report.clipped);
    }
    Ok(())
}
