//! WAV ingestion and a synthetic four-instrument stand-in.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ad::Series;
use crate::datagen::column_stats;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mono samples in `[-1, 1]` (integer formats) at `sample_rate` Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct WavData {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AudioSources<T> {
    /// `target_len x n_files`, standardized per column.
    pub sources: Series<T>,
    pub sample_rate: u32,
    pub warnings: Vec<String>,
}

fn ingestion(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads 8/16/24/32-bit integer PCM or 32-bit float WAV; channels are averaged.
pub fn read_wav(path: &Path) -> Result<WavData> {
    let mut reader = hound::WavReader::open(path).map_err(|e| ingestion(path, e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(ingestion(path, "no channels"));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Int, bits @ 1..=32) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
        }
        (fmt, bits) => return Err(ingestion(path, format!("unsupported sample format {fmt:?} at {bits} bits"))),
    }
    .map_err(|e| ingestion(path, e.to_string()))?;
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok(WavData {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Writes mono 16-bit PCM; samples are clipped to `[-1, 1]`.
pub fn write_wav_i16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |e: hound::Error| ingestion(path, e.to_string());
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16)
            .map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

/// Block-average decimation by an integer factor.
fn decimate(x: &[f64], factor: usize) -> Vec<f64> {
    if factor == 1 {
        return x.to_vec();
    }
    x.chunks_exact(factor)
        .map(|c| c.iter().sum::<f64>() / factor as f64)
        .collect()
}

/// Loads one source per file at the lowest common sample rate.
///
/// Higher rates must be integer multiples of the lowest. Each channel is
/// truncated to `target_len` samples and standardized.
pub fn load_audio<T: Real, P: AsRef<Path>>(paths: &[P], target_len: usize) -> Result<AudioSources<T>> {
    if paths.len() < 2 {
        return Err(Error::contract("load_audio needs at least two files"));
    }
    if target_len < 2 {
        return Err(Error::contract("target_len must be at least 2"));
    }
    let paths: Vec<PathBuf> = paths.iter().map(|p| p.as_ref().to_path_buf()).collect();
    let waves = paths.iter().map(|p| read_wav(p)).collect::<Result<Vec<_>>>()?;
    let rate = waves.iter().map(|w| w.sample_rate).min().unwrap_or(0);
    if rate == 0 {
        return Err(ingestion(&paths[0], "sample rate is zero"));
    }

    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(paths.len());
    for (path, wave) in paths.iter().zip(&waves) {
        if wave.sample_rate % rate != 0 {
            return Err(ingestion(
                path,
                format!(
                    "sample rate {} Hz cannot be reduced to {rate} Hz by integer decimation",
                    wave.sample_rate
                ),
            ));
        }
        let mut x = decimate(&wave.samples, (wave.sample_rate / rate) as usize);
        if x.len() < target_len {
            return Err(ingestion(
                path,
                format!("{} samples at {rate} Hz, need {target_len}", x.len()),
            ));
        }
        x.truncate(target_len);
        channels.push(x);
    }

    let mut warnings = Vec::new();
    for i in 0..channels.len() {
        for j in 0..i {
            if channels[i] == channels[j] {
                let msg = format!(
                    "{} and {} contain identical audio; duplicate sources break the independence assumption",
                    paths[j].display(),
                    paths[i].display()
                );
                warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let raw = Series::from_fn(target_len, channels.len(), |t, j| channels[j][t]);
    let (mean, std) = column_stats(&raw);
    if let Some(j) = std.iter().position(|&s| !(s > 1e-12)) {
        return Err(ingestion(&paths[j], "silent file: zero-variance channel cannot be standardized"));
    }
    let sources = Series::from_fn(target_len, channels.len(), |t, j| T::lit((raw.get(t, j) - mean[j]) / std[j]));
    Ok(AudioSources {
        sources,
        sample_rate: rate,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Bass,
    Lead,
    Drum,
    Pad,
}

impl Instrument {
    pub const ALL: [Instrument; 4] = [Instrument::Bass, Instrument::Lead, Instrument::Drum, Instrument::Pad];

    pub fn name(self) -> &'static str {
        match self {
            Instrument::Bass => "bass",
            Instrument::Lead => "lead",
            Instrument::Drum => "drum",
            Instrument::Pad => "pad",
        }
    }
}

/// Attack/release envelope on `[0, len)`.
fn envelope(i: usize, len: usize, attack: usize, release: usize) -> f64 {
    let a = if attack == 0 { 1.0 } else { (i as f64 / attack as f64).min(1.0) };
    let left = len.saturating_sub(i);
    let r = if release == 0 { 1.0 } else { (left as f64 / release as f64).min(1.0) };
    a * r
}

/// Semitone offsets of a minor pentatonic scale.
const SCALE: [i32; 5] = [0, 3, 5, 7, 10];

fn note_freq(root: f64, rng: &mut impl Rng, octaves: i32) -> f64 {
    let deg = SCALE[rng.gen_range(0..SCALE.len())] + 12 * rng.gen_range(0..octaves);
    root * 2f64.powf(deg as f64 / 12.0)
}

fn synth(inst: Instrument, len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let beat = (rate / 16.0) as usize;
    match inst {
        // Plucked low notes, two harmonics, one or two beats each.
        Instrument::Bass => {
            let mut t = 0;
            while t < len {
                let dur = beat * rng.gen_range(1..=2);
                let f = note_freq(40.0, rng, 1);
                let phase = rng.gen_range(0.0..TAU);
                for i in 0..dur.min(len - t) {
                    let s = i as f64 / rate;
                    let amp = (-(i as f64) / beat as f64).exp() * envelope(i, dur, beat / 16, beat / 8);
                    out[t + i] = amp * ((TAU * f * s + phase).sin() + 0.3 * (2.0 * TAU * f * s + phase).sin());
                }
                t += dur;
            }
        }
        // Legato melody with vibrato, variable note lengths.
        Instrument::Lead => {
            let mut t = 0;
            let mut phase = rng.gen_range(0.0..TAU);
            while t < len {
                let dur = beat / 2 * rng.gen_range(1..=4);
                let f = note_freq(96.0, rng, 2);
                for i in 0..dur.min(len - t) {
                    let s = (t + i) as f64 / rate;
                    phase += TAU * f * (1.0 + 0.01 * (TAU * 5.0 * s).sin()) / rate;
                    out[t + i] = envelope(i, dur, beat / 8, beat / 8) * phase.sin();
                }
                t += dur;
            }
        }
        // Sparse decaying low thumps with a downward pitch sweep.
        Instrument::Drum => {
            let mut t = rng.gen_range(0..beat);
            while t < len {
                let f0 = rng.gen_range(30.0..50.0);
                let dur = beat;
                let mut phase = 0.0;
                for i in 0..dur.min(len - t) {
                    let u = i as f64 / beat as f64;
                    phase += TAU * f0 * (1.0 + (-4.0 * u).exp()) / rate;
                    out[t + i] += (-3.0 * u).exp() * phase.sin();
                }
                t += beat * rng.gen_range(2..=4);
            }
        }
        // Slowly swelling two-note chord.
        Instrument::Pad => {
            let mut t = 0;
            while t < len {
                let dur = beat * rng.gen_range(4..=8);
                let f = note_freq(16.0, rng, 1);
                let ph = [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)];
                for i in 0..dur.min(len - t) {
                    let s = (t + i) as f64 / rate;
                    let swell = (std::f64::consts::PI * i as f64 / dur as f64).sin();
                    out[t + i] = swell * ((TAU * f * s + ph[0]).sin() + 0.6 * (TAU * 1.5 * f * s + ph[1]).sin());
                }
                t += dur;
            }
        }
    }
    out
}

/// Additive-synthesis stand-ins for four instrumental recordings,
/// normalized to peak 0.9.
pub fn synth_instruments(len: usize, sample_rate: u32, seed: u64) -> Vec<(Instrument, Vec<f64>)> {
    Instrument::ALL
        .iter()
        .enumerate()
        .map(|(k, &inst)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut x = synth(inst, len, sample_rate as f64, &mut rng);
            let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                x.iter_mut().for_each(|v| *v *= 0.9 / peak);
            }
            (inst, x)
        })
        .collect()
}
