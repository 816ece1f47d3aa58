//! Audio clips and WAV I/O.
//!
//! Mono float samples in `[-1, 1]`. WAV read supports PCM 16-bit and
//! float-32; stereo inputs are downmixed by averaging. Writes are float-32
//! mono.

use std::path::Path;

use crate::error::{Error, Result};

/// A mono audio clip.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Build a clip, validating that every sample is finite and the rate is positive.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("audio contains non-finite samples"));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Scale all samples by a constant gain.
    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Linear-interpolation resample to a new rate. Intended for moving
    /// between the two supported pipeline rates; not a polyphase resampler.
    pub fn resampled(&self, target_rate: u32) -> Result<AudioClip> {
        if target_rate == 0 {
            return Err(Error::invalid("target_rate must be positive"));
        }
        if target_rate == self.sample_rate || self.samples.is_empty() {
            return Ok(AudioClip {
                samples: self.samples.clone(),
                sample_rate: target_rate,
            });
        }
        let ratio = self.sample_rate as f64 / target_rate as f64;
        let out_len = ((self.samples.len() as f64) / ratio).round().max(1.0) as usize;
        let last = self.samples.len() - 1;
        let samples = (0..out_len)
            .map(|n| {
                let pos = (n as f64 * ratio).min(last as f64);
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                if frac == 0.0 || i == last {
                    self.samples[i]
                } else {
                    self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
                }
            })
            .collect();
        Ok(AudioClip {
            samples,
            sample_rate: target_rate,
        })
    }
}

/// Read a WAV file into a mono clip. Stereo is downmixed by averaging.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(Error::format("wav has zero channels"));
    }
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::format(format!(
                "unsupported wav encoding: {fmt:?} {bits}-bit (PCM 16-bit and float-32 supported)"
            )))
        }
    };
    let samples: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::format("wav contains non-finite samples"));
    }
    AudioClip::new(samples, spec.sample_rate)
}

/// Write a clip as float-32 mono WAV.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
    for &s in clip.samples() {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_rate_and_nonfinite() {
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 16_000).is_err());
    }

    #[test]
    fn wav_roundtrip_mono_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let clip = AudioClip::new(vec![0.0, 0.5, -0.25, 1.0], 16_000).unwrap();
        write_wav(&path, &clip).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 16_000);
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn stereo_pcm16_downmix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 48_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        // L = 0.5, R = -0.5 -> mix 0; L = 0.25, R = 0.25 -> mix 0.25
        for (l, r) in [(16384i16, -16384i16), (8192, 8192)] {
            w.write_sample(l).unwrap();
            w.write_sample(r).unwrap();
        }
        w.finalize().unwrap();
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.len(), 2);
        assert!(clip.samples()[0].abs() < 1e-9);
        assert!((clip.samples()[1] - 0.25).abs() < 1e-4);
    }

    #[test]
    fn linear_resample_is_exact_on_lines() {
        let n = 480;
        let ramp: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let clip = AudioClip::new(ramp, 48_000).unwrap();
        let down = clip.resampled(16_000).unwrap();
        assert_eq!(down.len(), 160);
        for (i, &v) in down.samples().iter().enumerate() {
            let t = i as f64 * 3.0 / (n - 1) as f64;
            assert!((v - t).abs() < 1e-12);
        }
    }
}
