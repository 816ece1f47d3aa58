//! Loudness and spectral-centroid extraction from magnitude spectrograms.

use crate::audio::AudioClip;
use crate::controls::pitch::PitchBackend;
use crate::controls::{ControlSet, ControlTrack, CENTROID_NAME, LOUDNESS_NAME};
use crate::dsp::{
    a_weighting_gain, hz_to_midi, stft, FrameParams, Spectrogram, SINE_SPECTRUM_ENERGY,
};
use crate::error::Result;

/// Loudness floor for silent frames, in dBFS.
pub const LOUDNESS_FLOOR_DB: f64 = -120.0;

/// Per-frame A-weighted RMS loudness in dBFS.
///
/// The calibrated spectrum is A-weighted per bin; the frame level is the
/// L2 norm of the result referenced to a full-scale sine (which reads
/// exactly 0 dBFS under the `2/sum(w)` calibration).
pub fn extract_loudness(spec: &Spectrogram) -> Result<ControlTrack> {
    let cal = spec.calibration();
    let gains: Vec<f64> = spec
        .bin_freqs
        .iter()
        .map(|&f| a_weighting_gain(f))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(spec.n_frames());
    for n in 0..spec.n_frames() {
        let mut sum_sq = 0.0;
        for k in 0..spec.n_bins() {
            let y = gains[k] * spec.magnitudes[(k, n)] * cal;
            sum_sq += y * y;
        }
        let db = if sum_sq > 0.0 {
            10.0 * (sum_sq / SINE_SPECTRUM_ENERGY).log10()
        } else {
            LOUDNESS_FLOOR_DB
        };
        values.push(db.max(LOUDNESS_FLOOR_DB));
    }
    ControlTrack::new(LOUDNESS_NAME, spec.frame_rate, values)
}

/// Per-frame spectral centroid, as MIDI scaled to roughly (0, 1) by
/// dividing by 127. Near-silent frames hold the previous value (0.5 when
/// the first frame is silent).
pub fn extract_centroid(spec: &Spectrogram) -> Result<ControlTrack> {
    let cal = spec.calibration();
    let mut values = Vec::with_capacity(spec.n_frames());
    let mut prev = 0.5;
    for n in 0..spec.n_frames() {
        let mut num = 0.0;
        let mut den = 0.0;
        // bin 0 (DC) excluded: it has no defined pitch-scale position
        for k in 1..spec.n_bins() {
            let m = spec.magnitudes[(k, n)];
            num += spec.bin_freqs[k] * m;
            den += m;
        }
        let v = if den * cal < 1e-8 {
            prev
        } else {
            let c_hz = num / den;
            (hz_to_midi(c_hz)? / 127.0).clamp(0.0, 1.0)
        };
        values.push(v);
        prev = v;
    }
    ControlTrack::new(CENTROID_NAME, spec.frame_rate, values)
}

/// Which control channels to extract or condition on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct ControlSubset {
    pub loudness: bool,
    pub centroid: bool,
    pub pitch: bool,
}

impl ControlSubset {
    pub fn all() -> Self {
        ControlSubset {
            loudness: true,
            centroid: true,
            pitch: true,
        }
    }

    pub fn none() -> Self {
        ControlSubset::default()
    }

    pub fn is_empty(&self) -> bool {
        !(self.loudness || self.centroid || self.pitch)
    }

    pub fn count(&self) -> usize {
        self.loudness as usize + self.centroid as usize + self.pitch as usize
    }

    /// Parse a comma-separated list like "loudness,centroid" ("all"/"none"
    /// accepted).
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => return Ok(ControlSubset::all()),
            "none" | "" => return Ok(ControlSubset::none()),
            _ => {}
        }
        let mut subset = ControlSubset::none();
        for part in s.split(',') {
            match part.trim() {
                "loudness" => subset.loudness = true,
                "centroid" => subset.centroid = true,
                "pitch" => subset.pitch = true,
                other => {
                    return Err(crate::error::Error::invalid(format!(
                        "unknown control '{other}' (expected loudness, centroid, pitch)"
                    )))
                }
            }
        }
        Ok(subset)
    }
}

impl std::fmt::Display for ControlSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return write!(f, "none");
        }
        let mut parts = Vec::new();
        if self.loudness {
            parts.push("loudness");
        }
        if self.centroid {
            parts.push("centroid");
        }
        if self.pitch {
            parts.push("pitch");
        }
        write!(f, "{}", parts.join(","))
    }
}

/// Extract the requested controls from a clip at the analysis frame rate.
/// Pitch extraction also yields the periodicity track.
pub fn extract_controls(
    clip: &AudioClip,
    params: &FrameParams,
    subset: ControlSubset,
    backend: &dyn PitchBackend,
) -> Result<ControlSet> {
    let spec = stft(clip, params)?;
    let loudness = if subset.loudness {
        Some(extract_loudness(&spec)?)
    } else {
        None
    };
    let centroid = if subset.centroid {
        Some(extract_centroid(&spec)?)
    } else {
        None
    };
    let (pitch, periodicity) = if subset.pitch {
        let (p, per) = backend.extract(clip, params)?;
        (Some(p), Some(per))
    } else {
        (None, None)
    };
    ControlSet::new(loudness, centroid, pitch, periodicity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sine(freq: f64, amp: f64, dur_s: f64) -> AudioClip {
        let sr = 16_000u32;
        let n = (dur_s * sr as f64) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioClip::new(samples, sr).unwrap()
    }

    fn interior(values: &[f64]) -> &[f64] {
        // drop two frames at each end: their windows overlap edge padding
        &values[2..values.len() - 2]
    }

    #[test]
    fn full_scale_sine_reads_zero_dbfs() {
        let params = FrameParams::for_sample_rate(16_000).unwrap();
        let spec = stft(&sine(1000.0, 1.0, 1.0), &params).unwrap();
        let loud = extract_loudness(&spec).unwrap();
        for &v in interior(&loud.values) {
            assert_abs_diff_eq!(v, 0.0, epsilon = 0.5);
        }
    }

    #[test]
    fn half_amplitude_drops_six_db() {
        let params = FrameParams::for_sample_rate(16_000).unwrap();
        let full = extract_loudness(&stft(&sine(1000.0, 1.0, 0.5), &params).unwrap()).unwrap();
        let half = extract_loudness(&stft(&sine(1000.0, 0.5, 0.5), &params).unwrap()).unwrap();
        for (a, b) in interior(&full.values).iter().zip(interior(&half.values)) {
            assert_abs_diff_eq!(a - b, 6.0206, epsilon = 0.1);
        }
    }

    #[test]
    fn silence_floors() {
        let params = FrameParams::for_sample_rate(16_000).unwrap();
        let clip = AudioClip::new(vec![0.0; 8000], 16_000).unwrap();
        let loud = extract_loudness(&stft(&clip, &params).unwrap()).unwrap();
        assert!(loud.values.iter().all(|&v| v == LOUDNESS_FLOOR_DB));
    }

    #[test]
    fn centroid_of_pure_sine_is_its_pitch_position() {
        let params = FrameParams::for_sample_rate(16_000).unwrap();
        let cen = extract_centroid(&stft(&sine(440.0, 0.8, 0.5), &params).unwrap()).unwrap();
        for &v in interior(&cen.values) {
            assert_abs_diff_eq!(v, 69.0 / 127.0, epsilon = 0.01);
        }
    }

    #[test]
    fn centroid_is_gain_invariant() {
        let params = FrameParams::for_sample_rate(16_000).unwrap();
        let a = extract_centroid(&stft(&sine(620.0, 0.9, 0.4), &params).unwrap()).unwrap();
        let b = extract_centroid(&stft(&sine(620.0, 0.225, 0.4), &params).unwrap()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn silent_frames_hold_previous_centroid() {
        let params = FrameParams::for_sample_rate(16_000).unwrap();
        // half a second of tone, then half a second of silence
        let mut samples = sine(880.0, 0.5, 0.5).samples().to_vec();
        samples.extend(std::iter::repeat(0.0).take(8000));
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let cen = extract_centroid(&stft(&clip, &params).unwrap()).unwrap();
        let n = cen.values.len();
        // deep in the silent tail, the value equals the held tone value
        assert_abs_diff_eq!(cen.values[n - 1], cen.values[n / 2 - 3], epsilon = 1e-9);
        // all-silence clip holds the 0.5 default
        let silent = AudioClip::new(vec![0.0; 4000], 16_000).unwrap();
        let c2 = extract_centroid(&stft(&silent, &params).unwrap()).unwrap();
        assert!(c2.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn subset_parsing() {
        assert_eq!(ControlSubset::parse("all").unwrap(), ControlSubset::all());
        assert_eq!(ControlSubset::parse("none").unwrap(), ControlSubset::none());
        let lc = ControlSubset::parse("loudness,centroid").unwrap();
        assert!(lc.loudness && lc.centroid && !lc.pitch);
        assert!(ControlSubset::parse("sparkle").is_err());
        assert_eq!(lc.to_string(), "loudness,centroid");
    }
}
