//! Sketchification of control signals: median filtering (and a low-pass
//! alternative) that strips fine temporal detail. Training samples a random
//! filter per example; inference uses a fixed one.

use rand::Rng;

use crate::controls::{ControlSet, ControlTrack, PitchProbMatrix};
use crate::dsp::reflect_index;
use crate::error::{Error, Result};

/// Training sampling range for median windows, in control frames.
pub const MEDIAN_WINDOW_RANGE: (usize, usize) = (1, 25);
/// Training sampling range for low-pass cutoffs, in Hz.
pub const LOWPASS_CUTOFF_RANGE: (f64, f64) = (5.0, 20.0);
/// Fixed inference median window.
pub const INFERENCE_MEDIAN_WINDOW: usize = 10;
/// Fixed inference low-pass cutoff, in Hz.
pub const INFERENCE_LOWPASS_CUTOFF: f64 = 10.0;

/// A concrete sketch filter to apply to all control channels of one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SketchFilterSpec {
    None,
    Median { window_frames: usize },
    Lowpass { cutoff_hz: f64 },
}

/// Which filter family training should sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SketchKind {
    None,
    Median,
    Lowpass,
}

impl std::str::FromStr for SketchKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SketchKind::None),
            "median" => Ok(SketchKind::Median),
            "lowpass" => Ok(SketchKind::Lowpass),
            other => Err(Error::invalid(format!("unknown sketch kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for SketchKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SketchKind::None => write!(f, "none"),
            SketchKind::Median => write!(f, "median"),
            SketchKind::Lowpass => write!(f, "lowpass"),
        }
    }
}

/// Reflect an index into `[0, len)`, repeating the edge sample
/// (scipy-style `reflect`: `d c b a | a b c d | d c b a`). Unlike the
/// mirror reflection used for STFT framing, this keeps monotone sequences
/// monotone across the boundary, which the median's root-signal property
/// relies on.
fn symmetric_index(i: isize, len: usize) -> usize {
    debug_assert!(len > 0);
    let period = 2 * len as isize;
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - 1 - j;
    }
    j as usize
}

/// Sliding median over raw values with reflect padding. Windows of even
/// width cover `[n - w/2, n + w/2 - 1]`; the median of an even count is the
/// lower middle, so outputs are always drawn from the input multiset.
fn median_values(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::invalid("median window must be >= 1"));
    }
    if window == 1 || values.len() <= 1 {
        return Ok(values.to_vec());
    }
    let len = values.len();
    let lead = (window as isize) / 2;
    let mut out = Vec::with_capacity(len);
    let mut buf = vec![0.0f64; window];
    for n in 0..len as isize {
        let start = n - lead;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = values[symmetric_index(start + k as isize, len)];
        }
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(buf[(window - 1) / 2]);
    }
    Ok(out)
}

/// Median-filter a scalar control track.
pub fn median_filter(track: &ControlTrack, window: usize) -> Result<ControlTrack> {
    ControlTrack::new(
        track.name.clone(),
        track.frame_rate,
        median_values(&track.values, window)?,
    )
}

/// Median-filter a pitch matrix: the median runs along time independently
/// for each bin row, then the result is re-thresholded.
pub fn median_filter_pitch(matrix: &PitchProbMatrix, window: usize) -> Result<PitchProbMatrix> {
    let probs = matrix.probs();
    let mut out = probs.clone();
    for (i, row) in probs.rows().into_iter().enumerate() {
        let filtered = median_values(&row.to_vec(), window)?;
        for (n, v) in filtered.into_iter().enumerate() {
            out[(i, n)] = v;
        }
    }
    PitchProbMatrix::new(out, matrix.frame_rate)
}

/// Odd FIR length used for a given frame rate and cutoff: about
/// `4 * frame_rate / cutoff` taps.
fn fir_length(frame_rate: f64, cutoff: f64) -> usize {
    let n = (4.0 * frame_rate / cutoff).round() as usize;
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Zero-phase windowed-sinc low-pass over a scalar track, reflect padded,
/// unit DC gain.
pub fn lowpass_filter(track: &ControlTrack, cutoff_hz: f64) -> Result<ControlTrack> {
    let nyquist = track.frame_rate / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz out of range (0, {nyquist})"
        )));
    }
    let taps = fir_length(track.frame_rate, cutoff_hz);
    let half = (taps / 2) as isize;
    let fc = cutoff_hz / track.frame_rate; // normalized (cycles/frame)
    let win = hamming(taps);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let m = i as isize - half;
            2.0 * fc * sinc(2.0 * fc * m as f64) * win[i]
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in h.iter_mut() {
        *v /= sum;
    }
    let len = track.values.len();
    let mut out = Vec::with_capacity(len);
    for n in 0..len as isize {
        let mut acc = 0.0;
        for (i, &coeff) in h.iter().enumerate() {
            let idx = reflect_index(n + i as isize - half, len);
            acc += coeff * track.values[idx];
        }
        out.push(acc);
    }
    ControlTrack::new(track.name.clone(), track.frame_rate, out)
}

/// Apply a filter spec to every channel of a control set (periodicity
/// included: it rides along with the controls it gates).
pub fn apply_sketch_filter(set: &ControlSet, spec: SketchFilterSpec) -> Result<ControlSet> {
    match spec {
        SketchFilterSpec::None => Ok(set.clone()),
        SketchFilterSpec::Median { window_frames } => ControlSet::new(
            set.loudness
                .as_ref()
                .map(|t| median_filter(t, window_frames))
                .transpose()?,
            set.centroid
                .as_ref()
                .map(|t| median_filter(t, window_frames))
                .transpose()?,
            set.pitch
                .as_ref()
                .map(|p| median_filter_pitch(p, window_frames))
                .transpose()?,
            set.periodicity
                .as_ref()
                .map(|t| median_filter(t, window_frames))
                .transpose()?,
        ),
        SketchFilterSpec::Lowpass { cutoff_hz } => {
            let lp_pitch = |p: &PitchProbMatrix| -> Result<PitchProbMatrix> {
                let probs = p.probs();
                let mut out = probs.clone();
                for (i, row) in probs.rows().into_iter().enumerate() {
                    let t = ControlTrack::new("row", p.frame_rate, row.to_vec())?;
                    let f = lowpass_filter(&t, cutoff_hz)?;
                    for (n, v) in f.values.into_iter().enumerate() {
                        out[(i, n)] = v.clamp(0.0, 1.0);
                    }
                }
                PitchProbMatrix::new(out, p.frame_rate)
            };
            ControlSet::new(
                set.loudness
                    .as_ref()
                    .map(|t| lowpass_filter(t, cutoff_hz))
                    .transpose()?,
                set.centroid
                    .as_ref()
                    .map(|t| lowpass_filter(t, cutoff_hz))
                    .transpose()?,
                set.pitch.as_ref().map(lp_pitch).transpose()?,
                set.periodicity
                    .as_ref()
                    .map(|t| lowpass_filter(t, cutoff_hz))
                    .transpose()?,
            )
        }
    }
}

/// Sample one training filter spec: median windows uniform in 1..=25 frames,
/// low-pass cutoffs uniform in 5..20 Hz. The same spec applies to every
/// channel of the example.
pub fn sample_training_filter(rng: &mut impl Rng, kind: SketchKind) -> SketchFilterSpec {
    match kind {
        SketchKind::None => SketchFilterSpec::None,
        SketchKind::Median => SketchFilterSpec::Median {
            window_frames: rng.gen_range(MEDIAN_WINDOW_RANGE.0..=MEDIAN_WINDOW_RANGE.1),
        },
        SketchKind::Lowpass => SketchFilterSpec::Lowpass {
            cutoff_hz: rng.gen_range(LOWPASS_CUTOFF_RANGE.0..LOWPASS_CUTOFF_RANGE.1),
        },
    }
}
