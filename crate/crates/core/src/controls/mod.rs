//! Time-varying control signals: scalar tracks, pitch probability matrices,
//! and frame-rate alignment.

pub mod container;
pub mod extract;
pub mod pitch;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Number of pitch bins (20-cent grid starting at MIDI 24).
pub const PITCH_BINS: usize = 360;
/// MIDI number of pitch bin 0 (C1).
pub const PITCH_MIDI_BASE: f64 = 24.0;
/// Bins per semitone on the pitch grid.
pub const PITCH_BINS_PER_SEMITONE: f64 = 5.0;
/// Probabilities below this are zeroed to avoid leaking timbre.
pub const PITCH_PROB_THRESHOLD: f64 = 0.1;

/// MIDI number at the center of pitch bin `i`.
pub fn pitch_bin_midi(i: usize) -> f64 {
    PITCH_MIDI_BASE + i as f64 / PITCH_BINS_PER_SEMITONE
}

pub const LOUDNESS_NAME: &str = "loudness_dbfs";
pub const CENTROID_NAME: &str = "centroid_norm";
pub const PERIODICITY_NAME: &str = "periodicity";

pub fn pitch_channel_name(i: usize) -> String {
    format!("pitch_{i:03}")
}

/// A named scalar control signal at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrack {
    pub name: String,
    pub frame_rate: f64,
    pub values: Vec<f64>,
}

impl ControlTrack {
    pub fn new(name: impl Into<String>, frame_rate: f64, values: Vec<f64>) -> Result<Self> {
        if !(frame_rate > 0.0) {
            return Err(Error::invalid("frame_rate must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("control values must be finite"));
        }
        Ok(ControlTrack {
            name: name.into(),
            frame_rate,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear resample to a target rate and exact length (truncate/pad-last).
    pub fn aligned(&self, target_rate: f64, target_len: usize) -> Result<ControlTrack> {
        let values = resample_linear(&self.values, self.frame_rate, target_rate, target_len)?;
        ControlTrack::new(self.name.clone(), target_rate, values)
    }
}

/// Per-frame pitch probabilities on the 20-cent bin grid, `[360 x N]`.
///
/// Constructors zero out entries below [`PITCH_PROB_THRESHOLD`], so an
/// emitted matrix never carries values in `(0, 0.1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchProbMatrix {
    probs: Array2<f64>,
    pub frame_rate: f64,
}

impl PitchProbMatrix {
    pub fn new(mut probs: Array2<f64>, frame_rate: f64) -> Result<Self> {
        if probs.nrows() != PITCH_BINS {
            return Err(Error::shape(format!(
                "pitch matrix must have {PITCH_BINS} rows, got {}",
                probs.nrows()
            )));
        }
        if !(frame_rate > 0.0) {
            return Err(Error::invalid("frame_rate must be positive"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::invalid("pitch probabilities must lie in [0, 1]"));
        }
        probs.mapv_inplace(|p| if p < PITCH_PROB_THRESHOLD { 0.0 } else { p });
        Ok(PitchProbMatrix { probs, frame_rate })
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    pub fn n_frames(&self) -> usize {
        self.probs.ncols()
    }

    /// Winning bin per frame, or `None` when the frame has no mass.
    pub fn argmax_bin(&self, frame: usize) -> Option<usize> {
        let col = self.probs.column(frame);
        let (mut best, mut best_p) = (0usize, 0.0f64);
        for (i, &p) in col.iter().enumerate() {
            if p > best_p {
                best = i;
                best_p = p;
            }
        }
        (best_p > 0.0).then_some(best)
    }

    /// MIDI value of the winning bin per frame (`None` on empty frames).
    pub fn predicted_midi(&self, frame: usize) -> Option<f64> {
        self.argmax_bin(frame).map(pitch_bin_midi)
    }

    /// Per-bin linear resample, clamped and re-thresholded.
    pub fn aligned(&self, target_rate: f64, target_len: usize) -> Result<PitchProbMatrix> {
        let mut out = Array2::zeros((PITCH_BINS, target_len));
        for (i, row) in self.probs.rows().into_iter().enumerate() {
            let vals: Vec<f64> = row.to_vec();
            let res = resample_linear(&vals, self.frame_rate, target_rate, target_len)?;
            for (n, v) in res.into_iter().enumerate() {
                out[(i, n)] = v.clamp(0.0, 1.0);
            }
        }
        PitchProbMatrix::new(out, target_rate)
    }
}

/// The controls extracted from (or prescribed for) one clip. All present
/// members share a frame rate and length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlSet {
    pub loudness: Option<ControlTrack>,
    pub centroid: Option<ControlTrack>,
    pub pitch: Option<PitchProbMatrix>,
    pub periodicity: Option<ControlTrack>,
}

impl ControlSet {
    pub fn new(
        loudness: Option<ControlTrack>,
        centroid: Option<ControlTrack>,
        pitch: Option<PitchProbMatrix>,
        periodicity: Option<ControlTrack>,
    ) -> Result<Self> {
        let set = ControlSet {
            loudness,
            centroid,
            pitch,
            periodicity,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn empty() -> Self {
        ControlSet::default()
    }

    pub fn is_empty(&self) -> bool {
        self.loudness.is_none()
            && self.centroid.is_none()
            && self.pitch.is_none()
            && self.periodicity.is_none()
    }

    /// Check the shared length/rate invariant across present members.
    pub fn validate(&self) -> Result<()> {
        let mut dims: Option<(usize, f64)> = None;
        let mut check = |len: usize, rate: f64| -> Result<()> {
            match dims {
                None => {
                    dims = Some((len, rate));
                    Ok(())
                }
                Some((n, r)) => {
                    if n != len || (r - rate).abs() > 1e-9 {
                        Err(Error::shape(format!(
                            "control members disagree: ({n} frames @ {r} Hz) vs ({len} @ {rate})"
                        )))
                    } else {
                        Ok(())
                    }
                }
            }
        };
        if let Some(t) = &self.loudness {
            check(t.len(), t.frame_rate)?;
        }
        if let Some(t) = &self.centroid {
            check(t.len(), t.frame_rate)?;
        }
        if let Some(p) = &self.pitch {
            check(p.n_frames(), p.frame_rate)?;
        }
        if let Some(t) = &self.periodicity {
            check(t.len(), t.frame_rate)?;
        }
        Ok(())
    }

    pub fn n_frames(&self) -> Option<usize> {
        self.loudness
            .as_ref()
            .map(ControlTrack::len)
            .or_else(|| self.centroid.as_ref().map(ControlTrack::len))
            .or_else(|| self.pitch.as_ref().map(PitchProbMatrix::n_frames))
            .or_else(|| self.periodicity.as_ref().map(ControlTrack::len))
    }

    pub fn frame_rate(&self) -> Option<f64> {
        self.loudness
            .as_ref()
            .map(|t| t.frame_rate)
            .or_else(|| self.centroid.as_ref().map(|t| t.frame_rate))
            .or_else(|| self.pitch.as_ref().map(|p| p.frame_rate))
            .or_else(|| self.periodicity.as_ref().map(|t| t.frame_rate))
    }

    /// Align every member to a target rate and length.
    pub fn aligned(&self, target_rate: f64, target_len: usize) -> Result<ControlSet> {
        if target_len == 0 {
            return Err(Error::invalid("target_len must be positive"));
        }
        if !(target_rate > 0.0) {
            return Err(Error::invalid("target_rate must be positive"));
        }
        ControlSet::new(
            self.loudness
                .as_ref()
                .map(|t| t.aligned(target_rate, target_len))
                .transpose()?,
            self.centroid
                .as_ref()
                .map(|t| t.aligned(target_rate, target_len))
                .transpose()?,
            self.pitch
                .as_ref()
                .map(|p| p.aligned(target_rate, target_len))
                .transpose()?,
            self.periodicity
                .as_ref()
                .map(|t| t.aligned(target_rate, target_len))
                .transpose()?,
        )
    }
}

/// Linear interpolation from one frame rate to another, producing exactly
/// `target_len` values (positions past the end clamp to the last sample).
fn resample_linear(
    values: &[f64],
    src_rate: f64,
    target_rate: f64,
    target_len: usize,
) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("cannot resample an empty track"));
    }
    if target_len == 0 {
        return Err(Error::invalid("target_len must be positive"));
    }
    if !(target_rate > 0.0) {
        return Err(Error::invalid("target_rate must be positive"));
    }
    let ratio = src_rate / target_rate;
    let last = values.len() - 1;
    Ok((0..target_len)
        .map(|n| {
            let pos = (n as f64 * ratio).min(last as f64);
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if frac == 0.0 || i == last {
                values[i]
            } else {
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        })
        .collect())
}
