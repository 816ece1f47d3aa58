//! Monophonic pitch probability extraction.
//!
//! The built-in backend is a YIN-style estimator: per frame it computes the
//! cumulative-mean-normalized difference function over a centered analysis
//! buffer, picks the winning period, and maps it onto the 20-cent bin grid
//! with probability `1 - d'`, spread to neighboring bins by a 25-cent
//! Gaussian. Neural estimators are not built in, but their exported
//! probability matrices load through the same container format and the
//! [`PrecomputedBackend`] wrapper.

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioClip;
use crate::controls::{
    pitch_bin_midi, ControlTrack, PitchProbMatrix, PERIODICITY_NAME, PITCH_BINS,
    PITCH_BINS_PER_SEMITONE, PITCH_MIDI_BASE,
};
use crate::dsp::{hz_to_midi, midi_to_hz, n_frames_for, reflect_index, FrameParams};
use crate::error::{Error, Result};

/// Source of pitch probabilities and periodicity for a clip.
pub trait PitchBackend: Sync {
    fn extract(&self, clip: &AudioClip, params: &FrameParams)
        -> Result<(PitchProbMatrix, ControlTrack)>;
}

/// Classical autocorrelation (YIN-style) pitch backend.
#[derive(Debug, Clone)]
pub struct YinBackend {
    /// Accept the first local CMND minimum below this; otherwise take the
    /// global minimum.
    pub dip_threshold: f64,
    /// Gaussian spread of bin probabilities, in bins (1.25 bins = 25 cents).
    pub spread_bins: f64,
}

impl Default for YinBackend {
    fn default() -> Self {
        YinBackend {
            dip_threshold: 0.15,
            spread_bins: 1.25,
        }
    }
}

struct FrameEstimate {
    midi: f64,
    prob: f64,
}

impl YinBackend {
    /// CMND over lags for one analysis buffer. `buf` has length `2*w`; the
    /// difference function integrates over `w` samples.
    fn cmnd(buf: &[f64], w: usize, fft: &std::sync::Arc<dyn rustfft::Fft<f64>>) -> Vec<f64> {
        let m = 2 * w;
        // cross-correlation c(tau) = sum_{j<w} x[j] * x[j+tau] via FFT
        let mut a = vec![Complex::new(0.0, 0.0); m];
        let mut b = vec![Complex::new(0.0, 0.0); m];
        for j in 0..w {
            a[j] = Complex::new(buf[j], 0.0);
        }
        for (j, &x) in buf.iter().enumerate() {
            b[j] = Complex::new(x, 0.0);
        }
        fft.process(&mut a);
        fft.process(&mut b);
        let mut prod: Vec<Complex<f64>> = a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect();
        let mut planner = FftPlanner::<f64>::new();
        let ifft = planner.plan_fft_inverse(m);
        ifft.process(&mut prod);
        let corr: Vec<f64> = prod.iter().map(|c| c.re / m as f64).collect();

        // running energy sums for the two shifted windows
        let mut cumsq = vec![0.0f64; m + 1];
        for (j, &x) in buf.iter().enumerate() {
            cumsq[j + 1] = cumsq[j] + x * x;
        }
        let e0 = cumsq[w];
        let mut d = vec![0.0f64; w];
        for tau in 1..w {
            let e_tau = cumsq[tau + w] - cumsq[tau];
            d[tau] = (e0 + e_tau - 2.0 * corr[tau]).max(0.0);
        }
        // cumulative mean normalization
        let mut out = vec![1.0f64; w];
        let mut running = 0.0;
        for tau in 1..w {
            running += d[tau];
            out[tau] = if running > 1e-20 {
                d[tau] * tau as f64 / running
            } else {
                1.0
            };
        }
        out
    }

    fn pick_period(&self, cmnd: &[f64], tau_min: usize, tau_max: usize) -> Option<(f64, f64)> {
        let hi = tau_max.min(cmnd.len() - 2);
        if tau_min + 1 > hi {
            return None;
        }
        let mut chosen: Option<usize> = None;
        for tau in tau_min..=hi {
            if cmnd[tau] < self.dip_threshold
                && cmnd[tau] <= cmnd[tau - 1]
                && cmnd[tau] <= cmnd[tau + 1]
            {
                chosen = Some(tau);
                break;
            }
        }
        let tau = chosen.unwrap_or_else(|| {
            (tau_min..=hi)
                .min_by(|&a, &b| cmnd[a].partial_cmp(&cmnd[b]).unwrap())
                .unwrap()
        });
        // parabolic refinement of both the lag and the minimum value
        let (y0, y1, y2) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
        let denom = y0 - 2.0 * y1 + y2;
        let (shift, value) = if denom.abs() > 1e-12 {
            let s = 0.5 * (y0 - y2) / denom;
            let s = s.clamp(-0.5, 0.5);
            (s, y1 - 0.25 * (y0 - y2) * s)
        } else {
            (0.0, y1)
        };
        Some((tau as f64 + shift, value.max(0.0)))
    }

    fn estimate_frame(
        &self,
        buf: &[f64],
        w: usize,
        sample_rate: f64,
        tau_min: usize,
        tau_max: usize,
        fft: &std::sync::Arc<dyn rustfft::Fft<f64>>,
    ) -> Option<FrameEstimate> {
        let energy: f64 = buf.iter().map(|x| x * x).sum();
        if energy < 1e-10 {
            return None;
        }
        let cmnd = Self::cmnd(buf, w, fft);
        let (tau, dmin) = self.pick_period(&cmnd, tau_min, tau_max)?;
        let freq = sample_rate / tau;
        let midi = hz_to_midi(freq).ok()?;
        let prob = (1.0 - dmin).clamp(0.0, 1.0);
        Some(FrameEstimate { midi, prob })
    }
}

impl PitchBackend for YinBackend {
    fn extract(
        &self,
        clip: &AudioClip,
        params: &FrameParams,
    ) -> Result<(PitchProbMatrix, ControlTrack)> {
        if clip.len() < params.window_size {
            return Err(Error::invalid(format!(
                "clip too short for pitch analysis: {} < {} samples",
                clip.len(),
                params.window_size
            )));
        }
        let sr = params.sample_rate as f64;
        let w = params.window_size / 2;
        let grid_top_hz = midi_to_hz(pitch_bin_midi(PITCH_BINS - 1));
        let grid_bottom_hz = midi_to_hz(PITCH_MIDI_BASE);
        let tau_min = ((sr / grid_top_hz).floor() as usize).max(2);
        let tau_max = ((sr / grid_bottom_hz).ceil() as usize).min(w - 2);
        let n_frames = n_frames_for(clip.len(), params.hop_size);

        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(2 * w);

        let mut probs = Array2::zeros((PITCH_BINS, n_frames));
        let mut periodicity = vec![0.0f64; n_frames];
        let samples = clip.samples();
        let mut buf = vec![0.0f64; 2 * w];
        for n in 0..n_frames {
            let center = (n * params.hop_size) as isize;
            for (k, b) in buf.iter_mut().enumerate() {
                *b = samples[reflect_index(center - w as isize + k as isize, samples.len())];
            }
            if let Some(est) = self.estimate_frame(&buf, w, sr, tau_min, tau_max, &fft) {
                let bin_f = (est.midi - PITCH_MIDI_BASE) * PITCH_BINS_PER_SEMITONE;
                let lo = ((bin_f - 6.0).ceil().max(0.0)) as usize;
                let hi = ((bin_f + 6.0).floor()).min((PITCH_BINS - 1) as f64) as usize;
                let two_sigma_sq = 2.0 * self.spread_bins * self.spread_bins;
                let mut peak = 0.0f64;
                for i in lo..=hi {
                    let d = i as f64 - bin_f;
                    let p = (est.prob * (-d * d / two_sigma_sq).exp()).clamp(0.0, 1.0);
                    probs[(i, n)] = p;
                    peak = peak.max(p);
                }
                periodicity[n] = peak;
            }
        }
        let matrix = PitchProbMatrix::new(probs, params.frame_rate())?;
        let track = ControlTrack::new(PERIODICITY_NAME, params.frame_rate(), periodicity)?;
        Ok((matrix, track))
    }
}

/// Backend serving a matrix computed elsewhere (e.g., a neural estimator's
/// export loaded from a container file). Tracks are aligned to the clip's
/// frame count at the analysis rate.
#[derive(Debug, Clone)]
pub struct PrecomputedBackend {
    pub pitch: PitchProbMatrix,
    pub periodicity: ControlTrack,
}

impl PitchBackend for PrecomputedBackend {
    fn extract(
        &self,
        clip: &AudioClip,
        params: &FrameParams,
    ) -> Result<(PitchProbMatrix, ControlTrack)> {
        let n_frames = n_frames_for(clip.len(), params.hop_size);
        let rate = params.frame_rate();
        Ok((
            self.pitch.aligned(rate, n_frames)?,
            self.periodicity.aligned(rate, n_frames)?,
        ))
    }
}

/// Extract pitch probabilities and periodicity with the given backend.
pub fn extract_pitch(
    clip: &AudioClip,
    params: &FrameParams,
    backend: &dyn PitchBackend,
) -> Result<(PitchProbMatrix, ControlTrack)> {
    backend.extract(clip, params)
}
