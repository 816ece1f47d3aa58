//! Spectral analysis primitives: framing, STFT/ISTFT, A-weighting, and
//! frequency/MIDI conversions.
//!
//! Framing is centered with reflect padding and a periodic Hann window.
//! Magnitudes carry a documented calibration of `2/sum(window)` so that a
//! full-scale sine produces a unit spectral peak; see
//! [`Spectrogram::calibration`].

pub mod mel;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Analysis frame geometry tied to a sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub window_size: usize,
    pub hop_size: usize,
    pub sample_rate: u32,
}

impl FrameParams {
    pub fn new(window_size: usize, hop_size: usize, sample_rate: u32) -> Result<Self> {
        if window_size == 0 || hop_size == 0 {
            return Err(Error::invalid("window and hop must be positive"));
        }
        if hop_size > window_size {
            return Err(Error::invalid("hop_size must not exceed window_size"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        Ok(FrameParams {
            window_size,
            hop_size,
            sample_rate,
        })
    }

    /// Default analysis geometry for the two supported rates. Both give an
    /// exact 40 Hz frame rate (25 ms hop).
    pub fn for_sample_rate(sample_rate: u32) -> Result<Self> {
        match sample_rate {
            16_000 => FrameParams::new(1024, 400, 16_000),
            48_000 => FrameParams::new(2048, 1200, 48_000),
            other => Err(Error::invalid(format!(
                "no default frame params for {other} Hz (supported: 16000, 48000)"
            ))),
        }
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop_size as f64
    }

    pub fn n_bins(&self) -> usize {
        self.window_size / 2 + 1
    }
}

/// Magnitude spectrogram, `[n_bins x n_frames]`, bin 0 = DC.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub bin_freqs: Vec<f64>,
    pub frame_rate: f64,
    pub params: FrameParams,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// Scale turning raw magnitudes into full-scale-sine units: `2/sum(w)`.
    pub fn calibration(&self) -> f64 {
        2.0 / hann_window(self.params.window_size).iter().sum::<f64>()
    }
}

/// Periodic Hann window (DFT-even), the STFT analysis window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mirror an index into `[0, len)` without repeating the edge sample.
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    debug_assert!(len > 0);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

fn frame_samples(samples: &[f64], center: isize, window: usize) -> Vec<f64> {
    let half = window as isize / 2;
    (0..window as isize)
        .map(|k| samples[reflect_index(center - half + k, samples.len())])
        .collect()
}

/// Number of frames produced for a clip: `ceil(len / hop)`.
pub fn n_frames_for(len: usize, hop: usize) -> usize {
    len.div_ceil(hop)
}

/// Complex STFT frames, `[n_bins x n_frames]`. Centered frames, reflect
/// padding, periodic Hann.
pub(crate) fn stft_complex(clip: &AudioClip, params: &FrameParams) -> Result<Array2<Complex<f64>>> {
    if clip.is_empty() {
        return Err(Error::EmptyAudio);
    }
    if clip.sample_rate() != params.sample_rate {
        return Err(Error::invalid(format!(
            "clip rate {} does not match frame params rate {}",
            clip.sample_rate(),
            params.sample_rate
        )));
    }
    let window = hann_window(params.window_size);
    let n_bins = params.n_bins();
    let n_frames = n_frames_for(clip.len(), params.hop_size);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(params.window_size);
    let mut out = Array2::from_elem((n_bins, n_frames), Complex::new(0.0, 0.0));
    let mut buf = vec![Complex::new(0.0, 0.0); params.window_size];
    for n in 0..n_frames {
        let center = (n * params.hop_size) as isize;
        let frame = frame_samples(clip.samples(), center, params.window_size);
        for (b, (&x, &w)) in buf.iter_mut().zip(frame.iter().zip(window.iter())) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            out[(k, n)] = buf[k];
        }
    }
    Ok(out)
}

/// Magnitude STFT of a clip.
pub fn stft(clip: &AudioClip, params: &FrameParams) -> Result<Spectrogram> {
    let complex = stft_complex(clip, params)?;
    let magnitudes = complex.mapv(|c| c.norm());
    let bin_freqs = (0..params.n_bins())
        .map(|k| k as f64 * params.sample_rate as f64 / params.window_size as f64)
        .collect();
    Ok(Spectrogram {
        magnitudes,
        bin_freqs,
        frame_rate: params.frame_rate(),
        params: *params,
    })
}

/// Weighted overlap-add inverse of complex STFT frames. Returns `target_len`
/// samples aligned with the analysis framing.
pub(crate) fn istft(
    frames: &Array2<Complex<f64>>,
    params: &FrameParams,
    target_len: usize,
) -> Vec<f64> {
    let n_bins = params.n_bins();
    debug_assert_eq!(frames.nrows(), n_bins);
    let n_frames = frames.ncols();
    let window = hann_window(params.window_size);
    let half = params.window_size / 2;
    let padded_len = if n_frames == 0 {
        0
    } else {
        (n_frames - 1) * params.hop_size + params.window_size
    };
    let mut acc = vec![0.0f64; padded_len];
    let mut norm = vec![0.0f64; padded_len];
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(params.window_size);
    let mut buf = vec![Complex::new(0.0, 0.0); params.window_size];
    for n in 0..n_frames {
        for k in 0..n_bins {
            buf[k] = frames[(k, n)];
        }
        // conjugate symmetry for a real frame
        for k in n_bins..params.window_size {
            buf[k] = frames[(params.window_size - k, n)].conj();
        }
        ifft.process(&mut buf);
        let start = n * params.hop_size;
        for (t, (b, &w)) in buf.iter().zip(window.iter()).enumerate() {
            let y = b.re / params.window_size as f64;
            acc[start + t] += w * y;
            norm[start + t] += w * w;
        }
    }
    let mut out = vec![0.0f64; target_len];
    for (t, o) in out.iter_mut().enumerate() {
        let idx = t + half;
        if idx < padded_len && norm[idx] > 1e-12 {
            *o = acc[idx] / norm[idx];
        }
    }
    out
}

/// A-weighting gain in dB at a frequency, clamped to -120 dB near DC.
///
/// `A(f) = 20*log10(R_A(f)) + 2.00`, zero at 1 kHz.
pub fn a_weighting_db(freq: f64) -> Result<f64> {
    if freq < 0.0 || !freq.is_finite() {
        return Err(Error::invalid("frequency must be non-negative"));
    }
    let f2 = freq * freq;
    let r = (12194.0f64 * 12194.0) * f2 * f2
        / ((f2 + 20.6 * 20.6)
            * ((f2 + 107.7 * 107.7) * (f2 + 737.9 * 737.9)).sqrt()
            * (f2 + 12194.0 * 12194.0));
    if r <= 0.0 {
        return Ok(-120.0);
    }
    Ok((20.0 * r.log10() + 2.00).max(-120.0))
}

/// Linear A-weighting gain at a frequency.
pub fn a_weighting_gain(freq: f64) -> Result<f64> {
    Ok(10f64.powf(a_weighting_db(freq)? / 20.0))
}

/// Continuous MIDI number of a frequency: `69 + 12*log2(f/440)`.
pub fn hz_to_midi(freq: f64) -> Result<f64> {
    if freq <= 0.0 || !freq.is_finite() {
        return Err(Error::invalid("frequency must be positive"));
    }
    Ok(69.0 + 12.0 * (freq / 440.0).log2())
}

/// Inverse of [`hz_to_midi`].
pub fn midi_to_hz(midi: f64) -> f64 {
    440.0 * ((midi - 69.0) / 12.0).exp2()
}

/// Energy of the calibrated one-sided spectrum of a full-scale sine under a
/// periodic Hann window: `N*sum(w^2)/sum(w)^2 = 3/2`. Used as the loudness
/// RMS reference so a full-scale sine reads 0 dBFS.
pub const SINE_SPECTRUM_ENERGY: f64 = 1.5;
