//! Mel filterbank analysis and Griffin-Lim inversion.
//!
//! The log-mel frames produced here double as the latent space for the
//! diffusion model, so inversion only needs to be good enough to close the
//! metric loop: filterbank pseudo-inverse, then 32 iterations of Griffin-Lim
//! from a zero-phase init (deterministic).

use nalgebra::DMatrix;
use ndarray::Array2;
use rustfft::num_complex::Complex;

use crate::audio::AudioClip;
use crate::dsp::{istft, stft_complex, FrameParams, Spectrogram};
use crate::error::{Error, Result};

pub const GRIFFIN_LIM_ITERS: usize = 32;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank over STFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Array2<f64>, // [n_mels x n_bins]
    centers_hz: Vec<f64>,
    params: FrameParams,
}

impl MelFilterbank {
    pub fn new(params: &FrameParams, n_mels: usize, fmin: f64, fmax: f64) -> Result<Self> {
        let nyquist = params.sample_rate as f64 / 2.0;
        if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
            return Err(Error::invalid(format!(
                "invalid mel band range [{fmin}, {fmax}] for nyquist {nyquist}"
            )));
        }
        if n_mels == 0 {
            return Err(Error::invalid("n_mels must be positive"));
        }
        let n_bins = params.n_bins();
        let mel_lo = hz_to_mel(fmin);
        let mel_hi = hz_to_mel(fmax);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = Array2::zeros((n_mels, n_bins));
        for m in 0..n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * params.sample_rate as f64 / params.window_size as f64;
                let w = if f <= lo || f >= hi {
                    0.0
                } else if f <= mid {
                    (f - lo) / (mid - lo)
                } else {
                    (hi - f) / (hi - mid)
                };
                weights[(m, k)] = w;
            }
        }
        Ok(MelFilterbank {
            weights,
            centers_hz: edges[1..=n_mels].to_vec(),
            params: *params,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn params(&self) -> &FrameParams {
        &self.params
    }

    /// Mel-band energies of calibrated magnitudes, `[n_mels x n_frames]`.
    pub fn energies(&self, spec: &Spectrogram) -> Result<Array2<f64>> {
        if spec.n_bins() != self.weights.ncols() {
            return Err(Error::shape(format!(
                "spectrogram has {} bins, filterbank expects {}",
                spec.n_bins(),
                self.weights.ncols()
            )));
        }
        let cal = spec.calibration();
        Ok(self.weights.dot(&spec.magnitudes.mapv(|m| m * cal)))
    }

    /// Log-compressed mel frames: `log1p(energies)`. This is the latent
    /// representation used downstream.
    pub fn log_mel(&self, spec: &Spectrogram) -> Result<Array2<f64>> {
        Ok(self.energies(spec)?.mapv(f64::ln_1p))
    }

    /// Invert log-mel frames back to audio: filterbank pseudo-inverse, then
    /// Griffin-Lim phase recovery with zero-phase init.
    pub fn invert(&self, mel_log: &Array2<f64>, iters: usize) -> Result<AudioClip> {
        if mel_log.nrows() != self.n_mels() {
            return Err(Error::shape(format!(
                "mel matrix has {} bands, filterbank expects {}",
                mel_log.nrows(),
                self.n_mels()
            )));
        }
        let n_frames = mel_log.ncols();
        if n_frames == 0 {
            return Err(Error::invalid("cannot invert zero frames"));
        }
        let energies = mel_log.mapv(|v| v.exp_m1().max(0.0));
        let mags = self.pinv_magnitudes(&energies)?;
        let len = n_frames * self.params.hop_size;
        let samples = griffin_lim(&mags, &self.params, len, iters);
        AudioClip::new(samples, self.params.sample_rate)
    }

    /// Least-squares linear magnitude estimate from mel energies, clamped to
    /// be non-negative and de-calibrated back to raw STFT magnitude units.
    fn pinv_magnitudes(&self, energies: &Array2<f64>) -> Result<Array2<f64>> {
        let (n_mels, n_bins) = (self.weights.nrows(), self.weights.ncols());
        let w = DMatrix::from_fn(n_mels, n_bins, |i, j| self.weights[(i, j)]);
        let gram = &w * w.transpose();
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::numerical("mel filterbank gram matrix is singular"))?;
        let pinv = w.transpose() * gram_inv; // [n_bins x n_mels]
        let cal = 2.0 / crate::dsp::hann_window(self.params.window_size)
            .iter()
            .sum::<f64>();
        let mut mags = Array2::zeros((n_bins, energies.ncols()));
        for frame in 0..energies.ncols() {
            for k in 0..n_bins {
                let mut acc = 0.0;
                for m in 0..n_mels {
                    acc += pinv[(k, m)] * energies[(m, frame)];
                }
                mags[(k, frame)] = acc.max(0.0) / cal;
            }
        }
        Ok(mags)
    }
}

/// Griffin-Lim phase recovery for a target magnitude spectrogram.
fn griffin_lim(target_mag: &Array2<f64>, params: &FrameParams, len: usize, iters: usize) -> Vec<f64> {
    let (n_bins, n_frames) = (target_mag.nrows(), target_mag.ncols());
    let mut spectrum = Array2::from_shape_fn((n_bins, n_frames), |(k, n)| {
        Complex::new(target_mag[(k, n)], 0.0)
    });
    let mut samples = istft(&spectrum, params, len);
    for _ in 0..iters {
        let clip = match AudioClip::new(samples.clone(), params.sample_rate) {
            Ok(c) => c,
            Err(_) => break,
        };
        let reanalysed = match stft_complex(&clip, params) {
            Ok(s) => s,
            Err(_) => break,
        };
        for n in 0..n_frames.min(reanalysed.ncols()) {
            for k in 0..n_bins {
                let c = reanalysed[(k, n)];
                let mag = c.norm();
                spectrum[(k, n)] = if mag > 1e-12 {
                    c / mag * target_mag[(k, n)]
                } else {
                    Complex::new(target_mag[(k, n)], 0.0)
                };
            }
        }
        samples = istft(&spectrum, params, len);
    }
    samples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::stft;

    fn params16k() -> FrameParams {
        FrameParams::for_sample_rate(16_000).unwrap()
    }

    fn sine(freq: f64, amp: f64, dur_s: f64) -> AudioClip {
        let sr = 16_000u32;
        let n = (dur_s * sr as f64) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioClip::new(samples, sr).unwrap()
    }

    #[test]
    fn rejects_bad_band_range() {
        let p = params16k();
        assert!(MelFilterbank::new(&p, 64, 4000.0, 100.0).is_err());
        assert!(MelFilterbank::new(&p, 64, 0.0, 9000.0).is_err());
    }

    #[test]
    fn zero_spectrogram_gives_zero_mel() {
        let p = params16k();
        let clip = AudioClip::new(vec![0.0; 8000], 16_000).unwrap();
        let fb = MelFilterbank::new(&p, 64, 0.0, 8000.0).unwrap();
        let mel = fb.log_mel(&stft(&clip, &p).unwrap()).unwrap();
        assert!(mel.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_energy_lands_in_covering_band() {
        let p = params16k();
        let fb = MelFilterbank::new(&p, 64, 0.0, 8000.0).unwrap();
        let mel = fb
            .energies(&stft(&sine(1000.0, 1.0, 0.5), &p).unwrap())
            .unwrap();
        let frame = mel.ncols() / 2;
        let argmax = (0..fb.n_mels())
            .max_by(|&a, &b| mel[(a, frame)].partial_cmp(&mel[(b, frame)]).unwrap())
            .unwrap();
        // the winning band's center must be within one band spacing of 1 kHz
        let c = fb.centers_hz()[argmax];
        let spacing = fb.centers_hz()[argmax.min(62) + 1] - fb.centers_hz()[argmax.min(62)];
        assert!(
            (c - 1000.0).abs() <= spacing,
            "band center {c} too far from 1 kHz"
        );
    }

    #[test]
    fn noise_excites_every_band() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..16_000).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let p = params16k();
        let fb = MelFilterbank::new(&p, 64, 0.0, 8000.0).unwrap();
        let mel = fb.energies(&stft(&clip, &p).unwrap()).unwrap();
        let frame = mel.ncols() / 2;
        for m in 0..fb.n_mels() {
            assert!(mel[(m, frame)] > 0.0, "band {m} silent on white noise");
        }
    }

    #[test]
    fn zero_mel_inverts_to_silence() {
        let p = params16k();
        let fb = MelFilterbank::new(&p, 64, 0.0, 8000.0).unwrap();
        let mel = Array2::zeros((64, 40));
        let clip = fb.invert(&mel, GRIFFIN_LIM_ITERS).unwrap();
        assert_eq!(clip.len(), 40 * 400);
        assert!(clip.peak() < 1e-4);
    }

    #[test]
    fn invert_rejects_wrong_band_count() {
        let p = params16k();
        let fb = MelFilterbank::new(&p, 64, 0.0, 8000.0).unwrap();
        assert!(fb.invert(&Array2::zeros((32, 10)), 4).is_err());
    }

    #[test]
    fn invert_is_deterministic() {
        let p = params16k();
        let fb = MelFilterbank::new(&p, 64, 0.0, 8000.0).unwrap();
        let mel = fb
            .log_mel(&stft(&sine(440.0, 0.5, 0.4), &p).unwrap())
            .unwrap();
        let a = fb.invert(&mel, 8).unwrap();
        let b = fb.invert(&mel, 8).unwrap();
        assert_eq!(a.samples(), b.samples());
    }
}
