use serde::{Deserialize, Serialize};

use super::periodogram::Spectrum;
use crate::error::{Error, Result};

/// Half-width of the SNR signal windows, in native resolution bins (`fs / n`).
pub const SNR_HALF_WIDTH_BINS: f64 = 3.0;
/// Half-width used when estimating a single tone's per-sample SNR.
pub const TONE_HALF_WIDTH_BINS: f64 = 2.0;
/// Noise power is floored at this fraction of the signal power.
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Peak,
    Ad,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HrEstimate {
    pub bpm: f64,
    pub snr_db: f64,
    pub method: Estimator,
}

/// In-band argmax (lowest frequency wins ties) with 3-point parabolic refinement.
pub fn pick_peak(spec: &Spectrum) -> Result<HrEstimate> {
    let bpm = peak_bpm(spec)?;
    Ok(HrEstimate {
        bpm,
        snr_db: compute_snr(spec, bpm),
        method: Estimator::Peak,
    })
}

/// Peak frequency in bpm without the SNR.
pub fn peak_bpm(spec: &Spectrum) -> Result<f64> {
    let p = spec.power();
    let range = spec.inband();
    let mut best = range.start;
    for k in range {
        if p[k] > p[best] {
            best = k;
        }
    }
    if !(p[best] > 0.0) {
        return Err(Error::NoSignal("all in-band power is zero".into()));
    }
    let mut offset = 0.0;
    if best > 0 && best + 1 < p.len() {
        let (a, b, c) = (p[best - 1], p[best], p[best + 1]);
        let (a, b, c) = if a > 0.0 && c > 0.0 {
            (a.ln(), b.ln(), c.ln())
        } else {
            (a, b, c)
        };
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    let band = spec.band();
    let f = spec.freqs_hz()[best] + offset * spec.bin_hz();
    Ok((60.0 * f).clamp(band.low_bpm, band.high_bpm))
}

/// Marks in-band bins within `half_width` native bins of the peak and of its
/// first harmonic (when the harmonic lies in band).
fn signal_bins(spec: &Spectrum, peak_bpm: f64, half_width: f64) -> (Vec<bool>, Vec<bool>) {
    let f0 = peak_bpm / 60.0;
    let reach = half_width * spec.native_resolution_hz();
    let harmonic_in_band = 2.0 * f0 <= spec.band().high_hz();
    let f = spec.freqs_hz();
    spec.inband()
        .map(|k| {
            let near_peak = (f[k] - f0).abs() <= reach;
            let near_harmonic = harmonic_in_band && (f[k] - 2.0 * f0).abs() <= reach;
            (near_peak, near_harmonic)
        })
        .unzip()
}

/// `10 log10(P_signal / P_noise)` with the signal taken around the peak and its
/// harmonic and the noise being the rest of the band.
pub fn compute_snr(spec: &Spectrum, peak_bpm: f64) -> f64 {
    let (peak, harmonic) = signal_bins(spec, peak_bpm, SNR_HALF_WIDTH_BINS);
    let p = &spec.power()[spec.inband()];
    let (mut signal, mut noise) = (0.0, 0.0);
    for i in 0..p.len() {
        if peak[i] || harmonic[i] {
            signal += p[i];
        } else {
            noise += p[i];
        }
    }
    if signal <= 0.0 {
        return if noise > 0.0 { -120.0 } else { 0.0 };
    }
    10.0 * (signal / noise.max(NOISE_FLOOR * signal)).log10()
}

/// Per-sample SNR of a single tone at `peak_bpm`: tone energy from the bins
/// around the peak (less the noise expected there) over white-noise energy
/// extrapolated from the in-band noise density to the whole `[0, fs/2]` range.
/// This is the SNR definition the outlier table is built with.
pub fn estimate_tone_snr(spec: &Spectrum, peak_bpm: f64) -> f64 {
    let (peak, harmonic) = signal_bins(spec, peak_bpm, TONE_HALF_WIDTH_BINS);
    let p = &spec.power()[spec.inband()];
    let (mut signal, mut n_signal, mut noise, mut n_noise) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..p.len() {
        if peak[i] {
            signal += p[i];
            n_signal += 1;
        } else if !harmonic[i] {
            noise += p[i];
            n_noise += 1;
        }
    }
    let density = if n_noise > 0 {
        noise / n_noise as f64
    } else {
        0.0
    };
    let bin = spec.bin_hz();
    let nyquist = *spec.freqs_hz().last().expect("non-empty grid");
    let tone = ((signal - density * n_signal as f64) * bin).max(0.0);
    let total_noise = density * nyquist;
    if tone <= 0.0 {
        return -120.0;
    }
    10.0 * (tone / total_noise.max(NOISE_FLOOR * tone)).log10()
}
