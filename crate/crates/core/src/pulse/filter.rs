//! Butterworth band-pass in second-order sections, applied forward and backward.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::trace::{Band, PulseTrace, Volume};
use crate::error::{Error, Result};
use crate::videoio::FrameSequence;

pub const BUTTERWORTH_ORDER: usize = 4;

/// Cascade of biquads, each `[b0, b1, b2, a0, a1, a2]` with `a0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sos {
    pub sections: Vec<[f64; 6]>,
}

impl Sos {
    /// Complex response at `omega` radians per sample.
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |h, s| {
            h * (s[0] + z1 * s[1] + z2 * s[2]) / (s[3] + z1 * s[4] + z2 * s[5])
        })
    }

    /// Padding used by [`filtfilt`], matching the usual `3 * (2 * sections + 1)`.
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }
}

/// Digital Butterworth band-pass of the given prototype order (so `2 * order` poles),
/// designed by the bilinear transform with pre-warped edges and unit gain at the centre.
pub fn butter_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::Parameter("filter order must be at least 1".into()));
    }
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
        return Err(Error::Parameter(format!(
            "band [{low_hz}, {high_hz}] Hz must satisfy 0 < low < high < {} Hz",
            fs / 2.0
        )));
    }
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (w1, w2) = (warp(low_hz), warp(high_hz));
    let w0 = (w1 * w2).sqrt();
    let bw = w2 - w1;
    let fs2 = Complex64::new(2.0 * fs, 0.0);
    let mut poles = Vec::with_capacity(order);
    for k in 0..order {
        let theta = PI * (2 * k + 1 + order) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta) * (bw / 2.0);
        let disc = (p * p - w0 * w0).sqrt();
        for s in [p + disc, p - disc] {
            let z = (fs2 + s) / (fs2 - s);
            if z.im > 0.0 {
                poles.push(z);
            }
        }
    }
    if poles.len() != order {
        return Err(Error::Parameter(
            "band-pass poles did not pair into conjugates".into(),
        ));
    }
    poles.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let mut sos = Sos {
        sections: poles
            .iter()
            .map(|z| [1.0, 0.0, -1.0, 1.0, -2.0 * z.re, z.norm_sqr()])
            .collect(),
    };
    let centre = 2.0 * (w0 / (2.0 * fs)).atan();
    let gain = 1.0 / sos.response(centre).norm();
    for c in &mut sos.sections[0][..3] {
        *c *= gain;
    }
    Ok(sos)
}

/// Runs the cascade in place with per-section initial states.
fn sosfilt(sos: &Sos, x: &mut [f64], zi: &mut [[f64; 2]]) {
    for (s, z) in sos.sections.iter().zip(zi.iter_mut()) {
        let [b0, b1, b2, _, a1, a2] = *s;
        let (mut z1, mut z2) = (z[0], z[1]);
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z1;
            z1 = b1 * xin - a1 * y + z2;
            z2 = b2 * xin - a2 * y;
            *v = y;
        }
        *z = [z1, z2];
    }
}

/// Steady-state section states for a unit step input.
fn step_states(sos: &Sos) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    sos.sections
        .iter()
        .map(|s| {
            let [b0, b1, b2, _, a1, a2] = *s;
            let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
            let z = [scale * (dc - b0), scale * (b2 - a2 * dc)];
            scale *= dc;
            z
        })
        .collect()
}

/// Zero-phase filtering: odd extension, step-matched initial states, forward then backward pass.
pub fn filtfilt(sos: &Sos, x: &[f64]) -> Result<Vec<f64>> {
    let pad = sos.pad_len();
    let n = x.len();
    if n <= pad {
        return Err(Error::InsufficientData(format!(
            "zero-phase filtering needs more than {pad} samples, have {n}"
        )));
    }
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    let zi = step_states(sos);
    let mut state: Vec<[f64; 2]> = zi.iter().map(|z| z.map(|v| v * ext[0])).collect();
    sosfilt(sos, &mut ext, &mut state);
    ext.reverse();
    let mut state: Vec<[f64; 2]> = zi.iter().map(|z| z.map(|v| v * ext[0])).collect();
    sosfilt(sos, &mut ext, &mut state);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

/// Filter for `band` at `sample_rate`.
pub fn band_filter(band: Band, sample_rate: f64) -> Result<Sos> {
    band.validate_for(sample_rate)?;
    butter_bandpass(
        BUTTERWORTH_ORDER,
        band.low_hz(),
        band.high_hz(),
        sample_rate,
    )
}

/// Zero-phase 4th-order Butterworth band-pass of a pulse trace.
pub fn bandpass(trace: &PulseTrace, band: Band) -> Result<PulseTrace> {
    let sos = band_filter(band, trace.sample_rate())?;
    PulseTrace::new(filtfilt(&sos, trace.samples())?, trace.sample_rate())
}

/// The same band-pass applied independently to every (pixel, channel) series.
pub fn pixelwise_bandpass(seq: &FrameSequence, band: Band) -> Result<Volume> {
    let vol = Volume::from_sequence(seq);
    let sos = band_filter(band, vol.sample_rate)?;
    let stride = vol.width * vol.height * 3;
    let filtered: Vec<Vec<f64>> = (0..stride)
        .into_par_iter()
        .map(|k| {
            let series: Vec<f64> = (0..vol.frames).map(|t| vol.data[t * stride + k]).collect();
            filtfilt(&sos, &series)
        })
        .collect::<Result<_>>()?;
    let mut data = vec![0.0; vol.data.len()];
    for (k, series) in filtered.iter().enumerate() {
        for (t, v) in series.iter().enumerate() {
            data[t * stride + k] = *v;
        }
    }
    Ok(Volume { data, ..vol })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_gain_at_centre_and_edges_at_minus_3db() {
        let fs = 25.0;
        let sos = butter_bandpass(4, 0.75, 3.0, fs).unwrap();
        assert_eq!(sos.sections.len(), 4);
        let db = |f: f64| 20.0 * sos.response(2.0 * PI * f / fs).norm().log10();
        assert!((db(0.75) + 3.0103).abs() < 1e-3, "{}", db(0.75));
        assert!((db(3.0) + 3.0103).abs() < 1e-3, "{}", db(3.0));
        assert!(db(1.2).abs() < 0.01);
        assert!(db(0.375) < -30.0 && db(6.0) < -30.0);
    }

    #[test]
    fn step_states_hold_a_constant() {
        let sos = butter_bandpass(4, 0.75, 3.0, 25.0).unwrap();
        let mut x = vec![7.0; 50];
        let mut zi: Vec<[f64; 2]> = step_states(&sos)
            .iter()
            .map(|z| z.map(|v| v * 7.0))
            .collect();
        sosfilt(&sos, &mut x, &mut zi);
        assert!(x.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn short_input_is_rejected() {
        let sos = butter_bandpass(4, 0.75, 3.0, 25.0).unwrap();
        assert!(matches!(
            filtfilt(&sos, &[0.0; 27]),
            Err(Error::InsufficientData(_))
        ));
        assert!(filtfilt(&sos, &[0.0; 28]).is_ok());
    }
}
