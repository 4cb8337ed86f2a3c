use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::Range;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::pulse::{Band, PulseTrace};

pub const DEFAULT_PAD: usize = 4096;
pub const MIN_SAMPLES: usize = 16;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// One-sided power spectrum restricted to a heart-rate band.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    freqs_hz: Vec<f64>,
    power: Vec<f64>,
    inband: Range<usize>,
    band: Band,
    /// `sample_rate / n_samples` of the underlying trace.
    native_resolution_hz: f64,
}

impl Spectrum {
    pub fn new(
        freqs_hz: Vec<f64>,
        power: Vec<f64>,
        band: Band,
        native_resolution_hz: f64,
    ) -> Result<Self> {
        if freqs_hz.len() != power.len() || freqs_hz.len() < 2 {
            return Err(Error::Invariant(
                "spectrum grid and power differ in length".into(),
            ));
        }
        if freqs_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant(
                "spectrum frequencies must ascend strictly".into(),
            ));
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Invariant(
                "spectrum power must be finite and non-negative".into(),
            ));
        }
        if !(native_resolution_hz > 0.0) {
            return Err(Error::Invariant(
                "native resolution must be positive".into(),
            ));
        }
        let lo = freqs_hz.partition_point(|&f| f < band.low_hz());
        let hi = freqs_hz.partition_point(|&f| f <= band.high_hz());
        if lo >= hi {
            return Err(Error::Parameter(format!(
                "band [{}, {}] bpm contains no spectrum bins",
                band.low_bpm, band.high_bpm
            )));
        }
        Ok(Spectrum {
            freqs_hz,
            power,
            inband: lo..hi,
            band,
            native_resolution_hz,
        })
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn inband(&self) -> Range<usize> {
        self.inband.clone()
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn native_resolution_hz(&self) -> f64 {
        self.native_resolution_hz
    }

    /// Grid spacing (assumes a uniform grid).
    pub fn bin_hz(&self) -> f64 {
        self.freqs_hz[1] - self.freqs_hz[0]
    }

    /// Same grid with a different power vector.
    pub fn with_power(&self, power: Vec<f64>) -> Result<Spectrum> {
        Spectrum::new(
            self.freqs_hz.clone(),
            power,
            self.band,
            self.native_resolution_hz,
        )
    }

    pub fn same_grid(&self, other: &Spectrum) -> bool {
        self.freqs_hz == other.freqs_hz && self.inband == other.inband
    }
}

/// Symmetric Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Hann-windowed, zero-padded periodogram. Power is one-sided and scaled so that
/// `sum(power) * bin_hz` equals the windowed signal energy `sum((w x)^2)`.
pub fn periodogram(trace: &PulseTrace, pad_to: usize, band: Band) -> Result<Spectrum> {
    let n = trace.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "periodogram needs at least {MIN_SAMPLES} samples, have {n}"
        )));
    }
    if pad_to < n || !pad_to.is_power_of_two() {
        return Err(Error::Parameter(format!(
            "pad length {pad_to} must be a power of two >= {n}"
        )));
    }
    let fs = trace.sample_rate();
    let w = hann(n);
    let mut buf: Vec<Complex64> = trace
        .samples()
        .iter()
        .zip(&w)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(pad_to)
        .collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(pad_to).process(&mut buf));
    let half = pad_to / 2;
    let power = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / fs;
            if k == 0 || k == half {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let freqs = (0..=half).map(|k| k as f64 * fs / pad_to as f64).collect();
    Spectrum::new(freqs, power, band, fs / n as f64)
}
