//! Two-rate exponential smoothing of power spectra, switched by the tabulated
//! outlier probability of each new spectrum.

use serde::{Deserialize, Serialize};

use super::peak::{compute_snr, estimate_tone_snr, peak_bpm, Estimator, HrEstimate};
use super::periodogram::{periodogram, Spectrum};
use super::table::OutlierTable;
use crate::error::{Error, Result};
use crate::pulse::{Band, PulseTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdParams {
    pub alpha_fast: f64,
    pub alpha_slow: f64,
    pub p_threshold: f64,
    /// Sub-window length and hop used inside a single clip.
    pub window_s: f64,
    pub hop_s: f64,
}

impl Default for AdParams {
    fn default() -> Self {
        AdParams {
            alpha_fast: 0.5,
            alpha_slow: 0.05,
            p_threshold: 0.1,
            window_s: 4.0,
            hop_s: 1.0,
        }
    }
}

impl AdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_slow > 0.0 && self.alpha_slow <= self.alpha_fast && self.alpha_fast <= 1.0)
        {
            return Err(Error::Parameter(format!(
                "need 0 < alpha_slow <= alpha_fast <= 1, got {} / {}",
                self.alpha_slow, self.alpha_fast
            )));
        }
        if !(0.0..=1.0).contains(&self.p_threshold) {
            return Err(Error::Parameter(format!(
                "p_threshold {} outside [0, 1]",
                self.p_threshold
            )));
        }
        if !(self.window_s > 0.0 && self.hop_s > 0.0) {
            return Err(Error::Parameter(
                "AD window and hop must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Smoothed spectrum and the factor used on the latest step.
#[derive(Clone, Debug, PartialEq)]
pub struct AdState {
    pub smoothed: Vec<f64>,
    pub alpha: f64,
    pub p_outlier: f64,
}

pub struct AdTracker<'a> {
    params: AdParams,
    table: &'a OutlierTable,
    reference: Option<Spectrum>,
    state: Option<AdState>,
}

impl<'a> AdTracker<'a> {
    pub fn new(params: AdParams, table: &'a OutlierTable) -> Result<Self> {
        params.validate()?;
        Ok(AdTracker {
            params,
            table,
            reference: None,
            state: None,
        })
    }

    pub fn state(&self) -> Option<&AdState> {
        self.state.as_ref()
    }

    /// Folds in one spectrum and returns the peak of the smoothed spectrum.
    pub fn step(&mut self, spec: &Spectrum) -> Result<HrEstimate> {
        if let Some(r) = &self.reference {
            if !r.same_grid(spec) {
                return Err(Error::Parameter(
                    "AD spectra must share one frequency grid".into(),
                ));
            }
        } else {
            self.reference = Some(spec.clone());
        }
        let p_outlier = match peak_bpm(spec) {
            Ok(bpm) => self.table.lookup(estimate_tone_snr(spec, bpm)),
            Err(_) => 1.0,
        };
        let alpha = if p_outlier < self.params.p_threshold {
            self.params.alpha_fast
        } else {
            self.params.alpha_slow
        };
        let smoothed = match self.state.take() {
            None => spec.power().to_vec(),
            Some(prev) => prev
                .smoothed
                .iter()
                .zip(spec.power())
                .map(|(s, p)| (1.0 - alpha) * s + alpha * p)
                .collect(),
        };
        let current = spec.with_power(smoothed.clone())?;
        self.state = Some(AdState {
            smoothed,
            alpha,
            p_outlier,
        });
        let bpm = peak_bpm(&current)?;
        Ok(HrEstimate {
            bpm,
            snr_db: compute_snr(&current, bpm),
            method: Estimator::Ad,
        })
    }
}

/// Runs the tracker over a time-ordered list of spectra.
pub fn ad_track(
    spectra: &[Spectrum],
    table: &OutlierTable,
    params: &AdParams,
) -> Result<Vec<HrEstimate>> {
    let mut tracker = AdTracker::new(params.clone(), table)?;
    spectra.iter().map(|s| tracker.step(s)).collect()
}

/// Periodograms of sliding sub-windows of `trace`.
pub fn sliding_spectra(
    trace: &PulseTrace,
    window_s: f64,
    hop_s: f64,
    pad_to: usize,
    band: Band,
) -> Result<Vec<Spectrum>> {
    let fs = trace.sample_rate();
    let len = (window_s * fs).round() as usize;
    let hop = ((hop_s * fs).round() as usize).max(1);
    if len > trace.len() || len < 2 {
        return Err(Error::InsufficientData(format!(
            "AD window of {len} samples does not fit a {}-sample trace",
            trace.len()
        )));
    }
    (0..)
        .map(|k| k * hop)
        .take_while(|s| s + len <= trace.len())
        .map(|s| periodogram(&trace.slice(s, s + len)?, pad_to, band))
        .collect()
}

/// Clip-level AD estimate: the mean of the tracked rates over the sub-windows.
pub fn ad_estimate(
    trace: &PulseTrace,
    table: &OutlierTable,
    params: &AdParams,
    pad_to: usize,
    band: Band,
) -> Result<HrEstimate> {
    let spectra = sliding_spectra(trace, params.window_s, params.hop_s, pad_to, band)?;
    let track = ad_track(&spectra, table, params)?;
    let bpm = track.iter().map(|e| e.bpm).sum::<f64>() / track.len() as f64;
    Ok(HrEstimate {
        bpm,
        snr_db: track.last().map(|e| e.snr_db).unwrap_or(0.0),
        method: Estimator::Ad,
    })
}
