//! Monte Carlo outlier probability versus per-sample tone SNR.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::peak::peak_bpm;
use super::periodogram::{periodogram, DEFAULT_PAD};
use crate::error::{Error, Result};
use crate::pulse::{Band, PulseTrace};
use crate::synth::derive_seed;

pub const DEFAULT_DELTA_BPM: f64 = 5.0;
pub const MIN_TRIALS: usize = 1000;

/// Length, rate, band and padding of the simulated traces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub duration_s: f64,
    pub sample_rate: f64,
    pub band: Band,
    pub pad_to: usize,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec {
            duration_s: 10.0,
            sample_rate: 25.0,
            band: Band::default(),
            pad_to: DEFAULT_PAD,
        }
    }
}

impl TraceSpec {
    pub fn samples(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlierTable {
    pub snr_grid_db: Vec<f64>,
    pub p_outlier: Vec<f64>,
    pub delta_bpm: f64,
    pub trials: usize,
    pub seed: u64,
    pub trace: TraceSpec,
}

/// Evenly spaced grid from `start` to `stop` inclusive.
pub fn snr_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// Counts, per SNR, how often the periodogram peak misses a random in-band tone
/// by more than `delta_bpm`. Trial `i` uses the same frequency, phase and noise
/// draw at every SNR.
pub fn build_outlier_table(
    snr_grid_db: &[f64],
    delta_bpm: f64,
    trials: usize,
    trace: TraceSpec,
    seed: u64,
) -> Result<OutlierTable> {
    if trials < MIN_TRIALS {
        return Err(Error::Parameter(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if snr_grid_db.is_empty() || snr_grid_db.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter(
            "SNR grid must be non-empty and strictly ascending".into(),
        ));
    }
    if !(delta_bpm > 0.0) {
        return Err(Error::Parameter(format!(
            "delta {delta_bpm} bpm must be positive"
        )));
    }
    trace.band.validate_for(trace.sample_rate)?;
    let n = trace.samples();
    let fs = trace.sample_rate;
    let counts = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<Vec<u32>> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let f_bpm = rng.random_range(trace.band.low_bpm..trace.band.high_bpm);
            let phase = rng.random_range(0.0..2.0 * PI);
            let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let unit: Vec<f64> = (0..n)
                .map(|t| (2.0 * PI * f_bpm / 60.0 * t as f64 / fs + phase).sin())
                .collect();
            snr_grid_db
                .iter()
                .map(|&snr| {
                    let amp = (2.0 * 10f64.powf(snr / 10.0)).sqrt();
                    let x = unit.iter().zip(&noise).map(|(u, e)| amp * u + e).collect();
                    let spec = periodogram(&PulseTrace::new(x, fs)?, trace.pad_to, trace.band)?;
                    let miss = match peak_bpm(&spec) {
                        Ok(est) => (est - f_bpm).abs() > delta_bpm,
                        Err(_) => true,
                    };
                    Ok(miss as u32)
                })
                .collect()
        })
        .try_reduce(
            || vec![0u32; snr_grid_db.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(OutlierTable {
        snr_grid_db: snr_grid_db.to_vec(),
        p_outlier: counts.iter().map(|&c| c as f64 / trials as f64).collect(),
        delta_bpm,
        trials,
        seed,
        trace,
    })
}

impl OutlierTable {
    /// Linear interpolation in SNR, clamped at the grid ends.
    pub fn lookup(&self, snr_db: f64) -> f64 {
        let g = &self.snr_grid_db;
        let p = &self.p_outlier;
        if snr_db.is_nan() || snr_db <= g[0] {
            return p[0];
        }
        if snr_db >= g[g.len() - 1] {
            return p[p.len() - 1];
        }
        let k = g.partition_point(|&v| v <= snr_db);
        let t = (snr_db - g[k - 1]) / (g[k] - g[k - 1]);
        p[k - 1] + t * (p[k] - p[k - 1])
    }

    pub fn to_csv(&self) -> String {
        let t = &self.trace;
        let mut s = format!(
            "# delta_bpm={}\n# trials={}\n# seed={}\n# duration_s={}\n# sample_rate_hz={}\n# band_bpm={},{}\n# pad_to={}\nsnr_db,p_outlier\n",
            self.delta_bpm, self.trials, self.seed, t.duration_s, t.sample_rate, t.band.low_bpm, t.band.high_bpm, t.pad_to
        );
        for (g, p) in self.snr_grid_db.iter().zip(&self.p_outlier) {
            s.push_str(&format!("{g},{p}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<OutlierTable> {
        let bad = |m: &str| Error::Format(format!("outlier table: {m}"));
        let mut meta = std::collections::HashMap::new();
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .peekable();
        while let Some(line) = lines.peek().and_then(|l| l.strip_prefix('#')) {
            if let Some((k, v)) = line.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            lines.next();
        }
        if lines.next() != Some("snr_db,p_outlier") {
            return Err(bad("missing 'snr_db,p_outlier' header"));
        }
        let get = |k: &str| {
            meta.get(k)
                .ok_or_else(|| bad(&format!("missing '# {k}=' comment")))
        };
        let num =
            |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(&format!("bad {k}"))) };
        let (lo, hi) = get("band_bpm")?
            .split_once(',')
            .ok_or_else(|| bad("bad band_bpm"))?;
        let band = Band::new(
            lo.trim().parse().map_err(|_| bad("bad band_bpm"))?,
            hi.trim().parse().map_err(|_| bad("bad band_bpm"))?,
        )?;
        let mut grid = Vec::new();
        let mut p = Vec::new();
        for line in lines {
            let (g, v) = line
                .split_once(',')
                .ok_or_else(|| bad("row must be snr_db,p_outlier"))?;
            grid.push(g.trim().parse::<f64>().map_err(|_| bad("bad snr_db"))?);
            let v: f64 = v.trim().parse().map_err(|_| bad("bad p_outlier"))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(bad("p_outlier outside [0, 1]"));
            }
            p.push(v);
        }
        if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(bad("SNR grid must be non-empty and ascending"));
        }
        Ok(OutlierTable {
            snr_grid_db: grid,
            p_outlier: p,
            delta_bpm: num("delta_bpm")?,
            trials: num("trials")? as usize,
            seed: get("seed")?.parse().map_err(|_| bad("bad seed"))?,
            trace: TraceSpec {
                duration_s: num("duration_s")?,
                sample_rate: num("sample_rate_hz")?,
                band,
                pad_to: num("pad_to")? as usize,
            },
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<OutlierTable> {
        let path = path.as_ref();
        Self::from_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
