use std::f64::consts::PI;

use super::trace::{PulseTrace, RgbTrace};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_S: f64 = 1.6;

/// Standard deviations below this count as zero when forming α.
const SIGMA_FLOOR: f64 = 1e-12;

/// CHROM output with the indices of windows whose Y signal was flat (α forced to 0).
#[derive(Clone, Debug)]
pub struct ChromOutput {
    pub pulse: PulseTrace,
    pub flat_windows: Vec<usize>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Window start offsets: hops of `hop`, plus one window flush with the end.
pub(crate) fn window_starts(n: usize, len: usize, hop: usize) -> Vec<usize> {
    let mut starts: Vec<usize> = (0..)
        .map(|k| k * hop)
        .take_while(|s| s + len <= n)
        .collect();
    if starts.last().is_some_and(|&s| s + len < n) {
        starts.push(n - len);
    }
    starts
}

/// CHROM projection over half-overlapping, Hann-weighted windows.
pub fn chrom_project_report(trace: &RgbTrace, window_s: f64) -> Result<ChromOutput> {
    let fs = trace.sample_rate;
    if !(window_s > 0.0 && window_s.is_finite()) {
        return Err(Error::Parameter(format!(
            "window length {window_s} s must be positive"
        )));
    }
    let len = (window_s * fs).round() as usize;
    let n = trace.len();
    if len < 2 || n < len {
        return Err(Error::InsufficientData(format!(
            "CHROM window of {len} samples needs at least that many frames, have {n}"
        )));
    }
    let hop = (len / 2).max(1);
    let taper: Vec<f64> = (0..len)
        .map(|i| (PI * (i as f64 + 0.5) / len as f64).sin().powi(2))
        .collect();
    let mut acc = vec![0.0; n];
    let mut weight = vec![0.0; n];
    let mut flat_windows = Vec::new();
    let (mut x, mut y) = (vec![0.0; len], vec![0.0; len]);
    for (k, start) in window_starts(n, len, hop).into_iter().enumerate() {
        let span = start..start + len;
        let (r, g, b) = (
            &trace.r[span.clone()],
            &trace.g[span.clone()],
            &trace.b[span],
        );
        let (mr, mg, mb) = (mean(r), mean(g), mean(b));
        if !(mr > 0.0 && mg > 0.0 && mb > 0.0) {
            return Err(Error::DegenerateData(format!(
                "CHROM window {k} has a non-positive channel mean ({mr}, {mg}, {mb})"
            )));
        }
        for i in 0..len {
            let (rn, gn, bn) = (r[i] / mr, g[i] / mg, b[i] / mb);
            x[i] = 3.0 * rn - 2.0 * gn;
            y[i] = 1.5 * rn + gn - 1.5 * bn;
        }
        let sy = std_dev(&y);
        let alpha = if sy < SIGMA_FLOOR {
            flat_windows.push(k);
            0.0
        } else {
            std_dev(&x) / sy
        };
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - alpha * b).collect();
        let ms = mean(&s);
        for i in 0..len {
            acc[start + i] += taper[i] * (s[i] - ms);
            weight[start + i] += taper[i];
        }
    }
    let samples = acc.iter().zip(&weight).map(|(a, w)| a / w).collect();
    Ok(ChromOutput {
        pulse: PulseTrace::new(samples, fs)?,
        flat_windows,
    })
}

pub fn chrom_project(trace: &RgbTrace, window_s: f64) -> Result<PulseTrace> {
    chrom_project_report(trace, window_s).map(|o| o.pulse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_cover_the_trace() {
        assert_eq!(window_starts(100, 40, 20), vec![0, 20, 40, 60]);
        assert_eq!(window_starts(105, 40, 20), vec![0, 20, 40, 60, 65]);
        assert_eq!(window_starts(40, 40, 20), vec![0]);
    }

    #[test]
    fn constant_trace_is_zero_and_flagged() {
        let t = RgbTrace::new(vec![200.0; 100], vec![150.0; 100], vec![100.0; 100], 25.0).unwrap();
        let out = chrom_project_report(&t, DEFAULT_WINDOW_S).unwrap();
        assert!(out.pulse.samples().iter().all(|&v| v == 0.0));
        assert_eq!(out.flat_windows.len(), 4);
    }

    #[test]
    fn short_trace_is_rejected() {
        let t = RgbTrace::new(vec![1.0; 10], vec![1.0; 10], vec![1.0; 10], 25.0).unwrap();
        assert!(matches!(
            chrom_project(&t, 1.6),
            Err(Error::InsufficientData(_))
        ));
    }
}
