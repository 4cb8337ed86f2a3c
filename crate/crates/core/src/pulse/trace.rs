use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skinseg::RoiMask;
use crate::videoio::FrameSequence;

/// Heart-rate band in beats per minute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low_bpm: f64,
    pub high_bpm: f64,
}

impl Default for Band {
    fn default() -> Self {
        Band {
            low_bpm: 45.0,
            high_bpm: 180.0,
        }
    }
}

impl Band {
    pub fn new(low_bpm: f64, high_bpm: f64) -> Result<Self> {
        let band = Band { low_bpm, high_bpm };
        if !(low_bpm > 0.0 && low_bpm < high_bpm && high_bpm.is_finite()) {
            return Err(Error::Parameter(format!(
                "band [{low_bpm}, {high_bpm}] bpm is not a valid interval"
            )));
        }
        Ok(band)
    }

    /// Checks the band against the Nyquist rate of `sample_rate` Hz.
    pub fn validate_for(&self, sample_rate: f64) -> Result<()> {
        Band::new(self.low_bpm, self.high_bpm)?;
        let nyquist_bpm = 60.0 * sample_rate / 2.0;
        if self.high_bpm >= nyquist_bpm {
            return Err(Error::Parameter(format!(
                "band upper edge {} bpm reaches Nyquist ({nyquist_bpm} bpm)",
                self.high_bpm
            )));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        (self.low_bpm + self.high_bpm) / 2.0
    }

    pub fn contains(&self, bpm: f64) -> bool {
        bpm >= self.low_bpm && bpm <= self.high_bpm
    }

    pub fn low_hz(&self) -> f64 {
        self.low_bpm / 60.0
    }

    pub fn high_hz(&self) -> f64 {
        self.high_bpm / 60.0
    }
}

/// One-dimensional pulse waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseTrace {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl PulseTrace {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Invariant(format!(
                "sample rate {sample_rate} must be positive"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "pulse trace has {} samples",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("pulse sample {i} is not finite")));
        }
        Ok(PulseTrace {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Samples `start..end` as a new trace.
    pub fn slice(&self, start: usize, end: usize) -> Result<PulseTrace> {
        PulseTrace::new(self.samples[start..end].to_vec(), self.sample_rate)
    }
}

/// Per-frame mean colour of the ROI.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbTrace {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub sample_rate: f64,
}

impl RgbTrace {
    pub fn new(r: Vec<f64>, g: Vec<f64>, b: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if r.len() != g.len() || r.len() != b.len() {
            return Err(Error::Invariant(
                "rgb trace channels differ in length".into(),
            ));
        }
        if r.is_empty() {
            return Err(Error::InsufficientData("rgb trace is empty".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Invariant(format!(
                "sample rate {sample_rate} must be positive"
            )));
        }
        for (name, ch) in [("r", &r), ("g", &g), ("b", &b)] {
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invariant(format!(
                    "channel {name} has non-finite values"
                )));
            }
            let mean = ch.iter().sum::<f64>() / ch.len() as f64;
            if !(mean > 0.0) {
                return Err(Error::Invariant(format!(
                    "channel {name} mean {mean} is not positive"
                )));
            }
        }
        Ok(RgbTrace {
            r,
            g,
            b,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        match c {
            0 => &self.r,
            1 => &self.g,
            2 => &self.b,
            _ => panic!("channel index {c} out of range"),
        }
    }

    /// Mean-removed green channel, the single-channel baseline.
    pub fn green_pulse(&self) -> Result<PulseTrace> {
        let mean = self.g.iter().sum::<f64>() / self.g.len() as f64;
        PulseTrace::new(self.g.iter().map(|v| v - mean).collect(), self.sample_rate)
    }
}

/// Fills `None` entries by linear interpolation between the nearest known
/// neighbours, holding the end values flat.
pub(crate) fn fill_gaps<T: Copy>(
    values: &[Option<T>],
    lerp: impl Fn(T, T, f64) -> T,
) -> Option<Vec<T>> {
    let known: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let (&first, &last) = (known.first()?, known.last()?);
    let mut out = Vec::with_capacity(values.len());
    let mut next = 0;
    for i in 0..values.len() {
        let v = match values[i] {
            Some(v) => v,
            None if i < first => values[first].expect("known"),
            None if i > last => values[last].expect("known"),
            None => {
                while known[next] < i {
                    next += 1;
                }
                let (a, b) = (known[next - 1], known[next]);
                let t = (i - a) as f64 / (b - a) as f64;
                lerp(values[a].expect("known"), values[b].expect("known"), t)
            }
        };
        out.push(v);
    }
    Some(out)
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    std::array::from_fn(|c| a[c] + t * (b[c] - a[c]))
}

fn trace_from_means(means: Vec<Option<[f64; 3]>>, sample_rate: f64) -> Result<RgbTrace> {
    let filled = fill_gaps(&means, lerp3)
        .ok_or_else(|| Error::EmptyRoi("every frame has an empty ROI".into()))?;
    RgbTrace::new(
        filled.iter().map(|m| m[0]).collect(),
        filled.iter().map(|m| m[1]).collect(),
        filled.iter().map(|m| m[2]).collect(),
        sample_rate,
    )
}

fn check_mask(mask: &RoiMask, width: usize, height: usize, frames: usize) -> Result<()> {
    if mask.width() != width || mask.height() != height || mask.len() != frames {
        return Err(Error::Invariant(format!(
            "mask is {}x{}x{}, clip is {width}x{height}x{frames}",
            mask.width(),
            mask.height(),
            mask.len()
        )));
    }
    Ok(())
}

/// Mean R, G, B over mask pixels per frame; frames with an empty mask are interpolated.
pub fn pool_channels(seq: &FrameSequence, mask: &RoiMask) -> Result<RgbTrace> {
    check_mask(mask, seq.width(), seq.height(), seq.len())?;
    let means = seq
        .frames()
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            let mut acc = [0.0; 3];
            let mut n = 0usize;
            for (p, &m) in frame.pixels().zip(mask.frame(t)) {
                if m {
                    for c in 0..3 {
                        acc[c] += p[c] as f64;
                    }
                    n += 1;
                }
            }
            (n > 0).then(|| acc.map(|v| v / n as f64))
        })
        .collect();
    trace_from_means(means, seq.fps().as_f64())
}

/// Real-valued video, frame-major then row-major, three channels per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub sample_rate: f64,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn from_sequence(seq: &FrameSequence) -> Volume {
        let data = seq
            .frames()
            .iter()
            .flat_map(|f| f.as_raw().iter().map(|&v| v as f64))
            .collect();
        Volume {
            width: seq.width(),
            height: seq.height(),
            frames: seq.len(),
            sample_rate: seq.fps().as_f64(),
            data,
        }
    }

    fn frame_len(&self) -> usize {
        self.width * self.height * 3
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.frame_len()..(t + 1) * self.frame_len()]
    }

    /// Value of pixel `(x, y)`, channel `c`, at frame `t`.
    pub fn get(&self, t: usize, x: usize, y: usize, c: usize) -> f64 {
        self.data[t * self.frame_len() + (y * self.width + x) * 3 + c]
    }

    /// Time series of one (pixel, channel) pair.
    pub fn series(&self, x: usize, y: usize, c: usize) -> Vec<f64> {
        (0..self.frames).map(|t| self.get(t, x, y, c)).collect()
    }
}

/// `pool_channels` over a real volume.
pub fn pool_volume(vol: &Volume, mask: &RoiMask) -> Result<RgbTrace> {
    check_mask(mask, vol.width, vol.height, vol.frames)?;
    let means = (0..vol.frames)
        .map(|t| {
            let frame = vol.frame(t);
            let mut acc = [0.0; 3];
            let mut n = 0usize;
            for (i, &m) in mask.frame(t).iter().enumerate() {
                if m {
                    for c in 0..3 {
                        acc[c] += frame[i * 3 + c];
                    }
                    n += 1;
                }
            }
            (n > 0).then(|| acc.map(|v| v / n as f64))
        })
        .collect();
    trace_from_means(means, vol.sample_rate)
}

/// Writes `# sample_rate_hz=<rate>` followed by `index,value` rows.
pub fn write_pulse_trace(trace: &PulseTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = format!("# sample_rate_hz={}\nindex,value\n", trace.sample_rate);
    for (i, v) in trace.samples.iter().enumerate() {
        text.push_str(&format!("{i},{v}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_pulse_trace(text: &str) -> Result<PulseTrace> {
    let mut lines = text.lines();
    let rate = lines
        .next()
        .and_then(|l| l.trim().strip_prefix("# sample_rate_hz="))
        .and_then(|v| v.trim().parse::<f64>().ok())
        .ok_or_else(|| {
            Error::Format("pulse trace must start with '# sample_rate_hz=<float>'".into())
        })?;
    if lines.next().map(str::trim) != Some("index,value") {
        return Err(Error::Format(
            "pulse trace header must be 'index,value'".into(),
        ));
    }
    let mut samples = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (i, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("pulse row {n}: expected index,value")))?;
        let i: usize = i
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("pulse row {n}: bad index")))?;
        if i != samples.len() {
            return Err(Error::Format(format!(
                "pulse row {n}: index {i} out of sequence"
            )));
        }
        samples.push(
            v.trim()
                .parse()
                .map_err(|_| Error::Format(format!("pulse row {n}: bad value")))?,
        );
    }
    PulseTrace::new(samples, rate)
}

pub fn read_pulse_trace(path: impl AsRef<Path>) -> Result<PulseTrace> {
    let path = path.as_ref();
    parse_pulse_trace(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::videoio::{Fps, RgbImage};

    #[test]
    fn band_checks() {
        assert!(Band::new(45.0, 180.0).is_ok());
        assert!(Band::new(90.0, 45.0).is_err());
        assert!(Band::default().validate_for(25.0).is_ok());
        assert!(Band::default().validate_for(5.0).is_err());
        assert_eq!(Band::default().midpoint(), 112.5);
    }

    #[test]
    fn gaps_are_interpolated() {
        let v = [None, Some(1.0), None, None, Some(4.0), None];
        let out = fill_gaps(&v, |a, b, t| a + t * (b - a)).unwrap();
        assert_eq!(out, vec![1.0, 1.0, 2.0, 3.0, 4.0, 4.0]);
        assert!(fill_gaps::<f64>(&[None, None], |a, _, _| a).is_none());
    }

    #[test]
    fn pooling_and_empty_frames() {
        let mut img = RgbImage::filled(2, 2, [200, 100, 50]);
        img.put(1, 0, [200, 200, 50]);
        let seq = FrameSequence::new(
            Fps::integer(25).unwrap(),
            vec![img.clone(), img.clone(), img],
        )
        .unwrap();
        let m = vec![true, true, false, false];
        let mask = RoiMask::new(2, 2, vec![m.clone(), vec![false; 4], m]).unwrap();
        let tr = pool_channels(&seq, &mask).unwrap();
        assert_eq!(tr.g, vec![150.0; 3]);
        let none = RoiMask::new(2, 2, vec![vec![false; 4]; 3]).unwrap();
        assert!(matches!(
            pool_channels(&seq, &none),
            Err(Error::EmptyRoi(_))
        ));
    }

    #[test]
    fn trace_csv_round_trip() {
        let tr = PulseTrace::new(vec![0.5, -1.25, 3.0], 25.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_pulse_trace(&tr, &p).unwrap();
        assert!(std::fs::read_to_string(&p)
            .unwrap()
            .starts_with("# sample_rate_hz=25\nindex,value\n0,0.5\n"));
        assert_eq!(read_pulse_trace(&p).unwrap(), tr);
    }
}
