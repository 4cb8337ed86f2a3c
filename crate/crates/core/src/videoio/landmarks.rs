use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Number of points in the 68-point face-alignment layout.
pub const LANDMARK_COUNT: usize = 68;

/// Index ranges of the 68-point layout.
pub mod layout {
    use std::ops::Range;

    pub const JAW: Range<usize> = 0..17;
    pub const RIGHT_BROW: Range<usize> = 17..22;
    pub const LEFT_BROW: Range<usize> = 22..27;
    pub const NOSE: Range<usize> = 27..36;
    pub const RIGHT_EYE: Range<usize> = 36..42;
    pub const LEFT_EYE: Range<usize> = 42..48;
    pub const OUTER_MOUTH: Range<usize> = 48..60;
    pub const INNER_MOUTH: Range<usize> = 60..68;
}

pub type Point = [f64; 2];
pub type FaceLandmarks = [Point; LANDMARK_COUNT];

/// Per-frame 68-point landmark positions in pixel units.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkTrack {
    frames: Vec<FaceLandmarks>,
}

impl LandmarkTrack {
    pub fn new(frames: Vec<FaceLandmarks>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Invariant(
                "landmark track needs at least one frame".into(),
            ));
        }
        for (t, pts) in frames.iter().enumerate() {
            if let Some(i) = pts
                .iter()
                .position(|p| !(p[0].is_finite() && p[1].is_finite()))
            {
                return Err(Error::Invariant(format!(
                    "landmark {i} of frame {t} is not finite"
                )));
            }
        }
        Ok(LandmarkTrack { frames })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, t: usize) -> &FaceLandmarks {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[FaceLandmarks] {
        &self.frames
    }

    /// Axis-aligned bounding box `(min_x, min_y, max_x, max_y)` of one frame.
    pub fn bounds(&self, t: usize) -> (f64, f64, f64, f64) {
        bounds_of(&self.frames[t])
    }

    /// Applies the same offset to every point.
    pub fn translated(&self, dx: f64, dy: f64) -> LandmarkTrack {
        let frames = self
            .frames
            .iter()
            .map(|pts| {
                let mut out = *pts;
                for p in out.iter_mut() {
                    p[0] += dx;
                    p[1] += dy;
                }
                out
            })
            .collect();
        LandmarkTrack { frames }
    }

    /// Linear interpolation of the track at `count` fractional source positions
    /// `i * step`, clamped to the last frame.
    pub fn resample(&self, step: f64, count: usize) -> LandmarkTrack {
        let last = self.frames.len() - 1;
        let frames = (0..count)
            .map(|i| {
                let s = (i as f64 * step).clamp(0.0, last as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(last);
                let w = s - lo as f64;
                let mut out = self.frames[lo];
                for (o, (a, b)) in out
                    .iter_mut()
                    .zip(self.frames[lo].iter().zip(self.frames[hi].iter()))
                {
                    o[0] = a[0] + w * (b[0] - a[0]);
                    o[1] = a[1] + w * (b[1] - a[1]);
                }
                out
            })
            .collect();
        LandmarkTrack { frames }
    }

    pub fn hflip(&self, width: usize) -> LandmarkTrack {
        let w = width as f64;
        let frames = self
            .frames
            .iter()
            .map(|pts| {
                let mut out = *pts;
                for p in out.iter_mut() {
                    p[0] = w - p[0];
                }
                out
            })
            .collect();
        LandmarkTrack { frames }
    }
}

pub(crate) fn bounds_of(points: &[Point]) -> (f64, f64, f64, f64) {
    points.iter().fold(
        (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ),
        |(x0, y0, x1, y1), p| (x0.min(p[0]), y0.min(p[1]), x1.max(p[0]), y1.max(p[1])),
    )
}

#[derive(serde::Deserialize, serde::Serialize)]
struct LandmarkRow {
    frame: usize,
    point: usize,
    x: f64,
    y: f64,
}

/// Reads a `frame,point,x,y` CSV and checks it describes `frame_count` frames of 68 points.
pub fn read_landmarks(path: impl AsRef<Path>, frame_count: usize) -> Result<LandmarkTrack> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_landmarks(&text, frame_count)
}

pub fn parse_landmarks(text: &str, frame_count: usize) -> Result<LandmarkTrack> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["frame", "point", "x", "y"] {
        return Err(Error::Format(format!(
            "landmark header must be frame,point,x,y, found {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut frames = vec![[[f64::NAN; 2]; LANDMARK_COUNT]; frame_count];
    let mut seen = vec![[false; LANDMARK_COUNT]; frame_count];
    for row in reader.deserialize::<LandmarkRow>() {
        let row = row.map_err(|e| Error::Format(format!("landmark row: {e}")))?;
        if row.frame >= frame_count {
            return Err(Error::Format(format!(
                "landmark frame {} beyond clip length {frame_count}",
                row.frame
            )));
        }
        if row.point >= LANDMARK_COUNT {
            return Err(Error::Format(format!(
                "frame {} has point index {} (expected < {LANDMARK_COUNT})",
                row.frame, row.point
            )));
        }
        if std::mem::replace(&mut seen[row.frame][row.point], true) {
            return Err(Error::Format(format!(
                "duplicate point {} in frame {}",
                row.point, row.frame
            )));
        }
        frames[row.frame][row.point] = [row.x, row.y];
    }
    for (t, s) in seen.iter().enumerate() {
        let n = s.iter().filter(|&&b| b).count();
        if n != LANDMARK_COUNT {
            return Err(Error::Format(format!(
                "frame {t} has {n} landmarks, expected {LANDMARK_COUNT}"
            )));
        }
    }
    LandmarkTrack::new(frames).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_landmarks(track: &LandmarkTrack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_landmarks(track)?).map_err(|e| Error::io(path, e))
}

pub fn format_landmarks(track: &LandmarkTrack) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (frame, pts) in track.frames.iter().enumerate() {
        for (point, p) in pts.iter().enumerate() {
            w.serialize(LandmarkRow {
                frame,
                point,
                x: p[0],
                y: p[1],
            })?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Format(format!("landmark csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
