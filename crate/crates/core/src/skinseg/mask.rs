use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-frame boolean ROI over a `width × height` grid, row-major.
/// Frames without a single true pixel are flagged invalid.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiMask {
    width: usize,
    height: usize,
    frames: Vec<Vec<bool>>,
    valid: Vec<bool>,
}

impl RoiMask {
    pub fn new(width: usize, height: usize, frames: Vec<Vec<bool>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invariant("mask grid must be non-empty".into()));
        }
        if let Some(t) = frames.iter().position(|f| f.len() != width * height) {
            return Err(Error::Invariant(format!(
                "mask frame {t} has {} pixels, expected {}",
                frames[t].len(),
                width * height
            )));
        }
        let valid = frames.iter().map(|f| f.iter().any(|&m| m)).collect();
        Ok(RoiMask {
            width,
            height,
            frames,
            valid,
        })
    }

    /// The same mask repeated for `count` frames.
    pub fn repeated(width: usize, height: usize, mask: Vec<bool>, count: usize) -> Result<Self> {
        Self::new(width, height, vec![mask; count])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[bool] {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[Vec<bool>] {
        &self.frames
    }

    pub fn is_valid(&self, t: usize) -> bool {
        self.valid[t]
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn count(&self, t: usize) -> usize {
        self.frames[t].iter().filter(|&&m| m).count()
    }

    pub fn get(&self, t: usize, x: usize, y: usize) -> bool {
        self.frames[t][y * self.width + x]
    }
}

/// Intersection over union of two equally sized masks (1 when both are empty).
pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn encode_pbm(width: usize, height: usize, mask: &[bool]) -> String {
    let mut s = format!("P1\n{width} {height}\n");
    for row in mask.chunks(width) {
        let line: Vec<&str> = row.iter().map(|&m| if m { "1" } else { "0" }).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

fn decode_pbm(text: &str, path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |what: &str| Error::Format(format!("{}: {what}", path.display()));
    if tokens.next() != Some("P1") {
        return Err(bad("missing P1 magic"));
    }
    let mut dim = || -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad dimensions"))
    };
    let (w, h) = (dim()?, dim()?);
    let bits: Vec<bool> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .skip(3)
        .flat_map(|t| t.chars())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(bad("bitmap digits must be 0 or 1")),
        })
        .collect::<Result<_>>()?;
    if bits.len() != w * h {
        return Err(bad("bitmap size does not match header"));
    }
    Ok((w, h, bits))
}

/// Writes `mask_NNNNN.pbm` per frame plus `index.csv` (`frame,file,valid,pixels`).
pub fn write_masks(mask: &RoiMask, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = String::from("frame,file,valid,pixels\n");
    for t in 0..mask.len() {
        let name = format!("mask_{t:05}.pbm");
        let path = dir.join(&name);
        fs::write(&path, encode_pbm(mask.width, mask.height, mask.frame(t)))
            .map_err(|e| Error::io(&path, e))?;
        index.push_str(&format!(
            "{t},{name},{},{}\n",
            mask.is_valid(t),
            mask.count(t)
        ));
    }
    let path = dir.join("index.csv");
    fs::write(&path, index).map_err(|e| Error::io(&path, e))
}

/// Reads a directory written by [`write_masks`].
pub fn read_masks(dir: impl AsRef<Path>) -> Result<RoiMask> {
    let dir = dir.as_ref();
    let index_path = dir.join("index.csv");
    let mut reader = csv::Reader::from_path(&index_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&index_path, io),
        other => Error::Format(format!("{}: {other:?}", index_path.display())),
    })?;
    let mut frames = Vec::new();
    let mut dims = None;
    for row in reader.records() {
        let row = row?;
        let file = row
            .get(1)
            .ok_or_else(|| Error::Format("index row without file".into()))?;
        let path = dir.join(file);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let (w, h, bits) = decode_pbm(&text, &path)?;
        if dims.is_some_and(|d| d != (w, h)) {
            return Err(Error::Format(format!(
                "{} changes mask size",
                path.display()
            )));
        }
        dims = Some((w, h));
        frames.push(bits);
    }
    let (w, h) =
        dims.ok_or_else(|| Error::Format(format!("{} lists no frames", index_path.display())))?;
    RoiMask::new(w, h, frames)
}
