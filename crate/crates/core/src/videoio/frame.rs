use std::fmt;

use crate::error::{Error, Result};

/// Frame rate as a positive rational number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::Invariant(format!(
                "frame rate {num}/{den} must be positive"
            )));
        }
        Ok(Fps { num, den })
    }

    pub fn integer(num: u32) -> Result<Self> {
        Fps::new(num, 1)
    }

    /// Closest rational with a denominator of at most 1000.
    pub fn from_f64(fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Parameter(format!(
                "frame rate {fps} must be positive"
            )));
        }
        let den = 1000u32;
        let num = (fps * den as f64).round();
        if num < 1.0 || num > u32::MAX as f64 {
            return Err(Error::Parameter(format!("frame rate {fps} out of range")));
        }
        let num = num as u32;
        let g = gcd(num, den);
        Fps::new(num / g, den / g)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Interleaved 8-bit RGB image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RgbImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut img = RgbImage::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invariant(format!(
                "image dimensions {width}x{height} must be non-zero"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Invariant(format!(
                "image buffer holds {} bytes, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> RgbImage {
        let mut out = RgbImage::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.put(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }
}

/// A decoded clip: constant frame rate, identical frame dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    width: usize,
    height: usize,
    fps: Fps,
    frames: Vec<RgbImage>,
}

impl FrameSequence {
    pub fn new(fps: Fps, frames: Vec<RgbImage>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Invariant("a clip needs at least one frame".into()))?;
        let (width, height) = (first.width, first.height);
        if width == 0 || height == 0 {
            return Err(Error::Invariant("frame dimensions must be non-zero".into()));
        }
        if fps.num == 0 || fps.den == 0 {
            return Err(Error::Invariant("frame rate must be positive".into()));
        }
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| f.width != width || f.height != height)
        {
            return Err(Error::Invariant(format!(
                "frame {i} is {}x{}, expected {width}x{height}",
                f.width, f.height
            )));
        }
        Ok(FrameSequence {
            width,
            height,
            fps,
            frames,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn frames(&self) -> &[RgbImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps.as_f64()
    }

    pub fn into_frames(self) -> Vec<RgbImage> {
        self.frames
    }

    /// Same frames under a different nominal frame rate.
    pub fn with_fps(mut self, fps: Fps) -> Self {
        self.fps = fps;
        self
    }
}
