use rayon::prelude::*;

use super::frame::{FrameSequence, RgbImage};
use super::landmarks::{bounds_of, LandmarkTrack, Point};
use crate::error::{Error, Result};

/// Default side length of the pooled face patch.
pub const DEFAULT_POOL_SIZE: usize = 36;
/// Fractional margin added on every side of the landmark bounding box.
pub const ROI_MARGIN: f64 = 0.10;

/// Integer pixel rectangle `[x, x + w) × [y, y + h)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl PixelRect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        PixelRect { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.x + self.w <= width && self.y + self.h <= height
    }

    /// Intersection with a `width × height` frame.
    pub fn clipped(&self, width: usize, height: usize) -> PixelRect {
        let x = self.x.min(width);
        let y = self.y.min(height);
        PixelRect {
            x,
            y,
            w: (self.x + self.w).min(width) - x,
            h: (self.y + self.h).min(height) - y,
        }
    }
}

/// Bounding box of a point set expanded by `margin` of its size on each side,
/// snapped outward to whole pixels and clipped to the frame.
pub fn expanded_box(
    points: &[Point],
    margin: f64,
    width: usize,
    height: usize,
) -> Result<PixelRect> {
    let (x0, y0, x1, y1) = bounds_of(points);
    let (bw, bh) = (x1 - x0, y1 - y0);
    if !(bw > 0.0 && bh > 0.0) {
        return Err(Error::Geometry(format!(
            "landmark bounding box {bw:.3}x{bh:.3} has zero area"
        )));
    }
    let lo_x = (x0 - margin * bw).floor().max(0.0);
    let lo_y = (y0 - margin * bh).floor().max(0.0);
    let hi_x = (x1 + margin * bw).ceil().min(width as f64);
    let hi_y = (y1 + margin * bh).ceil().min(height as f64);
    if hi_x <= lo_x || hi_y <= lo_y {
        return Err(Error::Geometry(
            "landmark box lies outside the frame".into(),
        ));
    }
    Ok(PixelRect::new(
        lo_x as usize,
        lo_y as usize,
        (hi_x - lo_x) as usize,
        (hi_y - lo_y) as usize,
    ))
}

/// Overlap weights of source pixels with each of `cells` equal-width cells spanning `[start, start + len)`.
fn cell_weights(start: usize, len: usize, cells: usize) -> Vec<Vec<(usize, f64)>> {
    let cell = len as f64 / cells as f64;
    (0..cells)
        .map(|j| {
            let a = start as f64 + j as f64 * cell;
            let b = a + cell;
            let first = a.floor() as usize;
            let last = (b.ceil() as usize).min(start + len);
            (first..last)
                .filter_map(|i| {
                    let overlap = (b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0);
                    (overlap > 0.0).then_some((i, overlap))
                })
                .collect()
        })
        .collect()
}

/// Area-weighted average pooling of `rect` onto an `out_w × out_h` grid.
/// Returns per-cell RGB means, row-major.
pub fn pool_region(
    img: &RgbImage,
    rect: PixelRect,
    out_w: usize,
    out_h: usize,
) -> Result<Vec<[f64; 3]>> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Parameter("pooled grid must be non-empty".into()));
    }
    if rect.area() == 0 || !rect.fits_in(img.width(), img.height()) {
        return Err(Error::Geometry(format!(
            "pool rectangle {rect:?} is empty or outside the {}x{} frame",
            img.width(),
            img.height()
        )));
    }
    let xs = cell_weights(rect.x, rect.w, out_w);
    let ys = cell_weights(rect.y, rect.h, out_h);
    let norm = (rect.w as f64 / out_w as f64) * (rect.h as f64 / out_h as f64);
    let mut out = Vec::with_capacity(out_w * out_h);
    for yw in &ys {
        for xw in &xs {
            let mut acc = [0.0; 3];
            for &(y, wy) in yw {
                for &(x, wx) in xw {
                    let p = img.get(x, y);
                    let w = wy * wx;
                    for c in 0..3 {
                        acc[c] += w * p[c] as f64;
                    }
                }
            }
            out.push(acc.map(|v| v / norm));
        }
    }
    Ok(out)
}

/// Crops each frame to its expanded landmark box and average-pools it to `out_w × out_h`.
pub fn crop_roi_pool(
    seq: &FrameSequence,
    track: &LandmarkTrack,
    out_w: usize,
    out_h: usize,
) -> Result<FrameSequence> {
    if track.frame_count() != seq.len() {
        return Err(Error::Invariant(format!(
            "landmark track has {} frames, clip has {}",
            track.frame_count(),
            seq.len()
        )));
    }
    let frames = seq
        .frames()
        .par_iter()
        .enumerate()
        .map(|(t, frame)| {
            let rect = expanded_box(track.frame(t), ROI_MARGIN, seq.width(), seq.height())?;
            let cells = pool_region(frame, rect, out_w, out_h)?;
            let data = cells
                .iter()
                .flat_map(|c| c.map(|v| v.round().clamp(0.0, 255.0) as u8))
                .collect();
            RgbImage::from_raw(out_w, out_h, data)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(seq.fps(), frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::videoio::frame::Fps;
    use crate::videoio::landmarks::LANDMARK_COUNT;

    fn square_landmarks(x0: f64, y0: f64, x1: f64, y1: f64) -> [Point; LANDMARK_COUNT] {
        std::array::from_fn(|i| match i % 4 {
            0 => [x0, y0],
            1 => [x1, y0],
            2 => [x1, y1],
            _ => [x0, y1],
        })
    }

    #[test]
    fn margin_expands_sixty_pixel_box_to_seventy_two() {
        let rect = expanded_box(
            &square_landmarks(10.0, 10.0, 70.0, 70.0),
            ROI_MARGIN,
            100,
            100,
        )
        .unwrap();
        assert_eq!(rect, PixelRect::new(4, 4, 72, 72));
    }

    #[test]
    fn box_is_clipped_to_frame() {
        let rect =
            expanded_box(&square_landmarks(0.0, 2.0, 30.0, 20.0), ROI_MARGIN, 32, 21).unwrap();
        assert_eq!(rect, PixelRect::new(0, 0, 32, 21));
    }

    #[test]
    fn degenerate_box_is_geometry_error() {
        let pts = [[5.0, 5.0]; LANDMARK_COUNT];
        assert!(matches!(
            expanded_box(&pts, 0.1, 10, 10),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn uniform_region_pools_to_constant() {
        let img = RgbImage::filled(50, 40, [90, 90, 90]);
        let cells = pool_region(&img, PixelRect::new(3, 5, 37, 29), 36, 36).unwrap();
        assert!(cells
            .iter()
            .all(|c| c.iter().all(|&v| (v - 90.0).abs() < 1e-9)));
    }

    #[test]
    fn crop_defaults_to_36_square() {
        let frames = vec![RgbImage::filled(80, 80, [10, 20, 30]); 2];
        let seq = FrameSequence::new(Fps::integer(25).unwrap(), frames).unwrap();
        let track = LandmarkTrack::new(vec![square_landmarks(10.0, 10.0, 70.0, 70.0); 2]).unwrap();
        let out = crop_roi_pool(&seq, &track, DEFAULT_POOL_SIZE, DEFAULT_POOL_SIZE).unwrap();
        assert_eq!((out.width(), out.height(), out.len()), (36, 36, 2));
        assert!(out.frames()[1].pixels().all(|p| p == [10, 20, 30]));
    }
}
