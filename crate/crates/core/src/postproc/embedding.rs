use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::videoio::{pool_region, PixelRect, RgbImage};

/// Top-corner rectangles used for the background embedding (rows, columns).
pub const BACKGROUND_RECT: (usize, usize) = (100, 150);
pub const BACKGROUND_GRID: (usize, usize) = (10, 15);
/// Bottom band used for the chest embedding.
pub const CHEST_ROWS: usize = 420;
pub const CHEST_REFERENCE_WIDTH: usize = 1080;
pub const CHEST_GRID: (usize, usize) = (8, 20);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    Background,
    Chest,
}

impl EmbeddingMode {
    pub fn len(self) -> usize {
        match self {
            EmbeddingMode::Background => 2 * BACKGROUND_GRID.0 * BACKGROUND_GRID.1 * 3,
            EmbeddingMode::Chest => CHEST_GRID.0 * CHEST_GRID.1 * 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColorEmbedding {
    values: Vec<f64>,
    mode: EmbeddingMode,
    /// The source rectangles did not have their nominal size.
    clipped: bool,
}

impl ColorEmbedding {
    pub fn new(values: Vec<f64>, mode: EmbeddingMode) -> Result<Self> {
        if values.len() != mode.len() {
            return Err(Error::Invariant(format!(
                "{mode:?} embedding needs {} values, got {}",
                mode.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("embedding values must be finite".into()));
        }
        Ok(ColorEmbedding {
            values,
            mode,
            clipped: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mode(&self) -> EmbeddingMode {
        self.mode
    }

    pub fn clipped(&self) -> bool {
        self.clipped
    }
}

fn flatten(cells: Vec<[f64; 3]>) -> impl Iterator<Item = f64> {
    cells.into_iter().flatten()
}

/// Average-pools the top-left and top-right corner rectangles of `frame`.
///
/// Frames narrower than two rectangles or shorter than one get the rectangles
/// shrunk to half the width and the full height; the embedding is then marked
/// clipped. Fails when a shrunk rectangle cannot give every cell a pixel.
pub fn background_embedding(frame: &RgbImage) -> Result<ColorEmbedding> {
    let (rows, cols) = BACKGROUND_RECT;
    let (grid_h, grid_w) = BACKGROUND_GRID;
    let (w, h) = (frame.width(), frame.height());
    let rw = cols.min(w / 2);
    let rh = rows.min(h);
    if rw < grid_w || rh < grid_h {
        return Err(Error::Geometry(format!(
            "{w}x{h} frame too small for a {grid_w}x{grid_h} background embedding"
        )));
    }
    let left = pool_region(frame, PixelRect::new(0, 0, rw, rh), grid_w, grid_h)?;
    let right = pool_region(frame, PixelRect::new(w - rw, 0, rw, rh), grid_w, grid_h)?;
    let mut emb = ColorEmbedding::new(
        flatten(left).chain(flatten(right)).collect(),
        EmbeddingMode::Background,
    )?;
    emb.clipped = rw < cols || rh < rows;
    Ok(emb)
}

/// Average-pools the bottom 420 rows at full width. Widths other than 1080 are
/// accepted and marked clipped.
pub fn chest_embedding(frame: &RgbImage) -> Result<ColorEmbedding> {
    let (w, h) = (frame.width(), frame.height());
    let (grid_h, grid_w) = CHEST_GRID;
    if h < CHEST_ROWS || w < grid_w {
        return Err(Error::Geometry(format!(
            "{w}x{h} frame too small for a chest embedding (needs {CHEST_ROWS} rows)"
        )));
    }
    let cells = pool_region(
        frame,
        PixelRect::new(0, h - CHEST_ROWS, w, CHEST_ROWS),
        grid_w,
        grid_h,
    )?;
    let mut emb = ColorEmbedding::new(flatten(cells).collect(), EmbeddingMode::Chest)?;
    emb.clipped = w != CHEST_REFERENCE_WIDTH;
    Ok(emb)
}

pub fn embedding(frame: &RgbImage, mode: EmbeddingMode) -> Result<ColorEmbedding> {
    match mode {
        EmbeddingMode::Background => background_embedding(frame),
        EmbeddingMode::Chest => chest_embedding(frame),
    }
}

/// `1 - ρ(a, b)`, in `[0, 2]`.
pub fn pearson_distance(a: &ColorEmbedding, b: &ColorEmbedding) -> Result<f64> {
    if a.mode != b.mode {
        return Err(Error::Parameter(format!(
            "cannot compare {:?} and {:?} embeddings",
            a.mode, b.mode
        )));
    }
    let n = a.values.len() as f64;
    let ma = a.values.iter().sum::<f64>() / n;
    let mb = b.values.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values.iter().zip(&b.values) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(Error::DegenerateEmbedding(
            "embedding has zero variance".into(),
        ));
    }
    let rho = (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0);
    Ok(1.0 - rho)
}
