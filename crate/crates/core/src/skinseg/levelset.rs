//! Region-based level-set evolution driven by the skin/non-skin log-ratio.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::gmm::{
    fit_skin_model_with, posterior_ratio, split_histograms, SkinModel, DEFAULT_COMPONENTS,
};
use super::mask::RoiMask;
use crate::error::{Error, Result};
use crate::videoio::{FrameSequence, PixelRect, RgbImage};

/// Halvings of the step tried before an iteration is skipped.
const MAX_BACKTRACK: usize = 30;

/// Two gray levels of standard deviation per channel.
pub const DEFAULT_NOISE_VAR: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelSetParams {
    /// Curvature (length) weight.
    pub nu: f64,
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub dt: f64,
    pub iters_first: usize,
    pub iters_next: usize,
    /// Width of the smoothed delta, in pixels.
    pub epsilon: f64,
    /// Iterations between signed-distance reinitialisations.
    pub reinit_every: usize,
    /// Mixture components per class.
    pub components: usize,
    /// Per-channel colour variance (gray levels squared) added to both
    /// mixtures before evolution, so that colours seen on frame 0 only still
    /// match after small changes on later frames.
    pub noise_var: f64,
    /// Multiplier taking the log-ratio (nats) to squared gray levels, the
    /// units `nu` is expressed in.
    pub data_scale: f64,
}

impl Default for LevelSetParams {
    fn default() -> Self {
        LevelSetParams {
            nu: 0.2 * 255.0 * 255.0,
            lambda_in: 1.0,
            lambda_out: 1.0,
            dt: 0.45,
            iters_first: 50,
            iters_next: 10,
            epsilon: 1.5,
            reinit_every: 10,
            components: DEFAULT_COMPONENTS,
            noise_var: DEFAULT_NOISE_VAR,
            data_scale: 255.0 * 255.0,
        }
    }
}

impl LevelSetParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.nu,
            self.lambda_in,
            self.lambda_out,
            self.dt,
            self.epsilon,
            self.data_scale,
            self.noise_var,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite
            || self.nu < 0.0
            || self.lambda_in < 0.0
            || self.lambda_out < 0.0
            || self.data_scale <= 0.0
            || self.noise_var < 0.0
        {
            return Err(Error::Parameter(format!(
                "level-set weights must be finite and >= 0: {self:?}"
            )));
        }
        if !(self.dt > 0.0 && self.epsilon > 0.0) || self.reinit_every == 0 || self.components == 0
        {
            return Err(Error::Parameter(format!(
                "dt, epsilon, reinit_every and components must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Level-set function on the pixel grid; positive inside the region.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetField {
    width: usize,
    height: usize,
    phi: Vec<f64>,
    pub params: LevelSetParams,
}

impl LevelSetField {
    pub fn new(width: usize, height: usize, phi: Vec<f64>, params: LevelSetParams) -> Result<Self> {
        if width == 0 || height == 0 || phi.len() != width * height {
            return Err(Error::Invariant(format!(
                "phi has {} values for a {width}x{height} grid",
                phi.len()
            )));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDivergence(
                "phi contains non-finite values".into(),
            ));
        }
        Ok(LevelSetField {
            width,
            height,
            phi,
            params,
        })
    }

    /// Signed distance field of a boolean mask.
    pub fn from_mask(
        width: usize,
        height: usize,
        mask: &[bool],
        params: LevelSetParams,
    ) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::Invariant("mask size does not match grid".into()));
        }
        Self::new(width, height, signed_distance(width, height, mask), params)
    }

    /// Field whose positive set is the ellipse with centre `(cx, cy)` and semi-axes `(ax, ay)`.
    pub fn from_ellipse(
        width: usize,
        height: usize,
        (cx, cy): (f64, f64),
        (ax, ay): (f64, f64),
        params: LevelSetParams,
    ) -> Result<Self> {
        let mask: Vec<bool> = (0..width * height)
            .map(|i| {
                let u = ((i % width) as f64 + 0.5 - cx) / ax;
                let v = ((i / width) as f64 + 0.5 - cy) / ay;
                u * u + v * v <= 1.0
            })
            .collect();
        Self::from_mask(width, height, &mask, params)
    }

    /// Centred disc of the given radius.
    pub fn circle(
        width: usize,
        height: usize,
        radius: f64,
        params: LevelSetParams,
    ) -> Result<Self> {
        let c = (width as f64 / 2.0, height as f64 / 2.0);
        Self::from_ellipse(width, height, c, (radius, radius), params)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn mask(&self) -> Vec<bool> {
        self.phi.iter().map(|&v| v > 0.0).collect()
    }

    fn reinitialize(&mut self) {
        self.phi = signed_distance(self.width, self.height, &self.mask());
    }
}

/// Squared Euclidean distance transform along one line (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let parabola = |p: usize| f[p] + (p * p) as f64;
        let mut s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        while s <= z[k] {
            k -= 1;
            s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *o = (q as f64 - p as f64).powi(2) + f[p];
    }
}

/// Distance from every pixel centre to the nearest pixel where `feature` holds.
pub(crate) fn distance_transform(
    width: usize,
    height: usize,
    feature: impl Fn(usize) -> bool,
) -> Vec<f64> {
    const FAR: f64 = 1e20;
    let mut grid: Vec<f64> = (0..width * height)
        .map(|i| if feature(i) { 0.0 } else { FAR })
        .collect();
    let n = width.max(height);
    let (mut f, mut out, mut v, mut z) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0usize; n],
        vec![0.0; n + 1],
    );
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        row.copy_from_slice(&out[..width]);
    }
    grid.into_iter().map(f64::sqrt).collect()
}

/// Signed distance: `d - 0.5` inside, `-(d - 0.5)` outside, where `d` is the
/// distance to the nearest pixel of the other class. Preserves the mask exactly.
pub(crate) fn signed_distance(width: usize, height: usize, mask: &[bool]) -> Vec<f64> {
    let far = (width + height) as f64;
    let any_in = mask.iter().any(|&m| m);
    let any_out = mask.iter().any(|&m| !m);
    let to_out = if any_out {
        distance_transform(width, height, |i| !mask[i])
    } else {
        vec![far; mask.len()]
    };
    let to_in = if any_in {
        distance_transform(width, height, |i| mask[i])
    } else {
        vec![far; mask.len()]
    };
    mask.iter()
        .enumerate()
        .map(|(i, &m)| {
            if m {
                to_out[i] - 0.5
            } else {
                -(to_in[i] - 0.5)
            }
        })
        .collect()
}

/// Per-pixel `posterior_ratio` over a frame, row-major.
pub fn ratio_map(frame: &RgbImage, model: &SkinModel) -> Vec<f64> {
    frame
        .pixels()
        .map(|p| posterior_ratio(model, p.map(f64::from)))
        .collect()
}

/// Number of 4-neighbour pairs with differing labels.
fn boundary_edges(width: usize, height: usize, mask: &[bool]) -> usize {
    let mut n = 0;
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if x + 1 < width && mask[i] != mask[i + 1] {
                n += 1;
            }
            if y + 1 < height && mask[i] != mask[i + width] {
                n += 1;
            }
        }
    }
    n
}

/// Discrete region energy of a labelling: scaled data terms over the two regions
/// plus `nu` times the boundary length (4-neighbour edge count scaled by π/4).
pub fn region_energy(ratio: &[f64], mask: &[bool], width: usize, params: &LevelSetParams) -> f64 {
    let height = mask.len() / width.max(1);
    let data: f64 = ratio
        .iter()
        .zip(mask)
        .map(|(&r, &m)| {
            if m {
                -params.lambda_in * r
            } else {
                params.lambda_out * r
            }
        })
        .sum::<f64>()
        * params.data_scale;
    data + params.nu * PI / 4.0 * boundary_edges(width, height, mask) as f64
}

/// Change of `region_energy` when the pixels in `flips` switch sides.
/// `flipped` is scratch space, all false on entry and on return.
fn flip_energy_delta(
    ratio: &[f64],
    mask: &[bool],
    flipped: &mut [bool],
    flips: &[usize],
    width: usize,
    height: usize,
    p: &LevelSetParams,
) -> f64 {
    if flips.is_empty() {
        return 0.0;
    }
    for &i in flips {
        flipped[i] = true;
    }
    let mut data = 0.0;
    let mut edges: isize = 0;
    for &i in flips {
        let r = ratio[i] * (p.lambda_in + p.lambda_out);
        data += if mask[i] { r } else { -r };
        let (x, y) = (i % width, i / width);
        let mut neighbours = [None; 4];
        if x > 0 {
            neighbours[0] = Some(i - 1);
        }
        if x + 1 < width {
            neighbours[1] = Some(i + 1);
        }
        if y > 0 {
            neighbours[2] = Some(i - width);
        }
        if y + 1 < height {
            neighbours[3] = Some(i + width);
        }
        for j in neighbours.into_iter().flatten() {
            if flipped[j] && j < i {
                continue;
            }
            let before = mask[i] != mask[j];
            let after = !mask[i] != (mask[j] ^ flipped[j]);
            edges += after as isize - before as isize;
        }
    }
    for &i in flips {
        flipped[i] = false;
    }
    data * p.data_scale + p.nu * PI / 4.0 * edges as f64
}

fn smoothed_delta(phi: f64, eps: f64) -> f64 {
    eps / (PI * (eps * eps + phi * phi))
}

/// Mean curvature of the level sets, central differences with replicated borders.
fn curvature(phi: &[f64], width: usize, height: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, width as isize - 1) as usize;
        let y = y.clamp(0, height as isize - 1) as usize;
        phi[y * width + x]
    };
    let mut k = vec![0.0; phi.len()];
    for y in 0..height as isize {
        for x in 0..width as isize {
            let c = at(x, y);
            let px = (at(x + 1, y) - at(x - 1, y)) / 2.0;
            let py = (at(x, y + 1) - at(x, y - 1)) / 2.0;
            let pxx = at(x + 1, y) - 2.0 * c + at(x - 1, y);
            let pyy = at(x, y + 1) - 2.0 * c + at(x, y - 1);
            let pxy =
                (at(x + 1, y + 1) - at(x + 1, y - 1) - at(x - 1, y + 1) + at(x - 1, y - 1)) / 4.0;
            let g2 = px * px + py * py;
            k[y as usize * width + x as usize] = (pxx * py * py - 2.0 * px * py * pxy
                + pyy * px * px)
                / ((g2 + 1e-10) * (g2 + 1e-10).sqrt());
        }
    }
    k
}

/// Evolution output: final field and the energy after initialisation and every iteration.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub field: LevelSetField,
    pub energy: Vec<f64>,
}

/// Runs `iterations` descent steps against a precomputed ratio map. A step that
/// would raise the energy is halved until it does not (or skipped).
pub fn evolve_with_ratio(
    ratio: &[f64],
    init: LevelSetField,
    iterations: usize,
) -> Result<Evolution> {
    init.params.validate()?;
    if ratio.len() != init.phi.len() {
        return Err(Error::Invariant(format!(
            "ratio map has {} values, field has {}",
            ratio.len(),
            init.phi.len()
        )));
    }
    let mut field = init;
    let (w, h) = (field.width, field.height);
    let p = field.params.clone();
    let mut mask = field.mask();
    let mut energy = vec![region_energy(ratio, &mask, w, &p)];
    let mut flipped = vec![false; mask.len()];
    let mut flips: Vec<usize> = Vec::new();
    for it in 1..=iterations {
        let kappa = curvature(&field.phi, w, h);
        let force: Vec<f64> = field
            .phi
            .iter()
            .zip(&kappa)
            .zip(ratio)
            .map(|((&phi, &k), &r)| {
                smoothed_delta(phi, p.epsilon)
                    * (p.nu * k + p.data_scale * (p.lambda_in + p.lambda_out) * r)
            })
            .collect();
        if force.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDivergence(format!(
                "force became non-finite at iteration {it}"
            )));
        }
        // only pixels pushed towards the other side can change label
        let candidates: Vec<usize> = (0..force.len())
            .filter(|&i| {
                if mask[i] {
                    force[i] < 0.0
                } else {
                    force[i] > 0.0
                }
            })
            .collect();
        let current = *energy.last().expect("initial energy");
        let mut step = p.dt;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACK {
            flips.clear();
            flips.extend(
                candidates
                    .iter()
                    .copied()
                    .filter(|&i| (field.phi[i] + step * force[i] > 0.0) != mask[i]),
            );
            let e = current + flip_energy_delta(ratio, &mask, &mut flipped, &flips, w, h, &p);
            if e <= current {
                accepted = Some((step, e));
                break;
            }
            step *= 0.5;
        }
        let e = match accepted {
            Some((step, e)) => {
                for (phi, f) in field.phi.iter_mut().zip(&force) {
                    *phi += step * f;
                }
                if field.phi.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericalDivergence(format!(
                        "phi became non-finite at iteration {it}; reduce dt"
                    )));
                }
                for &i in &flips {
                    mask[i] = !mask[i];
                }
                e
            }
            None => current,
        };
        if it % p.reinit_every == 0 {
            field.reinitialize();
        }
        energy.push(e);
    }
    Ok(Evolution { field, energy })
}

/// Evolves `init` on one frame for `iterations` steps.
pub fn evolve_levelset(
    frame: &RgbImage,
    model: &SkinModel,
    init: LevelSetField,
    iterations: usize,
) -> Result<Evolution> {
    if frame.width() != init.width || frame.height() != init.height {
        return Err(Error::Invariant(format!(
            "field is {}x{}, frame is {}x{}",
            init.width,
            init.height,
            frame.width(),
            frame.height()
        )));
    }
    evolve_with_ratio(&ratio_map(frame, model), init, iterations)
}

/// Masks for a whole clip plus the model fit on its first frame.
#[derive(Clone, Debug)]
pub struct Segmentation {
    pub mask: RoiMask,
    pub model: SkinModel,
}

/// Fits the skin model on frame 0, then evolves a warm-started level set through the clip.
/// Component counts are capped at the number of distinct colours in each class.
pub fn segment_clip(
    seq: &FrameSequence,
    seed_box: PixelRect,
    params: &LevelSetParams,
    seed: u64,
) -> Result<Segmentation> {
    params.validate()?;
    let first = &seq.frames()[0];
    let (inside, outside) = split_histograms(first, seed_box)?;
    let k_skin = params.components.min(inside.len());
    let k_nonskin = params.components.min(outside.len());
    let fit = fit_skin_model_with(first, seed_box, k_skin, k_nonskin, seed)?;
    let model = fit.model.widened(params.noise_var)?;
    let (w, h) = (seq.width(), seq.height());
    let centre = (
        seed_box.x as f64 + seed_box.w as f64 / 2.0,
        seed_box.y as f64 + seed_box.h as f64 / 2.0,
    );
    let axes = (seed_box.w as f64 / 4.0, seed_box.h as f64 / 4.0);
    let mut field = LevelSetField::from_ellipse(w, h, centre, axes, params.clone())?;
    let mut masks = Vec::with_capacity(seq.len());
    for (t, frame) in seq.frames().iter().enumerate() {
        let iters = if t == 0 {
            params.iters_first
        } else {
            params.iters_next
        };
        field = evolve_levelset(frame, &model, field, iters)?.field;
        masks.push(field.mask());
    }
    Ok(Segmentation {
        mask: RoiMask::new(w, h, masks)?,
        model,
    })
}
