//! Three-dimensional Gaussian mixtures fit by EM over RGB pixels.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::videoio::{PixelRect, RgbImage};

/// Ridge added to every covariance after each M-step.
pub const COVARIANCE_FLOOR: f64 = 1e-6;
pub const EM_TOLERANCE: f64 = 1e-6;
pub const EM_MAX_ITERATIONS: usize = 200;
pub const DEFAULT_COMPONENTS: usize = 3;

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec3,
    pub cov: Mat3,
}

/// Cholesky factor inverse and log normaliser, cached per component.
#[derive(Clone, Debug, PartialEq)]
struct Density {
    inv_chol: Mat3,
    log_norm: f64,
}

impl Density {
    fn new(cov: &Mat3) -> Result<Self> {
        let l = cholesky(cov).ok_or_else(|| {
            Error::Invariant(format!("covariance {cov:?} is not positive definite"))
        })?;
        let log_det = 2.0 * (l[0][0].ln() + l[1][1].ln() + l[2][2].ln());
        Ok(Density {
            inv_chol: invert_lower(&l),
            log_norm: -0.5 * (3.0 * (2.0 * PI).ln() + log_det),
        })
    }

    #[inline]
    fn log_pdf(&self, mean: &Vec3, x: &Vec3) -> f64 {
        let d = [x[0] - mean[0], x[1] - mean[1], x[2] - mean[2]];
        let m = &self.inv_chol;
        let y0 = m[0][0] * d[0];
        let y1 = m[1][0] * d[0] + m[1][1] * d[1];
        let y2 = m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2];
        self.log_norm - 0.5 * (y0 * y0 + y1 * y1 + y2 * y2)
    }
}

fn cholesky(a: &Mat3) -> Option<Mat3> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn invert_lower(l: &Mat3) -> Mat3 {
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        inv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let s: f64 = (j..i).map(|k| l[i][k] * inv[k][j]).sum();
            inv[i][j] = -s / l[i][i];
        }
    }
    inv
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending (closed-form trigonometric solution).
pub fn symmetric_eigenvalues(a: &Mat3) -> Vec3 {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut e = [a[0][0], a[1][1], a[2][2]];
        e.sort_by(f64::total_cmp);
        return e;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: Mat3 = std::array::from_fn(|i| {
        std::array::from_fn(|j| (a[i][j] - if i == j { q } else { 0.0 }) / p)
    });
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det_b / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    [lo, 3.0 * q - hi - lo, hi]
}

/// A validated mixture of 3-D Gaussians.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    components: Vec<Component>,
    densities: Vec<Density>,
}

impl Mixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Invariant(
                "mixture needs at least one component".into(),
            ));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 || components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(Error::Invariant(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        for c in &components {
            let symmetric = (0..3).all(|i| (0..3).all(|j| c.cov[i][j] == c.cov[j][i]));
            let min_eig = symmetric_eigenvalues(&c.cov)[0];
            if !symmetric || min_eig < COVARIANCE_FLOOR * (1.0 - 1e-6) {
                return Err(Error::Invariant(format!(
                    "covariance must be symmetric with eigenvalues >= {COVARIANCE_FLOOR}, min is {min_eig}"
                )));
            }
        }
        let densities = components
            .iter()
            .map(|c| Density::new(&c.cov))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mixture {
            components,
            densities,
        })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Same mixture with `var` added to every covariance diagonal.
    pub fn widened(&self, var: f64) -> Result<Mixture> {
        if !(var >= 0.0 && var.is_finite()) {
            return Err(Error::Parameter(format!(
                "added variance {var} must be finite and >= 0"
            )));
        }
        let mut components = self.components.clone();
        for c in &mut components {
            for i in 0..3 {
                c.cov[i][i] += var;
            }
        }
        Mixture::new(components)
    }

    pub fn log_density(&self, x: &Vec3) -> f64 {
        let mut terms = [f64::NEG_INFINITY; 16];
        let mut heap;
        let buf: &mut [f64] = if self.components.len() <= terms.len() {
            &mut terms[..self.components.len()]
        } else {
            heap = vec![f64::NEG_INFINITY; self.components.len()];
            &mut heap
        };
        for ((t, c), d) in buf.iter_mut().zip(&self.components).zip(&self.densities) {
            *t = c.weight.ln() + d.log_pdf(&c.mean, x);
        }
        log_sum_exp(buf)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Skin and non-skin colour mixtures.
#[derive(Clone, Debug, PartialEq)]
pub struct SkinModel {
    pub skin: Mixture,
    pub nonskin: Mixture,
}

impl SkinModel {
    /// Both mixtures widened by a per-channel noise variance.
    pub fn widened(&self, var: f64) -> Result<SkinModel> {
        Ok(SkinModel {
            skin: self.skin.widened(var)?,
            nonskin: self.nonskin.widened(var)?,
        })
    }

    pub fn swapped(&self) -> SkinModel {
        SkinModel {
            skin: self.nonskin.clone(),
            nonskin: self.skin.clone(),
        }
    }
}

/// `log p(pixel | skin) - log p(pixel | non-skin)`.
pub fn posterior_ratio(model: &SkinModel, pixel: [f64; 3]) -> f64 {
    model.skin.log_density(&pixel) - model.nonskin.log_density(&pixel)
}

/// Result of one EM run.
#[derive(Clone, Debug)]
pub struct EmFit {
    pub mixture: Mixture,
    /// Mean per-sample log-likelihood after initialisation and after every iteration.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

/// Distinct colours with their multiplicities.
pub fn color_histogram(pixels: impl IntoIterator<Item = [u8; 3]>) -> Vec<(Vec3, f64)> {
    let mut counts: HashMap<[u8; 3], usize> = HashMap::new();
    for p in pixels {
        *counts.entry(p).or_default() += 1;
    }
    let mut hist: Vec<_> = counts.into_iter().collect();
    hist.sort_unstable_by_key(|(c, _)| *c);
    hist.into_iter()
        .map(|(c, n)| (c.map(f64::from), n as f64))
        .collect()
}

fn sq_dist(a: &Vec3, b: &Vec3) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// k-means++ seeding over weighted points.
fn kmeans_pp(points: &[(Vec3, f64)], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let pick = |weights: &[f64], rng: &mut ChaCha8Rng| {
        let total: f64 = weights.iter().sum();
        let mut target = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                if target < *w {
                    return i;
                }
                target -= w;
            }
        }
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    };
    let counts: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut centers = vec![points[pick(&counts, rng)].0];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(&p.0, &centers[0])).collect();
    while centers.len() < k {
        let weights: Vec<f64> = d2.iter().zip(&counts).map(|(d, c)| d * c).collect();
        let c = points[pick(&weights, rng)].0;
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(&p.0, &c));
        }
        centers.push(c);
    }
    centers
}

/// Weighted M-step from responsibilities (`resp[i * k + j]`). Components whose
/// mass vanishes keep their previous parameters with zero weight.
fn m_step(
    points: &[(Vec3, f64)],
    resp: &[f64],
    k: usize,
    previous: Option<&[Component]>,
) -> Vec<Component> {
    let total: f64 = points.iter().map(|p| p.1).sum();
    (0..k)
        .map(|j| {
            let mass: f64 = points
                .iter()
                .enumerate()
                .map(|(i, p)| p.1 * resp[i * k + j])
                .sum();
            if mass <= 1e-12 * total {
                if let Some(prev) = previous {
                    return Component {
                        weight: mass / total,
                        ..prev[j].clone()
                    };
                }
            }
            let mut mean = [0.0; 3];
            for (i, p) in points.iter().enumerate() {
                let w = p.1 * resp[i * k + j];
                for c in 0..3 {
                    mean[c] += w * p.0[c];
                }
            }
            mean = mean.map(|m| m / mass);
            let mut cov = [[0.0; 3]; 3];
            for (i, p) in points.iter().enumerate() {
                let w = p.1 * resp[i * k + j];
                let d = [p.0[0] - mean[0], p.0[1] - mean[1], p.0[2] - mean[2]];
                for a in 0..3 {
                    for b in a..3 {
                        cov[a][b] += w * d[a] * d[b];
                    }
                }
            }
            for a in 0..3 {
                for b in a..3 {
                    cov[a][b] /= mass;
                    cov[b][a] = cov[a][b];
                }
                cov[a][a] += COVARIANCE_FLOOR;
            }
            Component {
                weight: mass / total,
                mean,
                cov,
            }
        })
        .collect()
}

fn renormalized(mut comps: Vec<Component>) -> Vec<Component> {
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps.iter_mut() {
        c.weight /= total;
    }
    comps
}

/// E-step: fills `resp` and returns the mean log-likelihood.
fn e_step(points: &[(Vec3, f64)], mixture: &Mixture, resp: &mut [f64]) -> f64 {
    let k = mixture.components.len();
    let total: f64 = points.iter().map(|p| p.1).sum();
    let mut ll = 0.0;
    let mut logs = vec![0.0; k];
    for (i, p) in points.iter().enumerate() {
        for (j, (c, d)) in mixture
            .components
            .iter()
            .zip(&mixture.densities)
            .enumerate()
        {
            logs[j] = c.weight.ln() + d.log_pdf(&c.mean, &p.0);
        }
        let lse = log_sum_exp(&logs);
        for j in 0..k {
            resp[i * k + j] = (logs[j] - lse).exp();
        }
        ll += p.1 * lse;
    }
    ll / total
}

/// Fits a `k`-component mixture to weighted colour samples.
pub fn fit_mixture(points: &[(Vec3, f64)], k: usize, seed: u64) -> Result<EmFit> {
    if k == 0 {
        return Err(Error::Parameter(
            "component count must be at least 1".into(),
        ));
    }
    if points.is_empty() {
        return Err(Error::Geometry("no pixels to fit".into()));
    }
    if k > points.len() {
        return Err(Error::DegenerateData(format!(
            "{k} components requested for {} distinct colours",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans_pp(points, k, &mut rng);
    let mut resp = vec![0.0; points.len() * k];
    for (i, p) in points.iter().enumerate() {
        let nearest = (0..k)
            .min_by(|&a, &b| sq_dist(&p.0, &centers[a]).total_cmp(&sq_dist(&p.0, &centers[b])))
            .expect("k >= 1");
        resp[i * k + nearest] = 1.0;
    }
    let mut mixture = Mixture::new(renormalized(m_step(points, &resp, k, None)))?;
    let mut trace = vec![e_step(points, &mixture, &mut resp)];
    let mut converged = false;
    for _ in 0..EM_MAX_ITERATIONS {
        let next = Mixture::new(renormalized(m_step(
            points,
            &resp,
            k,
            Some(&mixture.components),
        )))?;
        let ll = e_step(points, &next, &mut resp);
        let gain = ll - trace.last().copied().unwrap_or(f64::NEG_INFINITY);
        mixture = next;
        trace.push(ll);
        if gain < EM_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(EmFit {
        mixture,
        log_likelihood: trace,
        converged,
    })
}

/// Both class fits and their likelihood traces.
#[derive(Clone, Debug)]
pub struct SkinFit {
    pub model: SkinModel,
    pub skin_log_likelihood: Vec<f64>,
    pub nonskin_log_likelihood: Vec<f64>,
}

fn check_seed_box(frame: &RgbImage, seed_box: PixelRect) -> Result<()> {
    let inside = seed_box.x > 0
        && seed_box.y > 0
        && seed_box.x + seed_box.w < frame.width()
        && seed_box.y + seed_box.h < frame.height();
    if !inside {
        return Err(Error::Geometry(format!(
            "seed box {seed_box:?} must lie strictly inside the {}x{} frame",
            frame.width(),
            frame.height()
        )));
    }
    if seed_box.area() < 100 {
        return Err(Error::Geometry(format!(
            "seed box area {} below 100 pixels",
            seed_box.area()
        )));
    }
    Ok(())
}

/// Splits a frame into colour histograms inside and outside the seed box.
pub fn split_histograms(
    frame: &RgbImage,
    seed_box: PixelRect,
) -> Result<(Vec<(Vec3, f64)>, Vec<(Vec3, f64)>)> {
    check_seed_box(frame, seed_box)?;
    let mut inside = Vec::with_capacity(seed_box.area());
    let mut outside = Vec::with_capacity(frame.width() * frame.height() - seed_box.area());
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            if seed_box.contains(x, y) {
                inside.push(frame.get(x, y));
            } else {
                outside.push(frame.get(x, y));
            }
        }
    }
    Ok((color_histogram(inside), color_histogram(outside)))
}

/// Fits the skin mixture on pixels inside `seed_box` and the non-skin mixture
/// on the rest of the frame.
pub fn fit_skin_model(
    frame: &RgbImage,
    seed_box: PixelRect,
    k: usize,
    seed: u64,
) -> Result<SkinFit> {
    fit_skin_model_with(frame, seed_box, k, k, seed)
}

pub(crate) fn fit_skin_model_with(
    frame: &RgbImage,
    seed_box: PixelRect,
    k_skin: usize,
    k_nonskin: usize,
    seed: u64,
) -> Result<SkinFit> {
    let (inside, outside) = split_histograms(frame, seed_box)?;
    let skin = fit_mixture(&inside, k_skin, seed)?;
    let nonskin = fit_mixture(&outside, k_nonskin, seed.wrapping_add(1))?;
    Ok(SkinFit {
        model: SkinModel {
            skin: skin.mixture,
            nonskin: nonskin.mixture,
        },
        skin_log_likelihood: skin.log_likelihood,
        nonskin_log_likelihood: nonskin.log_likelihood,
    })
}
