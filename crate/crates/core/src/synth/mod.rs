//! Synthetic pulse videos with known ground truth.
//!
//! A clip is a skin-coloured ellipse on a flat (optionally textured) background.
//! Skin pixels carry a sinusoidal pulse along a fixed chrominance direction,
//! the whole frame can be modulated by a global illumination flicker, and
//! white Gaussian noise is added before quantisation. Everything is seeded,
//! so a spec reproduces the same bytes on every run and on any thread.

mod benchmark;
mod layout;

pub use benchmark::{
    generate_benchmark, plan_benchmark, write_benchmark, BenchmarkSpec, PlannedClip,
    CLIP_HR_JITTER, SUBJECT_HR_MEAN, SUBJECT_HR_SD,
};
pub use layout::ellipse_landmarks;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::videoio::{ClipRecord, DatabaseTag, Fps, FrameSequence, LandmarkTrack, RgbImage};

/// Relative PPG amplitudes of the red, green and blue channels.
pub const DEFAULT_PULSE_DIRECTION: [f64; 3] = [0.33, 0.77, 0.53];

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub ax: f64,
    pub ay: f64,
}

impl Ellipse {
    /// Whether the centre of pixel `(x, y)` lies inside.
    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        let u = (x as f64 + 0.5 - self.cx) / self.ax;
        let v = (y as f64 + 0.5 - self.cy) / self.ay;
        u * u + v * v <= 1.0
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Ellipse {
        Ellipse {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    /// Row-major membership grid of pixel centres.
    pub fn mask(&self, width: usize, height: usize) -> Vec<bool> {
        (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| self.contains_pixel(x, y))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Flicker {
    pub freq_bpm: f64,
    /// Relative modulation depth of the global illumination.
    pub depth: f64,
}

/// Static low-frequency colour texture added to the background.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BackgroundTexture {
    pub seed: u64,
    /// Peak deviation in gray levels.
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub fps: Fps,
    pub duration_s: f64,
    pub hr_bpm: f64,
    /// Modulation depth of the pulse along `pulse_direction`, in gray levels.
    /// Zero gives a pulse-free control clip.
    pub pulse_amp: f64,
    pub pulse_direction: [f64; 3],
    pub flicker: Option<Flicker>,
    pub noise_sigma: f64,
    pub skin_shape: Ellipse,
    pub skin_color: [f64; 3],
    pub bg_color: [f64; 3],
    pub bg_texture: Option<BackgroundTexture>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 64,
            height: 64,
            fps: Fps { num: 25, den: 1 },
            duration_s: 10.0,
            hr_bpm: 72.0,
            pulse_amp: 2.0,
            pulse_direction: DEFAULT_PULSE_DIRECTION,
            flicker: None,
            noise_sigma: 0.0,
            skin_shape: Ellipse {
                cx: 32.0,
                cy: 32.0,
                ax: 18.0,
                ay: 22.0,
            },
            skin_color: [180.0, 130.0, 110.0],
            bg_color: [60.0, 90.0, 140.0],
            bg_texture: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps.as_f64()).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invariant(msg));
        if self.width == 0 || self.height == 0 {
            return bad("frame dimensions must be non-zero".into());
        }
        if !(self.duration_s > 0.0) || self.frame_count() == 0 {
            return bad(format!("duration {} s yields no frames", self.duration_s));
        }
        if !(self.hr_bpm > 30.0 && self.hr_bpm < 240.0) {
            return bad(format!("hr_bpm {} outside (30, 240)", self.hr_bpm));
        }
        // zero amplitude is allowed: it produces the no-signal control clip
        if !(self.pulse_amp >= 0.0) {
            return bad(format!("pulse_amp {} must be non-negative", self.pulse_amp));
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise_sigma {} must be non-negative",
                self.noise_sigma
            ));
        }
        let norm = self
            .pulse_direction
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return bad("pulse_direction must be a non-zero vector".into());
        }
        let e = &self.skin_shape;
        if !(e.ax > 0.0 && e.ay > 0.0)
            || e.cx - e.ax < 0.0
            || e.cy - e.ay < 0.0
            || e.cx + e.ax > self.width as f64
            || e.cy + e.ay > self.height as f64
        {
            return bad(format!("skin ellipse {e:?} not inside the frame"));
        }
        let in_range = |c: &[f64; 3]| c.iter().all(|v| (0.0..=255.0).contains(v));
        if !in_range(&self.skin_color) || !in_range(&self.bg_color) {
            return bad("colours must lie in [0, 255]".into());
        }
        if let Some(f) = self.flicker {
            if !(f.depth >= 0.0 && f.depth < 1.0 && f.freq_bpm > 0.0) {
                return bad(format!("flicker {f:?} invalid"));
            }
        }
        Ok(())
    }

    fn unit_direction(&self) -> [f64; 3] {
        let norm = self
            .pulse_direction
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        self.pulse_direction.map(|v| v / norm)
    }
}

/// A generated clip with its bookkeeping.
#[derive(Clone, Debug)]
pub struct SynthClip {
    pub frames: FrameSequence,
    pub landmarks: LandmarkTrack,
    pub record: ClipRecord,
    /// Row-major true skin membership (static).
    pub skin_mask: Vec<bool>,
    /// Per-frame mean of the stored skin pixel values.
    pub skin_means: Vec<[f64; 3]>,
}

/// SplitMix64 mixing of a base seed with a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn texture_field(tex: &BackgroundTexture, width: usize, height: usize) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tex.seed, 0x7e47));
    // four random plane waves per channel, periods between ~1/3 and 1 frame size
    let waves: Vec<[(f64, f64, f64); 4]> = (0..3)
        .map(|_| {
            std::array::from_fn(|_| {
                let angle = rng.random_range(0.0..2.0 * PI);
                let cycles = rng.random_range(1.0..3.0);
                let phase = rng.random_range(0.0..2.0 * PI);
                (angle, cycles, phase)
            })
        })
        .collect();
    let scale = (width.max(height)) as f64;
    let mut field = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (u, v) = (x as f64 / scale, y as f64 / scale);
            field.push(std::array::from_fn(|c| {
                let s: f64 = waves[c]
                    .iter()
                    .map(|&(a, k, p)| (2.0 * PI * k * (u * a.cos() + v * a.sin()) + p).sin())
                    .sum();
                tex.amplitude * s / 4.0
            }));
        }
    }
    field
}

pub fn generate(spec: &SynthSpec, sample_id: &str, tag: DatabaseTag) -> Result<SynthClip> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let n = spec.frame_count();
    let fps = spec.fps.as_f64();
    let dir = spec.unit_direction();
    let skin_mask = spec.skin_shape.mask(w, h);
    let skin_count = skin_mask.iter().filter(|&&m| m).count();
    let background: Vec<[f64; 3]> = match &spec.bg_texture {
        Some(tex) => texture_field(tex, w, h)
            .into_iter()
            .map(|d| std::array::from_fn(|c| spec.bg_color[c] + d[c]))
            .collect(),
        None => vec![spec.bg_color; w * h],
    };
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Invariant(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut frames = Vec::with_capacity(n);
    let mut skin_means = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fps;
        let pulse = spec.pulse_amp * (2.0 * PI * spec.hr_bpm / 60.0 * t).sin();
        let gain = spec
            .flicker
            .map(|f| 1.0 + f.depth * (2.0 * PI * f.freq_bpm / 60.0 * t).sin())
            .unwrap_or(1.0);
        let skin: [f64; 3] = std::array::from_fn(|c| spec.skin_color[c] + pulse * dir[c]);
        let mut data = Vec::with_capacity(w * h * 3);
        let mut sum = [0.0f64; 3];
        for (p, &is_skin) in skin_mask.iter().enumerate() {
            let base = if is_skin { &skin } else { &background[p] };
            for c in 0..3 {
                let mut v = base[c] * gain;
                if spec.noise_sigma > 0.0 {
                    v += noise.sample(&mut rng);
                }
                let q = v.round().clamp(0.0, 255.0) as u8;
                if is_skin {
                    sum[c] += q as f64;
                }
                data.push(q);
            }
        }
        skin_means.push(sum.map(|s| s / skin_count.max(1) as f64));
        frames.push(RgbImage::from_raw(w, h, data)?);
    }
    let frames = FrameSequence::new(spec.fps, frames)?;
    let landmarks = LandmarkTrack::new(vec![ellipse_landmarks(&spec.skin_shape); n])?;
    let record = ClipRecord::new(sample_id, tag, Some(spec.hr_bpm))?;
    Ok(SynthClip {
        frames,
        landmarks,
        record,
        skin_mask,
        skin_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::videoio::encode_rvid;

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec {
            noise_sigma: 3.0,
            seed: 17,
            ..SynthSpec::default()
        };
        let a = generate(&spec, "x", DatabaseTag::A).unwrap();
        let b = generate(&spec, "x", DatabaseTag::A).unwrap();
        assert_eq!(
            encode_rvid(&a.frames).unwrap(),
            encode_rvid(&b.frames).unwrap()
        );
        let other = generate(&SynthSpec { seed: 18, ..spec }, "x", DatabaseTag::A).unwrap();
        assert_ne!(a.frames, other.frames);
    }

    #[test]
    fn frame_count_and_truth() {
        let clip = generate(&SynthSpec::default(), "s", DatabaseTag::B).unwrap();
        assert_eq!(clip.frames.len(), 250);
        assert_eq!(clip.landmarks.frame_count(), 250);
        assert_eq!(clip.record.ground_truth_hr, Some(72.0));
    }

    #[test]
    fn invalid_specs_rejected() {
        for spec in [
            SynthSpec {
                hr_bpm: 20.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                pulse_amp: -1.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                skin_shape: Ellipse {
                    cx: 5.0,
                    cy: 32.0,
                    ax: 18.0,
                    ay: 10.0,
                },
                ..SynthSpec::default()
            },
        ] {
            assert!(matches!(
                generate(&spec, "s", DatabaseTag::A),
                Err(Error::Invariant(_))
            ));
        }
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let seeds: std::collections::HashSet<_> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
