use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{derive_seed, generate, BackgroundTexture, SynthSpec};
use crate::error::{Error, Result};
use crate::videoio::{write_clip, write_landmarks, write_manifest, DatabaseTag, ManifestEntry};

/// Mean and spread of the per-subject heart-rate distribution (bpm).
pub const SUBJECT_HR_MEAN: f64 = 80.0;
pub const SUBJECT_HR_SD: f64 = 15.0;
/// Within-subject heart-rate jitter (bpm, uniform ±).
pub const CLIP_HR_JITTER: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub n_subjects: usize,
    pub clips_per_subject: usize,
    pub hr_range: (f64, f64),
    pub seed: u64,
    /// Template for every clip; HR, background and seed are overridden.
    pub base: SynthSpec,
    /// Amplitude of the per-subject background texture (0 disables it).
    pub bg_texture_amplitude: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            n_subjects: 20,
            clips_per_subject: 5,
            hr_range: (49.0, 134.0),
            seed: 0,
            base: SynthSpec::default(),
            bg_texture_amplitude: 25.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlannedClip {
    pub sample_id: String,
    pub subject: usize,
    pub tag: DatabaseTag,
    pub spec: SynthSpec,
}

fn subject_hr(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let normal = Normal::new(SUBJECT_HR_MEAN, SUBJECT_HR_SD).expect("valid normal");
    for _ in 0..10_000 {
        let v = normal.sample(rng);
        if v > lo && v < hi {
            return v;
        }
    }
    rng.random_range(lo..hi)
}

/// Background colour for subject `s` of `n`: hues evenly spaced on the chroma circle.
fn subject_background(s: usize, n: usize) -> [f64; 3] {
    let angle = 2.0 * PI * s as f64 / n.max(1) as f64;
    std::array::from_fn(|c| 110.0 + 60.0 * (angle - c as f64 * 2.0 * PI / 3.0).cos())
}

/// Draws subject heart rates and per-clip specs without touching the disk.
pub fn plan_benchmark(spec: &BenchmarkSpec) -> Result<Vec<PlannedClip>> {
    let (lo, hi) = spec.hr_range;
    if !(lo > 30.0 && hi < 240.0 && lo < hi) {
        return Err(Error::Parameter(format!(
            "hr_range ({lo}, {hi}) must lie inside (30, 240)"
        )));
    }
    if spec.n_subjects == 0 || spec.clips_per_subject == 0 {
        return Err(Error::Parameter(
            "benchmark needs at least one subject and one clip".into(),
        ));
    }
    let mut planned = Vec::with_capacity(spec.n_subjects * spec.clips_per_subject);
    for s in 0..spec.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, s as u64));
        let hr = subject_hr(&mut rng, spec.hr_range);
        let bg_color = subject_background(s, spec.n_subjects);
        let texture_seed = derive_seed(spec.seed ^ 0x6267, s as u64);
        let tag = if s % 2 == 0 {
            DatabaseTag::A
        } else {
            DatabaseTag::B
        };
        for c in 0..spec.clips_per_subject {
            let jitter = rng.random_range(-CLIP_HR_JITTER..=CLIP_HR_JITTER);
            let index = (s * spec.clips_per_subject + c) as u64;
            let clip = SynthSpec {
                hr_bpm: (hr + jitter).clamp(lo + 1e-6, hi - 1e-6),
                bg_color,
                bg_texture: (spec.bg_texture_amplitude > 0.0).then_some(BackgroundTexture {
                    seed: texture_seed,
                    amplitude: spec.bg_texture_amplitude,
                }),
                seed: derive_seed(spec.seed, 1 << 32 | index),
                ..spec.base.clone()
            };
            clip.validate()?;
            planned.push(PlannedClip {
                sample_id: format!("s{s:03}_c{c}"),
                subject: s,
                tag,
                spec: clip,
            });
        }
    }
    Ok(planned)
}

/// Generates and stores every planned clip under `out_dir`
/// (`clips/<id>.rvid`, `landmarks/<id>.csv`). Returns manifest rows in plan order.
pub fn write_benchmark(planned: &[PlannedClip], out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let clips_dir = out_dir.join("clips");
    let lm_dir = out_dir.join("landmarks");
    for d in [&clips_dir, &lm_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    planned
        .par_iter()
        .map(|p| {
            let clip = generate(&p.spec, &p.sample_id, p.tag)?;
            let path: PathBuf = clips_dir.join(format!("{}.rvid", p.sample_id));
            let lm: PathBuf = lm_dir.join(format!("{}.csv", p.sample_id));
            write_clip(&clip.frames, &path)?;
            write_landmarks(&clip.landmarks, &lm)?;
            Ok(ManifestEntry {
                record: clip.record,
                path,
                landmarks_path: Some(lm),
            })
        })
        .collect()
}

/// Plans, renders and writes a benchmark plus `manifest.csv` into `out_dir`.
pub fn generate_benchmark(spec: &BenchmarkSpec, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let planned = plan_benchmark(spec)?;
    let entries = write_benchmark(&planned, out_dir)?;
    write_manifest(&entries, out_dir.join("manifest.csv"))?;
    Ok(entries)
}
