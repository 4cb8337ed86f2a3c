use super::frame::{Fps, FrameSequence, RgbImage};
use crate::error::{Error, Result};

/// Catmull-Rom weights for the four support samples at offsets -1, 0, 1, 2.
pub(crate) fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Temporal Catmull-Rom resampling to a new frame rate.
///
/// Output frame `i` sits at time `i / target`; edge frames are replicated for
/// support outside the clip. The output keeps the clip duration to within half
/// an output frame period.
pub fn resample_fps(seq: &FrameSequence, target: Fps) -> Result<FrameSequence> {
    if seq.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "cubic resampling needs at least 4 frames, clip has {}",
            seq.len()
        )));
    }
    let src = seq.fps();
    if src == target {
        return Ok(seq.clone());
    }
    let ratio = src.as_f64() / target.as_f64();
    let count = (seq.len() as f64 / ratio).round().max(1.0) as usize;
    Ok(resample_positions(seq, ratio, count, target))
}

/// Samples the clip at source positions `i * step` for `i < count` and labels
/// the result with `fps`.
pub(crate) fn resample_positions(
    seq: &FrameSequence,
    step: f64,
    count: usize,
    fps: Fps,
) -> FrameSequence {
    let frames = seq.frames();
    let last = frames.len() as isize - 1;
    let (w, h) = (seq.width(), seq.height());
    let out = (0..count)
        .map(|i| {
            let s = i as f64 * step;
            let base = s.floor();
            let t = s - base;
            let base = base as isize;
            if t == 0.0 && (0..=last).contains(&base) {
                return frames[base as usize].clone();
            }
            let weights = catmull_rom_weights(t);
            let support: [&RgbImage; 4] = std::array::from_fn(|k| {
                let idx = (base + k as isize - 1).clamp(0, last) as usize;
                &frames[idx]
            });
            let mut data = vec![0u8; w * h * 3];
            for (j, out) in data.iter_mut().enumerate() {
                let v: f64 = support
                    .iter()
                    .zip(weights.iter())
                    .map(|(f, wt)| f.as_raw()[j] as f64 * wt)
                    .sum();
                *out = v.round().clamp(0.0, 255.0) as u8;
            }
            RgbImage::from_raw(w, h, data).expect("dimensions preserved")
        })
        .collect();
    FrameSequence::new(fps, out).expect("resampled clip keeps invariants")
}
