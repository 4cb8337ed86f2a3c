use crate::error::{Error, Result};
use crate::videoio::{resample_positions, FrameSequence, LandmarkTrack};

pub const MORPH_FACTOR_RANGE: (f64, f64) = (0.5, 2.0);
/// Morphed ground truth outside this range is reported.
pub const MORPH_HR_RANGE: (f64, f64) = (45.0, 180.0);

#[derive(Clone, Debug)]
pub struct Morphed {
    pub frames: FrameSequence,
    pub hr_bpm: f64,
    pub hr_in_range: bool,
}

/// Frames in the morphed clip: the duration scales by `1 / factor`.
pub fn morphed_len(len: usize, factor: f64) -> usize {
    ((len as f64 / factor).round() as usize).max(1)
}

/// Plays the clip `factor` times faster at the same frame rate (cubic
/// interpolation between frames), scaling the ground-truth rate to match.
pub fn frequency_morph(seq: &FrameSequence, factor: f64, gt_hr: f64) -> Result<Morphed> {
    let (lo, hi) = MORPH_FACTOR_RANGE;
    if !(factor >= lo && factor <= hi) {
        return Err(Error::Parameter(format!(
            "morph factor {factor} outside [{lo}, {hi}]"
        )));
    }
    if seq.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "morphing needs at least 4 frames, clip has {}",
            seq.len()
        )));
    }
    let frames = if factor == 1.0 {
        seq.clone()
    } else {
        resample_positions(seq, factor, morphed_len(seq.len(), factor), seq.fps())
    };
    let hr_bpm = gt_hr * factor;
    Ok(Morphed {
        frames,
        hr_bpm,
        hr_in_range: (MORPH_HR_RANGE.0..=MORPH_HR_RANGE.1).contains(&hr_bpm),
    })
}

/// Landmark track matching [`frequency_morph`] of a clip with the same length.
pub fn morph_landmarks(track: &LandmarkTrack, factor: f64) -> LandmarkTrack {
    track.resample(factor, morphed_len(track.frame_count(), factor))
}

pub fn hflip(seq: &FrameSequence) -> FrameSequence {
    let frames = seq.frames().iter().map(|f| f.flip_horizontal()).collect();
    FrameSequence::new(seq.fps(), frames).expect("flip keeps dimensions")
}
