//! Clip, landmark and manifest I/O plus the frame-level transforms the
//! pipelines need (temporal resampling, landmark-box pooling).

mod frame;
mod landmarks;
mod manifest;
mod resample;
mod roi;
mod rvid;

pub use frame::{Fps, FrameSequence, RgbImage};
pub use landmarks::{
    format_landmarks, layout, parse_landmarks, read_landmarks, write_landmarks, FaceLandmarks,
    LandmarkTrack, Point, LANDMARK_COUNT,
};
pub use manifest::{
    parse_manifest, read_manifest, write_manifest, ClipRecord, DatabaseTag, ManifestEntry,
};
pub use resample::resample_fps;
pub(crate) use resample::resample_positions;
pub use roi::{crop_roi_pool, expanded_box, pool_region, PixelRect, DEFAULT_POOL_SIZE, ROI_MARGIN};
pub use rvid::{
    decode_ppm, decode_rvid, encode_ppm, encode_rvid, read_clip, write_clip, write_ppm_dir,
    CLIP_META_FILE, RVID_HEADER_LEN,
};
