//! Skin ROI masks: GMM-driven level sets or landmark polygons.

pub mod gmm;
mod landmark_mask;
pub mod levelset;
mod mask;

pub use gmm::{
    color_histogram, fit_mixture, fit_skin_model, posterior_ratio, Component, EmFit, Mixture,
    SkinFit, SkinModel, COVARIANCE_FLOOR, DEFAULT_COMPONENTS,
};
pub use landmark_mask::{convex_hull, landmark_frame_mask, landmark_mask, polygon_area};
pub use levelset::{
    evolve_levelset, evolve_with_ratio, ratio_map, region_energy, segment_clip, Evolution,
    LevelSetField, LevelSetParams, Segmentation,
};
pub use mask::{iou, read_masks, write_masks, RoiMask};
