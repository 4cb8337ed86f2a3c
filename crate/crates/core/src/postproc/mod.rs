//! Subject grouping by background colour, median fusion of grouped
//! predictions, and the frequency-morph / flip augmentations.

mod augment;
mod embedding;
mod fuse;
mod grouping;

pub use augment::{
    frequency_morph, hflip, morph_landmarks, morphed_len, Morphed, MORPH_FACTOR_RANGE,
    MORPH_HR_RANGE,
};
pub use embedding::{
    background_embedding, chest_embedding, embedding, pearson_distance, ColorEmbedding,
    EmbeddingMode, BACKGROUND_GRID, BACKGROUND_RECT, CHEST_GRID, CHEST_REFERENCE_WIDTH, CHEST_ROWS,
};
pub use fuse::{fuse_groups, median_fuse, FUSE_GROUP_SIZE, SELF_WEIGHT};
pub use grouping::{
    dbscan, default_eps_schedule, distance_matrix, eps_schedule, format_grouping_report,
    group_by_dbscan, ClusterAssignment, DEFAULT_EPS_MAX, DEFAULT_EPS_MIN, DEFAULT_EPS_STEPS,
    DEFAULT_GROUP_SIZE,
};
