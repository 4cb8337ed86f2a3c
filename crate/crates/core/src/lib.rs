//! Remote photoplethysmography toolkit.
//!
//! Heart rate from face video, end to end:
//!
//! 1. [`videoio`] – RVID clips, landmark tracks, manifests, resampling, ROI pooling.
//! 2. [`skinseg`] – GMM skin models, level-set ROI tracking, landmark polygon masks.
//! 3. [`pulse`] – channel pooling, CHROM projection, zero-phase Butterworth band-pass.
//! 4. [`spectral`] – periodogram peak picking, SNR, Monte Carlo outlier tables and
//!    the adaptive two-rate spectral smoother.
//! 5. [`postproc`] – colour embeddings, iterative DBSCAN subject grouping, median
//!    fusion and the frequency-morph / flip augmentations.
//! 6. [`evalkit`] – MAE / RMSE / Pearson R, HR-band and database strata, leaderboard.
//! 7. [`synth`] – deterministic synthetic pulse videos used as ground truth.
//! 8. [`pipeline`] – configuration and the per-manifest estimation driver.

pub mod error;
pub mod evalkit;
pub mod pipeline;
pub mod postproc;
pub mod pulse;
pub mod skinseg;
pub mod spectral;
pub mod synth;
pub mod videoio;

pub use error::{Error, Result};
