//! Heart rate from a pulse waveform's spectrum.

mod ad;
mod peak;
mod periodogram;
mod table;

pub use ad::{ad_estimate, ad_track, sliding_spectra, AdParams, AdState, AdTracker};
pub use peak::{
    compute_snr, estimate_tone_snr, peak_bpm, pick_peak, Estimator, HrEstimate,
    SNR_HALF_WIDTH_BINS, TONE_HALF_WIDTH_BINS,
};
pub use periodogram::{hann, periodogram, Spectrum, DEFAULT_PAD, MIN_SAMPLES};
pub use table::{
    build_outlier_table, snr_grid, OutlierTable, TraceSpec, DEFAULT_DELTA_BPM, MIN_TRIALS,
};
