//! From masked video to a band-limited pulse waveform.

mod chrom;
mod filter;
mod trace;

pub use chrom::{chrom_project, chrom_project_report, ChromOutput, DEFAULT_WINDOW_S};
pub use filter::{
    band_filter, bandpass, butter_bandpass, filtfilt, pixelwise_bandpass, Sos, BUTTERWORTH_ORDER,
};
pub use trace::{
    parse_pulse_trace, pool_channels, pool_volume, read_pulse_trace, write_pulse_trace, Band,
    PulseTrace, RgbTrace, Volume,
};
