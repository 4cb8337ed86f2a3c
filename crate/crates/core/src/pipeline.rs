//! Manifest-level driver: ROI, pooling, CHROM, band-pass, estimation and the
//! optional grouping + fusion pass, configured from one TOML file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::Submission;
use crate::postproc::{
    embedding, eps_schedule, fuse_groups, group_by_dbscan, ClusterAssignment, ColorEmbedding,
    EmbeddingMode, DEFAULT_EPS_MAX, DEFAULT_EPS_MIN, DEFAULT_EPS_STEPS, DEFAULT_GROUP_SIZE,
    FUSE_GROUP_SIZE,
};
use crate::pulse::{bandpass, chrom_project, pool_channels, Band, PulseTrace, DEFAULT_WINDOW_S};
use crate::skinseg::{landmark_mask, segment_clip, LevelSetParams, RoiMask};
use crate::spectral::{
    ad_estimate, build_outlier_table, periodogram, pick_peak, snr_grid, AdParams, Estimator,
    HrEstimate, OutlierTable, TraceSpec, DEFAULT_DELTA_BPM, DEFAULT_PAD,
};
use crate::synth::derive_seed;
use crate::videoio::{
    expanded_box, read_clip, read_landmarks, read_manifest, FrameSequence, LandmarkTrack,
    ManifestEntry, PixelRect, RgbImage, ROI_MARGIN,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoiMethod {
    Levelset,
    Landmark,
}

/// Outlier-table settings for the AD estimator. The table is read from `path`
/// when given, otherwise built for the clip sample rate and the AD window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdTableConfig {
    pub path: Option<PathBuf>,
    pub trials: usize,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub snr_step_db: f64,
    pub delta_bpm: f64,
}

impl Default for AdTableConfig {
    fn default() -> Self {
        AdTableConfig {
            path: None,
            trials: 2000,
            snr_min_db: -30.0,
            snr_max_db: 20.0,
            snr_step_db: 2.5,
            delta_bpm: DEFAULT_DELTA_BPM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupingConfig {
    pub embedding: EmbeddingMode,
    pub group_size: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_steps: usize,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        GroupingConfig {
            embedding: EmbeddingMode::Background,
            group_size: DEFAULT_GROUP_SIZE,
            eps_min: DEFAULT_EPS_MIN,
            eps_max: DEFAULT_EPS_MAX,
            eps_steps: DEFAULT_EPS_STEPS,
        }
    }
}

impl GroupingConfig {
    pub fn schedule(&self) -> Result<Vec<f64>> {
        eps_schedule(self.eps_min, self.eps_max, self.eps_steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub roi_method: RoiMethod,
    pub band: Band,
    pub estimator: Estimator,
    pub fuse: bool,
    pub seed: u64,
    pub chrom_window_s: f64,
    pub pad_to: usize,
    pub levelset: LevelSetParams,
    pub ad: AdParams,
    pub ad_table: AdTableConfig,
    pub grouping: GroupingConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            roi_method: RoiMethod::Levelset,
            band: Band::default(),
            estimator: Estimator::Peak,
            fuse: true,
            seed: 0,
            chrom_window_s: DEFAULT_WINDOW_S,
            pad_to: DEFAULT_PAD,
            levelset: LevelSetParams::default(),
            ad: AdParams::default(),
            ad_table: AdTableConfig::default(),
            grouping: GroupingConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        Band::new(self.band.low_bpm, self.band.high_bpm)?;
        if !(self.chrom_window_s > 0.0 && self.chrom_window_s.is_finite()) {
            return Err(Error::Parameter(format!(
                "chrom_window_s {} must be positive",
                self.chrom_window_s
            )));
        }
        if !self.pad_to.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "pad_to {} must be a power of two",
                self.pad_to
            )));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Parameter(format!(
                "seed {} does not fit a signed 64-bit integer",
                self.seed
            )));
        }
        self.levelset.validate()?;
        self.ad.validate()?;
        self.grouping.schedule()?;
        if self.fuse && self.grouping.group_size != FUSE_GROUP_SIZE {
            return Err(Error::Parameter(format!(
                "fusion needs groups of {FUSE_GROUP_SIZE}, configured {}",
                self.grouping.group_size
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        PipelineConfig::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Outlier table for traces sampled at `sample_rate`.
    pub fn outlier_table(&self, sample_rate: f64) -> Result<OutlierTable> {
        let t = &self.ad_table;
        if let Some(path) = &t.path {
            return OutlierTable::read(path);
        }
        let spec = TraceSpec {
            duration_s: self.ad.window_s,
            sample_rate,
            band: self.band,
            pad_to: self.pad_to,
        };
        build_outlier_table(
            &snr_grid(t.snr_min_db, t.snr_max_db, t.snr_step_db),
            t.delta_bpm,
            t.trials,
            spec,
            self.seed,
        )
    }
}

/// Seed rectangle for the level set: the expanded landmark box of frame 0, or
/// the central half of the frame without landmarks.
pub fn levelset_seed_box(
    seq: &FrameSequence,
    landmarks: Option<&LandmarkTrack>,
) -> Result<PixelRect> {
    let (w, h) = (seq.width(), seq.height());
    match landmarks {
        Some(track) => expanded_box(track.frame(0), ROI_MARGIN, w, h),
        None => Ok(PixelRect::new(w / 4, h / 4, (w / 2).max(1), (h / 2).max(1))),
    }
}

pub fn roi_mask(
    seq: &FrameSequence,
    landmarks: Option<&LandmarkTrack>,
    config: &PipelineConfig,
    clip_seed: u64,
) -> Result<RoiMask> {
    if let Some(track) = landmarks {
        if track.frame_count() != seq.len() {
            return Err(Error::Invariant(format!(
                "landmark track has {} frames, clip has {}",
                track.frame_count(),
                seq.len()
            )));
        }
    }
    match config.roi_method {
        RoiMethod::Landmark => {
            let track = landmarks
                .ok_or_else(|| Error::Parameter("landmark ROI needs a landmark track".into()))?;
            landmark_mask(track, seq.width(), seq.height())
        }
        RoiMethod::Levelset => {
            let seed_box = levelset_seed_box(seq, landmarks)?;
            Ok(segment_clip(seq, seed_box, &config.levelset, clip_seed)?.mask)
        }
    }
}

/// ROI → pooled RGB → CHROM → zero-phase band-pass.
pub fn extract_pulse(
    seq: &FrameSequence,
    landmarks: Option<&LandmarkTrack>,
    config: &PipelineConfig,
    clip_seed: u64,
) -> Result<PulseTrace> {
    config.band.validate_for(seq.fps().as_f64())?;
    let mask = roi_mask(seq, landmarks, config, clip_seed)?;
    let rgb = pool_channels(seq, &mask)?;
    let pulse = chrom_project(&rgb, config.chrom_window_s)?;
    bandpass(&pulse, config.band)
}

/// Heart rate of a band-passed pulse. The AD estimator needs a table built for
/// the trace's sample rate.
pub fn estimate_hr(
    trace: &PulseTrace,
    config: &PipelineConfig,
    table: Option<&OutlierTable>,
) -> Result<HrEstimate> {
    match config.estimator {
        Estimator::Peak => pick_peak(&periodogram(
            trace,
            config.pad_to.max(trace.len().next_power_of_two()),
            config.band,
        )?),
        Estimator::Ad => {
            let table = table
                .ok_or_else(|| Error::Parameter("AD estimator needs an outlier table".into()))?;
            ad_estimate(trace, table, &config.ad, config.pad_to, config.band)
        }
    }
}

/// Full single-clip estimate (no grouping).
pub fn estimate_clip(
    seq: &FrameSequence,
    landmarks: Option<&LandmarkTrack>,
    config: &PipelineConfig,
    clip_seed: u64,
    table: Option<&OutlierTable>,
) -> Result<HrEstimate> {
    estimate_hr(
        &extract_pulse(seq, landmarks, config, clip_seed)?,
        config,
        table,
    )
}

/// A clip whose estimate fell back to the band midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipWarning {
    pub sample_id: String,
    pub stage: &'static str,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub submission: Submission,
    /// Sample ids in manifest order.
    pub order: Vec<String>,
    pub raw_bpm: Vec<f64>,
    pub fused_bpm: Vec<f64>,
    pub grouping: Option<ClusterAssignment>,
    pub warnings: Vec<ClipWarning>,
}

struct Loaded {
    frames: FrameSequence,
    landmarks: Option<LandmarkTrack>,
}

fn load(entry: &ManifestEntry) -> Result<Loaded> {
    let frames = read_clip(&entry.path)?;
    let landmarks = match &entry.landmarks_path {
        Some(p) => Some(read_landmarks(p, frames.len())?),
        None => None,
    };
    Ok(Loaded { frames, landmarks })
}

/// Runs every manifest clip through the pipeline. Data problems in one clip
/// give the band midpoint and a warning; I/O failures abort the run.
pub fn run_entries(entries: &[ManifestEntry], config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let fallback = config.band.midpoint();
    let mut loaded: Vec<Result<Loaded>> = entries.par_iter().map(load).collect();
    if let Some(k) = loaded.iter().position(|l| matches!(l, Err(e) if e.is_io())) {
        return Err(loaded.swap_remove(k).err().expect("error"));
    }
    let traces: Vec<Result<PulseTrace>> = loaded
        .par_iter()
        .enumerate()
        .map(|(i, l)| match l {
            Ok(l) => extract_pulse(
                &l.frames,
                l.landmarks.as_ref(),
                config,
                derive_seed(config.seed, i as u64),
            ),
            Err(_) => Err(Error::InsufficientData("clip not loaded".into())),
        })
        .collect();
    let mut tables: BTreeMap<u64, OutlierTable> = BTreeMap::new();
    if config.estimator == Estimator::Ad {
        for t in traces.iter().flatten() {
            let key = t.sample_rate().to_bits();
            if !tables.contains_key(&key) {
                info!("building outlier table for {} Hz traces", t.sample_rate());
                tables.insert(key, config.outlier_table(t.sample_rate())?);
            }
        }
    }
    let mut warnings = Vec::new();
    let mut raw_bpm = Vec::with_capacity(entries.len());
    for (entry, (l, trace)) in entries.iter().zip(loaded.iter().zip(&traces)) {
        let id = &entry.record.sample_id;
        let result = match (l, trace) {
            (Err(e), _) => Err(("load", e.to_string())),
            (_, Err(e)) => Err(("extract", e.to_string())),
            (_, Ok(t)) => estimate_hr(t, config, tables.get(&t.sample_rate().to_bits()))
                .map_err(|e| ("estimate", e.to_string())),
        };
        match result {
            Ok(est) => raw_bpm.push(est.bpm),
            Err((stage, message)) => {
                warn!("{id}: {stage} failed ({message}); using {fallback} bpm");
                warnings.push(ClipWarning {
                    sample_id: id.clone(),
                    stage,
                    message,
                });
                raw_bpm.push(fallback);
            }
        }
    }
    let mut fused_bpm = raw_bpm.clone();
    let mut grouping = None;
    if config.fuse {
        let firsts: Vec<Option<&RgbImage>> = loaded
            .iter()
            .map(|l| l.as_ref().ok().map(|l| &l.frames.frames()[0]))
            .collect();
        let assignment = group_frames(&firsts, &config.grouping)?;
        fuse_groups(&mut fused_bpm, &assignment)?;
        grouping = Some(assignment);
    }
    let order: Vec<String> = entries.iter().map(|e| e.record.sample_id.clone()).collect();
    let submission = Submission::new(order.iter().cloned().zip(fused_bpm.iter().copied()))?;
    Ok(PipelineOutput {
        submission,
        order,
        raw_bpm,
        fused_bpm,
        grouping,
        warnings,
    })
}

/// Groups clips by the embedding of their first frame. Clips without a frame
/// or whose embedding fails stay unassigned.
pub fn group_frames(
    first_frames: &[Option<&RgbImage>],
    grouping: &GroupingConfig,
) -> Result<ClusterAssignment> {
    let embedded: Vec<(usize, ColorEmbedding)> = first_frames
        .iter()
        .enumerate()
        .filter_map(|(i, f)| embedding((*f)?, grouping.embedding).ok().map(|e| (i, e)))
        .collect();
    let embs: Vec<ColorEmbedding> = embedded.iter().map(|(_, e)| e.clone()).collect();
    let sub = group_by_dbscan(&embs, grouping.group_size, &grouping.schedule()?)?;
    // lift labels from the embedded subset back to input indices
    let mut labels = vec![None; first_frames.len()];
    for ((i, _), label) in embedded.iter().zip(&sub.labels) {
        labels[*i] = *label;
    }
    Ok(ClusterAssignment {
        labels,
        complete_groups: sub
            .complete_groups
            .iter()
            .map(|g| g.iter().map(|&k| embedded[k].0).collect())
            .collect(),
        frozen_at: sub.frozen_at,
    })
}

/// Path of the warnings sidecar written next to a submission.
pub fn warnings_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".warnings.csv");
    out.with_file_name(name)
}

pub fn format_warnings(warnings: &[ClipWarning]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "stage", "message"])
        .expect("in-memory write");
    for x in warnings {
        w.write_record([x.sample_id.as_str(), x.stage, x.message.as_str()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Reads the manifest, estimates every clip and writes the submission CSV plus
/// the `<out>.warnings.csv` sidecar.
pub fn run_pipeline(
    manifest: &Path,
    config: &PipelineConfig,
    out: &Path,
) -> Result<PipelineOutput> {
    let entries = read_manifest(manifest)?;
    let output = run_entries(&entries, config)?;
    output.submission.write(out, &output.order)?;
    let side = warnings_path(out);
    fs::write(&side, format_warnings(&output.warnings)).map_err(|e| Error::io(&side, e))?;
    Ok(output)
}
