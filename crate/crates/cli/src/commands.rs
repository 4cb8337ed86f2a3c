use std::fs;
use std::path::Path;

use anyhow::{anyhow, Result};
use rayon::prelude::*;
use rppg::evalkit::{
    evaluate, leaderboard_from_reports, render_csv, render_text, EvalReport, Submission,
};
use rppg::pipeline::{group_frames, roi_mask, run_pipeline, PipelineConfig, RoiMethod};
use rppg::postproc::{
    format_grouping_report, frequency_morph, hflip, morph_landmarks, EmbeddingMode,
};
use rppg::spectral::Estimator;
use rppg::synth::{generate_benchmark, BenchmarkSpec, Flicker};
use rppg::videoio::{read_clip, read_landmarks, read_manifest, write_clip, write_landmarks, Fps};
use rppg::Error;

use crate::{Cli, Command, EmbeddingArg, EstimatorArg, RoiArg};

impl From<RoiArg> for RoiMethod {
    fn from(r: RoiArg) -> Self {
        match r {
            RoiArg::Levelset => RoiMethod::Levelset,
            RoiArg::Landmark => RoiMethod::Landmark,
        }
    }
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Peak => Estimator::Peak,
            EstimatorArg::Ad => Estimator::Ad,
        }
    }
}

impl From<EmbeddingArg> for EmbeddingMode {
    fn from(e: EmbeddingArg) -> Self {
        match e {
            EmbeddingArg::Background => EmbeddingMode::Background,
            EmbeddingArg::Chest => EmbeddingMode::Chest,
        }
    }
}

/// Pipeline settings plus the optional `[benchmark]` table used by `synth`.
fn load_config(path: Option<&Path>) -> Result<(PipelineConfig, BenchmarkSpec)> {
    let Some(path) = path else {
        return Ok((PipelineConfig::default(), BenchmarkSpec::default()));
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| Error::Format(format!("config {}: {e}", path.display())))?;
    let bench = match table.remove("benchmark") {
        Some(v) => v
            .try_into::<BenchmarkSpec>()
            .map_err(|e| Error::Format(format!("config [benchmark]: {e}")))?,
        None => BenchmarkSpec::default(),
    };
    let rest = toml::to_string(&table).map_err(|e| Error::Format(format!("config: {e}")))?;
    Ok((PipelineConfig::from_toml(&rest)?, bench))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(Error::Parameter("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let (mut config, mut bench) = load_config(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
        bench.seed = seed;
    }

    match cli.command {
        Command::Synth {
            out,
            subjects,
            clips,
            hr_min,
            hr_max,
            noise,
            flicker_bpm,
            flicker_depth,
            width,
            height,
            fps,
            duration,
        } => {
            bench.n_subjects = subjects.unwrap_or(bench.n_subjects);
            bench.clips_per_subject = clips.unwrap_or(bench.clips_per_subject);
            bench.hr_range = (
                hr_min.unwrap_or(bench.hr_range.0),
                hr_max.unwrap_or(bench.hr_range.1),
            );
            let base = &mut bench.base;
            base.noise_sigma = noise.unwrap_or(base.noise_sigma);
            if let (Some(freq_bpm), Some(depth)) = (flicker_bpm, flicker_depth) {
                base.flicker = Some(Flicker { freq_bpm, depth });
            }
            if width.is_some() || height.is_some() {
                // keep the face ellipse centred with the default proportions
                base.width = width.unwrap_or(base.width);
                base.height = height.unwrap_or(base.height);
                let (w, h) = (base.width as f64, base.height as f64);
                base.skin_shape.cx = w / 2.0;
                base.skin_shape.cy = h / 2.0;
                base.skin_shape.ax = 0.28 * w;
                base.skin_shape.ay = 0.34 * h;
            }
            if let Some(fps) = fps {
                base.fps = Fps::integer(fps)?;
            }
            base.duration_s = duration.unwrap_or(base.duration_s);
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let entries = generate_benchmark(&bench, &out)?;
            println!(
                "wrote {} clips and {}",
                entries.len(),
                out.join("manifest.csv").display()
            );
        }
        Command::Segment {
            clip,
            landmarks,
            out,
            roi,
        } => {
            if let Some(r) = roi {
                config.roi_method = r.into();
            }
            let seq = read_clip(&clip)?;
            let track = landmarks
                .map(|p| read_landmarks(p, seq.len()))
                .transpose()?;
            let mask = roi_mask(&seq, track.as_ref(), &config, config.seed)?;
            rppg::skinseg::write_masks(&mask, &out)?;
            let invalid = (0..mask.len()).filter(|&t| !mask.is_valid(t)).count();
            println!(
                "wrote {} masks to {} ({invalid} empty)",
                mask.len(),
                out.display()
            );
        }
        Command::Estimate {
            manifest,
            out,
            roi,
            estimator,
            fuse,
            band_low,
            band_high,
            ad_table,
        } => {
            if let Some(r) = roi {
                config.roi_method = r.into();
            }
            if let Some(e) = estimator {
                config.estimator = e.into();
            }
            config.fuse = fuse.unwrap_or(config.fuse);
            config.band.low_bpm = band_low.unwrap_or(config.band.low_bpm);
            config.band.high_bpm = band_high.unwrap_or(config.band.high_bpm);
            if ad_table.is_some() {
                config.ad_table.path = ad_table;
            }
            config.validate()?;
            let output = run_pipeline(&manifest, &config, &out)?;
            for w in &output.warnings {
                eprintln!("warning: {} ({}): {}", w.sample_id, w.stage, w.message);
            }
            println!(
                "wrote {} predictions to {} ({} warnings)",
                output.order.len(),
                out.display(),
                output.warnings.len()
            );
        }
        Command::Group {
            manifest,
            out,
            embedding,
            group_size,
        } => {
            if let Some(e) = embedding {
                config.grouping.embedding = e.into();
            }
            config.grouping.group_size = group_size.unwrap_or(config.grouping.group_size);
            let entries = read_manifest(&manifest)?;
            let clips = entries
                .par_iter()
                .map(|e| read_clip(&e.path))
                .collect::<rppg::Result<Vec<_>>>()?;
            let firsts: Vec<_> = clips.iter().map(|c| Some(&c.frames()[0])).collect();
            let assignment = group_frames(&firsts, &config.grouping)?;
            let ids: Vec<String> = entries.iter().map(|e| e.record.sample_id.clone()).collect();
            write_text(&out, &format_grouping_report(&ids, &assignment)?)?;
            println!(
                "{} complete groups, {} unassigned clips",
                assignment.complete_groups.len(),
                assignment.labels.iter().filter(|l| l.is_none()).count()
            );
        }
        Command::Evaluate {
            submission,
            manifest,
            out,
        } => {
            let sub = Submission::read(&submission)?;
            let records: Vec<_> = read_manifest(&manifest)?
                .into_iter()
                .map(|e| e.record)
                .collect();
            let json = evaluate(&sub, &records)?.to_json();
            match out {
                Some(p) => write_text(&p, &json)?,
                None => println!("{json}"),
            }
        }
        Command::Leaderboard {
            reports,
            names,
            csv,
        } => {
            if !names.is_empty() && names.len() != reports.len() {
                return Err(Error::Parameter(format!(
                    "{} names for {} reports",
                    names.len(),
                    reports.len()
                ))
                .into());
            }
            let mut loaded = Vec::with_capacity(reports.len());
            for (i, path) in reports.iter().enumerate() {
                let name = match names.get(i) {
                    Some(n) => n.clone(),
                    None => path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                };
                loaded.push((name, EvalReport::read(path)?));
            }
            let rows = leaderboard_from_reports(&loaded);
            print!("{}", render_text(&rows));
            if let Some(p) = csv {
                write_text(&p, &render_csv(&rows))?;
            }
        }
        Command::Adtable {
            out,
            fps,
            trials,
            snr_min,
            snr_max,
            snr_step,
            delta,
            window,
        } => {
            let t = &mut config.ad_table;
            t.path = None;
            t.trials = trials.unwrap_or(t.trials);
            t.snr_min_db = snr_min.unwrap_or(t.snr_min_db);
            t.snr_max_db = snr_max.unwrap_or(t.snr_max_db);
            t.snr_step_db = snr_step.unwrap_or(t.snr_step_db);
            t.delta_bpm = delta.unwrap_or(t.delta_bpm);
            config.ad.window_s = window.unwrap_or(config.ad.window_s);
            let table = config.outlier_table(fps)?;
            table.write(&out)?;
            println!("wrote outlier table to {}", out.display());
        }
        Command::Morph {
            clip,
            factor,
            hr,
            out,
            landmarks,
            landmarks_out,
            flip,
        } => {
            let seq = read_clip(&clip)?;
            let mut morphed = frequency_morph(&seq, factor, hr)?;
            if flip {
                morphed.frames = hflip(&morphed.frames);
            }
            write_clip(&morphed.frames, &out)?;
            if let (Some(src), Some(dst)) = (landmarks, landmarks_out) {
                let mut track = morph_landmarks(&read_landmarks(src, seq.len())?, factor);
                if flip {
                    track = track.hflip(seq.width());
                }
                write_landmarks(&track, dst)?;
            }
            let note = if morphed.hr_in_range {
                ""
            } else {
                " (outside the plausible range)"
            };
            println!("morphed heart rate {:.2} bpm{note}", morphed.hr_bpm);
        }
    }
    Ok(())
}
