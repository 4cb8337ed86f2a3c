use rppg::evalkit::{evaluate, Submission};
use rppg::pipeline::*;
use rppg::spectral::Estimator;
use rppg::synth::{generate_benchmark, BenchmarkSpec, SynthSpec};
use rppg::videoio::{read_manifest, write_clip, write_manifest, Fps, FrameSequence, RgbImage};
use rppg::Error;

#[test]
fn config_toml_round_trip() {
    let cfg = PipelineConfig {
        roi_method: RoiMethod::Landmark,
        estimator: Estimator::Ad,
        seed: 12,
        fuse: false,
        ..PipelineConfig::default()
    };
    let text = cfg.to_toml().unwrap();
    assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    assert_eq!(
        PipelineConfig::from_toml("").unwrap(),
        PipelineConfig::default()
    );
    let partial = PipelineConfig::from_toml(
        "roi_method = \"landmark\"\n[band]\nlow_bpm = 50.0\nhigh_bpm = 150.0\n",
    )
    .unwrap();
    assert_eq!(partial.roi_method, RoiMethod::Landmark);
    assert_eq!(partial.band.low_bpm, 50.0);
}

#[test]
fn bad_configs_are_rejected() {
    for text in [
        "pad_to = 1000",
        "chrom_window_s = 0.0",
        "[band]\nlow_bpm = 150.0\nhigh_bpm = 50.0",
        "[grouping]\ngroup_size = 4",
        "[grouping]\neps_min = 0.5\neps_max = 0.1",
    ] {
        assert!(
            matches!(PipelineConfig::from_toml(text), Err(Error::Parameter(_))),
            "{text}"
        );
    }
    assert!(matches!(
        PipelineConfig::from_toml("roi_method = \"magic\""),
        Err(Error::Format(_))
    ));
}

fn small_benchmark(dir: &std::path::Path) -> Vec<rppg::videoio::ManifestEntry> {
    let spec = BenchmarkSpec {
        n_subjects: 4,
        seed: 5,
        ..BenchmarkSpec::default()
    };
    generate_benchmark(&spec, dir).unwrap()
}

#[test]
fn noiseless_benchmark_is_estimated_and_grouped() {
    let dir = tempfile::tempdir().unwrap();
    let entries = small_benchmark(dir.path());
    for roi in [RoiMethod::Landmark, RoiMethod::Levelset] {
        let cfg = PipelineConfig {
            roi_method: roi,
            ..PipelineConfig::default()
        };
        let out = run_entries(&entries, &cfg).unwrap();
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        let records: Vec<_> = entries.iter().map(|e| e.record.clone()).collect();
        let report = evaluate(&out.submission, &records).unwrap();
        assert!(
            report.overall.mae < 1.0,
            "{roi:?}: mae {}",
            report.overall.mae
        );
        let grouping = out.grouping.unwrap();
        assert_eq!(grouping.complete_groups.len(), 4);
        for g in &grouping.complete_groups {
            let subject = &entries[g[0]].record.sample_id[..4];
            assert!(g
                .iter()
                .all(|&i| &entries[i].record.sample_id[..4] == subject));
        }
    }
}

#[test]
fn pipeline_writes_submission_and_sidecar_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    small_benchmark(dir.path());
    let manifest = dir.path().join("manifest.csv");
    let cfg = PipelineConfig {
        roi_method: RoiMethod::Landmark,
        ..PipelineConfig::default()
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = run_pipeline(&manifest, &cfg, &a).unwrap();
    run_pipeline(&manifest, &cfg, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let sub = Submission::read(&a).unwrap();
    assert_eq!(sub, out.submission);
    let side = std::fs::read_to_string(warnings_path(&a)).unwrap();
    assert_eq!(side, "sample_id,stage,message\n");
    let text = std::fs::read_to_string(&a).unwrap();
    let ids: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        ids,
        out.order.iter().map(String::as_str).collect::<Vec<_>>()
    );
}

#[test]
fn broken_clip_falls_back_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = small_benchmark(dir.path());
    // two frames are too short for any estimate
    let short = FrameSequence::new(
        Fps::integer(25).unwrap(),
        vec![RgbImage::filled(64, 64, [90, 90, 90]); 2],
    )
    .unwrap();
    write_clip(&short, &entries[0].path).unwrap();
    entries[0].landmarks_path = None;
    let manifest = dir.path().join("manifest.csv");
    write_manifest(&entries, &manifest).unwrap();
    let cfg = PipelineConfig {
        roi_method: RoiMethod::Levelset,
        fuse: false,
        ..PipelineConfig::default()
    };
    let out_path = dir.path().join("sub.csv");
    let out = run_pipeline(&manifest, &cfg, &out_path).unwrap();
    assert_eq!(out.warnings.len(), 1);
    assert_eq!(out.warnings[0].sample_id, entries[0].record.sample_id);
    assert_eq!(out.raw_bpm[0], cfg.band.midpoint());
    let side = std::fs::read_to_string(warnings_path(&out_path)).unwrap();
    assert_eq!(side.lines().count(), 2);
    assert_eq!(read_manifest(&manifest).unwrap().len(), 20);

    // a missing file is an I/O failure, not a warning
    std::fs::remove_file(&entries[1].path).unwrap();
    let err = run_pipeline(&manifest, &cfg, &out_path).unwrap_err();
    assert!(err.is_io(), "{err}");
}

#[test]
fn ad_estimator_runs_on_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let spec = BenchmarkSpec {
        n_subjects: 1,
        seed: 8,
        base: SynthSpec {
            noise_sigma: 1.0,
            ..SynthSpec::default()
        },
        ..BenchmarkSpec::default()
    };
    let entries = generate_benchmark(&spec, dir.path()).unwrap();
    let cfg = PipelineConfig {
        roi_method: RoiMethod::Landmark,
        estimator: Estimator::Ad,
        fuse: false,
        ad_table: AdTableConfig {
            trials: 1000,
            snr_step_db: 5.0,
            ..AdTableConfig::default()
        },
        ..PipelineConfig::default()
    };
    let out = run_entries(&entries, &cfg).unwrap();
    assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    for (e, bpm) in entries.iter().zip(&out.raw_bpm) {
        assert!(
            (bpm - e.record.ground_truth_hr.unwrap()).abs() < 3.0,
            "{bpm}"
        );
    }
}
