use proptest::prelude::*;
use rppg::postproc::{background_embedding, default_eps_schedule, group_by_dbscan};
use rppg::pulse::{bandpass, chrom_project, pool_channels, Band, PulseTrace, DEFAULT_WINDOW_S};
use rppg::skinseg::{landmark_mask, RoiMask};
use rppg::spectral::{periodogram, pick_peak, Spectrum};
use rppg::synth::*;
use rppg::videoio::{encode_rvid, read_clip, read_landmarks, read_manifest, DatabaseTag, Fps};
use rppg::Error;

const PAD: usize = 4096;

fn chrom_spectrum(clip: &SynthClip, band: Band) -> rppg::Result<Spectrum> {
    let mask = landmark_mask(&clip.landmarks, clip.frames.width(), clip.frames.height())?;
    let rgb = pool_channels(&clip.frames, &mask)?;
    let pulse = bandpass(&chrom_project(&rgb, DEFAULT_WINDOW_S)?, band)?;
    periodogram(&pulse, PAD, band)
}

fn argmax_hz(spec: &Spectrum) -> f64 {
    let r = spec.inband();
    let k = r
        .clone()
        .max_by(|a, b| spec.power()[*a].total_cmp(&spec.power()[*b]))
        .unwrap();
    spec.freqs_hz()[k]
}

#[test]
fn noiseless_clip_at_72_bpm_is_recovered() {
    let clip = generate(&SynthSpec::default(), "x", DatabaseTag::A).unwrap();
    assert_eq!(clip.record.ground_truth_hr, Some(72.0));
    let est = pick_peak(&chrom_spectrum(&clip, Band::default()).unwrap()).unwrap();
    assert!((est.bpm - 72.0).abs() < 1.0, "{}", est.bpm);
}

#[test]
fn zero_amplitude_has_no_pulse() {
    let spec = SynthSpec {
        pulse_amp: 0.0,
        ..SynthSpec::default()
    };
    let clip = generate(&spec, "flat", DatabaseTag::A).unwrap();
    match chrom_spectrum(&clip, Band::default()).and_then(|s| pick_peak(&s)) {
        Err(Error::NoSignal(_)) => {}
        Ok(est) => assert!(est.snr_db < 0.0, "snr {}", est.snr_db),
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn same_seed_same_bytes() {
    let spec = SynthSpec {
        noise_sigma: 3.0,
        flicker: Some(Flicker {
            freq_bpm: 30.0,
            depth: 0.02,
        }),
        seed: 99,
        ..SynthSpec::default()
    };
    let a = generate(&spec, "a", DatabaseTag::A).unwrap();
    let b = generate(&spec, "a", DatabaseTag::A).unwrap();
    assert_eq!(
        encode_rvid(&a.frames).unwrap(),
        encode_rvid(&b.frames).unwrap()
    );
    assert_eq!(a.landmarks, b.landmarks);
    let c = generate(&SynthSpec { seed: 100, ..spec }, "a", DatabaseTag::A).unwrap();
    assert_ne!(
        encode_rvid(&a.frames).unwrap(),
        encode_rvid(&c.frames).unwrap()
    );
}

#[test]
fn invalid_specs_are_rejected() {
    let base = SynthSpec::default();
    let bad = [
        SynthSpec {
            hr_bpm: 30.0,
            ..base.clone()
        },
        SynthSpec {
            hr_bpm: 240.0,
            ..base.clone()
        },
        SynthSpec {
            pulse_amp: -1.0,
            ..base.clone()
        },
        SynthSpec {
            skin_shape: Ellipse {
                cx: 10.0,
                ..base.skin_shape
            },
            ..base.clone()
        },
        SynthSpec {
            skin_color: [256.0, 0.0, 0.0],
            ..base.clone()
        },
        SynthSpec {
            flicker: Some(Flicker {
                freq_bpm: 30.0,
                depth: 1.0,
            }),
            ..base.clone()
        },
    ];
    for s in &bad {
        assert!(
            matches!(generate(s, "bad", DatabaseTag::A), Err(Error::Invariant(_))),
            "{s:?}"
        );
    }
}

#[test]
fn landmarks_sit_on_the_ellipse() {
    let spec = SynthSpec::default();
    let clip = generate(&spec, "lm", DatabaseTag::B).unwrap();
    assert_eq!(clip.landmarks.frame_count(), clip.frames.len());
    let e = spec.skin_shape;
    for p in clip.landmarks.frame(0).iter() {
        assert!(p[0] >= 0.0 && p[0] <= 64.0 && p[1] >= 0.0 && p[1] <= 64.0);
        let r = ((p[0] - e.cx) / e.ax).powi(2) + ((p[1] - e.cy) / e.ay).powi(2);
        assert!(r <= 1.0 + 1e-9, "{p:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pooled_skin_signal_peaks_at_the_planted_rate(hr in 50.0f64..170.0, fps in prop::sample::select(vec![20u32, 25, 30])) {
        let spec = SynthSpec { hr_bpm: hr, fps: Fps::integer(fps).unwrap(), ..SynthSpec::default() };
        let clip = generate(&spec, "tone", DatabaseTag::A).unwrap();
        let mask = RoiMask::repeated(64, 64, clip.skin_mask.clone(), clip.frames.len()).unwrap();
        let green = pool_channels(&clip.frames, &mask).unwrap().green_pulse().unwrap();
        let spec = periodogram(&green, PAD, Band::new(30.0, 239.0).unwrap()).unwrap();
        prop_assert!((argmax_hz(&spec) - hr / 60.0).abs() <= fps as f64 / PAD as f64, "{} vs {}", argmax_hz(&spec) * 60.0, hr);
    }
}

#[test]
fn chrom_ignores_flicker_that_dominates_green() {
    let spec = SynthSpec {
        hr_bpm: 72.0,
        flicker: Some(Flicker {
            freq_bpm: 120.0,
            depth: 0.05,
        }),
        ..SynthSpec::default()
    };
    let clip = generate(&spec, "flick", DatabaseTag::A).unwrap();
    let band = Band::default();
    let mask = landmark_mask(&clip.landmarks, 64, 64).unwrap();
    let green: PulseTrace = bandpass(
        &pool_channels(&clip.frames, &mask)
            .unwrap()
            .green_pulse()
            .unwrap(),
        band,
    )
    .unwrap();
    let g = pick_peak(&periodogram(&green, PAD, band).unwrap()).unwrap();
    assert!((g.bpm - 120.0).abs() < 1.0, "green {}", g.bpm);
    let c = pick_peak(&chrom_spectrum(&clip, band).unwrap()).unwrap();
    assert!((c.bpm - 72.0).abs() < 1.0, "chrom {}", c.bpm);
}

#[test]
fn two_subject_benchmark_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let spec = BenchmarkSpec {
        n_subjects: 2,
        seed: 3,
        ..BenchmarkSpec::default()
    };
    let entries = generate_benchmark(&spec, dir.path()).unwrap();
    assert_eq!(entries.len(), 10);
    assert_eq!(
        std::fs::read_dir(dir.path().join("clips")).unwrap().count(),
        10
    );
    assert_eq!(
        std::fs::read_dir(dir.path().join("landmarks"))
            .unwrap()
            .count(),
        10
    );
    let manifest = read_manifest(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest, entries);

    // one heart rate per subject, shared by its clips up to the jitter
    let hrs: Vec<f64> = manifest
        .iter()
        .map(|e| e.record.ground_truth_hr.unwrap())
        .collect();
    for s in 0..2 {
        let own = &hrs[5 * s..5 * s + 5];
        let spread = own.iter().cloned().fold(f64::MIN, f64::max)
            - own.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 2.0 * CLIP_HR_JITTER, "{own:?}");
        assert!(own.iter().all(|h| *h > 49.0 && *h < 134.0));
        let tag = if s == 0 {
            DatabaseTag::A
        } else {
            DatabaseTag::B
        };
        assert!(manifest[5 * s..5 * s + 5]
            .iter()
            .all(|e| e.record.database_tag == tag));
    }
    let mean = |s: usize| hrs[5 * s..5 * s + 5].iter().sum::<f64>() / 5.0;
    assert!((mean(0) - mean(1)).abs() > 2.0 * CLIP_HR_JITTER, "{hrs:?}");

    // parallel writing matches serial generation
    let planned = plan_benchmark(&spec).unwrap();
    for (p, e) in planned.iter().zip(&manifest) {
        let clip = generate(&p.spec, &p.sample_id, p.tag).unwrap();
        assert_eq!(read_clip(&e.path).unwrap(), clip.frames);
        let lm = read_landmarks(e.landmarks_path.as_ref().unwrap(), clip.frames.len()).unwrap();
        assert_eq!(lm, clip.landmarks);
    }
    let again = tempfile::tempdir().unwrap();
    generate_benchmark(&spec, again.path()).unwrap();
    for name in ["clips/s001_c3.rvid", "landmarks/s000_c0.csv"] {
        let a = std::fs::read(dir.path().join(name)).unwrap();
        let b = std::fs::read(again.path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn benchmark_backgrounds_group_by_subject() {
    let spec = BenchmarkSpec {
        seed: 17,
        base: SynthSpec {
            duration_s: 1.0,
            ..SynthSpec::default()
        },
        ..BenchmarkSpec::default()
    };
    let planned = plan_benchmark(&spec).unwrap();
    let embs: Vec<_> = planned
        .iter()
        .map(|p| {
            background_embedding(
                &generate(&p.spec, &p.sample_id, p.tag)
                    .unwrap()
                    .frames
                    .frames()[0],
            )
            .unwrap()
        })
        .collect();
    let a = group_by_dbscan(&embs, 5, &default_eps_schedule()).unwrap();
    assert_eq!(a.complete_groups.len(), spec.n_subjects);
    for (i, p) in planned.iter().enumerate() {
        let label = a.labels[i].expect("every clip grouped");
        for (j, q) in planned.iter().enumerate() {
            assert_eq!(a.labels[j] == Some(label), p.subject == q.subject);
        }
    }
}

#[test]
fn bad_benchmark_specs_are_rejected() {
    for spec in [
        BenchmarkSpec {
            n_subjects: 0,
            ..BenchmarkSpec::default()
        },
        BenchmarkSpec {
            clips_per_subject: 0,
            ..BenchmarkSpec::default()
        },
        BenchmarkSpec {
            hr_range: (90.0, 80.0),
            ..BenchmarkSpec::default()
        },
    ] {
        assert!(matches!(plan_benchmark(&spec), Err(Error::Parameter(_))));
    }
}

/// Hartigan's dip: the sup distance from the empirical CDF to the nearest
/// unimodal CDF. For a candidate error `e` and mode at the `m`-th distinct
/// value, a unimodal fit exists iff some value `v` at the mode admits a
/// convex nondecreasing piece on the left and a concave one on the right,
/// both inside the band `F(z) - e <= G(z) <= F(z-) + e`.
fn dip_statistic(sample: &[f64]) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut z: Vec<f64> = Vec::new();
    let mut cum: Vec<f64> = Vec::new();
    for (i, v) in x.iter().enumerate() {
        if z.last() == Some(v) {
            *cum.last_mut().unwrap() = (i + 1) as f64 / n;
        } else {
            z.push(*v);
            cum.push((i + 1) as f64 / n);
        }
    }
    let k = z.len();
    let below: Vec<f64> = (0..k)
        .map(|j| if j == 0 { 0.0 } else { cum[j - 1] })
        .collect();
    let floor = (0..k)
        .map(|j| (cum[j] - below[j]) / 2.0)
        .fold(0.0, f64::max);

    // Lower hull (`upper == false`) or upper hull of (z_j, y_j), evaluated at every z_j.
    let hull = |idx: &[usize], y: &[f64], upper: bool| -> Vec<f64> {
        let mut st: Vec<usize> = Vec::new();
        for i in 0..idx.len() {
            while st.len() >= 2 {
                let (a, b) = (st[st.len() - 2], st[st.len() - 1]);
                let cross = (z[idx[b]] - z[idx[a]]) * (y[i] - y[a])
                    - (y[b] - y[a]) * (z[idx[i]] - z[idx[a]]);
                if (upper && cross >= 0.0) || (!upper && cross <= 0.0) {
                    st.pop();
                } else {
                    break;
                }
            }
            st.push(i);
        }
        let mut out = vec![0.0; idx.len()];
        for w in st.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (i, o) in out.iter_mut().enumerate().take(b + 1).skip(a) {
                let t = (z[idx[i]] - z[idx[a]]) / (z[idx[b]] - z[idx[a]]);
                *o = y[a] + t * (y[b] - y[a]);
            }
        }
        if st.len() == 1 {
            out[0] = y[0];
        }
        out
    };
    let tol = 1e-13;
    let left_ok = |e: f64, m: usize, v: f64| {
        let idx: Vec<usize> = (0..=m).collect();
        let y: Vec<f64> = idx
            .iter()
            .map(|&j| if j == m { v } else { (below[j] + e).min(v) })
            .collect();
        let h = hull(&idx, &y, false);
        (0..m).all(|j| h[j] >= cum[j] - e - tol)
    };
    let right_ok = |e: f64, m: usize, v: f64| {
        let idx: Vec<usize> = (m..k).collect();
        let y: Vec<f64> = idx
            .iter()
            .map(|&j| if j == m { v } else { (cum[j] - e).max(v) })
            .collect();
        let h = hull(&idx, &y, true);
        (1..idx.len()).all(|i| h[i] <= below[idx[i]] + e + tol)
    };
    let feasible = |e: f64| {
        (0..k).any(|m| {
            let (lo, hi) = (cum[m] - e, below[m] + e);
            if lo > hi + tol || !left_ok(e, m, hi) {
                return false;
            }
            let (mut a, mut b) = (lo, hi);
            if !left_ok(e, m, a) {
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if left_ok(e, m, mid) {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                a = b;
            }
            right_ok(e, m, a)
        })
    };
    if feasible(floor) {
        return floor;
    }
    let (mut lo, mut hi) = (floor, 1.0);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn dip_matches_reference_values() {
    let unimodal = [
        -0.802, -1.324, -0.248, 0.42, 1.136, 0.11, -0.553, -0.785, 0.749, 1.635, 0.273, -1.233,
        -0.958, 1.6, 0.203,
    ];
    let bimodal = [
        -2.866, -2.042, -2.582, -2.315, -2.244, -2.357, -1.723, -2.032, 1.705, 2.205, 2.415, 1.178,
        1.872, 1.51, 1.913, 1.355,
    ];
    let skewed = [
        0.001, 2.148, 0.929, 0.305, 0.696, 1.307, 0.517, 0.432, 1.081, 1.474, 0.365, 0.376, 0.307,
        2.117, 1.338, 0.012, 0.567, 0.093, 1.248, 1.013, 0.781, 0.599, 1.416, 0.324, 0.404,
    ];
    // reference values from an independent implementation of the dip
    for (xs, want) in [
        (&unimodal[..], 0.07896327289632729),
        (&bimodal[..], 0.1752658289028516),
        (&skewed[..], 0.048342857142857146),
    ] {
        let got = dip_statistic(xs);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    let even: Vec<f64> = (1..=10).map(f64::from).collect();
    assert!((dip_statistic(&even) - 0.05).abs() < 1e-12);
}

#[test]
fn subject_heart_rates_are_unimodal_inside_the_range() {
    // 95% quantile of the dip of 200 uniform draws (40 000 Monte Carlo replicates)
    const DIP_CRITICAL_N200: f64 = 0.03676;
    let spec = BenchmarkSpec {
        n_subjects: 200,
        clips_per_subject: 1,
        seed: 2024,
        ..BenchmarkSpec::default()
    };
    let hrs: Vec<f64> = plan_benchmark(&spec)
        .unwrap()
        .iter()
        .map(|p| p.spec.hr_bpm)
        .collect();
    assert_eq!(hrs.len(), 200);
    assert!(hrs.iter().all(|h| *h > 49.0 && *h < 134.0));
    let dip = dip_statistic(&hrs);
    assert!(dip < DIP_CRITICAL_N200, "dip {dip}");
    let mean = hrs.iter().sum::<f64>() / 200.0;
    assert!((mean - SUBJECT_HR_MEAN).abs() < 4.0, "mean {mean}");
}
