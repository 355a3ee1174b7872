use super::*;
use crate::grid::{bilinear_resize, pixelate};

fn small_cfg(seed: u64) -> WorldConfig {
    WorldConfig {
        n_train: 10,
        n_val: 4,
        n_test: 8,
        members: 2,
        ..WorldConfig::defaults(seed)
    }
}

#[test]
fn land_sea_mean_is_half() {
    let statics = gen_static_fields(&WorldConfig::defaults(7)).unwrap();
    assert!((statics.land_sea.mean() - 0.5).abs() < 0.05);
    for &v in statics.land_sea.values() {
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn orography_is_rectified() {
    let statics = gen_static_fields(&WorldConfig::defaults(7)).unwrap();
    assert!(statics.orography.values().iter().all(|&v| v >= 0.0));
    assert!(statics.orography.values().iter().any(|&v| v > 0.0));
}

#[test]
fn statics_are_deterministic() {
    let a = gen_static_fields(&WorldConfig::defaults(11)).unwrap();
    let b = gen_static_fields(&WorldConfig::defaults(11)).unwrap();
    assert_eq!(a, b);
    let c = gen_static_fields(&WorldConfig::defaults(12)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn config_invariants_enforced() {
    let mut cfg = WorldConfig::defaults(0);
    cfg.canvas = 50;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    cfg.canvas = 48;
    cfg.base = 13;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    cfg.base = 12;
    cfg.ar_rho = 1.0;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}

#[test]
fn truth_series_is_nonnegative_and_desk_scale() {
    let cfg = WorldConfig::defaults(3);
    let statics = gen_static_fields(&cfg).unwrap();
    let truths = gen_truth_series(&cfg, &statics, 30).unwrap();
    let mut max = 0.0f32;
    for t in &truths {
        assert!(!t.has_nan());
        for &v in t.values() {
            assert!(v >= 0.0);
            max = max.max(v);
        }
    }
    assert!(max < 25.0, "max wind {}", max);
    assert!(max > 3.0, "max wind {}", max);
}

#[test]
fn pre_transform_lag1_autocorrelation_matches_rho() {
    let cfg = WorldConfig::defaults(5);
    let raws = gen_raw_series(&cfg, 600);
    // average the lag-1 estimator over a grid of pixels
    let mut corrs = Vec::new();
    for pr in (0..cfg.canvas).step_by(12) {
        for pc in (0..cfg.canvas).step_by(12) {
            let series: Vec<f64> = raws.iter().map(|f| f.get(pr, pc) as f64).collect();
            let n = series.len();
            let mean = series.iter().sum::<f64>() / n as f64;
            let var: f64 = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            let cov: f64 = series
                .windows(2)
                .map(|w| (w[0] - mean) * (w[1] - mean))
                .sum::<f64>();
            corrs.push(cov / var);
        }
    }
    let avg = corrs.iter().sum::<f64>() / corrs.len() as f64;
    assert!((avg - cfg.ar_rho).abs() < 0.05, "lag-1 {}", avg);
}

#[test]
fn pre_transform_spectrum_slope_matches_beta() {
    let cfg = WorldConfig::defaults(8);
    let raws = gen_raw_series(&cfg, 20);
    let n = cfg.canvas;
    // periodogram oracle: forward FFT2 of each field, radially binned power
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut power = vec![0.0f64; n * n];
    for f in &raws {
        let mut buf: Vec<Complex<f64>> =
            f.values().iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
        for row in buf.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); n];
        for x in 0..n {
            for y in 0..n {
                col[y] = buf[y * n + x];
            }
            fft.process(&mut col);
            for y in 0..n {
                buf[y * n + x] = col[y];
            }
        }
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
    }
    // per-mode power averaged in integer-k annuli, log-log fit over [2, n/4]
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for kk in 2..=(n / 4) {
        let mut acc = 0.0f64;
        let mut cnt = 0usize;
        for ky in 0..n {
            for kx in 0..n {
                let fy = ky.min(n - ky) as f64;
                let fx = kx.min(n - kx) as f64;
                let k = (fx * fx + fy * fy).sqrt();
                if (k - kk as f64).abs() < 0.5 {
                    acc += power[ky * n + kx];
                    cnt += 1;
                }
            }
        }
        if cnt > 0 {
            xs.push((kk as f64).ln());
            ys.push((acc / cnt as f64).ln());
        }
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let slope: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + cfg.spectral_slope).abs() < 0.5, "slope {}", slope);
}

#[test]
fn error_growth_is_saturating_and_increasing() {
    let cfg = WorldConfig::defaults(0);
    assert!(error_growth(&cfg, 1e-9) < 1e-9);
    let mut prev = 0.0;
    for lead in 1..=46 {
        let g = error_growth(&cfg, lead as f64);
        assert!(g > prev);
        prev = g;
    }
    assert!(prev < cfg.err_scale);
}

#[test]
fn degrade_rejects_out_of_range_lead() {
    let cfg = WorldConfig::defaults(1);
    let statics = gen_static_fields(&cfg).unwrap();
    let truth = Field::constant(cfg.canvas, cfg.canvas, 5.0);
    assert!(matches!(
        degrade_forecast(&truth, 0.5, 0, &cfg, &statics, 9),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        degrade_forecast(&truth, 46.5, 0, &cfg, &statics, 9),
        Err(Error::Domain(_))
    ));
}

#[test]
fn members_differ_but_share_the_bias_pattern() {
    let cfg = WorldConfig::defaults(2);
    let mut unbiased = cfg;
    unbiased.bias_amplitude = 0.0;
    let statics = gen_static_fields(&cfg).unwrap();
    // keep winds far from zero so the positivity clip stays inactive and the
    // bias component subtracts out exactly
    let truth = gen_truth_series(&cfg, &statics, 1).unwrap()[0].map(|v| v + 10.0);
    let m0 = degrade_forecast(&truth, 10.0, 0, &cfg, &statics, 33).unwrap();
    let m1 = degrade_forecast(&truth, 10.0, 1, &cfg, &statics, 33).unwrap();
    assert_ne!(m0, m1);
    // subtracting the b0 = 0 variant isolates the systematic component
    let u0 = degrade_forecast(&truth, 10.0, 0, &unbiased, &statics, 33).unwrap();
    let u1 = degrade_forecast(&truth, 10.0, 1, &unbiased, &statics, 33).unwrap();
    let b0 = m0.zip(&u0, |a, b| a - b).unwrap();
    let b1 = m1.zip(&u1, |a, b| a - b).unwrap();
    let diff: f32 = b0
        .values()
        .iter()
        .zip(b1.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f32::max);
    assert!(diff < 1e-4, "bias differs by {}", diff);
}

#[test]
fn forecast_error_grows_across_bins() {
    let cfg = WorldConfig::defaults(6);
    let statics = gen_static_fields(&cfg).unwrap();
    let truths = gen_truth_series(&cfg, &statics, 200).unwrap();
    let bin_leads = [2.0, 5.0, 8.0, 11.0, 14.0];
    let mut maes = Vec::new();
    for (bi, &lead) in bin_leads.iter().enumerate() {
        let mut total = 0.0f64;
        for (day, truth) in truths.iter().enumerate() {
            let case_seed = seed::derive2(cfg.seed, 100 + bi as u64, day as u64);
            let lr = degrade_forecast(truth, lead, 0, &cfg, &statics, case_seed).unwrap();
            let up = bilinear_resize(&lr, cfg.canvas, cfg.canvas).unwrap();
            let mae: f64 = up
                .values()
                .iter()
                .zip(truth.values())
                .map(|(p, t)| (p - t).abs() as f64)
                .sum::<f64>()
                / (cfg.canvas * cfg.canvas) as f64;
            total += mae;
        }
        maes.push(total / truths.len() as f64);
    }
    for w in maes.windows(2) {
        assert!(w[1] > w[0], "bin MAEs not increasing: {:?}", maes);
    }
}

#[test]
fn truth_forecast_correlation_decays_with_lead() {
    let cfg = WorldConfig::defaults(13);
    let statics = gen_static_fields(&cfg).unwrap();
    let truths = gen_truth_series(&cfg, &statics, 100).unwrap();
    let corr_at = |lead: f64| {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (day, truth) in truths.iter().enumerate() {
            let case_seed = seed::derive2(cfg.seed, 200, day as u64);
            let lr = degrade_forecast(truth, lead, 0, &cfg, &statics, case_seed).unwrap();
            let coarse = block_coarsen(truth, cfg.base, cfg.base).unwrap();
            xs.extend(lr.values().iter().map(|&v| v as f64));
            ys.extend(coarse.values().iter().map(|&v| v as f64));
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    };
    let c1 = corr_at(1.0);
    let c30 = corr_at(30.0);
    assert!(c1 > c30, "corr lead1 {} vs lead30 {}", c1, c30);
}

#[test]
fn dataset_splits_are_disjoint_and_sized() {
    let cfg = small_cfg(17);
    let ds = build_dataset(&cfg, false).unwrap();
    let mut seen = std::collections::HashSet::new();
    for case in &ds.cases {
        assert!(seen.insert(case.init_index), "init {} duplicated", case.init_index);
        assert_eq!(case.truth.height(), cfg.canvas);
        assert_eq!(case.truth.width(), cfg.canvas);
        assert_eq!(case.members.len(), cfg.members);
        for mf in &case.members {
            assert_eq!(mf.lowres.height(), cfg.base);
            assert_eq!(mf.lowres.width(), cfg.base);
        }
        assert!((1.0..=MAX_LEAD).contains(&case.lead));
    }
    assert_eq!(ds.split_cases(Split::Train).count(), cfg.n_train);
    assert_eq!(ds.split_cases(Split::Val).count(), cfg.n_val);
    assert_eq!(ds.split_cases(Split::Test).count(), cfg.n_test);
    // test leads are integer days
    for case in ds.split_cases(Split::Test) {
        assert_eq!(case.lead.fract(), 0.0);
    }
}

#[test]
fn dataset_is_a_pure_function_of_the_seed() {
    let cfg = small_cfg(23);
    let a = build_dataset(&cfg, true).unwrap();
    let b = build_dataset(&cfg, true).unwrap();
    assert_eq!(a, b);
}

#[test]
fn dynamics_channels_present_when_requested() {
    let cfg = small_cfg(29);
    let ds = build_dataset(&cfg, true).unwrap();
    for case in &ds.cases {
        for mf in &case.members {
            let names: Vec<&str> = mf.dynamics.iter().map(|(n, _)| n.as_str()).collect();
            assert_eq!(names, DYNAMIC_CHANNELS.to_vec());
            for (_, f) in &mf.dynamics {
                assert_eq!((f.height(), f.width()), (cfg.base, cfg.base));
                assert!(!f.has_nan());
            }
        }
    }
    let plain = build_dataset(&cfg, false).unwrap();
    assert!(plain.cases[0].members[0].dynamics.is_empty());
}

#[test]
fn dataset_round_trips_through_disk() {
    let cfg = small_cfg(31);
    let ds = build_dataset(&cfg, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &ds).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), ds.cases.len() * cfg.members);
    let back = read_dataset(dir.path(), &cfg).unwrap();
    assert_eq!(back, ds);
    // byte-identical manifests on rewrite
    write_dataset(dir.path(), &back).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap(), manifest);
}

#[test]
fn pixelated_truth_has_matching_block_means() {
    // degrade then upsample stays comparable to the pixelated truth scale
    let cfg = WorldConfig::defaults(37);
    let statics = gen_static_fields(&cfg).unwrap();
    let truths = gen_truth_series(&cfg, &statics, 1).unwrap();
    let px = pixelate(&truths[0], cfg.base).unwrap();
    assert_eq!(px.height(), cfg.canvas);
    assert!((px.mean() - truths[0].mean()).abs() < 1e-3);
}
