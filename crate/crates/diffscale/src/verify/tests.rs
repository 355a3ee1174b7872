use super::*;
use crate::grid::enumerate_factors;
use crate::scorenet::Condition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bins_cover_every_lead_day_exactly_once() {
    let bins = BinScheme::default();
    let expect = |d: usize| match d {
        1..=3 => 0,
        4..=6 => 1,
        7..=9 => 2,
        10..=12 => 3,
        13..=15 => 4,
        16..=46 => 5,
        _ => unreachable!(),
    };
    for d in 1..=46 {
        assert_eq!(bins.assign_bin(d).unwrap(), expect(d), "day {}", d);
    }
    assert!(matches!(bins.assign_bin(0), Err(Error::Domain(_))));
    assert!(matches!(bins.assign_bin(47), Err(Error::Domain(_))));
    assert_eq!(bins.label(0), "1-3");
    assert_eq!(bins.label(5), "16-46");
}

#[test]
fn crps_hand_values() {
    // two members at 0 and 1: term2 = 1/(2*4) * 2 = 0.25
    let v = crps_ensemble(&[0.0, 1.0], 0.5).unwrap();
    assert!((v - 0.25).abs() < 1e-15);
    let v = crps_ensemble(&[1.0, 0.0], 2.0).unwrap();
    assert!((v - 1.25).abs() < 1e-15);
    // one member degenerates to absolute error
    let v = crps_ensemble(&[3.0], 1.0).unwrap();
    assert!((v - 2.0).abs() < 1e-15);
    assert!(matches!(crps_ensemble(&[], 0.0), Err(Error::Usage(_))));
}

/// Independent oracle: CRPS = integral of (F(x) - H(x - y))^2 dx with F the
/// empirical step CDF. The integrand is piecewise constant between the sorted
/// breakpoints (members plus the observation), so the integral is exact.
fn crps_cdf_integral(members: &[f64], obs: f64) -> f64 {
    let k = members.len() as f64;
    let mut brk = members.to_vec();
    brk.push(obs);
    brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    for w in brk.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let f = members.iter().filter(|&&m| m <= mid).count() as f64 / k;
        let h = if mid >= obs { 1.0 } else { 0.0 };
        total += (f - h) * (f - h) * (hi - lo);
    }
    total
}

#[test]
fn crps_matches_the_cdf_integral_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let k = rng.gen_range(1..=8);
        let members: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let obs = rng.gen_range(-3.0..3.0);
        let fast = crps_ensemble(&members, obs).unwrap();
        let slow = crps_cdf_integral(&members, obs);
        assert!((fast - slow).abs() < 1e-10, "case {}: {} vs {}", case, fast, slow);
    }
}

#[test]
fn crpss_algebra() {
    assert!((crpss(0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(crpss(0.7, 0.7), Some(0.0));
    assert_eq!(crpss(0.5, 0.0), None);
    assert_eq!(crpss(0.5, -1.0), None);
    // worse than reference goes negative
    assert!(crpss(2.0, 1.0).unwrap() < 0.0);
}

#[test]
fn climatology_crps_matches_the_ensemble_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let truths: Vec<Field> = (0..9)
        .map(|_| Field::new(3, 4, (0..12).map(|_| rng.gen_range(0.0..10.0f32)).collect()).unwrap())
        .collect();
    let clim = build_climatology(&truths).unwrap();
    for pix in 0..12 {
        let members: Vec<f64> = truths.iter().map(|t| t.values()[pix] as f64).collect();
        for _ in 0..5 {
            let obs = rng.gen_range(-2.0..12.0);
            let fast = clim.crps_at(pix, obs);
            let direct = crps_ensemble(&members, obs).unwrap();
            assert!((fast - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn climatology_mean_and_degenerate_cases() {
    let truths = vec![
        Field::new(1, 2, vec![1.0, 4.0]).unwrap(),
        Field::new(1, 2, vec![3.0, 4.0]).unwrap(),
    ];
    let clim = build_climatology(&truths).unwrap();
    assert!((clim.mean_at(0) - 2.0).abs() < 1e-12);
    assert!((clim.mean_at(1) - 4.0).abs() < 1e-12);
    // pixel 1 is constant: CRPS against the shared value is zero, against a
    // shifted value it is the absolute error
    assert!(clim.crps_at(1, 4.0).abs() < 1e-12);
    assert!((clim.crps_at(1, 6.0) - 2.0).abs() < 1e-12);
    assert!(matches!(
        build_climatology(&truths[..1]),
        Err(Error::Usage(_))
    ));
    let odd = vec![Field::zeros(1, 2), Field::zeros(2, 2)];
    assert!(matches!(build_climatology(&odd), Err(Error::Dimension(_))));
}

#[test]
fn spatial_mean_skips_missing_pixels() {
    let m = MapGrid { height: 1, width: 3, values: vec![1.0, f64::NAN, 3.0] };
    assert!((m.spatial_mean().unwrap() - 2.0).abs() < 1e-15);
    let all_nan = MapGrid::filled(2, 2, f64::NAN);
    assert_eq!(all_nan.spatial_mean(), None);
}

/// Complete brute-force scenario on a 1x2 grid: two cases in one bin, K=2
/// model members, a 3-truth climatology, everything recomputed with direct
/// loops and compared to 1e-12.
#[test]
fn tiny_scenario_matches_brute_force() {
    let bins = BinScheme::default();
    let (h, w) = (1usize, 2usize);
    let truths_f = [
        vec![2.0f64, 5.0],
        vec![3.0, 4.0],
    ];
    let lead_days = vec![2usize, 3];
    // model: [case][member][pixel]
    let model = vec![
        vec![vec![1.5, 5.5], vec![2.5, 4.5]],
        vec![vec![3.5, 3.0], vec![2.0, 4.0]],
    ];
    let clim_truths = vec![
        Field::new(1, 2, vec![1.0, 3.0]).unwrap(),
        Field::new(1, 2, vec![2.0, 5.0]).unwrap(),
        Field::new(1, 2, vec![6.0, 4.0]).unwrap(),
    ];
    let clim = build_climatology(&clim_truths).unwrap();
    let truth_vecs: Vec<Vec<f64>> = truths_f.iter().cloned().collect();
    let (_, _, clim_crps) = eval_method(
        h * w, Method::Climatology, &lead_days, &truth_vecs,
        &Source::Clim(&clim), &clim.mean, None, &bins, h, w,
    )
    .unwrap();
    let src = Source::Explicit(ExplicitEnsembles { cases: model.clone() });
    let (cells, maps, _) = eval_method(
        h * w, Method::Model, &lead_days, &truth_vecs, &src, &clim.mean,
        Some(&clim_crps), &bins, h, w,
    )
    .unwrap();
    let report = MetricReport { cells, maps };
    let res = h * w;
    // both cases fall in bin 0
    let ens_mean = |case: usize, pix: usize| -> f64 {
        model[case].iter().map(|m| m[pix]).sum::<f64>() / model[case].len() as f64
    };
    let clim_mean_pix = |pix: usize| -> f64 {
        clim_truths.iter().map(|t| t.values()[pix] as f64).sum::<f64>() / 3.0
    };
    let mut exp_bias = [0.0f64; 2];
    let mut exp_mae = [0.0f64; 2];
    let mut exp_mse = [0.0f64; 2];
    let mut exp_crps = [0.0f64; 2];
    let mut exp_clim_crps = [0.0f64; 2];
    for pix in 0..2 {
        for case in 0..2 {
            let e = ens_mean(case, pix) - truths_f[case][pix];
            exp_bias[pix] += e / 2.0;
            exp_mae[pix] += e.abs() / 2.0;
            exp_mse[pix] += e * e / 2.0;
            let members: Vec<f64> = model[case].iter().map(|m| m[pix]).collect();
            exp_crps[pix] += crps_cdf_integral(&members, truths_f[case][pix]) / 2.0;
            let cm: Vec<f64> = clim_truths.iter().map(|t| t.values()[pix] as f64).collect();
            exp_clim_crps[pix] += crps_cdf_integral(&cm, truths_f[case][pix]) / 2.0;
        }
    }
    let check_map = |metric: Metric, expect: &[f64; 2]| {
        let m = report.map(res, 0, Method::Model, metric).unwrap();
        for pix in 0..2 {
            assert!((m.values[pix] - expect[pix]).abs() < 1e-12, "{:?} pix {}", metric, pix);
        }
    };
    check_map(Metric::Bias, &exp_bias);
    check_map(Metric::Mae, &exp_mae);
    check_map(Metric::Mse, &exp_mse);
    check_map(Metric::Rmse, &[exp_mse[0].sqrt(), exp_mse[1].sqrt()]);
    check_map(Metric::Crps, &exp_crps);
    let exp_crpss = [
        1.0 - exp_crps[0] / exp_clim_crps[0],
        1.0 - exp_crps[1] / exp_clim_crps[1],
    ];
    check_map(Metric::Crpss, &exp_crpss);
    // ACC: per-pixel Pearson over the two cases' anomalies
    let acc_map = report.map(res, 0, Method::Model, Metric::Acc).unwrap();
    for pix in 0..2 {
        let xs: Vec<f64> = (0..2).map(|c| ens_mean(c, pix) - clim_mean_pix(pix)).collect();
        let ys: Vec<f64> = (0..2).map(|c| truths_f[c][pix] - clim_mean_pix(pix)).collect();
        let mx = (xs[0] + xs[1]) / 2.0;
        let my = (ys[0] + ys[1]) / 2.0;
        let cov = (xs[0] - mx) * (ys[0] - my) + (xs[1] - mx) * (ys[1] - my);
        let vx = (xs[0] - mx).powi(2) + (xs[1] - mx).powi(2);
        let vy = (ys[0] - my).powi(2) + (ys[1] - my).powi(2);
        let expect = cov / (vx * vy).sqrt();
        assert!((acc_map.values[pix] - expect).abs() < 1e-12);
    }
    // scalar cells are spatial means of the maps
    for metric in [Metric::Bias, Metric::Mae, Metric::Mse, Metric::Crps] {
        let cell = report.value(res, 0, Method::Model, metric).unwrap();
        let map = report.map(res, 0, Method::Model, metric).unwrap();
        let mean = (map.values[0] + map.values[1]) / 2.0;
        assert!((cell - mean).abs() < 1e-12);
    }
    // empty bins report NA cells and no maps
    for bin in 1..bins.len() {
        for metric in METRICS {
            assert_eq!(report.value(res, bin, Method::Model, metric), None);
            assert!(report.map(res, bin, Method::Model, metric).is_none());
        }
    }
}

#[test]
fn rmse_squared_equals_mse_per_pixel() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let bins = BinScheme::default();
    let truths: Vec<Vec<f64>> =
        (0..4).map(|_| (0..6).map(|_| rng.gen_range(0.0..8.0)).collect()).collect();
    let lead_days = vec![1, 2, 5, 14];
    let cases: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|_| (0..3).map(|_| (0..6).map(|_| rng.gen_range(0.0..8.0)).collect()).collect())
        .collect();
    let clim_fields: Vec<Field> = (0..5)
        .map(|_| Field::new(2, 3, (0..6).map(|_| rng.gen_range(0.0..8.0f32)).collect()).unwrap())
        .collect();
    let clim = build_climatology(&clim_fields).unwrap();
    let src = Source::Explicit(ExplicitEnsembles { cases });
    let (_, maps, _) = eval_method(
        6, Method::Model, &lead_days, &truths, &src, &clim.mean, None, &bins, 2, 3,
    )
    .unwrap();
    let report = MetricReport { cells: vec![], maps };
    for bin in [0, 1, 4] {
        let mse = report.map(6, bin, Method::Model, Metric::Mse);
        let rmse = report.map(6, bin, Method::Model, Metric::Rmse);
        match (mse, rmse) {
            (Some(mse), Some(rmse)) => {
                for (m, r) in mse.values.iter().zip(&rmse.values) {
                    assert!((r * r - m).abs() < 1e-12);
                }
            }
            (None, None) => {}
            _ => panic!("mse/rmse presence disagrees in bin {}", bin),
        }
    }
}

#[test]
fn member_and_case_order_do_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let bins = BinScheme::default();
    let n_pix = 4;
    let truths: Vec<Vec<f64>> =
        (0..3).map(|_| (0..n_pix).map(|_| rng.gen_range(0.0..5.0)).collect()).collect();
    let lead_days = vec![2, 2, 3];
    let cases: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|_| {
            (0..4).map(|_| (0..n_pix).map(|_| rng.gen_range(0.0..5.0)).collect()).collect()
        })
        .collect();
    let clim_fields: Vec<Field> = (0..4)
        .map(|_| Field::new(2, 2, (0..4).map(|_| rng.gen_range(0.0..5.0f32)).collect()).unwrap())
        .collect();
    let clim = build_climatology(&clim_fields).unwrap();
    let run = |cases: Vec<Vec<Vec<f64>>>, truths: Vec<Vec<f64>>, leads: Vec<usize>| {
        let src = Source::Explicit(ExplicitEnsembles { cases });
        let (cells, maps, _) = eval_method(
            4, Method::Model, &leads, &truths, &src, &clim.mean, None, &bins, 2, 2,
        )
        .unwrap();
        (cells, maps)
    };
    // permuted inputs change only the floating-point summation order
    let close = |a: &(Vec<MetricCell>, Vec<MetricMapEntry>),
                 b: &(Vec<MetricCell>, Vec<MetricMapEntry>)| {
        assert_eq!(a.0.len(), b.0.len());
        for (x, y) in a.0.iter().zip(&b.0) {
            match (x.value, y.value) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
                (None, None) => {}
                _ => panic!("cell presence disagrees"),
            }
        }
        assert_eq!(a.1.len(), b.1.len());
        for (x, y) in a.1.iter().zip(&b.1) {
            for (u, v) in x.map.values.iter().zip(&y.map.values) {
                assert!((u - v).abs() < 1e-12 || (u.is_nan() && v.is_nan()));
            }
        }
    };
    let base = run(cases.clone(), truths.clone(), lead_days.clone());
    // reverse member order within every case
    let mut shuffled = cases.clone();
    for c in shuffled.iter_mut() {
        c.reverse();
    }
    let by_members = run(shuffled, truths.clone(), lead_days.clone());
    close(&base, &by_members);
    // swap the two cases sharing a bin
    let swapped_cases = vec![cases[1].clone(), cases[0].clone(), cases[2].clone()];
    let swapped_truths = vec![truths[1].clone(), truths[0].clone(), truths[2].clone()];
    let by_cases = run(swapped_cases, swapped_truths, lead_days);
    close(&base, &by_cases);
}

#[test]
fn single_case_bins_and_flat_pixels_leave_acc_missing() {
    let bins = BinScheme::default();
    // pixel 1 truth is constant across the bin's cases: zero variance
    let truths = vec![vec![1.0, 7.0], vec![2.0, 7.0], vec![5.0, 3.0]];
    let lead_days = vec![1, 2, 30];
    let cases = vec![
        vec![vec![1.2, 6.0]],
        vec![vec![2.2, 8.0]],
        vec![vec![4.0, 3.5]],
    ];
    let clim_fields =
        vec![Field::new(1, 2, vec![2.0, 5.0]).unwrap(), Field::new(1, 2, vec![4.0, 6.0]).unwrap()];
    let clim = build_climatology(&clim_fields).unwrap();
    let src = Source::Explicit(ExplicitEnsembles { cases });
    let (cells, maps, _) = eval_method(
        2, Method::Model, &lead_days, &truths, &src, &clim.mean, None, &bins, 1, 2,
    )
    .unwrap();
    let report = MetricReport { cells, maps };
    let acc = report.map(2, 0, Method::Model, Metric::Acc).unwrap();
    assert!(acc.values[0].is_finite());
    assert!(acc.values[1].is_nan());
    // bin 5 holds one case: no ACC at all, other metrics present
    assert_eq!(report.value(2, 5, Method::Model, Metric::Acc), None);
    assert!(report.map(2, 5, Method::Model, Metric::Acc).is_none());
    assert!(report.value(2, 5, Method::Model, Metric::Mae).is_some());
}

fn toy_cases(rng: &mut ChaCha8Rng, n: usize, canvas: usize, base: usize, leads: &[usize]) -> Vec<EvalCase> {
    (0..n)
        .map(|i| EvalCase {
            lead_day: leads[i],
            truth: Field::new(
                canvas,
                canvas,
                (0..canvas * canvas).map(|_| rng.gen_range(0.0..10.0f32)).collect(),
            )
            .unwrap(),
            baseline_members: (0..2)
                .map(|_| {
                    Field::new(
                        base,
                        base,
                        (0..base * base).map(|_| rng.gen_range(0.0..10.0f32)).collect(),
                    )
                    .unwrap()
                })
                .collect(),
        })
        .collect()
}

fn toy_model(
    rng: &mut ChaCha8Rng,
    cases: &[EvalCase],
    factors: &FactorSet,
) -> Vec<EnsembleForecast> {
    let s = factors.canvas_size;
    let mut out = Vec::new();
    for case in cases {
        for entry in &factors.entries {
            out.push(EnsembleForecast {
                members: (0..2)
                    .map(|_| {
                        Field::new(
                            s,
                            s,
                            (0..s * s).map(|_| rng.gen_range(0.0..10.0f32)).collect(),
                        )
                        .unwrap()
                    })
                    .collect(),
                condition: Condition {
                    alpha: entry.alpha,
                    lead: case.lead_day as f64,
                    lowres_ws: None,
                    priors: Vec::new(),
                    is_null: false,
                },
                score_evals: 0,
            });
        }
    }
    out
}

#[test]
fn full_run_report_shape_and_climatology_skill_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let factors = enumerate_factors(3, 12).unwrap();
    let bins = BinScheme::default();
    let cases = toy_cases(&mut rng, 4, 12, 3, &[1, 2, 5, 20]);
    let model = toy_model(&mut rng, &cases, &factors);
    let train_truths: Vec<Field> = (0..6)
        .map(|_| Field::new(12, 12, (0..144).map(|_| rng.gen_range(0.0..10.0f32)).collect()).unwrap())
        .collect();
    let report = evaluate_run(&model, &cases, &train_truths, &bins, &factors).unwrap();
    // 4 resolutions x 6 bins x 3 methods x 7 metrics
    assert_eq!(report.cells.len(), 4 * 6 * 3 * 7);
    for entry in &factors.entries {
        for bin in [0, 1, 5] {
            let v = report.value(entry.size, bin, Method::Climatology, Metric::Crpss).unwrap();
            assert_eq!(v, 0.0, "climatology skill must be exactly zero");
            let m = report.map(entry.size, bin, Method::Climatology, Metric::Crpss).unwrap();
            assert!(m.values.iter().all(|&v| v == 0.0));
        }
        for bin in [2, 3, 4] {
            for method in METHODS {
                for metric in METRICS {
                    assert_eq!(report.value(entry.size, bin, method, metric), None);
                }
            }
        }
    }
    // maps all live on the canvas regardless of resolution
    for m in &report.maps {
        assert_eq!((m.map.height, m.map.width), (12, 12));
    }
    // at full resolution pixelation is the identity, so climatology MAE in a
    // populated bin must match a direct computation
    let clim = build_climatology(&train_truths).unwrap();
    let mut expect = 0.0;
    for pix in 0..144 {
        expect += (clim.mean_at(pix) - cases[3].truth.values()[pix] as f64).abs() / 144.0;
    }
    let got = report.value(12, 5, Method::Climatology, Metric::Mae).unwrap();
    assert!((got - expect).abs() < 1e-12);
}

#[test]
fn full_run_is_reproducible_and_validates_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let factors = enumerate_factors(3, 12).unwrap();
    let bins = BinScheme::default();
    let cases = toy_cases(&mut rng, 2, 12, 3, &[4, 8]);
    let model = toy_model(&mut rng, &cases, &factors);
    let train_truths: Vec<Field> = (0..4)
        .map(|_| Field::new(12, 12, (0..144).map(|_| rng.gen_range(0.0..10.0f32)).collect()).unwrap())
        .collect();
    let a = evaluate_run(&model, &cases, &train_truths, &bins, &factors).unwrap();
    let b = evaluate_run(&model, &cases, &train_truths, &bins, &factors).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(&bins), b.to_csv(&bins));
    // wrong ensemble count
    assert!(matches!(
        evaluate_run(&model[..3], &cases, &train_truths, &bins, &factors),
        Err(Error::Usage(_))
    ));
    // alpha mismatched against the factor ordering
    let mut bad = model.clone();
    bad.swap(0, 1);
    assert!(matches!(
        evaluate_run(&bad, &cases, &train_truths, &bins, &factors),
        Err(Error::Usage(_))
    ));
}

#[test]
fn csv_layout_and_missing_encoding() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let factors = enumerate_factors(3, 12).unwrap();
    let bins = BinScheme::default();
    let cases = toy_cases(&mut rng, 1, 12, 3, &[2]);
    let model = toy_model(&mut rng, &cases, &factors);
    let train_truths: Vec<Field> = (0..3)
        .map(|_| Field::new(12, 12, (0..144).map(|_| rng.gen_range(0.0..10.0f32)).collect()).unwrap())
        .collect();
    let report = evaluate_run(&model, &cases, &train_truths, &bins, &factors).unwrap();
    let csv = report.to_csv(&bins);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "resolution,bin,method,metric,value");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 * 6 * 3 * 7);
    assert!(rows[0].starts_with("12,1-3,climatology,bias,"));
    // single case: ACC rows are NA everywhere, empty bins are NA throughout
    assert!(rows.iter().filter(|r| r.contains(",acc,")).all(|r| r.ends_with(",NA")));
    assert!(rows.iter().any(|r| r.starts_with("12,4-6,") && r.ends_with(",NA")));
    // climatology CRPSS serializes as exact zero
    assert!(rows
        .iter()
        .any(|r| r.starts_with("12,1-3,climatology,crpss,0.0000000000")));
}

#[test]
fn report_files_land_on_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let factors = enumerate_factors(3, 12).unwrap();
    let bins = BinScheme::default();
    let cases = toy_cases(&mut rng, 2, 12, 3, &[1, 5]);
    let model = toy_model(&mut rng, &cases, &factors);
    let train_truths: Vec<Field> = (0..3)
        .map(|_| Field::new(12, 12, (0..144).map(|_| rng.gen_range(0.0..10.0f32)).collect()).unwrap())
        .collect();
    let report = evaluate_run(&model, &cases, &train_truths, &bins, &factors).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_report(dir.path(), &report, &bins).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("resolution,bin,method,metric,value\n"));
    let map_path = dir.path().join("maps/res12_bin1_model_mae.dsg1");
    let back = crate::synthdata::read_grid(&map_path).unwrap();
    assert_eq!(back.len(), 1);
    let expect = report.map(12, 0, Method::Model, Metric::Mae).unwrap();
    for (a, b) in back[0].values().iter().zip(&expect.values) {
        assert!((*a as f64 - b).abs() < 1e-6);
    }
    let pgm = std::fs::read(dir.path().join("maps/res12_bin1_model_mae.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n12 12\n255\n"));
    assert_eq!(pgm.len(), b"P5\n12 12\n255\n".len() + 144);
    let sidecar =
        std::fs::read_to_string(dir.path().join("maps/res12_bin1_model_mae.pgm.txt")).unwrap();
    assert!(sidecar.starts_with("min=") && sidecar.contains("\nmax="));
}
