mod common;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use mealclust::dbscan::{dbscan_fit, eps_neighborhood, NOISE};
use mealclust::episodes::{segment_episodes, SegmentConfig};
use mealclust::events::{default_meal_locations, filter_meal_locations, SensorEvent, SensorKind};
use mealclust::features::{
    build_features, scale_features, FeatureMatrix, FeatureMode, ScalingMethod,
};
use mealclust::gmm::{category_summary, gmm_density, gmm_fit, GmmParams};
use mealclust::kmeans::{assign, euclidean_distance, inertia, kmeans_fit};
use mealclust::synth::{generate_trace, HouseholdProfile};
use mealclust::validation::{davies_bouldin, sweep_dbscan, sweep_kmeans, Algorithm};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn base() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 3, 1)
        .unwrap()
        .and_hms_opt(6, 0, 0)
        .unwrap()
}

fn events_at(offsets_s: &[i64]) -> Vec<SensorEvent> {
    let mut ts: Vec<i64> = offsets_s.to_vec();
    ts.sort();
    ts.iter()
        .map(|s| SensorEvent {
            timestamp: base() + Duration::seconds(*s),
            household_id: "H".into(),
            sensor_id: "k1".into(),
            sensor_kind: SensorKind::Motion,
            location: "kitchen".into(),
            value: 1,
        })
        .collect()
}

fn cfg(gap: f64) -> SegmentConfig {
    SegmentConfig {
        gap_threshold_min: gap,
        min_duration_min: 0.0,
        min_events: 1,
    }
}

fn arb_offsets() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..20_000, 0..80)
}

proptest! {
    #[test]
    fn episodes_are_ordered_and_disjoint(offsets in arb_offsets(), gap in 0.5f64..30.0) {
        let events = events_at(&offsets);
        let eps = segment_episodes(&events, &SegmentConfig { gap_threshold_min: gap, ..SegmentConfig::default() }).unwrap();
        let total: usize = eps.iter().map(|e| e.event_count).sum();
        prop_assert!(total <= events.len());
        for w in eps.windows(2) {
            prop_assert!(w[0].end < w[1].start);
            prop_assert!(w[1].start - w[0].end >= Duration::milliseconds((gap * 60_000.0) as i64));
        }
        for e in &eps {
            prop_assert!(e.duration_min >= 1.0 && e.event_count >= 2);
        }
    }

    #[test]
    fn larger_gap_never_adds_episodes(offsets in arb_offsets(), g1 in 0.5f64..20.0, extra in 0.0f64..20.0) {
        let events = events_at(&offsets);
        let a = segment_episodes(&events, &cfg(g1)).unwrap().len();
        let b = segment_episodes(&events, &cfg(g1 + extra)).unwrap().len();
        prop_assert!(b <= a);
    }

    #[test]
    fn time_shift_shifts_episodes(offsets in arb_offsets(), shift in -100_000i64..100_000) {
        let a = segment_episodes(&events_at(&offsets), &SegmentConfig::default()).unwrap();
        let moved: Vec<i64> = offsets.iter().map(|o| o + shift).collect();
        let b = segment_episodes(&events_at(&moved), &SegmentConfig::default()).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.start + Duration::seconds(shift), y.start);
            prop_assert!((x.duration_min - y.duration_min).abs() < 1e-12);
            prop_assert_eq!(x.event_count, y.event_count);
        }
    }

    #[test]
    fn assign_is_brute_force_argmin(seed in 0u64..1000, k in 1usize..6) {
        let mut r = common::rng(seed);
        let pts = common::blobs(&mut r, 40, 2, 3, 2.0);
        let m = FeatureMatrix::from_rows(&pts).unwrap();
        let cs = common::uniform(&mut r, k, 2, 20.0);
        let labels = assign(&m, &cs).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let d: Vec<f64> = cs.iter().map(|c| euclidean_distance(p, c).unwrap()).collect();
            let best = (0..k).fold(0, |b, j| if d[j] < d[b] { j } else { b });
            prop_assert_eq!(labels[i], best);
        }
    }

    #[test]
    fn inertia_ignores_cluster_names(seed in 0u64..1000) {
        let mut r = common::rng(seed);
        let pts = common::blobs(&mut r, 30, 2, 3, 2.0);
        let m = FeatureMatrix::from_rows(&pts).unwrap();
        let model = kmeans_fit(&m, 3, seed, 300, 1e-6).unwrap();
        let perm = [2usize, 0, 1];
        let cs: Vec<Vec<f64>> = (0..3).map(|j| model.centroids[perm[j]].clone()).collect();
        let inv: Vec<usize> = model.labels.iter().map(|l| perm.iter().position(|p| p == l).unwrap()).collect();
        prop_assert!((inertia(&m, &cs, &inv) - model.inertia).abs() <= 1e-9 * model.inertia.max(1.0));
    }

    #[test]
    fn neighbourhood_is_brute_force(seed in 0u64..1000, eps in 0.1f64..8.0) {
        let mut r = common::rng(seed);
        let pts = common::blobs(&mut r, 50, 2, 3, 3.0);
        let m = FeatureMatrix::from_rows(&pts).unwrap();
        let p = r.random_range(0..pts.len());
        let got = eps_neighborhood(p, &m, eps).unwrap();
        let want: Vec<usize> = (0..pts.len()).filter(|q| euclidean_distance(&pts[p], &pts[*q]).unwrap() < eps).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn more_eps_never_more_noise(seed in 0u64..1000, e1 in 0.2f64..5.0, extra in 0.0f64..5.0) {
        let mut r = common::rng(seed);
        let pts = common::blobs(&mut r, 60, 2, 3, 3.0);
        let m = FeatureMatrix::from_rows(&pts).unwrap();
        let a = dbscan_fit(&m, e1, 4).unwrap();
        let b = dbscan_fit(&m, e1 + extra, 4).unwrap();
        prop_assert!(b.n_noise() <= a.n_noise());
        // Every labelled cluster holds a core point.
        for c in 0..a.n_clusters as i64 {
            prop_assert!((0..pts.len()).any(|i| a.labels[i] == c && a.core[i]));
        }
    }

    #[test]
    fn dbi_invariances(seed in 0u64..1000, dx in -50.0f64..50.0, s in 0.1f64..10.0) {
        let mut r = common::rng(seed);
        let pts = common::blobs(&mut r, 40, 2, 3, 2.0);
        let labels: Vec<i64> = (0..pts.len()).map(|i| (i % 3) as i64).collect();
        let m = FeatureMatrix::from_rows(&pts).unwrap();
        let Ok(d) = davies_bouldin(&m, &labels, true) else { return Ok(()) };
        let relabelled: Vec<i64> = labels.iter().map(|l| [7, 3, 11][*l as usize]).collect();
        prop_assert!((davies_bouldin(&m, &relabelled, true).unwrap() - d).abs() <= 1e-9 * d);
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] + dx, p[1] - dx]).collect();
        let mm = FeatureMatrix::from_rows(&moved).unwrap();
        prop_assert!((davies_bouldin(&mm, &labels, true).unwrap() - d).abs() <= 1e-8 * d.max(1.0));
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] * s, p[1] * s]).collect();
        let ms = FeatureMatrix::from_rows(&scaled).unwrap();
        prop_assert!((davies_bouldin(&ms, &labels, true).unwrap() - d).abs() <= 1e-9 * d);
    }
}

#[test]
fn segmentation_of_synthetic_days_matches_planted_count() {
    let mut p = HouseholdProfile::four_category("H", 30, 4);
    p.categories.retain(|c| c.name != "snack");
    p.categories
        .iter_mut()
        .for_each(|c| c.daily_probability = 1.0);
    let trace = generate_trace(&p).unwrap();
    let meals = filter_meal_locations(&trace.events, &default_meal_locations()).unwrap();
    let eps = segment_episodes(&meals, &SegmentConfig::default()).unwrap();
    let m = build_features(&eps, FeatureMode::DurationAndStartHour).unwrap();
    assert_eq!((m.rows(), m.dims()), (eps.len(), 2));
    assert!((81..=99).contains(&m.rows()));
    // Planted durations and hours are truncated at 3 sd.
    let (dmin, dmax) = (15.0 * 0.4, 35.0 * 1.6);
    let (hmin, hmax) = (8.0 - 1.5, 19.5 + 1.5 + dmax / 60.0);
    assert!(
        m.column(0).all(|d| d >= 1.0 && d <= dmax + 1e-9),
        "duration out of range"
    );
    assert!(m.column(0).filter(|d| *d < dmin).count() == 0);
    assert!(
        m.column(1).all(|h| h >= hmin && h <= hmax),
        "hour out of range"
    );
}

#[test]
fn four_planted_gaussians_are_found() {
    let truth = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut misses = 0;
    for seed in 0..50u64 {
        let mut r = common::rng(1000 + seed);
        let pts: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let c = truth[i % 4];
                vec![c[0] + normal.sample(&mut r), c[1] + normal.sample(&mut r)]
            })
            .collect();
        let m = FeatureMatrix::from_rows(&pts).unwrap();
        let found = |c: &[Vec<f64>]| {
            truth
                .iter()
                .all(|t| c.iter().any(|x| euclidean_distance(t, x).unwrap() < 0.5))
        };
        let fits: Vec<_> = (0..3)
            .map(|s| kmeans_fit(&m, 4, seed * 3 + s, 300, 1e-6).unwrap())
            .collect();
        if !found(&fits[0].centroids) {
            misses += 1;
        }
        // A single start can settle in a local optimum; the best of three recovers every centre.
        let best = fits
            .iter()
            .min_by(|a, b| a.inertia.total_cmp(&b.inertia))
            .unwrap();
        assert!(
            found(&best.centroids),
            "dataset {seed}: {:?}",
            best.centroids
        );
    }
    assert!(misses <= 5, "{misses} of 50 single starts missed a centre");
}

#[test]
fn sweep_picks_planted_k() {
    let truth = [[0.0, 0.0], [12.0, 0.0], [0.0, 12.0], [12.0, 12.0]];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut r = common::rng(77);
    let pts: Vec<Vec<f64>> = (0..400)
        .map(|i| {
            vec![
                truth[i % 4][0] + normal.sample(&mut r),
                truth[i % 4][1] + normal.sample(&mut r),
            ]
        })
        .collect();
    let m = FeatureMatrix::from_rows(&pts).unwrap();
    let report = sweep_kmeans(&m, 2..=10, 5).unwrap();
    assert_eq!(report.algorithm, Algorithm::KMeans);
    assert_eq!(report.entries.len(), 9);
    assert_eq!(
        report.entries.iter().map(|e| e.param).collect::<Vec<_>>(),
        (2..=10).map(f64::from).collect::<Vec<_>>()
    );
    assert_eq!(report.best.param, 4.0);
    let best = report.best.dbi.unwrap();
    assert!(report
        .entries
        .iter()
        .all(|e| e.dbi.is_none_or(|d| d >= best)));
}

#[test]
fn sweep_dbscan_separates_two_blobs() {
    let normal = Normal::new(0.0, 0.5).unwrap();
    let mut r = common::rng(9);
    let pts: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let c = if i < 100 { 0.0 } else { 30.0 };
            vec![c + normal.sample(&mut r), normal.sample(&mut r)]
        })
        .collect();
    let m = FeatureMatrix::from_rows(&pts).unwrap();
    let report = sweep_dbscan(&m, &[1.0, 2.0, 3.0, 4.0, 5.0], 5).unwrap();
    let best = report.best;
    assert_eq!(best.n_clusters, 2);
    let fit = dbscan_fit(&m, best.param, 5).unwrap();
    assert!(fit.labels[..100]
        .iter()
        .all(|l| *l == fit.labels[0] && *l != NOISE));
    assert!(fit.labels[100..]
        .iter()
        .all(|l| *l == fit.labels[100] && *l != NOISE));
}

#[test]
fn one_dimensional_density_integrates_to_one() {
    let params = GmmParams::new(
        vec![0.3, 0.7],
        vec![vec![-2.0], vec![3.0]],
        vec![
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 2.0),
        ],
    )
    .unwrap();
    let (lo, hi, n) = (-20.0, 20.0, 40_000);
    let h = (hi - lo) / n as f64;
    let mut total = 0.0;
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        total += w * gmm_density(&[x], &params).unwrap();
    }
    assert!((total * h - 1.0).abs() < 1e-6, "{}", total * h);
}

#[test]
fn category_summary_recovers_planted_durations() {
    let planted = [5.0, 15.0, 30.0, 50.0];
    let mut r = common::rng(21);
    let mut rows = Vec::new();
    for (i, mu) in planted.iter().enumerate() {
        let normal = Normal::new(*mu, 0.05 * mu).unwrap();
        for _ in 0..100 {
            rows.push((
                normal.sample(&mut r),
                6.0 + 4.0 * i as f64 + r.random_range(-0.3..0.3),
            ));
        }
    }
    let eps: Vec<_> = rows
        .iter()
        .enumerate()
        .map(|(i, (d, h))| mealclust::episodes::ActivityEpisode {
            household_id: "H".into(),
            start: base() + Duration::days(i as i64),
            end: base() + Duration::days(i as i64) + Duration::milliseconds((d * 60_000.0) as i64),
            duration_min: *d,
            start_hour: *h,
            event_count: 5,
        })
        .collect();
    let m = build_features(&eps, FeatureMode::DurationAndStartHour).unwrap();
    let z = scale_features(&m, ScalingMethod::ZScore).unwrap();
    let model = gmm_fit(&z, 4, 3, 200, 1e-6).unwrap();
    let cats = category_summary(&model, &z).unwrap();
    assert_eq!(cats.len(), 4);
    for (c, mu) in cats.iter().zip(planted) {
        assert!(
            (c.mean_duration_min - mu).abs() <= 0.1 * mu,
            "{} vs {mu}",
            c.mean_duration_min
        );
    }
    assert!((cats.iter().map(|c| c.weight).sum::<f64>() - 1.0).abs() < 1e-9);
}
