use super::*;
use crate::rngs::rng_from_seed;
use crate::special::gaussian_pdf;
use rand::Rng;
use rand_distr::StandardNormal;

fn normal_samples(n: usize, mu: f64, sigma: f64, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let mut m = Matrix::zeros(n, 1);
    for v in m.data_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *v = mu + sigma * g;
    }
    m
}

#[test]
fn grid_point_layout_and_integral() {
    let mut grid = DensityGrid::new(vec![
        Axis { min: 0.0, max: 1.0, cells: 4 },
        Axis { min: -1.0, max: 1.0, cells: 2 },
    ])
    .unwrap();
    assert_eq!(grid.len(), 8);
    assert_eq!(grid.point(0), vec![0.125, -0.5]);
    assert_eq!(grid.point(1), vec![0.125, 0.5]);
    assert_eq!(grid.point(7), vec![0.875, 0.5]);
    grid.fill_with(|_| 0.5);
    assert!((grid.integral() - 1.0).abs() < 1e-12);
}

#[test]
fn kde_integrates_to_one_on_covering_grid() {
    // Two well separated clusters.
    let mut samples = normal_samples(5_000, -2.0, 0.7, 1);
    for r in 0..2_500 {
        let v = samples.get(r, 0);
        samples.set(r, 0, v + 5.0);
    }
    let grid = DensityGrid::from_samples(&samples, 400, 0.25).unwrap();
    let kde = kde_density(&samples, &KdeConfig::default(), &grid).unwrap();
    assert!((kde.integral() - 1.0).abs() < 0.02, "integral {}", kde.integral());
}

#[test]
fn kde_consistency_at_the_normal_mode() {
    let samples = normal_samples(100_000, 0.0, 1.0, 2);
    let grid = DensityGrid::new(vec![Axis { min: -0.01, max: 0.01, cells: 2 }]).unwrap();
    let kde = kde_density(&samples, &KdeConfig::default(), &grid).unwrap();
    let at_zero = 0.5 * (kde.values()[0] + kde.values()[1]);
    let want = 0.3989423;
    assert!((at_zero - want).abs() / want < 0.05, "kde(0) = {at_zero}");
}

#[test]
fn kde_peak_is_nonincreasing_in_bandwidth() {
    let samples = normal_samples(500, 0.0, 1.0, 3);
    let grid = DensityGrid::from_samples(&samples, 200, 0.1).unwrap();
    let peak = |h: f64| -> f64 {
        let config = KdeConfig { bandwidth: Bandwidth::Fixed(h), ..Default::default() };
        kde_density(&samples, &config, &grid)
            .unwrap()
            .values()
            .iter()
            .fold(0.0f64, |a, &v| a.max(v))
    };
    let (p1, p2, p4) = (peak(0.1), peak(0.2), peak(0.4));
    assert!(p1 >= p2 && p2 >= p4, "{p1} {p2} {p4}");
}

#[test]
fn kde_rejects_degenerate_and_mismatched_input() {
    let constant = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
    let grid = DensityGrid::new(vec![Axis { min: 0.0, max: 2.0, cells: 10 }]).unwrap();
    assert!(kde_density(&constant, &KdeConfig::default(), &grid).is_err());
    let samples2d = Matrix::zeros(5, 2);
    assert!(kde_density(&samples2d, &KdeConfig::default(), &grid).is_err());
}

#[test]
fn cv_bandwidth_is_finite_and_plausible() {
    let samples = normal_samples(2_000, 0.0, 1.0, 4);
    let config = KdeConfig { bandwidth: Bandwidth::CvFiveFold, cv_subsample: 1_000, seed: 5 };
    let h = resolve_bandwidth(&samples, &config).unwrap();
    let scott = resolve_bandwidth(&samples, &KdeConfig::default()).unwrap();
    assert!(h[0] > 0.1 * scott[0] && h[0] < 10.0 * scott[0]);
}

#[test]
fn relative_l2_trivial_cases() {
    let mut truth = DensityGrid::new(vec![Axis { min: -1.0, max: 1.0, cells: 50 }]).unwrap();
    truth.fill_with(|p| gaussian_pdf(p[0], 0.0, 0.4));
    assert_eq!(relative_l2(&truth, &truth).unwrap(), 0.0);
    let mut double = truth.clone();
    double.values_mut().iter_mut().for_each(|v| *v *= 2.0);
    assert!((relative_l2(&double, &truth).unwrap() - 1.0).abs() < 1e-12);
    let mut zero = truth.clone();
    zero.values_mut().fill(0.0);
    assert!((relative_l2(&zero, &truth).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn grid_shape_mismatch_is_an_error() {
    let a = DensityGrid::new(vec![Axis { min: 0.0, max: 1.0, cells: 10 }]).unwrap();
    let b = DensityGrid::new(vec![Axis { min: 0.0, max: 1.0, cells: 20 }]).unwrap();
    assert!(relative_l2(&a, &b).is_err());
    assert!(kl_grid(&a, &b, DEFAULT_KL_FLOOR).is_err());
}

#[test]
fn kl_gaussian_mean_shift_closed_form() {
    // KL(N(0,1) || N(0.5,1)) = 0.5^2 / 2 = 0.125.
    let axes = vec![Axis { min: -6.0, max: 6.0, cells: 2000 }];
    let mut truth = DensityGrid::new(axes.clone()).unwrap();
    truth.fill_with(|p| gaussian_pdf(p[0], 0.0, 1.0));
    let mut shifted = DensityGrid::new(axes).unwrap();
    shifted.fill_with(|p| gaussian_pdf(p[0], 0.5, 1.0));
    let kl = kl_grid(&truth, &shifted, DEFAULT_KL_FLOOR).unwrap();
    assert!((kl - 0.125).abs() / 0.125 < 0.02, "kl {kl}");
    assert!(kl_grid(&truth, &truth, DEFAULT_KL_FLOOR).unwrap().abs() < 1e-12);
}

#[test]
fn kl_is_nonnegative_for_proper_densities() {
    let axes = vec![Axis { min: -8.0, max: 8.0, cells: 1500 }];
    let mut p = DensityGrid::new(axes.clone()).unwrap();
    p.fill_with(|x| 0.6 * gaussian_pdf(x[0], -1.0, 0.5) + 0.4 * gaussian_pdf(x[0], 2.0, 1.2));
    let mut q = DensityGrid::new(axes).unwrap();
    q.fill_with(|x| gaussian_pdf(x[0], 0.5, 2.0));
    assert!(kl_grid(&p, &q, DEFAULT_KL_FLOOR).unwrap() > -1e-6);
    assert!(kl_grid(&q, &p, DEFAULT_KL_FLOOR).unwrap() > -1e-6);
}

#[test]
fn mmd_is_symmetric_and_small_under_the_null() {
    let a = normal_samples(400, 0.0, 1.0, 6);
    let b = normal_samples(400, 0.0, 1.0, 7);
    let ab = mmd_squared(&a, &b, MmdBandwidth::Fixed(1.0)).unwrap();
    let ba = mmd_squared(&b, &a, MmdBandwidth::Fixed(1.0)).unwrap();
    assert_eq!(ab, ba);
    assert!(ab.abs() < 0.02, "null mmd^2 {ab}");
}

#[test]
fn mmd_unbiasedness_over_null_trials() {
    let trials = 100;
    let mut values = Vec::with_capacity(trials);
    for t in 0..trials {
        let a = normal_samples(100, 0.0, 1.0, 100 + t as u64);
        let b = normal_samples(100, 0.0, 1.0, 10_000 + t as u64);
        values.push(mmd_squared(&a, &b, MmdBandwidth::Fixed(1.0)).unwrap());
    }
    let mean = values.iter().sum::<f64>() / trials as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn mmd_against_monte_carlo_population_oracle() {
    // N(0,1) vs N(3,1), sigma = 1: estimate on 1e3 rows per side versus a
    // fresh-pair Monte Carlo estimate of the population value.
    let a = normal_samples(1_000, 0.0, 1.0, 8);
    let b = normal_samples(1_000, 3.0, 1.0, 9);
    let est = mmd_squared(&a, &b, MmdBandwidth::Fixed(1.0)).unwrap();

    let mut rng = rng_from_seed(10);
    let mut draw = |mu: f64| -> f64 {
        let g: f64 = rng.sample(StandardNormal);
        mu + g
    };
    let pairs = 1_000_000;
    let (mut kaa, mut kbb, mut kab) = (0.0, 0.0, 0.0);
    for _ in 0..pairs {
        let (a1, a2) = (draw(0.0), draw(0.0));
        let (b1, b2) = (draw(3.0), draw(3.0));
        kaa += (-(a1 - a2) * (a1 - a2) / 2.0).exp();
        kbb += (-(b1 - b2) * (b1 - b2) / 2.0).exp();
        kab += (-(a1 - b1) * (a1 - b1) / 2.0).exp();
    }
    let oracle = (kaa + kbb - 2.0 * kab) / pairs as f64;
    assert!((est - oracle).abs() / oracle < 0.10, "est {est} vs oracle {oracle}");
}

#[test]
fn mmd_median_heuristic_separates_shifted_distributions() {
    let a = normal_samples(300, 0.0, 1.0, 11);
    let b = normal_samples(300, 3.0, 1.0, 12);
    let stat = mmd_squared(&a, &b, MmdBandwidth::Median).unwrap();
    assert!(stat > 0.1, "{stat}");
    assert!(mmd_squared(&a, &Matrix::zeros(3, 2), MmdBandwidth::Median).is_err());
}

#[test]
fn moments_of_standard_normal_draws() {
    let samples = normal_samples(100_000, 0.0, 1.0, 13);
    let m = &sample_moments(&samples).unwrap()[0];
    let n = samples.rows() as f64;
    assert!(m.mean.abs() < 3.0 / n.sqrt());
    assert!((m.variance - 1.0).abs() < 0.02);
    // SE of skewness is sqrt(6/n), of kurtosis sqrt(24/n).
    assert!(m.skewness.abs() < 3.0 * (6.0 / n).sqrt());
    assert!((m.kurtosis - 3.0).abs() < 3.0 * (24.0 / n).sqrt());
}

#[test]
fn moments_reject_constant_and_tiny_input() {
    let constant = Matrix::from_rows(&[vec![2.0], vec![2.0], vec![2.0], vec![2.0]]);
    assert!(sample_moments(&constant).is_err());
    let tiny = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
    assert!(sample_moments(&tiny).is_err());
}

#[test]
fn moments_follow_affine_transformation_law() {
    let samples = normal_samples(5_000, 0.3, 1.0, 14);
    let base = &sample_moments(&samples).unwrap()[0];
    let mut scaled = samples.clone();
    for v in scaled.data_mut() {
        *v = 2.5 * *v - 7.0;
    }
    let t = &sample_moments(&scaled).unwrap()[0];
    assert!((t.mean - (2.5 * base.mean - 7.0)).abs() < 1e-9);
    assert!((t.variance - 6.25 * base.variance).abs() < 1e-9);
    assert!((t.skewness - base.skewness).abs() < 1e-9);
    assert!((t.kurtosis - base.kurtosis).abs() < 1e-9);
}

#[test]
fn metrics_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.csv");
    let rows = vec![
        MetricRow { metric: "rel-l2".into(), value: 0.091, std: 0.021, scale: 10.0 },
        MetricRow { metric: "kl".into(), value: 0.000513, std: 0.000225, scale: 1000.0 },
    ];
    save_metrics_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("metric,value,std,scale\nrel-l2,0.091,0.021,10\n"));
}
