//! Property and Monte Carlo invariant checks across modules.

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sojourn::excursion::{excursion_volume, integral_functional};
use sojourn::fieldgen::{CirculantSampler, DenseSampler, EmbeddingOptions};
use sojourn::hermite::{hermite_coefficient, hermite_eval};
use sojourn::limit_lab::run_clt_experiment;
use sojourn::lrd::{delta_ratio, lrd_classify, default_probe_radii, LrdClass, Verdict};
use sojourn::models::{cov_eval, rho_alpha, Covariance};
use sojourn::normalizer::sigma_stationary;
use sojourn::oracle::{coarsen_measure, OracleGrid, SpectralKernelGrid, WindowShape};
use sojourn::quadrature::{gauss_hermite, graded_points, integrate, Tolerance};
use sojourn::report::{canonical_json, parse_config};
use sojourn::rng::StreamKey;
use sojourn::special::binom_real;
use sojourn::stats::{ks_distance, moments, Reference};
use sojourn::{CovarianceModel, ExperimentConfig, FieldSample, GridSpec, NormalizationMethod, SpectralDensity, Subordinator};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn hermite_polynomials_are_orthogonal(k in 0usize..=10, l in 0usize..=10) {
        let (x, w) = gauss_hermite(24).unwrap();
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * hermite_eval(k, *x).unwrap() * hermite_eval(l, *x).unwrap()).sum();
        let want = if k == l { factorial(k) } else { 0.0 };
        prop_assert!((v - want).abs() < 1e-8);
    }

    #[test]
    fn indicator_energy_is_bounded_by_a0(u in -3.0f64..3.0) {
        let f = Subordinator::Identity;
        let a0 = hermite_coefficient(&f, u, 1.0, 0).unwrap();
        let partial = |kmax: usize| -> f64 { (0..=kmax).map(|k| hermite_coefficient(&f, u, 1.0, k).unwrap().powi(2)).sum() };
        let (e20, e40) = (partial(20), partial(40));
        prop_assert!(e40 <= a0 + 1e-12, "energy {} a0 {}", e40, a0);
        // the indicator's coefficients decay like k^{-3/4}, so the deficit
        // shrinks like K^{-1/2}; it is about 0.02 at u = 0
        prop_assert!(a0 - e40 <= (a0 - e20) / 2f64.sqrt() * 1.05 + 1e-12);
        prop_assert!(a0 - e40 <= 0.021);
    }

    #[test]
    fn even_subordinators_have_no_odd_coefficients(u in 0.05f64..5.0, sigma in 0.5f64..2.0) {
        for k in [1, 3, 5] {
            prop_assert!(hermite_coefficient(&Subordinator::Square, u, sigma, k).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn excursion_volume_is_monotone_and_complementary(
        values in prop::collection::vec(-4.0f64..4.0, 2..200),
        u1 in -4.0f64..4.0,
        du in 0.0f64..3.0,
        h in 0.1f64..2.0,
    ) {
        let n = values.len();
        let sample = FieldSample {
            grid: GridSpec::with_mesh(&[n as f64 * h], &[h]),
            values: values.clone(),
            seed: 0,
            replicate: 0,
            model: String::new(),
            approximate: false,
            saturated: 0,
        };
        let a = excursion_volume(&sample, u1).raw;
        let b = excursion_volume(&sample, u1 + du).raw;
        prop_assert!(b <= a);
        if !values.contains(&u1) {
            let below = h * values.iter().filter(|v| **v < u1).count() as f64;
            prop_assert!((a + below - sample.grid.lattice_volume()).abs() < 1e-9 * (1.0 + a));
        }
    }

    #[test]
    fn integral_functional_is_linear(
        values in prop::collection::vec(-3.0f64..3.0, 2..100),
        c1 in -2.0f64..2.0,
        c2 in -2.0f64..2.0,
        p in 0.0f64..2.0,
    ) {
        let n = values.len();
        let sample = FieldSample {
            grid: GridSpec::unit(&[n as f64]),
            values,
            seed: 0,
            replicate: 0,
            model: String::new(),
            approximate: false,
            saturated: 0,
        };
        let g1 = |x: f64| (p * x).sin();
        let g2 = |x: f64| x * x - p;
        let lhs = integral_functional(&sample, |x| c1 * g1(x) + c2 * g2(x)).unwrap();
        let rhs = c1 * integral_functional(&sample, g1).unwrap() + c2 * integral_functional(&sample, g2).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()) * n as f64);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn gram_matrices_admit_cholesky(seed in any::<u64>(), which in 0usize..7) {
        let models = [
            CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 },
            CovarianceModel::PowerLawIso { eta: 1.2, dim: 2 },
            CovarianceModel::Exponential { theta: 2.0, dim: 2 },
            CovarianceModel::FgnProduct { hurst: vec![0.3, 0.8] },
            CovarianceModel::Gneiting { alpha: 0.5, gamma: 0.5, spatial_dim: 1 },
            CovarianceModel::CauchyExp3d { alpha: 0.4 },
            CovarianceModel::Separable {
                spatial: Box::new(CovarianceModel::Exponential { theta: 1.0, dim: 1 }),
                temporal: Box::new(CovarianceModel::PowerLawIso { eta: 0.6, dim: 1 }),
            },
        ];
        let model = &models[which];
        let d = model.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // fGn is defined on the integer lattice
        let integer = matches!(model, CovarianceModel::FgnProduct { .. });
        let mut pts: Vec<Vec<f64>> = Vec::new();
        while pts.len() < 64 {
            let p: Vec<f64> = (0..d)
                .map(|_| {
                    let x: f64 = rng.random_range(0.0..20.0);
                    if integer { x.floor() } else { x }
                })
                .collect();
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        let gram = DMatrix::from_fn(64, 64, |i, j| {
            cov_eval(model, &pts[i], &pts[j]).unwrap() + if i == j { 1e-10 } else { 0.0 }
        });
        prop_assert!(gram.cholesky().is_some(), "{:?}", model);
    }

    #[test]
    fn sigma_decreases_with_order(eta in 0.1f64..1.9, n in 5.0f64..500.0, m in 1usize..4) {
        let model = CovarianceModel::PowerLawIso { eta, dim: 1 };
        let lo = sigma_stationary(&model, &[n], m).unwrap().value / factorial(m);
        let hi = sigma_stationary(&model, &[n], m + 1).unwrap().value / factorial(m + 1);
        prop_assert!(hi <= lo * (1.0 + 1e-9));
    }

    #[test]
    fn short_range_implies_violated_delta(h in 0.05f64..0.45, theta in 0.5f64..4.0, use_fgn in any::<bool>()) {
        let model = if use_fgn {
            CovarianceModel::FgnProduct { hurst: vec![h] }
        } else {
            CovarianceModel::Exponential { theta, dim: 1 }
        };
        let (class, _) = lrd_classify(&model, &default_probe_radii()).unwrap();
        if class == LrdClass::ShortRange {
            let v = delta_ratio(&model, &[64.0, 128.0, 256.0, 512.0, 1024.0]).unwrap().verdict;
            prop_assert_eq!(v, Verdict::Violated);
        }
    }

    #[test]
    fn config_round_trips_through_canonical_json(
        eta in 0.05f64..0.95,
        level in -3.0f64..3.0,
        sizes in prop::collection::btree_set(4u32..5000, 1..5),
        replicates in 100usize..5000,
        seed in any::<u64>(),
        rank in prop::option::of(1usize..4),
        sub in 0usize..4,
    ) {
        let subordinator = [
            Subordinator::Identity,
            Subordinator::Square,
            Subordinator::Cubic { beta: 0.5 },
            Subordinator::SignedExp { beta: 2.1 },
        ][sub].clone();
        let cfg = ExperimentConfig {
            model: CovarianceModel::PowerLawIso { eta, dim: 1 },
            subordinator,
            level,
            windows: sizes.iter().map(|s| GridSpec::unit(&[*s as f64])).collect(),
            replicates,
            seed,
            normalization: NormalizationMethod::LatticeSum,
            rank,
        };
        let text = canonical_json(&cfg).unwrap();
        let back: ExperimentConfig = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(canonical_json(&back).unwrap(), text);
    }
}

#[test]
fn rho_matches_binomial_series() {
    for alpha in [0.6, 0.75, 0.9] {
        for s in [2.0f64, 5.0, 10.0] {
            let series: f64 = 2.0 * (1..=30).map(|k| binom_real(2.0 * alpha, 2 * k) * s.powi(-2 * k as i32)).sum::<f64>();
            let direct = rho_alpha(alpha, s) / s.powf(2.0 * alpha);
            assert!((direct - series).abs() < 1e-9, "alpha {alpha} s {s}: {direct} vs {series}");
        }
    }
}

#[test]
fn fgn_absolute_integral_diverges_only_above_half() {
    let integral = |h: f64, r: f64| {
        let tol = Tolerance {
            abs: 1e-300,
            rel: 1e-10,
            max_intervals: 4000,
        };
        integrate(|v| rho_alpha(h, v).abs(), &graded_points(r, 24, &[1.0]), tol).value
    };
    let grow: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|r| integral(0.75, *r)).collect();
    // ∫_0^R ~ R^{2H−1}: each decade multiplies by about √10
    assert!(grow[1] / grow[0] > 2.5 && grow[2] / grow[1] > 2.5, "{grow:?}");
    let conv: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|r| integral(0.25, *r)).collect();
    let (d1, d2) = (conv[1] - conv[0], conv[2] - conv[1]);
    assert!(d2 < d1 / 2.5 && d2 < 0.01 * conv[2], "{conv:?}");
}

/// Values at node `nodes[i]` across `reps` replicates, from both halves of each pair.
fn node_values(sampler: &CirculantSampler, seed: u64, reps: usize, nodes: &[usize]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(reps); nodes.len()];
    for p in 0..reps.div_ceil(2) as u64 {
        let (re, im) = sampler.sample_pair(StreamKey::new(seed, p, 0x1000));
        for v in [&re, &im] {
            for (i, &n) in nodes.iter().enumerate() {
                if out[i].len() < reps {
                    out[i].push(v[n]);
                }
            }
        }
    }
    out
}

fn circulant_backends() -> Vec<(CovarianceModel, GridSpec)> {
    vec![
        (CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 }, GridSpec::unit(&[64.0])),
        (CovarianceModel::FgnProduct { hurst: vec![0.75] }, GridSpec::unit(&[64.0])),
        (CovarianceModel::FgnProduct { hurst: vec![0.3, 0.8] }, GridSpec::unit(&[8.0, 8.0])),
        (CovarianceModel::Exponential { theta: 2.0, dim: 2 }, GridSpec::with_mesh(&[8.0, 8.0], &[0.5, 0.5])),
        (CovarianceModel::Gneiting { alpha: 0.5, gamma: 0.5, spatial_dim: 1 }, GridSpec::unit(&[8.0, 8.0])),
    ]
}

fn sampler(model: &CovarianceModel, grid: &GridSpec) -> CirculantSampler {
    match model {
        CovarianceModel::FgnProduct { hurst } => CirculantSampler::fgn(hurst, grid, EmbeddingOptions::default()).unwrap(),
        _ => CirculantSampler::new(model, grid, EmbeddingOptions::default(), "m").unwrap(),
    }
}

#[test]
fn marginals_are_standard_normal_and_covariances_match() {
    let reps = 10_000;
    for (model, grid) in circulant_backends() {
        let s = sampler(&model, &grid);
        let counts = grid.node_counts();
        let probes: Vec<usize> = if counts.len() == 1 {
            vec![0, 1, 2, 5, 10]
        } else {
            let row = counts[counts.len() - 1];
            vec![0, 1, 2, row, row + 1]
        };
        let vals = node_values(&s, 21, reps, &probes);
        let ks = ks_distance(&vals[0], Reference::StdNormal).unwrap();
        assert!(ks.p_value > 1e-3, "{model:?}: KS p {}", ks.p_value);
        let origin = grid.node(probes[0]);
        for (i, &n) in probes.iter().enumerate().skip(1) {
            let rho = cov_eval(&model, &origin, &grid.node(n)).unwrap();
            let prods: Vec<f64> = vals[0].iter().zip(&vals[i]).map(|(a, b)| a * b).collect();
            let m = moments(&prods).unwrap();
            let se = (m.variance / reps as f64).sqrt();
            assert!((m.mean - rho).abs() < 3.0 * se, "{model:?} node {n}: {} vs {rho} (se {se})", m.mean);
        }
    }
}

#[test]
fn dense_backend_marginal_and_covariance() {
    let pts: Vec<Vec<f64>> = (0..12).map(|i| vec![0.5 * i as f64 + 0.1 * (i * i) as f64]).collect();
    let rho = |t: &[f64], s: &[f64]| (1.0 + (t[0] - s[0]).powi(2)).powf(-0.2) * (1.0 + 0.01 * (t[0] + s[0]));
    let norm = |t: &[f64], s: &[f64]| rho(t, s) / (rho(t, t) * rho(s, s)).sqrt();
    let sampler = DenseSampler::new(norm, &pts).unwrap();
    let reps = 10_000;
    let draws: Vec<Vec<f64>> = (0..reps as u64).map(|r| sampler.sample(4, r).values).collect();
    let first: Vec<f64> = draws.iter().map(|v| v[0]).collect();
    assert!(ks_distance(&first, Reference::StdNormal).unwrap().p_value > 1e-3);
    for j in [1, 5, 11] {
        let prods: Vec<f64> = draws.iter().map(|v| v[0] * v[j]).collect();
        let m = moments(&prods).unwrap();
        let se = (m.variance / reps as f64).sqrt();
        let want = norm(&pts[0], &pts[j]);
        assert!((m.mean - want).abs() < 3.0 * se, "node {j}: {} vs {want}", m.mean);
    }
}

#[test]
fn chaoses_are_orthogonal_on_simulated_pairs() {
    let model = CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 };
    let grid = GridSpec::unit(&[32.0]);
    let s = sampler(&model, &grid);
    let reps = 20_000;
    let vals = node_values(&s, 33, reps, &[0, 3]);
    let rho = cov_eval(&model, &[0.0], &[3.0]).unwrap();
    for k in 0..=3 {
        for l in 0..=3 {
            let prods: Vec<f64> = vals[0]
                .iter()
                .zip(&vals[1])
                .map(|(a, b)| hermite_eval(k, *a).unwrap() * hermite_eval(l, *b).unwrap())
                .collect();
            let m = moments(&prods).unwrap();
            let se = (m.variance / reps as f64).sqrt().max(1e-12);
            let want = if k == l { factorial(k) * rho.powi(k as i32) } else { 0.0 };
            assert!((m.mean - want).abs() < 3.0 * se, "k {k} l {l}: {} vs {want} (se {se})", m.mean);
        }
    }
}

#[test]
fn raw_functional_is_centered_at_volume_times_a0() {
    let cases = [
        (CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 }, Subordinator::Identity, 0.5),
        (CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 }, Subordinator::Square, 1.0),
        (CovarianceModel::FgnProduct { hurst: vec![0.75] }, Subordinator::Cubic { beta: 0.5 }, -0.3),
        (CovarianceModel::Exponential { theta: 3.0, dim: 1 }, Subordinator::Lognormal, 2.0),
        (CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 }, Subordinator::SignedExp { beta: 2.1 }, 1.0),
    ];
    let grid = GridSpec::unit(&[128.0]);
    for (model, f, u) in cases {
        let s = sampler(&model, &grid);
        let reps = 2000;
        let mut raws = Vec::with_capacity(reps);
        for p in 0..(reps / 2) as u64 {
            let (re, im) = s.sample_pair(StreamKey::new(55, p, 0x1000));
            for v in [re, im] {
                raws.push(v.iter().filter(|y| f.eval(**y) >= u).count() as f64);
            }
        }
        let m = moments(&raws).unwrap();
        let se = (m.variance / reps as f64).sqrt();
        let want = grid.lattice_volume() * hermite_coefficient(&f, u, 1.0, 0).unwrap();
        assert!((m.mean - want).abs() < 3.0 * se, "{f:?} at {u}: {} vs {want} (se {se})", m.mean);
    }
}

#[test]
fn oracle_moments_are_stable_under_grid_doubling() {
    let density = SpectralDensity::AnisotropicProduct { gammas: vec![0.3] };
    let fine_grid = OracleGrid {
        cells: vec![16384],
        truncation: vec![40.0],
    };
    let coarse_grid = OracleGrid {
        cells: vec![8192],
        truncation: vec![40.0],
    };
    let fine = SpectralKernelGrid::new(2, &density, WindowShape::Box, &fine_grid).unwrap();
    let coarse = SpectralKernelGrid::new(2, &density, WindowShape::Box, &coarse_grid).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for i in 0..4000 {
        let w = fine.sample_measure(8, i);
        a.push(fine.evaluate(&w).unwrap());
        b.push(coarse.evaluate(&coarsen_measure(&fine_grid.cells, &w).unwrap()).unwrap());
    }
    let (ma, mb) = (moments(&a).unwrap(), moments(&b).unwrap());
    let pairs = [
        (ma.mean, mb.mean),
        (ma.variance, mb.variance),
        (ma.skewness, mb.skewness),
        (ma.excess_kurtosis + 3.0, mb.excess_kurtosis + 3.0),
    ];
    for (x, y) in pairs {
        assert!((x - y).abs() < 0.02 * x.abs().max(1.0), "{ma:?} vs {mb:?}");
    }
    assert!(ma.skewness > 0.5, "{ma:?}");
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let cfg = ExperimentConfig {
        model: CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 },
        subordinator: Subordinator::Identity,
        level: 0.3,
        windows: vec![GridSpec::unit(&[64.0]), GridSpec::unit(&[256.0])],
        replicates: 300,
        seed: 99,
        normalization: NormalizationMethod::Quadrature,
        rank: None,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let r = pool.install(|| run_clt_experiment(&cfg).unwrap());
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        (serde_json::to_string(&r).unwrap(), csv)
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(5));
}
