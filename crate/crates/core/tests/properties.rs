use gridstab_core::analysis::{
    histogram, quantile_curve, quantile_sorted, LyapunovDistribution, TestChannels, TestProvenance,
};
use gridstab_core::exec::Sequential;
use gridstab_core::network::SteadyStateNetwork;
use gridstab_core::optimize::{
    anneal_distinct, anneal_uncertain, metropolis_accept, AnnealingSchedule, NoisyObjectiveConfig,
    NoisyProblem,
};
use gridstab_core::rng::SeededSampler;
use gridstab_core::stability::{
    assemble_jacobian, jacobian_spectrum, lyapunov_exponent, qep_spectrum, ZERO_MODE_TOLERANCE,
};
use gridstab_core::uncertainty::hypersphere_step;
use gridstab_core::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Connected random net: a spanning path plus random extra edges, small
/// angle spreads so every interaction stays attractive.
fn random_net() -> impl Strategy<Value = SteadyStateNetwork> {
    (1usize..=5).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(0.5f64..20.0, n * n),
            prop::collection::vec(any::<bool>(), n * n),
            prop::collection::vec(-0.2f64..0.2, n * n),
            prop::collection::vec(-0.3f64..0.3, n),
            prop::collection::vec(0.5f64..15.0, n),
        )
            .prop_map(|(n, c, keep, g, delta, beta)| {
                let mut coupling = vec![vec![0.0; n]; n];
                let mut shift = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for k in (i + 1)..n {
                        if k == i + 1 || keep[i * n + k] {
                            coupling[i][k] = c[i * n + k];
                            coupling[k][i] = c[i * n + k];
                            shift[i][k] = g[i * n + k];
                            shift[k][i] = g[i * n + k];
                        }
                    }
                }
                SteadyStateNetwork::from_parts(vec![0.0; n], coupling, shift, delta, beta).unwrap()
            })
    })
}

/// Greedy nearest matching; returns the largest pair distance.
fn spectral_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn distribution(samples: Vec<f64>) -> LyapunovDistribution {
    LyapunovDistribution {
        requested: samples.len(),
        samples,
        non_convergent: 0,
        provenance: TestProvenance {
            plan_method: "test".into(),
            beta_sigma: 0.0,
            channels: TestChannels::Full,
            seed: 0,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn single_zero_mode(net in random_net()) {
        let jac = assemble_jacobian(&net, &net.beta).unwrap();
        let spectrum = jacobian_spectrum(&jac).unwrap();
        let threshold = ZERO_MODE_TOLERANCE * jac.frobenius_norm();
        let zeros = spectrum.iter().filter(|z| z.norm() <= threshold).count();
        prop_assert_eq!(zeros, 1);
        let r = lyapunov_exponent(&jac, ZERO_MODE_TOLERANCE).unwrap();
        prop_assert!(r.lambda_l < 0.0);
    }

    #[test]
    fn quadratic_pencil_matches_jacobian(net in random_net()) {
        let jac = assemble_jacobian(&net, &net.beta).unwrap();
        let direct = jacobian_spectrum(&jac).unwrap();
        let pencil = qep_spectrum(&net, &net.beta).unwrap();
        let d = spectral_distance(&direct, &pencil);
        prop_assert!(d <= 1e-9, "spectra differ by {d}");
    }

    #[test]
    fn hypersphere_norm_is_radius(n in 1usize..40, radius in 1e-3f64..50.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = hypersphere_step(n, radius, &mut rng).unwrap();
        let norm = eps.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - radius).abs() <= 1e-12 * radius.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn quantile_curve_is_monotone(samples in prop::collection::vec(-10.0f64..5.0, 1..300)) {
        let dist = distribution(samples);
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        let curve = quantile_curve(&dist, &grid).unwrap();
        for w in curve.values.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        let sorted = dist.sorted();
        prop_assert_eq!(curve.values[0], sorted[0]);
        prop_assert_eq!(curve.values[100], *sorted.last().unwrap());
        prop_assert_eq!(quantile_sorted(&sorted, 50.0), curve.values[50]);
    }

    #[test]
    fn histogram_partitions_samples(samples in prop::collection::vec(-10.0f64..5.0, 1..300), width in 0.01f64..2.0) {
        let n = samples.len();
        let bins = histogram(&distribution(samples), width).unwrap();
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), n);
        for w in bins.windows(2) {
            prop_assert!((w[1].center - w[0].center - width).abs() < 1e-9 * (1.0 + w[0].center.abs()));
        }
    }
}

#[test]
fn metropolis_frequencies_follow_boltzmann() {
    let trials = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for delta in [-0.5f64, 0.0, 0.1, 0.5, 2.0] {
        for t in [0.05f64, 0.3, 1.0, 3.0, 10.0] {
            let p: f64 = if delta < 0.0 { 1.0 } else { (-delta / t).exp() };
            let hits = (0..trials)
                .filter(|_| metropolis_accept(delta, t, &mut rng))
                .count();
            let freq = hits as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * se + 1e-12,
                "delta {delta} T {t}: {freq} vs {p} (se {se})"
            );
        }
    }
}

#[test]
fn noiseless_single_sample_search_equals_exact_search() {
    let net = SteadyStateNetwork::from_parts(
        vec![0.0; 3],
        vec![
            vec![0.0, 4.0, 1.0],
            vec![4.0, 0.0, 2.5],
            vec![1.0, 2.5, 0.0],
        ],
        vec![
            vec![0.0, 0.05, -0.02],
            vec![-0.05, 0.0, 0.01],
            vec![0.02, -0.01, 0.0],
        ],
        vec![0.0, 0.1, -0.15],
        vec![1.0; 3],
    )
    .unwrap();
    let schedule = AnnealingSchedule {
        steps: 300,
        ..AnnealingSchedule::default()
    };
    let config = NoisyObjectiveConfig {
        samples: 1,
        confirmation_factor: 1,
        archive_size: 1,
        ..NoisyObjectiveConfig::default()
    };
    let start = vec![3.0; 3];
    let sampler = SeededSampler::new(11);
    let exact = anneal_distinct(&net, &start, &schedule, &sampler).unwrap();
    let problem = NoisyProblem::from_network(&net, 0.0);
    let noisy =
        anneal_uncertain(&problem, &start, &config, &schedule, &sampler, &Sequential).unwrap();
    assert_eq!(exact.plan.values, noisy.plan.values);
    assert_eq!(exact.initial_temperature, noisy.initial_temperature);
    assert_eq!(exact.steps, noisy.steps);
}
