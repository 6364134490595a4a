//! Cross-module properties of the loose-source analysis.

use loose_decoy::channel::{expected_yield, ChannelModel, DetectorParams};
use loose_decoy::decoy::{brute_force_s1_oracle, solve_s1_lower};
use loose_decoy::keyrate::{
    distance_penalty, evaluate_emission, evaluate_protocol, optimize_intensities,
    EstimationOptions, ProtocolSpec, DEFAULT_SIFTING,
};
use loose_decoy::source_sim::{
    generate_pulse_train, summarize, virtualize, Branch, BranchProbabilities, FluctuationShape,
    SourceConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID_STEP: f64 = 1e-5;

#[test]
fn closed_form_agrees_with_the_grid_oracle_and_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(2007);
    for _ in 0..200 {
        let mu = rng.random_range(0.05..0.5);
        let mu_prime = rng.random_range(mu..1.0);
        if mu_prime <= mu {
            continue;
        }
        let eta = 10f64.powf(rng.random_range(1e-4f64.log10()..0.5f64.log10()));
        let d_b = rng.random_range(0.0..1e-4);
        let det = DetectorParams::new(d_b, 0.0, 1.0).unwrap();
        let s_mu = expected_yield(mu, eta, &det).unwrap();
        let s_mu_prime = expected_yield(mu_prime, eta, &det).unwrap();

        let closed = solve_s1_lower(mu, mu_prime, s_mu, s_mu_prime, d_b).unwrap();
        let oracle = brute_force_s1_oracle(mu, mu_prime, s_mu, s_mu_prime, d_b, GRID_STEP).unwrap();
        assert!(
            (closed - oracle).abs() <= GRID_STEP,
            "mu={mu} mu'={mu_prime} eta={eta} d_B={d_b}: {closed} vs {oracle}"
        );
        let y1 = 1.0 - (1.0 - d_b) * (1.0 - eta);
        assert!(closed <= y1);
    }
}

#[test]
fn loose_curve_is_the_shifted_ideal_curve() {
    let det = DetectorParams::gys_like();
    for lambda in [1.01, 1.05, 1.2] {
        let loose = ProtocolSpec::loose(0.1, 0.5, lambda, DEFAULT_SIFTING).unwrap();
        let ideal = loose.as_ideal();
        let shift = distance_penalty(lambda, 15.0).unwrap();
        for d in [10.0, 30.0, 50.0, 80.0, 100.0, 120.0] {
            let r_loose = evaluate_protocol(&loose, &ChannelModel::gys_like(d).unwrap(), &det)
                .unwrap()
                .rate;
            let r_ideal =
                evaluate_protocol(&ideal, &ChannelModel::gys_like(d + shift).unwrap(), &det)
                    .unwrap()
                    .rate;
            assert!((r_loose - r_ideal).abs() <= 1e-12 * r_ideal.abs());
        }
    }
}

/// Over-stating the emitted intensities beyond `lambda` never improves the
/// verified single-photon fraction of the signal counts.
#[test]
fn over_assuming_intensities_is_conservative() {
    let det = DetectorParams::gys_like();
    let lambda = 1.05;
    let (mu, mu_prime) = (0.1, 0.5);
    let actual = (mu / lambda, mu_prime / lambda);
    let single_fraction = |assumed: (f64, f64), channel: &ChannelModel| {
        let report = evaluate_emission(
            actual,
            assumed,
            0.5,
            channel,
            &det,
            &EstimationOptions::default(),
        )
        .unwrap();
        assumed.1 * (-assumed.1).exp() * report.s1_lower / report.q_mu_prime
    };
    for d in (0..=140).step_by(10) {
        let channel = ChannelModel::gys_like(d as f64).unwrap();
        let exact = single_fraction((mu, mu_prime), &channel);
        for kappa in [1.001, 1.01, 1.05, 1.2] {
            let over = single_fraction((mu * kappa, mu_prime * kappa), &channel);
            assert!(over <= exact, "d={d} kappa={kappa}: {over} > {exact}");
        }
    }
}

#[test]
fn optimal_intensities_move_with_the_curve() {
    let det = DetectorParams::gys_like();
    let mus: Vec<f64> = (1..=12).map(|i| 0.025 * i as f64).collect();
    let mu_primes: Vec<f64> = (2..=16).map(|i| 0.05 * i as f64).collect();
    let lambda = 1.2;
    let loose = ProtocolSpec::loose(0.1, 0.5, lambda, DEFAULT_SIFTING).unwrap();
    let shift = distance_penalty(lambda, 15.0).unwrap();
    for d in [20.0, 60.0, 100.0] {
        let at_loose = optimize_intensities(
            &loose,
            &ChannelModel::gys_like(d).unwrap(),
            &det,
            &mus,
            &mu_primes,
        )
        .unwrap();
        let at_ideal = optimize_intensities(
            &loose.as_ideal(),
            &ChannelModel::gys_like(d + shift).unwrap(),
            &det,
            &mus,
            &mu_primes,
        )
        .unwrap();
        assert_eq!(
            (at_loose.mu, at_loose.mu_prime),
            (at_ideal.mu, at_ideal.mu_prime)
        );
    }
}

fn source(delta: f64, pulses: u64) -> SourceConfig {
    let probs = BranchProbabilities {
        vacuum: 0.1,
        decoy: 0.45,
        signal: 0.45,
    };
    SourceConfig::with_default_father(0.1, 0.5, delta, FluctuationShape::Uniform, probs, pulses)
        .unwrap()
}

#[test]
fn decoy_mean_matches_the_nominal_intensity() {
    let cfg = source(0.05, 1_000_000);
    let pulses = generate_pulse_train(&cfg, 77).unwrap();
    let summary = summarize(&pulses, &cfg).unwrap();
    let decoy = summary.branch(Branch::Decoy);
    // Uniform father intensity: mean mu, standard deviation mu delta / sqrt(3).
    let se = cfg.mu * cfg.fluctuation_bound / 3f64.sqrt() / (decoy.count as f64).sqrt();
    assert!((decoy.mean_intensity - cfg.mu).abs() < 4.0 * se);
    assert!(decoy.max_intensity <= cfg.assumed_intensity(Branch::Decoy));
    assert!(summary.within_bounds);
}

#[test]
fn every_pulse_factors_through_the_virtual_source() {
    let cfg = source(0.05, 100_000);
    for pulse in generate_pulse_train(&cfg, 5).unwrap() {
        let v = virtualize(&pulse, &cfg);
        assert!([
            0.0,
            cfg.assumed_intensity(Branch::Decoy),
            cfg.assumed_intensity(Branch::Signal)
        ]
        .contains(&v.exact_stage_intensity));
        assert!(v.uncontrolled_factor > 0.0 && v.uncontrolled_factor <= 1.0);
        let direct = pulse.father_intensity * cfg.attenuation(pulse.branch);
        let product = v.output_intensity();
        assert!((product - direct).abs() <= 1e-12 * direct.abs().max(f64::MIN_POSITIVE));
        assert!((product - pulse.output_intensity).abs() <= 1e-12 * pulse.output_intensity);
    }
}
