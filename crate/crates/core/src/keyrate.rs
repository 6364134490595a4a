//! Key distillation and the loose-source comparison.
//!
//! A loose protocol with fluctuation ratio `lambda = Omega_M / Omega` emits
//! `mu_e / lambda` and `mu_e' / lambda` but runs every estimate as if it had
//! sent `mu_e` and `mu_e'`. Its observed data at transmittance `eta` coincide
//! with those of the ideal protocol at `eta / lambda`, so its key-rate curve
//! is the ideal curve shifted by `L_half * log2(lambda)` km.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{expected_qber, expected_yield, ChannelModel, DetectorParams};
use crate::decoy::{apply_finite_size, bound_yields, ObservedRates, VacuumTreatment};
use crate::{Error, Result, VACUUM_ERROR_RATE};

/// BB84 sifting factor.
pub const DEFAULT_SIFTING: f64 = 0.5;

/// Precision of the secure-distance bisection.
pub const DISTANCE_TOLERANCE_KM: f64 = 1e-3;

/// Secure-distance search gives up beyond this distance.
pub const MAX_SEARCH_DISTANCE_KM: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolMode {
    /// Exactly controlled source; `lambda = 1`.
    Ideal,
    /// Father-pulse intensity bounded by `lambda` times its nominal value.
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    /// Decoy intensity used in every estimate.
    pub assumed_mu: f64,
    /// Signal intensity used in every estimate.
    pub assumed_mu_prime: f64,
    pub lambda: f64,
    pub mode: ProtocolMode,
    pub sifting: f64,
}

impl ProtocolSpec {
    pub fn ideal(mu: f64, mu_prime: f64, sifting: f64) -> Result<Self> {
        let spec = Self {
            assumed_mu: mu,
            assumed_mu_prime: mu_prime,
            lambda: 1.0,
            mode: ProtocolMode::Ideal,
            sifting,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn loose(mu: f64, mu_prime: f64, lambda: f64, sifting: f64) -> Result<Self> {
        let spec = Self {
            assumed_mu: mu,
            assumed_mu_prime: mu_prime,
            lambda,
            mode: ProtocolMode::Loose,
            sifting,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.assumed_mu > 0.0) || !self.assumed_mu_prime.is_finite() {
            return Err(Error::Config(format!(
                "assumed intensities must be positive and finite, got {} and {}",
                self.assumed_mu, self.assumed_mu_prime
            )));
        }
        if self.assumed_mu >= self.assumed_mu_prime {
            return Err(Error::IntensityOrdering {
                mu: self.assumed_mu,
                mu_prime: self.assumed_mu_prime,
            });
        }
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be a finite upper-bound ratio >= 1, got {}",
                self.lambda
            )));
        }
        if self.mode == ProtocolMode::Ideal && self.lambda != 1.0 {
            return Err(Error::Config(format!(
                "ideal protocol requires lambda = 1, got {}",
                self.lambda
            )));
        }
        if !(self.sifting > 0.0 && self.sifting <= 1.0) {
            return Err(Error::Config(format!(
                "sifting factor must lie in (0, 1], got {}",
                self.sifting
            )));
        }
        Ok(())
    }

    /// The ideal comparator with the same assumed intensities.
    pub fn as_ideal(&self) -> Self {
        Self {
            lambda: 1.0,
            mode: ProtocolMode::Ideal,
            ..*self
        }
    }

    pub fn with_intensities(&self, mu: f64, mu_prime: f64) -> Self {
        Self {
            assumed_mu: mu,
            assumed_mu_prime: mu_prime,
            ..*self
        }
    }

    /// Intensities Alice actually aims for: `assumed / lambda`.
    pub fn actual_intensities(&self) -> (f64, f64) {
        match self.mode {
            ProtocolMode::Ideal => (self.assumed_mu, self.assumed_mu_prime),
            ProtocolMode::Loose => (
                self.assumed_mu / self.lambda,
                self.assumed_mu_prime / self.lambda,
            ),
        }
    }
}

/// Pulse counts and confidence for the finite-size worst case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSizeModel {
    pub n_mu: f64,
    pub n_mu_prime: f64,
    pub n_vac: f64,
    pub n_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimationOptions {
    pub vacuum: VacuumTreatment,
    pub finite_size: Option<FiniteSizeModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub distance_km: f64,
    pub q_mu: f64,
    pub q_mu_prime: f64,
    pub e_mu: f64,
    pub e_mu_prime: f64,
    pub s0: f64,
    pub s1_lower: f64,
    pub e1_upper: f64,
    /// Secure bits per pulse; nonpositive means no key.
    pub rate: f64,
}

/// Binary Shannon entropy in bits. Arguments outside `[0, 1]` are clamped.
pub fn binary_entropy(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// `R = q * (-Q f H2(E) + Q1 (1 - H2(e1)))`.
pub fn gllp_rate(
    gain: f64,
    qber: f64,
    single_photon_gain: f64,
    single_photon_error: f64,
    ec_inefficiency: f64,
    sifting: f64,
) -> f64 {
    sifting
        * (-gain * ec_inefficiency * binary_entropy(qber)
            + single_photon_gain * (1.0 - binary_entropy(single_photon_error)))
}

pub fn evaluate_protocol(
    spec: &ProtocolSpec,
    channel: &ChannelModel,
    det: &DetectorParams,
) -> Result<KeyRateReport> {
    evaluate_protocol_with(spec, channel, det, &EstimationOptions::default())
}

pub fn evaluate_protocol_with(
    spec: &ProtocolSpec,
    channel: &ChannelModel,
    det: &DetectorParams,
    options: &EstimationOptions,
) -> Result<KeyRateReport> {
    spec.validate()?;
    evaluate_emission(
        spec.actual_intensities(),
        (spec.assumed_mu, spec.assumed_mu_prime),
        spec.sifting,
        channel,
        det,
        options,
    )
}

/// Simulates honest observations for pulses of intensities `actual` and
/// distills the key treating them as if they had intensities `assumed`.
pub fn evaluate_emission(
    actual: (f64, f64),
    assumed: (f64, f64),
    sifting: f64,
    channel: &ChannelModel,
    det: &DetectorParams,
    options: &EstimationOptions,
) -> Result<KeyRateReport> {
    det.validate()?;
    let eta = channel.transmittance()?;
    let (actual_mu, actual_mu_prime) = actual;
    let (assumed_mu, assumed_mu_prime) = assumed;

    let counts = options
        .finite_size
        .map_or((f64::INFINITY, f64::INFINITY, f64::INFINITY), |fs| {
            (fs.n_mu, fs.n_mu_prime, fs.n_vac)
        });
    let mut rates = ObservedRates {
        s_mu: expected_yield(actual_mu, eta, det)?,
        s_mu_prime: expected_yield(actual_mu_prime, eta, det)?,
        e_mu: expected_qber(actual_mu, eta, det)?,
        e_mu_prime: expected_qber(actual_mu_prime, eta, det)?,
        s_vac: expected_yield(0.0, eta, det)?,
        n_mu: counts.0,
        n_mu_prime: counts.1,
        n_vac: counts.2,
    };
    if let Some(fs) = options.finite_size {
        rates = apply_finite_size(&rates, fs.n_sigma)?;
    }

    let bounds = bound_yields(assumed_mu, assumed_mu_prime, &rates, options.vacuum)?;
    let single_photon_gain = assumed_mu_prime * (-assumed_mu_prime).exp() * bounds.s1_lower;
    let single_photon_error = if bounds.s1_lower > 0.0 {
        bounds.e1_upper
    } else {
        VACUUM_ERROR_RATE
    };
    let rate = gllp_rate(
        rates.s_mu_prime,
        rates.e_mu_prime,
        single_photon_gain,
        single_photon_error,
        det.ec_inefficiency,
        sifting,
    );
    Ok(KeyRateReport {
        distance_km: channel.distance_km,
        q_mu: rates.s_mu,
        q_mu_prime: rates.s_mu_prime,
        e_mu: rates.e_mu,
        e_mu_prime: rates.e_mu_prime,
        s0: bounds.s0,
        s1_lower: bounds.s1_lower,
        e1_upper: bounds.e1_upper,
        rate,
    })
}

/// Key-rate reports over a list of distances, in input order.
pub fn rate_curve(
    spec: &ProtocolSpec,
    channel_template: &ChannelModel,
    det: &DetectorParams,
    distances_km: &[f64],
    options: &EstimationOptions,
) -> Result<Vec<KeyRateReport>> {
    distances_km
        .par_iter()
        .map(|&d| {
            let channel = channel_template.at_distance(d)?;
            evaluate_protocol_with(spec, &channel, det, options)
        })
        .collect()
}

/// Distance lost at equal key rate: `L_half * log2(lambda)`.
pub fn distance_penalty(lambda: f64, half_distance_km: f64) -> Result<f64> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be >= 1, got {lambda}")));
    }
    if !(half_distance_km > 0.0) || !half_distance_km.is_finite() {
        return Err(Error::Domain(format!(
            "half distance must be positive, got {half_distance_km}"
        )));
    }
    Ok(half_distance_km * lambda.log2())
}

pub fn find_secure_distance(
    spec: &ProtocolSpec,
    channel_template: &ChannelModel,
    det: &DetectorParams,
    rate_floor: f64,
) -> Result<f64> {
    find_secure_distance_with(
        spec,
        channel_template,
        det,
        rate_floor,
        &EstimationOptions::default(),
    )
}

/// Largest distance with key rate at least `rate_floor`. Relies on the rate
/// being non-increasing in distance, which holds for honest channels.
pub fn find_secure_distance_with(
    spec: &ProtocolSpec,
    channel_template: &ChannelModel,
    det: &DetectorParams,
    rate_floor: f64,
    options: &EstimationOptions,
) -> Result<f64> {
    if !(rate_floor >= 0.0) {
        return Err(Error::Domain(format!(
            "rate floor must be nonnegative, got {rate_floor}"
        )));
    }
    let has_key = |d: f64| -> Result<bool> {
        let channel = channel_template.at_distance(d)?;
        let report = evaluate_protocol_with(spec, &channel, det, options)?;
        Ok(report.rate > 0.0 && report.rate >= rate_floor)
    };
    if !has_key(0.0)? {
        return Err(Error::NoSecureDistance);
    }

    let mut lo = 0.0;
    let mut hi = 16.0;
    while has_key(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_SEARCH_DISTANCE_KM {
            return Err(Error::Domain(format!(
                "key rate stays above {rate_floor} beyond {MAX_SEARCH_DISTANCE_KM} km"
            )));
        }
    }
    while hi - lo > DISTANCE_TOLERANCE_KM {
        let mid = 0.5 * (lo + hi);
        if has_key(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityChoice {
    pub mu: f64,
    pub mu_prime: f64,
    pub rate: f64,
}

/// Exhaustive search over `mu < mu'` pairs from the two grids. Ties go to the
/// smallest `mu`, then the smallest `mu'`.
pub fn optimize_intensities(
    template: &ProtocolSpec,
    channel: &ChannelModel,
    det: &DetectorParams,
    mu_grid: &[f64],
    mu_prime_grid: &[f64],
) -> Result<IntensityChoice> {
    let mut mus = mu_grid.to_vec();
    let mut mu_primes = mu_prime_grid.to_vec();
    mus.sort_by(f64::total_cmp);
    mu_primes.sort_by(f64::total_cmp);
    let pairs: Vec<(f64, f64)> = mus
        .iter()
        .flat_map(|&mu| {
            mu_primes
                .iter()
                .filter(move |&&mu_prime| mu < mu_prime)
                .map(move |&mu_prime| (mu, mu_prime))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::Domain(
            "intensity grids contain no pair with mu < mu'".to_string(),
        ));
    }

    let rates: Vec<f64> = pairs
        .par_iter()
        .map(|&(mu, mu_prime)| {
            evaluate_protocol(&template.with_intensities(mu, mu_prime), channel, det)
                .map(|report| report.rate)
        })
        .collect::<Result<_>>()?;

    let mut best: Option<IntensityChoice> = None;
    for (&(mu, mu_prime), &rate) in pairs.iter().zip(&rates) {
        if best.is_none_or(|b| rate > b.rate) {
            best = Some(IntensityChoice { mu, mu_prime, rate });
        }
    }
    match best {
        Some(choice) if choice.rate > 0.0 => Ok(choice),
        _ => Err(Error::NoKeyAtAnyIntensity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_loose(lambda: f64) -> ProtocolSpec {
        ProtocolSpec::loose(0.1, 0.5, lambda, DEFAULT_SIFTING).unwrap()
    }

    #[test]
    fn binary_entropy_fixed_points() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_eq!(binary_entropy(0.5), 1.0);
    }

    #[test]
    fn gllp_limits() {
        // Single photons carry no key when e1 = 1/2.
        assert!(gllp_rate(0.01, 0.02, 0.009, 0.5, 1.22, 0.5) <= 0.0);
        assert_eq!(gllp_rate(0.3, 0.0, 0.3, 0.0, 1.0, 1.0), 0.3);
    }

    #[test]
    fn spec_validation() {
        assert!(ProtocolSpec::loose(0.1, 0.5, 0.99, 0.5).is_err());
        assert!(ProtocolSpec::loose(0.5, 0.1, 1.05, 0.5).is_err());
        assert!(ProtocolSpec::ideal(0.1, 0.5, 0.0).is_err());
        let mut spec = ProtocolSpec::ideal(0.1, 0.5, 0.5).unwrap();
        spec.lambda = 1.1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn loose_spec_emits_scaled_intensities() {
        let spec = default_loose(1.25);
        assert_eq!(spec.actual_intensities(), (0.08, 0.4));
        assert_eq!(spec.as_ideal().actual_intensities(), (0.1, 0.5));
    }

    #[test]
    fn unit_lambda_matches_the_ideal_protocol() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(40.0).unwrap();
        let loose = evaluate_protocol(&default_loose(1.0), &channel, &det).unwrap();
        let ideal = evaluate_protocol(&default_loose(1.0).as_ideal(), &channel, &det).unwrap();
        assert_eq!(loose, ideal);
    }

    #[test]
    fn loose_observed_yield_uses_scaled_product() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(20.0).unwrap();
        let eta = channel.transmittance().unwrap();
        let report = evaluate_protocol(&default_loose(1.05), &channel, &det).unwrap();
        let expected = 1.0 - (-eta * 0.1 / 1.05).exp() + det.dark_count_rate;
        assert!((report.q_mu - expected).abs() < 1e-15);
    }

    #[test]
    fn key_rate_is_positive_at_50_km() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(50.0).unwrap();
        let spec = ProtocolSpec::ideal(0.1, 0.5, DEFAULT_SIFTING).unwrap();
        let report = evaluate_protocol(&spec, &channel, &det).unwrap();
        assert!(report.rate > 0.0);
        assert!(report.rate <= spec.sifting * report.q_mu_prime);
    }

    #[test]
    fn penalty_values() {
        assert_eq!(distance_penalty(1.0, 15.0).unwrap(), 0.0);
        let five = distance_penalty(1.05, 15.0).unwrap();
        assert!((five - 1.0559).abs() < 1e-3 && five < 1.06);
        let twenty = distance_penalty(1.2, 15.0).unwrap();
        assert!((twenty - 3.9455).abs() < 1e-3 && twenty < 4.0);
        assert!(distance_penalty(0.95, 15.0).is_err());
    }

    #[test]
    fn no_key_at_zero_distance() {
        let det = DetectorParams::new(1.7e-6, 0.2, 1.22).unwrap();
        let channel = ChannelModel::gys_like(0.0).unwrap();
        let spec = ProtocolSpec::ideal(0.1, 0.5, DEFAULT_SIFTING).unwrap();
        assert_eq!(
            find_secure_distance(&spec, &channel, &det, 0.0),
            Err(Error::NoSecureDistance)
        );
    }

    #[test]
    fn secure_distance_brackets_the_zero_crossing() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(0.0).unwrap();
        let spec = ProtocolSpec::ideal(0.1, 0.5, DEFAULT_SIFTING).unwrap();
        let d = find_secure_distance(&spec, &channel, &det, 0.0).unwrap();
        let at = |x: f64| {
            evaluate_protocol(&spec, &channel.at_distance(x).unwrap(), &det)
                .unwrap()
                .rate
        };
        assert!(at(d) > 0.0);
        assert!(at(d + 2.0 * DISTANCE_TOLERANCE_KM) <= 0.0);
        assert!(d > 100.0);
    }

    #[test]
    fn rate_floor_shortens_the_distance() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(0.0).unwrap();
        let spec = ProtocolSpec::ideal(0.1, 0.5, DEFAULT_SIFTING).unwrap();
        let full = find_secure_distance(&spec, &channel, &det, 0.0).unwrap();
        let floored = find_secure_distance(&spec, &channel, &det, 1e-6).unwrap();
        assert!(floored < full);
    }

    #[test]
    fn single_point_grid() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(50.0).unwrap();
        let spec = ProtocolSpec::ideal(0.1, 0.5, DEFAULT_SIFTING).unwrap();
        let choice = optimize_intensities(&spec, &channel, &det, &[0.2], &[0.6]).unwrap();
        assert_eq!((choice.mu, choice.mu_prime), (0.2, 0.6));
        assert!(optimize_intensities(&spec, &channel, &det, &[0.6], &[0.2]).is_err());
    }

    #[test]
    fn no_key_anywhere_on_the_grid() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(400.0).unwrap();
        let spec = ProtocolSpec::ideal(0.1, 0.5, DEFAULT_SIFTING).unwrap();
        assert_eq!(
            optimize_intensities(&spec, &channel, &det, &[0.05, 0.1], &[0.4, 0.5]),
            Err(Error::NoKeyAtAnyIntensity)
        );
    }

    #[test]
    fn refining_the_grid_never_loses_rate() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(80.0).unwrap();
        let spec = ProtocolSpec::ideal(0.1, 0.5, DEFAULT_SIFTING).unwrap();
        let coarse =
            optimize_intensities(&spec, &channel, &det, &[0.05, 0.15], &[0.4, 0.6]).unwrap();
        let fine =
            optimize_intensities(&spec, &channel, &det, &[0.05, 0.1, 0.15], &[0.4, 0.5, 0.6])
                .unwrap();
        assert!(fine.rate >= coarse.rate);
    }

    #[test]
    fn two_intensity_variant_is_pessimistic() {
        let det = DetectorParams::gys_like();
        let channel = ChannelModel::gys_like(60.0).unwrap();
        let spec = default_loose(1.05);
        let three = evaluate_protocol(&spec, &channel, &det).unwrap();
        let two = evaluate_protocol_with(
            &spec,
            &channel,
            &det,
            &EstimationOptions {
                vacuum: VacuumTreatment::TwoIntensity,
                finite_size: None,
            },
        )
        .unwrap();
        assert_eq!(two.s0, 0.0);
        assert!(two.rate <= three.rate);
    }

    proptest! {
        #[test]
        fn binary_entropy_is_symmetric(x in 0.0f64..=1.0) {
            prop_assert!((binary_entropy(x) - binary_entropy(1.0 - x)).abs() < 1e-14);
        }

        #[test]
        fn positive_rate_is_non_increasing_in_distance(d in 0.0f64..200.0, lambda in 1.0f64..1.3) {
            let det = DetectorParams::gys_like();
            let spec = default_loose(lambda);
            let near = evaluate_protocol(&spec, &ChannelModel::gys_like(d).unwrap(), &det).unwrap();
            let far = evaluate_protocol(&spec, &ChannelModel::gys_like(d + 1.0).unwrap(), &det).unwrap();
            // Past the secure distance the (negative) rate creeps back toward
            // zero as the error-correction cost shrinks with the gain.
            prop_assert!(far.rate.max(0.0) <= near.rate.max(0.0));
        }
    }
}
