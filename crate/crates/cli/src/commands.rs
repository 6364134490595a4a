//! The four scenario commands.

use serde::Serialize;

use loose_decoy::decoy::{apply_finite_size, bound_yields, ObservedRates, VacuumTreatment};
use loose_decoy::keyrate::{
    distance_penalty, find_secure_distance_with, gllp_rate, rate_curve, EstimationOptions,
    FiniteSizeModel,
};
use loose_decoy::source_sim::{generate_pulse_train, summarize, Branch, PulseRecord};
use loose_decoy::VACUUM_ERROR_RATE;

use crate::format::{fmt_g12, round_sig};
use crate::{CliError, ScenarioConfig};

pub const CURVE_HEADER: &str = "distance_km,R_ideal,R_loose,Q_mu,Q_mu_prime,E_mu,s1_lower,e1_upper";

/// Flags shared by the estimation commands.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimateFlags {
    /// Assume `s0 = 0` instead of using the vacuum counting rate.
    pub two_intensity: bool,
    /// Replace the rates by their finite-size worst case.
    pub finite_size: bool,
}

impl EstimateFlags {
    fn vacuum(&self) -> VacuumTreatment {
        if self.two_intensity {
            VacuumTreatment::TwoIntensity
        } else {
            VacuumTreatment::Observed
        }
    }

    fn options(&self, config: &ScenarioConfig) -> Result<EstimationOptions, CliError> {
        let finite_size = if self.finite_size {
            Some(config.finite_size.ok_or_else(|| {
                CliError::Usage("--finite-size needs a finite_size block in the scenario".into())
            })?)
        } else {
            None
        };
        Ok(EstimationOptions {
            vacuum: self.vacuum(),
            finite_size,
        })
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// Key-rate curves of the configured protocol and its ideal comparator over
/// the distance grid, as CSV. The `Q`, `E`, `s1` and `e1` columns describe
/// the configured (loose) protocol.
pub fn keyrate_curve(config: &ScenarioConfig, flags: EstimateFlags) -> Result<String, CliError> {
    config.validate()?;
    let options = flags.options(config)?;
    let spec = config.protocol_spec();
    let channel = config.channel_template();
    let distances = config.distances.points();

    let loose = rate_curve(&spec, &channel, &config.detector, &distances, &options)
        .map_err(|e| CliError::from_core("configured protocol", e))?;
    let ideal = rate_curve(
        &spec.as_ideal(),
        &channel,
        &config.detector,
        &distances,
        &options,
    )
    .map_err(|e| CliError::from_core("ideal protocol", e))?;

    let mut out = String::with_capacity(128 * distances.len());
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for (l, i) in loose.iter().zip(&ideal) {
        let row = [
            l.distance_km,
            i.rate,
            l.rate,
            l.q_mu,
            l.q_mu_prime,
            l.e_mu,
            l.s1_lower,
            l.e1_upper,
        ]
        .map(fmt_g12)
        .join(",");
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredPenalty {
    pub ideal_secure_distance_km: f64,
    pub loose_secure_distance_km: f64,
    pub measured_penalty_km: f64,
    pub difference_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyReport {
    pub lambda: f64,
    pub half_distance_km: f64,
    pub analytic_penalty_km: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredPenalty>,
}

impl PenaltyReport {
    pub fn to_text(&self) -> String {
        let mut text = format!(
            "lambda: {}\nhalf distance: {} km\nanalytic penalty: {} km\n",
            fmt_g12(self.lambda),
            fmt_g12(self.half_distance_km),
            fmt_g12(self.analytic_penalty_km)
        );
        if let Some(m) = &self.measured {
            text.push_str(&format!(
                "ideal secure distance: {} km\nloose secure distance: {} km\nmeasured penalty: {} km\nmeasured - analytic: {} km\n",
                fmt_g12(m.ideal_secure_distance_km),
                fmt_g12(m.loose_secure_distance_km),
                fmt_g12(m.measured_penalty_km),
                fmt_g12(m.difference_km)
            ));
        }
        text
    }

    pub fn to_json(&self) -> String {
        to_pretty_json(self)
    }
}

/// Analytic distance penalty `L_half log2(lambda)` and, given a scenario, the
/// shift between the ideal and loose secure distances measured by bisection.
///
/// With a scenario, `half_distance_km` defaults to the scenario's channel and
/// must agree with it when given.
pub fn penalty(
    lambda: f64,
    half_distance_km: Option<f64>,
    scenario: Option<&ScenarioConfig>,
    flags: EstimateFlags,
) -> Result<PenaltyReport, CliError> {
    let half_distance_km = match (half_distance_km, scenario) {
        (Some(h), Some(s)) if h != s.channel.half_distance_km => {
            return Err(CliError::Usage(format!(
                "--half-distance {h} disagrees with the scenario channel ({})",
                s.channel.half_distance_km
            )))
        }
        (Some(h), _) => h,
        (None, Some(s)) => s.channel.half_distance_km,
        (None, None) => loose_decoy::channel::DEFAULT_HALF_DISTANCE_KM,
    };
    let analytic =
        distance_penalty(lambda, half_distance_km).map_err(|e| CliError::Usage(e.to_string()))?;

    let measured = match scenario {
        None => None,
        Some(config) => {
            config.validate()?;
            let options = flags.options(config)?;
            let mut loose = config.protocol_spec();
            loose.lambda = lambda;
            loose.mode = loose_decoy::ProtocolMode::Loose;
            let ideal = loose.as_ideal();
            let channel = config.channel_template();
            let ideal_d =
                find_secure_distance_with(&ideal, &channel, &config.detector, 0.0, &options)
                    .map_err(|e| CliError::from_core("ideal secure distance", e))?;
            let loose_d =
                find_secure_distance_with(&loose, &channel, &config.detector, 0.0, &options)
                    .map_err(|e| CliError::from_core("loose secure distance", e))?;
            let shift = ideal_d - loose_d;
            Some(MeasuredPenalty {
                ideal_secure_distance_km: round_sig(ideal_d),
                loose_secure_distance_km: round_sig(loose_d),
                measured_penalty_km: round_sig(shift),
                difference_km: round_sig(shift - analytic),
            })
        }
    };
    Ok(PenaltyReport {
        lambda: round_sig(lambda),
        half_distance_km: round_sig(half_distance_km),
        analytic_penalty_km: round_sig(analytic),
        measured,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub count: u64,
    pub intended_intensity: f64,
    pub assumed_intensity: f64,
    pub mean_intensity: f64,
    pub max_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceReport {
    pub schema: &'static str,
    pub seed: u64,
    pub pulse_count: u64,
    pub nominal_father_intensity: f64,
    pub fluctuation_bound: f64,
    pub lambda: f64,
    pub vacuum: BranchReport,
    pub decoy: BranchReport,
    pub signal: BranchReport,
    pub max_virtualization_residual: f64,
    pub max_attenuation_residual: f64,
    pub max_beam_splitter_residual: f64,
    pub within_bounds: bool,
}

impl SourceReport {
    pub fn to_json(&self) -> String {
        to_pretty_json(self)
    }
}

/// Simulates the configured source. `seed` overrides the scenario seed.
pub fn simulate_source(
    config: &ScenarioConfig,
    seed: Option<u64>,
) -> Result<(SourceReport, Vec<PulseRecord>), CliError> {
    config.validate()?;
    let block = config
        .source
        .ok_or_else(|| CliError::Usage("scenario has no source block".into()))?;
    let source = config.source_config().expect("source block present")?;
    let seed = seed.unwrap_or(block.seed);
    let pulses =
        generate_pulse_train(&source, seed).map_err(|e| CliError::from_core("source", e))?;
    let summary = summarize(&pulses, &source).map_err(|e| CliError::from_core("source", e))?;

    let branch = |b: Branch| {
        let s = summary.branch(b);
        BranchReport {
            count: s.count,
            intended_intensity: round_sig(source.intended_intensity(b)),
            assumed_intensity: round_sig(s.assumed_intensity),
            mean_intensity: round_sig(s.mean_intensity),
            max_intensity: round_sig(s.max_intensity),
        }
    };
    let report = SourceReport {
        schema: "loose-decoy/source-summary/v1",
        seed,
        pulse_count: summary.pulse_count,
        nominal_father_intensity: round_sig(source.nominal_father_intensity),
        fluctuation_bound: round_sig(source.fluctuation_bound),
        lambda: round_sig(summary.lambda),
        vacuum: branch(Branch::Vacuum),
        decoy: branch(Branch::Decoy),
        signal: branch(Branch::Signal),
        max_virtualization_residual: round_sig(summary.max_virtualization_residual),
        max_attenuation_residual: round_sig(summary.max_attenuation_residual),
        max_beam_splitter_residual: round_sig(summary.max_beam_splitter_residual),
        within_bounds: summary.within_bounds,
    };
    Ok((report, pulses))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub schema: &'static str,
    pub mu: f64,
    pub mu_prime: f64,
    pub two_intensity: bool,
    pub finite_size: bool,
    pub s0: f64,
    pub s1_lower: f64,
    pub s_c_implied: f64,
    pub e1_upper: f64,
    pub rate: f64,
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        to_pretty_json(self)
    }
}

pub fn parse_rates(path: &str, text: &str) -> Result<ObservedRates, CliError> {
    let rates: ObservedRates =
        serde_json::from_str(text).map_err(|e| CliError::MalformedInput {
            path: path.to_string(),
            message: e.to_string(),
        })?;
    rates.validate().map_err(|e| CliError::MalformedInput {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    Ok(rates)
}

/// Yield bounds and key rate from observed rates, using the scenario's
/// assumed intensities, detector and sifting factor. With `--finite-size`
/// the scenario's `n_sigma` is applied to the counts in the rates file.
pub fn estimate(
    rates: &ObservedRates,
    config: &ScenarioConfig,
    flags: EstimateFlags,
) -> Result<EstimateReport, CliError> {
    config.validate()?;
    let mut warnings = rates.warnings();
    let working = if flags.finite_size {
        let n_sigma = config
            .finite_size
            .map_or(5.0, |fs: FiniteSizeModel| fs.n_sigma);
        apply_finite_size(rates, n_sigma).map_err(|e| CliError::from_core("finite-size", e))?
    } else {
        *rates
    };
    let (mu, mu_prime) = (config.protocol.mu, config.protocol.mu_prime);
    let bounds = bound_yields(mu, mu_prime, &working, flags.vacuum())
        .map_err(|e| CliError::from_core("yield bounds", e))?;
    let single_photon_gain = mu_prime * (-mu_prime).exp() * bounds.s1_lower;
    let single_photon_error = if bounds.s1_lower > 0.0 {
        bounds.e1_upper
    } else {
        warnings.push("single-photon yield bound is zero; no key".to_string());
        VACUUM_ERROR_RATE
    };
    let rate = gllp_rate(
        working.s_mu_prime,
        working.e_mu_prime,
        single_photon_gain,
        single_photon_error,
        config.detector.ec_inefficiency,
        config.protocol.sifting,
    );
    Ok(EstimateReport {
        schema: "loose-decoy/estimate/v1",
        mu: round_sig(mu),
        mu_prime: round_sig(mu_prime),
        two_intensity: flags.two_intensity,
        finite_size: flags.finite_size,
        s0: round_sig(bounds.s0),
        s1_lower: round_sig(bounds.s1_lower),
        s_c_implied: round_sig(bounds.s_c_implied),
        e1_upper: round_sig(bounds.e1_upper),
        rate: round_sig(rate),
        residual: round_sig(bounds.back_substitution_residual(mu, working.s_mu)),
        warnings,
    })
}
