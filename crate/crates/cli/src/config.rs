//! Scenario configuration file.
//!
//! ```json
//! {
//!   "schema": "loose-decoy/scenario/v1",
//!   "protocol": { "mu": 0.1, "mu_prime": 0.5, "lambda": 1.05, "mode": "loose", "sifting": 0.5 },
//!   "channel": { "base_transmittance": 0.045, "half_distance_km": 15.0 },
//!   "detector": { "dark_count_rate": 1.7e-6, "misalignment_error": 0.033, "ec_inefficiency": 1.22 },
//!   "distances": { "start_km": 0.0, "stop_km": 150.0, "step_km": 5.0 },
//!   "source": { "fluctuation_bound": 0.05, "shape": "uniform", "pulse_count": 100000, "seed": 42,
//!               "branch_probabilities": { "vacuum": 0.1, "decoy": 0.3, "signal": 0.6 } },
//!   "finite_size": { "n_mu": 1e10, "n_mu_prime": 1e10, "n_vac": 1e10, "n_sigma": 5.0 }
//! }
//! ```
//!
//! `source` and `finite_size` are optional. `source.nominal_father_intensity`
//! defaults to ten times the summed output intensities.

use serde::{Deserialize, Serialize};

use loose_decoy::keyrate::FiniteSizeModel;
use loose_decoy::source_sim::{BranchProbabilities, FluctuationShape};
use loose_decoy::{ChannelModel, DetectorParams, ProtocolMode, ProtocolSpec, SourceConfig};

use crate::CliError;

pub const SCENARIO_SCHEMA: &str = "loose-decoy/scenario/v1";

/// Upper limit on the number of distance grid points.
pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub protocol: ProtocolBlock,
    pub channel: ChannelBlock,
    pub detector: DetectorParams,
    pub distances: DistanceGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite_size: Option<FiniteSizeModel>,
}

/// Intensities the estimates assume; the source emits them divided by
/// `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    pub mu: f64,
    pub mu_prime: f64,
    pub lambda: f64,
    pub mode: ProtocolMode,
    pub sifting: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    pub base_transmittance: f64,
    pub half_distance_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceGrid {
    pub start_km: f64,
    pub stop_km: f64,
    pub step_km: f64,
}

impl DistanceGrid {
    /// `start + i * step` for every `i` that stays within `stop`.
    pub fn points(&self) -> Vec<f64> {
        let span = (self.stop_km - self.start_km) / self.step_km;
        let last = (span + 1e-9).floor() as usize;
        (0..=last)
            .map(|i| self.start_km + i as f64 * self.step_km)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBlock {
    pub fluctuation_bound: f64,
    pub shape: FluctuationShape,
    pub pulse_count: u64,
    pub seed: u64,
    pub branch_probabilities: BranchProbabilities,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_father_intensity: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let det = DetectorParams::gys_like();
        Self {
            schema: SCENARIO_SCHEMA.to_string(),
            protocol: ProtocolBlock {
                mu: 0.1,
                mu_prime: 0.5,
                lambda: 1.05,
                mode: ProtocolMode::Loose,
                sifting: loose_decoy::keyrate::DEFAULT_SIFTING,
            },
            channel: ChannelBlock {
                base_transmittance: 0.045,
                half_distance_km: loose_decoy::channel::DEFAULT_HALF_DISTANCE_KM,
            },
            detector: det,
            distances: DistanceGrid {
                start_km: 0.0,
                stop_km: 150.0,
                step_km: 5.0,
            },
            source: Some(SourceBlock {
                fluctuation_bound: 0.05,
                shape: FluctuationShape::Uniform,
                pulse_count: 100_000,
                seed: 42,
                branch_probabilities: BranchProbabilities {
                    vacuum: 0.1,
                    decoy: 0.3,
                    signal: 0.6,
                },
                nominal_father_intensity: None,
            }),
            finite_size: Some(FiniteSizeModel {
                n_mu: 1e10,
                n_mu_prime: 1e10,
                n_vac: 1e10,
                n_sigma: 5.0,
            }),
        }
    }
}

fn field_error(path: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {err}"))
}

fn require(path: &str, ok: bool, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(field_error(path, what))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("cannot parse scenario: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    /// Checks every field, reporting the first violation with its path.
    pub fn validate(&self) -> Result<(), CliError> {
        require(
            "schema",
            self.schema == SCENARIO_SCHEMA,
            &format!("expected \"{SCENARIO_SCHEMA}\", got \"{}\"", self.schema),
        )?;

        let p = &self.protocol;
        require(
            "protocol.mu",
            p.mu > 0.0 && p.mu.is_finite(),
            "must be positive",
        )?;
        require(
            "protocol.mu_prime",
            p.mu_prime > p.mu && p.mu_prime.is_finite(),
            "must exceed protocol.mu",
        )?;
        require(
            "protocol.lambda",
            p.lambda >= 1.0 && p.lambda.is_finite(),
            "must be a finite ratio >= 1",
        )?;
        require(
            "protocol.lambda",
            p.mode == ProtocolMode::Loose || p.lambda == 1.0,
            "must be 1 in ideal mode",
        )?;
        require(
            "protocol.sifting",
            p.sifting > 0.0 && p.sifting <= 1.0,
            "must lie in (0, 1]",
        )?;

        ChannelModel::new(
            self.channel.base_transmittance,
            self.channel.half_distance_km,
            0.0,
        )
        .map_err(|e| field_error("channel", e))?;
        self.detector
            .validate()
            .map_err(|e| field_error("detector", e))?;

        let g = &self.distances;
        require(
            "distances.start_km",
            g.start_km >= 0.0 && g.start_km.is_finite(),
            "must be nonnegative",
        )?;
        require(
            "distances.stop_km",
            g.stop_km >= g.start_km && g.stop_km.is_finite(),
            "must not precede distances.start_km",
        )?;
        require("distances.step_km", g.step_km > 0.0, "must be positive")?;
        require(
            "distances",
            (g.stop_km - g.start_km) / g.step_km < MAX_GRID_POINTS as f64,
            "too many grid points",
        )?;

        if let Some(source) = &self.source {
            self.source_config_from(source)?
                .validate()
                .map_err(|e| field_error("source", e))?;
        }
        if let Some(fs) = &self.finite_size {
            for (path, n) in [
                ("finite_size.n_mu", fs.n_mu),
                ("finite_size.n_mu_prime", fs.n_mu_prime),
                ("finite_size.n_vac", fs.n_vac),
            ] {
                require(path, n > 0.0 && n.is_finite(), "must be a positive count")?;
            }
            require(
                "finite_size.n_sigma",
                fs.n_sigma >= 0.0 && fs.n_sigma.is_finite(),
                "must be nonnegative",
            )?;
        }
        Ok(())
    }

    pub fn protocol_spec(&self) -> ProtocolSpec {
        ProtocolSpec {
            assumed_mu: self.protocol.mu,
            assumed_mu_prime: self.protocol.mu_prime,
            lambda: self.protocol.lambda,
            mode: self.protocol.mode,
            sifting: self.protocol.sifting,
        }
    }

    /// Channel at zero distance.
    pub fn channel_template(&self) -> ChannelModel {
        ChannelModel {
            base_transmittance: self.channel.base_transmittance,
            half_distance_km: self.channel.half_distance_km,
            distance_km: 0.0,
        }
    }

    fn source_config_from(&self, source: &SourceBlock) -> Result<SourceConfig, CliError> {
        let (mu, mu_prime) = self.protocol_spec().actual_intensities();
        let nominal = source
            .nominal_father_intensity
            .unwrap_or(10.0 * (mu + mu_prime));
        Ok(SourceConfig {
            nominal_father_intensity: nominal,
            fluctuation_bound: source.fluctuation_bound,
            shape: source.shape,
            mu,
            mu_prime,
            branch_probabilities: source.branch_probabilities,
            pulse_count: source.pulse_count,
        })
    }

    /// Source model emitting the protocol's actual intensities, if the
    /// scenario has a source block.
    pub fn source_config(&self) -> Option<Result<SourceConfig, CliError>> {
        self.source.as_ref().map(|s| self.source_config_from(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn grid_points_include_both_ends() {
        let grid = DistanceGrid {
            start_km: 0.0,
            stop_km: 150.0,
            step_km: 5.0,
        };
        let points = grid.points();
        assert_eq!(points.len(), 31);
        assert_eq!(points[30], 150.0);
        let odd = DistanceGrid {
            start_km: 0.0,
            stop_km: 0.3,
            step_km: 0.1,
        };
        assert_eq!(odd.points().len(), 4);
    }

    #[test]
    fn validation_names_the_field() {
        let mut config = ScenarioConfig::default();
        config.protocol.mu_prime = 0.05;
        let msg = config.validate().unwrap_err().to_string();
        assert!(msg.contains("protocol.mu_prime"), "{msg}");

        let mut config = ScenarioConfig::default();
        config.detector.dark_count_rate = 0.5;
        assert!(config
            .validate()
            .unwrap_err()
            .to_string()
            .contains("detector"));

        let mut config = ScenarioConfig::default();
        config.protocol.mode = ProtocolMode::Ideal;
        assert!(config
            .validate()
            .unwrap_err()
            .to_string()
            .contains("protocol.lambda"));

        let mut config = ScenarioConfig::default();
        config.source.as_mut().unwrap().nominal_father_intensity = Some(0.1);
        assert!(config
            .validate()
            .unwrap_err()
            .to_string()
            .contains("source"));

        let config = ScenarioConfig {
            schema: "v0".into(),
            ..ScenarioConfig::default()
        };
        assert!(config
            .validate()
            .unwrap_err()
            .to_string()
            .contains("schema"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut value: serde_json::Value =
            serde_json::from_str(&ScenarioConfig::default().to_json()).unwrap();
        value["protocol"]["mu_typo"] = serde_json::json!(0.2);
        assert!(ScenarioConfig::from_json(&value.to_string()).is_err());
    }

    #[test]
    fn optional_blocks_may_be_omitted() {
        let config = ScenarioConfig {
            source: None,
            finite_size: None,
            ..ScenarioConfig::default()
        };
        let text = config.to_json();
        assert!(!text.contains("source"));
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), config);
    }

    proptest! {
        #[test]
        fn config_round_trips(
            mu in 0.01f64..0.4,
            gap in 0.01f64..0.8,
            lambda in 1.0f64..1.5,
            eta0 in 1e-3f64..1.0,
            d_b in 0.0f64..1e-3,
            seed in any::<u64>(),
            delta in 0.0f64..0.5,
        ) {
            let mut config = ScenarioConfig::default();
            config.protocol.mu = mu;
            config.protocol.mu_prime = mu + gap;
            config.protocol.lambda = lambda;
            config.channel.base_transmittance = eta0;
            config.detector.dark_count_rate = d_b;
            let source = config.source.as_mut().unwrap();
            source.seed = seed;
            source.fluctuation_bound = delta;
            let parsed = ScenarioConfig::from_json(&config.to_json()).unwrap();
            prop_assert_eq!(parsed, config);
        }
    }
}
