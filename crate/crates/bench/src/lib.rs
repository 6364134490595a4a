//! Shared fixtures for the criterion benchmarks.

use loose_decoy::source_sim::{BranchProbabilities, FluctuationShape};
use loose_decoy::{ChannelModel, DetectorParams, ProtocolSpec, SourceConfig};

pub fn default_detector() -> DetectorParams {
    DetectorParams::gys_like()
}

pub fn channel_at(distance_km: f64) -> ChannelModel {
    ChannelModel::gys_like(distance_km).expect("valid distance")
}

pub fn loose_spec(lambda: f64) -> ProtocolSpec {
    ProtocolSpec::loose(0.1, 0.5, lambda, 0.5).expect("valid spec")
}

pub fn source_config(pulses: u64) -> SourceConfig {
    let probs = BranchProbabilities {
        vacuum: 0.1,
        decoy: 0.3,
        signal: 0.6,
    };
    SourceConfig::with_default_father(
        0.1 / 1.05,
        0.5 / 1.05,
        0.05,
        FluctuationShape::Uniform,
        probs,
        pulses,
    )
    .expect("valid source config")
}
