//! Monte Carlo model of a source whose father pulses fluctuate below a known
//! upper bound, followed by an exactly controlled two-value attenuator.
//!
//! Each pulse `t` starts from a father pulse of intensity `Omega_t` in
//! `[Omega (1 - delta), Omega_M]`, `Omega_M = Omega (1 + delta)`, and is
//! attenuated by `A(t)`, one of `0`, `mu / Omega` or `mu' / Omega`. The same
//! output is obtained from a constant father pulse `Omega_M`, the exact
//! attenuation `A(t)`, and then the uncontrolled factor `Omega_t / Omega_M`;
//! the intermediate intensity is then exactly `0`, `mu~ = mu lambda` or
//! `mu~' = mu' lambda` with `lambda = Omega_M / Omega`. [`virtualize`] builds
//! that decomposition for a concrete pulse.
//!
//! Intensities are classical means; photon-number sampling is left to the
//! detection model.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distribution of the father-pulse intensity within its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluctuationShape {
    /// Uniform on `[Omega (1 - delta), Omega (1 + delta)]`.
    #[default]
    Uniform,
    /// Gaussian around `Omega` with standard deviation `delta Omega / 2`,
    /// truncated to the same interval.
    TruncatedGaussian,
    /// Either endpoint with equal probability.
    TwoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchProbabilities {
    pub vacuum: f64,
    pub decoy: f64,
    pub signal: f64,
}

impl BranchProbabilities {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.vacuum, self.decoy, self.signal];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config(format!(
                "branch probabilities must lie in [0, 1], got {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "branch probabilities must sum to 1, got {total}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// `Omega`, the father-pulse intensity Alice aims for.
    pub nominal_father_intensity: f64,
    /// `delta`: father pulses stay within `Omega (1 +- delta)`.
    pub fluctuation_bound: f64,
    pub shape: FluctuationShape,
    /// Intended decoy intensity.
    pub mu: f64,
    /// Intended signal intensity.
    pub mu_prime: f64,
    pub branch_probabilities: BranchProbabilities,
    pub pulse_count: u64,
}

impl SourceConfig {
    /// Father pulses ten times brighter than the two output intensities
    /// combined.
    pub fn with_default_father(
        mu: f64,
        mu_prime: f64,
        fluctuation_bound: f64,
        shape: FluctuationShape,
        branch_probabilities: BranchProbabilities,
        pulse_count: u64,
    ) -> Result<Self> {
        let config = Self {
            nominal_father_intensity: 10.0 * (mu + mu_prime),
            fluctuation_bound,
            shape,
            mu,
            mu_prime,
            branch_probabilities,
            pulse_count,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.mu_prime > self.mu) || !self.mu_prime.is_finite() {
            return Err(Error::Config(format!(
                "intensities must satisfy 0 < mu < mu', got mu = {}, mu' = {}",
                self.mu, self.mu_prime
            )));
        }
        if !(self.fluctuation_bound >= 0.0 && self.fluctuation_bound < 1.0) {
            return Err(Error::Config(format!(
                "fluctuation bound must lie in [0, 1), got {}",
                self.fluctuation_bound
            )));
        }
        if !self.nominal_father_intensity.is_finite()
            || !(self.nominal_father_intensity >= self.mu + self.mu_prime)
        {
            return Err(Error::Config(format!(
                "father intensity {} is below mu + mu' = {}; attenuation factors would exceed 1",
                self.nominal_father_intensity,
                self.mu + self.mu_prime
            )));
        }
        if self.pulse_count == 0 {
            return Err(Error::Config("pulse count must be positive".to_string()));
        }
        self.branch_probabilities.validate()
    }

    /// `Omega_M = Omega (1 + delta)`.
    pub fn father_upper_bound(&self) -> f64 {
        self.nominal_father_intensity * (1.0 + self.fluctuation_bound)
    }

    pub fn father_lower_bound(&self) -> f64 {
        self.nominal_father_intensity * (1.0 - self.fluctuation_bound)
    }

    /// `lambda = Omega_M / Omega`.
    pub fn lambda(&self) -> f64 {
        self.father_upper_bound() / self.nominal_father_intensity
    }

    /// Intended output intensity of a branch.
    pub fn intended_intensity(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Vacuum => 0.0,
            Branch::Decoy => self.mu,
            Branch::Signal => self.mu_prime,
        }
    }

    /// `A(t)` for a branch.
    pub fn attenuation(&self, branch: Branch) -> f64 {
        self.intended_intensity(branch) / self.nominal_father_intensity
    }

    /// Intensity the branch is assumed to carry: `mu~ = mu Omega_M / Omega`
    /// and likewise for the signal. Evaluated as `intended * (Omega_M /
    /// Omega)` so that it dominates every emitted intensity bit for bit.
    pub fn assumed_intensity(&self, branch: Branch) -> f64 {
        self.intended_intensity(branch) * self.lambda()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Vacuum,
    Decoy,
    Signal,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Vacuum, Branch::Decoy, Branch::Signal];

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Vacuum => "vacuum",
            Branch::Decoy => "decoy",
            Branch::Signal => "signal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub index: u64,
    pub branch: Branch,
    /// `Omega_t`.
    pub father_intensity: f64,
    pub output_intensity: f64,
}

/// Virtual picture of one pulse: constant father pulse, exact attenuation,
/// then the uncontrolled factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualDecomposition {
    /// `Omega_M`.
    pub constant_father_intensity: f64,
    /// `0`, `mu~` or `mu~'`.
    pub exact_stage_intensity: f64,
    /// `A'(t) = Omega_t / Omega_M`.
    pub uncontrolled_factor: f64,
}

impl VirtualDecomposition {
    pub fn output_intensity(&self) -> f64 {
        self.exact_stage_intensity * self.uncontrolled_factor
    }
}

/// Random stream private to pulse `t`; the same pulse always sees the same
/// numbers, whatever order or thread it is generated in.
fn pulse_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn sample_father_intensity(config: &SourceConfig, rng: &mut ChaCha8Rng) -> f64 {
    let lo = config.father_lower_bound();
    let hi = config.father_upper_bound();
    if config.fluctuation_bound == 0.0 {
        return config.nominal_father_intensity;
    }
    let omega = match config.shape {
        FluctuationShape::Uniform => lo + rng.random::<f64>() * (hi - lo),
        FluctuationShape::TwoPoint => {
            if rng.random::<bool>() {
                hi
            } else {
                lo
            }
        }
        FluctuationShape::TruncatedGaussian => {
            let sigma = 0.5 * config.fluctuation_bound * config.nominal_father_intensity;
            let normal = Normal::new(config.nominal_father_intensity, sigma)
                .expect("sigma is positive and finite");
            // Acceptance is about 95%, so this loop is short.
            loop {
                let x = normal.sample(rng);
                if (lo..=hi).contains(&x) {
                    break x;
                }
            }
        }
    };
    omega.clamp(lo, hi)
}

fn choose_branch(probs: &BranchProbabilities, rng: &mut ChaCha8Rng) -> Branch {
    let u: f64 = rng.random();
    if u < probs.vacuum {
        Branch::Vacuum
    } else if u < probs.vacuum + probs.decoy {
        Branch::Decoy
    } else {
        Branch::Signal
    }
}

/// Pulse `index` of the train generated from `seed`.
pub fn generate_pulse(config: &SourceConfig, seed: u64, index: u64) -> PulseRecord {
    let mut rng = pulse_rng(seed, index);
    let branch = choose_branch(&config.branch_probabilities, &mut rng);
    let father_intensity = sample_father_intensity(config, &mut rng);
    // intended * (Omega_t / Omega) equals Omega_t * A(t) up to rounding, is
    // exactly the intended intensity when Omega_t = Omega, and never exceeds
    // the assumed intensity since Omega_t <= Omega_M.
    let output_intensity =
        config.intended_intensity(branch) * (father_intensity / config.nominal_father_intensity);
    PulseRecord {
        index,
        branch,
        father_intensity,
        output_intensity,
    }
}

pub fn generate_pulse_train(config: &SourceConfig, seed: u64) -> Result<Vec<PulseRecord>> {
    config.validate()?;
    Ok((0..config.pulse_count)
        .into_par_iter()
        .map(|t| generate_pulse(config, seed, t))
        .collect())
}

pub fn virtualize(pulse: &PulseRecord, config: &SourceConfig) -> VirtualDecomposition {
    let omega_max = config.father_upper_bound();
    VirtualDecomposition {
        constant_father_intensity: omega_max,
        exact_stage_intensity: config.assumed_intensity(pulse.branch),
        uncontrolled_factor: pulse.father_intensity / omega_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterArms {
    /// Transmitted arm, the decoy pulse.
    pub arm_b: f64,
    /// Reflected arm, the signal pulse.
    pub arm_b_prime: f64,
}

impl BeamSplitterArms {
    pub fn total(&self) -> f64 {
        self.arm_b + self.arm_b_prime
    }
}

/// Fixed attenuator `A0 = (mu + mu') / Omega` followed by a `mu : mu'`
/// beam splitter, fed with a father pulse of intensity `father_intensity`.
pub fn realize_attenuator_bs(
    father_intensity: f64,
    config: &SourceConfig,
) -> Result<BeamSplitterArms> {
    config.validate()?;
    if !(father_intensity >= 0.0) || !father_intensity.is_finite() {
        return Err(Error::Domain(format!(
            "father intensity must be finite and nonnegative, got {father_intensity}"
        )));
    }
    let total = config.mu + config.mu_prime;
    let after_fixed = father_intensity * (total / config.nominal_father_intensity);
    let transmissivity = config.mu / total;
    let arm_b = after_fixed * transmissivity;
    Ok(BeamSplitterArms {
        arm_b,
        arm_b_prime: after_fixed - arm_b,
    })
}

/// Output intensity of the beam-splitter realization for a pulse.
pub fn beam_splitter_output(pulse: &PulseRecord, config: &SourceConfig) -> Result<f64> {
    let arms = realize_attenuator_bs(pulse.father_intensity, config)?;
    Ok(match pulse.branch {
        Branch::Vacuum => 0.0,
        Branch::Decoy => arms.arm_b,
        Branch::Signal => arms.arm_b_prime,
    })
}

fn relative_residual(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchSummary {
    pub count: u64,
    pub mean_intensity: f64,
    pub max_intensity: f64,
    /// Assumed intensity, the bound every pulse of the branch must respect.
    pub assumed_intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub pulse_count: u64,
    pub lambda: f64,
    pub vacuum: BranchSummary,
    pub decoy: BranchSummary,
    pub signal: BranchSummary,
    /// Largest relative gap between the virtual-picture output and the pulse.
    pub max_virtualization_residual: f64,
    /// Largest relative gap between the `Omega_t A(t)` product and the pulse.
    pub max_attenuation_residual: f64,
    /// Largest absolute gap between the beam-splitter arm and `Omega_t A(t)`.
    pub max_beam_splitter_residual: f64,
    /// No pulse exceeds its branch's assumed intensity.
    pub within_bounds: bool,
}

impl SourceSummary {
    pub fn branch(&self, branch: Branch) -> &BranchSummary {
        match branch {
            Branch::Vacuum => &self.vacuum,
            Branch::Decoy => &self.decoy,
            Branch::Signal => &self.signal,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    counts: [u64; 3],
    /// Sum of `output - intended`; exactly zero without fluctuation.
    deviations: [f64; 3],
    maxima: [f64; 3],
    virtualization: f64,
    attenuation: f64,
    beam_splitter: f64,
    within_bounds: bool,
}

fn branch_slot(branch: Branch) -> usize {
    match branch {
        Branch::Vacuum => 0,
        Branch::Decoy => 1,
        Branch::Signal => 2,
    }
}

/// Per-branch statistics and the largest residuals of the three equivalent
/// descriptions of the source over a pulse train.
///
/// Sums run sequentially in pulse order so the result does not depend on the
/// thread count.
pub fn summarize(pulses: &[PulseRecord], config: &SourceConfig) -> Result<SourceSummary> {
    config.validate()?;
    let mut acc = Accumulator {
        within_bounds: true,
        ..Default::default()
    };
    for pulse in pulses {
        let slot = branch_slot(pulse.branch);
        acc.counts[slot] += 1;
        acc.deviations[slot] += pulse.output_intensity - config.intended_intensity(pulse.branch);
        acc.maxima[slot] = acc.maxima[slot].max(pulse.output_intensity);

        let virtual_out = virtualize(pulse, config).output_intensity();
        acc.virtualization = acc
            .virtualization
            .max(relative_residual(virtual_out, pulse.output_intensity));

        let direct = pulse.father_intensity * config.attenuation(pulse.branch);
        acc.attenuation = acc
            .attenuation
            .max(relative_residual(direct, pulse.output_intensity));

        let arm = beam_splitter_output(pulse, config)?;
        acc.beam_splitter = acc.beam_splitter.max((arm - direct).abs());

        if pulse.output_intensity > config.assumed_intensity(pulse.branch) {
            acc.within_bounds = false;
        }
    }
    let branch_summary = |branch: Branch| {
        let slot = branch_slot(branch);
        let count = acc.counts[slot];
        BranchSummary {
            count,
            mean_intensity: if count == 0 {
                0.0
            } else {
                config.intended_intensity(branch) + acc.deviations[slot] / count as f64
            },
            max_intensity: acc.maxima[slot],
            assumed_intensity: config.assumed_intensity(branch),
        }
    };
    Ok(SourceSummary {
        pulse_count: pulses.len() as u64,
        lambda: config.lambda(),
        vacuum: branch_summary(Branch::Vacuum),
        decoy: branch_summary(Branch::Decoy),
        signal: branch_summary(Branch::Signal),
        max_virtualization_residual: acc.virtualization,
        max_attenuation_residual: acc.attenuation,
        max_beam_splitter_residual: acc.beam_splitter,
        within_bounds: acc.within_bounds,
    })
}

/// Writes `t,branch,omega_t,intensity` rows, one per pulse, with shortest
/// round-trip formatting of the floats.
pub fn write_pulse_csv<W: Write>(pulses: &[PulseRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "t,branch,omega_t,intensity")?;
    for pulse in pulses {
        writeln!(
            out,
            "{},{},{:?},{:?}",
            pulse.index,
            pulse.branch.as_str(),
            pulse.father_intensity,
            pulse.output_intensity
        )?;
    }
    out.flush()
}
