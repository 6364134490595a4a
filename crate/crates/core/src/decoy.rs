//! Single-photon yield bounds from vacuum, decoy (`mu`) and signal (`mu'`)
//! counting rates.
//!
//! The unknowns are the vacuum yield `s0`, the single-photon yield `s1` and
//! the multi-photon yield `s_c` (normalized so that `c * s_c` is the
//! multi-photon share of the decoy counting rate, `c = 1 - e^-mu - mu e^-mu`).
//! They satisfy
//!
//! ```text
//! e^-mu  s0 + mu  e^-mu  s1 +                         c s_c  = S_mu
//! e^-mu' s0 + mu' e^-mu' s1 + (mu'/mu)^2 e^(mu-mu') c s_c <= S_mu'
//! ```
//!
//! The second line uses the same `c * s_c` as the first: every `n >= 2` term
//! of the signal pulses is at least `(mu'/mu)^2 e^(mu-mu')` times the matching
//! decoy term. Eliminating `c * s_c` gives the closed-form minimum of `s1`,
//! see [`solve_s1_lower`].

use serde::{Deserialize, Serialize};

use crate::photonics::{multi_photon_mass, poisson_pmf};
use crate::{Error, Result, VACUUM_ERROR_RATE};

/// Observed statistics of a decoy-state run. Counts are stored as `f64` so
/// that large pulse numbers such as `1e9` can be written naturally in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedRates {
    pub s_mu: f64,
    pub s_mu_prime: f64,
    pub e_mu: f64,
    pub e_mu_prime: f64,
    pub s_vac: f64,
    pub n_mu: f64,
    pub n_mu_prime: f64,
    pub n_vac: f64,
}

impl ObservedRates {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("s_mu", self.s_mu),
            ("s_mu_prime", self.s_mu_prime),
            ("e_mu", self.e_mu),
            ("e_mu_prime", self.e_mu_prime),
            ("s_vac", self.s_vac),
        ];
        for (name, value) in rates {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Domain(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        let counts = [
            ("n_mu", self.n_mu),
            ("n_mu_prime", self.n_mu_prime),
            ("n_vac", self.n_vac),
        ];
        for (name, value) in counts {
            // Infinite counts stand for the asymptotic limit.
            if !(value >= 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be nonnegative, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Non-fatal oddities in the data. An honest linear channel always counts
    /// signal pulses at least as often as decoy pulses.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.s_mu_prime < self.s_mu {
            out.push(format!(
                "signal counting rate {} is below decoy counting rate {}",
                self.s_mu_prime, self.s_mu
            ));
        }
        out
    }
}

/// How the vacuum yield `s0` enters the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VacuumTreatment {
    /// `s0` is the counting rate of the vacuum pulses.
    #[default]
    Observed,
    /// No vacuum pulses; `s0 = 0`, the pessimistic choice for the key rate.
    TwoIntensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldBounds {
    pub s0: f64,
    pub s1_lower: f64,
    /// Multi-photon yield implied by the decoy equation at `s1_lower`.
    pub s_c_implied: f64,
    /// Upper bound on the single-photon error rate; `0.5` when `s1_lower` is
    /// zero, since nothing is known about single photons then.
    pub e1_upper: f64,
}

impl YieldBounds {
    /// Absolute residual of the decoy equation at these yields.
    pub fn back_substitution_residual(&self, mu: f64, s_mu: f64) -> f64 {
        let e = (-mu).exp();
        let c = multi_photon_mass(mu).unwrap_or(0.0);
        (e * self.s0 + mu * e * self.s1_lower + c * self.s_c_implied - s_mu).abs()
    }
}

/// Vacuum yield as observed on the vacuum pulses.
pub fn vacuum_yield(rates: &ObservedRates) -> Result<f64> {
    if !(rates.n_vac > 0.0) {
        return Err(Error::MissingVacuumData);
    }
    if !(0.0..=1.0).contains(&rates.s_vac) {
        return Err(Error::Domain(format!(
            "s_vac must lie in [0, 1], got {}",
            rates.s_vac
        )));
    }
    Ok(rates.s_vac)
}

pub fn vacuum_term(rates: &ObservedRates, treatment: VacuumTreatment) -> Result<f64> {
    match treatment {
        VacuumTreatment::Observed => vacuum_yield(rates),
        VacuumTreatment::TwoIntensity => Ok(0.0),
    }
}

fn check_intensities(mu: f64, mu_prime: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() || !mu_prime.is_finite() {
        return Err(Error::Domain(format!(
            "intensities must be positive and finite, got mu = {mu}, mu' = {mu_prime}"
        )));
    }
    if mu >= mu_prime {
        return Err(Error::IntensityOrdering { mu, mu_prime });
    }
    Ok(())
}

fn check_rate(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Domain(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(())
}

/// `c * s_c` implied by the decoy equation for a given `s1`.
fn multi_photon_share(mu: f64, s_mu: f64, s0: f64, s1: f64) -> f64 {
    let e = (-mu).exp();
    s_mu - e * s0 - mu * e * s1
}

/// Multi-photon yield `s_c` implied by the decoy equation for a given `s1`.
pub fn implied_multi_photon_yield(mu: f64, s_mu: f64, s0: f64, s1: f64) -> Result<f64> {
    let c = multi_photon_mass(mu)?;
    if c == 0.0 {
        return Err(Error::Domain(format!(
            "multi-photon mass vanishes at mu = {mu}"
        )));
    }
    Ok(multi_photon_share(mu, s_mu, s0, s1) / c)
}

/// Minimum single-photon yield consistent with the decoy equation and the
/// signal inequality:
///
/// ```text
/// s1 >= [mu'^2 e^mu S_mu - mu^2 e^mu' S_mu' - (mu'^2 - mu^2) s0] / (mu mu' (mu' - mu))
/// ```
///
/// clamped at zero. Fails with [`Error::Infeasible`] when the implied
/// multi-photon yield at the returned point is negative, or the bound
/// exceeds one.
pub fn solve_s1_lower(mu: f64, mu_prime: f64, s_mu: f64, s_mu_prime: f64, s0: f64) -> Result<f64> {
    check_intensities(mu, mu_prime)?;
    check_rate("S_mu", s_mu)?;
    check_rate("S_mu'", s_mu_prime)?;
    check_rate("s0", s0)?;

    let mu2 = mu * mu;
    let mu_prime2 = mu_prime * mu_prime;
    let numerator =
        mu_prime2 * mu.exp() * s_mu - mu2 * mu_prime.exp() * s_mu_prime - (mu_prime2 - mu2) * s0;
    let denominator = mu * mu_prime * (mu_prime - mu);
    let s1 = (numerator / denominator).max(0.0);

    if s1 > 1.0 {
        return Err(Error::Infeasible {
            violation: s1 - 1.0,
        });
    }
    let share = multi_photon_share(mu, s_mu, s0, s1);
    let tolerance = 1e-12 * s_mu.max(s0);
    if share < -tolerance {
        return Err(Error::Infeasible { violation: -share });
    }
    Ok(s1)
}

/// Independent check on [`solve_s1_lower`]: scans `s1 = 0, step, 2 step, ...`
/// and returns the first grid point where the implied multi-photon yield is
/// nonnegative and the signal inequality holds.
///
/// Works directly on the two constraints with Poisson weights from
/// [`poisson_pmf`]; it never uses the eliminated closed form.
pub fn brute_force_s1_oracle(
    mu: f64,
    mu_prime: f64,
    s_mu: f64,
    s_mu_prime: f64,
    s0: f64,
    grid_step: f64,
) -> Result<f64> {
    check_intensities(mu, mu_prime)?;
    if !(grid_step > 0.0 && grid_step <= 1e-3) {
        return Err(Error::Domain(format!(
            "grid step must lie in (0, 1e-3], got {grid_step}"
        )));
    }
    let p0 = poisson_pmf(mu, 0)?;
    let p1 = poisson_pmf(mu, 1)?;
    let p0_prime = poisson_pmf(mu_prime, 0)?;
    let p1_prime = poisson_pmf(mu_prime, 1)?;
    let c = 1.0 - p0 - p1;
    let ratio = (mu_prime / mu).powi(2) * (mu - mu_prime).exp();
    let slack = 8.0 * f64::EPSILON;

    let steps = (1.0 / grid_step).floor() as u64;
    let mut violation = f64::INFINITY;
    for k in 0..=steps {
        let s1 = k as f64 * grid_step;
        let s_c = (s_mu - p0 * s0 - p1 * s1) / c;
        if s_c < -slack * s_mu.max(s0) / c {
            // s_c only decreases from here on.
            if k == 0 {
                violation = -s_c * c;
            }
            break;
        }
        let s_c = s_c.max(0.0);
        let lhs = p0_prime * s0 + p1_prime * s1 + ratio * c * s_c;
        if lhs <= s_mu_prime + slack * s_mu_prime.max(lhs) {
            return Ok(s1);
        }
        violation = lhs - s_mu_prime;
    }
    Err(Error::Infeasible { violation })
}

/// Upper bound on the single-photon error rate, from the decoy data:
/// `(E_mu S_mu - e^-mu s0 / 2) / (mu e^-mu s1_lower)`, clamped to `[0, 0.5]`.
pub fn estimate_e1_upper(mu: f64, s_mu: f64, e_mu: f64, s0: f64, s1_lower: f64) -> Result<f64> {
    if !(s1_lower > 0.0) {
        return Err(Error::NoSinglePhotonBound);
    }
    let e = (-mu).exp();
    let numerator = e_mu * s_mu - VACUUM_ERROR_RATE * e * s0;
    let e1 = numerator / (mu * e * s1_lower);
    Ok(e1.clamp(0.0, VACUUM_ERROR_RATE))
}

/// All bounds for one data set.
pub fn bound_yields(
    mu: f64,
    mu_prime: f64,
    rates: &ObservedRates,
    treatment: VacuumTreatment,
) -> Result<YieldBounds> {
    let s0 = vacuum_term(rates, treatment)?;
    let s1_lower = solve_s1_lower(mu, mu_prime, rates.s_mu, rates.s_mu_prime, s0)?;
    let s_c_implied = implied_multi_photon_yield(mu, rates.s_mu, s0, s1_lower)?.max(0.0);
    let e1_upper = match estimate_e1_upper(mu, rates.s_mu, rates.e_mu, s0, s1_lower) {
        Ok(e1) => e1,
        Err(Error::NoSinglePhotonBound) => VACUUM_ERROR_RATE,
        Err(other) => return Err(other),
    };
    Ok(YieldBounds {
        s0,
        s1_lower,
        s_c_implied,
        e1_upper,
    })
}

/// Gaussian model needs this many expected detections per data set.
pub const MIN_EXPECTED_COUNTS: f64 = 10.0;

/// Worst-case rates for the single-photon bound under statistical
/// fluctuation: `S_mu` is lowered and `S_mu'` raised by
/// `n_sigma * sqrt(S / N)` each, the direction in which the closed-form bound
/// decreases.
pub fn apply_finite_size(rates: &ObservedRates, n_sigma: f64) -> Result<ObservedRates> {
    rates.validate()?;
    if !(n_sigma >= 0.0) || !n_sigma.is_finite() {
        return Err(Error::Domain(format!(
            "n_sigma must be finite and nonnegative, got {n_sigma}"
        )));
    }
    let counts = [
        ("n_mu", rates.n_mu),
        ("n_mu_prime", rates.n_mu_prime),
        ("n_vac", rates.n_vac),
    ];
    for (name, n) in counts {
        if !(n > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {n}")));
        }
    }
    for (field, s, n) in [
        ("s_mu", rates.s_mu, rates.n_mu),
        ("s_mu_prime", rates.s_mu_prime, rates.n_mu_prime),
    ] {
        if n * s < MIN_EXPECTED_COUNTS {
            return Err(Error::InsufficientStatistics {
                field,
                expected_count: n * s,
            });
        }
    }
    let deviation = |s: f64, n: f64| n_sigma * (s / n).sqrt();
    Ok(ObservedRates {
        s_mu: (rates.s_mu - deviation(rates.s_mu, rates.n_mu)).clamp(0.0, 1.0),
        s_mu_prime: (rates.s_mu_prime + deviation(rates.s_mu_prime, rates.n_mu_prime))
            .clamp(0.0, 1.0),
        ..*rates
    })
}
