//! Photon-number statistics of phase-randomized weak coherent pulses.

use crate::{Error, Result};

/// Default truncation order for explicit photon-number distributions.
pub const DEFAULT_TRUNCATION_ORDER: usize = 40;

fn check_mean(mean: f64) -> Result<()> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::Domain(format!(
            "mean photon number must be finite and nonnegative, got {mean}"
        )));
    }
    Ok(())
}

/// `ln(n!)`, summed directly. Exact enough for the `n` this crate needs and
/// free of the overflow a direct factorial would hit.
fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

/// Probability that a coherent pulse of mean photon number `mean` carries
/// exactly `n` photons, `e^-mean * mean^n / n!`, evaluated in log space.
pub fn poisson_pmf(mean: f64, n: u32) -> Result<f64> {
    check_mean(mean)?;
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let log_p = -mean + f64::from(n) * mean.ln() - ln_factorial(n);
    Ok(log_p.exp())
}

/// Probability mass of the multi-photon (`n >= 2`) part of a coherent pulse,
/// `c = 1 - e^-mean - mean * e^-mean`.
pub fn multi_photon_mass(mean: f64) -> Result<f64> {
    check_mean(mean)?;
    // -expm1 keeps precision for small means where 1 - e^-mean cancels.
    let c = -(-mean).exp_m1() - mean * (-mean).exp();
    Ok(c.max(0.0))
}

/// Truncated Poisson photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonNumberDistribution {
    mean_photon_number: f64,
    truncation_order: usize,
}

impl PhotonNumberDistribution {
    pub fn new(mean_photon_number: f64, truncation_order: usize) -> Result<Self> {
        check_mean(mean_photon_number)?;
        if truncation_order < 2 {
            return Err(Error::Domain(format!(
                "truncation order must be at least 2, got {truncation_order}"
            )));
        }
        Ok(Self {
            mean_photon_number,
            truncation_order,
        })
    }

    pub fn with_default_truncation(mean_photon_number: f64) -> Result<Self> {
        Self::new(mean_photon_number, DEFAULT_TRUNCATION_ORDER)
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.mean_photon_number
    }

    pub fn truncation_order(&self) -> usize {
        self.truncation_order
    }

    pub fn probability(&self, n: u32) -> f64 {
        poisson_pmf(self.mean_photon_number, n).expect("mean validated at construction")
    }

    /// Probabilities for `n = 0..=truncation_order`.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..=self.truncation_order as u32)
            .map(|n| self.probability(n))
            .collect()
    }

    /// Probability of more than `truncation_order` photons.
    ///
    /// Summed term by term beyond the truncation point rather than taken as
    /// `1 - sum`, so that it is an independent check on normalization.
    pub fn tail_mass(&self) -> f64 {
        let mut tail = 0.0;
        let mut n = self.truncation_order as u32 + 1;
        loop {
            let p = self.probability(n);
            tail += p;
            // Past the mode, terms shrink geometrically.
            if f64::from(n) > self.mean_photon_number && p <= tail * f64::EPSILON * 1e-3 {
                break;
            }
            n += 1;
        }
        tail
    }

    pub fn multi_photon_mass(&self) -> f64 {
        multi_photon_mass(self.mean_photon_number).expect("mean validated at construction")
    }
}
