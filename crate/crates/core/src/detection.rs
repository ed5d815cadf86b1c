//! Optimal MAP symbol detection under improper Gaussian aggregate noise and
//! non-uniform priors.
//!
//! The decision statistic is `ln p_m + ln f(y | x_m, g)` with `f` the
//! correlated bivariate Gaussian likelihood; under uniform priors and proper
//! noise it reduces to minimum-Euclidean-distance detection.

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::noise::{ChannelState, IqStats};
use num_complex::Complex64;

/// Precomputed detector state: reference means `sqrt(α)·g·x_m`, log priors,
/// and the quadratic-form coefficients of the noise statistics.
#[derive(Debug, Clone)]
pub struct DetectorContext {
    means: Vec<Complex64>,
    log_priors: Vec<f64>,
    labels: Vec<u32>,
    bits: u32,
    stats: IqStats,
    channel: ChannelState,
    // Coefficients of the exponent quadratic, including the 1/(2(1-rho^2)) factor.
    qii: f64,
    qqq: f64,
    qiq: f64,
}

impl DetectorContext {
    /// Builds a detector for the given reference constellation (pass the
    /// shaped constellation to detect geometrically shaped symbols).
    pub fn new(constellation: &Constellation, stats: IqStats, channel: ChannelState) -> Result<Self> {
        stats.guard_nonsingular()?;
        channel.validate()?;
        if !constellation.priors().iter().any(|&p| p > 0.0) {
            return Err(Error::InvalidPriors(
                "all priors are zero; nothing can be detected".into(),
            ));
        }
        let scale = channel.alpha.sqrt() * channel.g;
        let means = constellation.symbols().iter().map(|&x| scale * x).collect();
        let log_priors = constellation
            .priors()
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        let omr2 = 1.0 - stats.rho * stats.rho;
        let si = stats.sigma_i2.sqrt();
        let sq = stats.sigma_q2.sqrt();
        Ok(Self {
            means,
            log_priors,
            labels: constellation.labels().to_vec(),
            bits: constellation.bits_per_symbol(),
            stats,
            channel,
            qii: 1.0 / (2.0 * omr2 * stats.sigma_i2),
            qqq: 1.0 / (2.0 * omr2 * stats.sigma_q2),
            qiq: -stats.rho / (omr2 * si * sq),
        })
    }

    pub fn stats(&self) -> &IqStats {
        &self.stats
    }

    pub fn channel(&self) -> &ChannelState {
        &self.channel
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    /// Log-domain MAP metric of symbol `m` for observation `y`, up to a
    /// constant shared by all symbols.
    pub fn metric(&self, m: usize, y: Complex64) -> f64 {
        let di = y.re - self.means[m].re;
        let dq = y.im - self.means[m].im;
        self.log_priors[m] - (self.qii * di * di + self.qqq * dq * dq + self.qiq * di * dq)
    }

    /// MAP decision: the symbol index maximizing prior times likelihood.
    /// Zero-prior symbols are never returned; ties break to the lowest index.
    pub fn map_detect(&self, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_metric = f64::NEG_INFINITY;
        for m in 0..self.means.len() {
            if self.log_priors[m] == f64::NEG_INFINITY {
                continue;
            }
            let metric = self.metric(m, y);
            if metric > best_metric {
                best_metric = metric;
                best = m;
            }
        }
        best
    }
}

/// Hamming distance between the labels of two symbol indices.
pub fn bit_errors(labels: &[u32], m_true: usize, m_hat: usize) -> u32 {
    (labels[m_true] ^ labels[m_hat]).count_ones()
}
