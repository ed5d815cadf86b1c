//! Closed-form pairwise error probabilities, BER union bounds, the
//! high-power error floor, the throughput lower bound, and the analytic
//! gradients consumed by the design algorithms.
//!
//! The pairwise quadratic `γ_mn` weighs the (channel-scaled) symbol
//! difference against the I/Q noise statistics; the pairwise error
//! probability is `Q(β ln(p_m/p_n) + 1/(2β))` with
//! `β = sqrt(1−ρ²)/sqrt(αγ)`. The bound sums prior-weighted pairwise terms
//! in fixed lexicographic order so results are bit-reproducible.

use crate::constellation::{Constellation, ShapingParams};
use crate::error::{Error, Result};
use crate::noise::{ChannelState, DistortionProfile, IqStats};
use num_complex::Complex64;

/// Priors at or below this are treated as unsupported symbols: they are
/// never transmitted, the MAP metric assigns them −∞, and pairwise terms
/// involving them are excluded from bounds and gradients.
pub const ZERO_PRIOR_TOL: f64 = 1e-12;

/// Shaping translation this close to 1 makes `ζ/sqrt(1−ζ²)` blow up and is
/// rejected by the shaping gradient.
pub const ZETA_DOMAIN_TOL: f64 = 1e-9;

/// Gaussian tail probability `Q(x) = erfc(x/sqrt(2))/2`.
pub fn qfunc(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Pairwise geometry between two symbols under given noise statistics:
/// the channel-scaled difference `ξ`, the quadratic `γ`, and `β`.
#[derive(Debug, Clone, Copy)]
pub struct PairGeometry {
    pub xi: Complex64,
    pub gamma: f64,
    pub beta: f64,
}

impl PairGeometry {
    pub fn new(
        d: Complex64,
        stats: &IqStats,
        ch: &ChannelState,
        shaping: Option<&ShapingParams>,
    ) -> Result<Self> {
        let xi = ch.g * d;
        let gamma = gamma_mn(d, stats, ch, shaping)?;
        if gamma <= 0.0 {
            return Err(Error::DegeneratePair(format!(
                "gamma = {gamma} for difference {d}"
            )));
        }
        let omr2 = 1.0 - stats.rho * stats.rho;
        Ok(Self {
            xi,
            gamma,
            beta: omr2.sqrt() / (ch.alpha * gamma).sqrt(),
        })
    }
}

/// Quadratic form `γ_mn` of a symbol difference `d` against the noise
/// statistics, optionally routed through the shaping transform
/// `x' = A(ζ)R(θ)x` applied to the real-composite of `ξ = g·d`. Without
/// shaping (or with the identity transform) this is
/// `ξ_I²/σ_I² + ξ_Q²/σ_Q² − 2ρ ξ_I ξ_Q/(σ_I σ_Q)`.
pub fn gamma_mn(
    d: Complex64,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
) -> Result<f64> {
    stats.guard_nonsingular()?;
    let xi = ch.g * d;
    let u = match shaping {
        Some(s) => s.map(xi),
        None => xi,
    };
    let si = stats.sigma_i2.sqrt();
    let sq = stats.sigma_q2.sqrt();
    let gamma = u.re * u.re / stats.sigma_i2 + u.im * u.im / stats.sigma_q2
        - 2.0 * stats.rho * u.re * u.im / (si * sq);
    Ok(gamma.max(0.0))
}

/// Pairwise error probability of deciding `n` when `m` was sent, ignoring
/// all other symbols.
pub fn pep(p_m: f64, p_n: f64, gamma: f64, rho: f64, alpha: f64) -> Result<f64> {
    if p_m <= 0.0 || p_n <= 0.0 {
        return Err(Error::DegeneratePair(format!(
            "pairwise error probability needs positive priors, got ({p_m}, {p_n})"
        )));
    }
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::DegeneratePair(format!("gamma must be > 0, got {gamma}")));
    }
    let omr2 = 1.0 - rho * rho;
    let ag = alpha * gamma;
    Ok(qfunc(
        (2.0 * omr2 * (p_m / p_n).ln() + ag) / (2.0 * (omr2 * ag).sqrt()),
    ))
}

/// Internal slice-level bound evaluation shared with the optimizers.
/// `bits` is `log2` of the *full* constellation order, which stays the
/// normalization even when the supported subset is smaller.
pub(crate) fn bound_over(
    symbols: &[Complex64],
    priors: &[f64],
    bits: f64,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
) -> Result<f64> {
    stats.guard_nonsingular()?;
    let omr2 = 1.0 - stats.rho * stats.rho;
    let mut acc = 0.0;
    for m in 0..symbols.len() {
        if priors[m] <= ZERO_PRIOR_TOL {
            continue;
        }
        for n in 0..symbols.len() {
            if n == m || priors[n] <= ZERO_PRIOR_TOL {
                continue;
            }
            let gamma = gamma_mn(symbols[m] - symbols[n], stats, ch, shaping)?;
            if gamma <= 0.0 {
                return Err(Error::DegeneratePair(format!(
                    "coincident symbols {m} and {n}"
                )));
            }
            let ag = ch.alpha * gamma;
            acc += priors[m]
                * qfunc((2.0 * omr2 * (priors[m] / priors[n]).ln() + ag) / (2.0 * (omr2 * ag).sqrt()));
        }
    }
    Ok(acc / bits)
}

/// Union bound on bit error rate under gray mapping: the prior-weighted sum
/// of pairwise error probabilities over supported symbol pairs, divided by
/// the bits per symbol. Not clamped to [0, 1]; designs need the raw value.
pub fn ber_upper_bound(
    c: &Constellation,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
) -> Result<f64> {
    if c.support(ZERO_PRIOR_TOL).len() < 2 {
        return Err(Error::InvalidPriors(
            "bound needs at least two supported symbols".into(),
        ));
    }
    bound_over(
        c.symbols(),
        c.priors(),
        c.bits_per_symbol() as f64,
        stats,
        ch,
        shaping,
    )
}

/// High-power limit of the BER bound under nonzero distortion: the error
/// floor. Independent of transmit power and the AWGN floor; zero for ideal
/// hardware by convention.
pub fn error_floor(c: &Constellation, profile: &DistortionProfile, g: Complex64) -> Result<f64> {
    let eta = profile.compose()?;
    let kappa = eta.variance();
    if kappa == 0.0 {
        return Ok(0.0);
    }
    let g2k = g * g * eta.pseudo_variance();
    let gk = g.norm_sqr() * kappa;
    let a_i = gk + g2k.re;
    let a_q = gk - g2k.re;
    let denom = a_i * a_q;
    if a_i <= 0.0 || a_q <= 0.0 || denom <= 0.0 {
        return Err(Error::SingularStatistics(
            "distortion is maximally improper; the floor expression degenerates".into(),
        ));
    }
    let upsilon = 1.0 - g2k.im * g2k.im / denom;
    if upsilon <= 0.0 {
        return Err(Error::SingularStatistics(
            "distortion correlation at the unit boundary".into(),
        ));
    }
    let priors = c.priors();
    let symbols = c.symbols();
    let mut acc = 0.0;
    for m in 0..symbols.len() {
        if priors[m] <= ZERO_PRIOR_TOL {
            continue;
        }
        for n in 0..symbols.len() {
            if n == m || priors[n] <= ZERO_PRIOR_TOL {
                continue;
            }
            let xi = g * (symbols[m] - symbols[n]);
            // alpha*gamma in the alpha -> infinity limit
            let ag = 2.0 * xi.re * xi.re / a_i + 2.0 * xi.im * xi.im / a_q
                - 4.0 * xi.re * xi.im * g2k.im / denom;
            if ag <= 0.0 {
                return Err(Error::DegeneratePair(format!(
                    "degenerate limiting pair ({m}, {n})"
                )));
            }
            acc += priors[m]
                * qfunc(
                    (2.0 * upsilon * (priors[m] / priors[n]).ln() + ag)
                        / (2.0 * (upsilon * ag).sqrt()),
                );
        }
    }
    Ok(acc / c.bits_per_symbol() as f64)
}

/// Throughput lower bound `(1 − min(P_b^UB, 1))·H(p)` in bits per symbol.
pub fn throughput_lower_bound(
    c: &Constellation,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
) -> Result<f64> {
    let bound = ber_upper_bound(c, stats, ch, shaping)?.min(1.0);
    Ok((1.0 - bound) * c.entropy())
}

/// Slice-level gradient of the bound with respect to each prior; shared
/// with the design loop, which evaluates it on support-restricted views.
pub(crate) fn grad_priors_over(
    symbols: &[Complex64],
    priors: &[f64],
    bits: f64,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
) -> Result<Vec<f64>> {
    stats.guard_nonsingular()?;
    if priors.iter().any(|&p| p <= 0.0) {
        return Err(Error::InvalidPriors(
            "prior gradient requires strictly positive priors".into(),
        ));
    }
    let m_len = symbols.len();
    let omr2 = 1.0 - stats.rho * stats.rho;
    // Cache beta and omega per ordered pair.
    let mut beta = vec![0.0; m_len * m_len];
    let mut omega = vec![0.0; m_len * m_len];
    for m in 0..m_len {
        for n in 0..m_len {
            if n == m {
                continue;
            }
            let gamma = gamma_mn(symbols[m] - symbols[n], stats, ch, shaping)?;
            if gamma <= 0.0 {
                return Err(Error::DegeneratePair(format!(
                    "coincident symbols {m} and {n}"
                )));
            }
            let b = omr2.sqrt() / (ch.alpha * gamma).sqrt();
            beta[m * m_len + n] = b;
            omega[m * m_len + n] = b * (priors[m] / priors[n]).ln() + 0.5 / b;
        }
    }
    let mut grad = vec![0.0; m_len];
    for t in 0..m_len {
        let mut acc = 0.0;
        for n in 0..m_len {
            if n == t {
                continue;
            }
            let (b, om) = (beta[t * m_len + n], omega[t * m_len + n]);
            acc += qfunc(om) - b * phi(om);
        }
        for m in 0..m_len {
            if m == t {
                continue;
            }
            let (b, om) = (beta[m * m_len + t], omega[m * m_len + t]);
            acc += b * priors[m] / priors[t] * phi(om);
        }
        grad[t] = acc / bits;
    }
    Ok(grad)
}

/// Gradient of the BER bound with respect to the prior vector, evaluated
/// coordinate-wise from the closed form of the bound.
pub fn grad_ber_wrt_priors(
    c: &Constellation,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
) -> Result<Vec<f64>> {
    grad_priors_over(
        c.symbols(),
        c.priors(),
        c.bits_per_symbol() as f64,
        stats,
        ch,
        shaping,
    )
}

/// Gradient of the BER bound with respect to the shaping parameters
/// `(ζ, θ)` at fixed priors.
pub fn grad_ber_wrt_shaping(
    c: &Constellation,
    stats: &IqStats,
    ch: &ChannelState,
    s: &ShapingParams,
) -> Result<(f64, f64)> {
    grad_shaping_over(
        c.symbols(),
        c.priors(),
        c.bits_per_symbol() as f64,
        stats,
        ch,
        s,
    )
}

pub(crate) fn grad_shaping_over(
    symbols: &[Complex64],
    priors: &[f64],
    bits: f64,
    stats: &IqStats,
    ch: &ChannelState,
    s: &ShapingParams,
) -> Result<(f64, f64)> {
    stats.guard_nonsingular()?;
    if s.zeta >= 1.0 - ZETA_DOMAIN_TOL {
        return Err(Error::InvalidShaping(format!(
            "shaping gradient undefined at zeta = {} (zeta/sqrt(1-zeta^2) diverges)",
            s.zeta
        )));
    }
    let omr2 = 1.0 - stats.rho * stats.rho;
    let si = stats.sigma_i2.sqrt();
    let sq = stats.sigma_q2.sqrt();
    let (sin, cos) = s.theta.sin_cos();
    let zeta_pull = s.zeta / (1.0 - s.zeta * s.zeta).sqrt();
    let sqrt_omz2 = (1.0 - s.zeta * s.zeta).sqrt();
    let (mut d_zeta, mut d_theta) = (0.0, 0.0);
    for m in 0..symbols.len() {
        if priors[m] <= ZERO_PRIOR_TOL {
            continue;
        }
        for n in 0..symbols.len() {
            if n == m || priors[n] <= ZERO_PRIOR_TOL {
                continue;
            }
            let xi = ch.g * (symbols[m] - symbols[n]);
            let gamma = gamma_mn(symbols[m] - symbols[n], stats, ch, Some(s))?;
            if gamma <= 0.0 {
                return Err(Error::DegeneratePair(format!(
                    "coincident symbols {m} and {n}"
                )));
            }
            let beta = omr2.sqrt() / (ch.alpha * gamma).sqrt();
            let lnr = (priors[m] / priors[n]).ln();
            let omega = beta * lnr + 0.5 / beta;
            // Common pairwise factor of both partial derivatives.
            let delta = priors[m] * gamma.powf(-1.5) / (2.0 * (2.0 * std::f64::consts::PI).sqrt())
                * (omr2 / ch.alpha).sqrt()
                * (-0.5 * omega * omega).exp()
                * (lnr - 0.5 / (beta * beta));
            // Rotated (but untranslated) difference components.
            let ri = xi.re * cos - xi.im * sin;
            let rq = xi.re * sin + xi.im * cos;
            let dg_dzeta = ri * ri / stats.sigma_i2 - rq * rq / stats.sigma_q2
                + 2.0 * stats.rho * ri * rq / (si * sq) * zeta_pull;
            let dg_dtheta = -2.0 * (1.0 + s.zeta) / stats.sigma_i2 * ri * rq
                + 2.0 * (1.0 - s.zeta) / stats.sigma_q2 * rq * ri
                - 2.0 * stats.rho / (si * sq) * sqrt_omz2 * (ri * ri - rq * rq);
            d_zeta += delta * dg_dzeta;
            d_theta += delta * dg_dtheta;
        }
    }
    Ok((d_zeta / bits, d_theta / bits))
}
