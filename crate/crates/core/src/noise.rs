//! Improper complex-Gaussian statistics and the transceiver distortion model.
//!
//! Residual RF impairments at transmitter and receiver aggregate into a
//! zero-mean complex Gaussian whose pseudo-variance `E[z^2]` is nonzero, so
//! the I and Q noise components carry unequal power and are correlated.
//! This module holds the law itself ([`ImproperGaussian`]), the impairment
//! parameterization ([`DistortionProfile`]), and the aggregation of both
//! distortion stages plus thermal noise into a single received-noise law.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Detector-side guard: reject `|rho_z|` this close to 1.
pub const RHO_SINGULAR_TOL: f64 = 1e-9;
/// Detector-side guard: reject component variances at or below this.
pub const VARIANCE_SINGULAR_TOL: f64 = 1e-12;

/// Zero-mean complex Gaussian law described by variance `E[|z|^2]` and
/// pseudo-variance `E[z^2]`.
///
/// A zero pseudo-variance is the proper (circularly symmetric) case; the
/// magnitude of the pseudo-variance is bounded by the variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImproperGaussian {
    variance: f64,
    pseudo_variance: Complex64,
}

/// Real-composite second-order statistics of an improper law: the I and Q
/// component variances and their correlation coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqStats {
    pub sigma_i2: f64,
    pub sigma_q2: f64,
    pub rho: f64,
}

impl ImproperGaussian {
    /// Builds a law, rejecting negative variance or `|pseudo| > variance`
    /// (beyond a small floating-point allowance).
    pub fn new(variance: f64, pseudo_variance: Complex64) -> Result<Self> {
        if !variance.is_finite() || variance < 0.0 {
            return Err(Error::InfeasibleProfile(format!(
                "variance must be finite and nonnegative, got {variance}"
            )));
        }
        let mag = pseudo_variance.norm();
        if !mag.is_finite() || mag > variance * (1.0 + 1e-9) + 1e-15 {
            return Err(Error::InfeasibleProfile(format!(
                "|pseudo-variance| = {mag} exceeds variance = {variance}"
            )));
        }
        Ok(Self {
            variance,
            pseudo_variance,
        })
    }

    /// Proper (circularly symmetric) law of the given variance.
    pub fn proper(variance: f64) -> Result<Self> {
        Self::new(variance, Complex64::new(0.0, 0.0))
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn pseudo_variance(&self) -> Complex64 {
        self.pseudo_variance
    }

    /// Circularity coefficient `|pseudo| / variance` in [0, 1]:
    /// 0 is proper, 1 is maximally improper.
    pub fn circularity(&self) -> Result<f64> {
        if self.variance <= 0.0 {
            return Err(Error::ZeroVariance);
        }
        Ok(self.pseudo_variance.norm() / self.variance)
    }

    /// Splits the complex law into I/Q variances and their correlation.
    ///
    /// The variances are `(v ± Re ṽ)/2`; the correlation is
    /// `Im ṽ / sqrt(v² − (Re ṽ)²)`. When the denominator vanishes together
    /// with `Im ṽ` (a purely real pseudo-variance at the improperness
    /// boundary) the correlation is reported as 0; a nonzero `Im ṽ` there is
    /// a singular law and is rejected.
    pub fn iq_statistics(&self) -> Result<IqStats> {
        let v = self.variance;
        let re = self.pseudo_variance.re;
        let im = self.pseudo_variance.im;
        let sigma_i2 = ((v + re) / 2.0).max(0.0);
        let sigma_q2 = ((v - re) / 2.0).max(0.0);
        let denom2 = v * v - re * re;
        let rho = if denom2 <= f64::EPSILON * v * v {
            if im.abs() <= f64::EPSILON * v.max(1.0) {
                0.0
            } else {
                return Err(Error::SingularStatistics(format!(
                    "variance {v} equals |Re pseudo| = {} with Im pseudo = {im}",
                    re.abs()
                )));
            }
        } else {
            (im / denom2.sqrt()).clamp(-1.0, 1.0)
        };
        Ok(IqStats {
            sigma_i2,
            sigma_q2,
            rho,
        })
    }

    /// Bivariate real Gaussian density of the law centered at `mean`,
    /// evaluated at `y`.
    pub fn pdf(&self, mean: Complex64, y: Complex64) -> Result<f64> {
        let stats = self.iq_statistics()?;
        stats.guard_nonsingular()?;
        let di = y.re - mean.re;
        let dq = y.im - mean.im;
        let si = stats.sigma_i2.sqrt();
        let sq = stats.sigma_q2.sqrt();
        let omr2 = 1.0 - stats.rho * stats.rho;
        let quad = di * di / stats.sigma_i2 + dq * dq / stats.sigma_q2
            - 2.0 * stats.rho * di * dq / (si * sq);
        Ok((-quad / (2.0 * omr2)).exp() / (2.0 * std::f64::consts::PI * si * sq * omr2.sqrt()))
    }

    /// Precomputes the Cholesky-style factors used to draw samples.
    pub fn sampler(&self) -> Result<ImproperSampler> {
        let stats = self.iq_statistics()?;
        Ok(ImproperSampler::from_stats(&stats))
    }
}

impl IqStats {
    /// Rejects statistics unusable as detector or bound input: correlation
    /// at the ±1 boundary or a component variance collapsed relative to the
    /// other (absolute scale is arbitrary; only the imbalance is singular).
    pub fn guard_nonsingular(&self) -> Result<()> {
        let scale = self.sigma_i2.max(self.sigma_q2);
        if scale <= 0.0
            || self.sigma_i2 <= VARIANCE_SINGULAR_TOL * scale
            || self.sigma_q2 <= VARIANCE_SINGULAR_TOL * scale
        {
            return Err(Error::SingularStatistics(format!(
                "component variance collapsed (sigma_i2 = {}, sigma_q2 = {})",
                self.sigma_i2, self.sigma_q2
            )));
        }
        if self.rho.abs() >= 1.0 - RHO_SINGULAR_TOL {
            return Err(Error::SingularStatistics(format!(
                "|rho_z| = {} at the unit boundary",
                self.rho.abs()
            )));
        }
        Ok(())
    }

    /// Rebuilds (variance, pseudo-variance) from the component statistics.
    pub fn to_law(&self) -> Result<ImproperGaussian> {
        let v = self.sigma_i2 + self.sigma_q2;
        let re = self.sigma_i2 - self.sigma_q2;
        let im = 2.0 * self.rho * (self.sigma_i2 * self.sigma_q2).sqrt();
        ImproperGaussian::new(v, Complex64::new(re, im))
    }
}

/// Sampler for an improper Gaussian law; draws two independent standard
/// normals and correlates them.
#[derive(Debug, Clone, Copy)]
pub struct ImproperSampler {
    l11: f64,
    l21: f64,
    l22: f64,
}

impl ImproperSampler {
    fn from_stats(stats: &IqStats) -> Self {
        let si = stats.sigma_i2.sqrt();
        let sq = stats.sigma_q2.sqrt();
        Self {
            l11: si,
            l21: stats.rho * sq,
            l22: sq * (1.0 - stats.rho * stats.rho).max(0.0).sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let u1: f64 = rng.sample(StandardNormal);
        let u2: f64 = rng.sample(StandardNormal);
        Complex64::new(self.l11 * u1, self.l21 * u1 + self.l22 * u2)
    }
}

/// Transceiver impairment parameters, normalized to unit signal power.
///
/// `kappa_t` and `kappa_r` are the transmitter and receiver distortion
/// variances. The pseudo-variance of the distortion is built from the ratio
/// `Re(κ̃)/κ` and the I/Q correlation `rho_eta` of the distortion itself;
/// `sigma_w2` is the thermal (AWGN) floor at the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionProfile {
    pub kappa_t: f64,
    pub kappa_r: f64,
    pub kappa_tilde_i_ratio: f64,
    pub rho_eta: f64,
    pub sigma_w2: f64,
}

impl DistortionProfile {
    pub fn new(
        kappa_t: f64,
        kappa_r: f64,
        kappa_tilde_i_ratio: f64,
        rho_eta: f64,
        sigma_w2: f64,
    ) -> Result<Self> {
        let p = Self {
            kappa_t,
            kappa_r,
            kappa_tilde_i_ratio,
            rho_eta,
            sigma_w2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Ideal hardware with the given AWGN floor.
    pub fn ideal(sigma_w2: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 0.0, 0.0, sigma_w2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_t >= 0.0 && self.kappa_t.is_finite()) {
            return Err(Error::InfeasibleProfile(format!(
                "kappa_t must be >= 0, got {}",
                self.kappa_t
            )));
        }
        if !(self.kappa_r >= 0.0 && self.kappa_r.is_finite()) {
            return Err(Error::InfeasibleProfile(format!(
                "kappa_r must be >= 0, got {}",
                self.kappa_r
            )));
        }
        if !(0.0..=1.0).contains(&self.kappa_tilde_i_ratio) {
            return Err(Error::InfeasibleProfile(format!(
                "kappa_tilde_i_ratio must be in [0, 1], got {}",
                self.kappa_tilde_i_ratio
            )));
        }
        if !(self.rho_eta > -1.0 && self.rho_eta < 1.0) {
            return Err(Error::InfeasibleProfile(format!(
                "rho_eta must be in (-1, 1), got {}",
                self.rho_eta
            )));
        }
        if !(self.sigma_w2 > 0.0 && self.sigma_w2.is_finite()) {
            return Err(Error::InfeasibleProfile(format!(
                "sigma_w2 must be > 0, got {}",
                self.sigma_w2
            )));
        }
        Ok(())
    }

    /// Total distortion variance `κ = κ_t + κ_r`.
    pub fn kappa(&self) -> f64 {
        self.kappa_t + self.kappa_r
    }

    /// Pseudo-variance attached to a distortion stage of variance `kappa`:
    /// the real part is `ratio·κ` and the imaginary part solves the I/Q
    /// correlation relation `rho_eta = κ̃_Q / sqrt(κ² − κ̃_I²)` for the
    /// distortion alone.
    fn stage_pseudo(&self, kappa: f64) -> Complex64 {
        let re = self.kappa_tilde_i_ratio * kappa;
        let im = self.rho_eta * (kappa * kappa - re * re).max(0.0).sqrt();
        Complex64::new(re, im)
    }

    /// Law of the summed transmit + receive distortion `η`, at unit scale.
    pub fn compose(&self) -> Result<ImproperGaussian> {
        self.validate()?;
        let kappa = self.kappa();
        let pseudo = self.stage_pseudo(kappa);
        if pseudo.norm() > kappa * (1.0 + 1e-9) + 1e-15 {
            return Err(Error::InfeasibleProfile(format!(
                "|kappa_tilde| = {} exceeds kappa = {kappa}",
                pseudo.norm()
            )));
        }
        ImproperGaussian::new(kappa, pseudo)
    }

    /// Transmit-stage distortion law (`κ_t`, `κ̃_t`), at unit scale.
    pub fn tx_law(&self) -> Result<ImproperGaussian> {
        ImproperGaussian::new(self.kappa_t, self.stage_pseudo(self.kappa_t))
    }

    /// Receive-stage distortion law scaled by the channel: variance
    /// `α|g|²κ_r`, pseudo-variance `α g² κ̃_r`.
    pub fn rx_law(&self, ch: &ChannelState) -> Result<ImproperGaussian> {
        let scale = ch.alpha * ch.g.norm_sqr();
        let g2 = ch.g * ch.g;
        ImproperGaussian::new(
            scale * self.kappa_r,
            g2 * ch.alpha * self.stage_pseudo(self.kappa_r),
        )
    }

    /// Aggregate received-noise law conditioned on the channel:
    /// variance `α|g|²κ + σ_w²`, pseudo-variance `α g² κ̃`.
    pub fn aggregate(&self, ch: &ChannelState) -> Result<ImproperGaussian> {
        let eta = self.compose()?;
        ch.validate()?;
        let variance = ch.alpha * ch.g.norm_sqr() * eta.variance() + self.sigma_w2;
        let pseudo = ch.g * ch.g * ch.alpha * eta.pseudo_variance();
        ImproperGaussian::new(variance, pseudo)
    }
}

/// Flat-fading channel coefficient and transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub g: Complex64,
    pub alpha: f64,
}

impl ChannelState {
    pub fn new(g: Complex64, alpha: f64) -> Result<Self> {
        let ch = Self { g, alpha };
        ch.validate()?;
        Ok(ch)
    }

    /// Unit-gain channel (`g = 1`) at the given transmit power.
    pub fn awgn(alpha: f64) -> Result<Self> {
        Self::new(Complex64::new(1.0, 0.0), alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", "transmit power must be > 0"));
        }
        if !self.g.re.is_finite() || !self.g.im.is_finite() {
            return Err(Error::config("g", "channel coefficient must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_profile() -> DistortionProfile {
        DistortionProfile::new(0.01, 0.12, 0.25, 0.9, 1.0).unwrap()
    }

    #[test]
    fn circularity_examples() {
        let proper = ImproperGaussian::new(1.0, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(proper.circularity().unwrap(), 0.0);
        let maximal = ImproperGaussian::new(1.0, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(maximal.circularity().unwrap(), 1.0);
        let mixed = ImproperGaussian::new(2.0, Complex64::new(1.0, 1.0)).unwrap();
        assert!((mixed.circularity().unwrap() - 0.7071067811865476).abs() < 1e-9);
    }

    #[test]
    fn circularity_rejects_zero_variance() {
        let law = ImproperGaussian::new(0.0, Complex64::new(0.0, 0.0)).unwrap();
        assert!(matches!(law.circularity(), Err(Error::ZeroVariance)));
    }

    #[test]
    fn pseudo_variance_bound_enforced() {
        assert!(ImproperGaussian::new(1.0, Complex64::new(1.0, 0.5)).is_err());
        assert!(ImproperGaussian::new(-1.0, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn compose_paper_profile() {
        let eta = paper_profile().compose().unwrap();
        assert!((eta.variance() - 0.13).abs() < 1e-15);
        assert!((eta.pseudo_variance().re - 0.0325).abs() < 1e-15);
        // Hand-solved from the correlation relation applied to the distortion.
        let expected_q = 0.9 * (0.13f64 * 0.13 - 0.0325 * 0.0325).sqrt();
        assert!((eta.pseudo_variance().im - expected_q).abs() < 1e-15);
        assert!((eta.pseudo_variance().im - 0.11327).abs() < 1e-4);
    }

    #[test]
    fn compose_ideal_hardware() {
        let eta = DistortionProfile::new(0.0, 0.0, 0.7, 0.0, 1.0)
            .unwrap()
            .compose()
            .unwrap();
        assert_eq!(eta.variance(), 0.0);
        assert_eq!(eta.pseudo_variance(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn profile_validation() {
        assert!(DistortionProfile::new(-0.1, 0.0, 0.25, 0.9, 1.0).is_err());
        assert!(DistortionProfile::new(0.1, 0.0, 1.5, 0.9, 1.0).is_err());
        assert!(DistortionProfile::new(0.1, 0.0, 0.25, 1.0, 1.0).is_err());
        assert!(DistortionProfile::new(0.1, 0.0, 0.25, 0.9, 0.0).is_err());
    }

    #[test]
    fn aggregate_direct_substitution() {
        let ch = ChannelState::awgn(1.0).unwrap();
        let z = paper_profile().aggregate(&ch).unwrap();
        assert!((z.variance() - 1.13).abs() < 1e-15);
        assert!((z.pseudo_variance().re - 0.0325).abs() < 1e-15);
        assert!((z.pseudo_variance().im - 0.11328).abs() < 1e-4);
    }

    #[test]
    fn aggregate_ideal_is_proper_awgn() {
        let profile = DistortionProfile::ideal(1.0).unwrap();
        let ch = ChannelState::awgn(4.0).unwrap();
        let z = profile.aggregate(&ch).unwrap();
        assert_eq!(z.variance(), 1.0);
        assert_eq!(z.pseudo_variance(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn aggregate_phase_rotation_rotates_pseudo_by_double_angle() {
        let profile = paper_profile();
        let phi = 0.83_f64;
        let ch0 = ChannelState::new(Complex64::new(1.0, 0.0), 2.0).unwrap();
        let ch1 = ChannelState::new(Complex64::from_polar(1.0, phi), 2.0).unwrap();
        let z0 = profile.aggregate(&ch0).unwrap();
        let z1 = profile.aggregate(&ch1).unwrap();
        assert!((z0.variance() - z1.variance()).abs() < 1e-12);
        let rotated = z0.pseudo_variance() * Complex64::from_polar(1.0, 2.0 * phi);
        assert!((rotated - z1.pseudo_variance()).norm() < 1e-12);
    }

    #[test]
    fn iq_statistics_frozen_example() {
        let law = ImproperGaussian::new(1.13, Complex64::new(0.0325, 0.11327)).unwrap();
        let s = law.iq_statistics().unwrap();
        assert!((s.sigma_i2 - 0.58125).abs() < 1e-12);
        assert!((s.sigma_q2 - 0.54875).abs() < 1e-12);
        let expected_rho = 0.11327 / (1.13f64 * 1.13 - 0.0325 * 0.0325).sqrt();
        assert!((s.rho - expected_rho).abs() < 1e-15);
        assert!((s.rho - 0.10027).abs() < 1e-4);
    }

    #[test]
    fn iq_statistics_proper_split() {
        let law = ImproperGaussian::proper(3.0).unwrap();
        let s = law.iq_statistics().unwrap();
        assert_eq!((s.sigma_i2, s.sigma_q2, s.rho), (1.5, 1.5, 0.0));
    }

    #[test]
    fn iq_statistics_maximally_improper_boundary() {
        let law = ImproperGaussian::new(1.0, Complex64::new(1.0, 0.0)).unwrap();
        let s = law.iq_statistics().unwrap();
        assert_eq!((s.sigma_i2, s.sigma_q2, s.rho), (1.0, 0.0, 0.0));
        assert!(s.guard_nonsingular().is_err());
    }

    #[test]
    fn iq_round_trip() {
        let law = ImproperGaussian::new(1.13, Complex64::new(0.0325, 0.11328)).unwrap();
        let rebuilt = law.iq_statistics().unwrap().to_law().unwrap();
        assert!((rebuilt.variance() - law.variance()).abs() < 1e-12);
        assert!((rebuilt.pseudo_variance() - law.pseudo_variance()).norm() < 1e-12);
    }

    #[test]
    fn pdf_proper_peak() {
        let law = ImproperGaussian::proper(2.0).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let peak = law.pdf(zero, zero).unwrap();
        assert!((peak - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn pdf_symmetric_about_mean() {
        let law = ImproperGaussian::new(1.13, Complex64::new(0.0325, 0.11328)).unwrap();
        let mean = Complex64::new(0.4, -0.7);
        let y = Complex64::new(1.1, 0.3);
        let mirrored = 2.0 * mean - y;
        let a = law.pdf(mean, y).unwrap();
        let b = law.pdf(mean, mirrored).unwrap();
        assert!((a - b).abs() < 1e-15 * a.max(1.0));
    }

    #[test]
    fn pdf_integrates_to_one() {
        let law = ImproperGaussian::new(1.13, Complex64::new(0.0325, 0.11328)).unwrap();
        let mean = Complex64::new(0.2, -0.1);
        let sigma = law.variance().sqrt();
        let half = 6.0 * sigma;
        let n = 400;
        let step = 2.0 * half / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            let yi = mean.re - half + i as f64 * step;
            for q in 0..=n {
                let wq = if q == 0 || q == n { 0.5 } else { 1.0 };
                let yq = mean.im - half + q as f64 * step;
                total += wi * wq * law.pdf(mean, Complex64::new(yi, yq)).unwrap();
            }
        }
        total *= step * step;
        assert!((total - 1.0).abs() < 1e-3, "integral = {total}");
    }

    #[test]
    fn pdf_matches_augmented_form() {
        let law = ImproperGaussian::new(1.13, Complex64::new(0.0325, 0.11328)).unwrap();
        let v = law.variance();
        let pv = law.pseudo_variance();
        let det = v * v - pv.norm_sqr();
        let mean = Complex64::new(-0.3, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let y = Complex64::new(rng.gen::<f64>() * 6.0 - 3.0, rng.gen::<f64>() * 6.0 - 3.0);
            let z = y - mean;
            let quad = (v * z.norm_sqr() - (pv.conj() * z * z).re) / det;
            let augmented = (-quad).exp() / (std::f64::consts::PI * det.sqrt());
            let direct = law.pdf(mean, y).unwrap();
            assert!((direct - augmented).abs() < 1e-10 * augmented.max(1e-30));
        }
    }

    #[test]
    fn pdf_rejects_singular_law() {
        let law = ImproperGaussian::new(1.0, Complex64::new(1.0, 0.0)).unwrap();
        assert!(law
            .pdf(Complex64::new(0.0, 0.0), Complex64::new(0.1, 0.1))
            .is_err());
    }

    #[test]
    fn sample_moments_converge() {
        let law = ImproperGaussian::new(1.13, Complex64::new(0.0325, 0.11328)).unwrap();
        let target = law.iq_statistics().unwrap();
        let sampler = law.sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000;
        let (mut sii, mut sqq, mut siq) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = sampler.sample(&mut rng);
            sii += z.re * z.re;
            sqq += z.im * z.im;
            siq += z.re * z.im;
        }
        let (sii, sqq, siq) = (sii / n as f64, sqq / n as f64, siq / n as f64);
        let rho = siq / (sii * sqq).sqrt();
        assert!((sii - target.sigma_i2).abs() / target.sigma_i2 < 0.01);
        assert!((sqq - target.sigma_q2).abs() / target.sigma_q2 < 0.01);
        assert!((rho - target.rho).abs() < 0.01);
    }

    #[test]
    fn sample_proper_pseudo_variance_small() {
        let law = ImproperGaussian::proper(1.0).unwrap();
        let sampler = law.sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let z = sampler.sample(&mut rng);
            acc += z * z;
        }
        assert!((acc / n as f64).norm() < 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn sample_deterministic_for_fixed_seed() {
        let law = ImproperGaussian::new(1.13, Complex64::new(0.0325, 0.11328)).unwrap();
        let sampler = law.sampler().unwrap();
        let draw = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| sampler.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }
}
