//! Symbol constellations: QAM/PSK/PAM generation with gray labels, prior
//! distributions, and the power-preserving translate/rotate shaping
//! transform.
//!
//! Constellations are normalized to unit average power under *uniform*
//! priors at construction; designed priors must keep the prior-weighted
//! power at or below that budget.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Tolerance on the simplex sum of a prior vector.
pub const PRIOR_SUM_TOL: f64 = 1e-12;
/// Tolerance on the unit power budget.
pub const POWER_TOL: f64 = 1e-9;

/// Constellation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstellationKind {
    Qam,
    Psk,
    Pam,
}

impl std::str::FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qam" => Ok(Self::Qam),
            "psk" => Ok(Self::Psk),
            "pam" => Ok(Self::Pam),
            other => Err(Error::InvalidConstellation(format!(
                "unknown constellation kind `{other}`"
            ))),
        }
    }
}

/// A labeled constellation with a prior distribution over its symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    symbols: Vec<Complex64>,
    labels: Vec<u32>,
    priors: Vec<f64>,
    bits: u32,
}

/// Translation `ζ` and rotation `θ` of the shaping transform.
///
/// The transform maps a symbol `x` to
/// `v = sqrt(1+ζ)·Re(R(θ)x) + i·sqrt(1−ζ)·Im(R(θ)x)`. On an I/Q-balanced
/// constellation with uniform priors it preserves average power and sets the
/// discrete circularity coefficient to exactly `ζ` for every `θ`.
/// For uniform square QAM the bound is `π/2`-periodic in `θ`; non-uniform
/// priors break that symmetry, which is why the full `[0, 2π]` range stays
/// open to the hybrid design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingParams {
    pub zeta: f64,
    pub theta: f64,
}

impl ShapingParams {
    pub fn new(zeta: f64, theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&zeta) {
            return Err(Error::InvalidShaping(format!(
                "zeta must be in [0, 1), got {zeta}"
            )));
        }
        if !(0.0..=2.0 * std::f64::consts::PI + 1e-12).contains(&theta) {
            return Err(Error::InvalidShaping(format!(
                "theta must be in [0, 2*pi], got {theta}"
            )));
        }
        Ok(Self { zeta, theta })
    }

    pub fn identity() -> Self {
        Self {
            zeta: 0.0,
            theta: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.zeta == 0.0 && self.theta == 0.0
    }

    /// Forward map of a single point.
    pub fn map(&self, x: Complex64) -> Complex64 {
        let (sin, cos) = self.theta.sin_cos();
        let ri = x.re * cos - x.im * sin;
        let rq = x.re * sin + x.im * cos;
        Complex64::new((1.0 + self.zeta).sqrt() * ri, (1.0 - self.zeta).sqrt() * rq)
    }

    /// Inverse map; defined for `ζ < 1`.
    pub fn inverse_map(&self, v: Complex64) -> Complex64 {
        let ri = v.re / (1.0 + self.zeta).sqrt();
        let rq = v.im / (1.0 - self.zeta).sqrt();
        let (sin, cos) = self.theta.sin_cos();
        Complex64::new(ri * cos + rq * sin, -ri * sin + rq * cos)
    }
}

impl Constellation {
    /// Builds a unit-power gray-labeled constellation with uniform priors.
    ///
    /// Supported orders: QAM {4, 8, 16, 32, 64} (8 is a 4×2 rectangular
    /// grid, 32 is the 6×6 cross), PSK and PAM {2, 4, 8, 16, 32, 64}.
    pub fn make(kind: ConstellationKind, m: usize) -> Result<Self> {
        let (symbols, labels) = match kind {
            ConstellationKind::Qam => qam_symbols(m)?,
            ConstellationKind::Psk => psk_symbols(m)?,
            ConstellationKind::Pam => pam_symbols(m)?,
        };
        let bits = (m as f64).log2().round() as u32;
        let priors = vec![1.0 / m as f64; m];
        let mut c = Self {
            symbols,
            labels,
            priors,
            bits,
        };
        c.normalize_uniform_power();
        c.validate()?;
        Ok(c)
    }

    /// Builds a constellation from explicit parts (used by deserialization
    /// and the shaping transform). Validates all invariants.
    pub fn from_parts(symbols: Vec<Complex64>, labels: Vec<u32>, priors: Vec<f64>) -> Result<Self> {
        let m = symbols.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::InvalidConstellation(format!(
                "symbol count must be a power of two >= 2, got {m}"
            )));
        }
        let bits = m.trailing_zeros();
        let c = Self {
            symbols,
            labels,
            priors,
            bits,
        };
        c.validate()?;
        Ok(c)
    }

    fn normalize_uniform_power(&mut self) {
        let mean: f64 =
            self.symbols.iter().map(|x| x.norm_sqr()).sum::<f64>() / self.symbols.len() as f64;
        let scale = mean.sqrt().recip();
        for x in &mut self.symbols {
            *x *= scale;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.symbols.len();
        if self.labels.len() != m || self.priors.len() != m {
            return Err(Error::InvalidConstellation(
                "symbols, labels, and priors must have equal length".into(),
            ));
        }
        let mut seen = vec![false; m];
        for &l in &self.labels {
            let idx = l as usize;
            if idx >= m || seen[idx] {
                return Err(Error::InvalidConstellation(format!(
                    "labels must be distinct and cover 0..{m}"
                )));
            }
            seen[idx] = true;
        }
        self.check_priors(&self.priors)
    }

    fn check_priors(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.symbols.len() {
            return Err(Error::InvalidPriors(format!(
                "expected {} priors, got {}",
                self.symbols.len(),
                p.len()
            )));
        }
        let mut sum = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            if !(pi >= 0.0 && pi.is_finite()) {
                return Err(Error::InvalidPriors(format!(
                    "prior {i} must be finite and >= 0, got {pi}"
                )));
            }
            sum += pi;
        }
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::InvalidPriors(format!(
                "priors sum to {sum}, expected 1"
            )));
        }
        let power: f64 = p
            .iter()
            .zip(&self.symbols)
            .map(|(pi, x)| pi * x.norm_sqr())
            .sum();
        if power > 1.0 + POWER_TOL {
            return Err(Error::InvalidPriors(format!(
                "prior-weighted power {power} exceeds the unit budget"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Bits per symbol label.
    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn symbol(&self, m: usize) -> Complex64 {
        self.symbols[m]
    }

    pub fn prior(&self, m: usize) -> f64 {
        self.priors[m]
    }

    /// Pairwise symbol difference `x_m − x_n`.
    pub fn difference(&self, m: usize, n: usize) -> Complex64 {
        self.symbols[m] - self.symbols[n]
    }

    /// Replaces the prior distribution, enforcing the simplex and the unit
    /// power budget.
    pub fn with_priors(&self, priors: Vec<f64>) -> Result<Self> {
        self.check_priors(&priors)?;
        Ok(Self {
            symbols: self.symbols.clone(),
            labels: self.labels.clone(),
            priors,
            bits: self.bits,
        })
    }

    /// Applies the shaping transform to every symbol; labels and priors are
    /// carried over unchanged.
    pub fn shaped(&self, s: &ShapingParams) -> Self {
        Self {
            symbols: self.symbols.iter().map(|&x| s.map(x)).collect(),
            labels: self.labels.clone(),
            priors: self.priors.clone(),
            bits: self.bits,
        }
    }

    /// Prior-weighted average power `Σ p_m |x_m|²`.
    pub fn distribution_power(&self) -> f64 {
        self.priors
            .iter()
            .zip(&self.symbols)
            .map(|(p, x)| p * x.norm_sqr())
            .sum()
    }

    /// Discrete circularity `|Σ p_m x_m²| / Σ p_m |x_m|²`.
    pub fn discrete_circularity(&self) -> Result<f64> {
        let power = self.distribution_power();
        if power <= 0.0 {
            return Err(Error::ZeroVariance);
        }
        let pseudo: Complex64 = self
            .priors
            .iter()
            .zip(&self.symbols)
            .map(|(p, x)| x * x * *p)
            .sum();
        Ok(pseudo.norm() / power)
    }

    /// Source entropy of the attached priors, in bits per symbol.
    pub fn entropy(&self) -> f64 {
        entropy(&self.priors)
    }

    /// Indices of symbols with prior above `floor`.
    pub fn support(&self, floor: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&m| self.priors[m] > floor)
            .collect()
    }

    /// Serializes as CSV rows `index,re,im,label,prior`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,re,im,label,prior\n");
        let w = self.bits as usize;
        for m in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{:0w$b},{}\n",
                m, self.symbols[m].re, self.symbols[m].im, self.labels[m], self.priors[m],
            ));
        }
        out
    }

    /// Parses the CSV form produced by [`Constellation::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut symbols = Vec::new();
        let mut labels = Vec::new();
        let mut priors = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::InvalidConstellation(format!(
                    "line {}: expected 5 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse =
                |s: &str, what: &str| -> Result<f64> {
                    s.parse().map_err(|_| {
                        Error::InvalidConstellation(format!("line {}: bad {what}", lineno + 1))
                    })
                };
            symbols.push(Complex64::new(
                parse(fields[1], "re")?,
                parse(fields[2], "im")?,
            ));
            labels.push(u32::from_str_radix(fields[3], 2).map_err(|_| {
                Error::InvalidConstellation(format!("line {}: bad label", lineno + 1))
            })?);
            priors.push(parse(fields[4], "prior")?);
        }
        Self::from_parts(symbols, labels, priors)
    }
}

/// Shannon entropy in bits, with `0·log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&pi| pi > 0.0)
        .map(|&pi| -pi * pi.log2())
        .sum()
}

fn gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

fn qam_symbols(m: usize) -> Result<(Vec<Complex64>, Vec<u32>)> {
    match m {
        4 | 16 | 64 => Ok(square_qam(m)),
        8 => Ok(rect_8qam()),
        32 => Ok(cross_32qam()),
        _ => Err(Error::InvalidConstellation(format!(
            "unsupported QAM order {m} (expected 4, 8, 16, 32, or 64)"
        ))),
    }
}

fn square_qam(m: usize) -> (Vec<Complex64>, Vec<u32>) {
    let side = (m as f64).sqrt() as u32;
    let half_bits = side.trailing_zeros();
    let mut symbols = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for col in 0..side {
        for row in 0..side {
            let x = 2.0 * col as f64 - (side - 1) as f64;
            let y = 2.0 * row as f64 - (side - 1) as f64;
            symbols.push(Complex64::new(x, y));
            labels.push((gray(col) << half_bits) | gray(row));
        }
    }
    (symbols, labels)
}

/// 4×2 rectangular 8-QAM. The row spacing is sqrt(5) times the column
/// spacing so the I and Q second moments match, which keeps the shaping
/// transform power-invariant on this grid.
fn rect_8qam() -> (Vec<Complex64>, Vec<u32>) {
    let b = 5.0_f64.sqrt();
    let mut symbols = Vec::with_capacity(8);
    let mut labels = Vec::with_capacity(8);
    for col in 0..4u32 {
        for row in 0..2u32 {
            let x = 2.0 * col as f64 - 3.0;
            let y = (2.0 * row as f64 - 1.0) * b;
            symbols.push(Complex64::new(x, y));
            labels.push((gray(col) << 1) | row);
        }
    }
    (symbols, labels)
}

/// 32-cross: a gray-labeled 8×4 rectangle with its outer columns folded
/// into the top and bottom extensions. Nearest neighbors differ in at most
/// two bits.
fn cross_32qam() -> (Vec<Complex64>, Vec<u32>) {
    let mut symbols = Vec::with_capacity(32);
    let mut labels = Vec::with_capacity(32);
    for col in 0..8u32 {
        for row in 0..4u32 {
            let x = 2.0 * col as f64 - 7.0;
            let y = 2.0 * row as f64 - 3.0;
            let (x, y) = if x.abs() > 5.0 {
                (x.signum() * y.abs(), y.signum() * 5.0)
            } else {
                (x, y)
            };
            symbols.push(Complex64::new(x, y));
            labels.push((gray(col) << 2) | gray(row));
        }
    }
    (symbols, labels)
}

fn psk_symbols(m: usize) -> Result<(Vec<Complex64>, Vec<u32>)> {
    if !matches!(m, 2 | 4 | 8 | 16 | 32 | 64) {
        return Err(Error::InvalidConstellation(format!(
            "unsupported PSK order {m}"
        )));
    }
    let symbols = (0..m)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64))
        .collect();
    let labels = (0..m as u32).map(gray).collect();
    Ok((symbols, labels))
}

fn pam_symbols(m: usize) -> Result<(Vec<Complex64>, Vec<u32>)> {
    if !matches!(m, 2 | 4 | 8 | 16 | 32 | 64) {
        return Err(Error::InvalidConstellation(format!(
            "unsupported PAM order {m}"
        )));
    }
    let symbols = (0..m)
        .map(|k| Complex64::new(2.0 * k as f64 - (m - 1) as f64, 0.0))
        .collect();
    let labels = (0..m as u32).map(gray).collect();
    Ok((symbols, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qam(m: usize) -> Constellation {
        Constellation::make(ConstellationKind::Qam, m).unwrap()
    }

    #[test]
    fn qpsk_layout() {
        let c = qam(4);
        let r = 0.5f64.sqrt();
        for &s in c.symbols() {
            assert!((s.re.abs() - r).abs() < 1e-12);
            assert!((s.im.abs() - r).abs() < 1e-12);
        }
        assert!(c.priors().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn unit_power_under_uniform_priors() {
        for m in [4, 8, 16, 32, 64] {
            let c = qam(m);
            assert!(
                (c.distribution_power() - 1.0).abs() < 1e-12,
                "power off for {m}-QAM"
            );
        }
        for m in [2, 8, 16] {
            let c = Constellation::make(ConstellationKind::Psk, m).unwrap();
            assert!((c.distribution_power() - 1.0).abs() < 1e-12);
            let c = Constellation::make(ConstellationKind::Pam, m).unwrap();
            assert!((c.distribution_power() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unsupported_orders_rejected() {
        assert!(Constellation::make(ConstellationKind::Qam, 2).is_err());
        assert!(Constellation::make(ConstellationKind::Qam, 128).is_err());
        assert!(Constellation::make(ConstellationKind::Psk, 12).is_err());
    }

    #[test]
    fn iq_moments_balanced() {
        // Required for power invariance under the shaping transform.
        for m in [4, 8, 16, 32] {
            let c = qam(m);
            let n = c.len() as f64;
            let si: f64 = c.symbols().iter().map(|x| x.re * x.re).sum::<f64>() / n;
            let sq: f64 = c.symbols().iter().map(|x| x.im * x.im).sum::<f64>() / n;
            let sx: f64 = c.symbols().iter().map(|x| x.re * x.im).sum::<f64>() / n;
            assert!((si - sq).abs() < 1e-12, "m = {m}: {si} vs {sq}");
            assert!(sx.abs() < 1e-12, "m = {m}: cross moment {sx}");
        }
    }

    fn neighbor_bit_distances(c: &Constellation) -> Vec<u32> {
        let mut min_d2 = f64::INFINITY;
        for m in 0..c.len() {
            for n in 0..m {
                min_d2 = min_d2.min(c.difference(m, n).norm_sqr());
            }
        }
        let mut out = Vec::new();
        for m in 0..c.len() {
            for n in 0..m {
                if c.difference(m, n).norm_sqr() < min_d2 * (1.0 + 1e-9) {
                    out.push((c.labels()[m] ^ c.labels()[n]).count_ones());
                }
            }
        }
        out
    }

    #[test]
    fn gray_neighbors_square_qam() {
        for m in [4, 16, 64] {
            for d in neighbor_bit_distances(&qam(m)) {
                assert_eq!(d, 1, "square {m}-QAM neighbor differs in {d} bits");
            }
        }
        // The 8-QAM grid has distinct row/column spacings; check both axes.
        let c = qam(8);
        for m in 0..8 {
            for n in 0..m {
                let d = c.difference(m, n);
                let adjacent = (d.im.abs() < 1e-9 && d.re.abs() < 0.7)
                    || (d.re.abs() < 1e-9 && d.im.abs() < 1.5);
                if adjacent {
                    assert_eq!((c.labels()[m] ^ c.labels()[n]).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn cross_32qam_quasi_gray() {
        let c = qam(32);
        assert_eq!(c.len(), 32);
        for d in neighbor_bit_distances(&c) {
            assert!(d <= 2, "32-cross neighbor differs in {d} bits");
        }
    }

    #[test]
    fn shaping_identity() {
        let c = qam(16);
        let s = c.shaped(&ShapingParams::identity());
        for (a, b) in c.symbols().iter().zip(s.symbols()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn shaping_circularity_matches_zeta() {
        let c = qam(16);
        for (zeta, theta) in [(0.5, 0.0), (0.5, std::f64::consts::FRAC_PI_2), (0.3, 1.1)] {
            let s = c.shaped(&ShapingParams::new(zeta, theta).unwrap());
            assert!((s.distribution_power() - 1.0).abs() < 1e-12);
            assert!((s.discrete_circularity().unwrap() - zeta).abs() < 1e-12);
        }
        assert!(qam(16).discrete_circularity().unwrap() < 1e-12);
    }

    #[test]
    fn distribution_power_examples() {
        let c = qam(8);
        let emin = c
            .symbols()
            .iter()
            .map(|x| x.norm_sqr())
            .fold(f64::INFINITY, f64::min);
        let idx = (0..8)
            .min_by(|&a, &b| {
                c.symbol(a)
                    .norm_sqr()
                    .partial_cmp(&c.symbol(b).norm_sqr())
                    .unwrap()
            })
            .unwrap();
        let mut p = vec![0.0; 8];
        p[idx] = 1.0;
        let degenerate = c.with_priors(p).unwrap();
        assert!((degenerate.distribution_power() - emin).abs() < 1e-12);

        // Mass on four symbols, hand-summed against the layout energies.
        let p = vec![0.25, 0.0, 0.25, 0.0, 0.0, 0.25, 0.0, 0.25];
        let hand: f64 = [0, 2, 5, 7]
            .iter()
            .map(|&m| 0.25 * c.symbol(m).norm_sqr())
            .sum();
        let four = c.with_priors(p).unwrap();
        assert!((four.distribution_power() - hand).abs() < 1e-12);
        assert!(four.distribution_power() <= 1.0 + 1e-9);
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&vec![0.125; 8]) - 3.0).abs() < 1e-15);
        assert!((entropy(&[0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0]) - 2.0).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn priors_validation() {
        let c = qam(8);
        assert!(c.with_priors(vec![0.2; 8]).is_err());
        let mut p = vec![0.0; 8];
        p[0] = 1.1;
        p[1] = -0.1;
        assert!(c.with_priors(p).is_err());
        // All mass on the hottest symbol busts the power budget.
        let idx = (0..8)
            .max_by(|&a, &b| {
                c.symbol(a)
                    .norm_sqr()
                    .partial_cmp(&c.symbol(b).norm_sqr())
                    .unwrap()
            })
            .unwrap();
        let mut p = vec![0.0; 8];
        p[idx] = 1.0;
        assert!(c.with_priors(p).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = qam(8)
            .with_priors(vec![0.25, 0.0, 0.25, 0.0, 0.0, 0.25, 0.0, 0.25])
            .unwrap();
        let parsed = Constellation::from_csv(&c.to_csv()).unwrap();
        assert_eq!(c, parsed);
    }

    #[test]
    fn shaping_param_ranges() {
        assert!(ShapingParams::new(1.0, 0.0).is_err());
        assert!(ShapingParams::new(-0.1, 0.0).is_err());
        assert!(ShapingParams::new(0.0, 7.0).is_err());
    }

    proptest! {
        #[test]
        fn shaping_round_trip(zeta in 0.0..0.999f64, theta in 0.0..std::f64::consts::TAU) {
            let s = ShapingParams::new(zeta, theta).unwrap();
            let c = qam(16);
            let shaped = c.shaped(&s);
            for (orig, v) in c.symbols().iter().zip(shaped.symbols()) {
                let back = s.inverse_map(*v);
                prop_assert!((orig - back).norm() < 1e-12);
            }
        }

        #[test]
        fn shaping_preserves_power_on_balanced_grids(
            zeta in 0.0..0.999f64,
            theta in 0.0..std::f64::consts::TAU,
            m in prop::sample::select(vec![4usize, 8, 16, 32]),
        ) {
            let s = ShapingParams::new(zeta, theta).unwrap();
            let c = qam(m);
            let shaped = c.shaped(&s);
            prop_assert!((shaped.distribution_power() - c.distribution_power()).abs() < 1e-12);
            prop_assert!((shaped.discrete_circularity().unwrap() - zeta).abs() < 1e-12);
        }
    }
}
