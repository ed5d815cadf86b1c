//! Monte-Carlo link simulation.
//!
//! Each trial draws a symbol from the designed priors, pushes it through
//! transmit distortion, the channel, receive distortion and thermal noise,
//! and detects with the MAP rule conditioned on the drawn channel. Every
//! trial owns a counter-based generator stream derived from (seed, trial
//! index) and error counts accumulate as integers, so results are
//! bit-identical for any worker count and chunking.

use crate::analysis;
use crate::constellation::{entropy, Constellation, ShapingParams};
use crate::detection::{bit_errors, DetectorContext};
use crate::error::{Error, Result};
use crate::noise::{ChannelState, DistortionProfile, ImproperGaussian, ImproperSampler};
use crate::optimize::{self, GsMethod, PsProblem};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Channel model for a link run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Fixed unit gain: `g = 1`.
    AwgnUnitGain,
    /// Flat Rayleigh fading: `g ~ CN(0, lambda, 0)` redrawn every
    /// `symbols_per_realization` trials.
    Rayleigh {
        lambda: f64,
        symbols_per_realization: u64,
    },
}

/// Full description of one Monte-Carlo link run.
#[derive(Debug, Clone)]
pub struct LinkConfig {
    /// Unshaped reference constellation carrying the designed priors.
    pub constellation: Constellation,
    /// Geometric shaping applied to the transmitted symbols.
    pub shaping: ShapingParams,
    pub profile: DistortionProfile,
    pub channel: ChannelKind,
    pub ebno_db: f64,
    /// Bits/symbol used to map EbNo to transmit power (the rate floor, so
    /// all schemes compare at equal energy per information bit).
    pub rate_for_scaling: f64,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Adaptive extension: rerun batches of `trials` until at least
    /// `min_error_events` bit errors, up to this many rounds.
    pub max_rounds: u32,
    pub min_error_events: u64,
}

impl LinkConfig {
    pub fn new(
        constellation: Constellation,
        profile: DistortionProfile,
        ebno_db: f64,
        rate_for_scaling: f64,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            constellation,
            shaping: ShapingParams::identity(),
            profile,
            channel: ChannelKind::AwgnUnitGain,
            ebno_db,
            rate_for_scaling,
            trials,
            seed,
            workers: 0,
            max_rounds: 1,
            min_error_events: 100,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if !self.ebno_db.is_finite() {
            return Err(Error::config("ebno_db", "must be finite"));
        }
        if !(self.rate_for_scaling > 0.0) {
            return Err(Error::config("rate_for_scaling", "must be > 0"));
        }
        if let ChannelKind::Rayleigh {
            lambda,
            symbols_per_realization,
        } = self.channel
        {
            if !(lambda > 0.0) {
                return Err(Error::config("lambda", "must be > 0"));
            }
            if symbols_per_realization == 0 {
                return Err(Error::config("symbols_per_realization", "must be >= 1"));
            }
        }
        self.profile.validate()
    }

    /// Transmit power: `alpha = EbNo_lin * rate * sigma_w2` for unit-power
    /// constellations.
    pub fn alpha(&self) -> f64 {
        10f64.powf(self.ebno_db / 10.0) * self.rate_for_scaling * self.profile.sigma_w2
    }
}

/// Estimates from a link run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    pub ber: f64,
    /// Half-width of the 95% normal-approximation interval on the BER.
    pub ber_ci95: f64,
    pub ser: f64,
    /// Correct information bits per symbol: `(1 - ber) * H(priors)`.
    pub throughput: f64,
    pub trials_used: u64,
    pub bit_errors: u64,
    pub symbol_errors: u64,
}

/// Analytical quantities accumulated alongside the simulation, averaged
/// over channel realizations with trial weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkAnalytics {
    pub bound_mean: f64,
    pub floor_mean: f64,
    pub entropy_mean: f64,
    pub resampled_trials: u64,
}

/// Transmission plan for one channel realization: the shaped reference
/// constellation (symbols actually transmitted and used by the detector)
/// plus the conditional analytical quantities for that realization.
#[derive(Debug, Clone)]
pub struct RealizationPlan {
    pub reference: Constellation,
    pub bound: f64,
    pub floor: f64,
}

/// Fixed-design planner: shape the configured constellation once and
/// evaluate its conditional bound and floor for each realization.
fn fixed_planner<'a>(
    cfg: &'a LinkConfig,
) -> impl Fn(&ChannelState) -> Result<RealizationPlan> + 'a {
    let shaped = cfg.constellation.shaped(&cfg.shaping);
    move |ch: &ChannelState| {
        let stats = cfg.profile.aggregate(ch)?.iq_statistics()?;
        let bound = analysis::ber_upper_bound(&shaped, &stats, ch, None)?;
        let floor = analysis::error_floor(&shaped, &cfg.profile, ch.g)?;
        Ok(RealizationPlan {
            reference: shaped.clone(),
            bound,
            floor,
        })
    }
}

/// Runs the link with the configured fixed design.
pub fn run_link(cfg: &LinkConfig) -> Result<SimResult> {
    run_link_with(cfg, fixed_planner(cfg)).map(|(sim, _)| sim)
}

/// Runs the link and also returns the realization-averaged analytics.
pub fn run_link_analyzed(cfg: &LinkConfig) -> Result<(SimResult, LinkAnalytics)> {
    run_link_with(cfg, fixed_planner(cfg))
}

/// Runs the link with a caller-supplied per-realization planner (used for
/// redesign-per-realization under fading).
pub fn run_link_with(
    cfg: &LinkConfig,
    planner: impl Fn(&ChannelState) -> Result<RealizationPlan>,
) -> Result<(SimResult, LinkAnalytics)> {
    cfg.validate()?;
    let alpha = cfg.alpha();
    let bits = cfg.constellation.bits_per_symbol();
    let spr = match cfg.channel {
        ChannelKind::AwgnUnitGain => u64::MAX,
        ChannelKind::Rayleigh {
            symbols_per_realization,
            ..
        } => symbols_per_realization,
    };

    let pool = if cfg.workers > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::config("workers", e.to_string()))?,
        )
    } else {
        None
    };

    let g_rng_master = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut bit_err: u64 = 0;
    let mut sym_err: u64 = 0;
    let mut resampled: u64 = 0;
    let mut done: u64 = 0;
    let (mut bound_acc, mut floor_acc, mut entropy_acc) = (0.0, 0.0, 0.0);

    let mut round = 0;
    loop {
        let round_end = done + cfg.trials;
        while done < round_end {
            let realization = done / spr;
            let seg_end = round_end.min(
                (realization + 1)
                    .checked_mul(spr)
                    .unwrap_or(u64::MAX),
            );
            let seg = (done, seg_end);

            // Draw the channel for this realization, resampling singular
            // statistics up to the configured fraction of all trials.
            let mut attempts: u64 = 0;
            let (plan, setup) = loop {
                let g = match cfg.channel {
                    ChannelKind::AwgnUnitGain => Complex64::new(1.0, 0.0),
                    ChannelKind::Rayleigh { lambda, .. } => {
                        let mut r = g_rng_master.clone();
                        r.set_stream(realization);
                        // Skip past rejected draws on this realization's stream.
                        let comp = (lambda / 2.0).sqrt();
                        let mut g = Complex64::new(0.0, 0.0);
                        for _ in 0..=attempts {
                            g = Complex64::new(
                                comp * r.sample::<f64, _>(rand_distr::StandardNormal),
                                comp * r.sample::<f64, _>(rand_distr::StandardNormal),
                            );
                        }
                        g
                    }
                };
                let ch = ChannelState::new(g, alpha)?;
                match build_realization(cfg, &ch, &planner) {
                    Ok(built) => break built,
                    Err(Error::SingularStatistics(reason)) => {
                        if matches!(cfg.channel, ChannelKind::AwgnUnitGain) {
                            return Err(Error::SingularStatistics(reason));
                        }
                        attempts += 1;
                        resampled += seg.1 - seg.0;
                        if resampled > (cfg.trials * cfg.max_rounds as u64) / 1000 + 1 {
                            return Err(Error::SingularStatistics(
                                "too many singular channel realizations".into(),
                            ));
                        }
                    }
                    Err(e) => return Err(e),
                }
            };

            let weight = (seg.1 - seg.0) as f64;
            bound_acc += weight * plan.bound;
            floor_acc += weight * plan.floor;
            entropy_acc += weight * entropy(plan.reference.priors());

            let chunk: u64 = 8192;
            let ranges: Vec<(u64, u64)> = (seg.0..seg.1)
                .step_by(chunk as usize)
                .map(|s| (s, (s + chunk).min(seg.1)))
                .collect();
            let master = ChaCha8Rng::seed_from_u64(cfg.seed);
            let run_chunks = || {
                ranges
                    .par_iter()
                    .map(|&(s, e)| simulate_chunk(&setup, &master, s, e))
                    .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            };
            let (b, s) = match &pool {
                Some(p) => p.install(run_chunks),
                None => run_chunks(),
            };
            bit_err += b;
            sym_err += s;
            done = seg.1;
        }

        round += 1;
        if bit_err >= cfg.min_error_events || round >= cfg.max_rounds {
            break;
        }
    }

    let total_bits = (done * bits as u64) as f64;
    let ber = bit_err as f64 / total_bits;
    let ser = sym_err as f64 / done as f64;
    let entropy_mean = entropy_acc / done as f64;
    let ci = 1.96 * (ber * (1.0 - ber) / total_bits).sqrt();
    Ok((
        SimResult {
            ber,
            ber_ci95: ci,
            ser,
            throughput: (1.0 - ber) * entropy_mean,
            trials_used: done,
            bit_errors: bit_err,
            symbol_errors: sym_err,
        },
        LinkAnalytics {
            bound_mean: bound_acc / done as f64,
            floor_mean: floor_acc / done as f64,
            entropy_mean,
            resampled_trials: resampled,
        },
    ))
}

/// Precomputed per-realization state shared by all trial chunks.
struct RealizationSetup {
    cum_priors: Vec<f64>,
    symbols: Vec<Complex64>,
    labels: Vec<u32>,
    detector: DetectorContext,
    tx_sampler: ImproperSampler,
    rx_sampler: ImproperSampler,
    w_sampler: ImproperSampler,
    tx_scale: Complex64,
}

fn build_realization(
    cfg: &LinkConfig,
    ch: &ChannelState,
    planner: &impl Fn(&ChannelState) -> Result<RealizationPlan>,
) -> Result<(RealizationPlan, RealizationSetup)> {
    let plan = planner(ch)?;
    let stats = cfg.profile.aggregate(ch)?.iq_statistics()?;
    let detector = DetectorContext::new(&plan.reference, stats, *ch)?;
    let tx_sampler = cfg.profile.tx_law()?.sampler()?;
    let rx_sampler = cfg.profile.rx_law(ch)?.sampler()?;
    let w_sampler = ImproperGaussian::proper(cfg.profile.sigma_w2)?.sampler()?;
    let mut cum = 0.0;
    let cum_priors: Vec<f64> = plan
        .reference
        .priors()
        .iter()
        .map(|&p| {
            cum += p;
            cum
        })
        .collect();
    let setup = RealizationSetup {
        cum_priors,
        symbols: plan.reference.symbols().to_vec(),
        labels: plan.reference.labels().to_vec(),
        detector,
        tx_sampler,
        rx_sampler,
        w_sampler,
        tx_scale: ch.alpha.sqrt() * ch.g,
    };
    Ok((plan, setup))
}

/// Simulates trials `[start, end)`, each on its own generator stream.
/// Returns accumulated (bit errors, symbol errors).
fn simulate_chunk(setup: &RealizationSetup, master: &ChaCha8Rng, start: u64, end: u64) -> (u64, u64) {
    let mut bit_acc = 0u64;
    let mut sym_acc = 0u64;
    for trial in start..end {
        let mut rng = master.clone();
        rng.set_stream(trial);
        let u: f64 = rng.gen();
        let m = match setup
            .cum_priors
            .iter()
            .position(|&cp| u < cp)
        {
            Some(m) => m,
            None => setup.cum_priors.len() - 1,
        };
        let eta_t = setup.tx_sampler.sample(&mut rng);
        let eta_r = setup.rx_sampler.sample(&mut rng);
        let w = setup.w_sampler.sample(&mut rng);
        let y = setup.tx_scale * (setup.symbols[m] + eta_t) + eta_r + w;
        let m_hat = setup.detector.map_detect(y);
        if m_hat != m {
            sym_acc += 1;
            bit_acc += bit_errors(&setup.labels, m, m_hat) as u64;
        }
    }
    (bit_acc, sym_acc)
}

/// Signal shaping scheme of a sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ns,
    Gs,
    Ps,
    Hs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Ns, Scheme::Gs, Scheme::Ps, Scheme::Hs];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Ns => "ns",
            Scheme::Gs => "gs",
            Scheme::Ps => "ps",
            Scheme::Hs => "hs",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ns" => Ok(Scheme::Ns),
            "gs" => Ok(Scheme::Gs),
            "ps" => Ok(Scheme::Ps),
            "hs" => Ok(Scheme::Hs),
            other => Err(Error::SpecParse(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Sweep axis: either EbNo in dB at fixed distortion, or total distortion
/// `κ` (split between transmitter and receiver in the template's ratio) at
/// fixed EbNo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    EbnoDb(Vec<f64>),
    Kappa(Vec<f64>),
}

/// Sweep request: schemes × grid points on one axis.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Baseline constellation order for NS and GS.
    pub uniform_constellation: Constellation,
    /// Higher-order constellation for PS and HS.
    pub shaped_constellation: Constellation,
    pub rate_floor: f64,
    pub profile: DistortionProfile,
    pub channel: ChannelKind,
    pub ebno_db: f64,
    pub schemes: Vec<Scheme>,
    pub axis: SweepAxis,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub max_rounds: u32,
    /// Redesign priors/shaping per channel realization under fading.
    pub redesign_per_realization: bool,
}

/// One sweep result row; `ok = false` flags a designer failure at that grid
/// point, with the reason in `note`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub ber_sim: f64,
    pub ber_ci: f64,
    pub ber_bound: f64,
    pub throughput_sim: f64,
    pub throughput_bound: f64,
    pub floor: f64,
    pub ok: bool,
    pub note: String,
}

/// Runs the sweep: for every grid point and scheme, design (where the
/// scheme calls for it), evaluate the analytical bound and floor, and
/// simulate. Designer failures flag the row and the sweep continues.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let points: Vec<f64> = match &spec.axis {
        SweepAxis::EbnoDb(v) => v.clone(),
        SweepAxis::Kappa(v) => v.clone(),
    };
    if points.is_empty() {
        return Err(Error::config("axis", "sweep grid must be non-empty"));
    }
    let mut rows = Vec::with_capacity(points.len() * spec.schemes.len());
    for (pi, &value) in points.iter().enumerate() {
        for (si, &scheme) in spec.schemes.iter().enumerate() {
            let seed = spec
                .seed
                .wrapping_add(1_000_003u64.wrapping_mul(pi as u64 + 1))
                .wrapping_add(si as u64);
            match sweep_point(spec, scheme, value, seed) {
                Ok(row) => rows.push(row),
                Err(e) => rows.push(SweepRow {
                    axis_value: value,
                    scheme,
                    ber_sim: f64::NAN,
                    ber_ci: f64::NAN,
                    ber_bound: f64::NAN,
                    throughput_sim: f64::NAN,
                    throughput_bound: f64::NAN,
                    floor: f64::NAN,
                    ok: false,
                    note: e.to_string(),
                }),
            }
        }
    }
    Ok(rows)
}

fn point_profile(spec: &SweepSpec, value: f64) -> Result<(DistortionProfile, f64)> {
    match spec.axis {
        SweepAxis::EbnoDb(_) => Ok((spec.profile, value)),
        SweepAxis::Kappa(_) => {
            let kappa0 = spec.profile.kappa();
            if kappa0 <= 0.0 {
                return Err(Error::config(
                    "kappa",
                    "distortion sweep needs a nonzero template kappa",
                ));
            }
            let scale = value / kappa0;
            let p = DistortionProfile::new(
                spec.profile.kappa_t * scale,
                spec.profile.kappa_r * scale,
                spec.profile.kappa_tilde_i_ratio,
                spec.profile.rho_eta,
                spec.profile.sigma_w2,
            )?;
            Ok((p, spec.ebno_db))
        }
    }
}

/// Designs the scheme at the given link statistics and returns the
/// transmission-ready reference constellation — shaping applied, priors
/// attached, and supported symbols re-labeled for the non-uniform schemes —
/// together with the shaping parameters and the design diagnostics.
pub fn design_scheme(
    scheme: Scheme,
    uniform: &Constellation,
    shaped_order: &Constellation,
    rate_floor: f64,
    stats: &crate::noise::IqStats,
    ch: &ChannelState,
) -> Result<(Constellation, ShapingParams, Option<optimize::DesignResult>)> {
    match scheme {
        Scheme::Ns => Ok((uniform.clone(), ShapingParams::identity(), None)),
        Scheme::Gs => {
            let s = optimize::design_gs_multistart(
                uniform,
                uniform.priors(),
                stats,
                ch,
                ShapingParams::identity(),
                GsMethod::TrustRegion,
            )?;
            let reference = optimize::regray_support(&uniform.shaped(&s), stats, ch)?;
            Ok((reference, s, None))
        }
        Scheme::Ps => {
            let problem = PsProblem::new(shaped_order.clone(), rate_floor)?;
            let res = optimize::design_ps(&problem, stats, ch, None, None)?;
            let reference = shaped_order.with_priors(res.priors.clone())?;
            let reference = optimize::regray_support(&reference, stats, ch)?;
            Ok((reference, ShapingParams::identity(), Some(res)))
        }
        Scheme::Hs => {
            let problem = PsProblem::new(shaped_order.clone(), rate_floor)?;
            let res = optimize::design_hs(&problem, stats, ch, None, GsMethod::TrustRegion)?;
            let shaping = res.shaping();
            let reference = shaped_order
                .shaped(&shaping)
                .with_priors(res.priors.clone())?;
            let reference = optimize::regray_support(&reference, stats, ch)?;
            Ok((reference, shaping, Some(res)))
        }
    }
}

fn sweep_point(spec: &SweepSpec, scheme: Scheme, value: f64, seed: u64) -> Result<SweepRow> {
    let (profile, ebno_db) = point_profile(spec, value)?;
    let alpha = 10f64.powf(ebno_db / 10.0) * spec.rate_floor * profile.sigma_w2;
    let design_ch = ChannelState::awgn(alpha)?;
    let design_stats = profile.aggregate(&design_ch)?.iq_statistics()?;

    let uniform = &spec.uniform_constellation;
    let shaped_order = &spec.shaped_constellation;

    let redesign = spec.redesign_per_realization
        && matches!(spec.channel, ChannelKind::Rayleigh { .. })
        && scheme != Scheme::Ns;

    // Fixed design at the nominal (unit-gain) statistics.
    let (reference, _, _) = design_scheme(
        scheme,
        uniform,
        shaped_order,
        spec.rate_floor,
        &design_stats,
        &design_ch,
    )?;

    let mut cfg = LinkConfig::new(
        reference,
        profile,
        ebno_db,
        spec.rate_floor,
        spec.trials,
        seed,
    )?;
    cfg.channel = spec.channel;
    cfg.workers = spec.workers;
    cfg.max_rounds = spec.max_rounds;

    let (sim, analytics) = if redesign {
        let planner = |ch: &ChannelState| -> Result<RealizationPlan> {
            let stats = profile.aggregate(ch)?.iq_statistics()?;
            let (reference, _, _) = design_scheme(
                scheme,
                uniform,
                shaped_order,
                spec.rate_floor,
                &stats,
                ch,
            )?;
            let bound = analysis::ber_upper_bound(&reference, &stats, ch, None)?;
            let floor = analysis::error_floor(&reference, &profile, ch.g)?;
            Ok(RealizationPlan {
                reference,
                bound,
                floor,
            })
        };
        run_link_with(&cfg, planner)?
    } else {
        run_link_analyzed(&cfg)?
    };

    Ok(SweepRow {
        axis_value: value,
        scheme,
        ber_sim: sim.ber,
        ber_ci: sim.ber_ci95,
        ber_bound: analytics.bound_mean,
        throughput_sim: sim.throughput,
        throughput_bound: (1.0 - analytics.bound_mean.min(1.0)) * analytics.entropy_mean,
        floor: analytics.floor_mean,
        ok: true,
        note: String::new(),
    })
}

/// CSV header for sweep tables (a manifest column is appended by callers
/// that stamp artifacts).
pub const SWEEP_CSV_HEADER: &str =
    "axis_value,scheme,ber_sim,ber_ci,ber_bound,throughput_sim,throughput_bound,floor";

/// One CSV line per row, fields in header order.
pub fn sweep_row_csv(row: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        row.axis_value,
        row.scheme.name(),
        row.ber_sim,
        row.ber_ci,
        row.ber_bound,
        row.throughput_sim,
        row.throughput_bound,
        row.floor
    )
}
