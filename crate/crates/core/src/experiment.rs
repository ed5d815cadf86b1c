//! Experiment driver: a declarative spec (JSON or flat `key=value`) that
//! designs constellations, evaluates bounds and floors, runs link
//! simulations and sweeps, and writes plot-ready artifacts.
//!
//! Every run writes a manifest (the resolved spec, seed, and library
//! version); run tables carry the manifest hash on every row, and re-running
//! a manifest reproduces its CSV artifacts byte for byte.

use crate::analysis;
use crate::constellation::{Constellation, ConstellationKind, ShapingParams};
use crate::error::{Error, Result};
use crate::noise::{ChannelState, DistortionProfile};
use crate::optimize::{self, DesignResult, GsMethod, HsOrder, PsProblem};
use crate::simulate::{
    self, sweep_row_csv, ChannelKind, LinkConfig, RealizationPlan, Scheme, SweepAxis, SweepSpec,
    SWEEP_CSV_HEADER,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Environment variable naming the default artifact directory.
pub const OUT_DIR_ENV: &str = "IQSHAPE_OUT_DIR";

/// What a run should do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    DesignPs,
    DesignGs,
    DesignHs,
    Bound,
    Floor,
    Simulate,
    Sweep,
}

impl std::str::FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "design-ps" => Ok(Action::DesignPs),
            "design-gs" => Ok(Action::DesignGs),
            "design-hs" => Ok(Action::DesignHs),
            "bound" => Ok(Action::Bound),
            "floor" => Ok(Action::Floor),
            "simulate" => Ok(Action::Simulate),
            "sweep" => Ok(Action::Sweep),
            other => Err(Error::SpecParse(format!("unknown action `{other}`"))),
        }
    }
}

fn default_kind() -> String {
    "qam".into()
}
fn default_m_u() -> usize {
    8
}
fn default_m_nu() -> usize {
    32
}
fn default_kappa_t() -> f64 {
    0.01
}
fn default_kappa_r() -> f64 {
    0.12
}
fn default_ratio() -> f64 {
    0.25
}
fn default_rho_eta() -> f64 {
    0.9
}
fn default_sigma_w2() -> f64 {
    1.0
}
fn default_channel() -> String {
    "awgn".into()
}
fn default_lambda() -> f64 {
    1.0
}
fn default_spr() -> u64 {
    10_000
}
fn default_ebno() -> f64 {
    30.0
}
fn default_trials() -> u64 {
    100_000
}
fn default_seed() -> u64 {
    1234
}
fn default_scheme() -> String {
    "ns".into()
}
fn default_method() -> String {
    "trust_region".into()
}
fn default_order() -> String {
    "auto".into()
}
fn default_max_rounds() -> u32 {
    1
}

/// Declarative experiment description. Unknown fields are rejected so typos
/// surface as spec errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub action: Action,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_m_u")]
    pub m_u: usize,
    #[serde(default = "default_m_nu")]
    pub m_nu: usize,
    #[serde(default = "default_kappa_t")]
    pub kappa_t: f64,
    #[serde(default = "default_kappa_r")]
    pub kappa_r: f64,
    #[serde(default = "default_ratio")]
    pub kappa_tilde_i_ratio: f64,
    #[serde(default = "default_rho_eta")]
    pub rho_eta: f64,
    #[serde(default = "default_sigma_w2")]
    pub sigma_w2: f64,
    /// Optional total distortion rescale: keeps the tx/rx split and sets
    /// `kappa_t + kappa_r` to this value.
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default = "default_channel")]
    pub channel: String,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_spr")]
    pub symbols_per_realization: u64,
    #[serde(default = "default_ebno")]
    pub ebno_db: f64,
    /// Sweep grid over EbNo in dB (list or `start:step:stop` string).
    #[serde(default)]
    pub ebno_grid: Option<String>,
    /// Sweep grid over total distortion.
    #[serde(default)]
    pub kappa_grid: Option<String>,
    /// Direct transmit-power override for bound/floor evaluations.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Rate floor in bits/symbol; defaults to log2(m_u).
    #[serde(default)]
    pub rate_floor: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    #[serde(default = "default_method")]
    pub gs_method: String,
    #[serde(default = "default_order")]
    pub hs_order: String,
    /// Redesign per channel realization under fading (the default); set
    /// false to reuse one fixed design across realizations.
    #[serde(default)]
    pub fixed_design: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(action: Action) -> Self {
        serde_json::from_value(serde_json::json!({ "action": action }))
            .expect("defaults are complete")
    }

    /// Reads a spec from JSON or flat `key=value` text (sniffed).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::SpecParse(e.to_string()))
        } else {
            Self::from_key_values(text)
        }
    }

    /// Flat form: one `key=value` per line, `#` comments allowed. Values
    /// parse as JSON literals where possible, otherwise as strings.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut map = serde_json::Map::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::SpecParse(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let raw = value.trim();
            let parsed = serde_json::from_str::<serde_json::Value>(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            map.insert(key, parsed);
        }
        serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| Error::SpecParse(e.to_string()))
    }

    /// Resolved distortion profile, including the optional total-κ rescale.
    pub fn profile(&self) -> Result<DistortionProfile> {
        let (mut kt, mut kr) = (self.kappa_t, self.kappa_r);
        if let Some(kappa) = self.kappa {
            let total = kt + kr;
            if total <= 0.0 {
                if kappa > 0.0 {
                    return Err(Error::config(
                        "kappa",
                        "cannot rescale a zero-distortion profile; set kappa_t/kappa_r",
                    ));
                }
            } else {
                let scale = kappa / total;
                kt *= scale;
                kr *= scale;
            }
        }
        DistortionProfile::new(kt, kr, self.kappa_tilde_i_ratio, self.rho_eta, self.sigma_w2)
    }

    pub fn constellation_kind(&self) -> Result<ConstellationKind> {
        self.kind.parse()
    }

    pub fn uniform_constellation(&self) -> Result<Constellation> {
        Constellation::make(self.constellation_kind()?, self.m_u)
    }

    pub fn shaped_constellation(&self) -> Result<Constellation> {
        Constellation::make(self.constellation_kind()?, self.m_nu)
    }

    pub fn rate_floor(&self) -> f64 {
        self.rate_floor.unwrap_or((self.m_u as f64).log2())
    }

    pub fn channel_kind(&self) -> Result<ChannelKind> {
        match self.channel.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::AwgnUnitGain),
            "rayleigh" => Ok(ChannelKind::Rayleigh {
                lambda: self.lambda,
                symbols_per_realization: self.symbols_per_realization,
            }),
            other => Err(Error::config("channel", format!("unknown channel `{other}`"))),
        }
    }

    pub fn gs_method(&self) -> Result<GsMethod> {
        match self.gs_method.to_ascii_lowercase().as_str() {
            "trust_region" => Ok(GsMethod::TrustRegion),
            "gradient_descent" => Ok(GsMethod::GradientDescent),
            other => Err(Error::config("gs_method", format!("unknown method `{other}`"))),
        }
    }

    pub fn hs_order(&self) -> Result<Option<HsOrder>> {
        match self.hs_order.to_ascii_lowercase().as_str() {
            "auto" => Ok(None),
            "ps_first" => Ok(Some(HsOrder::PsFirst)),
            "gs_first" => Ok(Some(HsOrder::GsFirst)),
            other => Err(Error::config("hs_order", format!("unknown order `{other}`"))),
        }
    }

    /// Transmit power: the explicit override, else the EbNo mapping.
    pub fn alpha(&self) -> Result<f64> {
        let alpha = self
            .alpha
            .unwrap_or_else(|| 10f64.powf(self.ebno_db / 10.0) * self.rate_floor() * self.sigma_w2);
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::config("alpha", "transmit power must be positive"));
        }
        Ok(alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_nu < self.m_u {
            return Err(Error::config(
                "m_nu",
                format!("must be >= m_u ({} < {})", self.m_nu, self.m_u),
            ));
        }
        if self.trials < 1 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.max_rounds < 1 {
            return Err(Error::config("max_rounds", "must be at least 1"));
        }
        let rate = self.rate_floor();
        if !(rate > 0.0 && rate <= (self.m_nu as f64).log2() + 1e-12) {
            return Err(Error::config(
                "rate_floor",
                format!("must lie in (0, log2(m_nu)], got {rate}"),
            ));
        }
        self.profile()?;
        self.uniform_constellation()?;
        self.shaped_constellation()?;
        self.channel_kind()?;
        self.gs_method()?;
        self.hs_order()?;
        self.alpha()?;
        if self.action == Action::Sweep {
            let grids = self.ebno_grid.is_some() as u8 + self.kappa_grid.is_some() as u8;
            if grids != 1 {
                return Err(Error::config(
                    "ebno_grid",
                    "sweep needs exactly one of ebno_grid or kappa_grid",
                ));
            }
            self.sweep_axis()?;
        }
        self.schemes()?;
        Ok(())
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        if self.scheme.eq_ignore_ascii_case("all") {
            Ok(Scheme::ALL.to_vec())
        } else {
            Ok(vec![self.scheme.parse()?])
        }
    }

    pub fn sweep_axis(&self) -> Result<SweepAxis> {
        if let Some(g) = &self.ebno_grid {
            Ok(SweepAxis::EbnoDb(parse_grid(g)?))
        } else if let Some(g) = &self.kappa_grid {
            Ok(SweepAxis::Kappa(parse_grid(g)?))
        } else {
            Err(Error::config("ebno_grid", "sweep grid missing"))
        }
    }

    /// Canonical JSON used for the manifest and its hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn manifest_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        let digest = hasher.finalize();
        hex_prefix(&digest, 16)
    }
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut out = String::with_capacity(chars);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
        if out.len() >= chars {
            break;
        }
    }
    out.truncate(chars);
    out
}

/// Parses `start:step:stop`, a comma list, or a single number.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let bad = |t: &str| Error::config("grid", format!("cannot parse grid `{t}`"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(text));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad(text))?;
        let step: f64 = parts[1].trim().parse().map_err(|_| bad(text))?;
        let stop: f64 = parts[2].trim().parse().map_err(|_| bad(text))?;
        if !(step > 0.0) || stop < start {
            return Err(bad(text));
        }
        let n = ((stop - start) / step).round() as usize;
        let mut out: Vec<f64> = (0..=n).map(|i| start + step * i as f64).collect();
        out.retain(|v| *v <= stop + 1e-9);
        Ok(out)
    } else {
        text.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad(text)))
            .collect()
    }
}

/// Result of a run: exit code (0 success, 2 invalid spec, 3 solver
/// non-convergence with partial artifacts), written artifact paths, and a
/// one-line summary.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

/// Machine-readable error record written next to the artifacts (and to
/// stderr by the CLI).
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: String,
    pub field: Option<String>,
}

pub fn error_record(err: &Error) -> ErrorRecord {
    let field = match err {
        Error::InvalidConfig { field, .. } => Some(field.clone()),
        _ => None,
    };
    ErrorRecord {
        error: err.to_string(),
        field,
    }
}

/// Exit code classification for an error.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NonConvergence(_) => 3,
        _ => 2,
    }
}

struct RunContext {
    out_dir: PathBuf,
    manifest: String,
    artifacts: Vec<PathBuf>,
}

impl RunContext {
    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)?;
        self.artifacts.push(path.clone());
        Ok(path)
    }
}

/// Runs the spec and writes artifacts under its output directory (the
/// spec's `out_dir`, else `$IQSHAPE_OUT_DIR`, else the working directory).
pub fn run(spec: &ExperimentSpec) -> Result<RunOutcome> {
    spec.validate()?;
    let out_dir = spec
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut ctx = RunContext {
        out_dir,
        manifest: spec.manifest_hash(),
        artifacts: Vec::new(),
    };

    let manifest_body = serde_json::json!({
        "manifest": ctx.manifest,
        "version": env!("CARGO_PKG_VERSION"),
        "spec": serde_json::from_str::<serde_json::Value>(&spec.canonical_json()).unwrap(),
    });
    ctx.write(
        "manifest.json",
        &format!("{}\n", serde_json::to_string_pretty(&manifest_body).unwrap()),
    )?;

    match spec.action {
        Action::DesignPs | Action::DesignGs | Action::DesignHs => run_design(spec, &mut ctx),
        Action::Bound => run_bound(spec, &mut ctx, false),
        Action::Floor => run_bound(spec, &mut ctx, true),
        Action::Simulate => run_simulate(spec, &mut ctx),
        Action::Sweep => run_sweep(spec, &mut ctx),
    }
}

/// Designs the scheme named by the spec at its nominal unit-gain channel,
/// honoring the spec's method and order preferences for the schemes that
/// have them. Returns the transmission-ready reference constellation.
fn design_at_nominal(
    spec: &ExperimentSpec,
    scheme: Scheme,
) -> Result<(Constellation, ShapingParams, Option<DesignResult>)> {
    let profile = spec.profile()?;
    let ch = ChannelState::awgn(spec.alpha()?)?;
    let stats = profile.aggregate(&ch)?.iq_statistics()?;
    match scheme {
        Scheme::Gs => {
            let c = spec.uniform_constellation()?;
            let s = optimize::design_gs_multistart(
                &c,
                c.priors(),
                &stats,
                &ch,
                ShapingParams::identity(),
                spec.gs_method()?,
            )?;
            let reference = optimize::regray_support(&c.shaped(&s), &stats, &ch)?;
            Ok((reference, s, None))
        }
        Scheme::Hs => {
            let c = spec.shaped_constellation()?;
            let problem = PsProblem::new(c.clone(), spec.rate_floor())?;
            let res =
                optimize::design_hs(&problem, &stats, &ch, spec.hs_order()?, spec.gs_method()?)?;
            let shaping = res.shaping();
            let reference = c.shaped(&shaping).with_priors(res.priors.clone())?;
            let reference = optimize::regray_support(&reference, &stats, &ch)?;
            Ok((reference, shaping, Some(res)))
        }
        Scheme::Ns | Scheme::Ps => simulate::design_scheme(
            scheme,
            &spec.uniform_constellation()?,
            &spec.shaped_constellation()?,
            spec.rate_floor(),
            &stats,
            &ch,
        ),
    }
}

fn run_design(spec: &ExperimentSpec, ctx: &mut RunContext) -> Result<RunOutcome> {
    let scheme = match spec.action {
        Action::DesignPs => Scheme::Ps,
        Action::DesignGs => Scheme::Gs,
        Action::DesignHs => Scheme::Hs,
        _ => unreachable!(),
    };
    let (reference, shaping, result) = design_at_nominal(spec, scheme)?;
    let profile = spec.profile()?;
    let ch = ChannelState::awgn(spec.alpha()?)?;
    let stats = profile.aggregate(&ch)?.iq_statistics()?;
    let bound = analysis::ber_upper_bound(&reference, &stats, &ch, None)?;

    let (kkt, multipliers, iterations, converged, trace) = match &result {
        Some(r) => (
            r.kkt_residual,
            r.multipliers,
            r.iterations,
            r.converged,
            r.trace.clone(),
        ),
        None => (0.0, [0.0; 3], 0, true, Vec::new()),
    };

    let design_json = serde_json::json!({
        "scheme": scheme.name(),
        "ebno_db": spec.ebno_db,
        "alpha": spec.alpha()?,
        "priors": reference.priors(),
        "zeta": shaping.zeta,
        "theta": shaping.theta,
        "bound": bound,
        "entropy": reference.entropy(),
        "power": reference.distribution_power(),
        "kkt_residual": kkt,
        "multipliers": multipliers,
        "iterations": iterations,
        "converged": converged,
        "manifest": ctx.manifest,
    });
    ctx.write(
        "design.json",
        &format!("{}\n", serde_json::to_string_pretty(&design_json).unwrap()),
    )?;

    let mut trace_csv = String::from("iter,bound,entropy,power,kkt_residual,manifest\n");
    for t in &trace {
        trace_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.iter, t.bound, t.entropy, t.power, t.kkt_residual, ctx.manifest
        ));
    }
    ctx.write("trace.csv", &trace_csv)?;
    ctx.write("constellation.csv", &reference.to_csv())?;

    let exit_code = if converged { 0 } else { 3 };
    Ok(RunOutcome {
        exit_code,
        artifacts: ctx.artifacts.clone(),
        summary: format!(
            "{} design: bound {:.6e}, entropy {:.6} bits, zeta {:.4}, theta {:.4}{}",
            scheme.name(),
            bound,
            reference.entropy(),
            shaping.zeta,
            shaping.theta,
            if converged { "" } else { " (NOT converged)" }
        ),
    })
}

fn run_bound(spec: &ExperimentSpec, ctx: &mut RunContext, floor: bool) -> Result<RunOutcome> {
    let schemes = spec.schemes()?;
    let profile = spec.profile()?;
    let ch = ChannelState::awgn(spec.alpha()?)?;
    let stats = profile.aggregate(&ch)?.iq_statistics()?;
    let mut records = Vec::new();
    for scheme in schemes {
        let (reference, _, _) = design_at_nominal(spec, scheme)?;
        let value = if floor {
            analysis::error_floor(&reference, &profile, ch.g)?
        } else {
            analysis::ber_upper_bound(&reference, &stats, &ch, None)?
        };
        let throughput = analysis::throughput_lower_bound(&reference, &stats, &ch, None)?;
        records.push(serde_json::json!({
            "scheme": scheme.name(),
            "ebno_db": spec.ebno_db,
            "alpha": spec.alpha()?,
            "value": value,
            "throughput_lb": throughput,
            "entropy": reference.entropy(),
            "manifest": ctx.manifest,
        }));
    }
    let name = if floor { "floor.json" } else { "bound.json" };
    ctx.write(
        name,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&serde_json::Value::Array(records.clone())).unwrap()
        ),
    )?;
    let summary = records
        .iter()
        .map(|r| format!("{}={:.6e}", r["scheme"].as_str().unwrap(), r["value"].as_f64().unwrap()))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(RunOutcome {
        exit_code: 0,
        artifacts: ctx.artifacts.clone(),
        summary: format!("{}: {summary}", if floor { "floor" } else { "bound" }),
    })
}

fn run_simulate(spec: &ExperimentSpec, ctx: &mut RunContext) -> Result<RunOutcome> {
    let scheme: Scheme = spec
        .schemes()?
        .first()
        .copied()
        .ok_or_else(|| Error::config("scheme", "simulate needs one scheme"))?;
    let (reference, _, _) = design_at_nominal(spec, scheme)?;
    let profile = spec.profile()?;
    let mut cfg = LinkConfig::new(
        reference,
        profile,
        spec.ebno_db,
        spec.rate_floor(),
        spec.trials,
        spec.seed,
    )?;
    cfg.channel = spec.channel_kind()?;
    cfg.workers = spec.workers;
    cfg.max_rounds = spec.max_rounds;

    let redesign = !spec.fixed_design
        && matches!(cfg.channel, ChannelKind::Rayleigh { .. })
        && scheme != Scheme::Ns;
    let (sim, analytics) = if redesign {
        let uniform = spec.uniform_constellation()?;
        let shaped_order = spec.shaped_constellation()?;
        let rate = spec.rate_floor();
        let planner = |ch: &ChannelState| -> Result<RealizationPlan> {
            let stats = profile.aggregate(ch)?.iq_statistics()?;
            let (reference, _, _) =
                simulate::design_scheme(scheme, &uniform, &shaped_order, rate, &stats, ch)?;
            let bound = analysis::ber_upper_bound(&reference, &stats, ch, None)?;
            let floor = analysis::error_floor(&reference, &profile, ch.g)?;
            Ok(RealizationPlan {
                reference,
                bound,
                floor,
            })
        };
        simulate::run_link_with(&cfg, planner)?
    } else {
        simulate::run_link_analyzed(&cfg)?
    };

    let sim_json = serde_json::json!({
        "scheme": scheme.name(),
        "ebno_db": spec.ebno_db,
        "result": sim,
        "analytics": analytics,
        "manifest": ctx.manifest,
    });
    ctx.write(
        "sim.json",
        &format!("{}\n", serde_json::to_string_pretty(&sim_json).unwrap()),
    )?;
    let mut csv = format!("{SWEEP_CSV_HEADER},manifest\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        spec.ebno_db,
        scheme.name(),
        sim.ber,
        sim.ber_ci95,
        analytics.bound_mean,
        sim.throughput,
        (1.0 - analytics.bound_mean.min(1.0)) * analytics.entropy_mean,
        analytics.floor_mean,
        ctx.manifest
    ));
    ctx.write("sim.csv", &csv)?;
    Ok(RunOutcome {
        exit_code: 0,
        artifacts: ctx.artifacts.clone(),
        summary: format!(
            "{} @ {} dB: ber {:.6e} (ci {:.1e}), bound {:.6e}, throughput {:.4}",
            scheme.name(),
            spec.ebno_db,
            sim.ber,
            sim.ber_ci95,
            analytics.bound_mean,
            sim.throughput
        ),
    })
}

fn run_sweep(spec: &ExperimentSpec, ctx: &mut RunContext) -> Result<RunOutcome> {
    let sweep_spec = SweepSpec {
        uniform_constellation: spec.uniform_constellation()?,
        shaped_constellation: spec.shaped_constellation()?,
        rate_floor: spec.rate_floor(),
        profile: spec.profile()?,
        channel: spec.channel_kind()?,
        ebno_db: spec.ebno_db,
        schemes: spec.schemes()?,
        axis: spec.sweep_axis()?,
        trials: spec.trials,
        seed: spec.seed,
        workers: spec.workers,
        max_rounds: spec.max_rounds,
        redesign_per_realization: !spec.fixed_design,
    };
    let rows = simulate::sweep(&sweep_spec)?;
    let mut csv = format!("{SWEEP_CSV_HEADER},manifest\n");
    let mut failures = 0;
    for row in &rows {
        csv.push_str(&format!("{},{}\n", sweep_row_csv(row), ctx.manifest));
        if !row.ok {
            failures += 1;
        }
    }
    ctx.write("sweep.csv", &csv)?;
    let exit_code = if failures > 0 { 3 } else { 0 };
    Ok(RunOutcome {
        exit_code,
        artifacts: ctx.artifacts.clone(),
        summary: format!(
            "sweep: {} rows ({} flagged) -> sweep.csv",
            rows.len(),
            failures
        ),
    })
}
