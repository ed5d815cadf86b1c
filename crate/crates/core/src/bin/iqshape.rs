//! Command-line driver for constellation design, bound evaluation, link
//! simulation, and sweeps.
//!
//! Each subcommand resolves an experiment spec (optionally loaded from a
//! JSON or `key=value` file, with flags overriding), runs it, and writes
//! artifacts plus a manifest into the output directory. Exit codes: 0 on
//! success, 2 on an invalid spec, 3 when a designer fails to converge
//! (partial artifacts are still written).

use clap::{Args, Parser, Subcommand};
use iqshape::experiment::{self, error_record, exit_code_for, Action, ExperimentSpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "iqshape", version, about = "Shaped-constellation design and link simulation under improper hardware distortion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design non-uniform symbol priors (probabilistic shaping).
    DesignPs(CommonArgs),
    /// Design the translation/rotation transform (geometric shaping).
    DesignGs(CommonArgs),
    /// Jointly design priors and transform (hybrid shaping).
    DesignHs(CommonArgs),
    /// Evaluate the analytical BER upper bound for a scheme.
    Bound(CommonArgs),
    /// Evaluate the high-power error floor for a scheme.
    Floor(CommonArgs),
    /// Run one Monte-Carlo link simulation point.
    Simulate(CommonArgs),
    /// Sweep EbNo or distortion across schemes, simulating each point.
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Spec file (JSON or key=value); flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory for artifacts (else $IQSHAPE_OUT_DIR, else ".").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme: ns, gs, ps, hs, or all (bound/floor/sweep).
    #[arg(long)]
    scheme: Option<String>,
    /// Constellation family: qam, psk, pam.
    #[arg(long)]
    kind: Option<String>,
    /// Uniform-baseline order M_u.
    #[arg(long = "m-u")]
    m_u: Option<usize>,
    /// Shaped-design order M_nu.
    #[arg(long = "m-nu")]
    m_nu: Option<usize>,
    /// EbNo in dB (single value), or grid `start:step:stop` for sweep.
    #[arg(long)]
    ebno: Option<String>,
    /// Total distortion kappa: rescales kappa_t + kappa_r, or grid for sweep.
    #[arg(long)]
    kappa: Option<String>,
    /// Transmitter distortion variance.
    #[arg(long = "kappa-t")]
    kappa_t: Option<f64>,
    /// Receiver distortion variance.
    #[arg(long = "kappa-r")]
    kappa_r: Option<f64>,
    /// Ratio Re(kappa_tilde)/kappa of the distortion pseudo-variance.
    #[arg(long)]
    ratio: Option<f64>,
    /// I/Q correlation of the distortion.
    #[arg(long = "rho-eta")]
    rho_eta: Option<f64>,
    /// AWGN variance.
    #[arg(long = "sigma-w2")]
    sigma_w2: Option<f64>,
    /// Direct transmit-power override (bound/floor).
    #[arg(long)]
    alpha: Option<f64>,
    /// Channel: awgn or rayleigh.
    #[arg(long)]
    channel: Option<String>,
    /// Rayleigh variance.
    #[arg(long)]
    lambda: Option<f64>,
    /// Symbols per fading realization.
    #[arg(long)]
    spr: Option<u64>,
    /// Rate floor in bits/symbol (default log2(m_u)).
    #[arg(long = "rate-floor")]
    rate_floor: Option<f64>,
    /// Monte-Carlo trials per point (per round).
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = default pool).
    #[arg(long)]
    workers: Option<usize>,
    /// Adaptive extension rounds.
    #[arg(long = "max-rounds")]
    max_rounds: Option<u32>,
    /// Shaping search: trust_region or gradient_descent.
    #[arg(long = "gs-method")]
    gs_method: Option<String>,
    /// Hybrid order: auto, ps_first, gs_first.
    #[arg(long = "hs-order")]
    hs_order: Option<String>,
    /// Reuse one design across fading realizations instead of redesigning.
    #[arg(long = "fixed-design", default_value_t = false)]
    fixed_design: bool,
}

fn build_spec(action: Action, args: &CommonArgs) -> Result<ExperimentSpec, iqshape::Error> {
    let mut spec = match &args.spec {
        Some(path) => ExperimentSpec::from_file(path)?,
        None => ExperimentSpec::new(action),
    };
    spec.action = action;
    if let Some(v) = &args.out {
        spec.out_dir = Some(v.clone());
    }
    if let Some(v) = &args.scheme {
        spec.scheme = v.clone();
    }
    if let Some(v) = &args.kind {
        spec.kind = v.clone();
    }
    if let Some(v) = args.m_u {
        spec.m_u = v;
    }
    if let Some(v) = args.m_nu {
        spec.m_nu = v;
    }
    if let Some(v) = &args.ebno {
        if action == Action::Sweep && v.contains([':', ',']) {
            spec.ebno_grid = Some(v.clone());
        } else {
            spec.ebno_db = v.parse().map_err(|_| {
                iqshape::Error::InvalidConfig {
                    field: "ebno".into(),
                    reason: format!("cannot parse `{v}`"),
                }
            })?;
        }
    }
    if let Some(v) = &args.kappa {
        if action == Action::Sweep && v.contains([':', ',']) {
            spec.kappa_grid = Some(v.clone());
        } else {
            spec.kappa = Some(v.parse().map_err(|_| iqshape::Error::InvalidConfig {
                field: "kappa".into(),
                reason: format!("cannot parse `{v}`"),
            })?);
        }
    }
    if let Some(v) = args.kappa_t {
        spec.kappa_t = v;
    }
    if let Some(v) = args.kappa_r {
        spec.kappa_r = v;
    }
    if let Some(v) = args.ratio {
        spec.kappa_tilde_i_ratio = v;
    }
    if let Some(v) = args.rho_eta {
        spec.rho_eta = v;
    }
    if let Some(v) = args.sigma_w2 {
        spec.sigma_w2 = v;
    }
    if let Some(v) = args.alpha {
        spec.alpha = Some(v);
    }
    if let Some(v) = &args.channel {
        spec.channel = v.clone();
    }
    if let Some(v) = args.lambda {
        spec.lambda = v;
    }
    if let Some(v) = args.spr {
        spec.symbols_per_realization = v;
    }
    if let Some(v) = args.rate_floor {
        spec.rate_floor = Some(v);
    }
    if let Some(v) = args.trials {
        spec.trials = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.workers {
        spec.workers = v;
    }
    if let Some(v) = args.max_rounds {
        spec.max_rounds = v;
    }
    if let Some(v) = &args.gs_method {
        spec.gs_method = v.clone();
    }
    if let Some(v) = &args.hs_order {
        spec.hs_order = v.clone();
    }
    if args.fixed_design {
        spec.fixed_design = true;
    }
    // Sweeps default to all schemes unless one was named.
    if action == Action::Sweep && args.scheme.is_none() && args.spec.is_none() {
        spec.scheme = "all".into();
    }
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (action, args) = match &cli.command {
        Command::DesignPs(a) => (Action::DesignPs, a),
        Command::DesignGs(a) => (Action::DesignGs, a),
        Command::DesignHs(a) => (Action::DesignHs, a),
        Command::Bound(a) => (Action::Bound, a),
        Command::Floor(a) => (Action::Floor, a),
        Command::Simulate(a) => (Action::Simulate, a),
        Command::Sweep(a) => (Action::Sweep, a),
    };

    let spec = match build_spec(action, args) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::to_string(&error_record(&e)).unwrap_or_else(|_| e.to_string())
            );
            return ExitCode::from(2);
        }
    };

    match experiment::run(&spec) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::to_string(&error_record(&e)).unwrap_or_else(|_| e.to_string())
            );
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
