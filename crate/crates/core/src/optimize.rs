//! Constellation design algorithms.
//!
//! Probabilistic shaping minimizes the BER union bound over the prior
//! simplex under a unit power cap and an entropy (rate) floor. The outer
//! loop is successive convex programming: the bound is replaced by its
//! first-order Taylor surrogate around the current iterate and the affine
//! subproblem is solved through its KKT system. Geometric shaping searches
//! the translation/rotation box with a reflective trust-region or projected
//! gradient descent; hybrid shaping alternates the two.
//!
//! Every accepted subproblem solution records its KKT residual, and every
//! design loop is deterministic: identical inputs produce bit-identical
//! traces.

use crate::analysis::{self, bound_over, grad_priors_over, ZERO_PRIOR_TOL};
use crate::constellation::{entropy, Constellation, ShapingParams};
use crate::error::{Error, Result};
use crate::noise::{ChannelState, IqStats};
use num_complex::Complex64;
use serde::Serialize;

/// Priors below this are clipped to exact zero and their symbols retired
/// from the working support.
pub const PRIOR_CLIP: f64 = 1e-9;

/// Probabilistic-shaping problem: fixed symbol coordinates, a rate floor in
/// bits per symbol, a power cap, and the outer-loop stopping controls.
#[derive(Debug, Clone)]
pub struct PsProblem {
    pub constellation: Constellation,
    pub rate_floor: f64,
    pub power_cap: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl PsProblem {
    pub fn new(constellation: Constellation, rate_floor: f64) -> Result<Self> {
        let p = Self {
            constellation,
            rate_floor,
            power_cap: 1.0,
            tolerance: 1e-9,
            max_iters: 400,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.constellation.len() as f64;
        if self.rate_floor > m.log2() + 1e-12 {
            return Err(Error::InfeasibleProblem(format!(
                "rate floor {} exceeds log2(M) = {}",
                self.rate_floor,
                m.log2()
            )));
        }
        if !(self.rate_floor > 0.0) {
            return Err(Error::InfeasibleProblem(
                "rate floor must be positive".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InfeasibleProblem("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// One accepted outer iteration of a design loop.
#[derive(Debug, Clone, Serialize)]
pub struct TracePoint {
    pub iter: usize,
    pub bound: f64,
    pub entropy: f64,
    pub power: f64,
    pub kkt_residual: f64,
}

/// Outcome of a design run: the optimized priors and shaping, the achieved
/// bound, KKT diagnostics of the last inner solve, and the iteration trace.
#[derive(Debug, Clone, Serialize)]
pub struct DesignResult {
    pub priors: Vec<f64>,
    pub zeta: f64,
    pub theta: f64,
    pub bound_value: f64,
    pub kkt_residual: f64,
    pub multipliers: [f64; 3],
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

impl DesignResult {
    pub fn shaping(&self) -> ShapingParams {
        ShapingParams {
            zeta: self.zeta,
            theta: self.theta,
        }
    }
}

/// Affine surrogate of the BER bound around an anchor distribution:
/// value and gradient at the anchor, valid on the anchor's support.
#[derive(Debug, Clone)]
pub struct AffineSurrogate {
    pub anchor: Vec<f64>,
    pub constant: f64,
    pub gradient: Vec<f64>,
    pub support: Vec<usize>,
}

impl AffineSurrogate {
    /// Surrogate value at `p`; coordinates outside the support must be zero.
    pub fn eval(&self, p: &[f64]) -> f64 {
        let mut acc = self.constant;
        for &m in &self.support {
            acc += self.gradient[m] * (p[m] - self.anchor[m]);
        }
        acc
    }
}

/// First-order Taylor surrogate of the bound at `p_anchor`.
pub fn linearize_bound(
    c: &Constellation,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
    p_anchor: &[f64],
) -> Result<AffineSurrogate> {
    let support: Vec<usize> = (0..c.len())
        .filter(|&m| p_anchor[m] > ZERO_PRIOR_TOL)
        .collect();
    if support.len() < 2 {
        return Err(Error::InvalidPriors(
            "anchor must support at least two symbols".into(),
        ));
    }
    let sub_symbols: Vec<Complex64> = support.iter().map(|&m| c.symbol(m)).collect();
    let sub_priors: Vec<f64> = support.iter().map(|&m| p_anchor[m]).collect();
    let bits = c.bits_per_symbol() as f64;
    let constant = bound_over(&sub_symbols, &sub_priors, bits, stats, ch, shaping)?;
    let sub_grad = grad_priors_over(&sub_symbols, &sub_priors, bits, stats, ch, shaping)?;
    let mut gradient = vec![0.0; c.len()];
    for (k, &m) in support.iter().enumerate() {
        gradient[m] = sub_grad[k];
    }
    Ok(AffineSurrogate {
        anchor: p_anchor.to_vec(),
        constant,
        gradient,
        support,
    })
}

/// Gibbs-form distribution `softmax(−t·c − s·e)` over a support.
fn tilted(c: &[f64], e: &[f64], t: f64, s: f64) -> Vec<f64> {
    let mut exps: Vec<f64> = c
        .iter()
        .zip(e)
        .map(|(&ci, &ei)| -t * ci - s * ei)
        .collect();
    let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in &mut exps {
        *v = (*v - max).exp();
        z += *v;
    }
    exps.iter_mut().for_each(|v| *v /= z);
    exps
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inner KKT solution on a working support.
#[derive(Debug, Clone)]
struct KktSolution {
    priors: Vec<f64>,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    residual: f64,
}

/// Solves the affine subproblem restricted to one support set:
/// minimize `c·p` over the simplex with `Σ e·p ≤ cap` and `H(p) ≥ rate`.
///
/// The stationarity system is eliminated in closed form by the Gibbs
/// parameterization `p ∝ exp(−t·c − s·e)` (`t = ln2/λ₃`, `s = λ₁·t`), which
/// satisfies the gradient and simplex equations exactly; a damped Newton
/// iteration then drives the entropy and power residuals to zero.
fn solve_support(c: &[f64], e: &[f64], rate: f64, cap: f64) -> Result<KktSolution> {
    let k = c.len();
    let limit = (k as f64).log2();
    if rate > limit + 1e-9 {
        return Err(Error::InfeasibleProblem(format!(
            "support of {k} symbols cannot reach rate {rate}"
        )));
    }
    if e.iter().cloned().fold(f64::INFINITY, f64::min) > cap + 1e-12 {
        return Err(Error::InfeasibleProblem(
            "every supported symbol exceeds the power cap".into(),
        ));
    }

    // Rate floor equal to the support capacity forces the uniform law.
    if (limit - rate).abs() <= 1e-9 {
        return Ok(forced_uniform(c, e, cap));
    }

    let entropy_at = |t: f64, s: f64| entropy(&tilted(c, e, t, s));
    let power_at = |t: f64, s: f64| dot(e, &tilted(c, e, t, s));

    // Stage A: power multiplier at zero; pick t so the entropy floor binds.
    let mut t_hi = 1.0;
    let mut entropy_slack = false;
    while entropy_at(t_hi, 0.0) > rate {
        t_hi *= 2.0;
        if t_hi > 1e15 {
            entropy_slack = true;
            break;
        }
    }
    let mut t = if entropy_slack {
        t_hi
    } else {
        let (mut lo, mut hi) = (0.0, t_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if entropy_at(mid, 0.0) > rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut s = 0.0;

    // Stage B: if the power cap is violated, activate its multiplier and
    // solve both equalities with a damped Newton iteration.
    if power_at(t, s) > cap + 1e-12 {
        let mut mu = 1e-10;
        for _ in 0..300 {
            let q = tilted(c, e, t, s);
            let h = entropy(&q);
            let p = dot(e, &q);
            let g = [h - rate, p - cap];
            if g[0].abs() < 1e-12 && g[1].abs() < 1e-12 {
                break;
            }
            let ec = dot(c, &q);
            let ee = dot(e, &q);
            let (mut cov, mut var_e) = (0.0, 0.0);
            let (mut hc, mut he) = (0.0, 0.0);
            for m in 0..k {
                let dc = c[m] - ec;
                let de = e[m] - ee;
                cov += q[m] * dc * de;
                var_e += q[m] * de * de;
                // d H/d t and d H/d s pick up the log term.
                let lg = if q[m] > 0.0 { q[m].log2() } else { 0.0 };
                hc += q[m] * dc * lg;
                he += q[m] * de * lg;
            }
            let j = [[hc, he], [-cov, -var_e]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let (dt, ds) = if det.abs() > 1e-300 {
                (
                    (-g[0] * j[1][1] + g[1] * j[0][1]) / det,
                    (-g[1] * j[0][0] + g[0] * j[1][0]) / det,
                )
            } else {
                (-g[0], -g[1])
            };
            // Damped update keeping t > 0 and s >= 0.
            let mut step = 1.0;
            let norm0 = g[0].abs().max(g[1].abs());
            let mut accepted = false;
            for _ in 0..60 {
                let tn = (t + step * dt).max(1e-12);
                let sn = (s + step * ds).max(0.0);
                let qn = tilted(c, e, tn, sn);
                let gn = [entropy(&qn) - rate, dot(e, &qn) - cap];
                if gn[0].abs().max(gn[1].abs()) < norm0 {
                    t = tn;
                    s = sn;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                mu *= 10.0;
                if mu > 1.0 {
                    break;
                }
            }
        }
        // The cap can turn out inactive after all; fall back to stage A.
        if s <= 1e-15 && power_at(t, 0.0) <= cap + 1e-9 {
            s = 0.0;
        }
    }

    let priors = tilted(c, e, t, s);
    let lambda3 = if entropy_slack {
        0.0
    } else {
        std::f64::consts::LN_2 / t
    };
    let lambda1 = s / t;
    // lambda2 comes from the normalizer of the Gibbs form.
    let mut z = 0.0;
    let max_exp = c
        .iter()
        .zip(e)
        .map(|(&ci, &ei)| -t * ci - s * ei)
        .fold(f64::NEG_INFINITY, f64::max);
    for m in 0..k {
        z += (-t * c[m] - s * e[m] - max_exp).exp();
    }
    let lnz = z.ln() + max_exp;
    let lambda2 = (lnz - 1.0) / t;

    let residual = kkt_residual(c, e, &priors, rate, cap, lambda1, lambda2, lambda3);
    Ok(KktSolution {
        priors,
        lambda1,
        lambda2,
        lambda3,
        residual,
    })
}

/// Uniform law on the support. This is the boundary case where the rate
/// floor equals the support capacity, so the feasible set is the single
/// point `p = 1/K`: the point is optimal by feasibility alone and no exact
/// stationarity multipliers need exist (the set has no interior). The
/// reported residual therefore covers the primal conditions; multipliers
/// are the least-squares fit, for diagnostics.
fn forced_uniform(c: &[f64], e: &[f64], cap: f64) -> KktSolution {
    let k = c.len();
    let priors = vec![1.0 / k as f64; k];
    let power = dot(e, &priors);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / k as f64;
    let (mc, me) = (mean(c), mean(e));
    let (mut cov, mut var_e) = (0.0, 0.0);
    for m in 0..k {
        cov += (c[m] - mc) * (e[m] - me);
        var_e += (e[m] - me) * (e[m] - me);
    }
    let mut lambda1 = if var_e > 1e-300 { -cov / var_e } else { 0.0 };
    // The power multiplier must be inactive unless the cap binds.
    if lambda1 < 0.0 || power < cap - 1e-9 {
        lambda1 = 0.0;
    }
    let lambda2 = -(mc + lambda1 * me);
    let sum: f64 = priors.iter().sum();
    let residual = (sum - 1.0)
        .abs()
        .max((power - cap).max(0.0))
        .max(((k as f64).log2() - entropy(&priors)).max(0.0));
    KktSolution {
        priors,
        lambda1,
        lambda2,
        lambda3: 0.0,
        residual,
    }
}

/// Infinity norm of the KKT system on a support: stationarity with the
/// given multipliers, primal feasibility, and complementary slackness.
fn kkt_residual(
    c: &[f64],
    e: &[f64],
    p: &[f64],
    rate: f64,
    cap: f64,
    l1: f64,
    l2: f64,
    l3: f64,
) -> f64 {
    let mut res: f64 = 0.0;
    let inv_ln2 = 1.0 / std::f64::consts::LN_2;
    for m in 0..c.len() {
        let stat = c[m] + l1 * e[m] + l2 + l3 * (inv_ln2 + p[m].log2());
        res = res.max(stat.abs());
    }
    let sum: f64 = p.iter().sum();
    res = res.max((sum - 1.0).abs());
    let power = dot(e, p);
    let h = entropy(p);
    res = res.max((power - cap).max(0.0));
    res = res.max((rate - h).max(0.0));
    res = res.max((l1 * (power - cap)).abs());
    res = res.max((l3 * (rate - h)).abs());
    res
}

/// Solves the convexified design subproblem around the surrogate's anchor:
/// minimize the affine surrogate over the simplex subject to the power cap
/// and the entropy floor. Coordinates whose priors fall below [`PRIOR_CLIP`]
/// are zeroed and the reduced system is re-solved.
pub fn solve_p1a(
    surrogate: &AffineSurrogate,
    problem: &PsProblem,
    p_init: &[f64],
) -> Result<(Vec<f64>, KktDiagnostics)> {
    problem.validate()?;
    let energies: Vec<f64> = problem
        .constellation
        .symbols()
        .iter()
        .map(|x| x.norm_sqr())
        .collect();
    solve_p1a_with_energies(surrogate, &energies, problem, p_init)
}

/// KKT diagnostics of an accepted subproblem solution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KktDiagnostics {
    pub residual: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

fn solve_p1a_with_energies(
    surrogate: &AffineSurrogate,
    energies: &[f64],
    problem: &PsProblem,
    p_init: &[f64],
) -> Result<(Vec<f64>, KktDiagnostics)> {
    let m_full = problem.constellation.len();
    let mut support: Vec<usize> = surrogate
        .support
        .iter()
        .cloned()
        .filter(|&m| p_init[m] > ZERO_PRIOR_TOL)
        .collect();
    if support.is_empty() {
        support = surrogate.support.clone();
    }

    loop {
        let c_sub: Vec<f64> = support.iter().map(|&m| surrogate.gradient[m]).collect();
        let e_sub: Vec<f64> = support.iter().map(|&m| energies[m]).collect();
        let sol = solve_support(&c_sub, &e_sub, problem.rate_floor, problem.power_cap)?;

        let clipped: Vec<usize> = (0..support.len())
            .filter(|&i| sol.priors[i] < PRIOR_CLIP)
            .collect();
        let remaining = support.len() - clipped.len();
        let can_reduce =
            !clipped.is_empty() && (remaining as f64).log2() >= problem.rate_floor - 1e-9;
        if can_reduce {
            support = support
                .iter()
                .enumerate()
                .filter(|(i, _)| !clipped.contains(i))
                .map(|(_, &m)| m)
                .collect();
            continue;
        }

        let mut full = vec![0.0; m_full];
        for (i, &m) in support.iter().enumerate() {
            full[m] = sol.priors[i];
        }
        return Ok((
            full,
            KktDiagnostics {
                residual: sol.residual,
                lambda1: sol.lambda1,
                lambda2: sol.lambda2,
                lambda3: sol.lambda3,
            },
        ));
    }
}

/// Designs non-uniform priors by successive convex programming around the
/// BER bound.
///
/// The nonconvex objective leaves plain SCP sensitive to its starting
/// point, so the solver restarts from a small deterministic family —
/// `p_init` (uniform by default), tempered max-min-γ subsets at the rate
/// floor, and a low-energy tilt — and keeps the best final bound.
///
/// `shaping` fixes the geometric transform during the design (used by the
/// hybrid loop); the power cap applies to the transformed symbol energies.
pub fn design_ps(
    problem: &PsProblem,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
    p_init: Option<&[f64]>,
) -> Result<DesignResult> {
    problem.validate()?;
    let c = &problem.constellation;
    let energies: Vec<f64> = match shaping {
        Some(s) => c.symbols().iter().map(|&x| s.map(x).norm_sqr()).collect(),
        None => c.symbols().iter().map(|x| x.norm_sqr()).collect(),
    };
    let uniform = vec![1.0 / c.len() as f64; c.len()];
    let first = match p_init {
        Some(p0) => {
            check_feasible(p0, &energies, problem)?;
            p0.to_vec()
        }
        None => uniform.clone(),
    };
    let mut starts = vec![first];
    starts.push(uniform);
    starts.extend(start_family(c, &energies, stats, ch, shaping, problem));
    starts.dedup_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .all(|(x, y)| (x - y).abs() < 1e-12)
    });

    let mut best: Option<DesignResult> = None;
    for start in &starts {
        let run = scp_from(problem, stats, ch, shaping, &energies, start)?;
        let better = match &best {
            None => true,
            Some(b) => run.bound_value < b.bound_value,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Structured feasible starting points for the SCP restarts.
fn start_family(
    c: &Constellation,
    energies: &[f64],
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
    problem: &PsProblem,
) -> Vec<Vec<f64>> {
    let m = c.len();
    let mut out = Vec::new();
    let feasible = |p: &[f64]| {
        dot(energies, p) <= problem.power_cap + 1e-12
            && entropy(p) >= problem.rate_floor + 1e-9
    };

    // Pairwise whitened distances drive the subset seeds.
    let mut gammas = vec![0.0; m * m];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..m {
        for b in 0..a {
            let g = gamma_pair(c, a, b, stats, ch, shaping);
            gammas[a * m + b] = g;
            gammas[b * m + a] = g;
            pairs.push((a, b));
        }
    }
    pairs.sort_by(|x, y| {
        gammas[y.0 * m + y.1]
            .partial_cmp(&gammas[x.0 * m + x.1])
            .unwrap()
            .then(x.cmp(y))
    });

    let k_target = (2.0f64.powf(problem.rate_floor.ceil()) as usize).clamp(2, m);
    for seed in pairs.iter().take(2) {
        let subset = greedy_subset(&gammas, energies, m, k_target, problem.power_cap, *seed);
        let mut p = vec![0.1 / m as f64; m];
        for &i in &subset {
            p[i] += 0.9 / subset.len() as f64;
        }
        if feasible(&p) {
            out.push(p);
        }
    }

    // Low-energy tilt.
    let tilt: Vec<f64> = energies.iter().map(|&e| (-3.0 * e).exp()).collect();
    let z: f64 = tilt.iter().sum();
    let p: Vec<f64> = tilt.into_iter().map(|v| v / z).collect();
    if feasible(&p) {
        out.push(p);
    }
    out
}

fn gamma_pair(
    c: &Constellation,
    a: usize,
    b: usize,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
) -> f64 {
    analysis::gamma_mn(c.difference(a, b), stats, ch, shaping).unwrap_or(0.0)
}

/// Grows a subset from a seed pair, each time adding the symbol whose
/// worst pairwise distance to the selection is largest among candidates
/// that can still complete a subset within the power cap (completing with
/// the cheapest remaining symbols is the optimistic check).
fn greedy_subset(
    gammas: &[f64],
    energies: &[f64],
    m: usize,
    k: usize,
    cap: f64,
    seed: (usize, usize),
) -> Vec<usize> {
    let mut sel = vec![seed.0, seed.1];
    while sel.len() < k {
        let used: f64 = sel.iter().map(|&i| energies[i]).sum();
        let slots_after = k - sel.len() - 1;
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        // Cheapest completion among symbols outside the selection.
        for pass in 0..2 {
            for cand in 0..m {
                if sel.contains(&cand) {
                    continue;
                }
                let mut rest: Vec<f64> = (0..m)
                    .filter(|i| !sel.contains(i) && *i != cand)
                    .map(|i| energies[i])
                    .collect();
                rest.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let cheapest: f64 = rest.iter().take(slots_after).sum();
                let projected = (used + energies[cand] + cheapest) / k as f64;
                if pass == 0 && projected > cap + 1e-12 {
                    continue;
                }
                let score = sel
                    .iter()
                    .map(|&s| gammas[cand * m + s])
                    .fold(f64::INFINITY, f64::min);
                if score > best_score {
                    best_score = score;
                    best = cand;
                }
            }
            if best != usize::MAX {
                break;
            }
        }
        sel.push(best);
    }
    sel.sort_unstable();
    sel
}

fn scp_from(
    problem: &PsProblem,
    stats: &IqStats,
    ch: &ChannelState,
    shaping: Option<&ShapingParams>,
    energies: &[f64],
    start: &[f64],
) -> Result<DesignResult> {
    let c = &problem.constellation;
    let mut p = start.to_vec();

    let bits = c.bits_per_symbol() as f64;
    let eval = |pv: &[f64]| -> Result<f64> {
        let support: Vec<usize> = (0..c.len()).filter(|&m| pv[m] > ZERO_PRIOR_TOL).collect();
        let symbols: Vec<Complex64> = support.iter().map(|&m| c.symbol(m)).collect();
        let priors: Vec<f64> = support.iter().map(|&m| pv[m]).collect();
        bound_over(&symbols, &priors, bits, stats, ch, shaping)
    };

    let mut bound = eval(&p)?;
    let mut last_kkt = KktDiagnostics {
        residual: 0.0,
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
    };
    let mut trace = vec![TracePoint {
        iter: 0,
        bound,
        entropy: entropy(&p),
        power: dot(&energies, &p),
        kkt_residual: 0.0,
    }];
    let mut converged = false;
    let mut iterations = 0;

    for i in 1..=problem.max_iters {
        iterations = i;
        let surrogate = linearize_bound(c, stats, ch, shaping, &p)?;
        let (candidate, kkt) = solve_p1a_with_energies(&surrogate, &energies, problem, &p)?;

        // Safeguard: accept the full step only if the true bound improves;
        // otherwise damp toward the anchor.
        let mut accepted = candidate.clone();
        let mut accepted_bound = eval(&accepted)?;
        let mut damp = 1.0;
        let mut halvings = 0;
        while accepted_bound > bound && halvings < 20 {
            damp *= 0.5;
            halvings += 1;
            for m in 0..accepted.len() {
                accepted[m] = p[m] + damp * (candidate[m] - p[m]);
            }
            accepted_bound = eval(&accepted)?;
        }
        if accepted_bound > bound {
            // No improving point along the segment: stationary.
            converged = true;
            break;
        }

        let step: f64 = accepted
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        p = accepted;
        bound = accepted_bound;
        last_kkt = kkt;
        trace.push(TracePoint {
            iter: i,
            bound,
            entropy: entropy(&p),
            power: dot(&energies, &p),
            kkt_residual: kkt.residual,
        });
        if step < problem.tolerance {
            converged = true;
            break;
        }
    }

    let shaping_out = shaping.cloned().unwrap_or_else(ShapingParams::identity);
    Ok(DesignResult {
        priors: p,
        zeta: shaping_out.zeta,
        theta: shaping_out.theta,
        bound_value: bound,
        kkt_residual: last_kkt.residual,
        multipliers: [last_kkt.lambda1, last_kkt.lambda2, last_kkt.lambda3],
        iterations,
        converged,
        trace,
    })
}

fn check_feasible(p: &[f64], energies: &[f64], problem: &PsProblem) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidPriors("initial point must lie in the simplex".into()));
    }
    if dot(energies, p) > problem.power_cap + 1e-9 {
        return Err(Error::InvalidPriors("initial point violates the power cap".into()));
    }
    if entropy(p) < problem.rate_floor - 1e-9 {
        return Err(Error::InvalidPriors("initial point violates the rate floor".into()));
    }
    Ok(())
}

/// Local search method for the geometric-shaping box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsMethod {
    TrustRegion,
    GradientDescent,
}

const ZETA_MAX: f64 = 1.0 - 1e-6;
const THETA_MAX: f64 = 2.0 * std::f64::consts::PI;
const PG_TOL: f64 = 1e-6;
const STEP_TOL: f64 = 1e-9;

fn clamp_box(zeta: f64, theta: f64) -> (f64, f64) {
    (zeta.clamp(0.0, ZETA_MAX), theta.clamp(0.0, THETA_MAX))
}

/// Reflect a trial point back into the box, then clamp whatever remains.
fn reflect_box(zeta: f64, theta: f64) -> (f64, f64) {
    let reflect = |v: f64, lo: f64, hi: f64| {
        let mut v = v;
        if v < lo {
            v = lo + (lo - v);
        }
        if v > hi {
            v = hi - (v - hi);
        }
        v.clamp(lo, hi)
    };
    (
        reflect(zeta, 0.0, ZETA_MAX),
        reflect(theta, 0.0, THETA_MAX),
    )
}

/// Supported-symbol view used by the shaping search: symbols and priors
/// restricted to the support, with the full-constellation bit width.
struct GsView {
    symbols: Vec<Complex64>,
    priors: Vec<f64>,
    bits: f64,
}

impl GsView {
    fn new(c: &Constellation, priors: &[f64]) -> Self {
        let support: Vec<usize> = (0..c.len())
            .filter(|&m| priors[m] > ZERO_PRIOR_TOL)
            .collect();
        Self {
            symbols: support.iter().map(|&m| c.symbol(m)).collect(),
            priors: support.iter().map(|&m| priors[m]).collect(),
            bits: c.bits_per_symbol() as f64,
        }
    }

    /// Shaped-bound objective with the power cap of the joint design:
    /// shaping that pushes the prior-weighted power of the transformed
    /// symbols over the cap is rejected as infeasible.
    fn objective(&self, stats: &IqStats, ch: &ChannelState, s: &ShapingParams) -> f64 {
        let power: f64 = self
            .priors
            .iter()
            .zip(&self.symbols)
            .map(|(p, x)| p * s.map(*x).norm_sqr())
            .sum();
        if power > 1.0 + 1e-9 {
            return f64::INFINITY;
        }
        bound_over(&self.symbols, &self.priors, self.bits, stats, ch, Some(s))
            .unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, stats: &IqStats, ch: &ChannelState, s: &ShapingParams) -> Result<(f64, f64)> {
        analysis::grad_shaping_over(&self.symbols, &self.priors, self.bits, stats, ch, s)
    }
}

fn projected_gradient_norm(x: (f64, f64), g: (f64, f64)) -> f64 {
    let (pz, pt) = clamp_box(x.0 - g.0, x.1 - g.1);
    ((x.0 - pz).powi(2) + (x.1 - pt).powi(2)).sqrt()
}

/// Local minimization of the shaped bound from one starting point.
fn gs_local(
    view: &GsView,
    stats: &IqStats,
    ch: &ChannelState,
    init: ShapingParams,
    method: GsMethod,
) -> (ShapingParams, f64) {
    let mut x = clamp_box(init.zeta.min(ZETA_MAX), init.theta);
    let mut f = view.objective(stats, ch, &ShapingParams { zeta: x.0, theta: x.1 });
    let mut radius = 0.1;
    let mut step_len = 1.0;
    for _ in 0..400 {
        let s = ShapingParams { zeta: x.0, theta: x.1 };
        let grad = match view.gradient(stats, ch, &s) {
            Ok(g) => g,
            Err(_) => break,
        };
        if projected_gradient_norm(x, grad) < PG_TOL {
            break;
        }
        match method {
            GsMethod::TrustRegion => {
                // First-order model: move along the negative gradient to the
                // trust-region boundary, reflecting at the box walls.
                let norm = (grad.0 * grad.0 + grad.1 * grad.1).sqrt();
                if norm == 0.0 {
                    break;
                }
                let cand = reflect_box(
                    x.0 - radius * grad.0 / norm,
                    x.1 - radius * grad.1 / norm,
                );
                let fc = view.objective(stats, ch, &ShapingParams { zeta: cand.0, theta: cand.1 });
                let predicted = radius * norm;
                if fc < f {
                    let strong = (f - fc) > 0.5 * predicted;
                    x = cand;
                    f = fc;
                    if strong {
                        radius = (radius * 2.0).min(1.0);
                    }
                } else {
                    radius *= 0.25;
                }
                if radius < STEP_TOL {
                    break;
                }
            }
            GsMethod::GradientDescent => {
                let norm2 = grad.0 * grad.0 + grad.1 * grad.1;
                let mut t = step_len * 2.0;
                let mut moved = false;
                for _ in 0..40 {
                    let cand = clamp_box(x.0 - t * grad.0, x.1 - t * grad.1);
                    let fc =
                        view.objective(stats, ch, &ShapingParams { zeta: cand.0, theta: cand.1 });
                    let dist2 = (cand.0 - x.0).powi(2) + (cand.1 - x.1).powi(2);
                    if fc <= f - 1e-4 * t * norm2 && dist2 > 0.0 {
                        x = cand;
                        f = fc;
                        step_len = t;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !moved || step_len < STEP_TOL {
                    break;
                }
            }
        }
    }
    (ShapingParams { zeta: x.0, theta: x.1 }, f)
}

/// Default multi-start grid over the shaping box.
fn gs_start_grid() -> Vec<ShapingParams> {
    let zetas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let thetas = [
        0.0,
        std::f64::consts::FRAC_PI_8,
        std::f64::consts::FRAC_PI_4,
        3.0 * std::f64::consts::FRAC_PI_8,
        std::f64::consts::FRAC_PI_2,
    ];
    let mut out = Vec::with_capacity(zetas.len() * thetas.len());
    for &z in &zetas {
        for &t in &thetas {
            out.push(ShapingParams { zeta: z, theta: t });
        }
    }
    out
}

/// Designs the shaping parameters for the given fixed priors from a single
/// start. The returned point never exceeds the bound at the initialization.
pub fn design_gs(
    c: &Constellation,
    priors: &[f64],
    stats: &IqStats,
    ch: &ChannelState,
    init: ShapingParams,
    method: GsMethod,
) -> Result<ShapingParams> {
    stats.guard_nonsingular()?;
    let view = GsView::new(c, priors);
    let f_init = view.objective(stats, ch, &init);
    let (best, f_best) = gs_local(&view, stats, ch, init, method);
    Ok(if f_best <= f_init { best } else { init })
}

/// Multi-start shaping design: the provided start, the identity, and a
/// fixed grid, reduced by (bound, start order).
pub fn design_gs_multistart(
    c: &Constellation,
    priors: &[f64],
    stats: &IqStats,
    ch: &ChannelState,
    init: ShapingParams,
    method: GsMethod,
) -> Result<ShapingParams> {
    stats.guard_nonsingular()?;
    let view = GsView::new(c, priors);
    let mut starts = vec![init, ShapingParams::identity()];
    starts.extend(gs_start_grid());
    let mut best = init;
    let mut f_best = view.objective(stats, ch, &init);
    for start in starts {
        let (cand, f) = gs_local(&view, stats, ch, start, method);
        if f < f_best {
            f_best = f;
            best = cand;
        }
    }
    Ok(best)
}

/// Order of the two sub-designs inside one hybrid iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsOrder {
    PsFirst,
    GsFirst,
}

/// Hybrid design by alternate optimization of priors and shaping.
///
/// With `order = None` both orders run and the better result is returned,
/// which also makes the hybrid bound no worse than either pure design.
pub fn design_hs(
    problem: &PsProblem,
    stats: &IqStats,
    ch: &ChannelState,
    order: Option<HsOrder>,
    method: GsMethod,
) -> Result<DesignResult> {
    match order {
        Some(o) => design_hs_ordered(problem, stats, ch, o, method),
        None => {
            let a = design_hs_ordered(problem, stats, ch, HsOrder::PsFirst, method)?;
            let b = design_hs_ordered(problem, stats, ch, HsOrder::GsFirst, method)?;
            Ok(if a.bound_value <= b.bound_value { a } else { b })
        }
    }
}

fn design_hs_ordered(
    problem: &PsProblem,
    stats: &IqStats,
    ch: &ChannelState,
    order: HsOrder,
    method: GsMethod,
) -> Result<DesignResult> {
    problem.validate()?;
    let c = &problem.constellation;
    let uniform = vec![1.0 / c.len() as f64; c.len()];
    let mut p = uniform;
    let mut s = ShapingParams::identity();
    let mut last = design_eval(problem, stats, ch, &p, &s)?;
    let mut trace = vec![TracePoint {
        iter: 0,
        bound: last,
        entropy: entropy(&p),
        power: shaped_power(c, &p, &s),
        kkt_residual: 0.0,
    }];
    let mut kkt = KktDiagnostics {
        residual: 0.0,
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
    };
    let max_outer = 12;
    let mut converged = false;
    let mut iterations = 0;

    for j in 1..=max_outer {
        iterations = j;
        let (p_next, s_next, kkt_next) = match order {
            HsOrder::PsFirst => {
                let ps = design_ps(problem, stats, ch, Some(&s), Some(&p))?;
                let s_new = design_gs_multistart(c, &ps.priors, stats, ch, s, method)?;
                (
                    ps.priors.clone(),
                    s_new,
                    KktDiagnostics {
                        residual: ps.kkt_residual,
                        lambda1: ps.multipliers[0],
                        lambda2: ps.multipliers[1],
                        lambda3: ps.multipliers[2],
                    },
                )
            }
            HsOrder::GsFirst => {
                let s_new = design_gs_multistart(c, &p, stats, ch, s, method)?;
                let ps = design_ps(problem, stats, ch, Some(&s_new), Some(&p))?;
                (
                    ps.priors.clone(),
                    s_new,
                    KktDiagnostics {
                        residual: ps.kkt_residual,
                        lambda1: ps.multipliers[0],
                        lambda2: ps.multipliers[1],
                        lambda3: ps.multipliers[2],
                    },
                )
            }
        };
        let bound = design_eval(problem, stats, ch, &p_next, &s_next)?;
        // Alternation steps are individually safeguarded, so the joint bound
        // cannot rise; keep the better point regardless.
        if bound <= last {
            p = p_next;
            s = s_next;
            kkt = kkt_next;
        }
        let eps = (last - bound).abs();
        last = last.min(bound);
        trace.push(TracePoint {
            iter: j,
            bound: last,
            entropy: entropy(&p),
            power: shaped_power(c, &p, &s),
            kkt_residual: kkt.residual,
        });
        if eps < problem.tolerance {
            converged = true;
            break;
        }
    }

    Ok(DesignResult {
        priors: p,
        zeta: s.zeta,
        theta: s.theta,
        bound_value: last,
        kkt_residual: kkt.residual,
        multipliers: [kkt.lambda1, kkt.lambda2, kkt.lambda3],
        iterations,
        converged,
        trace,
    })
}

/// Reassigns constellation labels so that the likely confusions among
/// supported symbols differ in as few bits as possible: a deterministic
/// pairwise-swap descent on the PEP-weighted Hamming distance.
///
/// Non-uniform designs concentrate mass on a sparse sub-lattice whose
/// members are far apart in the factory gray code; transmitting them with
/// those labels would inflate the bit error rate well past the union bound,
/// which charges one bit per pairwise event. The bit mapper (out of scope
/// here) would assign codes over the support anyway, so the reference
/// constellation gets labels consistent with that.
pub fn regray_support(
    c: &Constellation,
    stats: &IqStats,
    ch: &ChannelState,
) -> Result<Constellation> {
    let m = c.len();
    let support: Vec<usize> = (0..m)
        .filter(|&i| c.prior(i) > ZERO_PRIOR_TOL)
        .collect();
    if support.len() < 2 {
        return Ok(c.clone());
    }
    // Symmetric confusion weights over supported pairs.
    let mut weight = vec![0.0f64; m * m];
    for (a, &i) in support.iter().enumerate() {
        for &j in &support[..a] {
            let gamma = analysis::gamma_mn(c.difference(i, j), stats, ch, None)?;
            if gamma <= 0.0 {
                continue;
            }
            let w = c.prior(i) * analysis::pep(c.prior(i), c.prior(j), gamma, stats.rho, ch.alpha)?
                + c.prior(j) * analysis::pep(c.prior(j), c.prior(i), gamma, stats.rho, ch.alpha)?;
            weight[i * m + j] = w;
            weight[j * m + i] = w;
        }
    }
    let cost = |labels: &[u32]| -> f64 {
        let mut acc = 0.0;
        for (a, &i) in support.iter().enumerate() {
            for &j in &support[..a] {
                acc += weight[i * m + j] * (labels[i] ^ labels[j]).count_ones() as f64;
            }
        }
        acc
    };
    let descend = |labels: &mut Vec<u32>| -> f64 {
        let mut best = cost(labels);
        for _ in 0..100 {
            let mut improved = false;
            for i in 0..m {
                for j in 0..i {
                    if c.prior(i) <= ZERO_PRIOR_TOL && c.prior(j) <= ZERO_PRIOR_TOL {
                        continue;
                    }
                    labels.swap(i, j);
                    let trial = cost(labels);
                    if trial < best - best.abs() * 1e-15 {
                        best = trial;
                        improved = true;
                    } else {
                        labels.swap(i, j);
                    }
                }
            }
            if !improved {
                break;
            }
        }
        best
    };

    // Pairwise-swap descent from the factory labels plus a fixed set of
    // shuffled restarts; the descent alone stalls in shallow optima.
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut best_labels = c.labels().to_vec();
    let mut best = descend(&mut best_labels);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xD1CE_5EED);
    for _ in 0..8 {
        let mut labels = c.labels().to_vec();
        labels.shuffle(&mut rng);
        let score = descend(&mut labels);
        if score < best {
            best = score;
            best_labels = labels;
        }
    }
    Constellation::from_parts(c.symbols().to_vec(), best_labels, c.priors().to_vec())
}

fn shaped_power(c: &Constellation, p: &[f64], s: &ShapingParams) -> f64 {
    p.iter()
        .zip(c.symbols())
        .map(|(pi, x)| pi * s.map(*x).norm_sqr())
        .sum()
}

fn design_eval(
    problem: &PsProblem,
    stats: &IqStats,
    ch: &ChannelState,
    p: &[f64],
    s: &ShapingParams,
) -> Result<f64> {
    let c = &problem.constellation;
    let support: Vec<usize> = (0..c.len()).filter(|&m| p[m] > ZERO_PRIOR_TOL).collect();
    let symbols: Vec<Complex64> = support.iter().map(|&m| c.symbol(m)).collect();
    let priors: Vec<f64> = support.iter().map(|&m| p[m]).collect();
    bound_over(
        &symbols,
        &priors,
        c.bits_per_symbol() as f64,
        stats,
        ch,
        Some(s),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::ConstellationKind;
    use crate::noise::{DistortionProfile, ImproperGaussian};

    fn qam(m: usize) -> Constellation {
        Constellation::make(ConstellationKind::Qam, m).unwrap()
    }

    fn paper_stats(ebno_db: f64, rate: f64) -> (IqStats, ChannelState) {
        let profile = DistortionProfile::new(0.01, 0.12, 0.25, 0.9, 1.0).unwrap();
        let alpha = 10f64.powf(ebno_db / 10.0) * rate * profile.sigma_w2;
        let ch = ChannelState::awgn(alpha).unwrap();
        let stats = profile.aggregate(&ch).unwrap().iq_statistics().unwrap();
        (stats, ch)
    }

    fn ideal_stats(ebno_db: f64, rate: f64) -> (IqStats, ChannelState) {
        let alpha = 10f64.powf(ebno_db / 10.0) * rate;
        let ch = ChannelState::awgn(alpha).unwrap();
        let stats = ImproperGaussian::proper(1.0)
            .unwrap()
            .iq_statistics()
            .unwrap();
        (stats, ch)
    }

    #[test]
    fn surrogate_anchored_and_tangent() {
        let c = qam(8);
        let (stats, ch) = paper_stats(10.0, 2.0);
        let anchor = vec![0.125; 8];
        let sur = linearize_bound(&c, &stats, &ch, None, &anchor).unwrap();
        let truth = analysis::ber_upper_bound(&c, &stats, &ch, None).unwrap();
        assert!((sur.eval(&anchor) - truth).abs() < 1e-15);
        let grad = analysis::grad_ber_wrt_priors(&c, &stats, &ch, None).unwrap();
        for m in 0..8 {
            assert!((sur.gradient[m] - grad[m]).abs() < 1e-15);
        }
    }

    #[test]
    fn surrogate_error_is_second_order() {
        let c = qam(8);
        let (stats, ch) = paper_stats(8.0, 2.0);
        let anchor = vec![0.125; 8];
        let sur = linearize_bound(&c, &stats, &ch, None, &anchor).unwrap();
        let direction: Vec<f64> = vec![0.05, -0.05, 0.03, -0.03, 0.02, -0.02, 0.01, -0.01];
        let mut prev_err = f64::INFINITY;
        let mut prev_h = 0.0;
        for k in 1..6 {
            let h = 0.5f64.powi(k);
            let p: Vec<f64> = anchor
                .iter()
                .zip(&direction)
                .map(|(a, d)| a + h * d)
                .collect();
            let truth = bound_over(c.symbols(), &p, 3.0, &stats, &ch, None).unwrap();
            let err = (sur.eval(&p) - truth).abs();
            if prev_err.is_finite() {
                // Halving the step should cut the Taylor remainder by ~4.
                assert!(
                    err < prev_err * 0.4,
                    "remainder not quadratic: {prev_err} at {prev_h} -> {err} at {h}"
                );
            }
            prev_err = err;
            prev_h = h;
        }
    }

    #[test]
    fn p1a_full_rate_forces_uniform() {
        let c = qam(8);
        let problem = PsProblem::new(c.clone(), 3.0).unwrap();
        let (stats, ch) = paper_stats(15.0, 3.0);
        let anchor = vec![0.125; 8];
        let sur = linearize_bound(&c, &stats, &ch, None, &anchor).unwrap();
        let (p, diag) = solve_p1a(&sur, &problem, &anchor).unwrap();
        for &pi in &p {
            assert!((pi - 0.125).abs() < 1e-12);
        }
        assert!(diag.residual < 1e-8);
    }

    #[test]
    fn p1a_meets_kkt_quality() {
        let c = qam(8);
        let problem = PsProblem::new(c.clone(), 2.0).unwrap();
        for ebno in [0.0, 6.0, 12.0, 20.0] {
            let (stats, ch) = paper_stats(ebno, 2.0);
            let anchor = vec![0.125; 8];
            let sur = linearize_bound(&c, &stats, &ch, None, &anchor).unwrap();
            let (p, diag) = solve_p1a(&sur, &problem, &anchor).unwrap();
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
            let h = entropy(&p);
            assert!(h >= 2.0 - 1e-8, "entropy {h} at ebno {ebno}");
            let power: f64 = p
                .iter()
                .zip(c.symbols())
                .map(|(pi, x)| pi * x.norm_sqr())
                .sum();
            assert!(power <= 1.0 + 1e-8);
            assert!(diag.residual < 1e-8, "residual {} at {ebno}", diag.residual);
            assert!(diag.lambda1 >= -1e-10 && diag.lambda3 >= -1e-10);
        }
    }

    #[test]
    fn ps_uniform_when_rate_saturates_order() {
        // Ideal hardware, high SNR, M_u = M_nu: the rate constraint pins the
        // uniform distribution.
        let c = qam(8);
        let problem = PsProblem::new(c, 3.0).unwrap();
        let (stats, ch) = ideal_stats(18.0, 3.0);
        let res = design_ps(&problem, &stats, &ch, None, None).unwrap();
        for &p in &res.priors {
            assert!((p - 0.125).abs() < 1e-9);
        }
        assert!(res.converged);
    }

    #[test]
    fn ps_low_snr_keeps_rate() {
        let c = qam(8);
        let problem = PsProblem::new(c, 2.0).unwrap();
        let (stats, ch) = paper_stats(0.0, 2.0);
        let res = design_ps(&problem, &stats, &ch, None, None).unwrap();
        assert!((entropy(&res.priors) - 2.0).abs() < 1e-6);
        let nonzero = res.priors.iter().filter(|&&p| p > 1e-3).count();
        assert!(nonzero >= 4, "degenerate distribution: {:?}", res.priors);
        assert!(res.converged);
        assert!(res.bound_value <= res.trace[0].bound);
    }

    #[test]
    fn ps_high_snr_checkerboard_pattern() {
        let c = qam(8);
        let problem = PsProblem::new(c.clone(), 2.0).unwrap();
        let (stats, ch) = paper_stats(20.0, 2.0);
        let res = design_ps(&problem, &stats, &ch, None, None).unwrap();
        let supported: Vec<usize> = (0..8).filter(|&m| res.priors[m] > 1e-3).collect();
        assert_eq!(supported.len(), 4, "priors: {:?}", res.priors);
        for &m in &supported {
            assert!((res.priors[m] - 0.25).abs() < 0.02);
        }
        // Supported symbols must not be nearest neighbors.
        let min_d2 = (0..8)
            .flat_map(|m| (0..m).map(move |n| (m, n)))
            .map(|(m, n)| c.difference(m, n).norm_sqr())
            .fold(f64::INFINITY, f64::min);
        for (i, &m) in supported.iter().enumerate() {
            for &n in &supported[..i] {
                assert!(
                    c.difference(m, n).norm_sqr() > min_d2 * 1.5,
                    "adjacent support {m},{n}: priors {:?}",
                    res.priors
                );
            }
        }
        assert!((entropy(&res.priors) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ps_trace_monotone() {
        let c = qam(32);
        let problem = PsProblem::new(c, 3.0).unwrap();
        let (stats, ch) = paper_stats(10.0, 3.0);
        let res = design_ps(&problem, &stats, &ch, None, None).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1].bound <= w[0].bound + 1e-15);
        }
        assert!(res.bound_value <= res.trace[0].bound);
    }

    #[test]
    fn ps_deterministic() {
        let c = qam(32);
        let problem = PsProblem::new(c, 3.0).unwrap();
        let (stats, ch) = paper_stats(12.0, 3.0);
        let a = design_ps(&problem, &stats, &ch, None, None).unwrap();
        let b = design_ps(&problem, &stats, &ch, None, None).unwrap();
        assert_eq!(a.priors, b.priors);
        assert_eq!(a.bound_value, b.bound_value);
        assert_eq!(a.trace.len(), b.trace.len());
    }

    #[test]
    fn gs_no_gain_under_proper_noise() {
        let c = qam(16);
        let (stats, ch) = ideal_stats(12.0, 4.0);
        let s = design_gs_multistart(&c, c.priors(), &stats, &ch, ShapingParams::identity(), GsMethod::TrustRegion)
            .unwrap();
        let shaped = analysis::ber_upper_bound(&c, &stats, &ch, Some(&s)).unwrap();
        let unshaped = analysis::ber_upper_bound(&c, &stats, &ch, None).unwrap();
        assert!(shaped <= unshaped * (1.0 + 1e-9));
        assert!(s.zeta < 0.05, "spurious shaping: zeta = {}", s.zeta);
    }

    #[test]
    fn gs_multistart_no_worse_than_single() {
        let c = qam(8);
        let (stats, ch) = paper_stats(25.0, 3.0);
        let init = ShapingParams::new(0.4, 0.7).unwrap();
        for method in [GsMethod::TrustRegion, GsMethod::GradientDescent] {
            let single = design_gs(&c, c.priors(), &stats, &ch, init, method).unwrap();
            let multi = design_gs_multistart(&c, c.priors(), &stats, &ch, init, method).unwrap();
            let f_single = analysis::ber_upper_bound(&c, &stats, &ch, Some(&single)).unwrap();
            let f_multi = analysis::ber_upper_bound(&c, &stats, &ch, Some(&multi)).unwrap();
            assert!(f_multi <= f_single * (1.0 + 1e-12));
        }
    }

    #[test]
    fn gs_improves_distorted_bound_at_high_snr() {
        let c = qam(8);
        let (stats, ch) = paper_stats(30.0, 3.0);
        let s = design_gs_multistart(&c, c.priors(), &stats, &ch, ShapingParams::identity(), GsMethod::TrustRegion)
            .unwrap();
        let shaped = analysis::ber_upper_bound(&c, &stats, &ch, Some(&s)).unwrap();
        let unshaped = analysis::ber_upper_bound(&c, &stats, &ch, None).unwrap();
        assert!(
            shaped < unshaped * 0.9,
            "no shaping gain: {shaped} vs {unshaped}"
        );
    }

    #[test]
    fn gs_never_worse_than_init() {
        let c = qam(8);
        let (stats, ch) = paper_stats(18.0, 3.0);
        for method in [GsMethod::TrustRegion, GsMethod::GradientDescent] {
            for &(z, t) in &[(0.0, 0.0), (0.5, 1.0), (0.9, 5.0)] {
                let init = ShapingParams::new(z, t).unwrap();
                let out = design_gs(&c, c.priors(), &stats, &ch, init, method).unwrap();
                let f_init = analysis::ber_upper_bound(&c, &stats, &ch, Some(&init)).unwrap();
                let f_out = analysis::ber_upper_bound(&c, &stats, &ch, Some(&out)).unwrap();
                assert!(f_out <= f_init * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn hs_dominates_pure_designs() {
        let c = qam(16);
        let problem = PsProblem::new(c.clone(), 3.0).unwrap();
        let (stats, ch) = paper_stats(18.0, 3.0);
        let hs = design_hs(&problem, &stats, &ch, None, GsMethod::TrustRegion).unwrap();
        let ps = design_ps(&problem, &stats, &ch, None, None).unwrap();
        let gs = design_gs_multistart(&c, c.priors(), &stats, &ch, ShapingParams::identity(), GsMethod::TrustRegion)
            .unwrap();
        let gs_bound = analysis::ber_upper_bound(&c, &stats, &ch, Some(&gs)).unwrap();
        assert!(hs.bound_value <= ps.bound_value + 1e-9);
        assert!(hs.bound_value <= gs_bound + 1e-9);
    }

    #[test]
    fn hs_converges_quickly_and_both_orders_feasible() {
        let c = qam(8);
        let problem = PsProblem::new(c.clone(), 2.0).unwrap();
        let (stats, ch) = paper_stats(15.0, 2.0);
        for order in [HsOrder::PsFirst, HsOrder::GsFirst] {
            let res = design_hs(&problem, &stats, &ch, Some(order), GsMethod::TrustRegion).unwrap();
            assert!(res.converged);
            assert!(res.iterations <= 6, "slow alternation: {}", res.iterations);
            assert!(entropy(&res.priors) >= 2.0 - 1e-8);
            let power = shaped_power(&c, &res.priors, &res.shaping());
            assert!(power <= 1.0 + 1e-8);
        }
    }
}
