//! Empirical and exact hockey-stick checks of the shipped mechanisms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibration::analytic_gaussian_delta;
use crate::calibration::HistogramSpec;
use crate::error::{domain, Result};
use crate::mechanisms::{
    exp_mech_topk, sample_gaussian, sample_laplace, sample_truncated_normal, Histogram, RngState,
    TruncGaussConfig,
};
use crate::nonadaptive::{check_brute_force_len, delta_opt_dp, grr_params};
use crate::numerics::{positive_part, CompensatedSum};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mechanism: String,
    pub eps_g: f64,
    pub empirical_delta: f64,
    pub std_error: f64,
    pub bound_delta: f64,
    pub verdict: Verdict,
    pub n_trials: usize,
    pub seed: u64,
    pub metadata: String,
}

impl AuditReport {
    fn new(mechanism: &str, eps_g: f64, est: McEstimate, bound_delta: f64, n_trials: usize, seed: u64, metadata: String) -> Self {
        let verdict = if est.estimate > bound_delta + 3.0 * est.std_error {
            Verdict::Violation
        } else {
            Verdict::Consistent
        };
        AuditReport {
            mechanism: mechanism.to_string(),
            eps_g,
            empirical_delta: est.estimate,
            std_error: est.std_error,
            bound_delta,
            verdict,
            n_trials,
            seed,
            metadata,
        }
    }
}

/// Exact `sum_y [P(y) - e^{eps_g} Q(y)]_+` for the product of Bernoulli pairs
/// `(q_i, p_i)`, built as explicit tensor products of the outcome vectors.
pub fn hockey_stick_exact(dist_pairs: &[(f64, f64)], eps_g: f64) -> Result<f64> {
    check_brute_force_len(dist_pairs.len())?;
    if eps_g.is_nan() {
        return Err(domain("eps_g must not be NaN"));
    }
    for &(q, p) in dist_pairs {
        if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("Bernoulli parameters must lie in [0, 1], got ({q}, {p})")));
        }
    }
    let mut pv = vec![1.0];
    let mut qv = vec![1.0];
    for &(q, p) in dist_pairs {
        pv = pv.iter().flat_map(|&a| [a * q, a * (1.0 - q)]).collect();
        qv = qv.iter().flat_map(|&a| [a * p, a * (1.0 - p)]).collect();
    }
    let scale = eps_g.exp();
    let mut s = CompensatedSum::default();
    for (a, b) in pv.iter().zip(&qv) {
        let shifted = if *b == 0.0 { 0.0 } else { scale * b };
        s.add(positive_part(a - shifted));
    }
    Ok(s.total().clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Smallest trial count accepted by [`monte_carlo_delta`].
pub const MIN_TRIALS: usize = 100_000;

const MC_CHUNKS: u64 = 64;

type Counts = BTreeMap<u64, u64>;

fn draw_counts<F>(sample: &F, n: usize, base: &RngState, offset: u64) -> (Counts, Counts)
where
    F: Fn(&mut RngState) -> u64 + Sync,
{
    let per = (n as u64).div_ceil(MC_CHUNKS);
    let parts = par::map_range(MC_CHUNKS as usize, |c| {
        let mut rng = base.substream(offset + c as u64);
        let lo = c as u64 * per;
        let hi = (lo + per).min(n as u64);
        let (mut a, mut b) = (Counts::new(), Counts::new());
        for i in lo..hi {
            let y = sample(&mut rng);
            let half = if i % 2 == 0 { &mut a } else { &mut b };
            *half.entry(y).or_insert(0) += 1;
        }
        (a, b)
    });
    let (mut a, mut b) = (Counts::new(), Counts::new());
    for (pa, pb) in parts {
        for (k, v) in pa {
            *a.entry(k).or_insert(0) += v;
        }
        for (k, v) in pb {
            *b.entry(k).or_insert(0) += v;
        }
    }
    (a, b)
}

/// Estimates `sup_S P(S) - e^{eps_g} Q(S)` for two discrete samplers. Half of
/// the draws choose the set `S = {y : P(y) > e^{eps_g} Q(y)}`, the other
/// half evaluate it, so the estimate is not biased upward by the selection.
pub fn monte_carlo_delta<FP, FQ>(sample_p: FP, sample_q: FQ, eps_g: f64, n_trials: usize, rng: &RngState) -> Result<McEstimate>
where
    FP: Fn(&mut RngState) -> u64 + Sync,
    FQ: Fn(&mut RngState) -> u64 + Sync,
{
    if n_trials < MIN_TRIALS {
        return Err(domain(format!("need at least {MIN_TRIALS} trials, got {n_trials}")));
    }
    if !eps_g.is_finite() {
        return Err(domain(format!("eps_g must be finite, got {eps_g}")));
    }
    let (pa, pb) = draw_counts(&sample_p, n_trials, rng, 0);
    let (qa, qb) = draw_counts(&sample_q, n_trials, rng, MC_CHUNKS);
    let total = |c: &Counts| c.values().sum::<u64>() as f64;
    let (npa, npb, nqa, nqb) = (total(&pa), total(&pb), total(&qa), total(&qb));
    let scale = eps_g.exp();
    let selected: Vec<u64> = pa
        .iter()
        .filter(|(y, &c)| c as f64 / npa > scale * qa.get(y).copied().unwrap_or(0) as f64 / nqa)
        .map(|(y, _)| *y)
        .collect();
    let p = selected.iter().map(|y| pb.get(y).copied().unwrap_or(0)).sum::<u64>() as f64 / npb;
    let q = selected.iter().map(|y| qb.get(y).copied().unwrap_or(0)).sum::<u64>() as f64 / nqb;
    let estimate = p - scale * q;
    let std_error = (p * (1.0 - p) / npb + scale * scale * q * (1.0 - q) / nqb).sqrt();
    Ok(McEstimate { estimate, std_error })
}

/// Number of bins used for continuous outputs.
pub const CONTINUOUS_BINS: u64 = 1000;

fn bin(x: f64, lo: f64, hi: f64) -> u64 {
    let f = ((x - lo) / (hi - lo) * CONTINUOUS_BINS as f64).floor();
    // Out-of-range mass lands in the edge bins.
    f.clamp(0.0, (CONTINUOUS_BINS - 1) as f64) as u64
}

const BINNING_NOTE: &str = "outputs binned into 1000 equal-width bins; binning can only lower the estimate";

/// GRR(eps, t) on neighboring inputs.
pub fn audit_grr(eps: f64, t: f64, eps_g: f64, n_trials: usize, seed: u64) -> Result<AuditReport> {
    let g = grr_params(eps, t)?;
    let rng = RngState::new(seed);
    let est = monte_carlo_delta(
        |r| u64::from(r.uniform_open() >= g.q),
        |r| u64::from(r.uniform_open() >= g.p),
        eps_g,
        n_trials,
        &rng,
    )?;
    let bound = hockey_stick_exact(&[(g.q, g.p)], eps_g)?;
    Ok(AuditReport::new("grr", eps_g, est, bound, n_trials, seed, format!("eps={eps};t={t}")))
}

/// One-dimensional Laplace noise of scale `1 / eps` on neighbors 0 and 1.
pub fn audit_laplace(eps: f64, eps_g: f64, n_trials: usize, seed: u64) -> Result<AuditReport> {
    let b = 1.0 / eps;
    let (lo, hi) = (-12.0 * b, 1.0 + 12.0 * b);
    let rng = RngState::new(seed);
    let est = monte_carlo_delta(
        |r| bin(sample_laplace(r, b).unwrap_or(0.0), lo, hi),
        |r| bin(1.0 + sample_laplace(r, b).unwrap_or(0.0), lo, hi),
        eps_g,
        n_trials,
        &rng,
    )?;
    let bound = delta_opt_dp(1, eps, eps_g)?;
    Ok(AuditReport::new("laplace", eps_g, est, bound, n_trials, seed, format!("eps={eps};{BINNING_NOTE}")))
}

/// One-dimensional Gaussian noise of standard deviation `sigma` on
/// neighbors 0 and 1.
pub fn audit_gaussian(sigma: f64, eps_g: f64, n_trials: usize, seed: u64) -> Result<AuditReport> {
    let (lo, hi) = (-9.0 * sigma, 1.0 + 9.0 * sigma);
    let rng = RngState::new(seed);
    let est = monte_carlo_delta(
        |r| bin(sample_gaussian(r, sigma).unwrap_or(0.0), lo, hi),
        |r| bin(1.0 + sample_gaussian(r, sigma).unwrap_or(0.0), lo, hi),
        eps_g,
        n_trials,
        &rng,
    )?;
    let bound = analytic_gaussian_delta(sigma, eps_g.max(0.0))?;
    Ok(AuditReport::new("gaussian", eps_g, est, bound, n_trials, seed, format!("sigma={sigma};{BINNING_NOTE}")))
}

/// δ at `eps_g` implied by δ_0-approximate ρ-zCDP.
pub fn zcdp_delta_at(rho: f64, delta0: f64, eps_g: f64) -> f64 {
    if eps_g <= rho {
        return 1.0;
    }
    (delta0 + (-(eps_g - rho).powi(2) / (4.0 * rho)).exp()).min(1.0)
}

/// One released coordinate of the truncated Gaussian mechanism on
/// neighboring counts `h` and `h + tau`, with `h = tau + T` so that release
/// is random. The "not released" outcome is its own bin.
pub fn audit_trunc_gauss(cfg: &TruncGaussConfig, eps_g: f64, n_trials: usize, seed: u64) -> Result<AuditReport> {
    let h0 = cfg.tau + cfg.t;
    let h1 = h0 + cfg.tau;
    let sd = cfg.tau * cfg.sigma;
    let (lo, hi) = (h0 - cfg.t, h1 + cfg.t);
    let thr = cfg.threshold();
    let out = move |v: f64| if v > thr { 1 + bin(v, lo, hi) } else { 0 };
    let rng = RngState::new(seed);
    let est = monte_carlo_delta(
        |r| out(sample_truncated_normal(r, h0, sd, cfg.t).unwrap_or(h0)),
        |r| out(sample_truncated_normal(r, h1, sd, cfg.t).unwrap_or(h1)),
        eps_g,
        n_trials,
        &rng,
    )?;
    let rho = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let bound = zcdp_delta_at(rho, cfg.delta / cfg.delta0 as f64, eps_g);
    let meta = format!("T={:.16e};rho={rho:.16e};{BINNING_NOTE}", cfg.t);
    Ok(AuditReport::new("trunc_gauss", eps_g, est, bound, n_trials, seed, meta))
}

/// First selection of the exponential mechanism on `counts` against the
/// neighbor where element `changed` gains `tau`.
pub fn audit_exp_mech(counts: &[f64], changed: usize, eps: f64, eps_g: f64, n_trials: usize, seed: u64) -> Result<AuditReport> {
    if changed >= counts.len() {
        return Err(domain("changed index out of range"));
    }
    let n = counts.len() as u64;
    let spec = HistogramSpec::new(n, 1, 1.0, n)?;
    let make = |bump: f64| -> Result<Histogram> {
        let entries = counts
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("{i:04}"), if i == changed { c + bump } else { *c }))
            .collect();
        Histogram::new(entries, spec)
    };
    let (hp, hq) = (make(0.0)?, make(1.0)?);
    let pick = |h: &Histogram, r: &mut RngState| -> u64 {
        exp_mech_topk(h, 1, eps, r).ok().and_then(|v| v[0].parse().ok()).unwrap_or(u64::MAX)
    };
    let rng = RngState::new(seed);
    let est = monte_carlo_delta(|r| pick(&hp, r), |r| pick(&hq, r), eps_g, n_trials, &rng)?;
    let bound = delta_opt_dp(1, eps, eps_g)?;
    Ok(AuditReport::new("exp_mech", eps_g, est, bound, n_trials, seed, format!("eps={eps};counts={counts:?}")))
}
