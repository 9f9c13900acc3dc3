//! Optimal δ for homogeneous non-adaptive composition of pure-DP and
//! bounded-range mechanisms, the inverse map δ → ε_g, and an exhaustive
//! product-distribution oracle.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{
    bisect_bracket, ln_binom, log1mexp_unchecked, positive_part, softplus, Bracket, CompensatedSum,
    LogSumExp, LogWeight,
};
use crate::par;

/// Generalized randomized response: outputs 0 with probability `q` on one
/// input and `p` on its neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrrParams {
    pub eps: f64,
    pub t: f64,
    pub q: f64,
    pub p: f64,
}

pub fn grr_params(eps: f64, t: f64) -> Result<GrrParams> {
    check_eps(eps)?;
    if !(0.0..=eps).contains(&t) {
        return Err(domain(format!("GRR requires t in [0, eps = {eps}], got {t}")));
    }
    let q = (t - eps).exp_m1() / (-eps).exp_m1();
    let p = (-t).exp() * q;
    Ok(GrrParams { eps, t, q, p })
}

/// `(ln q, ln(1 - q))` for GRR(eps, t).
#[derive(Debug, Clone, Copy)]
pub(crate) struct GrrLog {
    pub ln_q: f64,
    pub ln_1mq: f64,
}

impl GrrLog {
    pub(crate) fn new(eps: f64, t: f64) -> Self {
        let denom = log1mexp_unchecked(-eps);
        GrrLog {
            ln_q: log1mexp_unchecked(t - eps) - denom,
            ln_1mq: -eps + t.exp_m1().ln() - denom,
        }
    }

    /// GRR(2 eps, eps), the extremal pure eps-DP pair.
    pub(crate) fn pure_dp(eps: f64) -> Self {
        GrrLog { ln_q: -softplus(-eps), ln_1mq: -softplus(eps) }
    }

    #[cfg(test)]
    pub(crate) fn q(&self) -> f64 {
        self.ln_q.exp()
    }
}

#[inline]
pub(crate) fn pw(n: u64, ln_x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * ln_x
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("eps must be positive and finite, got {eps}")));
    }
    Ok(())
}

fn check_eps_g(eps_g: f64) -> Result<()> {
    if eps_g.is_nan() {
        return Err(domain("eps_g must not be NaN"));
    }
    Ok(())
}

fn check_k(k: u64) -> Result<()> {
    if k == 0 {
        return Err(domain("k must be at least 1"));
    }
    Ok(())
}

fn finish(acc: &LogSumExp) -> f64 {
    acc.total().value().clamp(0.0, 1.0)
}

/// k mechanisms, m of them pure DP and the rest bounded range, all at `eps`,
/// evaluated at global budget `eps_g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionQuery {
    pub k: u64,
    pub m: u64,
    pub eps: f64,
    pub eps_g: f64,
}

impl CompositionQuery {
    pub fn new(k: u64, m: u64, eps: f64, eps_g: f64) -> Result<Self> {
        check_k(k)?;
        check_eps(eps)?;
        check_eps_g(eps_g)?;
        if m > k {
            return Err(domain(format!("m = {m} exceeds k = {k}")));
        }
        Ok(CompositionQuery { k, m, eps, eps_g })
    }
}

/// Optimal δ for k-fold composition of eps-DP mechanisms.
pub fn delta_opt_dp(k: u64, eps: f64, eps_g: f64) -> Result<f64> {
    check_k(k)?;
    check_eps(eps)?;
    check_eps_g(eps_g)?;
    Ok(dp_unchecked(k, eps, eps_g))
}

/// Same as [`delta_opt_dp`] but also accepts `k = 0`, where it returns the
/// empty-composition value `[1 - e^{eps_g}]_+`.
pub(crate) fn dp_unchecked(k: u64, eps: f64, eps_g: f64) -> f64 {
    let ln_norm = k as f64 * softplus(eps);
    let mut acc = LogSumExp::new();
    for l in (0..=k).rev() {
        let loss = (2.0 * l as f64 - k as f64) * eps;
        if loss <= eps_g {
            break;
        }
        let ln = ln_binom(k, l) + l as f64 * eps - ln_norm + log1mexp_unchecked(eps_g - loss);
        acc.add(LogWeight::from_ln(ln));
    }
    finish(&acc)
}

/// δ of a k-fold bounded-range composition when every mechanism is
/// GRR(eps, t), written with the neighbor's probabilities.
fn br_at_t(k: u64, eps: f64, eps_g: f64, t: f64) -> f64 {
    let denom = log1mexp_unchecked(-eps);
    let ln_p = -t + log1mexp_unchecked(t - eps) - denom;
    let ln_1mp = log1mexp_unchecked(-t) - denom;
    let mut acc = LogSumExp::new();
    for i in 0..=k {
        let loss = k as f64 * t - i as f64 * eps;
        if loss <= eps_g {
            continue;
        }
        let ln = ln_binom(k, i)
            + pw(k - i, ln_p)
            + pw(i, ln_1mp)
            + loss
            + log1mexp_unchecked(eps_g - loss);
        acc.add(LogWeight::from_ln(ln));
    }
    finish(&acc)
}

fn clipped_candidates(raw: impl Iterator<Item = f64>, eps: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = raw.map(|t| t.clamp(0.0, eps)).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

fn max_over(ts: &[f64], f: impl Fn(f64) -> f64 + Sync + Send) -> f64 {
    par::map_slice(ts, |&t| f(t)).into_iter().fold(0.0, f64::max)
}

/// Optimal δ for k-fold non-adaptive composition of eps-BR mechanisms.
pub fn delta_opt_br_nonadaptive(k: u64, eps: f64, eps_g: f64) -> Result<f64> {
    check_k(k)?;
    check_eps(eps)?;
    check_eps_g(eps_g)?;
    let kf = k as f64;
    let ts = clipped_candidates((0..=k).map(|l| (eps_g + (l as f64 + 1.0) * eps) / (kf + 1.0)), eps);
    Ok(max_over(&ts, |t| br_at_t(k, eps, eps_g, t)))
}

/// δ of the mixed composition when the `k - m` bounded-range slots all use
/// GRR(eps, t) and the `m` pure-DP slots use GRR(2 eps, eps).
pub fn delta_mixed_at_t(q: &CompositionQuery, t: f64) -> Result<f64> {
    if !(0.0..=q.eps).contains(&t) {
        return Err(domain(format!("t must lie in [0, {}], got {t}", q.eps)));
    }
    Ok(mixed_at_t(q.k, q.m, q.eps, q.eps_g, t))
}

pub(crate) fn mixed_at_t(k: u64, m: u64, eps: f64, eps_g: f64, t: f64) -> f64 {
    let n = k - m;
    let dp = GrrLog::pure_dp(eps);
    let br = GrrLog::new(eps, t);
    let mut acc = LogSumExp::new();
    for j in 0..=m {
        let ln_dp = ln_binom(m, j) + pw(m - j, dp.ln_q) + pw(j, dp.ln_1mq);
        for i in 0..=n {
            let loss = eps * (m as f64 - 2.0 * j as f64 - i as f64) + t * n as f64;
            if loss <= eps_g {
                continue;
            }
            let ln = ln_dp
                + ln_binom(n, i)
                + pw(n - i, br.ln_q)
                + pw(i, br.ln_1mq)
                + log1mexp_unchecked(eps_g - loss);
            acc.add(LogWeight::from_ln(ln));
        }
    }
    finish(&acc)
}

/// Candidate shared `t` values at which the mixed bound attains its maximum.
pub fn mixed_candidates(q: &CompositionQuery) -> Vec<f64> {
    let n = q.k - q.m;
    if n == 0 {
        return vec![q.eps];
    }
    let raw = (0..=q.k + q.m)
        .map(|l| (q.eps_g + q.eps * (l as f64 + 1.0 - q.m as f64)) / (n as f64 + 1.0));
    clipped_candidates(raw, q.eps)
}

/// Optimal δ for non-adaptive composition of `m` eps-DP and `k - m` eps-BR
/// mechanisms.
pub fn delta_opt_mixed(q: &CompositionQuery) -> f64 {
    let ts = mixed_candidates(q);
    max_over(&ts, |t| mixed_at_t(q.k, q.m, q.eps, q.eps_g, t))
}

/// Which closed-form bound to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Dp,
    Br,
    Mixed { m: u64 },
}

impl Bound {
    pub fn delta(&self, k: u64, eps: f64, eps_g: f64) -> Result<f64> {
        match *self {
            Bound::Dp => delta_opt_dp(k, eps, eps_g),
            Bound::Br => delta_opt_br_nonadaptive(k, eps, eps_g),
            Bound::Mixed { m } => Ok(delta_opt_mixed(&CompositionQuery::new(k, m, eps, eps_g)?)),
        }
    }
}

/// Width of the final bracket returned by [`eps_inverse`].
pub const EPS_INVERSE_TOL: f64 = 1e-12;

/// Smallest `eps_g >= 0` with `delta(eps_g) <= delta_target`, up to
/// [`EPS_INVERSE_TOL`]. The returned point always satisfies the target.
pub fn eps_inverse(delta_target: f64, bound: Bound, k: u64, eps: f64) -> Result<f64> {
    if !(delta_target > 0.0 && delta_target < 1.0) {
        return Err(domain(format!("delta target must lie in (0, 1), got {delta_target}")));
    }
    bound.delta(k, eps, 0.0)?;
    let f = |x: f64| bound.delta(k, eps, x).unwrap_or(f64::NAN) - delta_target;
    if f(0.0) <= 0.0 {
        return Ok(0.0);
    }
    // delta(k eps) = 0 for all three bounds.
    let hi = k as f64 * eps;
    let b = Bracket::new(0.0, hi, EPS_INVERSE_TOL, 400)?;
    let out = bisect_bracket(f, &b)?;
    Ok(out.hi)
}

/// Largest mechanism count accepted by the exhaustive oracles.
pub const BRUTE_FORCE_MAX_K: usize = 20;

const BRUTE_FORCE_CHUNKS: usize = 64;

pub(crate) fn check_brute_force_len(k: usize) -> Result<()> {
    if k > BRUTE_FORCE_MAX_K {
        return Err(Error::Size { what: "mechanism count", got: k, limit: BRUTE_FORCE_MAX_K });
    }
    Ok(())
}

/// Exact hockey-stick divergence of the product of GRR(eps_i, t_i)
/// mechanisms, summed over all `2^k` outcome strings.
pub fn brute_force_delta(ts: &[(f64, f64)], eps_g: f64) -> Result<f64> {
    check_brute_force_len(ts.len())?;
    check_eps_g(eps_g)?;
    let pairs: Vec<(f64, f64)> = ts
        .iter()
        .map(|&(t, eps)| grr_params(eps, t).map(|g| (g.q, g.p)))
        .collect::<Result<_>>()?;
    Ok(exact_product_hockey_stick(&pairs, eps_g))
}

/// `sum_S [P(S) - e^{eps_g} Q(S)]_+` for a product of Bernoulli pairs, where
/// bit i of S set means coordinate i took its second outcome.
pub(crate) fn exact_product_hockey_stick(pairs: &[(f64, f64)], eps_g: f64) -> f64 {
    let k = pairs.len();
    let total: u64 = 1 << k;
    let scale = eps_g.exp();
    let chunk = total.div_ceil(BRUTE_FORCE_CHUNKS as u64);
    let partials = par::map_range(BRUTE_FORCE_CHUNKS, |c| {
        let mut s = CompensatedSum::default();
        let lo = c as u64 * chunk;
        let hi = (lo + chunk).min(total);
        for mask in lo..hi {
            let (mut pm, mut qm) = (1.0, 1.0);
            for (i, &(q, p)) in pairs.iter().enumerate() {
                if mask >> i & 1 == 0 {
                    pm *= q;
                    qm *= p;
                } else {
                    pm *= 1.0 - q;
                    qm *= 1.0 - p;
                }
            }
            let shifted = if qm == 0.0 { 0.0 } else { scale * qm };
            s.add(positive_part(pm - shifted));
        }
        s
    });
    let mut acc = CompensatedSum::default();
    for s in partials {
        acc.add(s.total());
    }
    acc.total().clamp(0.0, 1.0)
}

/// Whether reordering the mechanisms by `perm` leaves the exact δ unchanged
/// (to 1e-14).
pub fn permutation_invariance_check(ts: &[(f64, f64)], eps_g: f64, perm: &[usize]) -> Result<bool> {
    let mut seen = vec![false; ts.len()];
    if perm.len() != ts.len() {
        return Err(domain("permutation length differs from mechanism count"));
    }
    for &p in perm {
        if p >= ts.len() || seen[p] {
            return Err(domain(format!("invalid permutation {perm:?}")));
        }
        seen[p] = true;
    }
    let permuted: Vec<(f64, f64)> = perm.iter().map(|&i| ts[i]).collect();
    let a = brute_force_delta(ts, eps_g)?;
    let b = brute_force_delta(&permuted, eps_g)?;
    Ok((a - b).abs() <= 1e-14)
}
