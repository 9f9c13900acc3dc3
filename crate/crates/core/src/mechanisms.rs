//! Randomized histogram mechanisms: inverse-CDF samplers, the Gumbel-max
//! exponential mechanism for top-k discovery, order-constrained Gaussian
//! counts, the truncated Gaussian release over an unknown domain, and the
//! known-domain Laplace and Gaussian baselines.

use std::collections::{BTreeMap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{laplace_histogram_delta, HistogramSpec};
use crate::error::{domain, Error, Result};
use crate::numerics::{
    bisect_bracket, pava_monotone_nonneg, std_normal_cdf, std_normal_quantile, Bracket,
};
use crate::setwise::PrivacyClass;

/// Seeded ChaCha20 stream.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RngState {
    pub const ALGORITHM: &'static str = "chacha20";

    pub fn new(seed: u64) -> Self {
        RngState { seed, rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream `index` under the same seed.
    pub fn substream(&self, index: u64) -> RngState {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index.wrapping_add(1));
        RngState { seed: self.seed, rng }
    }

    /// A fresh generator seeded from the next output of this one.
    pub fn fork(&mut self) -> RngState {
        RngState::new(self.rng.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

fn check_scale(name: &str, s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(domain(format!("{name} must be positive and finite, got {s}")));
    }
    Ok(())
}

pub fn sample_laplace(rng: &mut RngState, scale: f64) -> Result<f64> {
    check_scale("Laplace scale", scale)?;
    let u = rng.uniform_open() - 0.5;
    Ok(-scale * u.signum() * (-2.0 * u.abs()).ln_1p())
}

pub fn sample_gaussian(rng: &mut RngState, sd: f64) -> Result<f64> {
    check_scale("Gaussian standard deviation", sd)?;
    Ok(sd * std_normal_quantile(rng.uniform_open())?)
}

pub fn sample_gumbel(rng: &mut RngState, scale: f64) -> Result<f64> {
    check_scale("Gumbel scale", scale)?;
    Ok(-scale * (-rng.uniform_open().ln()).ln())
}

/// Normal(mean, sd^2) conditioned on `[mean - half_width, mean + half_width]`.
pub fn sample_truncated_normal(rng: &mut RngState, mean: f64, sd: f64, half_width: f64) -> Result<f64> {
    check_scale("truncated normal standard deviation", sd)?;
    check_scale("truncation half-width", half_width)?;
    let a = half_width / sd;
    Ok(mean + sd * truncated_std_normal_quantile(rng.uniform_open(), a)?)
}

/// Quantile of the standard normal restricted to `[-a, a]`.
pub fn truncated_std_normal_quantile(u: f64, a: f64) -> Result<f64> {
    let lower = std_normal_cdf(-a);
    let mass = 1.0 - 2.0 * lower;
    // Map the upper half through the symmetric lower tail.
    let z = if u <= 0.5 {
        std_normal_quantile(lower + u * mass)?
    } else {
        -std_normal_quantile(lower + (1.0 - u) * mass)?
    };
    Ok(z.clamp(-a, a))
}

/// Per-element nonnegative counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub entries: BTreeMap<String, f64>,
    pub spec: HistogramSpec,
}

impl Histogram {
    pub fn new(entries: BTreeMap<String, f64>, spec: HistogramSpec) -> Result<Self> {
        if let Some((k, v)) = entries.iter().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(domain(format!("count for '{k}' must be finite and nonnegative, got {v}")));
        }
        if entries.len() as u64 > spec.d_bar {
            return Err(Error::Size { what: "distinct elements", got: entries.len(), limit: spec.d_bar as usize });
        }
        Ok(Histogram { entries, spec })
    }

    /// Entries by count descending, then id ascending.
    pub fn sorted_desc(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self.entries.iter().map(|(k, c)| (k.clone(), *c)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

/// Lowercased word counts, splitting on anything that is not alphanumeric.
pub fn tokenize_counts(text: &str) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for w in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        *out.entry(w.to_lowercase()).or_insert(0.0) += 1.0;
    }
    out
}

/// `k` rounds of the exponential mechanism without replacement, each with
/// score `count` of range `tau`, via Gumbel-max. Returns discovery order.
pub fn exp_mech_topk(h: &Histogram, k: usize, eps_per_round: f64, rng: &mut RngState) -> Result<Vec<String>> {
    if k > h.entries.len() {
        return Err(Error::Size { what: "top-k size", got: k, limit: h.entries.len() });
    }
    if !(eps_per_round > 0.0) {
        return Err(domain(format!("eps per round must be positive, got {eps_per_round}")));
    }
    if eps_per_round == f64::INFINITY {
        return Ok(h.sorted_desc().into_iter().take(k).map(|(id, _)| id).collect());
    }
    let mut remaining: Vec<(&String, f64)> =
        h.entries.iter().map(|(id, c)| (id, eps_per_round * c / h.spec.tau)).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, (_, score)) in remaining.iter().enumerate() {
            let v = score + sample_gumbel(rng, 1.0)?;
            if v > best.1 {
                best = (i, v);
            }
        }
        out.push(remaining.remove(best.0).0.clone());
    }
    Ok(out)
}

fn check_ordering(h: &Histogram, ordering: &[String]) -> Result<Vec<f64>> {
    let mut seen = HashSet::new();
    ordering
        .iter()
        .map(|id| {
            if !seen.insert(id) {
                return Err(domain(format!("element '{id}' appears twice in the ordering")));
            }
            h.entries.get(id).copied().ok_or_else(|| domain(format!("element '{id}' is not in the histogram")))
        })
        .collect()
}

/// Raw and projected counts from [`ls_noise_detailed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsNoiseOutput {
    pub ordering: Vec<String>,
    pub true_counts: Vec<f64>,
    pub noisy: Vec<f64>,
    pub projected: Vec<f64>,
}

/// Gaussian counts on the ordered elements, projected onto the nonincreasing
/// nonnegative cone in the given order.
pub fn ls_noise_detailed(h: &Histogram, ordering: &[String], sigma: f64, rng: &mut RngState) -> Result<LsNoiseOutput> {
    let true_counts = check_ordering(h, ordering)?;
    let sd = h.spec.tau * sigma;
    let noisy = true_counts
        .iter()
        .map(|c| Ok(c + sample_gaussian(rng, sd)?))
        .collect::<Result<Vec<_>>>()?;
    let projected = pava_monotone_nonneg(&noisy);
    Ok(LsNoiseOutput { ordering: ordering.to_vec(), true_counts, noisy, projected })
}

pub fn ls_noise(h: &Histogram, ordering: &[String], sigma: f64, rng: &mut RngState) -> Result<Vec<(String, f64)>> {
    let out = ls_noise_detailed(h, ordering, sigma, rng)?;
    Ok(out.ordering.into_iter().zip(out.projected).collect())
}

/// Expected number of released coordinates whose noise leaves the region
/// shared by neighboring truncated Gaussians, summed over `delta0` bins.
pub fn truncation_delta(delta0: u64, tau: f64, sigma: f64, t: f64) -> f64 {
    let s = tau * sigma;
    let num = std_normal_cdf((tau - t) / s) - std_normal_cdf(-t / s);
    let den = std_normal_cdf(t / s) - std_normal_cdf(-t / s);
    delta0 as f64 * num / den
}

const TRUNCATION_MAX_DOUBLINGS: usize = 60;

/// Truncation level `T > tau / 2` at which [`truncation_delta`] equals `delta`.
pub fn solve_truncation_level(delta0: u64, tau: f64, sigma: f64, delta: f64) -> Result<f64> {
    check_scale("tau", tau)?;
    check_scale("sigma", sigma)?;
    if delta0 == 0 {
        return Err(domain("delta0 must be at least 1"));
    }
    if !(delta > 0.0 && delta < delta0 as f64) {
        return Err(domain(format!("delta must lie in (0, delta0 = {delta0}), got {delta}")));
    }
    let g = |t: f64| truncation_delta(delta0, tau, sigma, t) - delta;
    let lo = tau / 2.0;
    let mut hi = tau + 8.0 * tau * sigma;
    let mut n = 0;
    while g(hi) > 0.0 {
        if n == TRUNCATION_MAX_DOUBLINGS {
            return Err(Error::Convergence { iterations: n, context: format!("no truncation bracket up to T = {hi}") });
        }
        hi *= 2.0;
        n += 1;
    }
    let b = Bracket::new(lo, hi, 1e-13 * hi, 400)?;
    Ok(bisect_bracket(g, &b)?.hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncGaussConfig {
    pub delta0: u64,
    pub d_bar: u64,
    pub tau: f64,
    pub sigma: f64,
    pub delta: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

impl TruncGaussConfig {
    pub fn new(delta0: u64, d_bar: u64, tau: f64, sigma: f64, delta: f64) -> Result<Self> {
        let t = solve_truncation_level(delta0, tau, sigma, delta)?;
        Ok(TruncGaussConfig { delta0, d_bar, tau, sigma, delta, t })
    }

    pub fn threshold(&self) -> f64 {
        self.tau + self.t
    }

    /// δ-approximate zCDP class of one release.
    pub fn privacy_class(&self) -> PrivacyClass {
        PrivacyClass::ZCDP { delta: self.delta, xi: 0.0, rho: self.delta0 as f64 / (2.0 * self.sigma * self.sigma) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncGaussItem {
    /// 1-based position in the sorted counts.
    pub rank: usize,
    pub element: String,
    pub value: f64,
}

/// Truncated Gaussian noise on every sorted count; keeps values above
/// `tau + T`. Rank `i` draws from its own substream of a fork of `rng`.
pub fn trunc_gauss_release(h: &Histogram, cfg: &TruncGaussConfig, rng: &mut RngState) -> Result<Vec<TruncGaussItem>> {
    if h.entries.len() as u64 > cfg.d_bar {
        return Err(Error::Size { what: "distinct elements", got: h.entries.len(), limit: cfg.d_bar as usize });
    }
    let base = rng.fork();
    let sd = cfg.tau * cfg.sigma;
    let mut out = Vec::new();
    // Padding counts are zero and can never clear the threshold, so only the
    // observed entries need draws.
    for (i, (element, count)) in h.sorted_desc().into_iter().enumerate() {
        let mut sub = base.substream(i as u64);
        let v = sample_truncated_normal(&mut sub, count, sd, cfg.t)?;
        if v > cfg.threshold() {
            out.push(TruncGaussItem { rank: i + 1, element, value: v });
        }
    }
    Ok(out)
}

/// Laplace noise of scale `tau / eps` on every count, in id order.
pub fn known_lap(h: &Histogram, eps: f64, rng: &mut RngState) -> Result<Vec<(String, f64)>> {
    check_scale("eps", eps)?;
    let b = h.spec.tau / eps;
    h.entries.iter().map(|(id, c)| Ok((id.clone(), c + sample_laplace(rng, b)?))).collect()
}

/// δ(ε_g) of [`known_lap`].
pub fn known_lap_delta(spec: &HistogramSpec, eps: f64, eps_g: f64) -> Result<f64> {
    laplace_histogram_delta(eps, spec, eps_g)
}

/// Gaussian noise of standard deviation `tau * sigma` on every count, in id order.
pub fn known_gauss(h: &Histogram, sigma: f64, rng: &mut RngState) -> Result<Vec<(String, f64)>> {
    let sd = h.spec.tau * sigma;
    h.entries.iter().map(|(id, c)| Ok((id.clone(), c + sample_gaussian(rng, sd)?))).collect()
}

/// `(delta0 / (2 sigma^2), sqrt(delta0) / sigma)`-CDP class of [`known_gauss`].
pub fn known_gauss_cdp_class(delta0: u64, sigma: f64) -> Result<PrivacyClass> {
    check_scale("sigma", sigma)?;
    let d = delta0 as f64;
    let c = PrivacyClass::CDP { mu: d / (2.0 * sigma * sigma), tau: d.sqrt() / sigma };
    c.validate()?;
    Ok(c)
}

/// `delta0 / (2 sigma^2)`-zCDP class of [`known_gauss`].
pub fn known_gauss_zcdp_class(delta0: u64, sigma: f64) -> Result<PrivacyClass> {
    check_scale("sigma", sigma)?;
    Ok(PrivacyClass::ZCDP { delta: 0.0, xi: 0.0, rho: delta0 as f64 / (2.0 * sigma * sigma) })
}
