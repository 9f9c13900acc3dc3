//! Noise calibration for histogram release: the analytic Gaussian
//! condition, Laplace noise accounted by optimal DP composition over the
//! ℓ0-sensitive coordinates, the zCDP Gaussian bound, and their k-fold
//! comparison at equal noise variance.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::nonadaptive::{delta_opt_dp, eps_inverse, Bound};
use crate::numerics::{bisect_bracket, std_normal_cdf, Bracket};
use crate::par;

/// Shape of a histogram query: `d` bins, at most `delta0` bins change by at
/// most `tau` each between neighbors, at most `d_bar` distinct elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub d: u64,
    pub delta0: u64,
    pub tau: f64,
    pub d_bar: u64,
}

impl HistogramSpec {
    pub fn new(d: u64, delta0: u64, tau: f64, d_bar: u64) -> Result<Self> {
        if delta0 == 0 || delta0 > d {
            return Err(domain(format!("need 1 <= delta0 <= d, got delta0 = {delta0}, d = {d}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(domain(format!("tau must be positive, got {tau}")));
        }
        if d_bar < d {
            return Err(domain(format!("d_bar = {d_bar} must be at least d = {d}")));
        }
        Ok(HistogramSpec { d, delta0, tau, d_bar })
    }

    pub fn l1_sensitivity(&self) -> f64 {
        self.tau * self.delta0 as f64
    }

    pub fn l2_sensitivity(&self) -> f64 {
        self.tau * (self.delta0 as f64).sqrt()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

/// Exact δ(ε) of the Gaussian mechanism whose noise standard deviation is
/// `sigma` times the ℓ2-sensitivity.
pub fn analytic_gaussian_delta(sigma: f64, eps: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if !(eps >= 0.0) {
        return Err(domain(format!("eps must be nonnegative, got {eps}")));
    }
    Ok(agm_delta(sigma, eps))
}

fn agm_delta(sigma: f64, eps: f64) -> f64 {
    let a = 1.0 / (2.0 * sigma);
    let lhs = std_normal_cdf(a - eps * sigma);
    let tail = std_normal_cdf(-a - eps * sigma);
    let rhs = if tail == 0.0 { 0.0 } else { (eps + tail.ln()).exp() };
    (lhs - rhs).max(0.0)
}

const SOLVE_MAX_DOUBLINGS: usize = 200;

/// Smallest `sigma` with `analytic_gaussian_delta(sigma, eps) <= delta`.
pub fn solve_sigma_analytic(eps: f64, delta: f64) -> Result<f64> {
    check_positive("eps", eps)?;
    check_delta(delta)?;
    let f = |s: f64| agm_delta(s, eps) - delta;
    let mut hi = 1.0;
    let mut n = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        n += 1;
        if n > SOLVE_MAX_DOUBLINGS {
            return Err(Error::Convergence { iterations: n, context: "no sigma bracket found".into() });
        }
    }
    let mut lo = hi / 2.0;
    while f(lo) <= 0.0 {
        lo /= 2.0;
        n += 1;
        if n > 2 * SOLVE_MAX_DOUBLINGS {
            return Err(Error::Convergence { iterations: n, context: "no sigma bracket found".into() });
        }
    }
    let b = Bracket::new(lo, hi, 1e-14 * hi, 400)?;
    Ok(bisect_bracket(f, &b)?.hi)
}

/// Smallest `eps >= 0` with `analytic_gaussian_delta(sigma, eps) <= delta`.
pub fn solve_eps_analytic(sigma: f64, delta: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_delta(delta)?;
    let f = |e: f64| agm_delta(sigma, e) - delta;
    if f(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut n = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        n += 1;
        if n > SOLVE_MAX_DOUBLINGS {
            return Err(Error::Convergence { iterations: n, context: "no eps bracket found".into() });
        }
    }
    let b = Bracket::new(0.0, hi, 1e-13 * hi.max(1.0), 400)?;
    Ok(bisect_bracket(f, &b)?.hi)
}

/// δ(ε_g) of per-coordinate Laplace noise at `eps_per_coord` on a histogram
/// with ℓ0-sensitivity `spec.delta0`.
pub fn laplace_histogram_delta(eps_per_coord: f64, spec: &HistogramSpec, eps_g: f64) -> Result<f64> {
    delta_opt_dp(spec.delta0, eps_per_coord, eps_g)
}

/// Smallest ε_g for per-coordinate Laplace noise at `eps_per_coord`.
pub fn laplace_histogram_eps(eps_per_coord: f64, spec: &HistogramSpec, delta: f64) -> Result<f64> {
    eps_inverse(delta, Bound::Dp, spec.delta0, eps_per_coord)
}

/// Laplace scale with the same variance as Gaussian noise of standard
/// deviation `tau * sigma`.
pub fn equal_variance_laplace_scale(tau: f64, sigma: f64) -> f64 {
    tau * sigma / std::f64::consts::SQRT_2
}

/// ε of the Gaussian mechanism with standard deviation `tau * sigma` on a
/// histogram with ℓ0-sensitivity `delta0`, through zCDP.
pub fn gaussian_zcdp_eps(sigma: f64, delta0: u64, delta: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_delta(delta)?;
    if delta0 == 0 {
        return Err(domain("delta0 must be at least 1"));
    }
    let d = delta0 as f64;
    Ok(d / (2.0 * sigma * sigma) + (2.0 * d * (1.0 / delta).ln()).sqrt() / sigma)
}

/// Inverse of [`gaussian_zcdp_eps`] in `sigma`.
pub fn solve_sigma_zcdp(eps: f64, delta0: u64, delta: f64) -> Result<f64> {
    check_positive("eps", eps)?;
    check_delta(delta)?;
    if delta0 == 0 {
        return Err(domain("delta0 must be at least 1"));
    }
    let a = delta0 as f64 / 2.0;
    let b = (2.0 * delta0 as f64 * (1.0 / delta).ln()).sqrt();
    Ok((b + (b * b + 4.0 * a * eps).sqrt()) / (2.0 * eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Laplace,
    GaussianZcdp,
    AnalyticGaussian,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Laplace => "laplace",
            Method::GaussianZcdp => "gaussian_zcdp",
            Method::AnalyticGaussian => "analytic_gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfoldRow {
    pub method: Method,
    pub k: u64,
    pub sigma: f64,
    pub delta: f64,
    pub eps_g: f64,
    pub metadata: String,
}

/// Points in the per-mechanism ε search for the composed analytic Gaussian.
pub const EPS1_GRID_POINTS: usize = 50;

/// Global ε after `k` releases of the histogram with Gaussian noise of
/// standard deviation `tau * sigma`, or equal-variance Laplace noise.
pub fn kfold_comparison(k: u64, spec: &HistogramSpec, sigma: f64, delta: f64) -> Result<Vec<KfoldRow>> {
    check_positive("sigma", sigma)?;
    check_delta(delta)?;
    if k == 0 {
        return Err(domain("k must be at least 1"));
    }
    let total = k * spec.delta0;
    let b = equal_variance_laplace_scale(spec.tau, sigma);
    let lap_eps = spec.tau / b;
    let laplace = eps_inverse(delta, Bound::Dp, total, lap_eps)?;
    let zcdp = gaussian_zcdp_eps(sigma, total, delta)?;
    let (agm, meta) = composed_analytic_gaussian(k, spec.delta0, sigma, delta)?;
    let row = |method, eps_g, metadata: String| KfoldRow { method, k, sigma, delta, eps_g, metadata };
    Ok(vec![
        row(Method::Laplace, laplace, format!("eps_per_coord={lap_eps:.16e};scale={b:.16e}")),
        row(Method::GaussianZcdp, zcdp, String::new()),
        row(Method::AnalyticGaussian, agm, meta),
    ])
}

fn composed_analytic_gaussian(k: u64, delta0: u64, sigma: f64, delta: f64) -> Result<(f64, String)> {
    let s = sigma / (delta0 as f64).sqrt();
    if k == 1 {
        let e = solve_eps_analytic(s, delta)?;
        return Ok((e, format!("single_shot;multiplier={s:.16e}")));
    }
    let even_delta1 = delta / (2.0 * k as f64);
    let even_eps1 = solve_eps_analytic(s, even_delta1)?.max(1e-6);
    let mut eps1s: Vec<f64> = (0..EPS1_GRID_POINTS)
        .map(|i| even_eps1 * 16f64.powf(i as f64 / (EPS1_GRID_POINTS - 1) as f64 - 0.5))
        .collect();
    eps1s.push(even_eps1);
    let evaluated = par::map_slice(&eps1s, |&e1| -> Option<(f64, f64, f64)> {
        let d1 = agm_delta(s, e1);
        let rest = delta - k as f64 * d1;
        if !(rest > 0.0) {
            return None;
        }
        let eg = eps_inverse(rest, Bound::Dp, k, e1).ok()?;
        Some((eg, e1, d1))
    });
    let best = evaluated
        .into_iter()
        .flatten()
        .fold(None::<(f64, f64, f64)>, |acc, c| match acc {
            Some(a) if a.0 <= c.0 => Some(a),
            _ => Some(c),
        })
        .ok_or_else(|| Error::Convergence { iterations: eps1s.len(), context: "no feasible delta split".into() })?;
    let (eg, e1, d1) = best;
    Ok((eg, format!("eps1={e1:.16e};delta1={d1:.16e};delta_composition={:.16e}", delta - k as f64 * d1)))
}

/// [`kfold_comparison`] for `k = 1..=k_max`.
pub fn kfold_sweep(k_max: u64, spec: &HistogramSpec, sigma: f64, delta: f64) -> Result<Vec<KfoldRow>> {
    let ks: Vec<u64> = (1..=k_max).collect();
    let rows = par::map_slice(&ks, |&k| kfold_comparison(k, spec, sigma, delta));
    let mut out = Vec::with_capacity(3 * ks.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Smallest `k` at which `winner` reports a strictly smaller ε_g than `other`.
pub fn crossing_k(rows: &[KfoldRow], winner: Method, other: Method) -> Option<u64> {
    let mut ks: Vec<u64> = rows.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter().find(|&k| {
        let get = |m| rows.iter().find(|r| r.k == k && r.method == m).map(|r| r.eps_g);
        matches!((get(winner), get(other)), (Some(a), Some(b)) if a < b)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agm_edge_values() {
        let s = 0.8;
        let v = analytic_gaussian_delta(s, 0.0).unwrap();
        let expected = std_normal_cdf(1.0 / (2.0 * s)) - std_normal_cdf(-1.0 / (2.0 * s));
        assert!((v - expected).abs() < 1e-16);
        assert!(analytic_gaussian_delta(1e6, 1.0).unwrap() < 1e-300);
        assert!(analytic_gaussian_delta(0.0, 1.0).is_err());
    }

    #[test]
    fn agm_decreasing_in_sigma_and_eps() {
        let mut prev = 1.0;
        for i in 6..200 {
            let v = analytic_gaussian_delta(0.05 * i as f64, 0.5).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut prev = 1.0;
        for i in 0..100 {
            let v = analytic_gaussian_delta(1.5, 0.05 * i as f64).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn sigma_solve_forward_and_grid() {
        let s = solve_sigma_analytic(1.0, 1e-6).unwrap();
        assert!((analytic_gaussian_delta(s, 1.0).unwrap() - 1e-6).abs() < 1e-12);
        // dense scan oracle with step 1e-6 around the root
        let mut lo = 3.0;
        while analytic_gaussian_delta(lo + 1e-3, 1.0).unwrap() > 1e-6 {
            lo += 1e-3;
        }
        let mut x = lo;
        while analytic_gaussian_delta(x, 1.0).unwrap() > 1e-6 {
            x += 1e-6;
        }
        assert!((x - s).abs() <= 1e-6, "{x} vs {s}");
    }

    #[test]
    fn eps_solve_forward() {
        let e = solve_eps_analytic(0.7, 1e-5).unwrap();
        assert!(analytic_gaussian_delta(0.7, e).unwrap() <= 1e-5);
        assert!(analytic_gaussian_delta(0.7, e - 1e-9).unwrap() > 1e-5);
        assert_eq!(solve_eps_analytic(100.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn zcdp_examples() {
        let e = gaussian_zcdp_eps(1.0, 1, (-1f64).exp()).unwrap();
        assert!((e - (0.5 + 2f64.sqrt())).abs() < 1e-15);
        let s = solve_sigma_zcdp(2.08, 25, 1e-6).unwrap();
        assert!((s - 13.1).abs() < 0.05, "{s}");
        assert!((gaussian_zcdp_eps(s, 25, 1e-6).unwrap() - 2.08).abs() < 1e-10);
        assert!((gaussian_zcdp_eps(13.1, 25, 1e-6).unwrap() - 2.08).abs() < 0.01);
        assert!(solve_sigma_zcdp(0.0, 25, 1e-6).is_err());
    }

    #[test]
    fn zcdp_small_eps_asymptote() {
        let d = 1e-6f64;
        for &e in &[1e-3, 1e-4, 1e-5] {
            let s = solve_sigma_zcdp(e, 1, d).unwrap();
            let asym = (2.0 * (1.0 / d).ln()).sqrt() / e;
            assert!((s / asym - 1.0).abs() < 2.0 * e, "{e}");
        }
    }

    #[test]
    fn laplace_examples() {
        let one = HistogramSpec::new(10, 1, 1.0, 10).unwrap();
        let e = 0.4f64;
        let v = laplace_histogram_delta(e, &one, 0.1).unwrap();
        assert!((v - (e.exp() - 0.1f64.exp()) / (1.0 + e.exp())).abs() < 1e-15);
        let s25 = HistogramSpec::new(100, 25, 1.0, 100).unwrap();
        assert!((laplace_histogram_eps(0.1, &s25, 1e-6).unwrap() - 2.08).abs() < 0.01);
        let s10 = HistogramSpec::new(100, 10, 1.0, 100).unwrap();
        assert_eq!(laplace_histogram_delta(0.2, &s10, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn equal_variance() {
        let b = equal_variance_laplace_scale(2.0, 3.0);
        assert!((2.0 * b * b - 36.0).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(HistogramSpec::new(5, 6, 1.0, 5).is_err());
        assert!(HistogramSpec::new(5, 2, 0.0, 5).is_err());
        assert!(HistogramSpec::new(5, 2, 1.0, 4).is_err());
        let s = HistogramSpec::new(5, 4, 2.0, 5).unwrap();
        assert_eq!((s.l1_sensitivity(), s.l2_sensitivity()), (8.0, 4.0));
    }

    #[test]
    fn kfold_single_and_multi() {
        let spec = HistogramSpec::new(100, 10, 1.0, 100).unwrap();
        let r1 = kfold_comparison(1, &spec, 5.0, 1e-6).unwrap();
        assert_eq!(r1.len(), 3);
        let agm = solve_eps_analytic(5.0 / 10f64.sqrt(), 1e-6).unwrap();
        assert_eq!(r1[2].eps_g, agm);
        let r3 = kfold_comparison(3, &spec, 5.0, 1e-6).unwrap();
        let lap = eps_inverse(1e-6, Bound::Dp, 30, 2f64.sqrt() / 5.0).unwrap();
        assert!((r3[0].eps_g - lap).abs() < 1e-10);
        assert_eq!(r3[1].eps_g, gaussian_zcdp_eps(5.0, 30, 1e-6).unwrap());
        assert!(r3[2].metadata.contains("delta1="));
    }
}
