//! Scalar numerical primitives: log-space combinatorics, stable exponential
//! differences, the standard normal CDF and quantile, a bracketing root
//! finder, golden-section maximization, and the order-constrained
//! least-squares projection used by the ordered Gaussian release.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

use crate::error::{domain, Error, Result};

/// A nonnegative weight stored as its natural logarithm. `-inf` is zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogWeight(f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan(), "log weight must not be NaN");
        LogWeight(ln)
    }

    pub fn from_linear(x: f64) -> Result<Self> {
        if !(x >= 0.0) {
            return Err(domain(format!("weight must be nonnegative, got {x}")));
        }
        Ok(LogWeight(x.ln()))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `self^n`, with `w^0 = 1` even for zero weights.
    pub fn powi(self, n: u64) -> Self {
        if n == 0 {
            LogWeight::ONE
        } else {
            LogWeight(self.0 * n as f64)
        }
    }
}

impl std::ops::Mul for LogWeight {
    type Output = LogWeight;

    fn mul(self, rhs: LogWeight) -> LogWeight {
        if self.is_zero() || rhs.is_zero() {
            LogWeight::ZERO
        } else {
            LogWeight(self.0 + rhs.0)
        }
    }
}

/// Streaming log-sum-exp over nonnegative terms.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    pub fn add(&mut self, w: LogWeight) {
        let x = w.ln();
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn total(&self) -> LogWeight {
        if self.max == f64::NEG_INFINITY {
            LogWeight::ZERO
        } else {
            LogWeight(self.max + self.scaled.ln())
        }
    }
}

/// Neumaier-compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

// C(120, 60) * 120 still fits in a u128.
const EXACT_BINOMIAL_MAX_N: u64 = 120;

/// `ln C(n, i)`. Exact (up to the final rounding) for `n <= 120`, log-gamma
/// based beyond that. Symmetric in `i <-> n - i` bit-for-bit.
pub fn log_binomial(n: u64, i: u64) -> Result<LogWeight> {
    if i > n {
        return Err(domain(format!("log_binomial: i = {i} exceeds n = {n}")));
    }
    let i = i.min(n - i);
    if i == 0 {
        return Ok(LogWeight::ONE);
    }
    if n <= EXACT_BINOMIAL_MAX_N {
        let mut c: u128 = 1;
        for j in 0..i {
            c = c * (n - j) as u128 / (j + 1) as u128;
        }
        return Ok(LogWeight((c as f64).ln()));
    }
    let ln = libm::lgamma(n as f64 + 1.0)
        - (libm::lgamma(i as f64 + 1.0) + libm::lgamma((n - i) as f64 + 1.0));
    Ok(LogWeight(ln))
}

/// Unchecked variant for internal loops whose indices are in range by construction.
pub(crate) fn ln_binom(n: u64, i: u64) -> f64 {
    log_binomial(n, i).map(LogWeight::ln).unwrap_or(f64::NEG_INFINITY)
}

/// `ln(1 - e^x)` for `x <= 0`, with the usual split at `-ln 2`.
pub fn log1mexp(x: f64) -> Result<f64> {
    if x.is_nan() || x > 0.0 {
        return Err(domain(format!("log1mexp requires x <= 0, got {x}")));
    }
    Ok(log1mexp_unchecked(x))
}

#[inline]
pub(crate) fn log1mexp_unchecked(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `[x]_+`.
#[inline]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Standard normal CDF via the complementary error function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`std_normal_cdf`] on `[0, 1]`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("quantile requires p in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    // Work in the lower tail, where erfc_inv keeps full relative accuracy.
    if p > 0.5 {
        return Ok(std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * (1.0 - p)));
    }
    Ok(-std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p))
}

/// Search interval for [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub tol_abs: f64,
    pub max_iter: usize,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64, tol_abs: f64, max_iter: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(domain(format!("bracket needs finite lo < hi, got [{lo}, {hi}]")));
        }
        if !(tol_abs > 0.0) {
            return Err(domain(format!("bracket tolerance must be positive, got {tol_abs}")));
        }
        if max_iter == 0 {
            return Err(domain("bracket max_iter must be positive"));
        }
        Ok(Bracket { lo, hi, tol_abs, max_iter })
    }
}

/// Final state of a bisection: the bracketing pair with `f(lo)` and `f(hi)`
/// of opposite sign (or zero), `hi - lo <= tol_abs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectOutcome {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl BisectOutcome {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bisection returning the final bracket.
pub fn bisect_bracket<F: Fn(f64) -> f64>(f: F, b: &Bracket) -> Result<BisectOutcome> {
    let (mut lo, mut hi) = (b.lo, b.hi);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo.is_nan() || f_hi.is_nan() || f_lo * f_hi > 0.0 {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    if f_lo == 0.0 {
        return Ok(BisectOutcome { lo, hi: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(BisectOutcome { lo: hi, hi, iterations: 0 });
    }
    let lo_negative = f_lo < 0.0;
    for iterations in 1..=b.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval collapsed to adjacent doubles.
            return Ok(BisectOutcome { lo, hi, iterations });
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(BisectOutcome { lo: mid, hi: mid, iterations });
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= b.tol_abs {
            return Ok(BisectOutcome { lo, hi, iterations });
        }
    }
    Err(Error::Convergence {
        iterations: b.max_iter,
        context: format!("bisection stalled at [{lo}, {hi}]"),
    })
}

/// Root of a monotone `f` on the bracket, to within `tol_abs` in `x`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, b: &Bracket) -> Result<f64> {
    bisect_bracket(f, b).map(|o| o.midpoint())
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`. Returns the best
/// point seen, so the result never falls below `max(f(lo), f(hi))`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rounds: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut best = (a, f(a));
    let fb = f(b);
    if fb > best.1 {
        best = (b, fb);
    }
    if rounds == 0 || !(b > a) {
        return best;
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..rounds {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Euclidean projection onto `{x : x_1 >= x_2 >= ... >= x_n >= 0}`: pool
/// adjacent violators for the nonincreasing constraint, then clamp at zero.
pub fn pava_monotone_nonneg(values: &[f64]) -> Vec<f64> {
    // (sum, count) per pooled block
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 >= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (s0 + s1, n0 + n1);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, n) in blocks {
        let mean = positive_part(s / n as f64);
        out.extend(std::iter::repeat_n(mean, n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_binomial_small_cases() {
        assert!((log_binomial(5, 2).unwrap().ln() - 10f64.ln()).abs() < 1e-15);
        assert_eq!(log_binomial(0, 0).unwrap().ln(), 0.0);
        assert!(matches!(log_binomial(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn log_binomial_matches_integer_arithmetic_up_to_30() {
        for n in 0..=30u64 {
            let mut c = 1u64;
            for i in 0..=n {
                let got = log_binomial(n, i).unwrap().value();
                assert!((got - c as f64).abs() <= 1e-12 * c as f64, "C({n},{i})");
                c = c * (n - i) / (i + 1);
            }
        }
    }

    #[test]
    fn pascal_recurrence_to_60() {
        for n in 1..=60u64 {
            for i in 1..n {
                let lhs = log_binomial(n, i).unwrap().value();
                let rhs =
                    log_binomial(n - 1, i - 1).unwrap().value() + log_binomial(n - 1, i).unwrap().value();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            }
        }
    }

    #[test]
    fn log1mexp_edges() {
        assert_eq!(log1mexp(f64::NEG_INFINITY).unwrap(), 0.0);
        assert!((log1mexp(-LN_2).unwrap() + LN_2).abs() < 1e-16);
        assert_eq!(log1mexp(0.0).unwrap(), f64::NEG_INFINITY);
        assert!(log1mexp(1e-3).is_err());
        // 1 - e^{-1e-12} = 1e-12 - 5e-25 + ...
        let expected = (1e-12f64).ln() + (-5e-13f64).ln_1p();
        let got = log1mexp(-1e-12).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-9);
    }

    #[test]
    fn log1mexp_is_continuous_across_the_split() {
        let below = log1mexp(-LN_2 - 1e-12).unwrap();
        let above = log1mexp(-LN_2 + 1e-12).unwrap();
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_matches_simpson_integration_of_density() {
        // Phi(z) = 1/2 + int_0^z phi, composite Simpson with 20000 panels.
        for &z in &[0.3, 1.0, 2.5, -1.7] {
            let n = 20_000;
            let h = z / n as f64;
            let mut s = std_normal_pdf(0.0) + std_normal_pdf(z);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * std_normal_pdf(k as f64 * h);
            }
            let oracle = 0.5 + s * h / 3.0;
            assert!((std_normal_cdf(z) - oracle).abs() < 1e-14, "z = {z}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-300, 1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999_999] {
            let z = std_normal_quantile(p).unwrap();
            let back = std_normal_cdf(z);
            assert!(((back - p) / p).abs() < 1e-12, "p = {p}, z = {z}, back = {back}");
        }
        assert_eq!(std_normal_quantile(0.0).unwrap(), f64::NEG_INFINITY);
        assert!(std_normal_quantile(1.5).is_err());
    }

    #[test]
    fn bisect_linear_and_exponential() {
        let b = Bracket::new(0.0, 2.0, 1e-12, 200).unwrap();
        assert!((bisect(|x| x - 1.0, &b).unwrap() - 1.0).abs() <= 1e-12);
        assert!((bisect(|x| x.exp() - 2.0, &b).unwrap() - LN_2).abs() <= 1e-12);
    }

    #[test]
    fn bisect_errors() {
        let b = Bracket::new(0.0, 2.0, 1e-12, 200).unwrap();
        assert!(matches!(bisect(|x| x + 1.0, &b), Err(Error::Bracket { .. })));
        let short = Bracket::new(0.0, 2.0, 1e-12, 5).unwrap();
        assert!(matches!(bisect(|x| x - 1.3, &short), Err(Error::Convergence { .. })));
        assert!(Bracket::new(1.0, 1.0, 1e-3, 10).is_err());
        assert!(Bracket::new(0.0, 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn golden_section_finds_interior_and_kink_maxima() {
        let (x, fx) = golden_section_max(|t| -(t - 0.3) * (t - 0.3), 0.0, 1.0, 80);
        assert!((x - 0.3).abs() < 1e-8 && fx.abs() < 1e-15);
        let (x, _) = golden_section_max(|t| -(t - 0.71f64).abs(), 0.0, 1.0, 80);
        assert!((x - 0.71).abs() < 1e-12);
    }

    #[test]
    fn pava_examples() {
        assert_eq!(pava_monotone_nonneg(&[5.0, 3.0, 1.0]), vec![5.0, 3.0, 1.0]);
        assert_eq!(pava_monotone_nonneg(&[1.0, 3.0]), vec![2.0, 2.0]);
        assert_eq!(pava_monotone_nonneg(&[2.0, -4.0]), vec![2.0, 0.0]);
        assert!(pava_monotone_nonneg(&[]).is_empty());
        assert_eq!(pava_monotone_nonneg(&[3.0, 7.0]), vec![5.0, 5.0]);
    }

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    fn feasible(x: &[f64]) -> bool {
        x.windows(2).all(|w| w[0] >= w[1] - 1e-12) && x.iter().all(|&v| v >= -1e-12)
    }

    /// Exhaustive oracle: every optimum of the cone QP is constant on
    /// consecutive blocks (block value = block mean) with a zero suffix.
    /// Enumerate every block partition and zero-suffix length, keep the
    /// feasible candidate closest to `v`.
    fn qp_oracle(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for cuts in 0u32..(1 << (n.saturating_sub(1))) {
            let mut bounds = vec![0];
            for j in 0..n - 1 {
                if cuts & (1 << j) != 0 {
                    bounds.push(j + 1);
                }
            }
            bounds.push(n);
            let nblocks = bounds.len() - 1;
            for zero_blocks in 0..=nblocks {
                let mut x = vec![0.0; n];
                for b in 0..nblocks - zero_blocks {
                    let (s, e) = (bounds[b], bounds[b + 1]);
                    let mean = v[s..e].iter().sum::<f64>() / (e - s) as f64;
                    x[s..e].iter_mut().for_each(|xi| *xi = mean);
                }
                if feasible(&x) {
                    let d = dist2(v, &x);
                    if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        best = Some((d, x));
                    }
                }
            }
        }
        best.unwrap().1
    }

    #[test]
    fn pava_matches_qp_oracle_exhaustively_small() {
        let grid = [-3.0, -1.0, 0.0, 0.5, 2.0, 4.0];
        let mut count = 0;
        for a in grid {
            for b in grid {
                for c in grid {
                    for d in grid {
                        let v = [a, b, c, d];
                        let p = pava_monotone_nonneg(&v);
                        let o = qp_oracle(&v);
                        assert!((dist2(&v, &p) - dist2(&v, &o)).abs() < 1e-12, "{v:?}");
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 1296);
    }

    proptest! {
        #[test]
        fn log_binomial_symmetric(n in 0u64..2000, frac in 0.0f64..=1.0) {
            let i = ((n as f64) * frac).floor() as u64;
            prop_assert_eq!(log_binomial(n, i).unwrap(), log_binomial(n, n - i).unwrap());
        }

        #[test]
        fn normal_cdf_symmetry(z in -40.0f64..40.0) {
            prop_assert!((std_normal_cdf(z) + std_normal_cdf(-z) - 1.0).abs() <= 1e-15);
        }

        #[test]
        fn pava_is_feasible_and_optimal(v in proptest::collection::vec(-10.0f64..10.0, 1..6),
                                        seeds in proptest::collection::vec(0.0f64..10.0, 6)) {
            let p = pava_monotone_nonneg(&v);
            prop_assert!(feasible(&p));
            let o = qp_oracle(&v);
            prop_assert!((dist2(&v, &p) - dist2(&v, &o)).abs() < 1e-9);
            // random feasible comparison point: sorted nonneg values
            let mut x: Vec<f64> = seeds[..v.len()].to_vec();
            x.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assert!(dist2(&v, &p) <= dist2(&v, &x) + 1e-12);
        }

        #[test]
        fn pava_is_contraction_toward_feasible_targets(
            v in proptest::collection::vec(-20.0f64..20.0, 1..30),
            h in proptest::collection::vec(0.0f64..20.0, 30)) {
            let mut h: Vec<f64> = h[..v.len()].to_vec();
            h.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let p = pava_monotone_nonneg(&v);
            prop_assert!(dist2(&p, &h) <= dist2(&v, &h) + 1e-9);
        }
    }

    #[test]
    fn log_sum_exp_accumulates() {
        let mut acc = LogSumExp::new();
        assert!(acc.total().is_zero());
        for x in [1.0f64, 2.0, 3.0, 0.0] {
            acc.add(LogWeight::from_linear(x).unwrap());
        }
        assert!((acc.total().value() - 6.0).abs() < 1e-14);
        let mut big = LogSumExp::new();
        big.add(LogWeight::from_ln(1000.0));
        big.add(LogWeight::from_ln(1000.0));
        assert!((big.total().ln() - (1000.0 + LN_2)).abs() < 1e-12);
    }

    #[test]
    fn log1mexp_relative_accuracy_grid() {
        // compare against series where exact: for tiny |x|, 1 - e^x = -x - x^2/2 - x^3/6 ...
        for &x in &[-1e-15, -1e-10, -1e-6] {
            let series: f64 = -x - x * x / 2.0 - x * x * x / 6.0;
            let got = log1mexp(x).unwrap();
            assert!(((got - series.ln()) / series.ln()).abs() < 1e-14);
        }
        // far tail: ln(1 - e^x) ~ -e^x
        let x = -50.0f64;
        assert!(((log1mexp(x).unwrap() + x.exp()) / x.exp()).abs() < 1e-14);
    }
}
