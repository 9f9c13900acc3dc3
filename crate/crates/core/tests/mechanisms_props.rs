use std::collections::BTreeMap;

use dpmix::calibration::HistogramSpec;
use dpmix::mechanisms::{
    exp_mech_topk, ls_noise_detailed, sample_truncated_normal, solve_truncation_level, trunc_gauss_release, Histogram,
    RngState, TruncGaussConfig,
};
use dpmix::numerics::std_normal_pdf;
use proptest::prelude::*;

fn histogram(counts: &[f64]) -> Histogram {
    let n = counts.len() as u64;
    let entries = counts.iter().enumerate().map(|(i, c)| (format!("e{i:02}"), *c)).collect();
    Histogram::new(entries, HistogramSpec::new(n, n, 1.0, n).unwrap()).unwrap()
}

#[test]
fn uniform_draws_pass_chi_square() {
    let mut rng = RngState::new(99);
    let mut bins = [0u64; 100];
    let n = 1_000_000;
    for _ in 0..n {
        bins[(rng.uniform_open() * 100.0) as usize] += 1;
    }
    let expected = n as f64 / 100.0;
    let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 99 degrees of freedom.
    assert!(chi2 < 148.23, "chi2 = {chi2}");
}

#[test]
fn exp_mech_has_bounded_likelihood_range() {
    let eps = 1.0;
    let (p, q) = (histogram(&[3.0, 2.0, 1.0]), histogram(&[4.0, 2.0, 1.0]));
    let n = 400_000;
    let freq = |h: &Histogram, seed: u64| {
        let mut rng = RngState::new(seed);
        let mut c: BTreeMap<String, f64> = BTreeMap::new();
        for _ in 0..n {
            *c.entry(exp_mech_topk(h, 1, eps, &mut rng).unwrap().remove(0)).or_insert(0.0) += 1.0 / n as f64;
        }
        c
    };
    let (fp, fq) = (freq(&p, 1), freq(&q, 2));
    let ratios: Vec<f64> = fp.iter().map(|(id, a)| (a / fq[id]).ln()).collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!((hi - lo - eps).abs() < 0.05, "range {} from {ratios:?}", hi - lo);
    let z: f64 = [3.0f64, 2.0, 1.0].iter().map(|c| (eps * c).exp()).sum();
    for (i, c) in [3.0f64, 2.0, 1.0].iter().enumerate() {
        let want = (eps * c).exp() / z;
        let got = fp[&format!("e{i:02}")];
        assert!((got - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt(), "{got} vs {want}");
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn truncated_pair_renyi_divergence_within_zcdp_budget() {
    let tau = 1.0;
    for &sigma in &[0.5, 1.0, 2.0, 5.0] {
        let s = tau * sigma;
        let t = solve_truncation_level(1, tau, sigma, 1e-6).unwrap();
        let (a, b) = (tau - t, t);
        let p = |x: f64| std_normal_pdf(x / s);
        let q = |x: f64| std_normal_pdf((x - tau) / s);
        let zp = simpson(p, a, b, 20_000);
        let zq = simpson(q, a, b, 20_000);
        for &alpha in &[1.5, 2.0, 4.0, 8.0] {
            let integrand = |x: f64| (p(x) / zp).powf(alpha) * (q(x) / zq).powf(1.0 - alpha);
            let d = simpson(integrand, a, b, 20_000).ln() / (alpha - 1.0);
            let budget = alpha / (2.0 * sigma * sigma);
            assert!(d <= budget * (1.0 + 1e-9), "sigma={sigma} alpha={alpha}: {d} > {budget}");
        }
    }
}

#[test]
fn trunc_gauss_is_seed_deterministic() {
    let h = histogram(&[500.0, 300.0, 40.0, 3.0, 0.0]);
    let cfg = TruncGaussConfig::new(2, 10, 1.0, 5.0, 1e-6).unwrap();
    let a = trunc_gauss_release(&h, &cfg, &mut RngState::new(5)).unwrap();
    let b = trunc_gauss_release(&h, &cfg, &mut RngState::new(5)).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|it| it.rank <= 3));
    assert!(a.iter().any(|it| it.element == "e00"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ls_noise_projects_toward_truth(counts in prop::collection::vec(0.0f64..500.0, 1..40), sigma in 0.01f64..50.0, seed in any::<u64>()) {
        let h = histogram(&counts);
        let ordering: Vec<String> = h.sorted_desc().into_iter().map(|(id, _)| id).collect();
        let o = ls_noise_detailed(&h, &ordering, sigma, &mut RngState::new(seed)).unwrap();
        prop_assert!(o.projected.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(o.projected.iter().all(|&v| v >= 0.0));
        let dist = |v: &[f64]| v.iter().zip(&o.true_counts).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        prop_assert!(dist(&o.projected) <= dist(&o.noisy) * (1.0 + 1e-12) + 1e-9);
    }

    #[test]
    fn ls_noise_accepts_partial_orderings(counts in prop::collection::vec(0.0f64..100.0, 2..20), take in 1usize..20, seed in any::<u64>()) {
        let h = histogram(&counts);
        let mut ordering: Vec<String> = h.entries.keys().cloned().collect();
        ordering.reverse();
        ordering.truncate(take.min(counts.len()));
        let o = ls_noise_detailed(&h, &ordering, 1.0, &mut RngState::new(seed)).unwrap();
        prop_assert_eq!(o.projected.len(), ordering.len());
        let mut dup = ordering.clone();
        dup.push(ordering[0].clone());
        prop_assert!(ls_noise_detailed(&h, &dup, 1.0, &mut RngState::new(seed)).is_err());
    }

    #[test]
    fn truncated_normal_stays_in_support(mean in -100.0f64..100.0, sd in 0.01f64..20.0, w in 0.001f64..50.0, seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        for _ in 0..50 {
            let x = sample_truncated_normal(&mut rng, mean, sd, w).unwrap();
            prop_assert!((x - mean).abs() <= w * (1.0 + 1e-12));
        }
    }

    #[test]
    fn trunc_gauss_releases_only_above_threshold(counts in prop::collection::vec(0.0f64..200.0, 1..30), sigma in 0.3f64..8.0, d0 in 1u64..8, seed in any::<u64>()) {
        let h = histogram(&counts);
        let cfg = TruncGaussConfig::new(d0, counts.len() as u64, 1.0, sigma, 1e-6).unwrap();
        let sorted = h.sorted_desc();
        let out = trunc_gauss_release(&h, &cfg, &mut RngState::new(seed)).unwrap();
        prop_assert!(out.windows(2).all(|w| w[0].rank < w[1].rank));
        for it in out {
            let (id, c) = &sorted[it.rank - 1];
            prop_assert_eq!(id, &it.element);
            prop_assert!(it.value > cfg.threshold());
            prop_assert!((it.value - c).abs() <= cfg.t * (1.0 + 1e-12));
        }
    }
}
