//! Data behind each plotted figure, with the default parameter regimes.

use dpmix::adaptive::ordering_gap_curve;
use dpmix::calibration::{kfold_comparison, kfold_sweep, solve_sigma_zcdp, HistogramSpec, KfoldRow, Method};
use dpmix::mechanisms::{known_lap, ls_noise, solve_truncation_level, Histogram, RngState};
use dpmix::nonadaptive::{delta_opt_mixed, eps_inverse, Bound, CompositionQuery};
use dpmix::setwise::{homogeneous_setwise_eps, HomogeneousSet};
use dpmix::Result;

use crate::table::{fmt_f64, Cell, Table};

pub const FAMILY_M: [u64; 5] = [0, 5, 10, 15, 20];

/// `a, a + step, ..., b` built from integer offsets so the grid is exact.
pub fn linear_grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| a + i as f64 * step).collect()
}

fn m_columns(first: &str, prefix: &str) -> Vec<String> {
    std::iter::once(first.to_string()).chain(FAMILY_M.iter().map(|m| format!("{prefix}{m}"))).collect()
}

fn table_with(columns: Vec<String>) -> Table {
    Table { columns, ..Default::default() }
}

/// Set-wise ε_g for `m` DP and `k - m` BR mechanisms against optimal DP
/// composition, as a function of the per-mechanism ε.
pub fn figure1() -> Result<Table> {
    let (k, delta) = (20u64, 1e-6);
    let mut cols = m_columns("eps", "setwise_m_dp_");
    cols.push("optimal_dp".into());
    let mut t = table_with(cols).param("figure", 1).param("k", k).param("delta", fmt_f64(delta));
    for eps in linear_grid(0.01, 1.0, 0.01) {
        let mut row: Vec<Cell> = vec![eps.into()];
        for &m in &FAMILY_M {
            let set = HomogeneousSet { m_dp: m, eps, m_br: k - m, alpha: eps, m_cdp: 0, mu: 0.0, tau: 0.0 };
            row.push(homogeneous_setwise_eps(&set, delta)?.into());
        }
        row.push(eps_inverse(delta, Bound::Dp, k, eps)?.into());
        t.push(row);
    }
    Ok(t)
}

/// Optimal non-adaptive δ(ε_g) with `m` DP and `k - m` BR mechanisms.
pub fn figure2() -> Result<Table> {
    let (k, eps) = (20u64, 0.1);
    let mut t = table_with(m_columns("eps_g", "delta_m_")).param("figure", 2).param("k", k).param("eps", fmt_f64(eps));
    for eg in linear_grid(0.0, 3.0, 0.01) {
        let mut row: Vec<Cell> = vec![eg.into()];
        for &m in &FAMILY_M {
            row.push(delta_opt_mixed(&CompositionQuery::new(k, m, eps, eg)?).into());
        }
        t.push(row);
    }
    Ok(t)
}

/// Gap between the (DP, BR, BR) and (BR, DP, BR) orderings.
pub fn figure3() -> Result<Table> {
    let eps = 1.0;
    let grid = linear_grid(0.01, 0.99, 0.01);
    let mut t = Table::new(&["eps_g", "delta_dp_br_br", "delta_br_dp_br", "abs_gap", "ratio"])
        .param("figure", 3)
        .param("eps", fmt_f64(eps));
    for r in ordering_gap_curve(eps, &grid)? {
        t.push(vec![r.eps_g.into(), r.delta_dp_br_br.into(), r.delta_br_dp_br.into(), r.abs_gap.into(), r.ratio.into()]);
    }
    Ok(t)
}

const METHODS: [Method; 3] = [Method::Laplace, Method::GaussianZcdp, Method::AnalyticGaussian];

fn eps_of(rows: &[KfoldRow], m: Method) -> f64 {
    rows.iter().find(|r| r.method == m).map(|r| r.eps_g).unwrap_or(f64::NAN)
}

fn crossing_note(label: &str, keys: &[u64], a: &[f64], b: &[f64], what: &str) -> String {
    match keys.iter().zip(a.iter().zip(b)).find(|(_, (x, y))| x < y) {
        Some((k, _)) => format!("crossing: {label} first below laplace at {what}={k}"),
        None => format!("crossing: {label} never below laplace"),
    }
}

fn comparison_table(figure: u8, key: &str, keys: &[u64], per_key: Vec<Vec<KfoldRow>>) -> Table {
    let cols: Vec<String> = std::iter::once(key.to_string()).chain(METHODS.iter().map(|m| m.name().to_string())).collect();
    let mut t = table_with(cols).param("figure", figure);
    let mut by_method = vec![Vec::new(); 3];
    for (k, rows) in keys.iter().zip(&per_key) {
        let mut row: Vec<Cell> = vec![(*k).into()];
        for (i, m) in METHODS.iter().enumerate() {
            let e = eps_of(rows, *m);
            by_method[i].push(e);
            row.push(e.into());
        }
        t.push(row);
    }
    t.notes.push(crossing_note("gaussian_zcdp", keys, &by_method[1], &by_method[0], key));
    t.notes.push(crossing_note("analytic_gaussian", keys, &by_method[2], &by_method[0], key));
    t
}

/// One-shot ε_g of equal-variance Laplace and Gaussian histograms against
/// the ℓ0-sensitivity.
pub fn figure4() -> Result<Table> {
    let (sigma, delta, tau) = (5.0, 1e-6, 1.0);
    let keys: Vec<u64> = (1..=60).collect();
    let per_key = keys
        .iter()
        .map(|&d0| kfold_comparison(1, &HistogramSpec::new(1000, d0, tau, 1000)?, sigma, delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(comparison_table(4, "delta0", &keys, per_key)
        .param("sigma", fmt_f64(sigma))
        .param("delta", fmt_f64(delta))
        .param("tau", fmt_f64(tau)))
}

/// ε_g after `k` releases of a histogram with ℓ0-sensitivity 10.
pub fn figure5() -> Result<Table> {
    let (sigma, delta, tau, d0) = (5.0, 1e-6, 1.0, 10u64);
    let rows = kfold_sweep(10, &HistogramSpec::new(1000, d0, tau, 1000)?, sigma, delta)?;
    let keys: Vec<u64> = (1..=10).collect();
    let per_key = keys.iter().map(|&k| rows.iter().filter(|r| r.k == k).cloned().collect()).collect();
    Ok(comparison_table(5, "k", &keys, per_key)
        .param("delta0", d0)
        .param("sigma", fmt_f64(sigma))
        .param("delta", fmt_f64(delta))
        .param("tau", fmt_f64(tau)))
}

/// Default 25-element histogram with Zipf-like counts.
pub fn default_histogram() -> Result<Histogram> {
    let entries = (1..=25u32).map(|i| (format!("w{i:02}"), (2000.0 / i as f64).round())).collect();
    Histogram::new(entries, HistogramSpec::new(25, 25, 1.0, 25)?)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-rank mean and standard deviation of LSNoise and Laplace counts at the
/// same overall budget.
pub fn figure6(seed: u64) -> Result<Table> {
    let (eps, delta, trials) = (0.1, 1e-6, 100u64);
    let h = default_histogram()?;
    let k = h.entries.len() as u64;
    let eps_g = eps_inverse(delta, Bound::Dp, k, eps)?;
    let sigma = solve_sigma_zcdp(eps_g, k, delta)?;
    let sorted = h.sorted_desc();
    let ordering: Vec<String> = sorted.iter().map(|(id, _)| id.clone()).collect();
    let base = RngState::new(seed);
    let mut ls = vec![Vec::new(); ordering.len()];
    let mut lap = vec![Vec::new(); ordering.len()];
    for i in 0..trials {
        let mut r1 = base.substream(2 * i);
        for (j, (_, v)) in ls_noise(&h, &ordering, sigma, &mut r1)?.into_iter().enumerate() {
            ls[j].push(v);
        }
        let mut r2 = base.substream(2 * i + 1);
        let noisy: std::collections::BTreeMap<String, f64> = known_lap(&h, eps, &mut r2)?.into_iter().collect();
        for (j, id) in ordering.iter().enumerate() {
            lap[j].push(noisy[id]);
        }
    }
    let mut t = Table::new(&["rank", "element", "true_count", "lsnoise_mean", "lsnoise_sd", "laplace_mean", "laplace_sd"])
        .param("figure", 6)
        .param("eps_per_count", fmt_f64(eps))
        .param("delta", fmt_f64(delta))
        .param("eps_g", fmt_f64(eps_g))
        .param("sigma", fmt_f64(sigma))
        .param("trials", trials)
        .param("seed", seed);
    for (j, (id, c)) in sorted.iter().enumerate() {
        let (lm, ls_sd) = mean_sd(&ls[j]);
        let (pm, p_sd) = mean_sd(&lap[j]);
        t.push(vec![(j + 1).into(), id.as_str().into(), (*c).into(), lm.into(), ls_sd.into(), pm.into(), p_sd.into()]);
    }
    Ok(t)
}

/// Truncation level of the truncated Gaussian release against the
/// ℓ0-sensitivity, with δ split evenly between zCDP and truncation.
pub fn figure7() -> Result<Table> {
    let (tau, eps, delta) = (1.0, 0.1, 1e-10);
    let mut t = Table::new(&["delta0", "sigma", "T"])
        .param("figure", 7)
        .param("tau", fmt_f64(tau))
        .param("eps", fmt_f64(eps))
        .param("delta", fmt_f64(delta));
    for d0 in 1..=60u64 {
        let sigma = solve_sigma_zcdp(eps, d0, delta / 2.0)?;
        let big_t = solve_truncation_level(d0, tau, sigma, delta / 2.0)?;
        t.push(vec![d0.into(), sigma.into(), big_t.into()]);
    }
    Ok(t)
}

/// Table for figure `n` in `1..=7`.
pub fn figure(n: u8, seed: u64) -> Result<Table> {
    match n {
        1 => figure1(),
        2 => figure2(),
        3 => figure3(),
        4 => figure4(),
        5 => figure5(),
        6 => figure6(seed),
        7 => figure7(),
        _ => Err(dpmix::Error::Domain(format!("figure must be in 1..=7, got {n}"))),
    }
}
