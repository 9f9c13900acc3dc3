//! Adaptive composition of pure-DP and bounded-range mechanisms with a
//! homogeneous parameter: the exact recursion over mechanism sequences,
//! its closed forms for three mechanisms, and ordering comparisons.

use std::collections::HashMap;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::nonadaptive::{delta_opt_mixed, CompositionQuery};
use crate::numerics::{golden_section_max, positive_part};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Slot {
    Dp,
    Br,
}

impl std::str::FromStr for Slot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dp" => Ok(Slot::Dp),
            "br" => Ok(Slot::Br),
            other => Err(domain(format!("unknown slot '{other}', expected dp or br"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSequence {
    pub slots: Vec<Slot>,
    pub eps: f64,
}

/// Longest sequence accepted by [`delta_opt_recursive`].
pub const MAX_SEQUENCE_LEN: usize = 12;

impl MechanismSequence {
    pub fn new(slots: Vec<Slot>, eps: f64) -> Result<Self> {
        if slots.is_empty() {
            return Err(domain("mechanism sequence must be nonempty"));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(domain(format!("eps must be positive and finite, got {eps}")));
        }
        Ok(MechanismSequence { slots, eps })
    }

    pub fn br_count(&self) -> usize {
        self.slots.iter().filter(|s| **s == Slot::Br).count()
    }
}

/// Discretization of the per-branch supremum over `t in [0, eps]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_level: usize,
    pub refine_rounds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points_per_level: 4001, refine_rounds: 60 }
    }
}

impl GridSpec {
    pub fn new(points_per_level: usize, refine_rounds: usize) -> Result<Self> {
        if points_per_level < 3 {
            return Err(domain(format!("points_per_level must be at least 3, got {points_per_level}")));
        }
        Ok(GridSpec { points_per_level, refine_rounds })
    }
}

/// Agreement tolerance for recursion values computed on a [`GridSpec`].
pub const GRID_TOLERANCE: f64 = 1e-6;

// Budgets at memoized nodes are snapped to this lattice, so every cached
// value is a function of its key alone.
const MEMO_SCALE: f64 = 1e12;

fn q_linear(eps: f64, t: f64) -> f64 {
    (t - eps).exp_m1() / (-eps).exp_m1()
}

fn q_pure(eps: f64) -> f64 {
    1.0 / (1.0 + (-eps).exp())
}

fn base_case(x: f64) -> f64 {
    positive_part(-x.exp_m1())
}

struct Recursion<'a> {
    slots: &'a [Slot],
    eps: f64,
    grid: GridSpec,
    ts: Vec<f64>,
    qs: Vec<f64>,
    neg_exp_ts: Vec<f64>,
    q2: f64,
    // lambdas[d] holds the all-DP expansion coefficients for a suffix of length d.
    lambdas: Vec<Vec<f64>>,
    // shifts[d][j] = exp((2j - d) eps), pairing with lambdas[d][j].
    shifts: Vec<Vec<f64>>,
    all_dp_from: usize,
    memo: Mutex<HashMap<(usize, i64), f64>>,
}

impl<'a> Recursion<'a> {
    fn new(seq: &'a MechanismSequence, grid: GridSpec) -> Self {
        let eps = seq.eps;
        let n = grid.points_per_level;
        let ts: Vec<f64> = (0..n).map(|i| eps * i as f64 / (n - 1) as f64).collect();
        let qs = ts.iter().map(|&t| q_linear(eps, t)).collect();
        let all_dp_from = seq.slots.iter().rposition(|s| *s == Slot::Br).map_or(0, |i| i + 1);
        let max_d = seq.slots.len() - all_dp_from;
        let lambdas = (0..=max_d as u64).map(|d| lambda_coefficients(d, eps)).collect();
        let shifts = (0..=max_d)
            .map(|d| (0..=d).map(|j| ((2.0 * j as f64 - d as f64) * eps).exp()).collect())
            .collect();
        let neg_exp_ts = ts.iter().map(|t| (-t).exp()).collect();
        Recursion {
            slots: &seq.slots,
            eps,
            grid,
            ts,
            qs,
            neg_exp_ts,
            q2: q_pure(eps),
            lambdas,
            shifts,
            all_dp_from,
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn value(&self, pos: usize, x: f64, top: bool) -> f64 {
        if pos >= self.all_dp_from {
            return self.dp_suffix(self.slots.len() - pos, x);
        }
        match self.slots[pos] {
            Slot::Dp => self.dp_node(pos, x, top),
            Slot::Br => self.br_node(pos, x, top).1,
        }
    }

    fn dp_suffix(&self, d: usize, x: f64) -> f64 {
        lambda_sum(&self.lambdas[d], self.eps, x)
    }

    /// All-DP suffix of length `d` at budget `y` given `s = exp(y)`.
    fn dp_suffix_scaled(&self, d: usize, s: f64) -> f64 {
        self.lambdas[d].iter().zip(&self.shifts[d]).map(|(l, c)| l * positive_part(1.0 - s * c)).sum()
    }

    fn dp_node(&self, pos: usize, x: f64, top: bool) -> f64 {
        let key = (pos, (x * MEMO_SCALE).round() as i64);
        if let Some(&v) = self.memo.lock().get(&key) {
            return v;
        }
        let xs = key.1 as f64 / MEMO_SCALE;
        let v = self.q2 * self.value(pos + 1, xs - self.eps, top)
            + (1.0 - self.q2) * self.value(pos + 1, xs + self.eps, top);
        self.memo.lock().insert(key, v);
        v
    }

    fn branch(&self, pos: usize, x: f64, t: f64, q: f64) -> f64 {
        q * self.value(pos + 1, x - t, false) + (1.0 - q) * self.value(pos + 1, x + self.eps - t, false)
    }

    /// Supremum over t at a BR slot; returns `(argmax, value)`.
    fn br_node(&self, pos: usize, x: f64, top: bool) -> (f64, f64) {
        let eps = self.eps;
        let (imax, vmax) = if pos + 1 >= self.all_dp_from {
            // exp(x - t) = exp(x) exp(-t) keeps transcendental calls out of the scan.
            let d = self.slots.len() - pos - 1;
            let (s_lo, s_hi) = (x.exp(), (x + eps).exp());
            let on_grid = |i: usize| {
                let (q, e) = (self.qs[i], self.neg_exp_ts[i]);
                q * self.dp_suffix_scaled(d, s_lo * e) + (1.0 - q) * self.dp_suffix_scaled(d, s_hi * e)
            };
            if top {
                par::argmax_range(self.ts.len(), on_grid)
            } else {
                par::argmax_range_seq(self.ts.len(), on_grid)
            }
        } else {
            let on_grid = |i: usize| self.branch(pos, x, self.ts[i], self.qs[i]);
            if top {
                par::argmax_range(self.ts.len(), on_grid)
            } else {
                par::argmax_range_seq(self.ts.len(), on_grid)
            }
        };
        let anywhere = |t: f64| self.branch(pos, x, t, q_linear(eps, t));
        let mut best = (self.ts[imax], vmax);
        for t in local_candidates(x, eps) {
            let v = anywhere(t);
            if v > best.1 {
                best = (t, v);
            }
        }
        if self.grid.refine_rounds > 0 {
            let lo = self.ts[imax.saturating_sub(1)];
            let hi = self.ts[(imax + 1).min(self.ts.len() - 1)];
            let (t, v) = golden_section_max(anywhere, lo, hi, self.grid.refine_rounds);
            if v > best.1 {
                best = (t, v);
            }
        }
        best
    }
}

/// Points where the optimal t at a BR slot with remaining budget `x` is
/// known to sit for short suffixes: affine combinations of `x` and `eps`.
fn local_candidates(x: f64, eps: f64) -> Vec<f64> {
    let mut out = vec![eps / 2.0];
    for a in [x - eps, x, x + eps, x + 2.0 * eps] {
        for d in [1.0, 2.0, 3.0] {
            let t = a / d;
            if (0.0..=eps).contains(&t) {
                out.push(t);
            }
        }
    }
    out
}

fn check_recursion_inputs(seq: &MechanismSequence, eps_g: f64) -> Result<()> {
    if seq.slots.len() > MAX_SEQUENCE_LEN {
        return Err(Error::Size { what: "sequence length", got: seq.slots.len(), limit: MAX_SEQUENCE_LEN });
    }
    if !eps_g.is_finite() {
        return Err(domain(format!("eps_g must be finite, got {eps_g}")));
    }
    Ok(())
}

/// Optimal δ for the adaptive composition `seq` at global budget `eps_g`.
/// Each BR slot maximizes its own t independently on every branch.
pub fn delta_opt_recursive(seq: &MechanismSequence, eps_g: f64, grid: &GridSpec) -> Result<f64> {
    check_recursion_inputs(seq, eps_g)?;
    let rec = Recursion::new(seq, *grid);
    Ok(rec.value(0, eps_g, true).clamp(0.0, 1.0))
}

/// Like [`delta_opt_recursive`], also returning the maximizing t of the
/// first slot when that slot is BR.
pub fn delta_opt_recursive_with_argmax(
    seq: &MechanismSequence,
    eps_g: f64,
    grid: &GridSpec,
) -> Result<(f64, Option<f64>)> {
    check_recursion_inputs(seq, eps_g)?;
    let rec = Recursion::new(seq, *grid);
    if seq.slots[0] == Slot::Br {
        let (t, v) = rec.br_node(0, eps_g, true);
        Ok((v.clamp(0.0, 1.0), Some(t)))
    } else {
        Ok((rec.value(0, eps_g, true).clamp(0.0, 1.0), None))
    }
}

fn lambda_coefficients(ell: u64, eps: f64) -> Vec<f64> {
    let q = q_pure(eps);
    let mut lam = vec![1.0];
    for _ in 0..ell {
        let mut next = vec![0.0; lam.len() + 1];
        for (i, &l) in lam.iter().enumerate() {
            next[i] += q * l;
            next[i + 1] += (1.0 - q) * l;
        }
        lam = next;
    }
    lam
}

fn lambda_sum(lam: &[f64], eps: f64, x: f64) -> f64 {
    let ell = lam.len() as f64 - 1.0;
    lam.iter()
        .enumerate()
        .map(|(i, &l)| l * base_case((2.0 * i as f64 - ell) * eps + x))
        .sum()
}

/// Coefficients `lambda_{ell, 0..=ell}` of the unrolled all-DP recursion.
pub fn lambda_expansion(ell: u64, eps: f64) -> Result<Vec<f64>> {
    if ell == 0 {
        return Err(domain("ell must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(domain(format!("eps must be positive, got {eps}")));
    }
    Ok(lambda_coefficients(ell, eps))
}

/// `sum_i lambda_{ell,i} [1 - e^{(2i - ell) eps + x}]_+`.
pub fn lambda_expansion_delta(ell: u64, eps: f64, x: f64) -> Result<f64> {
    Ok(lambda_sum(&lambda_expansion(ell, eps)?, eps, x))
}

/// `q_{eps,t} [1 - e^{alpha - t}]_+ + (1 - q_{eps,t}) [1 - e^{alpha + eps - t}]_+`
/// in its three-branch form.
pub fn reduction_identity(alpha: f64, eps: f64, t: f64) -> Result<f64> {
    if !(eps > 0.0) || !(0.0..=eps).contains(&t) || alpha.is_nan() {
        return Err(domain(format!("reduction identity needs eps > 0 and t in [0, eps]; got eps={eps}, t={t}")));
    }
    Ok(if alpha >= t {
        0.0
    } else if t <= alpha + eps {
        q_linear(eps, t) * -(alpha - t).exp_m1()
    } else {
        -alpha.exp_m1()
    })
}

/// The three-mechanism closed forms with two BR slots and one DP slot,
/// valid for `0 <= eps_g <= eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XyzClosedForms {
    pub eps: f64,
    pub eps_g: f64,
}

pub fn xyz_closed_forms(eps: f64, eps_g: f64) -> Result<XyzClosedForms> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("eps must be positive and finite, got {eps}")));
    }
    if eps_g > eps {
        return Err(domain(format!(
            "closed forms need eps_g <= eps (got {eps_g} > {eps}); all three orderings coincide there, use the recursion"
        )));
    }
    if !(eps_g >= 0.0) {
        return Err(domain(format!("eps_g must be nonnegative, got {eps_g}")));
    }
    Ok(XyzClosedForms { eps, eps_g })
}

impl XyzClosedForms {
    fn q(&self, t: f64) -> f64 {
        q_linear(self.eps, t)
    }

    fn c(&self) -> f64 {
        -(-self.eps).exp_m1()
    }

    pub fn x(&self, t: f64) -> f64 {
        let (e, g) = (self.eps, self.eps_g);
        let qt = self.q(t);
        let a = self.q((g - t) / 2.0);
        let b = self.q((g + e - t) / 2.0);
        q_pure(e) * (qt * a * a * self.c() + (1.0 - qt) * b * b * self.c())
    }

    pub fn y(&self, t: f64) -> f64 {
        let (e, g) = (self.eps, self.eps_g);
        let qt = self.q(t);
        let b = self.q((g + e - t) / 2.0);
        q_pure(e) * (qt * -(g - e - t).exp_m1() + (1.0 - qt) * b * b * self.c())
    }

    pub fn z(&self, t: f64) -> f64 {
        let (e, g) = (self.eps, self.eps_g);
        let a = self.q(e + (g - t) / 2.0);
        (1.0 - q_pure(e)) * self.q(t) * a * a * self.c()
    }

    fn high(&self) -> bool {
        self.eps_g >= self.eps / 2.0
    }

    fn low(&self) -> bool {
        self.eps_g <= self.eps / 2.0
    }

    /// δ for the ordering (DP, BR, BR).
    pub fn delta_dp_br_br(&self) -> f64 {
        let (e, g) = (self.eps, self.eps_g);
        let z = self.z((2.0 * e + g) / 3.0);
        let mut v = f64::NEG_INFINITY;
        if self.high() {
            v = v.max(self.x(e / 2.0) + z);
        }
        if self.low() {
            v = v.max(self.y((e + g) / 3.0) + z);
        }
        v
    }

    /// δ for the ordering (BR, DP, BR).
    pub fn delta_br_dp_br(&self) -> f64 {
        let (e, g) = (self.eps, self.eps_g);
        let mut v = f64::NEG_INFINITY;
        if self.high() {
            v = v.max(self.x(e / 2.0)).max(self.y(g) + self.z(g));
        }
        if self.low() {
            v = v.max(self.x(g)).max(self.y(e / 2.0) + self.z(e / 2.0));
        }
        v
    }

    /// δ for the ordering (BR, BR, DP); equal to (BR, DP, BR).
    pub fn delta_br_br_dp(&self) -> f64 {
        self.delta_br_dp_br()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingGapRow {
    pub eps_g: f64,
    pub delta_dp_br_br: f64,
    pub delta_br_dp_br: f64,
    pub abs_gap: f64,
    pub ratio: f64,
}

/// Closed-form δ for (DP, BR, BR) against (BR, DP, BR) along `eps_g_grid`.
pub fn ordering_gap_curve(eps: f64, eps_g_grid: &[f64]) -> Result<Vec<OrderingGapRow>> {
    eps_g_grid
        .iter()
        .map(|&g| {
            if !(0.0..eps).contains(&g) {
                return Err(domain(format!("eps_g grid must lie in [0, {eps}), got {g}")));
            }
            let cf = xyz_closed_forms(eps, g)?;
            let a = cf.delta_dp_br_br();
            let b = cf.delta_br_dp_br();
            Ok(OrderingGapRow { eps_g: g, delta_dp_br_br: a, delta_br_dp_br: b, abs_gap: a - b, ratio: a / b })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionInvarianceReport {
    pub k: usize,
    pub eps: f64,
    pub eps_g: f64,
    /// δ with the BR slot at position i.
    pub by_position: Vec<f64>,
    /// Non-adaptive value with k - 1 DP slots and one BR slot.
    pub mixed: f64,
    pub max_deviation: f64,
}

impl PositionInvarianceReport {
    pub fn holds(&self) -> bool {
        self.max_deviation <= GRID_TOLERANCE
    }
}

/// Runs the recursion with the single BR slot in each of the `k` positions.
pub fn single_br_position_invariance(k: usize, eps: f64, eps_g: f64, grid: &GridSpec) -> Result<PositionInvarianceReport> {
    if !(1..=6).contains(&k) {
        return Err(Error::Size { what: "sequence length", got: k, limit: 6 });
    }
    let mixed = delta_opt_mixed(&CompositionQuery::new(k as u64, k as u64 - 1, eps, eps_g)?);
    let by_position = (0..k)
        .map(|pos| {
            let mut slots = vec![Slot::Dp; k];
            slots[pos] = Slot::Br;
            delta_opt_recursive(&MechanismSequence::new(slots, eps)?, eps_g, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = by_position.iter().map(|v| (v - mixed).abs()).fold(0.0, f64::max);
    Ok(PositionInvarianceReport { k, eps, eps_g, by_position, mixed, max_deviation })
}

/// Whether moving a BR slot one step later never lowers δ: `seq_a` holds
/// (BR, DP) where `seq_b` holds (DP, BR) at the same adjacent positions.
pub fn worst_case_ordering_check(
    seq_a: &MechanismSequence,
    seq_b: &MechanismSequence,
    eps_g: f64,
    grid: &GridSpec,
) -> Result<bool> {
    if seq_a.slots.len() != seq_b.slots.len() || seq_a.eps != seq_b.eps {
        return Err(domain("sequences must share length and eps"));
    }
    let diff: Vec<usize> = (0..seq_a.slots.len()).filter(|&i| seq_a.slots[i] != seq_b.slots[i]).collect();
    let valid = match diff.as_slice() {
        [] => true,
        [i, j] => {
            *j == i + 1
                && seq_a.slots[*i] == Slot::Br
                && seq_a.slots[*j] == Slot::Dp
                && seq_b.slots[*i] == Slot::Dp
                && seq_b.slots[*j] == Slot::Br
        }
        _ => false,
    };
    if !valid {
        return Err(domain("seq_b must equal seq_a with one adjacent (BR, DP) swapped to (DP, BR)"));
    }
    let a = delta_opt_recursive(seq_a, eps_g, grid)?;
    let b = delta_opt_recursive(seq_b, eps_g, grid)?;
    Ok(a <= b + GRID_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonadaptive::{delta_opt_br_nonadaptive, delta_opt_dp};

    fn seq(s: &str, eps: f64) -> MechanismSequence {
        MechanismSequence::new(s.split(',').map(|x| x.parse().unwrap()).collect(), eps).unwrap()
    }

    fn coarse() -> GridSpec {
        GridSpec::new(401, 40).unwrap()
    }

    #[test]
    fn all_dp_matches_closed_form() {
        for &(k, eps, g) in &[(1usize, 0.5, 0.1), (4, 0.3, 0.2), (7, 0.4, -0.9), (10, 0.1, 0.5)] {
            let s = MechanismSequence::new(vec![Slot::Dp; k], eps).unwrap();
            let r = delta_opt_recursive(&s, g, &coarse()).unwrap();
            assert!((r - delta_opt_dp(k as u64, eps, g).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn single_br_budget_exhausted() {
        for &g in &[1.0, 1.5] {
            assert_eq!(delta_opt_recursive(&seq("br", 1.0), g, &coarse()).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_br_matches_nonadaptive() {
        for &g in &[-0.4, 0.0, 0.3, 0.8] {
            let r = delta_opt_recursive(&seq("br", 1.0), g, &coarse()).unwrap();
            let c = delta_opt_br_nonadaptive(1, 1.0, g).unwrap();
            assert!((r - c).abs() < 1e-12, "{r} vs {c}");
        }
    }

    #[test]
    fn size_and_domain_errors() {
        let long = MechanismSequence::new(vec![Slot::Dp; 13], 0.1).unwrap();
        assert!(matches!(delta_opt_recursive(&long, 0.0, &coarse()), Err(Error::Size { .. })));
        assert!(MechanismSequence::new(vec![], 0.1).is_err());
        assert!(GridSpec::new(2, 0).is_err());
        assert!(xyz_closed_forms(1.0, 1.2).is_err());
    }

    #[test]
    fn lambda_examples() {
        let q = q_pure(0.7);
        let l1 = lambda_expansion(1, 0.7).unwrap();
        assert!((l1[0] - q).abs() < 1e-16 && (l1[1] - (1.0 - q)).abs() < 1e-16);
        for ell in 1..=30 {
            let s: f64 = lambda_expansion(ell, 0.3).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
        let v = lambda_expansion_delta(7, 0.4, -0.9).unwrap();
        assert!((v - delta_opt_dp(7, 0.4, -0.9).unwrap()).abs() < 1e-12);
        // binomial form
        let l = lambda_expansion(6, 0.4).unwrap();
        let q = q_pure(0.4);
        let c = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
        for i in 0..=6 {
            let b = c[i] * q.powi(6 - i as i32) * (1.0 - q).powi(i as i32);
            assert!((l[i] - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reduction_identity_branches() {
        assert_eq!(reduction_identity(0.3, 1.0, 0.3).unwrap(), 0.0);
        let v = reduction_identity(-2.0, 1.0, 0.5).unwrap();
        assert!((v - (1.0 - (-2f64).exp())).abs() < 1e-15);
        let direct = |a: f64, e: f64, t: f64| {
            let q = q_linear(e, t);
            q * positive_part(1.0 - (a - t).exp()) + (1.0 - q) * positive_part(1.0 - (a + e - t).exp())
        };
        for &(a, e, t) in &[(0.1, 1.0, 0.6), (-0.3, 0.5, 0.1), (-1.0, 0.4, 0.35)] {
            assert!((reduction_identity(a, e, t).unwrap() - direct(a, e, t)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_forms_coincide_at_full_budget() {
        let cf = xyz_closed_forms(1.0, 1.0).unwrap();
        let a = cf.delta_dp_br_br();
        assert!((a - cf.delta_br_dp_br()).abs() < 1e-15);
        assert!((a - cf.delta_br_br_dp()).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_coarse_recursion() {
        let g = GridSpec::new(801, 60).unwrap();
        for &eg in &[0.3, 0.7] {
            let cf = xyz_closed_forms(1.0, eg).unwrap();
            let dbb = delta_opt_recursive(&seq("dp,br,br", 1.0), eg, &g).unwrap();
            let bdb = delta_opt_recursive(&seq("br,dp,br", 1.0), eg, &g).unwrap();
            assert!((dbb - cf.delta_dp_br_br()).abs() < 1e-6);
            assert!((bdb - cf.delta_br_dp_br()).abs() < 1e-6);
            assert!(cf.delta_dp_br_br() > cf.delta_br_dp_br());
        }
    }

    #[test]
    fn z_is_nonnegative() {
        let cf = xyz_closed_forms(1.0, 0.9).unwrap();
        for i in 0..=100 {
            let t = 0.9 + 0.1 * i as f64 / 100.0;
            assert!(cf.z(t) >= 0.0);
        }
        assert_eq!(cf.z(1.0), 0.0);
    }

    #[test]
    fn gap_curve_rows() {
        let rows = ordering_gap_curve(1.0, &[0.0, 0.25, 0.5, 0.75, 0.999_999]).unwrap();
        assert!(rows.iter().all(|r| r.ratio >= 1.0));
        assert!(rows[2].abs_gap > 0.0);
        assert!(rows[4].abs_gap < 1e-5);
        assert!(ordering_gap_curve(1.0, &[1.0]).is_err());
    }

    #[test]
    fn position_invariance_small() {
        let r = single_br_position_invariance(2, 1.0, 0.4, &coarse()).unwrap();
        assert!(r.holds(), "{r:?}");
        let r = single_br_position_invariance(1, 1.0, 0.4, &coarse()).unwrap();
        assert!(r.holds());
    }

    #[test]
    fn ordering_check_validates_inputs() {
        let g = coarse();
        assert!(worst_case_ordering_check(&seq("br,dp", 1.0), &seq("dp,br", 1.0), 0.3, &g).unwrap());
        assert!(worst_case_ordering_check(&seq("dp,dp", 1.0), &seq("dp,dp", 1.0), 0.3, &g).unwrap());
        assert!(worst_case_ordering_check(&seq("dp,br", 1.0), &seq("br,dp", 1.0), 0.3, &g).is_err());
    }

    #[test]
    fn argmax_reported_for_leading_br() {
        let (v, t) = delta_opt_recursive_with_argmax(&seq("br,dp", 1.0), 0.3, &coarse()).unwrap();
        assert!(t.is_some() && v > 0.0);
        let (_, t) = delta_opt_recursive_with_argmax(&seq("dp,br", 1.0), 0.3, &coarse()).unwrap();
        assert!(t.is_none());
    }
}
