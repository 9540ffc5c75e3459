//! Zero-one, threshold and loss-balance losses, the empirical order distance
//! and its oracle form, slot-based ordinal slack, and the exact pairwise
//! ordinal program used as a small-sample reference.
//!
//! The order distance between two discriminant vectors only depends on
//! indicator labelings `1[h > s]`, so the infimum over increasing transforms
//! reduces to a choice of cut point on `h`. Cuts are taken between
//! consecutive distinct sorted values, plus the two infinite sentinels; tied
//! values are never separated.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::kernels::{gram_self, KernelFeatures, KernelSpec};
use crate::qp::{InteriorPoint, QpProblem, QpSolver};

pub fn l01(yhat: f64, y: f64) -> u8 {
    u8::from((yhat > 0.0 && y <= 0.0) || (yhat <= 0.0 && y > 0.0))
}

pub fn lthr(yhat: f64, y: f64, t: f64) -> u8 {
    l01(yhat - t, y - t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingMode {
    /// One ordering over all samples.
    #[default]
    Global,
    /// Independent orderings within each class.
    PerClass,
}

impl std::str::FromStr for OrderingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(OrderingMode::Global),
            "per-class" | "perclass" => Ok(OrderingMode::PerClass),
            other => Err(Error::InvalidArgument(format!(
                "unknown ordering mode `{other}`"
            ))),
        }
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} contains non-finite values"
        )))
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Dense ranks of distinct values (ties share a rank) and the rank count.
fn dense_ranks(v: &[f64]) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0; v.len()];
    let mut rank = 0;
    for (k, &i) in order.iter().enumerate() {
        if k > 0 && v[i] != v[order[k - 1]] {
            rank += 1;
        }
        ranks[i] = rank;
    }
    (ranks, if v.is_empty() { 0 } else { rank + 1 })
}

/// `max_t min_s #{i : 1[h_i > s] ≠ 1[t_i > t]}` over cut points.
fn max_min_mismatches(h: &[f64], targets: &[f64]) -> usize {
    let n = h.len();
    if n == 0 {
        return 0;
    }
    let (h_rank, h_groups) = dense_ranks(h);
    let (t_rank, t_groups) = dense_ranks(targets);
    let mut worst = 0;
    let mut ones_in = vec![0usize; h_groups];
    let mut size_in = vec![0usize; h_groups];
    for &g in &h_rank {
        size_in[g] += 1;
    }
    // Cut k on the targets labels z_i = 1[t_rank_i ≥ k]; k = 0 and
    // k = t_groups are the infinite sentinels.
    for k in 0..=t_groups {
        ones_in.iter_mut().for_each(|c| *c = 0);
        let mut zeros_total = 0;
        for i in 0..n {
            if t_rank[i] >= k {
                ones_in[h_rank[i]] += 1;
            } else {
                zeros_total += 1;
            }
        }
        // s below every h: all predicted 1, mismatches are the zeros.
        let mut cur = zeros_total as isize;
        let mut best = cur;
        for g in 0..h_groups {
            let ones = ones_in[g] as isize;
            let zeros = (size_in[g] - ones_in[g]) as isize;
            cur += ones - zeros;
            best = best.min(cur);
        }
        worst = worst.max(best as usize);
    }
    worst
}

/// Empirical order distance `D(h1, h2)`: the worst threshold on `h2` of the
/// best cut on `h1`, as a fraction of the sample.
pub fn empirical_order_distance(h1: &[f64], h2: &[f64]) -> Result<f64> {
    check_len(h1.len(), h2.len())?;
    check_finite("h1", h1)?;
    check_finite("h2", h2)?;
    if h1.is_empty() {
        return Ok(0.0);
    }
    Ok(max_min_mismatches(h1, h2) as f64 / h1.len() as f64)
}

/// Empirical order distance of a discriminant to target orderings. With
/// [`OrderingMode::PerClass`] the distance is computed within each class and
/// the larger of the two is returned.
pub fn empirical_liso(
    h: &[f64],
    targets: &[f64],
    mode: OrderingMode,
    labels: Option<&[Label]>,
) -> Result<f64> {
    check_len(h.len(), targets.len())?;
    check_finite("h", h)?;
    check_finite("targets", targets)?;
    match mode {
        OrderingMode::Global => empirical_order_distance(h, targets),
        OrderingMode::PerClass => {
            let labels = labels
                .ok_or_else(|| Error::InvalidArgument("per-class ordering needs labels".into()))?;
            check_len(h.len(), labels.len())?;
            let mut worst: f64 = 0.0;
            for class in [Label::Negative, Label::Positive] {
                let idx: Vec<usize> = (0..h.len()).filter(|&i| labels[i] == class).collect();
                if idx.is_empty() {
                    return Err(Error::EmptyClass(class.as_i8()));
                }
                let hc: Vec<f64> = idx.iter().map(|&i| h[i]).collect();
                let tc: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
                worst = worst.max(empirical_order_distance(&hc, &tc)?);
            }
            Ok(worst)
        }
    }
}

/// Mean loss balance: `+max(w, 1)` per false negative, `−max(1, 1/w)` per
/// false positive.
pub fn loss_balance(yhat: &[f64], y: &[Label], w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::NonPositiveWeight(w));
    }
    check_len(yhat.len(), y.len())?;
    if yhat.is_empty() {
        return Ok(0.0);
    }
    let fn_w = w.max(1.0);
    let fp_w = (1.0 / w).max(1.0);
    let total: f64 = yhat
        .iter()
        .zip(y)
        .map(|(&p, &l)| match (p > 0.0, l) {
            (false, Label::Positive) => fn_w,
            (true, Label::Negative) => -fp_w,
            _ => 0.0,
        })
        .sum();
    Ok(total / yhat.len() as f64)
}

/// Per-sample distances `|ζ_i|` from `h_i` to its slot
/// `[g[j] + ρ/2, g[j+1] − ρ/2]`, `j = index[i]`.
///
/// `g` holds `n_slots + 1` boundaries; infinite entries leave that side of a
/// slot open. Only slots that hold at least one sample must have
/// `g[j+1] − g[j] ≥ ρ`; boundaries of empty slots are unconstrained.
pub fn shashua_levin_slacks(h: &[f64], index: &[usize], g: &[f64], rho_o: f64) -> Result<Vec<f64>> {
    check_len(h.len(), index.len())?;
    check_finite("h", h)?;
    if !(rho_o >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "margin must be non-negative, got {rho_o}"
        )));
    }
    if g.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidIntervals("NaN boundary".into()));
    }
    let n_slots = g.len().saturating_sub(1);
    let mut occupied = vec![false; n_slots];
    for &j in index {
        if j >= n_slots {
            return Err(Error::InvalidIntervals(format!(
                "slot {j} outside {n_slots} slots"
            )));
        }
        occupied[j] = true;
    }
    for j in (0..n_slots).filter(|&j| occupied[j]) {
        let width = g[j + 1] - g[j];
        let tol = 1e-9 * (1.0 + g[j].abs().min(g[j + 1].abs()).min(1e12));
        if !(width > 0.0) || width < rho_o - tol {
            return Err(Error::InvalidIntervals(format!(
                "slot {j}: boundaries {} .. {} narrower than margin {rho_o}",
                g[j],
                g[j + 1]
            )));
        }
    }
    Ok(h.iter()
        .zip(index)
        .map(|(&v, &j)| {
            let lo = g[j] + rho_o / 2.0;
            let hi = g[j + 1] - rho_o / 2.0;
            (lo - v).max(0.0) + (v - hi).max(0.0)
        })
        .collect())
}

pub fn shashua_levin_loss(h: &[f64], index: &[usize], g: &[f64], rho_o: f64) -> Result<f64> {
    Ok(shashua_levin_slacks(h, index, g, rho_o)?.iter().sum())
}

/// Largest sample count accepted by [`exact_ordinal_objective`].
pub const EXACT_ORDINAL_MAX_N: usize = 12;

#[derive(Debug, Clone)]
pub struct ExactOrdinal {
    /// Discriminant values on the training samples, in input order.
    pub discriminant: Vec<f64>,
    /// Kernel expansion coefficients (input order).
    pub coefficients: Vec<f64>,
    /// Thresholds in increasing oracle order; the last one is vacuous.
    pub thresholds: Vec<f64>,
    /// `max_i l_i` at the optimum.
    pub loss: f64,
    pub objective: f64,
}

/// Sort order of the oracle, rejecting ties.
fn strict_order(oracle: &[f64]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..oracle.len()).collect();
    order.sort_by(|&a, &b| oracle[a].total_cmp(&oracle[b]));
    for w in order.windows(2) {
        if oracle[w[0]] == oracle[w[1]] {
            return Err(Error::DuplicateOracle(oracle[w[0]]));
        }
    }
    Ok(order)
}

/// Solves the pairwise-hinge ordinal program
///
/// ```text
/// min ½‖w‖² + C·max_i l_i,   l_i = Σ_j max(ρ − y_ij (w·x_j − ξ_i), 0)
/// s.t. ξ_{i−1} + ρ ≤ ξ_i
/// ```
///
/// with samples sorted by oracle and `y_ij = +1` iff `oracle_j > oracle_i`.
/// One slack variable per pair makes the hinge sums linear. The top
/// threshold separates nothing and is fixed at a value where its loss is 0.
pub fn exact_ordinal_objective(
    ds: &Dataset,
    ks: &KernelSpec,
    c: f64,
    rho: f64,
) -> Result<ExactOrdinal> {
    let n = ds.len();
    if n > EXACT_ORDINAL_MAX_N {
        return Err(Error::TooLarge {
            n,
            cap: EXACT_ORDINAL_MAX_N,
        });
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "capacity must be positive, got {c}"
        )));
    }
    ks.validate()?;
    let oracle = ds.oracle().ok_or(Error::MissingOracle)?;
    let order = strict_order(&oracle)?;
    if n == 0 {
        return Err(Error::InsufficientData {
            requested: 1,
            available: 0,
        });
    }
    if n == 1 {
        let rho_top = if rho > 0.0 { rho } else { 0.0 };
        return Ok(ExactOrdinal {
            discriminant: vec![0.0],
            coefficients: vec![0.0; usize::from(!matches!(ks, KernelSpec::Linear))],
            thresholds: vec![rho_top],
            loss: 0.0,
            objective: 0.0,
        });
    }
    let feats = match ks {
        KernelSpec::Linear => KernelFeatures::explicit(ds),
        _ => KernelFeatures::from_gram(&gram_self(ks, ds)),
    };
    let r = feats.rank();
    let t = n - 1; // active thresholds
                   // Layout: w (r) | ξ (t) | η (t·n) | L
    let (off_xi, off_eta) = (r, r + t);
    let off_l = off_eta + t * n;
    let nv = off_l + 1;
    let mut q = DMatrix::zeros(nv, nv);
    for i in 0..r {
        q[(i, i)] = 1.0;
    }
    let mut cvec = DVector::zeros(nv);
    cvec[off_l] = c;

    let n_rows = t * n + t + t.saturating_sub(1);
    let mut a = DMatrix::zeros(n_rows, nv);
    let mut b = DVector::zeros(n_rows);
    let mut row = 0;
    for ti in 0..t {
        for (pos_j, &j) in order.iter().enumerate() {
            // y_ij = +1 for samples above threshold ti in oracle order.
            let yij = if pos_j > ti { 1.0 } else { -1.0 };
            // ρ − y_ij(Φ_j w − ξ_i) − η_ij ≤ 0
            for k in 0..r {
                a[(row, k)] = -yij * feats.phi[(j, k)];
            }
            a[(row, off_xi + ti)] = yij;
            a[(row, off_eta + ti * n + pos_j)] = -1.0;
            b[row] = -rho;
            row += 1;
        }
    }
    for ti in 0..t {
        for pos_j in 0..n {
            a[(row, off_eta + ti * n + pos_j)] = 1.0;
        }
        a[(row, off_l)] = -1.0;
        row += 1;
    }
    for ti in 1..t {
        a[(row, off_xi + ti - 1)] = 1.0;
        a[(row, off_xi + ti)] = -1.0;
        b[row] = -rho;
        row += 1;
    }
    let mut lower = DVector::from_element(nv, f64::NEG_INFINITY);
    for k in off_eta..off_l {
        lower[k] = 0.0;
    }
    let p = QpProblem::new(q, cvec)
        .with_ineq(a, b)
        .with_bounds(Some(lower), None);
    let sol = InteriorPoint::with_tol(1e-10).solve(&p)?;
    if !sol.is_optimal() {
        return Err(Error::SolverFailed(sol.status));
    }
    let w = sol.x.rows(0, r).into_owned();
    let f = &feats.phi * &w;
    let coefficients = match ks {
        KernelSpec::Linear => Vec::new(),
        _ => (&feats.to_coefficients * &w).iter().cloned().collect(),
    };
    let mut thresholds: Vec<f64> = (0..t).map(|k| sol.x[off_xi + k]).collect();
    let top = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + rho;
    let last = thresholds.last().map(|v| v + rho).unwrap_or(top).max(top);
    thresholds.push(last);
    let sorted_f: Vec<f64> = order.iter().map(|&j| f[j]).collect();
    let loss = (0..t)
        .map(|ti| threshold_loss(&sorted_f, ti, thresholds[ti], rho))
        .fold(0.0, f64::max);
    let objective = 0.5 * w.norm_squared() + c * loss;
    Ok(ExactOrdinal {
        discriminant: f.iter().cloned().collect(),
        coefficients,
        thresholds,
        loss,
        objective,
    })
}

/// `l_i(ξ)` for threshold `i` over discriminants sorted by oracle.
fn threshold_loss(sorted_f: &[f64], i: usize, xi: f64, rho: f64) -> f64 {
    sorted_f
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let yij = if j > i { 1.0 } else { -1.0 };
            (rho - yij * (f - xi)).max(0.0)
        })
        .sum()
}

/// `{ξ : l_i(ξ) ≤ level}` as a closed interval, or `None` when empty.
fn threshold_sublevel(sorted_f: &[f64], i: usize, rho: f64, level: f64) -> Option<(f64, f64)> {
    let n = sorted_f.len();
    let mut bps: Vec<f64> = sorted_f
        .iter()
        .enumerate()
        .map(|(j, &f)| if j > i { f - rho } else { f + rho })
        .collect();
    bps.sort_by(f64::total_cmp);
    let vals: Vec<f64> = bps
        .iter()
        .map(|&x| threshold_loss(sorted_f, i, x, rho))
        .collect();
    let k_min = (0..n).min_by(|&a, &b| vals[a].total_cmp(&vals[b]))?;
    if vals[k_min] > level {
        return None;
    }
    let left_slope = (i + 1) as f64; // magnitude of the slope below every breakpoint
    let right_slope = (n - 1 - i) as f64;
    let lo = match (0..=k_min).find(|&k| vals[k] <= level) {
        Some(0) => {
            if left_slope > 0.0 {
                bps[0] - (level - vals[0]) / left_slope
            } else {
                f64::NEG_INFINITY
            }
        }
        Some(k) => crossing(bps[k - 1], vals[k - 1], bps[k], vals[k], level),
        None => unreachable!(),
    };
    let hi = match (k_min..n).rev().find(|&k| vals[k] <= level) {
        Some(k) if k == n - 1 => {
            if right_slope > 0.0 {
                bps[n - 1] + (level - vals[n - 1]) / right_slope
            } else {
                f64::INFINITY
            }
        }
        Some(k) => crossing(bps[k + 1], vals[k + 1], bps[k], vals[k], level),
        None => unreachable!(),
    };
    Some((lo, hi))
}

/// Point on the segment from (x_out, v_out) to (x_in, v_in) where the linear
/// interpolant equals `level`; `v_out > level ≥ v_in`.
fn crossing(x_out: f64, v_out: f64, x_in: f64, v_in: f64, level: f64) -> f64 {
    if v_out == v_in {
        return x_in;
    }
    x_in + (x_out - x_in) * (level - v_in) / (v_out - v_in)
}

/// Exact `min_ξ max_i l_i(ξ)` over ordered thresholds (`ξ_{i−1} + ρ ≤ ξ_i`)
/// for fixed discriminant values: bisection on the level with a greedy
/// feasibility check of the threshold chain.
pub fn exact_ordinal_loss(h: &[f64], oracle: &[f64], rho: f64) -> Result<f64> {
    check_len(h.len(), oracle.len())?;
    check_finite("h", h)?;
    let order = strict_order(oracle)?;
    let n = h.len();
    if n < 2 {
        return Ok(0.0);
    }
    let sorted_f: Vec<f64> = order.iter().map(|&j| h[j]).collect();
    let t = n - 1;
    let feasible = |level: f64| -> bool {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..t {
            let Some((lo, hi)) = threshold_sublevel(&sorted_f, i, rho, level) else {
                return false;
            };
            let xi = lo.max(prev + rho);
            if xi > hi {
                return false;
            }
            prev = xi;
        }
        true
    };
    // Any evenly spaced chain gives an upper bound.
    let base = sorted_f.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi_level = (0..t)
        .map(|i| threshold_loss(&sorted_f, i, base + i as f64 * rho, rho))
        .fold(0.0, f64::max);
    let mut lo_level = 0.0;
    if feasible(0.0) {
        return Ok(0.0);
    }
    while !feasible(hi_level) {
        hi_level = hi_level * 2.0 + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo_level + hi_level);
        if mid <= lo_level || mid >= hi_level {
            break;
        }
        if feasible(mid) {
            hi_level = mid;
        } else {
            lo_level = mid;
        }
    }
    Ok(hi_level)
}
