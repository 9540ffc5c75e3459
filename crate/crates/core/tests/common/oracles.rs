use gosvm::qp::QpProblem;
use nalgebra::{DMatrix, DVector};

/// Minimum of a strictly convex QP by enumerating every active set of the
/// inequality block (bounds included), solving each equality-constrained
/// KKT system and keeping the best primal-feasible candidate.
pub fn qp_active_set(p: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = p.n_var();
    // Stack inequality rows and finite bounds as a·x ≤ b.
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..p.a_ineq.nrows() {
        rows.push((p.a_ineq.row(i).transpose(), p.b_ineq[i]));
    }
    for j in 0..n {
        if let Some(l) = &p.lower {
            if l[j].is_finite() {
                let mut a = DVector::zeros(n);
                a[j] = -1.0;
                rows.push((a, -l[j]));
            }
        }
        if let Some(u) = &p.upper {
            if u[j].is_finite() {
                let mut a = DVector::zeros(n);
                a[j] = 1.0;
                rows.push((a, u[j]));
            }
        }
    }
    let m = rows.len();
    let neq = p.a_eq.nrows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|&k| mask & (1 << k) != 0).collect();
        let k = neq + active.len();
        if k > n {
            continue;
        }
        let dim = n + k;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.q);
        for j in 0..n {
            rhs[j] = -p.c[j];
        }
        for r in 0..neq {
            for j in 0..n {
                kkt[(n + r, j)] = p.a_eq[(r, j)];
                kkt[(j, n + r)] = p.a_eq[(r, j)];
            }
            rhs[n + r] = p.b_eq[r];
        }
        for (r, &a) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + neq + r, j)] = rows[a].0[j];
                kkt[(j, n + neq + r)] = rows[a].0[j];
            }
            rhs[n + neq + r] = rows[a].1;
        }
        let Some(sol) = kkt.clone().lu().solve(&rhs) else {
            continue;
        };
        if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let feasible = rows
            .iter()
            .all(|(a, b)| a.dot(&x) <= b + 1e-9 * (1.0 + b.abs()));
        if !feasible {
            continue;
        }
        let obj = 0.5 * x.dot(&(&p.q * &x)) + p.c.dot(&x);
        if best.as_ref().is_none_or(|(_, o)| obj < *o) {
            best = Some((x, obj));
        }
    }
    best
}

/// Unscaled KKT residuals recomputed from a returned primal/dual pair:
/// (primal infeasibility, stationarity, complementarity, min multiplier).
pub fn kkt_residuals(p: &QpProblem, sol: &gosvm::qp::QpSolution) -> (f64, f64, f64, f64) {
    let x = &sol.x;
    let d = &sol.duals;
    let mut stat = &p.q * x + &p.c + p.a_ineq.transpose() * &d.ineq + p.a_eq.transpose() * &d.eq;
    stat -= &d.lower;
    stat += &d.upper;
    let mut prim: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut min_mult: f64 = 0.0;
    let ax = &p.a_ineq * x;
    for i in 0..ax.len() {
        let slack = p.b_ineq[i] - ax[i];
        prim = prim.max(-slack);
        comp = comp.max((slack * d.ineq[i]).abs());
        min_mult = min_mult.min(d.ineq[i]);
    }
    if p.a_eq.nrows() > 0 {
        prim = prim.max((&p.a_eq * x - &p.b_eq).amax());
    }
    for j in 0..x.len() {
        if let Some(l) = &p.lower {
            if l[j].is_finite() {
                prim = prim.max(l[j] - x[j]);
                comp = comp.max(((x[j] - l[j]) * d.lower[j]).abs());
            }
        }
        if let Some(u) = &p.upper {
            if u[j].is_finite() {
                prim = prim.max(x[j] - u[j]);
                comp = comp.max(((u[j] - x[j]) * d.upper[j]).abs());
            }
        }
        min_mult = min_mult.min(d.lower[j]).min(d.upper[j]);
    }
    (prim.max(0.0), stat.amax(), comp, min_mult)
}

/// `1 + ‖data‖` as documented on `KktResiduals`.
pub fn data_scale(p: &QpProblem) -> f64 {
    let mut m = p.q.amax().max(p.c.amax()).max(p.b_eq.amax());
    m = m.max(p.b_ineq.amax());
    for b in [&p.lower, &p.upper].into_iter().flatten() {
        m = m.max(
            b.iter()
                .filter(|v| v.is_finite())
                .fold(0.0f64, |a, v| a.max(v.abs())),
        );
    }
    1.0 + m
}

/// Candidate cuts: midpoints between consecutive distinct sorted values,
/// plus ±∞.
fn cuts(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut out = vec![f64::NEG_INFINITY, f64::INFINITY];
    out.extend(s.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out
}

/// Order distance by exhaustive enumeration of every (t, s) cut pair: the
/// worst cut `t` on `reference` of the best cut `s` on `h`.
pub fn cut_pair_distance(h: &[f64], reference: &[f64]) -> f64 {
    let n = h.len();
    if n == 0 {
        return 0.0;
    }
    let (ch, cr) = (cuts(h), cuts(reference));
    let mut worst = 0usize;
    for &t in &cr {
        let mut best = usize::MAX;
        for &s in &ch {
            let miss = (0..n).filter(|&i| (h[i] > s) != (reference[i] > t)).count();
            best = best.min(miss);
        }
        worst = worst.max(best);
    }
    worst as f64 / n as f64
}

/// Per-class variant: maximum of the within-class distances.
pub fn cut_pair_distance_per_class(h: &[f64], reference: &[f64], positive: &[bool]) -> f64 {
    [false, true]
        .iter()
        .map(|&c| {
            let idx: Vec<usize> = (0..h.len()).filter(|&i| positive[i] == c).collect();
            let hc: Vec<f64> = idx.iter().map(|&i| h[i]).collect();
            let rc: Vec<f64> = idx.iter().map(|&i| reference[i]).collect();
            cut_pair_distance(&hc, &rc)
        })
        .fold(0.0, f64::max)
}

/// RBF or linear Gram matrix computed directly from the definition.
pub fn gram(x: &[Vec<f64>], rbf_width: Option<f64>) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| match rbf_width {
        Some(w) => {
            let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (2.0 * w * w)).exp()
        }
        None => x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum(),
    })
}

/// Slot of each sample: dense rank of its target within its group; groups
/// are laid out one after another with an empty slot in between.
pub fn slots(targets: &[f64], group: &[usize]) -> Vec<usize> {
    let n_groups = group.iter().max().map_or(0, |g| g + 1);
    let mut out = vec![0; targets.len()];
    let mut base = 0;
    for gi in 0..n_groups {
        let mut vals: Vec<f64> = (0..targets.len())
            .filter(|&i| group[i] == gi)
            .map(|i| targets[i])
            .collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for i in (0..targets.len()).filter(|&i| group[i] == gi) {
            out[i] = base + vals.iter().position(|&v| v == targets[i]).unwrap();
        }
        base += vals.len() + 1;
    }
    out
}

/// Smallest Σ|ζ| placing every sample of a zero discriminant into its slot
/// at unit margin: per chain of occupied slots, the count-weighted distance
/// to the best slot.
pub fn slot_normalizer(slots: &[usize]) -> f64 {
    let top = slots.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; top];
    for &s in slots {
        counts[s] += 1;
    }
    let mut total = 0usize;
    let mut start = 0;
    while start < top {
        if counts[start] == 0 {
            start += 1;
            continue;
        }
        let mut end = start;
        while end < top && counts[end] > 0 {
            end += 1;
        }
        total += (start..end)
            .map(|m| {
                (start..end)
                    .map(|j| counts[j] * j.abs_diff(m))
                    .sum::<usize>()
            })
            .min()
            .unwrap();
        start = end;
    }
    total as f64
}

/// Optimal value of the ordinal-only (Shashua–Levin) primal
/// `min ½‖w‖² − νρ + (1/n*)Σ|ζ|` through its dual
///
/// ```text
/// max −½ γᵀKγ,  γ = a − c,  a, c ≥ 0,  |γ_i| ≤ 1/n*,  Σ(a + c) ≥ 2ν,
///     Σ_{slot j} a = Σ_{slot j−1} c  for every boundary between two
///     occupied slots,
/// ```
///
/// where `a_i` (`c_i`) are fixed at 0 when the lower (upper) boundary of
/// the sample's slot is not a variable.
pub fn shashua_levin_dual(k: &DMatrix<f64>, slots: &[usize], nu: f64, n_star: f64) -> f64 {
    use gosvm::qp::{InteriorPoint, QpSolver, QpStatus};
    let n = slots.len();
    let top = slots.iter().max().unwrap() + 1;
    let occupied = |j: usize| slots.contains(&j);
    let variable = |j: usize| j > 0 && j < top && occupied(j - 1) && occupied(j);

    let mut q = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] = k[(i, j)];
            q[(n + i, n + j)] = k[(i, j)];
            q[(i, n + j)] = -k[(i, j)];
            q[(n + i, j)] = -k[(i, j)];
        }
    }
    // Generous box; asserted inactive below.
    let cap = 10.0;
    let mut upper = DVector::from_element(2 * n, cap);
    for i in 0..n {
        if !variable(slots[i]) {
            upper[i] = 0.0;
        }
        if !variable(slots[i] + 1) {
            upper[n + i] = 0.0;
        }
    }
    let mut a = DMatrix::zeros(2 * n + 1, 2 * n);
    let mut b = DVector::from_element(2 * n + 1, 1.0 / n_star);
    for i in 0..n {
        a[(i, i)] = 1.0;
        a[(i, n + i)] = -1.0;
        a[(n + i, i)] = -1.0;
        a[(n + i, n + i)] = 1.0;
        a[(2 * n, i)] = -1.0;
        a[(2 * n, n + i)] = -1.0;
    }
    b[2 * n] = -2.0 * nu;
    let boundaries: Vec<usize> = (1..top).filter(|&j| variable(j)).collect();
    let mut e = DMatrix::zeros(boundaries.len(), 2 * n);
    for (r, &j) in boundaries.iter().enumerate() {
        for i in 0..n {
            if slots[i] == j {
                e[(r, i)] = 1.0;
            }
            if slots[i] + 1 == j {
                e[(r, n + i)] = -1.0;
            }
        }
    }
    let p = QpProblem::new(q, DVector::zeros(2 * n))
        .with_ineq(a, b)
        .with_eq(e, DVector::zeros(boundaries.len()))
        .with_bounds(Some(DVector::zeros(2 * n)), Some(upper.clone()));
    let sol = InteriorPoint::with_tol(1e-10).solve(&p).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    for i in 0..2 * n {
        assert!(
            upper[i] == 0.0 || sol.x[i] < 0.5 * cap,
            "oracle box is active"
        );
    }
    -sol.objective
}

/// Slots for a dataset: oracle ranks (global) or label-signed oracle ranks
/// per class, negatives first.
pub fn dataset_slots(
    ds: &gosvm::data::Dataset,
    mode: gosvm::ordermetrics::OrderingMode,
) -> Vec<usize> {
    let o = ds.oracle().unwrap();
    let y = ds.ys();
    match mode {
        gosvm::ordermetrics::OrderingMode::Global => slots(&o, &vec![0; o.len()]),
        gosvm::ordermetrics::OrderingMode::PerClass => {
            let t: Vec<f64> = o.iter().zip(&y).map(|(a, b)| a * b).collect();
            let group: Vec<usize> = y.iter().map(|&v| usize::from(v > 0.0)).collect();
            slots(&t, &group)
        }
    }
}
