//! Joint classification / ordinal training with a shared discriminant.
//!
//! ```text
//! min ½‖w‖² + α(−ν_b ρ_b + (1/n)Σξ_i) + (1−α)(−ν_o ρ_o + (1/n*)Σ|ζ_i|)
//! s.t. y_i(w·x_i + b) ≥ ρ_b − ξ_i,   ξ ≥ 0,  ρ_b ≥ 0
//!      g_{I(i)} + ρ_o/2 ≤ w·x_i + ζ_i ≤ g_{I(i)+1} − ρ_o/2,   ρ_o ≥ 0
//! ```
//!
//! `I(i)` is the sample's slot from [`build_index`]. Kernels enter through
//! explicit eigen-features of the training Gram matrix, so `w` lives in a
//! finite feature space and maps back to expansion coefficients afterwards.
//!
//! A boundary `g_j` is a variable only when both neighbouring slots hold
//! samples; outer boundaries, and the two boundaries of the empty slot that
//! separates the classes in per-class mode, are infinite. Per-class orderings
//! are therefore independent chains.
//!
//! `n*` is the smallest total slot adjustment `Σ|ζ_i|` achievable at unit
//! margin with a zero discriminant. With this normalizer the problem is
//! bounded exactly for `ν_o ≤ 1`; for a tie-free global ordering it equals
//! `⌊n²/4⌋`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::kernels::{gram_self, KernelFeatures, KernelSpec};
use crate::nusvm::TrainedModel;
use crate::ordermetrics::{empirical_liso, loss_balance, OrderingMode};
use crate::qp::{InteriorPoint, QpProblem, QpSolver, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoSvmParams {
    pub nu_b: f64,
    pub nu_o: f64,
    pub alpha: f64,
    pub kernel: KernelSpec,
    pub ordering: OrderingMode,
}

impl GoSvmParams {
    pub fn new(nu_b: f64, nu_o: f64, alpha: f64, kernel: KernelSpec) -> Self {
        GoSvmParams {
            nu_b,
            nu_o,
            alpha,
            kernel,
            ordering: OrderingMode::Global,
        }
    }

    pub fn with_ordering(mut self, ordering: OrderingMode) -> Self {
        self.ordering = ordering;
        self
    }

    fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let bad = |msg: String| Err(Error::InfeasibleParams { msg, status: None });
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha = {} outside [0, 1]", self.alpha));
        }
        if !(self.nu_o >= 0.0) {
            return bad(format!("nu_o = {} is negative", self.nu_o));
        }
        if !(self.nu_b > 0.0) {
            return bad(format!("nu_b = {} must be positive", self.nu_b));
        }
        // At the endpoints the weightless block is dropped from the QP, so
        // the solver cannot certify the corresponding range.
        if self.alpha == 1.0 && self.nu_o > 1.0 {
            return bad(format!("nu_o = {} outside [0, 1]", self.nu_o));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotIndex {
    pub indices: Vec<usize>,
    pub n_slots: usize,
}

impl SlotIndex {
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_slots];
        for &j in &self.indices {
            c[j] += 1;
        }
        c
    }

    /// Whether boundary `j` (between slots `j−1` and `j`) is a variable.
    fn is_inner_boundary(counts: &[usize], j: usize) -> bool {
        j > 0 && j < counts.len() && counts[j - 1] > 0 && counts[j] > 0
    }

    /// Maximal runs of consecutive occupied slots, as slot counts.
    fn chains(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        for c in self.counts() {
            if c > 0 {
                cur.push(c);
            } else if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }

    /// The normalizer `n*` (see the module docs).
    pub fn n_star(&self) -> f64 {
        self.chains()
            .iter()
            .map(|counts| {
                (0..counts.len())
                    .map(|m| {
                        counts
                            .iter()
                            .enumerate()
                            .map(|(j, &c)| c * j.abs_diff(m))
                            .sum::<usize>()
                    })
                    .min()
                    .unwrap_or(0)
            })
            .sum::<usize>() as f64
    }
}

/// Values whose order the discriminant should follow: the oracle itself, or
/// in per-class mode the label-signed oracle, so negatives with large oracle
/// values sit lowest.
pub fn ordering_targets(ds: &Dataset, mode: OrderingMode) -> Result<Vec<f64>> {
    let oracle = ds.oracle().ok_or(Error::MissingOracle)?;
    Ok(match mode {
        OrderingMode::Global => oracle,
        OrderingMode::PerClass => oracle.iter().zip(ds.ys()).map(|(o, y)| o * y).collect(),
    })
}

fn dense_rank(values: &[f64]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let ranks = values
        .iter()
        .map(|v| distinct.partition_point(|d| d < v))
        .collect();
    (ranks, distinct.len())
}

pub fn build_index(ds: &Dataset, mode: OrderingMode) -> Result<SlotIndex> {
    let targets = ordering_targets(ds, mode)?;
    match mode {
        OrderingMode::Global => {
            let (indices, n_slots) = dense_rank(&targets);
            Ok(SlotIndex { indices, n_slots })
        }
        OrderingMode::PerClass => {
            let labels = ds.labels();
            let pick = |class: Label| -> Vec<f64> {
                targets
                    .iter()
                    .zip(&labels)
                    .filter(|(_, l)| **l == class)
                    .map(|(t, _)| *t)
                    .collect()
            };
            let (neg_rank, neg_slots) = dense_rank(&pick(Label::Negative));
            let (pos_rank, pos_slots) = dense_rank(&pick(Label::Positive));
            let (mut ni, mut pi) = (neg_rank.into_iter(), pos_rank.into_iter());
            let indices = labels
                .iter()
                .map(|l| match l {
                    Label::Negative => ni.next().unwrap(),
                    Label::Positive => neg_slots + 1 + pi.next().unwrap(),
                })
                .collect();
            Ok(SlotIndex {
                indices,
                n_slots: neg_slots + 1 + pos_slots,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoSvmSolution {
    pub params: GoSvmParams,
    pub model: TrainedModel,
    pub index: SlotIndex,
    /// `n_slots + 1` boundaries; non-variable boundaries are ±∞.
    pub g: Vec<f64>,
    pub rho_b: f64,
    pub rho_o: f64,
    pub xi: Vec<f64>,
    /// Signed slot adjustments.
    pub zeta: Vec<f64>,
    pub n_star: f64,
    pub objective: f64,
    /// Loss balance at `w = 1` on the training set.
    pub achieved_balance: f64,
    /// Discriminant on the training samples.
    pub train_discriminant: Vec<f64>,
}

impl GoSvmSolution {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("solution serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let sol: GoSvmSolution = toml::from_str(s).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |sp| s[..sp.start].lines().count()),
            msg: e.message().to_string(),
        })?;
        sol.model.check()?;
        Ok(sol)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s)
    }
}

pub fn train_gosvm(ds: &Dataset, p: &GoSvmParams) -> Result<GoSvmSolution> {
    train_gosvm_with(ds, p, &InteriorPoint::default())
}

pub fn train_gosvm_with(
    ds: &Dataset,
    p: &GoSvmParams,
    solver: &dyn QpSolver,
) -> Result<GoSvmSolution> {
    p.validate()?;
    let feats = KernelFeatures::from_gram(&gram_self(&p.kernel, ds));
    let support = ds.features().map(<[f64]>::to_vec).collect();
    solve_joint(ds, p, &feats.phi, solver, |w, b| TrainedModel {
        kernel: p.kernel,
        bias: b,
        alphas: (&feats.to_coefficients * w).iter().cloned().collect(),
        support,
    })
}

/// Linear model trained directly on the raw features; the kernelized route
/// with a linear kernel must agree with it.
pub fn train_gosvm_explicit(ds: &Dataset, p: &GoSvmParams) -> Result<GoSvmSolution> {
    if p.kernel != KernelSpec::Linear {
        return Err(Error::InvalidArgument(
            "explicit training needs the linear kernel".into(),
        ));
    }
    p.validate()?;
    let phi = KernelFeatures::explicit(ds).phi;
    solve_joint(ds, p, &phi, &InteriorPoint::default(), |w, b| {
        TrainedModel {
            kernel: KernelSpec::Linear,
            bias: b,
            alphas: vec![1.0],
            support: vec![w.iter().cloned().collect()],
        }
    })
}

/// Variable offsets in the joint QP.
struct Layout {
    r: usize,
    cls: Option<usize>, // b, ρ_b, ξ[n]
    ord: Option<usize>, // ρ_o, ζ⁺[n], ζ⁻[n], g[m]
    boundary_var: Vec<Option<usize>>,
    nv: usize,
}

impl Layout {
    fn new(r: usize, n: usize, with_cls: bool, with_ord: bool, counts: &[usize]) -> Self {
        let mut nv = r;
        let cls = with_cls.then(|| {
            let o = nv;
            nv += 2 + n;
            o
        });
        let mut boundary_var = vec![None; counts.len() + 1];
        let ord = with_ord.then(|| {
            let o = nv;
            nv += 1 + 2 * n;
            for (j, slot) in boundary_var.iter_mut().enumerate() {
                if SlotIndex::is_inner_boundary(counts, j) {
                    *slot = Some(nv);
                    nv += 1;
                }
            }
            o
        });
        Layout {
            r,
            cls,
            ord,
            boundary_var,
            nv,
        }
    }
}

fn solve_joint<F>(
    ds: &Dataset,
    p: &GoSvmParams,
    phi: &DMatrix<f64>,
    solver: &dyn QpSolver,
    to_model: F,
) -> Result<GoSvmSolution>
where
    F: FnOnce(&DVector<f64>, f64) -> TrainedModel,
{
    ds.require_both_classes()?;
    let index = build_index(ds, p.ordering)?;
    let n = ds.len();
    let n_star = index.n_star();
    let counts = index.counts();
    let (with_cls, with_ord) = (p.alpha > 0.0, p.alpha < 1.0);
    if with_ord && n_star == 0.0 {
        return Err(Error::DegenerateData(
            "ordinal term needs two adjacent occupied slots (oracle has a single level per ordering)".into(),
        ));
    }
    let y = ds.ys();
    let lay = Layout::new(phi.ncols(), n, with_cls, with_ord, &counts);
    let r = lay.r;

    let mut q = DMatrix::zeros(lay.nv, lay.nv);
    for k in 0..r {
        q[(k, k)] = 1.0;
    }
    let mut c = DVector::zeros(lay.nv);
    let mut lower = DVector::from_element(lay.nv, f64::NEG_INFINITY);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let push_w = |row: &mut Vec<(usize, f64)>, i: usize, scale: f64| {
        for k in 0..r {
            row.push((k, scale * phi[(i, k)]));
        }
    };

    if let Some(o) = lay.cls {
        c[o + 1] = -p.alpha * p.nu_b;
        lower[o + 1] = 0.0;
        for i in 0..n {
            c[o + 2 + i] = p.alpha / n as f64;
            lower[o + 2 + i] = 0.0;
            // −y_i(Φ_i w + b) + ρ_b − ξ_i ≤ 0
            let mut row = Vec::with_capacity(r + 3);
            push_w(&mut row, i, -y[i]);
            row.extend([(o, -y[i]), (o + 1, 1.0), (o + 2 + i, -1.0)]);
            rows.push(row);
        }
    }
    if let Some(o) = lay.ord {
        let w_o = 1.0 - p.alpha;
        c[o] = -w_o * p.nu_o;
        lower[o] = 0.0;
        for i in 0..2 * n {
            c[o + 1 + i] = w_o / n_star;
            lower[o + 1 + i] = 0.0;
        }
        for i in 0..n {
            let j = index.indices[i];
            let (zp, zm) = (o + 1 + i, o + 1 + n + i);
            if let Some(g_lo) = lay.boundary_var[j] {
                // g_j + ρ_o/2 − Φ_i w − ζ_i ≤ 0
                let mut row = Vec::with_capacity(r + 4);
                push_w(&mut row, i, -1.0);
                row.extend([(g_lo, 1.0), (o, 0.5), (zp, -1.0), (zm, 1.0)]);
                rows.push(row);
            }
            if let Some(g_hi) = lay.boundary_var[j + 1] {
                // Φ_i w + ζ_i − g_{j+1} + ρ_o/2 ≤ 0
                let mut row = Vec::with_capacity(r + 4);
                push_w(&mut row, i, 1.0);
                row.extend([(g_hi, -1.0), (o, 0.5), (zp, 1.0), (zm, -1.0)]);
                rows.push(row);
            }
        }
    }
    let mut a = DMatrix::zeros(rows.len(), lay.nv);
    for (ri, row) in rows.iter().enumerate() {
        for &(k, v) in row {
            a[(ri, k)] += v;
        }
    }
    let m = rows.len();
    let qp = QpProblem::new(q, c)
        .with_ineq(a, DVector::zeros(m))
        .with_bounds(Some(lower), None);
    let sol = solver.solve(&qp)?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::MaxIter => return Err(Error::SolverFailed(QpStatus::MaxIter)),
        status => {
            return Err(Error::InfeasibleParams {
                msg: format!(
                    "nu_b = {}, nu_o = {}, alpha = {} (certificate {:.3e})",
                    p.nu_b,
                    p.nu_o,
                    p.alpha,
                    sol.certificate.unwrap_or(f64::NAN)
                ),
                status: Some(status),
            })
        }
    }

    let w = sol.x.rows(0, r).into_owned();
    let f: Vec<f64> = (phi * &w).iter().cloned().collect();

    let (b, rho_b) = match lay.cls {
        Some(o) => (sol.x[o], sol.x[o + 1].max(0.0)),
        None => (min_hinge_offset(&f, &y), 0.0),
    };
    let (g, rho_o) = match lay.ord {
        Some(o) => {
            let g = (0..=index.n_slots)
                .map(|j| match lay.boundary_var[j] {
                    Some(k) => sol.x[k],
                    None => outer_boundary(&counts, j),
                })
                .collect();
            (g, sol.x[o].max(0.0))
        }
        None => (admissible_boundaries(&f, &index), 0.0),
    };
    let xi: Vec<f64> = (0..n)
        .map(|i| (rho_b - y[i] * (f[i] + b)).max(0.0))
        .collect();
    let zeta: Vec<f64> = (0..n)
        .map(|i| {
            let j = index.indices[i];
            let (lo, hi) = (g[j] + rho_o / 2.0, g[j + 1] - rho_o / 2.0);
            (lo - f[i]).max(0.0) - (f[i] - hi).max(0.0)
        })
        .collect();

    let mut objective = 0.5 * w.norm_squared();
    if with_cls {
        objective += p.alpha * (-p.nu_b * rho_b + xi.iter().sum::<f64>() / n as f64);
    }
    if with_ord {
        objective += (1.0 - p.alpha)
            * (-p.nu_o * rho_o + zeta.iter().map(|z| z.abs()).sum::<f64>() / n_star);
    }
    let train_f: Vec<f64> = f.iter().map(|v| v + b).collect();
    let achieved_balance = loss_balance(&train_f, &ds.labels(), 1.0)?;
    Ok(GoSvmSolution {
        params: *p,
        model: to_model(&w, b),
        index,
        g,
        rho_b,
        rho_o,
        xi,
        zeta,
        n_star,
        objective,
        achieved_balance,
        train_discriminant: train_f,
    })
}

/// Non-variable boundary `j`: −∞ below an occupied slot, +∞ above one.
fn outer_boundary(counts: &[usize], j: usize) -> f64 {
    if j < counts.len() && counts[j] > 0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    }
}

/// Offset minimizing `Σ max(0, −y_i(f_i + b))`; ties go to the smallest |b|.
fn min_hinge_offset(f: &[f64], y: &[f64]) -> f64 {
    let cost = |b: f64| -> f64 {
        f.iter()
            .zip(y)
            .map(|(fi, yi)| (-yi * (fi + b)).max(0.0))
            .sum()
    };
    let mut best: (f64, f64) = (cost(0.0), 0.0);
    for &fi in f {
        let b = -fi;
        let v = cost(b);
        if v < best.0 || (v == best.0 && b.abs() < best.1.abs()) {
            best = (v, b);
        }
    }
    best.1
}

/// Some placement of zero-margin boundaries when the ordinal block carries
/// no weight: midpoints between per-slot medians, made non-decreasing.
fn admissible_boundaries(f: &[f64], index: &SlotIndex) -> Vec<f64> {
    let counts = index.counts();
    let mut per_slot: Vec<Vec<f64>> = vec![Vec::new(); index.n_slots];
    for (i, &j) in index.indices.iter().enumerate() {
        per_slot[j].push(f[i]);
    }
    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let medians: Vec<f64> = per_slot
        .iter_mut()
        .map(|v| if v.is_empty() { f64::NAN } else { median(v) })
        .collect();
    let mut g = vec![0.0; index.n_slots + 1];
    let mut prev = f64::NEG_INFINITY;
    for j in 0..=index.n_slots {
        g[j] = if SlotIndex::is_inner_boundary(&counts, j) {
            let v = (0.5 * (medians[j - 1] + medians[j])).max(prev);
            prev = v;
            v
        } else {
            prev = f64::NEG_INFINITY;
            outer_boundary(&counts, j)
        };
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub error_rate: f64,
    /// Order distance to the test oracle, when the test set has one.
    pub liso: Option<f64>,
    pub balance: f64,
}

pub fn evaluate(sol: &GoSvmSolution, test: &Dataset) -> Result<Evaluation> {
    evaluate_model(&sol.model, sol.params.ordering, test)
}

pub fn evaluate_model(
    model: &TrainedModel,
    ordering: OrderingMode,
    test: &Dataset,
) -> Result<Evaluation> {
    let f = model.decision_values(test)?;
    let labels = test.labels();
    let error_rate = error_rate_of(&f, &labels);
    let liso = if test.has_oracle() {
        let targets = ordering_targets(test, ordering)?;
        Some(empirical_liso(&f, &targets, ordering, Some(&labels))?)
    } else {
        None
    };
    Ok(Evaluation {
        error_rate,
        liso,
        balance: loss_balance(&f, &labels, 1.0)?,
    })
}

pub(crate) fn error_rate_of(f: &[f64], labels: &[Label]) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let wrong = f
        .iter()
        .zip(labels)
        .filter(|(v, l)| crate::ordermetrics::l01(**v, l.as_f64()) == 1)
        .count();
    wrong as f64 / f.len() as f64
}
