//! Dense convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ xᵀQx + cᵀx
//! subject to  A_ineq x ≤ b_ineq
//!             A_eq x  = b_eq
//!             lower ≤ x ≤ upper
//! ```
//!
//! [`InteriorPoint`] is an infeasible-start primal-dual interior-point method
//! with Mehrotra predictor-corrector steps. Inequality rows and finite bounds
//! are stacked into one block `Gx + s = h`, equalities are eliminated through
//! a Schur complement, and the reduced Newton matrix `Q + Gᵀ(Z/S)G` is
//! factored densely with a small static diagonal regularization.
//!
//! When the iteration stalls, diverges past the divergence threshold or runs
//! out of iterations, two auxiliary problems classify the failure: an elastic
//! L1 feasibility problem (a positive optimum certifies primal infeasibility)
//! and a normalized recession-direction LP (a negative optimum certifies that
//! the objective is unbounded below).

use std::io::{BufRead, Write};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    /// Per-variable lower bounds; `-inf` entries are unbounded.
    pub lower: Option<DVector<f64>>,
    /// Per-variable upper bounds; `+inf` entries are unbounded.
    pub upper: Option<DVector<f64>>,
}

impl QpProblem {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Self {
        let n = c.len();
        QpProblem {
            q,
            c,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            lower: None,
            upper: None,
        }
    }

    pub fn with_ineq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_eq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_bounds(mut self, lower: Option<DVector<f64>>, upper: Option<DVector<f64>>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn n_var(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_var();
        let bad = |what: &str| Err(Error::InvalidArgument(format!("QP: {what}")));
        if self.q.nrows() != n || self.q.ncols() != n {
            return bad("Q shape does not match c");
        }
        if self.a_ineq.ncols() != n || self.a_ineq.nrows() != self.b_ineq.len() {
            return bad("inequality block shape");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return bad("equality block shape");
        }
        if self.lower.as_ref().is_some_and(|l| l.len() != n)
            || self.upper.as_ref().is_some_and(|u| u.len() != n)
        {
            return bad("bound length");
        }
        let scale = 1.0 + self.q.amax();
        for i in 0..n {
            for j in 0..i {
                if (self.q[(i, j)] - self.q[(j, i)]).abs() > 1e-12 * scale {
                    return bad("Q is not symmetric");
                }
            }
        }
        let finite = self
            .q
            .iter()
            .chain(self.c.iter())
            .chain(self.a_ineq.iter())
            .chain(self.a_eq.iter())
            .chain(self.b_eq.iter())
            .all(|v| v.is_finite());
        if !finite || self.b_ineq.iter().any(|v| v.is_nan()) {
            return bad("non-finite data");
        }
        Ok(())
    }

    /// Writes the plain-text dump: each block is a `name rows cols` header
    /// followed by `rows` lines of whitespace-separated values (row-major).
    /// Vectors are written as `rows × 1`; absent bounds as `0 × 1`.
    pub fn write_text(&self, mut out: impl Write) -> std::io::Result<()> {
        let n = self.n_var();
        let inf_vec = |v: f64| DVector::from_element(n, v);
        let lower = self
            .lower
            .clone()
            .unwrap_or_else(|| inf_vec(f64::NEG_INFINITY));
        let upper = self.upper.clone().unwrap_or_else(|| inf_vec(f64::INFINITY));
        let blocks: [(&str, DMatrix<f64>); 8] = [
            ("Q", self.q.clone()),
            ("c", DMatrix::from_column_slice(n, 1, self.c.as_slice())),
            ("A_ineq", self.a_ineq.clone()),
            (
                "b_ineq",
                DMatrix::from_column_slice(self.b_ineq.len(), 1, self.b_ineq.as_slice()),
            ),
            ("A_eq", self.a_eq.clone()),
            (
                "b_eq",
                DMatrix::from_column_slice(self.b_eq.len(), 1, self.b_eq.as_slice()),
            ),
            ("lower", DMatrix::from_column_slice(n, 1, lower.as_slice())),
            ("upper", DMatrix::from_column_slice(n, 1, upper.as_slice())),
        ];
        for (name, m) in blocks {
            writeln!(out, "{} {} {}", name, m.nrows(), m.ncols())?;
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_text(input: impl BufRead) -> Result<QpProblem> {
        let mut lines = input.lines().enumerate();
        let mut next_block = |expect: &str| -> Result<DMatrix<f64>> {
            let (ln, header) = lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing block {expect}"),
            })?;
            let header = header.map_err(|e| Error::Parse {
                line: ln + 1,
                msg: e.to_string(),
            })?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != expect {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected `{expect} rows cols`"),
                });
            }
            let parse_dim = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: ln + 1,
                    msg: format!("bad dimension `{s}`"),
                })
            };
            let (r, c) = (parse_dim(parts[1])?, parse_dim(parts[2])?);
            let mut m = DMatrix::zeros(r, c);
            for i in 0..r {
                let (ln, row) = lines.next().ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("block {expect} truncated"),
                })?;
                let row = row.map_err(|e| Error::Parse {
                    line: ln + 1,
                    msg: e.to_string(),
                })?;
                let vals: Vec<f64> = row
                    .split_whitespace()
                    .map(|v| {
                        v.parse::<f64>().map_err(|_| Error::Parse {
                            line: ln + 1,
                            msg: format!("bad number `{v}`"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != c {
                    return Err(Error::Parse {
                        line: ln + 1,
                        msg: format!("expected {c} values"),
                    });
                }
                for (j, v) in vals.into_iter().enumerate() {
                    m[(i, j)] = v;
                }
            }
            Ok(m)
        };
        let col = |m: DMatrix<f64>| DVector::from_column_slice(m.as_slice());
        let q = next_block("Q")?;
        let c = col(next_block("c")?);
        let a_ineq = next_block("A_ineq")?;
        let b_ineq = col(next_block("b_ineq")?);
        let a_eq = next_block("A_eq")?;
        let b_eq = col(next_block("b_eq")?);
        let lower = col(next_block("lower")?);
        let upper = col(next_block("upper")?);
        let lower = lower.iter().any(|v| v.is_finite()).then_some(lower);
        let upper = upper.iter().any(|v| v.is_finite()).then_some(upper);
        let p = QpProblem {
            q,
            c,
            a_ineq,
            b_ineq,
            a_eq,
            b_eq,
            lower,
            upper,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Lagrange multipliers, one block per constraint family. Sign convention:
/// the Lagrangian is
/// `½xᵀQx + cᵀx + ineqᵀ(Ax − b) + eqᵀ(Ex − d) + lowerᵀ(l − x) + upperᵀ(x − u)`,
/// with every inequality multiplier ≥ 0.
/// Bound multipliers are zero for infinite bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct QpDuals {
    pub ineq: DVector<f64>,
    pub eq: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

/// KKT residuals in the infinity norm. All but `gap` are divided by
/// `1 + ‖data‖`, the largest absolute entry of Q, c, the inequality
/// right-hand sides (bounds included) and the equality right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// Largest constraint violation.
    pub primal: f64,
    /// Largest stationarity residual.
    pub dual: f64,
    /// Largest |multiplier × slack| product.
    pub complementarity: f64,
    /// |primal objective − dual objective| / (1 + |primal objective|).
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub primal_objective: f64,
    pub mu: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub duals: QpDuals,
    pub objective: f64,
    pub dual_objective: f64,
    pub status: QpStatus,
    pub iterations: usize,
    pub kkt: KktResiduals,
    /// For Infeasible: minimal total constraint violation. For Unbounded:
    /// objective decrease per unit step along the certified ray (negated).
    pub certificate: Option<f64>,
    pub history: Vec<IterationRecord>,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Anything that can solve a [`QpProblem`].
pub trait QpSolver: Sync {
    fn solve(&self, p: &QpProblem) -> Result<QpSolution>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorPoint {
    pub tol: f64,
    pub max_iter: usize,
    pub regularization: f64,
    pub divergence: f64,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        InteriorPoint {
            tol: 1e-8,
            max_iter: 200,
            regularization: 1e-9,
            divergence: 1e8,
        }
    }
}

impl InteriorPoint {
    pub fn with_tol(tol: f64) -> Self {
        InteriorPoint {
            tol,
            ..Default::default()
        }
    }
}

impl QpSolver for InteriorPoint {
    fn solve(&self, p: &QpProblem) -> Result<QpSolution> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        p.validate()?;
        let sf = StandardForm::new(p);
        let run = self.run(&sf)?;
        if run.converged {
            return Ok(sf.solution(p, run, QpStatus::Optimal, None));
        }
        // Classify the failure. The elastic problem is the expensive one and
        // is pointless once a primal-feasible iterate has been seen.
        if !run.primal_feasible {
            if let Some(violation) = self.infeasibility_certificate(&sf)? {
                return Ok(sf.solution(p, run, QpStatus::Infeasible, Some(violation)));
            }
        }
        if let Some(slope) = self.unboundedness_certificate(&sf)? {
            return Ok(sf.solution(p, run, QpStatus::Unbounded, Some(slope)));
        }
        if let Some(condition) = run.ill_conditioned {
            return Err(Error::IllConditioned { condition });
        }
        Ok(sf.solution(p, run, QpStatus::MaxIter, None))
    }
}

/// Solves with the default interior-point settings overridden by `tol` and `max_iter`.
pub fn solve(p: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    InteriorPoint {
        tol,
        max_iter,
        ..Default::default()
    }
    .solve(p)
}

/// Sparse row storage for the stacked inequality block.
#[derive(Debug, Clone)]
struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
    n: usize,
}

impl SparseRows {
    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows
                .iter()
                .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()),
        )
    }

    fn tr_mul(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (r, &zk) in self.rows.iter().zip(z.iter()) {
            for &(j, v) in r {
                out[j] += v * zk;
            }
        }
        out
    }

    /// h += Σ_k w_k g_k g_kᵀ
    fn add_weighted_gram(&self, w: &DVector<f64>, h: &mut DMatrix<f64>) {
        for (r, &wk) in self.rows.iter().zip(w.iter()) {
            for &(i, vi) in r {
                let a = wk * vi;
                for &(j, vj) in r {
                    h[(i, j)] += a * vj;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Ineq(usize),
    Lower(usize),
    Upper(usize),
}

/// `min ½xᵀQx + cᵀx  s.t.  Gx ≤ h, Ex = d`
#[derive(Debug, Clone)]
struct StandardForm {
    q: DMatrix<f64>,
    c: DVector<f64>,
    g: SparseRows,
    h: DVector<f64>,
    e: DMatrix<f64>,
    d: DVector<f64>,
    kinds: Vec<RowKind>,
}

struct RunResult {
    x: DVector<f64>,
    s: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
    iterations: usize,
    converged: bool,
    /// Some iterate met the primal tolerance, so the feasible set is non-empty.
    primal_feasible: bool,
    ill_conditioned: Option<f64>,
    history: Vec<IterationRecord>,
}

impl StandardForm {
    fn new(p: &QpProblem) -> Self {
        let n = p.n_var();
        let mut rows = Vec::new();
        let mut h = Vec::new();
        let mut kinds = Vec::new();
        for i in 0..p.a_ineq.nrows() {
            if p.b_ineq[i] == f64::INFINITY {
                continue;
            }
            rows.push(
                (0..n)
                    .filter_map(|j| {
                        let v = p.a_ineq[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect(),
            );
            h.push(p.b_ineq[i]);
            kinds.push(RowKind::Ineq(i));
        }
        if let Some(l) = &p.lower {
            for j in 0..n {
                if l[j].is_finite() {
                    rows.push(vec![(j, -1.0)]);
                    h.push(-l[j]);
                    kinds.push(RowKind::Lower(j));
                }
            }
        }
        if let Some(u) = &p.upper {
            for j in 0..n {
                if u[j].is_finite() {
                    rows.push(vec![(j, 1.0)]);
                    h.push(u[j]);
                    kinds.push(RowKind::Upper(j));
                }
            }
        }
        StandardForm {
            q: p.q.clone(),
            c: p.c.clone(),
            g: SparseRows { rows, n },
            h: DVector::from_vec(h),
            e: p.a_eq.clone(),
            d: p.b_eq.clone(),
            kinds,
        }
    }

    fn n(&self) -> usize {
        self.c.len()
    }

    fn m(&self) -> usize {
        self.h.len()
    }

    fn p(&self) -> usize {
        self.d.len()
    }

    fn primal_scale(&self) -> f64 {
        1.0 + self.h.amax().max(self.d.amax())
    }

    fn dual_scale(&self) -> f64 {
        1.0 + self.c.amax()
    }

    /// `1 + ‖data‖`: the largest absolute entry of Q, c, h and d.
    fn data_scale(&self) -> f64 {
        1.0 + self
            .q
            .amax()
            .max(self.c.amax())
            .max(self.h.amax())
            .max(self.d.amax())
    }

    fn solution(
        &self,
        p: &QpProblem,
        run: RunResult,
        status: QpStatus,
        certificate: Option<f64>,
    ) -> QpSolution {
        let n = p.n_var();
        let mut duals = QpDuals {
            ineq: DVector::zeros(p.a_ineq.nrows()),
            eq: run.y.clone(),
            lower: DVector::zeros(n),
            upper: DVector::zeros(n),
        };
        for (k, kind) in self.kinds.iter().enumerate() {
            match *kind {
                RowKind::Ineq(i) => duals.ineq[i] = run.z[k],
                RowKind::Lower(j) => duals.lower[j] = run.z[k],
                RowKind::Upper(j) => duals.upper[j] = run.z[k],
            }
        }
        let objective = p.objective(&run.x);
        let dual_objective = self.dual_objective(&run.x, &run.z, &run.y);
        let kkt = self.residuals(&run.x, &run.s, &run.z, &run.y);
        QpSolution {
            x: run.x,
            duals,
            objective,
            dual_objective,
            status,
            iterations: run.iterations,
            kkt,
            certificate,
            history: run.history,
        }
    }

    fn dual_objective(&self, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> f64 {
        -0.5 * x.dot(&(&self.q * x)) - self.h.dot(z) - self.d.dot(y)
    }

    fn residuals(
        &self,
        x: &DVector<f64>,
        s: &DVector<f64>,
        z: &DVector<f64>,
        y: &DVector<f64>,
    ) -> KktResiduals {
        let rd = &self.q * x + &self.c + self.g.tr_mul(z) + self.e.tr_mul(y);
        let re = &self.e * x - &self.d;
        let slack = &self.h - self.g.mul(x);
        let violation = slack.iter().fold(0.0f64, |acc, &v| acc.max(-v));
        let comp = (0..slack.len())
            .map(|k| (z[k] * slack[k]).abs().max(z[k] * s[k]))
            .fold(0.0f64, f64::max);
        let pobj = 0.5 * x.dot(&(&self.q * x)) + self.c.dot(x);
        let dobj = self.dual_objective(x, z, y);
        let scale = self.data_scale();
        KktResiduals {
            primal: re.amax().max(violation) / scale,
            dual: rd.amax() / scale,
            complementarity: comp / scale,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
        }
    }
}

/// Factored reduced Newton system.
struct Factorization {
    h: Cholesky<f64, Dyn>,
    h_raw: DMatrix<f64>,
    schur: Option<Cholesky<f64, Dyn>>,
    e: DMatrix<f64>,
    h_inv_et: DMatrix<f64>,
}

impl Factorization {
    /// Solves `[H Eᵀ; E 0] [dx; dy] = [rx; ry]` with one refinement pass
    /// against the unregularized matrix.
    fn solve(&self, rx: &DVector<f64>, ry: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut dx, mut dy) = self.solve_once(rx, ry);
        for _ in 0..2 {
            let res_x = rx - (&self.h_raw * &dx + self.e.tr_mul(&dy));
            let res_y = ry - &self.e * &dx;
            let (cx, cy) = self.solve_once(&res_x, &res_y);
            dx += cx;
            dy += cy;
        }
        (dx, dy)
    }

    fn solve_once(&self, rx: &DVector<f64>, ry: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let hx = self.h.solve(rx);
        match &self.schur {
            None => (hx, DVector::zeros(0)),
            Some(s) => {
                // E H⁻¹ (rx − Eᵀdy) = ry
                let rhs = &self.e * &hx - ry;
                let dy = s.solve(&rhs);
                let dx = hx - &self.h_inv_et * &dy;
                (dx, dy)
            }
        }
    }
}

impl InteriorPoint {
    fn factor(
        &self,
        sf: &StandardForm,
        w: &DVector<f64>,
    ) -> std::result::Result<Factorization, f64> {
        let n = sf.n();
        let mut h_raw = sf.q.clone();
        sf.g.add_weighted_gram(w, &mut h_raw);
        let diag_scale = 1.0 + (0..n).map(|i| h_raw[(i, i)].abs()).fold(0.0, f64::max);
        let mut reg = self.regularization;
        loop {
            let mut h = h_raw.clone();
            for i in 0..n {
                h[(i, i)] += reg * diag_scale.clamp(1.0, 1e6);
            }
            if let Some(chol) = Cholesky::new(h) {
                let (schur, h_inv_et) = if sf.p() > 0 {
                    let h_inv_et = chol.solve(&sf.e.transpose());
                    let mut s = &sf.e * &h_inv_et;
                    for i in 0..sf.p() {
                        s[(i, i)] += self.regularization;
                    }
                    match Cholesky::new(s) {
                        Some(sc) => (Some(sc), h_inv_et),
                        None => {
                            reg *= 100.0;
                            if reg > 1e-3 {
                                return Err(condition_estimate(&h_raw));
                            }
                            continue;
                        }
                    }
                } else {
                    (None, DMatrix::zeros(n, 0))
                };
                return Ok(Factorization {
                    h: chol,
                    h_raw,
                    schur,
                    e: sf.e.clone(),
                    h_inv_et,
                });
            }
            reg *= 100.0;
            if reg > 1e-3 {
                return Err(condition_estimate(&h_raw));
            }
        }
    }

    fn run(&self, sf: &StandardForm) -> Result<RunResult> {
        let n = sf.n();
        let m = sf.m();
        let p = sf.p();

        // Initial point: least-squares fit of Gx ≈ h under the equalities,
        // then shift slacks and multipliers into the positive orthant.
        let ones = DVector::from_element(m, 1.0);
        let (mut x, mut y, mut s, mut z) = match self.factor(sf, &ones) {
            Ok(f) => {
                let rx = -&sf.c + sf.g.tr_mul(&sf.h);
                let (x0, y0) = f.solve(&rx, &sf.d);
                let s0 = &sf.h - sf.g.mul(&x0);
                let z0 = -s0.clone();
                (x0, y0, shift_positive(s0), shift_positive(z0))
            }
            Err(_) => (
                DVector::zeros(n),
                DVector::zeros(p),
                ones.clone(),
                ones.clone(),
            ),
        };

        let mut history = Vec::new();
        let mut stalled = 0usize;
        let mut ill_conditioned = None;
        let mut acceptable = None;
        let mut primal_feasible = false;
        let data_scale = sf.data_scale();

        for iter in 0..=self.max_iter {
            let rd = &sf.q * &x + &sf.c + sf.g.tr_mul(&z) + sf.e.tr_mul(&y);
            let re = &sf.e * &x - &sf.d;
            let ri = sf.g.mul(&x) + &s - &sf.h;
            let mu = if m > 0 { s.dot(&z) / m as f64 } else { 0.0 };
            let kkt = sf.residuals(&x, &s, &z, &y);
            let pobj = 0.5 * x.dot(&(&sf.q * &x)) + sf.c.dot(&x);

            let meets = |t: f64| {
                kkt.primal <= t && kkt.dual <= t && kkt.complementarity <= t && kkt.gap <= t
            };
            if meets(0.1 * self.tol) || (meets(self.tol) && iter == self.max_iter) {
                return Ok(RunResult {
                    x,
                    s,
                    z,
                    y,
                    iterations: iter,
                    converged: true,
                    primal_feasible: true,
                    ill_conditioned: None,
                    history,
                });
            }
            primal_feasible |= kkt.primal <= self.tol;
            if meets(self.tol) {
                acceptable = Some((x.clone(), s.clone(), z.clone(), y.clone(), iter));
            }
            if iter == self.max_iter || stalled >= 5 {
                break;
            }
            let size = x.amax().max(z.amax()).max(y.amax());
            if !size.is_finite() || size > self.divergence * data_scale {
                break;
            }

            let w = z.component_div(&s);
            let fact = match self.factor(sf, &w) {
                Ok(f) => f,
                Err(cond) => {
                    ill_conditioned = Some(cond);
                    break;
                }
            };

            // Returns (dx, dy, ds, dz) for complementarity target rc.
            let direction = |rc: &DVector<f64>| {
                let t = (rc + z.component_mul(&ri)).component_div(&s);
                let rx = -&rd - sf.g.tr_mul(&t);
                let (dx, dy) = fact.solve(&rx, &(-&re));
                let gdx = sf.g.mul(&dx);
                let ds = -&ri - &gdx;
                let dz = t + w.component_mul(&gdx);
                (dx, dy, ds, dz)
            };

            // Predictor.
            let rc_aff = -s.component_mul(&z);
            let (_, _, ds_a, dz_a) = direction(&rc_aff);
            let a_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a)).min(1.0);
            let sigma = if m > 0 {
                let mu_aff = (&s + a_aff * &ds_a).dot(&(&z + a_aff * &dz_a)) / m as f64;
                (mu_aff / mu).clamp(0.0, 1.0).powi(3)
            } else {
                0.0
            };

            // Corrector.
            let rc = &rc_aff - ds_a.component_mul(&dz_a) + DVector::from_element(m, sigma * mu);
            let (dx, dy, ds, dz) = direction(&rc);
            let a_max = max_step(&s, &ds).min(max_step(&z, &dz));
            let step = (0.99 * a_max).min(1.0);

            x += step * &dx;
            y += step * &dy;
            s += step * &ds;
            z += step * &dz;
            // Keep strictly interior.
            s.apply(|v| *v = v.max(1e-300));
            z.apply(|v| *v = v.max(1e-300));

            stalled = if step < 1e-10 { stalled + 1 } else { 0 };
            history.push(IterationRecord {
                primal_objective: pobj,
                mu,
                primal_residual: kkt.primal,
                dual_residual: kkt.dual,
                step,
            });
        }
        if let Some((x, s, z, y, iterations)) = acceptable {
            return Ok(RunResult {
                x,
                s,
                z,
                y,
                iterations,
                converged: true,
                primal_feasible: true,
                ill_conditioned: None,
                history,
            });
        }
        Ok(RunResult {
            x,
            s,
            z,
            y,
            iterations: history.len(),
            converged: false,
            primal_feasible,
            ill_conditioned,
            history,
        })
    }

    fn auxiliary(&self) -> InteriorPoint {
        InteriorPoint {
            tol: self.tol.max(1e-9),
            max_iter: self.max_iter.max(100),
            ..*self
        }
    }

    /// Elastic problem `min Σt + Σ(u⁺+u⁻) + ½ε‖x‖²` with
    /// `Gx − t ≤ h`, `Ex + u⁺ − u⁻ = d`, `t, u± ≥ 0`. Returns the minimal
    /// violation when it is clearly positive.
    fn infeasibility_certificate(&self, sf: &StandardForm) -> Result<Option<f64>> {
        let (n, m, p) = (sf.n(), sf.m(), sf.p());
        if m == 0 && p == 0 {
            return Ok(None);
        }
        let nv = n + m + 2 * p;
        let mut q = DMatrix::zeros(nv, nv);
        for i in 0..n {
            q[(i, i)] = 1e-8;
        }
        let mut c = DVector::zeros(nv);
        for j in n..nv {
            c[j] = 1.0;
        }
        let mut a = DMatrix::zeros(m, nv);
        for (k, row) in sf.g.rows.iter().enumerate() {
            for &(j, v) in row {
                a[(k, j)] = v;
            }
            a[(k, n + k)] = -1.0;
        }
        let mut e = DMatrix::zeros(p, nv);
        for i in 0..p {
            for j in 0..n {
                e[(i, j)] = sf.e[(i, j)];
            }
            e[(i, n + m + i)] = 1.0;
            e[(i, n + m + p + i)] = -1.0;
        }
        let mut lower = DVector::from_element(nv, f64::NEG_INFINITY);
        for j in n..nv {
            lower[j] = 0.0;
        }
        let aux = QpProblem::new(q, c)
            .with_ineq(a, sf.h.clone())
            .with_eq(e, sf.d.clone())
            .with_bounds(Some(lower), None);
        let aux_sf = StandardForm::new(&aux);
        let run = self.auxiliary().run(&aux_sf)?;
        if !run.converged {
            return Ok(None);
        }
        let violation: f64 = run.x.iter().skip(n).sum();
        Ok((violation > 1e-6 * sf.primal_scale()).then_some(violation))
    }

    /// `min cᵀd` over recession directions of the feasible set that lie in
    /// the null space of Q, normalized by `‖d‖∞ ≤ 1`. Returns the slope when
    /// it is clearly negative.
    fn unboundedness_certificate(&self, sf: &StandardForm) -> Result<Option<f64>> {
        let n = sf.n();
        let eig = SymmetricEigen::new(sf.q.clone());
        let lam_max = eig.eigenvalues.amax();
        let range: Vec<usize> = (0..n)
            .filter(|&i| eig.eigenvalues[i] > 1e-10 * lam_max.max(1e-300))
            .collect();
        let p = sf.p();
        let mut e = DMatrix::zeros(p + range.len(), n);
        for i in 0..p {
            for j in 0..n {
                e[(i, j)] = sf.e[(i, j)];
            }
        }
        for (r, &k) in range.iter().enumerate() {
            for j in 0..n {
                e[(p + r, j)] = eig.eigenvectors[(j, k)];
            }
        }
        let mut a = DMatrix::zeros(sf.m(), n);
        for (k, row) in sf.g.rows.iter().enumerate() {
            for &(j, v) in row {
                a[(k, j)] = v;
            }
        }
        let ne = e.nrows();
        let aux = QpProblem::new(DMatrix::zeros(n, n), sf.c.clone())
            .with_ineq(a, DVector::zeros(sf.m()))
            .with_eq(e, DVector::zeros(ne))
            .with_bounds(
                Some(DVector::from_element(n, -1.0)),
                Some(DVector::from_element(n, 1.0)),
            );
        let aux_sf = StandardForm::new(&aux);
        let run = self.auxiliary().run(&aux_sf)?;
        if !run.converged {
            return Ok(None);
        }
        let slope = sf.c.dot(&run.x);
        Ok((slope < -1e-6 * sf.dual_scale()).then_some(-slope))
    }
}

fn condition_estimate(h: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(h.clone());
    let max = eig.eigenvalues.amax();
    let min = eig
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn shift_positive(mut v: DVector<f64>) -> DVector<f64> {
    if v.is_empty() {
        return v;
    }
    let lo = v.min();
    let shift = if lo <= 0.0 { 1.0 - lo } else { 0.0 };
    v.apply(|e| *e = (*e + shift).max(1.0));
    v
}

/// Largest a ≥ 0 with v + a·dv ≥ 0 (infinite if dv ≥ 0).
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&a, &d)| -a / d)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(q: f64, c: f64) -> QpProblem {
        QpProblem::new(DMatrix::from_element(1, 1, q), DVector::from_element(1, c))
    }

    #[test]
    fn unconstrained_stationary_point() {
        let sol = InteriorPoint::default().solve(&scalar(1.0, -1.0)).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.objective, -0.5, epsilon = 1e-8);
    }

    #[test]
    fn active_upper_constraint() {
        let p = scalar(1.0, -1.0).with_ineq(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 0.5),
        );
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.duals.ineq[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_equality() {
        let p = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(2)).with_eq(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 1.0),
        );
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.x[1], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn bounds_are_respected() {
        let p = scalar(1.0, -1.0).with_bounds(
            Some(DVector::from_element(1, 2.0)),
            Some(DVector::from_element(1, 3.0)),
        );
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-7);
        assert!(sol.duals.lower[0] > 0.9);
    }

    #[test]
    fn detects_infeasibility() {
        // x ≤ 0 and x ≥ 1
        let p = scalar(1.0, 0.0).with_ineq(
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::from_column_slice(&[0.0, -1.0]),
        );
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert_abs_diff_eq!(sol.certificate.unwrap(), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn detects_unboundedness() {
        // min -x  s.t. x ≥ 0, with y coupled quadratically.
        let mut q = DMatrix::zeros(2, 2);
        q[(1, 1)] = 1.0;
        let p = QpProblem::new(q, DVector::from_column_slice(&[-1.0, 0.0])).with_bounds(
            Some(DVector::from_column_slice(&[0.0, f64::NEG_INFINITY])),
            None,
        );
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Unbounded);
        assert!(sol.certificate.unwrap() > 0.5);
    }

    #[test]
    fn lp_with_degenerate_face() {
        // min x + y  s.t. x + y ≥ 1, x, y ≥ 0
        let p = QpProblem::new(
            DMatrix::zeros(2, 2),
            DVector::from_column_slice(&[1.0, 1.0]),
        )
        .with_ineq(
            DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]),
            DVector::from_element(1, -1.0),
        )
        .with_bounds(Some(DVector::zeros(2)), None);
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn text_dump_round_trips() {
        let p = QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_column_slice(&[-1.0, 0.25]),
        )
        .with_ineq(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 3.0),
        )
        .with_bounds(
            Some(DVector::from_column_slice(&[0.0, f64::NEG_INFINITY])),
            None,
        );
        let mut buf = Vec::new();
        p.write_text(&mut buf).unwrap();
        let back = QpProblem::read_text(buf.as_slice()).unwrap();
        assert_eq!(back.q, p.q);
        assert_eq!(back.c, p.c);
        assert_eq!(back.a_ineq, p.a_ineq);
        assert_eq!(back.lower, p.lower);
        assert_eq!(back.upper, None);
    }

    #[test]
    fn rejects_asymmetric_q() {
        let p = QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]),
            DVector::zeros(2),
        );
        assert!(InteriorPoint::default().solve(&p).is_err());
    }
}
