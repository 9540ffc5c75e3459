//! ν-SVM baseline classifier, trained in the dual.
//!
//! ```text
//! min ½ αᵀ(YKY)α   s.t.  yᵀα = 0,  Σα ≥ ν,  0 ≤ α ≤ 1/n
//! ```
//!
//! The dual is infeasible exactly when `ν > 2·min(n₊, n₋)/n` (each class can
//! carry at most `min(n₊, n₋)/n` of the mass), which the solver reports as a
//! certified infeasibility.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::kernels::{gram_self, KernelSpec};
use crate::qp::{InteriorPoint, QpProblem, QpSolution, QpSolver, QpStatus};

/// Kernel expansion `f(x) = Σ_i alphas_i·k(support_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kernel: KernelSpec,
    pub bias: f64,
    pub alphas: Vec<f64>,
    pub support: Vec<Vec<f64>>,
}

impl TrainedModel {
    pub fn constant(kernel: KernelSpec, dim: usize, bias: f64) -> Self {
        TrainedModel {
            kernel,
            bias,
            alphas: vec![0.0],
            support: vec![vec![0.0; dim]],
        }
    }

    pub fn dim(&self) -> usize {
        self.support.first().map_or(0, Vec::len)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.alphas
            .iter()
            .zip(&self.support)
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, s)| a * self.kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }

    /// `sign(f(x))` with 0 mapped to the negative class.
    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(if self.predict(x)? > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        })
    }

    pub fn decision_values(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: ds.dim(),
            });
        }
        Ok(ds
            .samples()
            .par_iter()
            .map(|s| self.eval_unchecked(&s.features))
            .collect())
    }

    /// Explicit weight vector `Σ alphas_i·support_i` of a linear-kernel model.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != KernelSpec::Linear {
            return None;
        }
        let mut w = vec![0.0; self.dim()];
        for (a, s) in self.alphas.iter().zip(&self.support) {
            w.iter_mut().zip(s).for_each(|(wi, si)| *wi += a * si);
        }
        Some(w)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let m: TrainedModel = toml::from_str(s).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |sp| s[..sp.start].lines().count()),
            msg: e.message().to_string(),
        })?;
        m.check()?;
        Ok(m)
    }

    pub(crate) fn check(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.alphas.len() != self.support.len() {
            return Err(Error::DimensionMismatch {
                expected: self.support.len(),
                found: self.alphas.len(),
            });
        }
        let d = self.dim();
        if let Some(bad) = self.support.iter().find(|s| s.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Ok(())
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

#[derive(Debug, Clone)]
pub struct NuSvmFit {
    pub model: TrainedModel,
    /// Achieved margin ρ_b.
    pub rho: f64,
    /// Mean hinge loss `(1/n)Σ max(0, ρ − y_i f(x_i))` on the training set.
    pub hinge_loss: f64,
    /// Primal objective `½‖w‖² − νρ + hinge_loss`.
    pub objective: f64,
}

/// Upper end of the feasible ν range, `2·min(n₊, n₋)/n`.
pub fn max_feasible_nu(ds: &Dataset) -> f64 {
    let (neg, pos) = ds.class_counts();
    2.0 * neg.min(pos) as f64 / ds.len().max(1) as f64
}

pub fn train_nusvm(ds: &Dataset, nu: f64, ks: &KernelSpec) -> Result<TrainedModel> {
    Ok(fit_nusvm(ds, nu, ks)?.model)
}

pub fn fit_nusvm(ds: &Dataset, nu: f64, ks: &KernelSpec) -> Result<NuSvmFit> {
    fit_nusvm_with(ds, nu, ks, &InteriorPoint::default())
}

pub fn fit_nusvm_with(
    ds: &Dataset,
    nu: f64,
    ks: &KernelSpec,
    solver: &dyn QpSolver,
) -> Result<NuSvmFit> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nu must be positive, got {nu}"
        )));
    }
    ks.validate()?;
    ds.require_both_classes()?;
    let n = ds.len();
    let y = DVector::from_vec(ds.ys());
    let k = gram_self(ks, ds);
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let p = QpProblem::new(q, DVector::zeros(n))
        .with_ineq(
            DMatrix::from_element(1, n, -1.0),
            DVector::from_element(1, -nu),
        )
        .with_eq(DMatrix::from_fn(1, n, |_, j| y[j]), DVector::zeros(1))
        .with_bounds(
            Some(DVector::zeros(n)),
            Some(DVector::from_element(n, 1.0 / n as f64)),
        );
    let sol = solver.solve(&p)?;
    if !sol.is_optimal() {
        return Err(infeasible_nu(nu, &sol));
    }
    let coef = sol.x.component_mul(&y);
    let g = &k * &coef;
    let (bias, rho) = optimal_offsets(&g, &y, nu);
    let hinge_loss = (0..n)
        .map(|i| (rho - y[i] * (g[i] + bias)).max(0.0))
        .sum::<f64>()
        / n as f64;
    let objective = 0.5 * coef.dot(&g) - nu * rho + hinge_loss;
    let model = TrainedModel {
        kernel: *ks,
        bias,
        alphas: coef.iter().cloned().collect(),
        support: ds.features().map(<[f64]>::to_vec).collect(),
    };
    Ok(NuSvmFit {
        model,
        rho,
        hinge_loss,
        objective,
    })
}

fn infeasible_nu(nu: f64, sol: &QpSolution) -> Error {
    Error::InfeasibleNu {
        nu,
        status: sol.status,
        certificate: sol.certificate.unwrap_or(f64::NAN),
    }
}

/// Optimal bias and margin for a fixed kernel part `g`.
///
/// With `s = ρ − b` and `t = ρ + b` the primal splits into
/// `−(ν/2)s + (1/n)Σ₊ max(0, s − g_i)` and the mirror image for the
/// negatives, each minimized at a quantile of its class. When `νn/2` is an
/// integer the minimizer is an interval and its midpoint is taken.
fn optimal_offsets(g: &DVector<f64>, y: &DVector<f64>, nu: f64) -> (f64, f64) {
    let n = g.len() as f64;
    let quantile = |mut v: Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        let k = nu * n / 2.0;
        let lo = k.floor() as usize;
        if (k - k.round()).abs() < 1e-9 && k.round() >= 1.0 {
            let k = k.round() as usize;
            let hi = v[k.min(v.len() - 1)];
            0.5 * (v[k - 1] + hi)
        } else {
            v[lo.min(v.len() - 1)]
        }
    };
    let s = quantile((0..g.len()).filter(|&i| y[i] > 0.0).map(|i| g[i]).collect());
    let t = quantile(
        (0..g.len())
            .filter(|&i| y[i] < 0.0)
            .map(|i| -g[i])
            .collect(),
    );
    ((t - s) / 2.0, ((s + t) / 2.0).max(0.0))
}

/// Linear ν-SVM solved in the primal over `(w, b, ρ, ξ)`. Used to cross-check
/// the dual route.
#[derive(Debug, Clone)]
pub struct LinearNuSvm {
    pub w: Vec<f64>,
    pub bias: f64,
    pub rho: f64,
    pub objective: f64,
}

pub fn train_nusvm_linear_primal(ds: &Dataset, nu: f64) -> Result<LinearNuSvm> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nu must be positive, got {nu}"
        )));
    }
    ds.require_both_classes()?;
    let (n, d) = (ds.len(), ds.dim());
    // Layout: w (d) | b | ρ | ξ (n)
    let nv = d + 2 + n;
    let mut q = DMatrix::zeros(nv, nv);
    for i in 0..d {
        q[(i, i)] = 1.0;
    }
    let mut c = DVector::zeros(nv);
    c[d + 1] = -nu;
    for i in 0..n {
        c[d + 2 + i] = 1.0 / n as f64;
    }
    // −y_i(w·x_i + b) + ρ − ξ_i ≤ 0
    let mut a = DMatrix::zeros(n, nv);
    for (i, s) in ds.samples().iter().enumerate() {
        let y = s.y();
        for j in 0..d {
            a[(i, j)] = -y * s.features[j];
        }
        a[(i, d)] = -y;
        a[(i, d + 1)] = 1.0;
        a[(i, d + 2 + i)] = -1.0;
    }
    let mut lower = DVector::from_element(nv, f64::NEG_INFINITY);
    for i in d + 1..nv {
        lower[i] = 0.0;
    }
    let p = QpProblem::new(q, c)
        .with_ineq(a, DVector::zeros(n))
        .with_bounds(Some(lower), None);
    let sol = InteriorPoint::default().solve(&p)?;
    match sol.status {
        QpStatus::Optimal => Ok(LinearNuSvm {
            w: sol.x.rows(0, d).iter().cloned().collect(),
            bias: sol.x[d],
            rho: sol.x[d + 1],
            objective: sol.objective,
        }),
        _ => Err(infeasible_nu(nu, &sol)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledSample;
    use approx::assert_abs_diff_eq;

    fn ds(points: &[(f64, i64)]) -> Dataset {
        let samples = points
            .iter()
            .map(|&(x, y)| LabeledSample::new(vec![x], Label::try_from(y).unwrap(), None))
            .collect();
        Dataset::new(samples, 1).unwrap()
    }

    #[test]
    fn symmetric_pair() {
        let d = ds(&[(-1.0, -1), (1.0, 1)]);
        let m = train_nusvm(&d, 0.5, &KernelSpec::Linear).unwrap();
        assert_abs_diff_eq!(m.bias, 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(m.predict(&[0.0]).unwrap(), 0.0, epsilon = 1e-7);
        assert!(m.predict(&[0.5]).unwrap() > 0.0);
        assert_eq!(m.classify(&[-0.5]).unwrap(), Label::Negative);
    }

    #[test]
    fn nu_above_range_is_infeasible() {
        let d = ds(&[(-1.0, -1), (0.0, 1), (1.0, 1), (2.0, 1)]);
        assert_eq!(max_feasible_nu(&d), 0.5);
        assert!(train_nusvm(&d, 0.45, &KernelSpec::Linear).is_ok());
        assert!(matches!(
            train_nusvm(&d, 0.6, &KernelSpec::Linear),
            Err(Error::InfeasibleNu {
                status: QpStatus::Infeasible,
                ..
            })
        ));
    }

    #[test]
    fn constant_model_and_dimension_check() {
        let m = TrainedModel::constant(KernelSpec::Linear, 2, 0.3);
        assert_eq!(m.predict(&[5.0, -1.0]).unwrap(), 0.3);
        assert!(matches!(
            m.predict(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn toml_round_trip() {
        let d = ds(&[(-1.0, -1), (-0.2, -1), (0.4, 1), (1.0, 1)]);
        let m = train_nusvm(&d, 0.5, &KernelSpec::rbf(0.8).unwrap()).unwrap();
        let back = TrainedModel::from_toml(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }
}
