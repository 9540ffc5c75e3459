//! Kernel functions, Gram matrices and distance-quantile RBF widths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `exp(−‖x − y‖² / (2·width²))`
    Rbf {
        width: f64,
    },
}

impl KernelSpec {
    pub fn rbf(width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "RBF width must be finite and positive, got {width}"
            )));
        }
        Ok(KernelSpec::Rbf { width })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { width } => KernelSpec::rbf(width).map(|_| ()),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Rbf { width } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * width * width)).exp()
            }
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Rbf { width } => write!(f, "rbf(width={width})"),
        }
    }
}

/// `G[i][j] = k(a_i, b_j)`, computed row-parallel.
pub fn gram(ks: &KernelSpec, a: &Dataset, b: &Dataset) -> Result<DMatrix<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let bs: Vec<&[f64]> = b.features().collect();
    let rows: Vec<Vec<f64>> = a
        .samples()
        .par_iter()
        .map(|s| bs.iter().map(|x| ks.eval(&s.features, x)).collect())
        .collect();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

/// Symmetric Gram matrix of one dataset with itself.
pub fn gram_self(ks: &KernelSpec, a: &Dataset) -> DMatrix<f64> {
    let xs: Vec<&[f64]> = a.features().collect();
    let n = xs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| if j < i { 0.0 } else { ks.eval(xs[i], xs[j]) })
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| if j >= i { rows[i][j] } else { rows[j][i] })
}

/// Kernel values between every training sample and one query point.
pub fn kernel_column(ks: &KernelSpec, support: &[Vec<f64>], x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(support.len(), support.iter().map(|s| ks.eval(s, x)))
}

/// Nearest-rank quantiles of the pairwise Euclidean distances over distinct
/// index pairs `i < j`. The q-quantile is the `⌈q·m⌉`-th smallest of the
/// `m` distances.
pub fn width_quantiles(ds: &Dataset, qs: &[f64]) -> Result<Vec<f64>> {
    if ds.len() < 2 {
        return Err(Error::InsufficientData {
            requested: 2,
            available: ds.len(),
        });
    }
    if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "quantile {q} outside (0, 1]"
        )));
    }
    let xs: Vec<&[f64]> = ds.features().collect();
    let mut dists = Vec::with_capacity(xs.len() * (xs.len() - 1) / 2);
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let d2: f64 = xs[i]
                .iter()
                .zip(xs[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.iter().all(|&d| d == 0.0) {
        return Err(Error::DegenerateData(
            "all pairwise distances are zero".into(),
        ));
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    Ok(qs
        .iter()
        .map(|&q| {
            let rank = ((q * m as f64).ceil() as usize).clamp(1, m);
            dists[rank - 1]
        })
        .collect())
}

/// Explicit finite-dimensional features for a PSD Gram matrix.
///
/// `K = U Λ Uᵀ`; keeping eigenpairs above a relative cutoff gives
/// `Φ = U Λ^{1/2}` with `ΦΦᵀ ≈ K`. A weight vector `w` in feature space
/// corresponds to kernel expansion coefficients `β = U Λ^{-1/2} w`, so that
/// `Kβ = Φw` and `βᵀKβ = ‖w‖²`.
#[derive(Debug, Clone)]
pub struct KernelFeatures {
    pub phi: DMatrix<f64>,
    /// Maps feature-space weights to expansion coefficients.
    pub to_coefficients: DMatrix<f64>,
}

impl KernelFeatures {
    pub fn from_gram(k: &DMatrix<f64>) -> Self {
        let n = k.nrows();
        let eig = SymmetricEigen::new(k.clone());
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let cutoff = 1e-11 * top.max(f64::MIN_POSITIVE);
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
        let r = keep.len();
        let mut phi = DMatrix::zeros(n, r);
        let mut to_coefficients = DMatrix::zeros(n, r);
        for (c, &k_idx) in keep.iter().enumerate() {
            let lam = eig.eigenvalues[k_idx];
            let (sq, inv_sq) = (lam.sqrt(), 1.0 / lam.sqrt());
            for i in 0..n {
                let u = eig.eigenvectors[(i, k_idx)];
                phi[(i, c)] = u * sq;
                to_coefficients[(i, c)] = u * inv_sq;
            }
        }
        KernelFeatures {
            phi,
            to_coefficients,
        }
    }

    /// Raw features used as-is (linear model with explicit weights).
    pub fn explicit(ds: &Dataset) -> Self {
        let phi = DMatrix::from_fn(ds.len(), ds.dim(), |i, j| ds.samples()[i].features[j]);
        KernelFeatures {
            to_coefficients: DMatrix::zeros(ds.len(), ds.dim()),
            phi,
        }
    }

    pub fn rank(&self) -> usize {
        self.phi.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, LabeledSample};
    use approx::assert_abs_diff_eq;

    fn points(xs: &[&[f64]]) -> Dataset {
        let samples = xs
            .iter()
            .map(|x| LabeledSample::new(x.to_vec(), Label::Positive, None))
            .collect();
        Dataset::new(samples, xs[0].len()).unwrap()
    }

    #[test]
    fn linear_orthogonal_is_zero() {
        assert_eq!(KernelSpec::Linear.eval(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn rbf_values() {
        let k = KernelSpec::rbf(0.7).unwrap();
        assert_eq!(k.eval(&[0.3, -2.0], &[0.3, -2.0]), 1.0);
        let k1 = KernelSpec::rbf(1.0).unwrap();
        assert_abs_diff_eq!(k1.eval(&[0.0], &[2.0]), (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k1.eval(&[0.0], &[2.0]), 0.13534, epsilon = 1e-5);
    }

    #[test]
    fn rbf_rejects_bad_width() {
        assert!(KernelSpec::rbf(0.0).is_err());
        assert!(KernelSpec::rbf(f64::NAN).is_err());
    }

    #[test]
    fn gram_dimension_mismatch() {
        let a = points(&[&[1.0, 2.0]]);
        let b = points(&[&[1.0]]);
        assert!(matches!(
            gram(&KernelSpec::Linear, &a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gram_self_matches_gram() {
        let a = points(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0]]);
        let k = KernelSpec::rbf(1.3).unwrap();
        assert_eq!(gram_self(&k, &a), gram(&k, &a, &a).unwrap());
    }

    #[test]
    fn quantiles_nearest_rank() {
        assert_eq!(
            width_quantiles(&points(&[&[0.0], &[1.0]]), &[0.5]).unwrap(),
            vec![1.0]
        );
        // distances {1, 1, 2}: ⌈0.5·3⌉ = 2nd smallest
        let three = points(&[&[0.0], &[1.0], &[2.0]]);
        assert_eq!(width_quantiles(&three, &[0.5]).unwrap(), vec![1.0]);
        assert_eq!(width_quantiles(&three, &[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn quantiles_degenerate() {
        let same = points(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            width_quantiles(&same, &[0.5]),
            Err(Error::DegenerateData(_))
        ));
        assert!(width_quantiles(&points(&[&[0.0], &[1.0]]), &[1.5]).is_err());
    }

    #[test]
    fn kernel_features_reproduce_gram() {
        let a = points(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0], &[0.0, 0.1]]);
        let k = gram_self(&KernelSpec::rbf(1.0).unwrap(), &a);
        let f = KernelFeatures::from_gram(&k);
        assert!((&f.phi * f.phi.transpose() - &k).amax() < 1e-10);
        let w = DVector::from_fn(f.rank(), |i, _| i as f64 - 1.0);
        let beta = &f.to_coefficients * &w;
        assert!((&k * &beta - &f.phi * &w).amax() < 1e-8);
        assert_abs_diff_eq!(beta.dot(&(&k * &beta)), w.norm_squared(), epsilon = 1e-8);
    }
}
