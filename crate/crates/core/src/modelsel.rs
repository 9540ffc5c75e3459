//! Holdout grid search over `(ν_b, ν_o, α)`, Gaussian smoothing of the
//! validation tensor and the three selection strategies.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gosvm::{error_rate_of, train_gosvm, GoSvmParams};
use crate::kernels::KernelSpec;
use crate::nusvm::TrainedModel;
use crate::ordermetrics::OrderingMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub nu_b: Vec<f64>,
    pub nu_o: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for GridAxes {
    /// ν ∈ {.1, .2, …, .9, .95}, α ∈ {.1, .25, .5}.
    fn default() -> Self {
        let nu: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).chain([0.95]).collect();
        GridAxes {
            nu_b: nu.clone(),
            nu_o: nu,
            alpha: vec![0.1, 0.25, 0.5],
        }
    }
}

impl GridAxes {
    pub fn shape(&self) -> [usize; 3] {
        [self.nu_b.len(), self.nu_o.len(), self.alpha.len()]
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn flat(&self, node: GridNode) -> usize {
        let [_, b, c] = self.shape();
        (node.i_nub * b + node.i_nuo) * c + node.i_alpha
    }

    fn node(&self, flat: usize) -> GridNode {
        let [_, b, c] = self.shape();
        GridNode {
            i_nub: flat / (b * c),
            i_nuo: flat / c % b,
            i_alpha: flat % c,
        }
    }

    pub fn params(
        &self,
        node: GridNode,
        kernel: KernelSpec,
        ordering: OrderingMode,
    ) -> GoSvmParams {
        GoSvmParams::new(
            self.nu_b[node.i_nub],
            self.nu_o[node.i_nuo],
            self.alpha[node.i_alpha],
            kernel,
        )
        .with_ordering(ordering)
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidConfig(
                "every grid axis needs at least one value".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridNode {
    pub i_nub: usize,
    pub i_nuo: usize,
    pub i_alpha: usize,
}

/// Validation error per grid node. Failed nodes hold 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationTensor {
    pub axes: GridAxes,
    errors: Vec<f64>,
    failed: Vec<bool>,
}

impl ValidationTensor {
    pub fn new(axes: GridAxes, errors: Vec<Option<f64>>) -> Result<Self> {
        axes.check()?;
        if errors.len() != axes.len() {
            return Err(Error::DimensionMismatch {
                expected: axes.len(),
                found: errors.len(),
            });
        }
        if let Some(bad) = errors.iter().flatten().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::InvalidArgument(format!(
                "error {bad} outside [0, 1]"
            )));
        }
        Ok(ValidationTensor {
            axes,
            failed: errors.iter().map(Option::is_none).collect(),
            errors: errors.into_iter().map(|e| e.unwrap_or(1.0)).collect(),
        })
    }

    pub fn get(&self, node: GridNode) -> f64 {
        self.errors[self.axes.flat(node)]
    }

    pub fn is_failed(&self, node: GridNode) -> bool {
        self.failed[self.axes.flat(node)]
    }

    /// Values in lexicographic node order.
    pub fn values(&self) -> &[f64] {
        &self.errors
    }

    pub fn nodes(&self) -> impl Iterator<Item = GridNode> + '_ {
        (0..self.errors.len()).map(|f| self.axes.node(f))
    }

    /// Smallest value; ties go to the lexicographically first node.
    pub fn argmin(&self) -> GridNode {
        let mut best = 0;
        for (f, &v) in self.errors.iter().enumerate() {
            if v < self.errors[best] {
                best = f;
            }
        }
        self.axes.node(best)
    }

    /// `i_nub,i_nuo,i_alpha,nu_b,nu_o,alpha,error,status` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::InvalidArgument(format!("writing tensor: {e}"));
        w.write_record([
            "i_nub", "i_nuo", "i_alpha", "nu_b", "nu_o", "alpha", "error", "status",
        ])
        .map_err(csv_err)?;
        for node in self.nodes() {
            let f = self.axes.flat(node);
            w.write_record([
                node.i_nub.to_string(),
                node.i_nuo.to_string(),
                node.i_alpha.to_string(),
                self.axes.nu_b[node.i_nub].to_string(),
                self.axes.nu_o[node.i_nuo].to_string(),
                self.axes.alpha[node.i_alpha].to_string(),
                self.errors[f].to_string(),
                if self.failed[f] { "failed" } else { "ok" }.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidArgument(format!("writing tensor: {e}")))?;
        Ok(())
    }
}

/// Separable 3-D Gaussian weights over a `5 × 5 × 3` window.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingFilter {
    pub shape: [usize; 3],
    pub weights: Vec<f64>,
}

impl Default for SmoothingFilter {
    fn default() -> Self {
        SmoothingFilter::gaussian([5, 5, 3], 1.0).expect("valid default filter")
    }
}

impl SmoothingFilter {
    /// Product of three discretized Gaussians with standard deviation `sigma`
    /// grid cells, normalized to unit sum. Lengths must be odd.
    pub fn gaussian(shape: [usize; 3], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "filter sigma must be positive, got {sigma}"
            )));
        }
        if shape.iter().any(|&l| l % 2 == 0) {
            return Err(Error::InvalidConfig(format!(
                "filter lengths must be odd, got {shape:?}"
            )));
        }
        let one_d = |len: usize| -> Vec<f64> {
            let c = (len / 2) as f64;
            let w: Vec<f64> = (0..len)
                .map(|k| (-(k as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        };
        let (a, b, c) = (one_d(shape[0]), one_d(shape[1]), one_d(shape[2]));
        let mut weights = Vec::with_capacity(shape.iter().product());
        for wa in &a {
            for wb in &b {
                for wc in &c {
                    weights.push(wa * wb * wc);
                }
            }
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        Ok(SmoothingFilter { shape, weights })
    }

    pub fn weight(&self, a: usize, b: usize, c: usize) -> f64 {
        self.weights[(a * self.shape[1] + b) * self.shape[2] + c]
    }
}

/// 3-D convolution with replicate padding; same shape as the input. Failed
/// cells enter with their stored value of 1.0.
pub fn gaussian_smooth(t: &ValidationTensor, f: &SmoothingFilter) -> ValidationTensor {
    let shape = t.axes.shape();
    let half = f.shape.map(|l| (l / 2) as isize);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let idx = |i: usize, j: usize, k: usize| (i * shape[1] + j) * shape[2] + k;
    let mut out = vec![0.0; t.errors.len()];
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            for k in 0..shape[2] {
                let center = t.errors[idx(i, j, k)];
                // Accumulating differences from the center keeps constant
                // tensors exactly constant.
                let mut acc = 0.0;
                for a in 0..f.shape[0] {
                    let ii = clamp(i as isize + a as isize - half[0], shape[0]);
                    for b in 0..f.shape[1] {
                        let jj = clamp(j as isize + b as isize - half[1], shape[1]);
                        for c in 0..f.shape[2] {
                            let kk = clamp(k as isize + c as isize - half[2], shape[2]);
                            acc += f.weight(a, b, c) * (t.errors[idx(ii, jj, kk)] - center);
                        }
                    }
                }
                out[idx(i, j, k)] = center + acc;
            }
        }
    }
    ValidationTensor {
        axes: t.axes.clone(),
        errors: out,
        failed: vec![false; t.errors.len()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Unsmooth,
    Smoothed,
    Extended,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Unsmooth, Strategy::Smoothed, Strategy::Extended];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Unsmooth => "unsmooth",
            Strategy::Smoothed => "smoothed",
            Strategy::Extended => "extended",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

/// Picks a node. `extended` is the tensor evaluated on the large validation
/// set, required for [`Strategy::Extended`].
pub fn select(
    t: &ValidationTensor,
    strategy: Strategy,
    filter: &SmoothingFilter,
    extended: Option<&ValidationTensor>,
) -> Result<GridNode> {
    match strategy {
        Strategy::Unsmooth => Ok(t.argmin()),
        Strategy::Smoothed => Ok(gaussian_smooth(t, filter).argmin()),
        Strategy::Extended => {
            let ext = extended.ok_or(Error::MissingExtendedSet)?;
            if ext.axes != t.axes {
                return Err(Error::InvalidArgument(
                    "extended tensor has different axes".into(),
                ));
            }
            Ok(ext.argmin())
        }
    }
}

/// Models trained at every grid node; `None` marks a failed node.
#[derive(Debug, Clone)]
pub struct GridModels {
    pub axes: GridAxes,
    pub models: Vec<Option<TrainedModel>>,
}

impl GridModels {
    pub fn model(&self, node: GridNode) -> Option<&TrainedModel> {
        self.models[self.axes.flat(node)].as_ref()
    }

    /// Validation 0/1 error of every node on `ds`.
    pub fn validate(&self, ds: &Dataset) -> Result<ValidationTensor> {
        let labels = ds.labels();
        let errors = self
            .models
            .par_iter()
            .map(|m| match m {
                Some(m) => m
                    .decision_values(ds)
                    .map(|f| Some(error_rate_of(&f, &labels))),
                None => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        ValidationTensor::new(self.axes.clone(), errors)
    }
}

/// Trains one model per node in parallel. Nodes whose parameters are
/// infeasible, or whose solve fails, are marked failed.
pub fn train_grid(
    train: &Dataset,
    axes: &GridAxes,
    ks: &KernelSpec,
    ordering: OrderingMode,
) -> Result<GridModels> {
    axes.check()?;
    if !train.has_oracle() {
        return Err(Error::MissingOracle);
    }
    let models = (0..axes.len())
        .into_par_iter()
        .map(|f| {
            train_gosvm(train, &axes.params(axes.node(f), *ks, ordering))
                .ok()
                .map(|s| s.model)
        })
        .collect();
    Ok(GridModels {
        axes: axes.clone(),
        models,
    })
}

pub fn grid_search(
    train: &Dataset,
    valid: &Dataset,
    axes: &GridAxes,
    ks: &KernelSpec,
    ordering: OrderingMode,
) -> Result<ValidationTensor> {
    train_grid(train, axes, ks, ordering)?.validate(valid)
}
