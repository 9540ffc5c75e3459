//! Benchmark protocol: repeated train/validation realizations against a
//! fixed test set, comparing ν-SVM with GO-SVM under each selection
//! strategy.
//!
//! Per realization the RBF width and ν of the ν-SVM are chosen on the
//! validation set (`std`) or the extended set (`ext`); the `std` width is
//! reused for the GO-SVM grid, whose node is chosen by each [`Strategy`].

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;

use crate::data::{read_dataset, Dataset, RngSeed};
use crate::datagen::{
    embed_series, gen_mackey_glass, gen_survival, load_digits, MackeyGlassConfig, SurvivalConfig,
};
use crate::error::{Error, Result};
use crate::gosvm::error_rate_of;
use crate::kernels::{width_quantiles, KernelSpec};
use crate::modelsel::{select, train_grid, GridAxes, SmoothingFilter, Strategy};
use crate::nusvm::train_nusvm;
use crate::ordermetrics::OrderingMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    MackeyGlass {
        #[serde(flatten)]
        config: MackeyGlassConfig,
        /// Series length; 0 sizes it from the split sizes.
        #[serde(default)]
        length: usize,
    },
    Survival {
        #[serde(flatten)]
        config: SurvivalConfig,
    },
    /// Dataset CSV as written by `gen`.
    File {
        path: PathBuf,
    },
    Digits {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sizes {
    pub train: usize,
    /// Holdout size; 0 means "same as train".
    pub valid: usize,
    pub test: usize,
    pub extended: usize,
    /// Smallest acceptable test set.
    pub min_test: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            train: 50,
            valid: 0,
            test: 4000,
            extended: 2000,
            min_test: 1,
        }
    }
}

impl Sizes {
    fn valid(&self) -> usize {
        if self.valid == 0 {
            self.train
        } else {
            self.valid
        }
    }

    fn total(&self) -> usize {
        self.train + self.valid() + self.test + self.extended
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub realizations: usize,
    pub ordering: OrderingMode,
    pub strategies: Vec<Strategy>,
    /// Candidate RBF widths as quantiles of training pair distances.
    pub width_quantiles: Vec<f64>,
    /// ν values tried for the ν-SVM baseline.
    pub nu_svm: Vec<f64>,
    pub filter_sigma: f64,
    pub sizes: Sizes,
    pub grid: GridAxes,
    pub dataset: DatasetSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let grid = GridAxes::default();
        ExperimentConfig {
            name: "mackey-glass".into(),
            seed: 1,
            realizations: 12,
            ordering: OrderingMode::PerClass,
            strategies: Strategy::ALL.to_vec(),
            width_quantiles: vec![0.1, 0.25, 0.5],
            nu_svm: grid.nu_b.clone(),
            filter_sigma: 1.0,
            sizes: Sizes::default(),
            grid,
            dataset: DatasetSpec::MackeyGlass {
                config: MackeyGlassConfig::default(),
                length: 0,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.realizations == 0 {
            return bad("realizations must be at least 1");
        }
        if self.sizes.train < 2 {
            return bad("train size must be at least 2");
        }
        if self.sizes.test < self.sizes.min_test.max(1) {
            return Err(Error::InvalidConfig(format!(
                "test size {} below the minimum {}",
                self.sizes.test, self.sizes.min_test
            )));
        }
        if self.strategies.contains(&Strategy::Extended) && self.sizes.extended == 0 {
            return bad("the extended strategy needs sizes.extended > 0");
        }
        if self.width_quantiles.is_empty() || self.nu_svm.is_empty() || self.strategies.is_empty() {
            return bad("width_quantiles, nu_svm and strategies must be non-empty");
        }
        if self.grid.is_empty() {
            return bad("every grid axis needs at least one value");
        }
        SmoothingFilter::gaussian([5, 5, 3], self.filter_sigma)?;
        Ok(())
    }

    /// The full sample pool described by the dataset spec.
    pub fn load_pool(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSpec::MackeyGlass { config, length } => {
                let length = if *length == 0 {
                    self.sizes.total() + config.embed + config.horizon
                } else {
                    *length
                };
                let series = gen_mackey_glass(config, length, RngSeed::new(self.seed, 0))?;
                embed_series(&series, config)
            }
            DatasetSpec::Survival { config } => {
                let config = SurvivalConfig {
                    n: config.n.max(self.sizes.total()),
                    ..*config
                };
                gen_survival(&config, RngSeed::new(self.seed, 0))
            }
            DatasetSpec::File { path } => read_dataset(path),
            DatasetSpec::Digits { path } => load_digits(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub strategy: String,
    pub realization: usize,
    pub error: f64,
}

/// Per-realization test errors for every (method, strategy) column.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    pub method: String,
    pub strategy: String,
    pub errors: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over realizations (0 for one realization).
    pub std: f64,
}

impl ResultTable {
    /// Columns in first-appearance order.
    pub fn summary(&self) -> Vec<ColumnSummary> {
        let mut cols: Vec<ColumnSummary> = Vec::new();
        for r in &self.rows {
            match cols
                .iter_mut()
                .find(|c| c.method == r.method && c.strategy == r.strategy)
            {
                Some(c) => c.errors.push(r.error),
                None => cols.push(ColumnSummary {
                    method: r.method.clone(),
                    strategy: r.strategy.clone(),
                    errors: vec![r.error],
                    mean: 0.0,
                    std: 0.0,
                }),
            }
        }
        for c in &mut cols {
            let k = c.errors.len() as f64;
            c.mean = c.errors.iter().sum::<f64>() / k;
            c.std = if c.errors.len() > 1 {
                (c.errors.iter().map(|e| (e - c.mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
        }
        cols
    }

    pub fn column(&self, method: &str, strategy: &str) -> Option<ColumnSummary> {
        self.summary()
            .into_iter()
            .find(|c| c.method == method && c.strategy == strategy)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)
                .map_err(|e| Error::InvalidArgument(format!("writing results: {e}")))?;
        }
        w.flush()
            .map_err(|e| Error::InvalidArgument(format!("writing results: {e}")))?;
        Ok(())
    }

    /// Fixed-width table: one row per experiment, `mean (std)` per column.
    pub fn render(&self) -> String {
        let cols = self.summary();
        let mut experiments: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !experiments.contains(&r.experiment.as_str()) {
                experiments.push(&r.experiment);
            }
        }
        let mut out = format!("{:<16}", "experiment");
        for c in &cols {
            out += &format!("{:>20}", format!("{} {}", c.method, c.strategy));
        }
        out += "\n";
        for e in experiments {
            out += &format!("{e:<16}");
            for c in &cols {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        r.experiment == e && r.method == c.method && r.strategy == c.strategy
                    })
                    .map(|r| r.error)
                    .collect();
                let sub = ResultTable {
                    rows: vals
                        .iter()
                        .map(|&error| ResultRow {
                            experiment: e.into(),
                            method: c.method.clone(),
                            strategy: c.strategy.clone(),
                            realization: 0,
                            error,
                        })
                        .collect(),
                };
                let s = &sub.summary()[0];
                out += &format!("{:>20}", format!("{:.3} ({:.3})", s.mean, s.std));
            }
            out += "\n";
        }
        out += "values: mean test error (sample standard deviation over realizations)\n";
        out
    }
}

pub const NU_SVM: &str = "nu-svm";
pub const GO_SVM: &str = "go-svm";

/// Runs every realization. Realizations run one after another; the grid
/// inside each runs on the rayon pool.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let pool = cfg.load_pool()?;
    let sizes = &cfg.sizes;
    let rest_len = pool
        .len()
        .checked_sub(sizes.test)
        .filter(|r| *r >= sizes.train + sizes.valid() + sizes.extended);
    let Some(rest_len) = rest_len else {
        return Err(Error::InsufficientData {
            requested: sizes.total(),
            available: pool.len(),
        });
    };
    // A fixed test set, drawn once on a stream no realization uses.
    let parts = partition(
        &pool,
        &[sizes.test, rest_len],
        RngSeed::new(cfg.seed, u64::MAX),
    );
    let (test, rest) = (&parts[0], &parts[1]);
    let mut table = ResultTable::default();
    for r in 0..cfg.realizations {
        let rows = run_realization(cfg, rest, test, r)
            .map_err(|e| Error::InvalidArgument(format!("realization {r}: {e}")))?;
        table.rows.extend(rows);
    }
    Ok(table)
}

/// Shuffle-then-slice, like [`crate::data::split`], but any part may be
/// empty. The caller guarantees the sizes fit.
fn partition(ds: &Dataset, sizes: &[usize], seed: RngSeed) -> Vec<Dataset> {
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut seed.rng());
    let mut start = 0;
    sizes
        .iter()
        .map(|&k| {
            let part = ds.subset(&idx[start..start + k]);
            start += k;
            part
        })
        .collect()
}

fn run_realization(
    cfg: &ExperimentConfig,
    rest: &Dataset,
    test: &Dataset,
    r: usize,
) -> Result<Vec<ResultRow>> {
    let s = &cfg.sizes;
    let parts = partition(
        rest,
        &[s.train, s.valid(), s.extended],
        RngSeed::new(cfg.seed, r as u64),
    );
    let [train, valid, extended] = [&parts[0], &parts[1], &parts[2]];
    let row = |method: &str, strategy: &str, error: f64| ResultRow {
        experiment: cfg.name.clone(),
        method: method.into(),
        strategy: strategy.into(),
        realization: r,
        error,
    };
    let mut rows = Vec::new();

    // ν-SVM over (width, ν).
    let widths = width_quantiles(train, &cfg.width_quantiles)?;
    let combos: Vec<(usize, usize)> = (0..widths.len())
        .flat_map(|w| (0..cfg.nu_svm.len()).map(move |v| (w, v)))
        .collect();
    let svms: Vec<Option<crate::nusvm::TrainedModel>> = combos
        .par_iter()
        .map(|&(w, v)| {
            train_nusvm(train, cfg.nu_svm[v], &KernelSpec::Rbf { width: widths[w] }).ok()
        })
        .collect();
    let err_on = |m: &Option<crate::nusvm::TrainedModel>, ds: &Dataset| -> Result<f64> {
        match m {
            Some(m) => Ok(error_rate_of(&m.decision_values(ds)?, &ds.labels())),
            None => Ok(1.0),
        }
    };
    let pick = |ds: &Dataset| -> Result<usize> {
        let errs = svms
            .iter()
            .map(|m| err_on(m, ds))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..errs.len()).fold(0, |b, i| if errs[i] < errs[b] { i } else { b }))
    };
    let std_idx = pick(valid)?;
    if svms[std_idx].is_none() {
        return Err(Error::InfeasibleParams {
            msg: "no feasible nu-SVM setting on this training set".into(),
            status: None,
        });
    }
    rows.push(row(NU_SVM, "std", err_on(&svms[std_idx], test)?));
    if s.extended > 0 {
        let ext_idx = pick(extended)?;
        rows.push(row(NU_SVM, "ext", err_on(&svms[ext_idx], test)?));
    }

    // GO-SVM grid with the selected width.
    let kernel = KernelSpec::Rbf {
        width: widths[combos[std_idx].0],
    };
    let models = train_grid(train, &cfg.grid, &kernel, cfg.ordering)?;
    let tensor = models.validate(valid)?;
    let ext_tensor = if s.extended > 0 {
        Some(models.validate(extended)?)
    } else {
        None
    };
    let filter = SmoothingFilter::gaussian([5, 5, 3], cfg.filter_sigma)?;
    for &strategy in &cfg.strategies {
        let node = select(&tensor, strategy, &filter, ext_tensor.as_ref())?;
        let error = match models.model(node) {
            Some(m) => error_rate_of(&m.decision_values(test)?, &test.labels()),
            None => 1.0,
        };
        rows.push(row(GO_SVM, strategy.name(), error));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let mk = |r, e| ResultRow {
            experiment: "x".into(),
            method: "m".into(),
            strategy: "s".into(),
            realization: r,
            error: e,
        };
        let t = ResultTable {
            rows: vec![mk(0, 0.1), mk(1, 0.3)],
        };
        let c = &t.summary()[0];
        assert!((c.mean - 0.2).abs() < 1e-15);
        assert!((c.std - 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn config_rejects_zero_realizations() {
        let cfg = ExperimentConfig {
            realizations: 0,
            ..Default::default()
        };
        assert!(matches!(
            ExperimentConfig::from_toml(&cfg.to_toml()),
            Err(Error::InvalidConfig(_))
        ));
    }
}
