//! Synthetic data: Mackey-Glass series with delay embedding, a log-linear
//! survival model, and the digits CSV loader.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{parse_labeled_rows, read_table, Dataset, Label, LabeledSample, RngSeed};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MackeyGlassConfig {
    pub tau: f64,
    pub dt: f64,
    pub sample_every: usize,
    pub x0: f64,
    pub beta: f64,
    pub gamma: f64,
    pub exponent: u32,
    /// Prediction offset, in emitted points.
    pub horizon: usize,
    /// Embedding length.
    pub embed: usize,
    /// Upper limit of the random number of emitted points discarded before
    /// the series starts; 0 makes the series independent of the seed.
    pub max_offset: usize,
}

impl Default for MackeyGlassConfig {
    fn default() -> Self {
        MackeyGlassConfig {
            tau: 17.0,
            dt: 0.1,
            sample_every: 10,
            x0: 0.9,
            beta: 0.2,
            gamma: 0.1,
            exponent: 10,
            horizon: 5,
            embed: 4,
            max_offset: 0,
        }
    }
}

impl MackeyGlassConfig {
    /// Delay in integration steps.
    fn delay_steps(&self) -> Result<usize> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if !(self.beta > 0.0 && self.gamma > 0.0) || self.exponent == 0 {
            return bad("beta, gamma and exponent must be positive".into());
        }
        if !self.x0.is_finite() {
            return bad("x0 must be finite".into());
        }
        if self.embed == 0 || self.horizon == 0 {
            return bad("embed and horizon must be at least 1".into());
        }
        let ratio = self.tau / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return bad(format!("tau/dt = {ratio} is not an integer"));
        }
        if steps < 1.0 {
            return bad("tau must span at least one integration step".into());
        }
        Ok(steps as usize)
    }

    fn rhs(&self, x: f64, delayed: f64) -> f64 {
        self.beta * delayed / (1.0 + delayed.powi(self.exponent as i32)) - self.gamma * x
    }
}

/// Integrates `dx/dt = β·x(t−τ)/(1 + x(t−τ)^p) − γ·x(t)` with RK4 and a
/// constant history `x0` for `t ≤ 0`, emitting every `sample_every` steps.
///
/// Past states and slopes live in a ring buffer at step resolution. The
/// delayed value at half steps comes from cubic Hermite interpolation within
/// one step, which keeps the scheme fourth order.
pub fn gen_mackey_glass(cfg: &MackeyGlassConfig, length: usize, seed: RngSeed) -> Result<Vec<f64>> {
    let delay = cfg.delay_steps()?;
    let needed = cfg.embed + cfg.horizon;
    if length < needed {
        return Err(Error::InvalidConfig(format!(
            "length {length} below embed + horizon = {needed}"
        )));
    }
    let offset = if cfg.max_offset > 0 {
        seed.rng().random_range(0..=cfg.max_offset)
    } else {
        0
    };
    let total_steps = (offset + length - 1) * cfg.sample_every;
    let cap = delay + 2;
    // x and x' at step k; steps k < 0 are the constant history.
    let mut xs = vec![cfg.x0; cap];
    let mut dxs = vec![0.0; cap];
    let hist = |buf: &[f64], k: isize, before: f64| -> f64 {
        if k < 0 {
            before
        } else {
            buf[k as usize % cap]
        }
    };
    let mut out = Vec::with_capacity(length);
    let mut x = cfg.x0;
    let dt = cfg.dt;
    for k in 0..=total_steps {
        if k % cfg.sample_every == 0 && k / cfg.sample_every >= offset {
            out.push(x);
        }
        if k == total_steps {
            break;
        }
        let d = k as isize - delay as isize;
        let d0 = hist(&xs, d, cfg.x0);
        let d1 = hist(&xs, d + 1, cfg.x0);
        let k1 = cfg.rhs(x, d0);
        dxs[k % cap] = k1;
        // Delayed value at the half step: cubic Hermite on [d, d+1]. Slope
        // discontinuities sit on grid points, so this stays smooth.
        let dh = if d < 0 {
            cfg.x0
        } else {
            0.5 * (d0 + d1) + dt * (dxs[d as usize % cap] - dxs[(d + 1) as usize % cap]) / 8.0
        };
        let k2 = cfg.rhs(x + 0.5 * dt * k1, dh);
        let k3 = cfg.rhs(x + 0.5 * dt * k2, dh);
        let k4 = cfg.rhs(x + dt * k3, d1);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        xs[(k + 1) % cap] = x;
    }
    Ok(out)
}

/// Delay-embeds a series: features `(x_{t−e+1}, …, x_t)`, label `+1` iff
/// `x_{t+h} > x_t`, oracle `|x_{t+h} − x_t|`.
pub fn embed_series(series: &[f64], cfg: &MackeyGlassConfig) -> Result<Dataset> {
    let (e, h) = (cfg.embed, cfg.horizon);
    if e == 0 || h == 0 {
        return Err(Error::InvalidConfig(
            "embed and horizon must be at least 1".into(),
        ));
    }
    if series.len() < e + h {
        return Err(Error::SeriesTooShort {
            needed: e + h,
            have: series.len(),
        });
    }
    let samples = (e - 1..series.len() - h)
        .map(|t| {
            let diff = series[t + h] - series[t];
            LabeledSample::new(
                series[t + 1 - e..=t].to_vec(),
                if diff > 0.0 {
                    Label::Positive
                } else {
                    Label::Negative
                },
                Some(diff.abs()),
            )
        })
        .collect();
    Dataset::new(samples, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurvivalConfig {
    pub dim: usize,
    /// Standard deviation of the log-time noise.
    pub noise: f64,
    /// Fixed prediction time.
    pub horizon: f64,
    /// Rate of exponential censoring times; 0 disables censoring.
    pub censor_rate: f64,
    pub n: usize,
}

impl Default for SurvivalConfig {
    fn default() -> Self {
        SurvivalConfig {
            dim: 5,
            noise: 0.1,
            horizon: 1.5,
            censor_rate: 0.0,
            n: 2000,
        }
    }
}

/// Event times `T = exp(θ·x + ε)` with `x ~ U[0,1]^dim`, `ε ~ N(0, noise²)`
/// and a random unit vector `θ` drawn first from the stream. Label `+1` iff
/// the observed time exceeds the horizon; oracle `|T − horizon|`. With
/// censoring the observed time is `min(T, C)` and the censoring flag is
/// discarded.
pub fn gen_survival(cfg: &SurvivalConfig, seed: RngSeed) -> Result<Dataset> {
    if cfg.dim == 0 {
        return Err(Error::InvalidConfig("dim must be at least 1".into()));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise must be non-negative, got {}",
            cfg.noise
        )));
    }
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "horizon must be positive, got {}",
            cfg.horizon
        )));
    }
    if !(cfg.censor_rate >= 0.0 && cfg.censor_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "censor_rate must be non-negative, got {}",
            cfg.censor_rate
        )));
    }
    let mut rng = seed.rng();
    let mut theta: Vec<f64> = (0..cfg.dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
    theta.iter_mut().for_each(|t| *t /= norm);
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let censor = (cfg.censor_rate > 0.0)
        .then(|| Exp::new(cfg.censor_rate).map_err(|e| Error::InvalidConfig(e.to_string())))
        .transpose()?;
    let samples = (0..cfg.n)
        .map(|_| {
            let x: Vec<f64> = (0..cfg.dim).map(|_| rng.random::<f64>()).collect();
            let lin: f64 = theta.iter().zip(&x).map(|(t, v)| t * v).sum();
            let eps = if cfg.noise > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            let mut time = (lin + eps).exp();
            if let Some(c) = &censor {
                time = time.min(c.sample(&mut rng));
            }
            let label = if time > cfg.horizon {
                Label::Positive
            } else {
                Label::Negative
            };
            LabeledSample::new(x, label, Some((time - cfg.horizon).abs()))
        })
        .collect();
    Dataset::new(samples, cfg.dim)
}

pub const DIGIT_PIXELS: usize = 100;

/// Reads `p0..p99,label[,confidence]`; the confidence column, when present,
/// becomes the oracle.
pub fn load_digits(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_digits_from(file)
}

pub fn load_digits_from(input: impl std::io::Read) -> Result<Dataset> {
    let table = read_table(input)?;
    let col = |name: &str| table.header.iter().position(|h| h == name);
    let label_col = col("label").ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing `label` column".into(),
    })?;
    parse_labeled_rows(&table, label_col, col("confidence"), Some(DIGIT_PIXELS))
}
