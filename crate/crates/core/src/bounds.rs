//! Numeric evaluation of the risk bounds, with the unknown universal constant
//! `C` exposed as a parameter (default 1). The values are diagnostic curves,
//! not rigorous guarantees.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundParams {
    /// Level VC-dimension.
    pub v: f64,
    /// Sample size (real so that limits can be probed).
    pub n: f64,
    pub c: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Ordinal slack.
    pub d: f64,
    /// Loss-balance parameter.
    pub w: f64,
    pub phi: f64,
    /// Shattering multiplier: 2 for one ordering, 4 for per-class orderings.
    pub ordering_multiplier: u8,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            v: 5.0,
            n: 1000.0,
            c: 1.0,
            delta1: 0.01,
            delta2: 0.01,
            delta3: 0.01,
            d: 0.0,
            w: 1.0,
            phi: 1.0,
            ordering_multiplier: 2,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.v > 0.0 && self.v.is_finite()) {
            return bad(format!("V must be positive, got {}", self.v));
        }
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return bad(format!("n must be at least 1, got {}", self.n));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        for (name, d) in [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("delta3", self.delta3),
        ] {
            if !(d > 0.0 && d < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {d}"));
            }
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return bad(format!("d must be non-negative, got {}", self.d));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return bad(format!("w must be positive, got {}", self.w));
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return bad(format!("phi must lie in (0, 1], got {}", self.phi));
        }
        if !matches!(self.ordering_multiplier, 2 | 4) {
            return bad(format!(
                "ordering multiplier must be 2 or 4, got {}",
                self.ordering_multiplier
            ));
        }
        Ok(())
    }

    fn vlogn_over_n(&self) -> f64 {
        self.v * self.n.ln() / self.n
    }
}

/// `L^iso_n + C·sqrt((mult·V·log n + log(1/δ₂))/n)`.
pub fn ordinal_bound(p: &BoundParams, empirical_liso: f64) -> Result<f64> {
    p.validate()?;
    let m = f64::from(p.ordering_multiplier);
    Ok(empirical_liso + p.c * ((m * p.v * p.n.ln() + (1.0 / p.delta2).ln()) / p.n).sqrt())
}

/// Excess-risk bound for the ordering- and balance-constrained class:
///
/// ```text
/// 8/(nφ)·(4C²V log n + (1+2φ) log(1/δ₁))
///   + 128φ·(d + C·sqrt((V log n + log(1/δ₂))/n))
///   + 128φ·C·max(w, 1/w)·sqrt((V log n + log(1/δ₃))/n)
/// ```
pub fn main_bound(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let (n, phi, c) = (p.n, p.phi, p.c);
    let vlog = p.v * n.ln();
    let first = 8.0 / (n * phi) * (4.0 * c * c * vlog + (1.0 + 2.0 * phi) * (1.0 / p.delta1).ln());
    let second = 128.0 * phi * (p.d + c * ((vlog + (1.0 / p.delta2).ln()) / n).sqrt());
    let third = 128.0 * phi * c * p.w.max(1.0 / p.w) * ((vlog + (1.0 / p.delta3).ln()) / n).sqrt();
    Ok(first + second + third)
}

/// Sample sizes where φ switches regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhiRegimes {
    /// First n at which φ = n^{-1/4}.
    pub quarter_from: f64,
    /// First n at which φ = n^{-1/2}.
    pub half_from: f64,
}

impl Default for PhiRegimes {
    fn default() -> Self {
        PhiRegimes {
            quarter_from: 256.0,
            half_from: 65536.0,
        }
    }
}

/// φ = 1 for small n, then `n^{-1/4}`, then `n^{-1/2}`.
pub fn phi_schedule(n: f64, regimes: &PhiRegimes) -> f64 {
    let n = n.max(1.0);
    let phi = if n < regimes.quarter_from {
        1.0
    } else if n < regimes.half_from {
        n.powf(-0.25)
    } else {
        n.powf(-0.5)
    };
    phi.min(1.0)
}

/// `ε′ = C²V log n/(nφ) + φd`, verified against the fixed-point inequality
/// `ε′ ≥ ψ(w(ε′))` with `ψ(x) = C·x·sqrt(V log n/n)` and
/// `w(r) = sqrt(r/φ + d)`.
pub fn appendix_epsilon(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let s = p.vlogn_over_n();
    let eps = p.c * p.c * s / p.phi + p.phi * p.d;
    let rhs = appendix_psi_of_w(p, eps);
    if rhs > eps + 1e-12 * eps.max(1.0) {
        return Err(Error::VerificationFailed(format!(
            "epsilon' = {eps:e} < psi(w(epsilon')) = {rhs:e}"
        )));
    }
    Ok(eps)
}

/// `ψ(w(r))` for the appendix inequality.
pub fn appendix_psi_of_w(p: &BoundParams, r: f64) -> f64 {
    let s = p.vlogn_over_n();
    p.c * (r / p.phi + p.d).sqrt() * s.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub n: f64,
    pub phi: f64,
    pub ordinal: f64,
    pub main: f64,
    pub epsilon: f64,
}

/// Bounds over a range of sample sizes, with φ from the schedule.
pub fn bound_curve(
    base: &BoundParams,
    ns: &[f64],
    regimes: &PhiRegimes,
    empirical_liso: f64,
) -> Result<Vec<BoundPoint>> {
    ns.iter()
        .map(|&n| {
            let phi = phi_schedule(n, regimes);
            let p = BoundParams { n, phi, ..*base };
            Ok(BoundPoint {
                n,
                phi,
                ordinal: ordinal_bound(&p, empirical_liso)?,
                main: main_bound(&p)?,
                epsilon: appendix_epsilon(&p)?,
            })
        })
        .collect()
}

pub fn write_curve_csv(points: &[BoundPoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidArgument(format!("writing curve: {e}"));
    w.write_record(["n", "phi", "ordinal_bound", "main_bound", "epsilon"])
        .map_err(err)?;
    for p in points {
        w.write_record([p.n, p.phi, p.ordinal, p.main, p.epsilon].map(|v| v.to_string()))
            .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("writing curve: {e}")))?;
    Ok(())
}
