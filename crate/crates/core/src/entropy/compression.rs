//! Optimizing the number of factors in an iterated compression estimate.
//!
//! A composition of `N` maps, each compressing with singular values
//! `sigma_j <= C (2N / d) j^{-1/(n+1)}`, satisfies
//! `sigma_k <= C (C (2N/d) (k/N)^{-1/(n+1)})^N`. Choosing `N` well gives
//! stretched exponential decay with exponent `1/(n+2)`.

use serde::{Deserialize, Serialize};

use crate::entropy::{fit_decay_at, DecayFit, DecayModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionBound {
    pub k: u64,
    pub n_opt: u64,
    pub bound: f64,
    /// Bound with a single factor.
    pub single_factor: f64,
}

impl CompressionBound {
    /// `n_opt / k^{1/(n+2)}`.
    pub fn ratio(&self, dim: usize) -> f64 {
        self.n_opt as f64 / (self.k as f64).powf(1.0 / (dim as f64 + 2.0))
    }
}

/// Logarithm of the bound for a given number of factors.
pub fn log_compression_bound(c: f64, d: f64, n: usize, k: u64, factors: u64) -> f64 {
    let nf = factors as f64;
    let inner = c * 2.0 * nf / d * (k as f64 / nf).powf(-1.0 / (n as f64 + 1.0));
    c.ln() + nf * inner.ln()
}

/// Minimizes the bound over integer `N` in `1..=k` by direct scan.
pub fn iterated_compression_bound(c: f64, d: f64, n: usize, k: u64) -> Result<CompressionBound> {
    if !(c > 0.0 && d > 0.0) || n == 0 {
        return Err(Error::InvalidArgument(format!("need C, d > 0 and n >= 1, got {c}, {d}, {n}")));
    }
    if k < n as u64 + 2 {
        return Err(Error::InvalidArgument(format!("need k >= n + 2, got k = {k}")));
    }
    let (mut best_n, mut best) = (1, log_compression_bound(c, d, n, k, 1));
    for factors in 2..=k {
        let v = log_compression_bound(c, d, n, k, factors);
        if v < best {
            best = v;
            best_n = factors;
        }
    }
    let bound = best.exp();
    if bound >= 1.0 {
        log::info!("compression bound {bound:.3e} >= 1 at k = {k}: no decay yet");
    }
    Ok(CompressionBound { k, n_opt: best_n, bound, single_factor: log_compression_bound(c, d, n, k, 1).exp() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionSweep {
    pub dim: usize,
    pub points: Vec<CompressionBound>,
    /// Free stretched exponential fit of the bounds.
    pub fit: DecayFit,
    /// Fit with the exponent held at `1/(n+2)`.
    pub fixed: DecayFit,
    /// Smallest amplitude making `amplitude * exp(-rate k^{1/(n+2)})` dominate every point.
    pub envelope_amplitude: f64,
    /// Max over min of `n_opt / k^{1/(n+2)}`, minus one.
    pub ratio_spread: f64,
}

/// Evaluates the bound at every `k` and fits the decay law.
pub fn compression_sweep(c: f64, d: f64, n: usize, ks: &[u64]) -> Result<CompressionSweep> {
    let points: Vec<CompressionBound> =
        ks.iter().map(|&k| iterated_compression_bound(c, d, n, k)).collect::<Result<_>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.k as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.bound).collect();
    let mu = 1.0 / (n as f64 + 2.0);
    let fit = fit_decay_at(&xs, &ys, DecayModel::StretchedExp, 4)?;
    let fixed = fit_decay_at(&xs, &ys, DecayModel::FixedExponent { mu }, 3)?;
    let rate = fixed.rate.unwrap_or(0.0);
    let envelope_amplitude =
        points.iter().map(|p| p.bound * (rate * (p.k as f64).powf(mu)).exp()).fold(0.0, f64::max);
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio(n)).collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(CompressionSweep { dim: n, points, fit, fixed, envelope_amplitude, ratio_spread: hi / lo - 1.0 })
}

/// `k = 2^8, 2^9, ..., 2^16`.
pub fn dyadic_range(lo_exp: u32, hi_exp: u32) -> Vec<u64> {
    (lo_exp..=hi_exp).map(|e| 1u64 << e).collect()
}
