//! Least-squares decay laws in the log domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay law family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DecayModel {
    /// `C exp(-c k^mu)` with `mu` fitted.
    StretchedExp,
    /// `C exp(-c k^mu)` with `mu` held fixed.
    FixedExponent { mu: f64 },
    /// `C k^{-alpha}`.
    Power,
}

/// Fraction of leading and trailing points dropped before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub drop_front: f64,
    pub drop_back: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { drop_front: 0.10, drop_back: 0.05 }
    }
}

impl FitWindow {
    pub const FULL: FitWindow = FitWindow { drop_front: 0.0, drop_back: 0.0 };
}

/// Fitted decay law.
///
/// For the exponential families `value = amplitude * exp(-rate * k^exponent)`;
/// for the power family `value = amplitude * k^{-exponent}` and `rate` is absent.
/// `residual` is the RMS log-domain error divided by the standard deviation
/// of the log data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub amplitude: f64,
    pub rate: Option<f64>,
    pub exponent: f64,
    pub k_range: [f64; 2],
    pub residual: f64,
    pub points: usize,
}

impl DecayFit {
    pub fn predict(&self, k: f64) -> f64 {
        match self.model {
            DecayModel::Power => self.amplitude * k.powf(-self.exponent),
            _ => self.amplitude * (-self.rate.unwrap_or(0.0) * k.powf(self.exponent)).exp(),
        }
    }

    /// Export record `{model, params, k_range, residual}`.
    pub fn export(&self) -> serde_json::Value {
        let (name, params) = match self.model {
            DecayModel::Power => ("power", serde_json::json!({ "C": self.amplitude, "alpha": self.exponent })),
            DecayModel::StretchedExp => (
                "stretched_exp",
                serde_json::json!({ "C": self.amplitude, "c": self.rate, "mu": self.exponent }),
            ),
            DecayModel::FixedExponent { .. } => (
                "stretched_exp_fixed_mu",
                serde_json::json!({ "C": self.amplitude, "c": self.rate, "mu": self.exponent }),
            ),
        };
        serde_json::json!({
            "model": name,
            "params": params,
            "k_range": self.k_range,
            "residual": self.residual,
            "points": self.points,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.export())?)
    }
}

/// Fits `values[k-1]` against `k = 1..=N` inside the default window.
pub fn fit_decay(values: &[f64], model: DecayModel) -> Result<DecayFit> {
    fit_decay_window(values, model, FitWindow::default())
}

pub fn fit_decay_window(values: &[f64], model: DecayModel, window: FitWindow) -> Result<DecayFit> {
    if values.len() < 8 {
        return Err(Error::DegenerateFit(format!("need at least 8 points, got {}", values.len())));
    }
    let n = values.len();
    let start = (window.drop_front * n as f64).floor() as usize;
    let end = n - (window.drop_back * n as f64).floor() as usize;
    if end <= start + 2 {
        return Err(Error::DegenerateFit("window leaves too few points".into()));
    }
    let xs: Vec<f64> = (start + 1..=end).map(|k| k as f64).collect();
    fit_decay_at(&xs, &values[start..end], model, 3)
}

/// Fits `ys` against arbitrary positive abscissae.
pub fn fit_decay_at(xs: &[f64], ys: &[f64], model: DecayModel, min_points: usize) -> Result<DecayFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < min_points.max(3) {
        return Err(Error::DegenerateFit(format!("need at least {} points, got {}", min_points.max(3), xs.len())));
    }
    if let Some(bad) = ys.iter().chain(xs).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!("fit data must be positive and finite, found {bad}")));
    }
    let logy: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mean = logy.iter().sum::<f64>() / logy.len() as f64;
    let std = (logy.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / logy.len() as f64).sqrt();
    if !(std > 1e-14 * (1.0 + mean.abs())) {
        return Err(Error::DegenerateFit("zero variance in log data".into()));
    }
    let k_range = [xs[0], *xs.last().unwrap()];
    let (amplitude, rate, exponent, sse) = match model {
        DecayModel::Power => {
            let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let (b, m, sse) = linear_fit(&lx, &logy);
            (b.exp(), None, -m, sse)
        }
        DecayModel::FixedExponent { mu } => {
            let (b, c, sse) = exp_subfit(xs, &logy, mu);
            (b.exp(), Some(c), mu, sse)
        }
        DecayModel::StretchedExp => {
            let mu = best_exponent(xs, &logy);
            let (b, c, sse) = exp_subfit(xs, &logy, mu);
            (b.exp(), Some(c), mu, sse)
        }
    };
    let rms = (sse / xs.len() as f64).sqrt();
    Ok(DecayFit { model, amplitude, rate, exponent, k_range, residual: rms / std, points: xs.len() })
}

/// Returns `(intercept, slope, sse)` of `y ~ intercept + slope x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let sse = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    (icpt, slope, sse)
}

fn exp_subfit(xs: &[f64], logy: &[f64], mu: f64) -> (f64, f64, f64) {
    let t: Vec<f64> = xs.iter().map(|x| x.powf(mu)).collect();
    let (b, m, sse) = linear_fit(&t, logy);
    (b, -m, sse)
}

/// Coarse log-spaced scan over the exponent, then golden-section refinement.
fn best_exponent(xs: &[f64], logy: &[f64]) -> f64 {
    let sse = |log_mu: f64| exp_subfit(xs, logy, log_mu.exp()).2;
    let (lo, hi) = (0.01f64.ln(), 4f64.ln());
    let steps = 80;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&g| sse(g)).collect();
    let best = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(steps)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(d);
        }
    }
    (0.5 * (a + b)).exp()
}
