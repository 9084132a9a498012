//! Entropy numbers of diagonal operators between Hilbert sequence spaces.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper band factor: `L_k <= e_k <= 6 L_k` with
/// `L_k = sup_m 2^{-(k-1)/m} (sigma_1 ... sigma_m)^{1/m}`.
pub const ENTROPY_BAND: f64 = 6.0;

/// Diagonal operator `x -> (sigma_j x_j)` with nonincreasing positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSeqOp {
    sigmas: Vec<f64>,
    pub source: String,
    pub target: String,
    /// `true` when the weights past the stored ones are exactly zero;
    /// otherwise the list is a truncation of an infinite sequence.
    pub finite_rank: bool,
}

impl DiagonalSeqOp {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidArgument("diagonal operator needs at least one weight".into()));
        }
        if let Some(bad) = sigmas.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be positive and finite, found {bad}")));
        }
        if let Some(i) = sigmas.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!("weights increase at index {}", i + 1)));
        }
        Ok(Self { sigmas, source: "l2".into(), target: "l2".into(), finite_rank: false })
    }

    /// Weights `f(1), ..., f(len)`.
    pub fn from_fn<F: Fn(usize) -> f64>(len: usize, f: F) -> Result<Self> {
        Self::new((1..=len).map(f).collect())
    }

    pub fn finite_rank(mut self) -> Self {
        self.finite_rank = true;
        self
    }

    pub fn with_spaces(mut self, source: &str, target: &str) -> Self {
        self.source = source.into();
        self.target = target.into();
        self
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }
}

/// Two-sided estimate of `e_k` for `k = 1..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyBands {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Maximizing `m` for each `k`.
    pub argmax: Vec<usize>,
}

impl EntropyBands {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Geometric midpoint of the band.
    pub fn central(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| (a * b).sqrt()).collect()
    }

    /// Writes `k, sigma_k, e_k_low, e_k_high`.
    pub fn write_csv(&self, op: &DiagonalSeqOp, path: &Path, header: &str) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if !header.is_empty() {
            writeln!(f, "{header}")?;
        }
        writeln!(f, "k,sigma_k,e_k_low,e_k_high")?;
        for k in 0..self.len() {
            let sigma = op.sigmas.get(k).copied().unwrap_or(0.0);
            writeln!(f, "{},{:e},{:e},{:e}", k + 1, sigma, self.lower[k], self.upper[k])?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Entropy numbers of a diagonal operator, evaluated in the log domain.
///
/// Truncated sequences need `k_max <= len`; finite-rank ones accept any `k_max`.
pub fn diag_entropy_numbers(op: &DiagonalSeqOp, k_max: usize) -> Result<EntropyBands> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    if !op.finite_rank && k_max > op.len() {
        return Err(Error::InsufficientSize(format!(
            "k_max = {k_max} exceeds the {} stored weights of a truncated sequence",
            op.len()
        )));
    }
    let mut prefix = Vec::with_capacity(op.len() + 1);
    prefix.push(0.0);
    for s in &op.sigmas {
        prefix.push(prefix.last().unwrap() + s.ln());
    }
    let ln2 = std::f64::consts::LN_2;
    let rows: Vec<(f64, usize)> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let mut best = (f64::NEG_INFINITY, 0);
            for m in 1..=op.len() {
                let v = (prefix[m] - (k - 1) as f64 * ln2) / m as f64;
                if v > best.0 {
                    best = (v, m);
                }
            }
            best
        })
        .collect();
    let lower: Vec<f64> = rows.iter().map(|r| r.0.exp()).collect();
    let upper = lower.iter().map(|v| ENTROPY_BAND * v).collect();
    Ok(EntropyBands { lower, upper, argmax: rows.iter().map(|r| r.1).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvertDirection {
    /// Singular-value exponent to entropy exponent: `mu -> mu / (1 + mu)`.
    Forward,
    /// Entropy exponent back to singular-value exponent: `nu -> nu / (1 - nu)`.
    Inverse,
}

pub fn exponent_convert(mu: f64, direction: ConvertDirection) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent must be positive, got {mu}")));
    }
    match direction {
        ConvertDirection::Forward => Ok(mu / (1.0 + mu)),
        ConvertDirection::Inverse if mu < 1.0 => Ok(mu / (1.0 - mu)),
        ConvertDirection::Inverse => Err(Error::InvalidArgument(format!("entropy exponent must be below 1, got {mu}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{fit_decay_at, DecayModel};

    #[test]
    fn finite_rank_identity() {
        for r in [1usize, 3, 8] {
            let op = DiagonalSeqOp::new(vec![1.0; r]).unwrap().finite_rank();
            let e = diag_entropy_numbers(&op, 20 * r).unwrap();
            for (k, v) in e.lower.iter().enumerate() {
                let expected = 2f64.powf(-(k as f64) / r as f64);
                assert!((v / expected - 1.0).abs() < 1e-12);
            }
        }
        let truncated = DiagonalSeqOp::new(vec![1.0; 4]).unwrap();
        assert!(matches!(diag_entropy_numbers(&truncated, 5), Err(Error::InsufficientSize(_))));
    }

    #[test]
    fn exponential_weights_give_square_root_law() {
        let op = DiagonalSeqOp::from_fn(400, |j| (-(j as f64)).exp()).unwrap();
        let e = diag_entropy_numbers(&op, 400).unwrap();
        // maximize -(k-1) ln2 / m - (m+1)/2 by hand over a fine grid of m
        for k in [10usize, 50, 200] {
            let brute = (1..=400)
                .map(|m| -((k - 1) as f64) * 2f64.ln() / m as f64 - (m as f64 + 1.0) / 2.0)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((e.lower[k - 1].ln() - brute).abs() < 1e-9);
        }
        let xs: Vec<f64> = (40..=400).map(|k| k as f64).collect();
        let f = fit_decay_at(&xs, &e.lower[39..], DecayModel::StretchedExp, 8).unwrap();
        assert!((f.exponent / 0.5 - 1.0).abs() < 0.1, "exponent {}", f.exponent);
    }

    #[test]
    fn bands_are_monotone_and_ordered() {
        let op = DiagonalSeqOp::from_fn(300, |j| (j as f64).powf(-0.7)).unwrap();
        let e = diag_entropy_numbers(&op, 300).unwrap();
        assert!(e.lower.windows(2).all(|w| w[1] <= w[0]));
        assert!(e.lower.iter().zip(&e.upper).all(|(a, b)| (b / a - ENTROPY_BAND).abs() < 1e-12));
        assert_eq!(e.lower[0], 1.0);
    }

    #[test]
    fn conversion() {
        use ConvertDirection::*;
        assert_eq!(exponent_convert(1.0, Forward).unwrap(), 0.5);
        assert!((exponent_convert(0.5, Forward).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for mu in [0.1, 0.5, 1.0, 3.0, 20.0] {
            let back = exponent_convert(exponent_convert(mu, Forward).unwrap(), Inverse).unwrap();
            assert!((back - mu).abs() < 1e-14 * mu.max(1.0) * 10.0);
        }
        assert!(exponent_convert(1.0, Inverse).is_err());
        assert!(exponent_convert(1.5, Inverse).is_err());
        assert!(exponent_convert(0.0, Forward).is_err());
    }

    #[test]
    fn csv_columns() {
        let op = DiagonalSeqOp::from_fn(10, |j| 1.0 / j as f64).unwrap();
        let e = diag_entropy_numbers(&op, 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        e.write_csv(&op, &p, "# test").unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "k,sigma_k,e_k_low,e_k_high");
        assert_eq!(lines.len(), 12);
    }
}

#[cfg(test)]
mod exponent_relation {
    use super::*;
    use crate::entropy::{fit_decay, DecayModel};

    #[test]
    fn fitted_exponents_follow_conversion() {
        for mu in [1.0 / 3.0, 0.5, 1.0] {
            // keep every weight above the f64 underflow threshold
            let len = (700f64.powf(1.0 / mu) as usize).min(20000);
            let op = DiagonalSeqOp::from_fn(len, |j| (-(j as f64).powf(mu)).exp()).unwrap();
            let e = diag_entropy_numbers(&op, len.min(2000)).unwrap();
            let fs = fit_decay(op.sigmas(), DecayModel::StretchedExp).unwrap();
            let fe = fit_decay(&e.lower, DecayModel::StretchedExp).unwrap();
            let predicted = exponent_convert(fs.exponent, ConvertDirection::Forward).unwrap();
            assert!((fe.exponent / predicted - 1.0).abs() < 0.15);
        }
    }
}
