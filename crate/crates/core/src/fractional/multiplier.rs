use serde::{Deserialize, Serialize};

use super::OperatorDescriptor;
use crate::error::{Error, Result};
use crate::lattice::{apply_symbol, convolution_kernel, GridField, LatticeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    /// `|xi|^{2s}`, zero at the zero mode for every `s`.
    Homogeneous,
    /// `(1 + |xi|^2)^s`.
    Inhomogeneous,
    /// Externally supplied nonnegative symbol.
    Custom,
}

/// Fourier multiplier on the lattice.
#[derive(Debug, Clone)]
pub struct MultiplierOp {
    lattice: LatticeSpec,
    s: f64,
    kind: SymbolKind,
    scale: f64,
    symbol: Vec<f64>,
}

impl MultiplierOp {
    pub fn homogeneous(lattice: &LatticeSpec, s: f64) -> Self {
        let symbol = lattice
            .frequency_sq()
            .into_iter()
            .map(|x| if x == 0.0 { 0.0 } else { x.powf(s) })
            .collect();
        Self { lattice: lattice.clone(), s, kind: SymbolKind::Homogeneous, scale: 1.0, symbol }
    }

    pub fn inhomogeneous(lattice: &LatticeSpec, s: f64) -> Self {
        let symbol = lattice.frequency_sq().into_iter().map(|x| (1.0 + x).powf(s)).collect();
        Self { lattice: lattice.clone(), s, kind: SymbolKind::Inhomogeneous, scale: 1.0, symbol }
    }

    /// Wraps a precomputed symbol in DFT order.
    pub fn from_symbol(lattice: &LatticeSpec, s: f64, symbol: Vec<f64>) -> Result<Self> {
        if symbol.len() != lattice.num_nodes() {
            return Err(Error::DimensionMismatch { expected: lattice.num_nodes(), got: symbol.len() });
        }
        if symbol.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("symbol must be finite and nonnegative".into()));
        }
        Ok(Self { lattice: lattice.clone(), s, kind: SymbolKind::Custom, scale: 1.0, symbol })
    }

    /// Same operator with the symbol multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale *= factor;
        out.symbol.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Convolution kernel of the symbol.
    pub fn kernel(&self) -> Vec<f64> {
        convolution_kernel(&self.lattice, &self.symbol)
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        self.lattice.check_same(u.lattice())?;
        GridField::new(&self.lattice, apply_symbol(&self.lattice, u.values(), &self.symbol))
    }

    pub fn descriptor(&self) -> OperatorDescriptor {
        OperatorDescriptor::Multiplier { lattice: self.lattice.clone(), s: self.s, kind: self.kind, scale: self.scale }
    }
}

/// DFT, multiply by the symbol, inverse DFT.
pub fn frac_laplacian_fourier(u: &GridField, op: &MultiplierOp) -> Result<GridField> {
    op.apply(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_is_annihilated() {
        let lat = LatticeSpec::new(2, 2.0, 16).unwrap();
        let op = MultiplierOp::homogeneous(&lat, 0.3);
        let out = frac_laplacian_fourier(&GridField::constant(&lat, 2.5), &op).unwrap();
        assert!(out.max_abs() < 1e-13);
    }

    #[test]
    fn fourier_mode_is_eigenfunction() {
        let lat = LatticeSpec::new(2, 2.0, 16).unwrap();
        let s = 0.4;
        let u = GridField::from_fn(&lat, |x| (2.0 * PI * (3.0 * x[0] - 1.0 * x[1]) / 2.0).cos());
        let out = frac_laplacian_fourier(&u, &MultiplierOp::homogeneous(&lat, s)).unwrap();
        let lambda = (PI * PI * 10.0f64).powf(s);
        for (a, b) in out.values().iter().zip(u.values()) {
            assert!((a - lambda * b).abs() < 1e-10);
        }
    }

    #[test]
    fn descriptor_serializes() {
        let lat = LatticeSpec::new(2, 4.0, 8).unwrap();
        let d = MultiplierOp::homogeneous(&lat, 0.5).scaled(1.1).descriptor();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"type\":\"multiplier\"") && text.contains("\"kind\":\"homogeneous\""));
        let back: OperatorDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
