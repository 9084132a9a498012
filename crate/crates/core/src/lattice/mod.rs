//! Periodic lattice model of R^n.
//!
//! The ambient space is a periodic box `[-L/2, L/2)^n` sampled at `M` points
//! per side. Node `i` along an axis sits at the cell center
//! `-L/2 + (i + 1/2) h`, so the node set is symmetric under `x -> -x`.
//! Regions (Omega, Omega', W) are node masks; fields are flat row-major
//! arrays with the last axis varying fastest.
//!
//! The box size is a convergence knob: the continuum problem lives on R^n,
//! and every quantity computed here is the periodic approximation of it.

mod fft;
mod geometry;
mod gram;
mod norms;

pub use fft::{apply_symbol, convolution_kernel, fft_forward, fft_inverse};
pub use geometry::{GeometryFile, RegionSpec, ShapeSpec};
pub use gram::{build_gram, dual_norm, op_norm, op_norm_between, SobolevGram};
pub use norms::{gagliardo_norm, gagliardo_seminorm, hs_norm_fourier, lp_norm};

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic grid standing in for R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeRepr", into = "LatticeRepr")]
pub struct LatticeSpec {
    n: usize,
    box_len: f64,
    pts_per_side: usize,
    spacing: f64,
}

#[derive(Serialize, Deserialize)]
struct LatticeRepr {
    n: usize,
    box_len: f64,
    pts_per_side: usize,
}

impl TryFrom<LatticeRepr> for LatticeSpec {
    type Error = Error;
    fn try_from(r: LatticeRepr) -> Result<Self> {
        LatticeSpec::new(r.n, r.box_len, r.pts_per_side)
    }
}

impl From<LatticeSpec> for LatticeRepr {
    fn from(l: LatticeSpec) -> Self {
        LatticeRepr { n: l.n, box_len: l.box_len, pts_per_side: l.pts_per_side }
    }
}

impl LatticeSpec {
    /// `box_len` is re-derived as `h * M` so that the stored pair is exact.
    pub fn new(n: usize, box_len: f64, pts_per_side: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidLattice("dimension must be >= 1".into()));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return Err(Error::InvalidLattice(format!("box length must be positive, got {box_len}")));
        }
        if pts_per_side < 2 || pts_per_side % 2 != 0 {
            return Err(Error::InvalidLattice(format!(
                "points per side must be even and >= 2, got {pts_per_side}"
            )));
        }
        let total = (pts_per_side as u128).checked_pow(n as u32);
        if total.map_or(true, |t| t > (1u128 << 26)) {
            return Err(Error::InvalidLattice("lattice too large".into()));
        }
        let spacing = box_len / pts_per_side as f64;
        Ok(Self { n, box_len: spacing * pts_per_side as f64, pts_per_side, spacing })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    pub fn pts_per_side(&self) -> usize {
        self.pts_per_side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `h^n`, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.n as i32)
    }

    pub fn num_nodes(&self) -> usize {
        self.pts_per_side.pow(self.n as u32)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let m = self.pts_per_side;
        let mut idx = vec![0; self.n];
        for a in (0..self.n).rev() {
            idx[a] = flat % m;
            flat /= m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.pts_per_side + i)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -0.5 * self.box_len + (i as f64 + 0.5) * self.spacing
    }

    pub fn coord(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).into_iter().map(|i| self.axis_coord(i)).collect()
    }

    /// Signed integer wavenumber of DFT index `i`, in `{-M/2, ..., M/2 - 1}`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let m = self.pts_per_side as i64;
        let i = i as i64;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    /// Angular frequency vector `2 pi k / L` of the flat DFT index.
    pub fn frequency(&self, flat: usize) -> Vec<f64> {
        let scale = 2.0 * PI / self.box_len;
        self.multi_index(flat).into_iter().map(|i| scale * self.wavenumber(i) as f64).collect()
    }

    /// `|xi|^2` for every DFT index, in flat order.
    pub fn frequency_sq(&self) -> Vec<f64> {
        let scale = 2.0 * PI / self.box_len;
        let axis: Vec<f64> = (0..self.pts_per_side)
            .map(|i| {
                let k = scale * self.wavenumber(i) as f64;
                k * k
            })
            .collect();
        (0..self.num_nodes())
            .map(|flat| self.multi_index(flat).iter().map(|&i| axis[i]).sum())
            .collect()
    }

    /// Per-axis periodic displacement `a - b` in lattice units, mapped into `[-M/2, M/2)`.
    pub fn displacement(&self, a: usize, b: usize) -> Vec<i64> {
        let m = self.pts_per_side as i64;
        let ia = self.multi_index(a);
        let ib = self.multi_index(b);
        ia.iter()
            .zip(&ib)
            .map(|(&x, &y)| {
                let d = (x as i64 - y as i64).rem_euclid(m);
                if d >= m / 2 {
                    d - m
                } else {
                    d
                }
            })
            .collect()
    }

    /// Torus distance between two nodes in physical units.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let d2: f64 = self.displacement(a, b).iter().map(|&d| (d * d) as f64).sum();
        d2.sqrt() * self.spacing
    }

    /// Flat index of `(a - b) mod M`, used to look up convolution kernels.
    pub fn offset_index(&self, a: usize, b: usize) -> usize {
        let m = self.pts_per_side;
        let ia = self.multi_index(a);
        let ib = self.multi_index(b);
        ia.iter().zip(&ib).fold(0, |acc, (&x, &y)| acc * m + (x + m - y) % m)
    }

    /// Torus length of the displacement encoded by a flat offset index.
    pub fn offset_length(&self, offset: usize) -> f64 {
        let d2: f64 = self
            .multi_index(offset)
            .into_iter()
            .map(|i| {
                let k = self.wavenumber(i) as f64;
                k * k
            })
            .sum();
        d2.sqrt() * self.spacing
    }

    pub(crate) fn check_same(&self, other: &LatticeSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }
}

/// Role of a region inside a problem geometry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum RegionLabel {
    Omega,
    OmegaPrime,
    W,
    Custom(String),
}

impl From<String> for RegionLabel {
    fn from(s: String) -> Self {
        match s.as_str() {
            "omega" | "Omega" => RegionLabel::Omega,
            "omega_prime" | "OmegaPrime" => RegionLabel::OmegaPrime,
            "w" | "W" => RegionLabel::W,
            _ => RegionLabel::Custom(s),
        }
    }
}

impl From<RegionLabel> for String {
    fn from(l: RegionLabel) -> Self {
        l.to_string()
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionLabel::Omega => f.write_str("omega"),
            RegionLabel::OmegaPrime => f.write_str("omega_prime"),
            RegionLabel::W => f.write_str("w"),
            RegionLabel::Custom(s) => f.write_str(s),
        }
    }
}

/// Nonempty set of lattice nodes. Connectivity is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    lattice: LatticeSpec,
    nodes: Vec<usize>,
    label: RegionLabel,
}

impl RegionMask {
    pub fn from_nodes(lattice: &LatticeSpec, mut nodes: Vec<usize>, label: RegionLabel) -> Result<Self> {
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::InvalidRegion(format!("region '{label}' is empty")));
        }
        if *nodes.last().unwrap() >= lattice.num_nodes() {
            return Err(Error::InvalidRegion(format!("region '{label}' has out-of-range nodes")));
        }
        Ok(Self { lattice: lattice.clone(), nodes, label })
    }

    /// Nodes whose center satisfies `pred`.
    pub fn from_predicate<F>(lattice: &LatticeSpec, label: RegionLabel, pred: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> bool,
    {
        let nodes = (0..lattice.num_nodes()).filter(|&i| pred(&lattice.coord(i))).collect();
        Self::from_nodes(lattice, nodes, label)
    }

    /// Axis-aligned box `lo < x < hi`, center-in rule.
    pub fn rect(lattice: &LatticeSpec, lo: &[f64], hi: &[f64], label: RegionLabel) -> Result<Self> {
        if lo.len() != lattice.dim() || hi.len() != lattice.dim() {
            return Err(Error::DimensionMismatch { expected: lattice.dim(), got: lo.len().min(hi.len()) });
        }
        Self::from_predicate(lattice, label, |x| {
            x.iter().zip(lo).zip(hi).all(|((&xi, &l), &h)| xi > l && xi < h)
        })
    }

    /// Open ball, center-in rule.
    pub fn ball(lattice: &LatticeSpec, center: &[f64], radius: f64, label: RegionLabel) -> Result<Self> {
        if center.len() != lattice.dim() {
            return Err(Error::DimensionMismatch { expected: lattice.dim(), got: center.len() });
        }
        Self::from_predicate(lattice, label, |x| {
            x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < radius * radius
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self) -> &RegionLabel {
        &self.label
    }

    pub fn with_label(mut self, label: RegionLabel) -> Self {
        self.label = label;
        self
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// Position of `node` inside the sorted node list.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.nodes.iter().all(|&n| other.contains(n))
    }

    pub fn is_disjoint(&self, other: &RegionMask) -> bool {
        self.nodes.iter().all(|&n| !other.contains(n))
    }

    /// Union of two masks on the same lattice.
    pub fn union(&self, other: &RegionMask, label: RegionLabel) -> Result<Self> {
        self.lattice.check_same(&other.lattice)?;
        let mut nodes = self.nodes.clone();
        nodes.extend_from_slice(&other.nodes);
        Self::from_nodes(&self.lattice, nodes, label)
    }

    /// Per-axis minimum and maximum node index (no periodic wrap).
    pub fn index_bounds(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.lattice.dim();
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0; n];
        for &node in &self.nodes {
            for (a, i) in self.lattice.multi_index(node).into_iter().enumerate() {
                lo[a] = lo[a].min(i);
                hi[a] = hi[a].max(i);
            }
        }
        (lo, hi)
    }

    /// Physical distance from `x` to the closest node outside the region,
    /// minus half a cell; a discrete stand-in for `dist(x, boundary)`.
    pub fn distance_to_complement(&self, x: &[f64]) -> f64 {
        let h = self.lattice.spacing();
        let l = self.lattice.box_len();
        let mut best = f64::INFINITY;
        for node in 0..self.lattice.num_nodes() {
            if self.contains(node) {
                continue;
            }
            let c = self.lattice.coord(node);
            let d2: f64 = c
                .iter()
                .zip(x)
                .map(|(a, b)| {
                    let mut d = (a - b).abs() % l;
                    if d > 0.5 * l {
                        d = l - d;
                    }
                    d * d
                })
                .sum();
            best = best.min(d2.sqrt());
        }
        (best - 0.5 * h).max(0.0)
    }
}

/// Real-valued sample on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    lattice: LatticeSpec,
    values: Vec<f64>,
    support_hint: Option<RegionMask>,
}

impl GridField {
    pub fn new(lattice: &LatticeSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.num_nodes() {
            return Err(Error::DimensionMismatch { expected: lattice.num_nodes(), got: values.len() });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite field value at node {bad}")));
        }
        Ok(Self { lattice: lattice.clone(), values, support_hint: None })
    }

    pub fn zeros(lattice: &LatticeSpec) -> Self {
        Self { lattice: lattice.clone(), values: vec![0.0; lattice.num_nodes()], support_hint: None }
    }

    pub fn constant(lattice: &LatticeSpec, c: f64) -> Self {
        Self { lattice: lattice.clone(), values: vec![c; lattice.num_nodes()], support_hint: None }
    }

    pub fn from_fn<F>(lattice: &LatticeSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64,
    {
        let values = (0..lattice.num_nodes()).map(|i| f(&lattice.coord(i))).collect();
        Self { lattice: lattice.clone(), values, support_hint: None }
    }

    /// Values on `region` (in region order), zero elsewhere.
    pub fn from_region_values(region: &RegionMask, vals: &[f64]) -> Result<Self> {
        if vals.len() != region.len() {
            return Err(Error::DimensionMismatch { expected: region.len(), got: vals.len() });
        }
        let mut values = vec![0.0; region.lattice().num_nodes()];
        for (&node, &v) in region.nodes().iter().zip(vals) {
            values[node] = v;
        }
        let f = Self::new(region.lattice(), values)?;
        f.with_support(region.clone())
    }

    /// Indicator of a single node.
    pub fn indicator(lattice: &LatticeSpec, node: usize) -> Self {
        let mut f = Self::zeros(lattice);
        f.values[node] = 1.0;
        f
    }

    /// Attaches a support hint; fails if the field does not vanish outside it.
    pub fn with_support(mut self, region: RegionMask) -> Result<Self> {
        self.lattice.check_same(region.lattice())?;
        if let Some(i) = (0..self.values.len()).find(|&i| self.values[i] != 0.0 && !region.contains(i)) {
            return Err(Error::InvalidArgument(format!(
                "field is nonzero at node {i} outside region '{}'",
                region.label()
            )));
        }
        self.support_hint = Some(region);
        Ok(self)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn support_hint(&self) -> Option<&RegionMask> {
        self.support_hint.as_ref()
    }

    pub fn restrict(&self, region: &RegionMask) -> Vec<f64> {
        region.nodes().iter().map(|&i| self.values[i]).collect()
    }

    /// Zeroes every value outside `region`.
    pub fn masked(&self, region: &RegionMask) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for &i in region.nodes() {
            values[i] = self.values[i];
        }
        Self { lattice: self.lattice.clone(), values, support_hint: Some(region.clone()) }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            lattice: self.lattice.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            support_hint: None,
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &GridField, f: F) -> Result<Self> {
        self.lattice.check_same(&other.lattice)?;
        Ok(Self {
            lattice: self.lattice.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            support_hint: None,
        })
    }

    pub fn add(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Discrete L^2 inner product `sum u v h^n`.
    pub fn dot(&self, other: &GridField) -> Result<f64> {
        self.lattice.check_same(&other.lattice)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.lattice.cell_volume())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Exponents and region of a Sobolev-Slobodeckij norm `W^{delta,p}`.
#[derive(Debug, Clone)]
pub struct FractionalSobolevParams {
    pub delta: f64,
    pub p: f64,
    pub region: RegionMask,
}

impl FractionalSobolevParams {
    pub fn new(delta: f64, p: f64, region: RegionMask) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
        }
        Ok(Self { delta, p, region })
    }

    /// Whether `p` is admissible for the potential class at fractional order `s`.
    pub fn admissible_for(&self, s: f64) -> bool {
        self.p >= self.region.lattice().dim() as f64 / (2.0 * s) - 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_times_points_is_box_length() {
        for (l, m) in [(4.0, 48), (1.0, 10), (3.7, 64), (0.1, 6)] {
            let lat = LatticeSpec::new(2, l, m).unwrap();
            assert_eq!(lat.spacing() * m as f64, lat.box_len());
        }
    }

    #[test]
    fn rejects_odd_or_empty_lattices() {
        assert!(LatticeSpec::new(2, 1.0, 7).is_err());
        assert!(LatticeSpec::new(0, 1.0, 8).is_err());
        assert!(LatticeSpec::new(2, -1.0, 8).is_err());
    }

    #[test]
    fn frequency_grid_matches_wavenumbers() {
        let lat = LatticeSpec::new(1, 2.0, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| lat.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        let f = lat.frequency(5);
        assert!((f[0] - 2.0 * PI * -3.0 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn nodes_are_symmetric_about_origin() {
        let lat = LatticeSpec::new(1, 4.0, 12).unwrap();
        for i in 0..12 {
            assert!((lat.axis_coord(i) + lat.axis_coord(11 - i)).abs() < 1e-14);
        }
    }

    #[test]
    fn torus_distance_wraps() {
        let lat = LatticeSpec::new(1, 1.0, 10).unwrap();
        assert!((lat.distance(0, 9) - 0.1).abs() < 1e-14);
        assert!((lat.distance(0, 5) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn region_set_operations() {
        let lat = LatticeSpec::new(2, 4.0, 16).unwrap();
        let omega = RegionMask::rect(&lat, &[-1.0, -1.0], &[1.0, 1.0], RegionLabel::Omega).unwrap();
        let inner = RegionMask::rect(&lat, &[-0.5, -0.5], &[0.5, 0.5], RegionLabel::OmegaPrime).unwrap();
        let w = RegionMask::rect(&lat, &[1.2, -0.5], &[1.8, 0.5], RegionLabel::W).unwrap();
        assert!(inner.is_subset_of(&omega));
        assert!(omega.is_disjoint(&w));
        assert_eq!(omega.len(), 64);
        assert!(RegionMask::rect(&lat, &[5.0, 5.0], &[6.0, 6.0], RegionLabel::W).is_err());
    }

    #[test]
    fn support_hint_is_enforced() {
        let lat = LatticeSpec::new(1, 1.0, 8).unwrap();
        let r = RegionMask::from_nodes(&lat, vec![2, 3], RegionLabel::W).unwrap();
        let ok = GridField::from_region_values(&r, &[1.0, 2.0]).unwrap();
        assert_eq!(ok.values()[3], 2.0);
        let bad = GridField::indicator(&lat, 0);
        assert!(bad.with_support(r).is_err());
    }

    #[test]
    fn lattice_serde_roundtrip() {
        let lat = LatticeSpec::new(2, 4.0, 48).unwrap();
        let s = serde_json::to_string(&lat).unwrap();
        assert_eq!(s, r#"{"n":2,"box_len":4.0,"pts_per_side":48}"#);
        let back: LatticeSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, lat);
    }
}
