use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

/// Symmetric positive-definite lateral metric sampled at every lattice node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    dim: usize,
    entries: Vec<f64>,
}

impl MetricField {
    pub fn identity(lattice: &LatticeSpec) -> Self {
        let n = lattice.dim();
        let mut entries = vec![0.0; lattice.num_nodes() * n * n];
        for node in entries.chunks_mut(n * n) {
            for i in 0..n {
                node[i * n + i] = 1.0;
            }
        }
        Self { dim: n, entries }
    }

    /// Samples `f(x)` (row-major `n x n`) at every node; rejects asymmetric samples.
    pub fn from_fn<F>(lattice: &LatticeSpec, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let n = lattice.dim();
        let mut entries = Vec::with_capacity(lattice.num_nodes() * n * n);
        for node in 0..lattice.num_nodes() {
            let a = f(&lattice.coord(node));
            if a.len() != n * n {
                return Err(Error::DimensionMismatch { expected: n * n, got: a.len() });
            }
            for i in 0..n {
                for j in 0..i {
                    if (a[i * n + j] - a[j * n + i]).abs() > 1e-14 * (a[i * n + j].abs() + 1.0) {
                        return Err(Error::InvalidArgument(format!("metric is not symmetric at node {node}")));
                    }
                }
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite metric at node {node}")));
            }
            entries.extend(a);
        }
        Ok(Self { dim: n, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let k = self.dim * self.dim;
        &self.entries[node * k..(node + 1) * k]
    }

    pub fn num_nodes(&self) -> usize {
        self.entries.len() / (self.dim * self.dim)
    }

    pub fn is_identity(&self) -> bool {
        let n = self.dim;
        self.entries.chunks(n * n).all(|a| (0..n * n).all(|k| a[k] == if k % (n + 1) == 0 { 1.0 } else { 0.0 }))
    }

    /// Smallest and largest eigenvalue over all nodes.
    pub fn eigen_range(&self) -> (f64, f64) {
        let n = self.dim;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in self.entries.chunks(n * n) {
            let m = DMatrix::from_row_slice(n, n, a);
            for v in m.symmetric_eigenvalues().iter() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        (lo, hi)
    }
}

/// Lateral lattice times a graded height grid `0 = z_0 < ... < z_K = Z`.
///
/// The vertical direction uses piecewise linear elements with the weight
/// `z^{1-2s}` integrated exactly: `stiffness[e] = int_e z^{1-2s} dz / |e|^2`
/// and `mass[j] = int z^{1-2s} phi_j dz` (lumped). `u(Z) = 0`.
#[derive(Debug, Clone)]
pub struct CylinderGrid {
    lattice: LatticeSpec,
    s: f64,
    heights: Vec<f64>,
    stiffness: Vec<f64>,
    mass: Vec<f64>,
    metric: MetricField,
    ellipticity: f64,
}

pub const GRADING_OFFSET: f64 = 0.1;

/// Grading exponent `max(1 / (1 - s + 0.1), 3 / (2s))`. The first term follows the
/// `z^s` behaviour of the eigenfunctions; the second is needed for the `z^{2s}`
/// term of extensions when `s < 1/2`.
pub fn grading_exponent(s: f64) -> f64 {
    (1.0 / (1.0 - s + GRADING_OFFSET)).max(1.5 / s)
}

/// `z_j = Z (j / K)^p` with `p` from [`grading_exponent`].
pub fn graded_heights(height: f64, levels: usize, s: f64) -> Vec<f64> {
    let p = grading_exponent(s);
    (0..=levels).map(|j| height * (j as f64 / levels as f64).powf(p)).collect()
}

fn power_integral(alpha: f64, a: f64, b: f64) -> f64 {
    (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / (alpha + 1.0)
}

impl CylinderGrid {
    /// Default grid: height four box lengths, 64 levels.
    pub fn standard(lattice: &LatticeSpec, s: f64) -> Result<Self> {
        Self::new(lattice, s, 4.0 * lattice.box_len(), 64)
    }

    pub fn new(lattice: &LatticeSpec, s: f64, height: f64, levels: usize) -> Result<Self> {
        if !(height > 0.0) || levels < 2 {
            return Err(Error::InvalidArgument(format!("need height > 0 and at least 2 levels, got {height}, {levels}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidArgument(format!("s must lie in (0, 1), got {s}")));
        }
        Self::from_heights(lattice, s, graded_heights(height, levels, s))
    }

    pub fn from_heights(lattice: &LatticeSpec, s: f64, heights: Vec<f64>) -> Result<Self> {
        if heights.len() < 3 || heights[0] != 0.0 || heights.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("heights must start at 0 and increase strictly".into()));
        }
        let alpha = 1.0 - 2.0 * s;
        let k = heights.len() - 1;
        let mut stiffness = Vec::with_capacity(k);
        let mut mass = vec![0.0; k + 1];
        for e in 0..k {
            let (a, b) = (heights[e], heights[e + 1]);
            let d = b - a;
            let i0 = power_integral(alpha, a, b);
            let i1 = power_integral(alpha + 1.0, a, b);
            stiffness.push(i0 / (d * d));
            mass[e] += (b * i0 - i1) / d;
            mass[e + 1] += (i1 - a * i0) / d;
        }
        Ok(Self {
            lattice: lattice.clone(),
            s,
            heights,
            stiffness,
            mass,
            metric: MetricField::identity(lattice),
            ellipticity: 1.0,
        })
    }

    /// Installs a lateral metric whose eigenvalues must lie in `[lambda, 1/lambda]`.
    pub fn with_metric(mut self, metric: MetricField, lambda: f64) -> Result<Self> {
        if metric.dim() != self.lattice.dim() || metric.num_nodes() != self.lattice.num_nodes() {
            return Err(Error::LatticeMismatch);
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidArgument(format!("ellipticity must lie in (0, 1], got {lambda}")));
        }
        let (lo, hi) = metric.eigen_range();
        if lo < lambda * (1.0 - 1e-12) || hi > (1.0 + 1e-12) / lambda {
            return Err(Error::InvalidArgument(format!(
                "metric eigenvalues [{lo:.4}, {hi:.4}] leave [{lambda}, {}]",
                1.0 / lambda
            )));
        }
        self.metric = metric;
        self.ellipticity = lambda;
        Ok(self)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    /// Number of unknown levels `K` (level `K` is the zero top).
    pub fn levels(&self) -> usize {
        self.heights.len() - 1
    }

    pub fn height(&self) -> f64 {
        *self.heights.last().unwrap()
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    /// Tridiagonal vertical operator for lateral eigenvalue `rho` on levels `from..K`.
    pub(crate) fn mode_tridiagonal(&self, rho: f64, from: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.levels();
        let diag = (from..k)
            .map(|j| {
                let below = if j > 0 { self.stiffness[j - 1] } else { 0.0 };
                self.mass[j] * rho + below + self.stiffness[j]
            })
            .collect();
        let off = (from..k.saturating_sub(1)).map(|j| -self.stiffness[j]).collect();
        (diag, off)
    }

    /// Weighted Dirichlet-to-Neumann value of one lateral mode: the Schur
    /// complement onto level 0 of the vertical operator.
    pub fn mode_symbol(&self, rho: f64) -> f64 {
        let (diag, _) = self.mode_tridiagonal(rho, 0);
        let mut d = *diag.last().unwrap();
        for j in (0..diag.len() - 1).rev() {
            d = diag[j] - self.stiffness[j] * self.stiffness[j] / d;
        }
        d
    }

    /// Vertical profile at levels `0..=K` for unit trace and lateral eigenvalue `rho`.
    pub fn mode_profile(&self, rho: f64) -> Vec<f64> {
        let (diag, _) = self.mode_tridiagonal(rho, 0);
        let k = diag.len();
        let mut d = vec![0.0; k];
        d[k - 1] = diag[k - 1];
        for j in (0..k - 1).rev() {
            d[j] = diag[j] - self.stiffness[j] * self.stiffness[j] / d[j + 1];
        }
        let mut u = vec![0.0; k + 1];
        u[0] = 1.0;
        for j in 1..k {
            u[j] = self.stiffness[j - 1] * u[j - 1] / d[j];
        }
        u
    }

    /// Weighted `L^2` mass fraction above `Z/2` of the slowest decaying nonzero lateral mode.
    pub fn tail_estimate(&self) -> f64 {
        let xi = 2.0 * std::f64::consts::PI / self.lattice.box_len();
        let u = self.mode_profile(xi * xi);
        let half = 0.5 * self.height();
        let (mut top, mut all) = (0.0, 0.0);
        for (j, v) in u.iter().enumerate().take(self.levels()) {
            let w = self.mass[j] * v * v;
            all += w;
            if self.heights[j] > half {
                top += w;
            }
        }
        top / all
    }
}
