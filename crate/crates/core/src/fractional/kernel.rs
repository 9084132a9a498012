use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use super::OperatorDescriptor;
use crate::error::{Error, Result};
use crate::lattice::{apply_symbol, fft_forward, GridField, LatticeSpec};
use crate::quadrature::{cube_exterior_integral, cube_power_integral};

/// `4^s Gamma(n/2 + s) / (pi^{n/2} |Gamma(-s)|)`.
pub fn fractional_constant(n: usize, s: f64) -> f64 {
    let nh = 0.5 * n as f64;
    4f64.powf(s) * gamma(nh + s) / (PI.powf(nh) * gamma(-s).abs())
}

/// Singular-integral form `c_{n,s} sum_{y != x} (u(x) - u(y)) |x - y|^{-n-2s} h^n`
/// with nearest-image distances.
///
/// The corrected variant adds two terms: the missing near-field quadratic
/// moment (sum vs. integral of `|d|^{2-n-2s}` over the box, times the discrete
/// Laplacian) and the far field beyond the box, `c T (u(x) - mean u)`.
#[derive(Debug, Clone)]
pub struct KernelOp {
    lattice: LatticeSpec,
    s: f64,
    c_ns: f64,
    truncation_radius: f64,
    corrected: bool,
    far_field: f64,
    moment_defect: f64,
    weights: Vec<f64>,
    pair_weights: Vec<f64>,
    symbol: Vec<f64>,
}

impl KernelOp {
    /// Corrected kernel sum.
    pub fn new(lattice: &LatticeSpec, s: f64) -> Result<Self> {
        Self::build(lattice, s, true)
    }

    /// Plain nearest-image double sum.
    pub fn raw(lattice: &LatticeSpec, s: f64) -> Result<Self> {
        Self::build(lattice, s, false)
    }

    fn build(lattice: &LatticeSpec, s: f64, corrected: bool) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidArgument(format!("s must lie in (0, 1), got {s}")));
        }
        let n = lattice.dim();
        let nf = n as f64;
        let hn = lattice.cell_volume();
        let c_ns = fractional_constant(n, s);
        let weights: Vec<f64> = (0..lattice.num_nodes())
            .map(|off| {
                let r = lattice.offset_length(off);
                if off == 0 {
                    0.0
                } else {
                    r.powf(-nf - 2.0 * s)
                }
            })
            .collect();
        let half = 0.5 * lattice.box_len();
        let moment_sum: f64 = (1..lattice.num_nodes())
            .map(|off| lattice.offset_length(off).powf(2.0 - nf - 2.0 * s))
            .sum::<f64>()
            * hn;
        let moment_defect = cube_power_integral(n, half, 2.0 - 2.0 * s) - moment_sum;
        let far_field = cube_exterior_integral(n, half, s);

        // Both corrections are pair interactions: the far field is a constant
        // weight over every pair, the moment term a nearest-neighbour weight.
        let h = lattice.spacing();
        let pair_weights: Vec<f64> = if corrected {
            let constant = far_field / lattice.box_len().powi(n as i32);
            let nearest = moment_defect / (2.0 * nf * h * h * hn);
            (0..lattice.num_nodes())
                .map(|off| {
                    if off == 0 {
                        0.0
                    } else if (lattice.offset_length(off) - h).abs() < 1e-9 * h {
                        weights[off] + constant + nearest
                    } else {
                        weights[off] + constant
                    }
                })
                .collect()
        } else {
            weights.clone()
        };
        let w_hat = fft_forward(lattice, &weights);
        let total = w_hat[0].re;
        let symbol = (0..lattice.num_nodes())
            .map(|k| {
                let mut v = c_ns * hn * (total - w_hat[k].re);
                if corrected && k != 0 {
                    let lap: f64 = lattice
                        .frequency(k)
                        .iter()
                        .map(|xi| 4.0 / (h * h) * (0.5 * xi * h).sin().powi(2))
                        .sum();
                    v += c_ns * (far_field + moment_defect * lap / (2.0 * nf));
                }
                v
            })
            .collect();
        Ok(Self {
            lattice: lattice.clone(),
            s,
            c_ns,
            truncation_radius: half,
            corrected,
            far_field,
            moment_defect,
            weights,
            pair_weights,
            symbol,
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn c_ns(&self) -> f64 {
        self.c_ns
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn is_corrected(&self) -> bool {
        self.corrected
    }

    /// Far-field mass `int_{|d|_inf > L/2} |d|^{-n-2s}`.
    pub fn far_field(&self) -> f64 {
        self.far_field
    }

    /// Integral minus lattice sum of `|d|^{2-n-2s}` over the box.
    pub fn moment_defect(&self) -> f64 {
        self.moment_defect
    }

    /// Pair weights `|d|^{-n-2s}` indexed by flat offset (zero at the origin).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights `k(d)` with `(A u)(x) = c_{n,s} h^n sum_{y != x} k(x - y) (u(x) - u(y))`,
    /// including the corrections when present.
    pub fn pair_weights(&self) -> &[f64] {
        &self.pair_weights
    }

    /// Fourier symbol of the operator (exactly equivalent to the double sum).
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        self.lattice.check_same(u.lattice())?;
        GridField::new(&self.lattice, apply_symbol(&self.lattice, u.values(), &self.symbol))
    }

    /// Literal `O(N^2)` double loop, independent of the FFT route.
    pub fn apply_direct(&self, u: &GridField) -> Result<GridField> {
        self.lattice.check_same(u.lattice())?;
        let lat = &self.lattice;
        let vals = u.values();
        let hn = lat.cell_volume();
        let mean = u.mean();
        let h = lat.spacing();
        let nf = lat.dim() as f64;
        let out: Vec<f64> = (0..lat.num_nodes())
            .into_par_iter()
            .map(|x| {
                let mut acc = 0.0;
                for (y, &uy) in vals.iter().enumerate() {
                    if y != x {
                        acc += (vals[x] - uy) * self.weights[lat.offset_index(x, y)];
                    }
                }
                let mut v = self.c_ns * hn * acc;
                if self.corrected {
                    let idx = lat.multi_index(x);
                    let m = lat.pts_per_side();
                    let mut lap = 0.0;
                    for a in 0..idx.len() {
                        for step in [1, m - 1] {
                            let mut j = idx.clone();
                            j[a] = (j[a] + step) % m;
                            lap += vals[x] - vals[lat.flat_index(&j)];
                        }
                    }
                    lap /= h * h;
                    v += self.c_ns * (self.far_field * (vals[x] - mean) + self.moment_defect * lap / (2.0 * nf));
                }
                v
            })
            .collect();
        GridField::new(lat, out)
    }

    pub fn descriptor(&self) -> OperatorDescriptor {
        OperatorDescriptor::Kernel {
            lattice: self.lattice.clone(),
            s: self.s,
            c_ns: self.c_ns,
            truncation_radius: self.truncation_radius,
            corrected: self.corrected,
        }
    }
}

/// Applies the singular-integral operator.
pub fn frac_laplacian_kernel(u: &GridField, op: &KernelOp) -> Result<GridField> {
    op.apply(u)
}
