use statrs::function::gamma::gamma;

use super::OperatorDescriptor;
use crate::error::{Error, Result};
use crate::lattice::{apply_symbol, GridField, LatticeSpec};
use crate::quadrature::gauss_legendre_on;

/// Inverse of the homogeneous fractional Laplacian through the heat semigroup,
/// `u = (1/Gamma(s)) int_0^inf e^{t Delta} g t^{s-1} dt`.
///
/// Time is discretized in `log t` with Gauss-Legendre on two branches split at
/// `t = 1`. Below `t_min` the integrand is summed in closed form; beyond
/// `t_max` it is dropped and bounded by `tail_bound`.
#[derive(Debug, Clone)]
pub struct HeatTransformOp {
    lattice: LatticeSpec,
    s: f64,
    nodes_per_branch: usize,
    times: Vec<f64>,
    weights: Vec<f64>,
    t_min: f64,
    t_max: f64,
    tail_bound: f64,
    symbol: Vec<f64>,
}

impl HeatTransformOp {
    pub fn new(lattice: &LatticeSpec, s: f64) -> Result<Self> {
        Self::with_nodes(lattice, s, 64)
    }

    pub fn with_nodes(lattice: &LatticeSpec, s: f64, nodes_per_branch: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidArgument(format!("s must lie in (0, 1), got {s}")));
        }
        if nodes_per_branch < 2 {
            return Err(Error::InvalidArgument("need at least two nodes per branch".into()));
        }
        let freq = lattice.frequency_sq();
        let a_min = freq.iter().cloned().filter(|&a| a > 0.0).fold(f64::INFINITY, f64::min);
        let a_max = freq.iter().cloned().fold(0.0, f64::max);
        let t_min = (1e-3 / a_max).min(0.5);
        let t_max = (50.0 / a_min).max(2.0);

        let mut times = Vec::with_capacity(2 * nodes_per_branch);
        let mut weights = Vec::with_capacity(2 * nodes_per_branch);
        for (lo, hi) in [(t_min.ln(), 0.0), (0.0, t_max.ln())] {
            let (tau, w) = gauss_legendre_on(nodes_per_branch, lo, hi);
            for (tau, w) in tau.into_iter().zip(w) {
                let t = tau.exp();
                times.push(t);
                weights.push(w * t.powf(s));
            }
        }
        let g = gamma(s);
        let tail_bound = t_max.powf(s - 1.0) * (-t_max * a_min).exp() / (a_min * g);

        let symbol = freq
            .iter()
            .map(|&a| {
                if a == 0.0 {
                    return 0.0;
                }
                let body: f64 = times.iter().zip(&weights).map(|(t, w)| w * (-t * a).exp()).sum();
                (body + small_time_series(a, t_min, s)) / g
            })
            .collect();
        Ok(Self { lattice: lattice.clone(), s, nodes_per_branch, times, weights, t_min, t_max, tail_bound, symbol })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Upper bound on the dropped `(t_max, inf)` contribution at the lowest mode.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Effective per-mode symbol of the quadrature (approximates `|xi|^{-2s}`).
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn descriptor(&self) -> OperatorDescriptor {
        OperatorDescriptor::HeatTransform {
            lattice: self.lattice.clone(),
            s: self.s,
            nodes_per_branch: self.nodes_per_branch,
            t_min: self.t_min,
            t_max: self.t_max,
        }
    }
}

/// `int_0^{t0} t^{s-1} e^{-t a} dt` by its power series.
fn small_time_series(a: f64, t0: f64, s: f64) -> f64 {
    let mut term = t0.powf(s);
    let mut sum = term / s;
    for j in 1..60 {
        term *= -a * t0 / j as f64;
        let add = term / (s + j as f64);
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Applies the time quadrature to a mean-zero field.
pub fn heat_transform(g: &GridField, op: &HeatTransformOp) -> Result<GridField> {
    op.lattice.check_same(g.lattice())?;
    let mean = g.mean();
    let scale = g.max_abs();
    if mean.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotMeanZero(mean));
    }
    GridField::new(&op.lattice, apply_symbol(&op.lattice, g.values(), &op.symbol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_symbol_inverts_power() {
        let lat = LatticeSpec::new(2, 4.0, 48).unwrap();
        for s in [0.2, 0.5, 0.85] {
            let op = HeatTransformOp::new(&lat, s).unwrap();
            let freq = lat.frequency_sq();
            let worst = freq
                .iter()
                .zip(op.symbol())
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, v)| (v * a.powf(s) - 1.0).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-8, "s = {s}: worst relative error {worst}");
            assert!(op.weights().iter().all(|&w| w > 0.0));
            assert!(op.tail_bound() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_mean_zero() {
        let lat = LatticeSpec::new(1, 1.0, 8).unwrap();
        let op = HeatTransformOp::new(&lat, 0.5).unwrap();
        assert!(matches!(heat_transform(&GridField::constant(&lat, 1.0), &op), Err(Error::NotMeanZero(_))));
        assert_eq!(heat_transform(&GridField::zeros(&lat), &op).unwrap().max_abs(), 0.0);
    }
}
