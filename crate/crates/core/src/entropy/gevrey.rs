//! Truncated Gevrey-type norms built from discrete `H^l` norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{fft_forward, GridField, RegionMask};

/// Last-term share of the truncated sum above which the truncation is flagged.
pub const GEVREY_TRUNCATION_WARNING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevreyParams {
    pub sigma: f64,
    pub rho: f64,
    pub ell_max: usize,
}

impl GevreyParams {
    pub fn new(sigma: f64, rho: f64, ell_max: usize) -> Result<Self> {
        if !(sigma >= 1.0) || !(rho > 0.0) || ell_max < 4 {
            return Err(Error::InvalidArgument(format!(
                "need sigma >= 1, rho > 0, ell_max >= 4; got {sigma}, {rho}, {ell_max}"
            )));
        }
        Ok(Self { sigma, rho, ell_max })
    }

    /// `ell_max = 24`.
    pub fn with_default_order(sigma: f64, rho: f64) -> Result<Self> {
        Self::new(sigma, rho, 24)
    }

    /// `exp(-2 l rho - 2 sigma l log(l + 1))`, as a logarithm.
    fn log_weight(&self, l: usize) -> f64 {
        let l = l as f64;
        -2.0 * l * self.rho - 2.0 * self.sigma * l * (l + 1.0).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevreyReport {
    pub norm: f64,
    /// Share of the squared norm carried by the `l = ell_max` term.
    pub last_ratio: f64,
    /// Squared weighted terms `l = 0..=ell_max`.
    pub terms: Vec<f64>,
    pub warning: Option<String>,
}

impl GevreyReport {
    pub fn converged(&self) -> bool {
        self.warning.is_none()
    }
}

/// `(sum_l w_l ||u||_{H^l}^2)^{1/2}` for `u` restricted to `window`, where
/// `||u||_{H^l}^2 = h^n sum_x u (1 + |D|^2)^l u` on the periodic box.
pub fn gevrey_norm(u: &GridField, window: &RegionMask, params: &GevreyParams) -> Result<GevreyReport> {
    let lat = u.lattice();
    lat.check_same(window.lattice())?;
    let windowed = u.masked(window);
    let hat = fft_forward(lat, windowed.values());
    let freq = lat.frequency_sq();
    let scale = lat.cell_volume() / lat.num_nodes() as f64;
    let power: Vec<(f64, f64)> = hat
        .iter()
        .zip(&freq)
        .filter(|(c, _)| c.norm_sqr() > 0.0)
        .map(|(c, x)| ((1.0 + x).ln(), (c.norm_sqr() * scale).ln()))
        .collect();
    if power.is_empty() {
        return Ok(GevreyReport { norm: 0.0, last_ratio: 0.0, terms: vec![0.0; params.ell_max + 1], warning: None });
    }
    let log_terms: Vec<f64> = (0..=params.ell_max)
        .map(|l| params.log_weight(l) + log_sum_exp(power.iter().map(|(lw, lp)| lp + l as f64 * lw)))
        .collect();
    let log_total = log_sum_exp(log_terms.iter().copied());
    let last_ratio = (log_terms[params.ell_max] - log_total).exp();
    let warning = (last_ratio > GEVREY_TRUNCATION_WARNING).then(|| {
        let msg = format!("truncation share {last_ratio:.3e}: increase ell_max or rho");
        log::warn!("{msg}");
        msg
    });
    Ok(GevreyReport {
        norm: (0.5 * log_total).exp(),
        last_ratio,
        terms: log_terms.iter().map(|t| t.exp()).collect(),
        warning,
    })
}

fn log_sum_exp<I: Iterator<Item = f64> + Clone>(it: I) -> f64 {
    let top = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + it.map(|v| (v - top).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{hs_norm_fourier, LatticeSpec, RegionLabel};

    fn setup(m: usize) -> (LatticeSpec, RegionMask) {
        let lat = LatticeSpec::new(2, 2.0, m).unwrap();
        let win = RegionMask::ball(&lat, &[0.0, 0.0], 0.6, RegionLabel::OmegaPrime).unwrap();
        (lat, win)
    }

    /// `exp(-1 / (1 - r^2))` style bump of radius 0.5, a Gevrey class 2 function.
    fn bump(lat: &LatticeSpec) -> GridField {
        GridField::from_fn(lat, |x| {
            let r2 = (x[0] * x[0] + x[1] * x[1]) / 0.25;
            if r2 < 1.0 {
                (-1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        })
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let (lat, win) = setup(32);
        let p = GevreyParams::with_default_order(1.0, 1.0).unwrap();
        let r = gevrey_norm(&GridField::zeros(&lat), &win, &p).unwrap();
        assert_eq!(r.norm, 0.0);
        assert!(r.converged());
    }

    #[test]
    fn terms_match_sobolev_norms() {
        let (lat, win) = setup(32);
        let u = bump(&lat);
        let p = GevreyParams::new(1.5, 0.7, 6).unwrap();
        let r = gevrey_norm(&u, &win, &p).unwrap();
        for l in 0..=6 {
            let h = hs_norm_fourier(&u.masked(&win), l as f64);
            let expected = p.log_weight(l).exp() * h * h;
            assert!((r.terms[l] / expected - 1.0).abs() < 1e-10, "l = {l}");
        }
        assert!(r.norm >= hs_norm_fourier(&u.masked(&win), 0.0));
    }

    #[test]
    fn monotone_in_rho() {
        let (lat, win) = setup(32);
        let u = bump(&lat);
        let mut last = f64::INFINITY;
        for rho in [0.1, 0.3, 0.5, 1.0, 2.0] {
            let r = gevrey_norm(&u, &win, &GevreyParams::with_default_order(2.0, rho).unwrap()).unwrap();
            assert!(r.norm <= last);
            last = r.norm;
        }
    }

    #[test]
    fn gevrey_two_bump_converges_only_for_sigma_two() {
        let (lat, win) = setup(64);
        let u = bump(&lat);
        let fine = gevrey_norm(&u, &win, &GevreyParams::with_default_order(2.0, 1.0).unwrap()).unwrap();
        assert!(fine.converged(), "share {}", fine.last_ratio);
        let coarse = gevrey_norm(&u, &win, &GevreyParams::with_default_order(1.0, 0.05).unwrap()).unwrap();
        assert!(!coarse.converged(), "share {}", coarse.last_ratio);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(GevreyParams::new(0.5, 1.0, 24).is_err());
        assert!(GevreyParams::new(1.0, 0.0, 24).is_err());
        assert!(GevreyParams::new(1.0, 1.0, 3).is_err());
    }
}
