//! Discrete L^p, Sobolev-Slobodeckij and Fourier H^s norms.

use rayon::prelude::*;

use super::{apply_symbol, FractionalSobolevParams, GridField, RegionMask};
use crate::error::{Error, Result};

/// `(sum_{x in region} |u(x)|^p h^n)^{1/p}`.
pub fn lp_norm(u: &GridField, p: f64, region: &RegionMask) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    if region.is_empty() {
        return Err(Error::InvalidRegion("empty region".into()));
    }
    u.lattice().check_same(region.lattice())?;
    let vals = u.values();
    if p.is_infinite() {
        return Ok(region.nodes().iter().fold(0.0, |m, &i| m.max(vals[i].abs())));
    }
    let s: f64 = region.nodes().iter().map(|&i| vals[i].abs().powf(p)).sum();
    Ok((s * u.lattice().cell_volume()).powf(1.0 / p))
}

/// Double-sum seminorm over region nodes with the diagonal excluded.
pub fn gagliardo_seminorm(u: &GridField, params: &FractionalSobolevParams) -> Result<f64> {
    let lat = u.lattice();
    lat.check_same(params.region.lattice())?;
    let nodes = params.region.nodes();
    let vals = u.values();
    let n = lat.dim() as f64;
    let expo = -(params.p * params.delta + n);
    let p = params.p;
    // rows summed in a fixed order so the result does not depend on the thread count
    let rows: Vec<f64> = nodes
        .par_iter()
        .map(|&x| {
            let ux = vals[x];
            nodes
                .iter()
                .filter(|&&y| y != x)
                .map(|&y| {
                    let diff = (ux - vals[y]).abs();
                    if diff == 0.0 {
                        0.0
                    } else {
                        diff.powf(p) * lat.distance(x, y).powf(expo)
                    }
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = rows.iter().sum();
    let h2n = lat.cell_volume() * lat.cell_volume();
    Ok((total * h2n).powf(1.0 / p))
}

/// `||u||_{L^p} + [u]_{W^{delta,p}}` on the parameter region.
pub fn gagliardo_norm(u: &GridField, params: &FractionalSobolevParams) -> Result<f64> {
    Ok(lp_norm(u, params.p, &params.region)? + gagliardo_seminorm(u, params)?)
}

/// Plancherel-weighted norm with weight `(1 + |xi|^2)^s` on the full box.
pub fn hs_norm_fourier(u: &GridField, s: f64) -> f64 {
    let lat = u.lattice();
    if s == 0.0 {
        let sq: f64 = u.values().iter().map(|v| v * v).sum();
        return (sq * lat.cell_volume()).sqrt();
    }
    let symbol: Vec<f64> = lat.frequency_sq().iter().map(|&x| (1.0 + x).powf(s)).collect();
    let su = apply_symbol(lat, u.values(), &symbol);
    let q: f64 = u.values().iter().zip(&su).map(|(a, b)| a * b).sum();
    (q.max(0.0) * lat.cell_volume()).sqrt()
}
