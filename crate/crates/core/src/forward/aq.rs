use serde::{Deserialize, Serialize};

use super::ForwardModel;
use crate::error::Result;
use crate::lattice::GridField;
use crate::linalg::sym_eigen;
use crate::provenance::hash_f64s;

/// Certificate that zero stays away from the interior spectrum on an `L^{n/2s}` ball.
///
/// A perturbation `d` with `||d||_{L^p(Omega)} <= r0` shifts the interior
/// matrix by `diag(d)`, whose spectral norm is at most `max |d| <= h^{-n/p} ||d||_p`.
/// That nodal bound is the embedding constant used here; `kappa` is a safety factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AqCertificate {
    pub qbar_hash: String,
    pub r0: f64,
    pub kappa: f64,
    pub p: f64,
    /// Smallest singular value of the interior operator at `qbar`.
    pub margin: f64,
    pub embedding_constant: f64,
    pub embedding_method: String,
    pub threshold: f64,
    pub verdict: bool,
}

/// Default safety factor between the margin and the worst-case shift.
pub const DEFAULT_KAPPA: f64 = 2.0;

pub fn check_aq(model: &ForwardModel, qbar: &GridField, r0: f64, kappa: f64) -> Result<AqCertificate> {
    let geom = model.geometry();
    let restricted = model.restricted(qbar)?;
    let (vals, _) = sym_eigen(&restricted.matrix);
    let margin = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let p = geom.critical_p();
    let n = geom.lattice().dim() as f64;
    let embedding_constant = geom.lattice().spacing().powf(-n / p);
    let threshold = (kappa * r0 * embedding_constant).max(1e-12 * scale);
    Ok(AqCertificate {
        qbar_hash: hash_f64s(&restricted.q_omega),
        r0,
        kappa,
        p,
        margin,
        embedding_constant,
        embedding_method: "nodal sup bound h^(-n/p)".into(),
        threshold,
        verdict: margin > threshold,
    })
}

/// Summary of the domination ratios `||Gamma f|| / ||A f||`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub samples: usize,
    pub violations: usize,
    pub finite: bool,
}

impl DominationReport {
    pub fn from_ratios(ratios: Vec<f64>, violations: usize) -> Self {
        let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
        let mean_ratio = if ratios.is_empty() { 0.0 } else { ratios.iter().sum::<f64>() / ratios.len() as f64 };
        let finite = ratios.iter().all(|r| r.is_finite());
        Self { max_ratio, mean_ratio, samples: ratios.len(), violations, finite }
    }

    pub fn passed(&self) -> bool {
        self.finite && self.violations == 0
    }
}
