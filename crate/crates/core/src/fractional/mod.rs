//! Discrete realizations of the fractional Laplacian.
//!
//! Every realization here is translation invariant on the periodic lattice, so
//! each one is fully described by a Fourier symbol. The Fourier multiplier is
//! the reference normalization; the singular-integral sum, the heat-semigroup
//! transform and the conductivity form are checked against it.

mod conductivity;
mod decay;
mod heat;
mod kernel;
mod multiplier;

pub use conductivity::{conductivity_bilinear, ConductivityForm};
pub use decay::{tangential_coefficient_decay, DecaySpectrum};
pub use heat::{heat_transform, HeatTransformOp};
pub use kernel::{frac_laplacian_kernel, fractional_constant, KernelOp};
pub use multiplier::{frac_laplacian_fourier, MultiplierOp, SymbolKind};

use serde::{Deserialize, Serialize};

use crate::lattice::LatticeSpec;

/// JSON descriptor of an operator, recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorDescriptor {
    Multiplier { lattice: LatticeSpec, s: f64, kind: SymbolKind, scale: f64 },
    Kernel { lattice: LatticeSpec, s: f64, c_ns: f64, truncation_radius: f64, corrected: bool },
    HeatTransform { lattice: LatticeSpec, s: f64, nodes_per_branch: usize, t_min: f64, t_max: f64 },
    Conductivity { lattice: LatticeSpec, s: f64, gamma_min: f64, gamma_max: f64 },
}
