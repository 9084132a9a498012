//! Near-invisible potential pairs and epsilon sweeps.
//!
//! Perturbations of a background potential along directions that the
//! linearized DtN map barely sees produce pairs whose DtN maps differ by far
//! less than the potentials do. Sweeping the separation `eps` exposes how fast
//! the best achievable gap decays.

mod born;
mod pair;
mod sweep;

#[cfg(test)]
mod tests;

pub use born::{build_born, perturbation_basis, BornOperator, Candidate, PerturbationBasis};
pub use pair::{
    construct_pair, construct_pair_from, single_measurement, verify_membership, BudgetParams, InstabilityPair,
    PairMetadata,
};
pub use sweep::{largest_feasible, run_sweep, target_exponent, SweepConfig, SweepResult, SweepRow, Variant};
