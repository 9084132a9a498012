//! Weighted extension in the upper half space: Bessel eigenbasis of the
//! cylinder, Weyl counting, and a finite-difference extension solver.

mod bessel;
mod caccioppoli;
mod eigen;
mod grid;
mod solver;

pub use bessel::{bessel_j, bessel_zeros, BesselOrder, SERIES_SWITCH, X_MAX};
pub use caccioppoli::{caccioppoli_verify, CaccioppoliReport};
pub use eigen::{
    build_eigensystem, embedding_singular_values, mask_dirichlet_laplacian, weyl_count, weyl_slope,
    CylinderEigenSystem, EigenPair, EmbeddingSpectrum, LateralDomain,
};
pub use grid::{graded_heights, grading_exponent, CylinderGrid, MetricField, GRADING_OFFSET};
pub use solver::{
    solve_extension_fd, ExtensionField, ExtensionProblem, ExtensionSolution, ExtensionSolver, TAIL_WARNING,
};
