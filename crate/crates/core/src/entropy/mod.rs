//! Entropy numbers, exponent conversion, Gevrey norms and decay fits.

mod compression;
mod fit;
mod gevrey;
mod numbers;

pub use compression::{
    compression_sweep, dyadic_range, iterated_compression_bound, log_compression_bound, CompressionBound,
    CompressionSweep,
};
pub use fit::{fit_decay, fit_decay_at, fit_decay_window, DecayFit, DecayModel, FitWindow};
pub use gevrey::{gevrey_norm, GevreyParams, GevreyReport, GEVREY_TRUNCATION_WARNING};
pub use numbers::{diag_entropy_numbers, exponent_convert, ConvertDirection, DiagonalSeqOp, EntropyBands, ENTROPY_BAND};
