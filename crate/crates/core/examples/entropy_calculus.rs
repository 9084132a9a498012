//! Entropy numbers of diagonal operators with stretched-exponential singular values.
use calderon_lab::entropy::{diag_entropy_numbers, exponent_convert, fit_decay, ConvertDirection, DecayModel, DiagonalSeqOp};

fn main() -> calderon_lab::Result<()> {
    for mu in [1.0 / 3.0, 0.5, 1.0] {
        let len = (700f64.powf(1.0 / mu) as usize).min(20000);
        let op = DiagonalSeqOp::from_fn(len, |j| (-(j as f64).powf(mu)).exp())?;
        let bands = diag_entropy_numbers(&op, len.min(2000))?;
        let fit = fit_decay(&bands.lower, DecayModel::StretchedExp)?;
        let predicted = exponent_convert(mu, ConvertDirection::Forward)?;
        println!("mu = {mu:.3}: entropy exponent {:.4}, predicted {predicted:.4}", fit.exponent);
    }
    Ok(())
}
