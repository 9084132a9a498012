//! Optimal number of Caccioppoli iterations and the resulting compression bound.
use calderon_lab::entropy::{compression_sweep, dyadic_range};

fn main() -> calderon_lab::Result<()> {
    let sweep = compression_sweep(1.0, 20.0, 2, &dyadic_range(8, 16))?;
    println!("{:>8} {:>6} {:>12} {:>12}", "k", "N_opt", "bound", "N/k^(1/4)");
    for p in &sweep.points {
        println!("{:>8} {:>6} {:>12.4e} {:>12.4}", p.k, p.n_opt, p.bound, p.ratio(2));
    }
    println!("ratio spread {:.3}, fitted exponent {:.4}", sweep.ratio_spread, sweep.fit.exponent);
    Ok(())
}
