//! Near-invisible potential pairs: DtN gap against separation over six halvings.
use calderon_lab::forward::ProblemGeometry;
use calderon_lab::instability::{run_sweep, SweepConfig, Variant};
use calderon_lab::lattice::GridField;

fn main() -> calderon_lab::Result<()> {
    let geometry = ProblemGeometry::reference(0.5)?;
    let result = run_sweep(&geometry, &GridField::zeros(geometry.lattice()), &SweepConfig::reference(Variant::Schrodinger))?;
    println!("{:>12} {:>12} {:>12} {:>12}", "eps", "gap", "linear", "budget");
    for r in &result.rows {
        println!("{:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}", r.eps, r.gap, r.gap_linear, r.budget);
    }
    println!("strictly decreasing: {}, stretched preferred: {}", result.strictly_decreasing(), result.stretched_preferred());
    println!("slope {:?} against target {:.4}", result.fit_slope, result.target_exponent);
    Ok(())
}
