//! Conductivity equation reduced to a Schroedinger equation, checked through the DtN pairing chain.
use calderon_lab::forward::ProblemGeometry;
use calderon_lab::lattice::GridField;
use calderon_lab::liouville::{reduce, ConductivitySpec, GammaPreset, ReductionLab};
use nalgebra::DVector;

fn main() -> calderon_lab::Result<()> {
    let geometry = ProblemGeometry::reference(0.5)?;
    let lat = geometry.lattice();
    let preset = GammaPreset::Bump { center: vec![0.0, 0.0], radius: 0.6, amplitude: 2f64.sqrt() - 1.0 };
    let spec = ConductivitySpec::from_preset(&preset, lat, geometry.omega())?;
    let q1 = GridField::from_fn(lat, |x| 0.5 + 0.3 * x[0]).masked(geometry.omega());
    let q2 = GridField::from_fn(lat, |x| 0.2 * x[1] * x[1]).masked(geometry.omega());
    let reduced = reduce(&spec, &q1, 0.5)?;
    let peak = reduced.q_gamma.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("gamma >= {:.3}, max |q_gamma| = {peak:.4}", spec.gamma_lower());
    let w = geometry.w().len();
    let data = vec![(DVector::from_fn(w, |i, _| (i as f64).sin()), DVector::from_fn(w, |i, _| (0.5 * i as f64).cos()))];
    let report = ReductionLab::new(&geometry, &spec)?.verify(&q1, &q2, &data)?;
    for t in &report.trials {
        println!(
            "conductivity {:+.6e}, interior {:+.6e}, kernel route {:+.6e}, multiplier route {:+.6e}",
            t.conductivity, t.interior, t.schroedinger_kernel, t.schroedinger_multiplier
        );
    }
    println!("chain mismatch {:.2e} (threshold {}), passed {}", report.max_mismatch, report.threshold, report.passed);
    Ok(())
}
