//! Three realizations of the fractional Laplacian on a smooth bump: singular kernel,
//! Fourier multiplier and the heat-semigroup inverse.
use calderon_lab::fractional::{heat_transform, HeatTransformOp, KernelOp, MultiplierOp};
use calderon_lab::lattice::{GridField, LatticeSpec};

fn norm(u: &GridField) -> f64 {
    u.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn main() -> calderon_lab::Result<()> {
    let lat = LatticeSpec::new(2, 4.0, 64)?;
    let u = GridField::from_fn(&lat, |x| (-2.0 * (x[0] * x[0] + x[1] * x[1])).exp());
    for s in [0.25, 0.5, 0.75] {
        let kernel = KernelOp::new(&lat, s)?.apply(&u)?;
        let multiplier = MultiplierOp::homogeneous(&lat, s).apply(&u)?;
        let gap = norm(&kernel.sub(&multiplier)?) / norm(&multiplier);
        let g = GridField::from_fn(&lat, |x| (std::f64::consts::PI * x[0]).cos() * (std::f64::consts::FRAC_PI_2 * x[1]).sin());
        let back = MultiplierOp::homogeneous(&lat, s).apply(&heat_transform(&g, &HeatTransformOp::new(&lat, s)?)?)?;
        let roundtrip = norm(&back.sub(&g)?) / norm(&g);
        println!("s = {s}: kernel vs multiplier {gap:.3e}, heat roundtrip {roundtrip:.1e}");
    }
    Ok(())
}
