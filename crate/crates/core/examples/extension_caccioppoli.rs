//! Extension realization of the exterior problem and the Caccioppoli constant of its solution.
use calderon_lab::extension::{caccioppoli_verify, CylinderGrid, ExtensionProblem, ExtensionSolver};
use calderon_lab::forward::ProblemGeometry;
use calderon_lab::lattice::GridField;

fn main() -> calderon_lab::Result<()> {
    let geometry = ProblemGeometry::reference(0.5)?;
    let solver = ExtensionSolver::new(CylinderGrid::standard(geometry.lattice(), 0.5)?)?;
    let problem = ExtensionProblem::new(solver, &geometry)?;
    let f = GridField::from_fn(geometry.lattice(), |x| {
        let (u, v) = ((x[0] - 1.25) / 0.25, x[1] / 0.75);
        if u.abs() < 1.0 && v.abs() < 1.0 {
            (1.0 - u * u).powi(2) * (1.0 - v * v).powi(2)
        } else {
            0.0
        }
    })
    .masked(geometry.w());
    let sol = problem.solve(&f, &GridField::zeros(geometry.lattice()))?;
    println!("{} extension levels, trace max {:.4}", sol.field.levels(), sol.field.trace().values().iter().cloned().fold(0.0, f64::max));
    for (r1, r2) in [(0.1, 0.3), (0.2, 0.4), (0.3, 0.5)] {
        let rep = caccioppoli_verify(&sol.field, problem.solver(), geometry.omega(), &[0.0, 0.0], r1, r2)?;
        println!("balls {r1}/{r2}: gradient energy {:.3e}, mass {:.3e}, constant {:.4}", rep.lhs, rep.rhs, rep.constant);
    }
    Ok(())
}
