//! Forward problem on the reference geometry: DtN map, well-posedness certificate
//! and the singular values of the comparison operator.
use calderon_lab::entropy::{fit_decay, DecayModel};
use calderon_lab::forward::{check_aq, ForwardModel, ProblemGeometry, Realization, DEFAULT_KAPPA};
use calderon_lab::lattice::GridField;

fn main() -> calderon_lab::Result<()> {
    let geometry = ProblemGeometry::reference(0.5)?;
    let model = ForwardModel::new(&geometry, Realization::Multiplier)?;
    let qbar = GridField::zeros(geometry.lattice());
    let dtn = model.assemble_dtn(&qbar)?;
    println!("|W| = {}, |Omega| = {}, ||Lambda|| = {:.4}", geometry.w().len(), geometry.omega().len(), dtn.op_norm()?);
    let aq = check_aq(&model, &qbar, 1.0, DEFAULT_KAPPA)?;
    let certified = aq.margin / (aq.kappa * aq.embedding_constant);
    println!("Aq margin {:.4e} against {:.4e} at r0 = 1, certified up to r0 = {certified:.4}", aq.margin, aq.threshold);
    let sv = model.comparison_operator(&qbar)?.singular_values()?;
    let fit = fit_decay(&sv, DecayModel::FixedExponent { mu: 0.5 })?;
    println!("comparison operator: {} singular values, {:.2e} .. {:.2e}", sv.len(), sv[0], sv[sv.len() - 1]);
    println!("fit C exp(-c k^(1/2)): c = {:.3}, residual {:.3}", fit.rate.unwrap_or(0.0), fit.residual);
    Ok(())
}
