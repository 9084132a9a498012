//! Weighted cylinder eigenvalues: Weyl slope and embedding singular values on the unit square.
use calderon_lab::extension::{build_eigensystem, embedding_singular_values, weyl_slope, LateralDomain};

fn main() -> calderon_lab::Result<()> {
    let system = build_eigensystem(LateralDomain::unit_square(), 0.5, 1.0, 2000)?;
    println!("first eigenvalues: {:?}", system.pairs()[..5].iter().map(|p| p.lambda).collect::<Vec<_>>());
    println!("weyl slope over 1..2000: {:.4} (expected 2/3)", weyl_slope(&system, (1, 2000))?);
    let emb = embedding_singular_values(&system, 2000, (100, 2000))?;
    println!("embedding exponent over 100..2000: {:.4} (expected -1/3), {}", emb.exponent(), emb.normalization);
    Ok(())
}
