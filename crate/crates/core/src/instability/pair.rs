use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::born::{BornOperator, Candidate};
use crate::error::{Error, Result};
use crate::forward::DtnMatrix;
use crate::lattice::{gagliardo_norm, lp_norm, FractionalSobolevParams, GridField, RegionMask};
use crate::provenance::hash_f64s;

/// Membership constraints of the potential class around `qbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetParams {
    pub delta: f64,
    pub p: f64,
    /// Radius of the `W^{delta,p}` ball around `qbar`.
    pub r0: f64,
}

impl BudgetParams {
    pub fn new(delta: f64, p: f64, r0: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(p >= 1.0 && p.is_finite()) || !(r0 > 0.0) {
            return Err(Error::InvalidArgument(format!("need p >= 1 and r0 > 0, got p = {p}, r0 = {r0}")));
        }
        Ok(Self { delta, p, r0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetadata {
    pub q1_hash: String,
    pub q2_hash: String,
    pub geometry_hash: String,
    pub realization: String,
    /// Basis prefix whose least singular vector was used.
    pub prefix: usize,
    /// Candidates skipped because the interior problem was singular.
    pub skipped: usize,
}

/// Two potentials `eps`-apart in `L^p` with nearly equal DtN maps.
#[derive(Debug, Clone)]
pub struct InstabilityPair {
    pub q1: GridField,
    pub q2: GridField,
    pub eps: f64,
    /// `W^{delta,p}` distances of `q1` and `q2` to the background.
    pub sobolev_budget: [f64; 2],
    /// Operator norm of the exact DtN difference.
    pub gap: f64,
    /// Operator norm of the linearized difference.
    pub gap_linear: f64,
    pub single_meas_gap: Option<f64>,
    /// `Lambda_{q1} - Lambda_{q2}` as a form on the W node indicators.
    pub difference: DtnMatrix,
    pub metadata: PairMetadata,
}

/// Pair at distance `eps` from the least visible admissible direction.
pub fn construct_pair(born: &BornOperator, eps: f64, delta: f64, p: f64, r0: f64) -> Result<InstabilityPair> {
    let budget = BudgetParams::new(delta, p, r0)?;
    let candidates = born.candidates(delta, p)?;
    construct_pair_from(born, &candidates, eps, &budget)
}

/// As [`construct_pair`] with precomputed candidates.
pub fn construct_pair_from(
    born: &BornOperator,
    candidates: &[Candidate],
    eps: f64,
    budget: &BudgetParams,
) -> Result<InstabilityPair> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    // both potentials sit eps / 2 from the background
    let mut feasible: Vec<&Candidate> =
        candidates.iter().filter(|c| 0.5 * eps * c.sobolev_ratio <= budget.r0).collect();
    if feasible.is_empty() {
        let best = candidates.iter().map(|c| c.sobolev_ratio).fold(f64::INFINITY, f64::min);
        return Err(Error::BudgetInfeasible(format!(
            "eps = {eps:.3e} needs a W^(delta,p) norm of at least {:.3e} > r0 = {}",
            0.5 * eps * best,
            budget.r0
        )));
    }
    feasible.sort_by(|a, b| a.unit_gap.total_cmp(&b.unit_gap).then(a.prefix.cmp(&b.prefix)));
    let model = born.model();
    let geom = born.geometry();
    let qbar = born.qbar();
    let mut skipped = 0;
    for cand in feasible {
        let half = cand.direction.scale(0.5 * eps);
        let q1 = qbar.sub(&half)?;
        let q2 = qbar.add(&half)?;
        let solved = model.solutions(&q1).and_then(|u1| Ok((u1, model.solutions(&q2)?)));
        let (u1, u2) = match solved {
            Ok(u) => u,
            Err(Error::DirichletEigenvalue { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let entries = model.difference_from_solutions(&q1, &u1, &q2, &u2)?;
        let (h1, h2) = (hash_f64s(q1.values()), hash_f64s(q2.values()));
        let difference = born.base().with_entries(entries, format!("{h1}-{h2}"));
        let gap = difference.op_norm()?;
        let pair = InstabilityPair {
            sobolev_budget: [0.5 * eps * cand.sobolev_ratio; 2],
            gap,
            gap_linear: eps * cand.unit_gap,
            single_meas_gap: None,
            difference,
            metadata: PairMetadata {
                q1_hash: h1,
                q2_hash: h2,
                geometry_hash: geom.hash().to_string(),
                realization: model.realization().name(),
                prefix: cand.prefix,
                skipped,
            },
            q1,
            q2,
            eps,
        };
        return verify_membership(pair, qbar, geom.omega(), geom.omega_prime(), budget);
    }
    Err(Error::DirichletEigenvalue { pivot: 0.0, threshold: crate::linalg::PIVOT_THRESHOLD })
}

/// Recomputes the distance, budgets and support from the raw fields.
pub fn verify_membership(
    mut pair: InstabilityPair,
    qbar: &GridField,
    omega: &RegionMask,
    omega_prime: &RegionMask,
    budget: &BudgetParams,
) -> Result<InstabilityPair> {
    let params = FractionalSobolevParams::new(budget.delta, budget.p, omega.clone())?;
    let diff = pair.q1.sub(&pair.q2)?;
    if let Some(i) = (0..diff.values().len()).find(|&i| diff.values()[i] != 0.0 && !omega_prime.contains(i)) {
        return Err(Error::GeometryViolation(format!("q1 - q2 is nonzero outside Omega' at node {i}")));
    }
    let eps = lp_norm(&diff, budget.p, omega)?;
    if !(eps > 0.0) {
        return Err(Error::GeometryViolation("pair potentials coincide".into()));
    }
    let b1 = gagliardo_norm(&pair.q1.sub(qbar)?, &params)?;
    let b2 = gagliardo_norm(&pair.q2.sub(qbar)?, &params)?;
    let slack = budget.r0 * (1.0 + 1e-9);
    if b1 > slack || b2 > slack {
        return Err(Error::BudgetInfeasible(format!("budgets {b1:.4e}, {b2:.4e} exceed r0 = {}", budget.r0)));
    }
    pair.eps = eps;
    pair.sobolev_budget = [b1, b2];
    Ok(pair)
}

/// `||(Lambda_{q1} - Lambda_{q2}) f||_{H^{-s}(W)}` for data `f` on W.
pub fn single_measurement(pair: &InstabilityPair, f: &GridField) -> Result<f64> {
    let w = pair.difference.geometry().w();
    let fw = DVector::from_vec(f.restrict(w));
    if fw.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let value = pair.difference.dual_norm_of(&fw)?;
    let bound = pair.gap * pair.difference.gram().norm_of(&fw) + 1e-10;
    if value > bound {
        return Err(Error::SolverBreakdown(format!("single measurement {value:.3e} exceeds gap bound {bound:.3e}")));
    }
    Ok(value)
}

impl InstabilityPair {
    pub fn with_single_measurement(mut self, f: &GridField) -> Result<Self> {
        self.single_meas_gap = Some(single_measurement(&self, f)?);
        Ok(self)
    }
}
