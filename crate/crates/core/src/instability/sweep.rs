use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::born::{build_born, BornOperator, Candidate};
use super::pair::{construct_pair_from, single_measurement, verify_membership, BudgetParams, InstabilityPair};
use crate::entropy::{fit_decay_at, DecayFit, DecayModel};
use crate::error::{Error, Result};
use crate::extension::{CylinderGrid, ExtensionSolver, MetricField};
use crate::forward::{ForwardModel, ProblemGeometry, Realization};
use crate::lattice::{FractionalSobolevParams, GridField};
use crate::liouville::{multiplier_bound, reduce_with, ConductivityModel, ConductivitySpec, GammaPreset, ReductionRoute};
use crate::provenance::hash_f64s;

/// Forward problem whose DtN map is probed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Variant {
    Schrodinger,
    /// Extension problem with a constant lateral metric `diag(diag)`.
    VariableA { diag: Vec<f64> },
    /// Conductivity equation, reached through the Liouville reduction.
    Conductivity { gamma: GammaPreset },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Schrodinger => "schrodinger",
            Variant::VariableA { .. } => "variable-a",
            Variant::Conductivity { .. } => "conductivity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variant: Variant,
    pub delta: f64,
    /// Integrability; `None` uses the critical `n / (2s)`.
    #[serde(default)]
    pub p: Option<f64>,
    pub r0: f64,
    /// Largest separation; `None` uses the largest feasible one.
    #[serde(default)]
    pub eps0: Option<f64>,
    pub points: usize,
    pub basis_size: usize,
    pub seed: u64,
}

impl SweepConfig {
    /// Six halvings from the largest feasible separation, `delta = 0.5`.
    pub fn reference(variant: Variant) -> Self {
        Self { variant, delta: 0.5, p: None, r0: 1.0, eps0: None, points: 6, basis_size: 60, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub gap: f64,
    pub gap_linear: f64,
    pub single_meas_gap: f64,
    pub budget: f64,
    pub prefix: usize,
    pub q1_hash: String,
    pub q2_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub variant: String,
    pub n: usize,
    pub s: f64,
    pub delta: f64,
    pub p: f64,
    pub seed: u64,
    pub geometry_hash: String,
    pub rows: Vec<SweepRow>,
    /// Slope of `log(-log gap)` against `log(1/eps)`.
    pub fit_slope: Option<f64>,
    pub target_exponent: f64,
    pub stretched: Option<DecayFit>,
    pub power: Option<DecayFit>,
    /// Error that stopped the sweep; `rows` holds what was finished before it.
    pub aborted: Option<String>,
}

impl SweepResult {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap < w[0].gap)
    }

    /// Stretched exponential residual at most half the power-law residual.
    pub fn stretched_preferred(&self) -> bool {
        match (&self.stretched, &self.power) {
            (Some(a), Some(b)) => 2.0 * a.residual <= b.residual,
            _ => false,
        }
    }

    /// Columns `variant, n, s, delta, p, eps, gap, gap_linear, fit_slope, target_exponent, seed, geometry_hash`.
    pub fn write_csv(&self, path: &Path, header: &str) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if !header.is_empty() {
            writeln!(f, "{header}")?;
        }
        writeln!(f, "variant,n,s,delta,p,eps,gap,gap_linear,fit_slope,target_exponent,seed,geometry_hash")?;
        let slope = self.fit_slope.map(|v| format!("{v:e}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                f,
                "{},{},{},{},{},{:e},{:e},{:e},{},{:e},{},{}",
                self.variant,
                self.n,
                self.s,
                self.delta,
                self.p,
                r.eps,
                r.gap,
                r.gap_linear,
                slope,
                self.target_exponent,
                self.seed,
                self.geometry_hash
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Asymptotic exponent of `-log gap` in `1/eps` for the variant.
pub fn target_exponent(variant: &Variant, delta: f64, n: usize, compact_background: bool) -> f64 {
    let k = match variant {
        Variant::Schrodinger if compact_background => 1.0,
        _ => 5.0,
    };
    1.0 / (delta * (2.0 + k / n as f64))
}

/// Converts a pair of the reduced problem into a conductivity pair.
struct ConductivityTransfer {
    spec: ConductivitySpec,
    q_gamma: GridField,
    model: ConductivityModel,
}

impl ConductivityTransfer {
    fn potential(&self, reduced: &GridField) -> Result<GridField> {
        reduced.sub(&self.q_gamma)?.zip_with(self.spec.gamma(), |v, g| v * g)
    }

    fn transfer(&self, pair: InstabilityPair, qbar: &GridField, geom: &ProblemGeometry, budget: &BudgetParams) -> Result<InstabilityPair> {
        let q1 = self.potential(&pair.q1)?;
        let q2 = self.potential(&pair.q2)?;
        let fwd = self.model.forward();
        let u1 = fwd.solutions(&q1)?;
        let u2 = fwd.solutions(&q2)?;
        let entries = fwd.difference_from_solutions(&q1, &u1, &q2, &u2)?;
        let (h1, h2) = (hash_f64s(q1.values()), hash_f64s(q2.values()));
        let base = pair.difference.with_entries(entries, format!("{h1}-{h2}"));
        let gap = base.op_norm()?;
        let mut metadata = pair.metadata.clone();
        metadata.q1_hash = h1;
        metadata.q2_hash = h2;
        metadata.realization = fwd.realization().name();
        let out = InstabilityPair { q1, q2, gap, difference: base, metadata, ..pair };
        verify_membership(out, qbar, geom.omega(), geom.omega_prime(), budget)
    }
}

fn w_datum(geom: &ProblemGeometry, seed: u64) -> Result<GridField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..geom.w().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridField::from_region_values(geom.w(), &vals)
}

/// Pairs at `eps0, eps0 / 2, ...` and the decay laws fitted to their gaps.
pub fn run_sweep(geometry: &ProblemGeometry, qbar: &GridField, config: &SweepConfig) -> Result<SweepResult> {
    let s = geometry.s();
    let n = geometry.lattice().dim();
    let p = config.p.unwrap_or_else(|| geometry.critical_p());
    let budget = BudgetParams::new(config.delta, p, config.r0)?;
    if config.points < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least two points".into()));
    }
    let compact = (0..qbar.values().len()).all(|i| qbar.values()[i] == 0.0 || geometry.omega_prime().contains(i));
    let (born, transfer, reduced_budget) = match &config.variant {
        Variant::Schrodinger => {
            let model = ForwardModel::new(geometry, Realization::Kernel { corrected: true })?;
            (build_born(&model, qbar, config.basis_size)?, None, budget)
        }
        Variant::VariableA { diag } => {
            if diag.len() != n || diag.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::InvalidArgument(format!("metric needs {n} positive diagonal entries")));
            }
            let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = diag.iter().cloned().fold(0.0, f64::max);
            let metric = MetricField::from_fn(geometry.lattice(), |_| {
                let mut a = vec![0.0; n * n];
                for i in 0..n {
                    a[i * n + i] = diag[i];
                }
                a
            })?;
            let grid = CylinderGrid::standard(geometry.lattice(), s)?.with_metric(metric, lo.min(1.0 / hi).min(1.0))?;
            let model = ExtensionSolver::new(grid)?.forward_model(geometry)?;
            (build_born(&model, qbar, config.basis_size)?, None, budget)
        }
        Variant::Conductivity { gamma } => {
            let spec = ConductivitySpec::from_preset(gamma, geometry.lattice(), geometry.omega())?;
            let reduced = reduce_with(&spec, qbar, s, ReductionRoute::Kernel)?;
            let params = FractionalSobolevParams::new(config.delta, p, geometry.omega().clone())?;
            let r0 = config.r0 / multiplier_bound(spec.gamma(), &params);
            let model = ForwardModel::new(geometry, ReductionRoute::Kernel.realization())?;
            let born = build_born(&model, &reduced.total, config.basis_size)?;
            let cmodel = ConductivityModel::new(geometry, &spec)?;
            let transfer = ConductivityTransfer { spec, q_gamma: reduced.q_gamma, model: cmodel };
            (born, Some(transfer), BudgetParams { r0, ..budget })
        }
    };
    let candidates = born.candidates(config.delta, p)?;
    let eps0 = match config.eps0 {
        Some(e) => e,
        None => largest_feasible(&candidates, &reduced_budget)?,
    };
    let datum = w_datum(geometry, config.seed)?;
    let outcomes: Vec<Result<SweepRow>> = (0..config.points)
        .into_par_iter()
        .map(|i| {
            let eps = eps0 * 0.5f64.powi(i as i32);
            sweep_point(&born, &candidates, eps, &reduced_budget, transfer.as_ref(), qbar, &budget, &datum)
        })
        .collect();
    let mut rows = Vec::new();
    let mut aborted = None;
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        }
    }
    let (stretched, power, fit_slope) = fit_rows(&rows);
    Ok(SweepResult {
        variant: config.variant.name().into(),
        n,
        s,
        delta: config.delta,
        p,
        seed: config.seed,
        geometry_hash: geometry.hash().to_string(),
        rows,
        fit_slope,
        target_exponent: target_exponent(&config.variant, config.delta, n, compact),
        stretched,
        power,
        aborted,
    })
}

/// Largest `eps` for which the lowest-norm candidate fits the budget.
pub fn largest_feasible(candidates: &[Candidate], budget: &BudgetParams) -> Result<f64> {
    let ratio = candidates.iter().map(|c| c.sobolev_ratio).fold(f64::INFINITY, f64::min);
    if !ratio.is_finite() {
        return Err(Error::BudgetInfeasible("no candidate directions".into()));
    }
    Ok(2.0 * budget.r0 / ratio)
}

#[allow(clippy::too_many_arguments)]
fn sweep_point(
    born: &BornOperator,
    candidates: &[Candidate],
    eps: f64,
    reduced_budget: &BudgetParams,
    transfer: Option<&ConductivityTransfer>,
    qbar: &GridField,
    budget: &BudgetParams,
    datum: &GridField,
) -> Result<SweepRow> {
    let mut pair = construct_pair_from(born, candidates, eps, reduced_budget)?;
    if let Some(t) = transfer {
        pair = t.transfer(pair, qbar, born.geometry(), budget)?;
    }
    let single = single_measurement(&pair, datum)?;
    Ok(SweepRow {
        eps: pair.eps,
        gap: pair.gap,
        gap_linear: pair.gap_linear,
        single_meas_gap: single,
        budget: pair.sobolev_budget[0].max(pair.sobolev_budget[1]),
        prefix: pair.metadata.prefix,
        q1_hash: pair.metadata.q1_hash,
        q2_hash: pair.metadata.q2_hash,
    })
}

pub(super) fn fit_rows(rows: &[SweepRow]) -> (Option<DecayFit>, Option<DecayFit>, Option<f64>) {
    let usable: Vec<&SweepRow> = rows.iter().filter(|r| r.gap > 0.0 && r.gap.is_finite()).collect();
    let xs: Vec<f64> = usable.iter().map(|r| 1.0 / r.eps).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.gap).collect();
    let stretched = fit_decay_at(&xs, &ys, DecayModel::StretchedExp, 4).ok();
    let power = fit_decay_at(&xs, &ys, DecayModel::Power, 4).ok();
    let pts: Vec<(f64, f64)> =
        usable.iter().filter(|r| r.gap < 1.0).map(|r| ((1.0 / r.eps).ln(), (-r.gap.ln()).ln())).collect();
    let slope = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    (stretched, power, slope)
}
