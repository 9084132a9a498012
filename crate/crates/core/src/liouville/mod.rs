//! Fractional conductivity problem and its reduction to a Schroedinger problem.
//!
//! With `a = gamma^{1/2}` and `w = a u`, the two-point conductivity form satisfies
//! `B_gamma(u, v) + <q u, v> = B_0(w, z) + <(q_gamma + q / gamma) w, z>` with
//! `z = a v` and `q_gamma = -a^{-1} (-Delta)^s (a - 1)`. On the lattice this holds
//! exactly when `(-Delta)^s` is the kernel sum that also defines `B_gamma`;
//! with the Fourier multiplier it holds up to the discretization gap between
//! the two realizations.


use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{DtnMatrix, ForwardModel, ProblemGeometry, Realization};
use crate::fractional::{frac_laplacian_fourier, ConductivityForm, KernelOp, MultiplierOp};
use crate::lattice::{gagliardo_norm, FractionalSobolevParams, GridField, LatticeSpec, RegionMask};
use crate::linalg::spectral_norm;
use crate::provenance::hash_f64s;

/// Closed-form conductivity presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GammaPreset {
    /// `gamma^{1/2} = 1 + amplitude * exp(1 - 1 / (1 - r^2))`, `r = |x - center| / radius`.
    Bump { center: Vec<f64>, radius: f64, amplitude: f64 },
    Constant,
}

#[derive(Debug, Clone)]
pub struct ConductivitySpec {
    gamma: GridField,
    gamma_lower: f64,
    support_ok: bool,
}

/// Smooth compactly supported profile with value 1 at the origin.
pub fn smooth_bump(r: f64) -> f64 {
    if r < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

impl ConductivitySpec {
    /// Validates `gamma >= gamma_lower > 0` and `gamma = 1` off `omega`.
    pub fn from_field(gamma: GridField, omega: &RegionMask, gamma_lower: f64) -> Result<Self> {
        gamma.lattice().check_same(omega.lattice())?;
        if !(gamma_lower > 0.0) {
            return Err(Error::InvalidArgument(format!("lower bound must be positive, got {gamma_lower}")));
        }
        if let Some(i) = gamma.values().iter().position(|&g| g < gamma_lower) {
            return Err(Error::InvalidArgument(format!(
                "conductivity {} below the lower bound {gamma_lower} at node {i}",
                gamma.values()[i]
            )));
        }
        let support_ok = (0..gamma.lattice().num_nodes()).all(|i| omega.contains(i) || gamma.values()[i] == 1.0);
        if !support_ok {
            return Err(Error::InvalidArgument("conductivity differs from 1 outside Omega".into()));
        }
        Ok(Self { gamma, gamma_lower, support_ok })
    }

    pub fn identity(lattice: &LatticeSpec) -> Self {
        Self { gamma: GridField::constant(lattice, 1.0), gamma_lower: 1.0, support_ok: true }
    }

    pub fn from_preset(preset: &GammaPreset, lattice: &LatticeSpec, omega: &RegionMask) -> Result<Self> {
        match preset {
            GammaPreset::Constant => Ok(Self::identity(lattice)),
            GammaPreset::Bump { center, radius, amplitude } => {
                if center.len() != lattice.dim() || !(*radius > 0.0) || !(*amplitude > -1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "bump needs a {}-dimensional center, radius > 0 and amplitude > -1",
                        lattice.dim()
                    )));
                }
                let gamma = GridField::from_fn(lattice, |x| {
                    let r = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / radius;
                    let a = 1.0 + amplitude * smooth_bump(r);
                    a * a
                });
                let lower = (1.0 + amplitude.min(0.0)).powi(2);
                Self::from_field(gamma, omega, lower)
            }
        }
    }

    pub fn gamma(&self) -> &GridField {
        &self.gamma
    }

    pub fn gamma_lower(&self) -> f64 {
        self.gamma_lower
    }

    pub fn support_ok(&self) -> bool {
        self.support_ok
    }

    pub fn sqrt_gamma(&self) -> GridField {
        self.gamma.map(f64::sqrt)
    }

    pub fn is_identity(&self) -> bool {
        self.gamma.values().iter().all(|&g| g == 1.0)
    }

    pub fn hash(&self) -> String {
        hash_f64s(self.gamma.values())
    }
}

/// How `(-Delta)^s (a - 1)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionRoute {
    /// Fourier multiplier `|xi|^{2s}`.
    Multiplier,
    /// Corrected lattice kernel, matching the conductivity form exactly.
    Kernel,
}

impl ReductionRoute {
    /// Schroedinger realization consistent with this route.
    pub fn realization(self) -> Realization {
        match self {
            ReductionRoute::Multiplier => Realization::Multiplier,
            ReductionRoute::Kernel => Realization::Kernel { corrected: true },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedPotential {
    pub q_gamma: GridField,
    /// `q_gamma + q / gamma`.
    pub total: GridField,
    pub gamma_hash: String,
    pub q_hash: String,
}

pub fn reduce(spec: &ConductivitySpec, q: &GridField, s: f64) -> Result<ReducedPotential> {
    reduce_with(spec, q, s, ReductionRoute::Multiplier)
}

pub fn reduce_with(spec: &ConductivitySpec, q: &GridField, s: f64, route: ReductionRoute) -> Result<ReducedPotential> {
    let lat = spec.gamma.lattice();
    lat.check_same(q.lattice())?;
    let a = spec.sqrt_gamma();
    let a_minus_one = a.map(|v| v - 1.0);
    let lap = match route {
        ReductionRoute::Multiplier => frac_laplacian_fourier(&a_minus_one, &MultiplierOp::homogeneous(lat, s))?,
        ReductionRoute::Kernel => KernelOp::new(lat, s)?.apply(&a_minus_one)?,
    };
    let q_gamma = lap.zip_with(&a, |l, a| -l / a)?;
    let total = q_gamma.add(&q.zip_with(&spec.gamma, |q, g| q / g)?)?;
    Ok(ReducedPotential { q_gamma, total, gamma_hash: spec.hash(), q_hash: hash_f64s(q.values()) })
}

/// Dense conductivity forward model: form blocks on `Omega` and `W`, potential added per solve.
#[derive(Debug, Clone)]
pub struct ConductivityModel {
    spec: ConductivitySpec,
    model: ForwardModel,
}

impl ConductivityModel {
    pub fn new(geometry: &ProblemGeometry, spec: &ConductivitySpec) -> Result<Self> {
        let lat = geometry.lattice();
        lat.check_same(spec.gamma.lattice())?;
        if geometry.w().nodes().iter().any(|&i| spec.gamma.values()[i] != 1.0) {
            return Err(Error::InvalidArgument("conductivity must equal 1 on W".into()));
        }
        let form = ConductivityForm::new(&spec.gamma, &GridField::zeros(lat), geometry.s(), Some(geometry.omega()))?;
        let inv_hn = 1.0 / lat.cell_volume();
        let (om, w) = (geometry.omega(), geometry.w());
        let gram = Arc::new(crate::lattice::build_gram(w, geometry.s())?);
        let model = ForwardModel::from_blocks(
            geometry,
            if spec.is_identity() { "conductivity_identity".into() } else { "conductivity".into() },
            form.matrix(om, om) * inv_hn,
            form.matrix(om, w) * inv_hn,
            form.matrix(w, w) * inv_hn,
            gram,
        )?;
        Ok(Self { spec: spec.clone(), model })
    }

    pub fn spec(&self) -> &ConductivitySpec {
        &self.spec
    }

    pub fn forward(&self) -> &ForwardModel {
        &self.model
    }

    pub fn dtn(&self, q: &GridField) -> Result<DtnMatrix> {
        self.model.assemble_dtn(q)
    }
}

/// `<Lambda_{gamma,q} f, g> = B_{gamma,q}(u_f, g)` on the W node indicators.
pub fn conductivity_dtn(geometry: &ProblemGeometry, spec: &ConductivitySpec, q: &GridField) -> Result<DtnMatrix> {
    ConductivityModel::new(geometry, spec)?.dtn(q)
}

/// Nodal residuals of both equations on `Omega` for an arbitrary `u`:
/// `B_gamma(u, e_x) + h^n q u(x)` and `h^n ((-Delta)^s w + Q w)(x)` with `w = a u`.
///
/// With the kernel route the second equals the first divided by `a(x)`.
pub fn correspondence_residuals(
    geometry: &ProblemGeometry,
    spec: &ConductivitySpec,
    q: &GridField,
    u: &GridField,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let lat = geometry.lattice();
    let s = geometry.s();
    let form = ConductivityForm::new(&spec.gamma, q, s, Some(geometry.omega()))?;
    let r1_full = form.apply(u)?;
    let reduced = reduce_with(spec, q, s, ReductionRoute::Kernel)?;
    let w = u.zip_with(&spec.sqrt_gamma(), |u, a| u * a)?;
    let lw = KernelOp::new(lat, s)?.apply(&w)?;
    let hn = lat.cell_volume();
    let nodes = geometry.omega().nodes();
    let r1 = nodes.iter().map(|&x| r1_full[x]).collect();
    let r2 = nodes
        .iter()
        .map(|&x| hn * (lw.values()[x] + reduced.total.values()[x] * w.values()[x]))
        .collect();
    Ok((r1, r2))
}

/// One evaluation of the reduction chain for data `f1`, `f2` on `W`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainTrial {
    /// `<(Lambda_{gamma,q1} - Lambda_{gamma,q2}) f1, f2>`.
    pub conductivity: f64,
    /// `h^n sum_Omega (q1 - q2) u1 u2`.
    pub interior: f64,
    /// `<(Lambda_{Q1} - Lambda_{Q2}) a f1, a f2>` with the kernel route.
    pub schroedinger_kernel: f64,
    /// Same with the multiplier route.
    pub schroedinger_multiplier: f64,
    /// Multiplier-minus-kernel value of the same pairing at `gamma = 1`.
    pub baseline_gap: f64,
    /// `||f1|| ||f2|| ||Lambda_{gamma,q1} - Lambda_{gamma,q2}||`, the scale for relative mismatches.
    pub scale: f64,
}

impl ChainTrial {
    pub fn interior_mismatch(&self) -> f64 {
        (self.interior - self.conductivity).abs() / self.scale
    }

    pub fn kernel_mismatch(&self) -> f64 {
        (self.schroedinger_kernel - self.conductivity).abs() / self.scale
    }

    /// Multiplier route without baseline subtraction.
    pub fn raw_multiplier_mismatch(&self) -> f64 {
        (self.schroedinger_multiplier - self.conductivity).abs() / self.scale
    }

    pub fn multiplier_mismatch(&self) -> f64 {
        (self.schroedinger_multiplier - self.baseline_gap - self.conductivity).abs() / self.scale
    }

    /// Largest mismatch along the chain after baseline subtraction.
    pub fn chain_mismatch(&self) -> f64 {
        self.interior_mismatch().max(self.kernel_mismatch()).max(self.multiplier_mismatch())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionReport {
    pub trials: Vec<ChainTrial>,
    pub max_mismatch: f64,
    pub max_raw_multiplier_mismatch: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub const REDUCTION_THRESHOLD: f64 = 0.02;

/// Conductivity and Schroedinger models that share one geometry and conductivity.
#[derive(Debug, Clone)]
pub struct ReductionLab {
    geometry: ProblemGeometry,
    spec: ConductivitySpec,
    conductivity: ConductivityModel,
    kernel: ForwardModel,
    multiplier: ForwardModel,
}

impl ReductionLab {
    pub fn new(geometry: &ProblemGeometry, spec: &ConductivitySpec) -> Result<Self> {
        let conductivity = ConductivityModel::new(geometry, spec)?;
        let gram = conductivity.forward().gram_w().clone();
        let kernel = ForwardModel::with_gram(geometry, ReductionRoute::Kernel.realization(), gram.clone())?;
        let multiplier = ForwardModel::with_gram(geometry, ReductionRoute::Multiplier.realization(), gram)?;
        Ok(Self { geometry: geometry.clone(), spec: spec.clone(), conductivity, kernel, multiplier })
    }

    pub fn conductivity(&self) -> &ConductivityModel {
        &self.conductivity
    }

    pub fn schroedinger(&self, route: ReductionRoute) -> &ForwardModel {
        match route {
            ReductionRoute::Kernel => &self.kernel,
            ReductionRoute::Multiplier => &self.multiplier,
        }
    }

    /// Difference `Lambda_{Q1} - Lambda_{Q2}` of the reduced Schroedinger maps.
    pub fn reduced_difference(&self, q1: &GridField, q2: &GridField, route: ReductionRoute) -> Result<DMatrix<f64>> {
        let s = self.geometry.s();
        let big1 = reduce_with(&self.spec, q1, s, route)?.total;
        let big2 = reduce_with(&self.spec, q2, s, route)?.total;
        let model = self.schroedinger(route);
        Ok(model.assemble_dtn(&big1)?.entries() - model.assemble_dtn(&big2)?.entries())
    }

    /// Evaluates every link of the chain on each pair of data vectors.
    pub fn verify(&self, q1: &GridField, q2: &GridField, data: &[(DVector<f64>, DVector<f64>)]) -> Result<ReductionReport> {
        let hn = self.geometry.lattice().cell_volume();
        let c1 = self.conductivity.forward().assemble(q1)?;
        let c2 = self.conductivity.forward().assemble(q2)?;
        let cond = c1.dtn.entries() - c2.dtn.entries();
        let kernel = self.reduced_difference(q1, q2, ReductionRoute::Kernel)?;
        let multiplier = self.reduced_difference(q1, q2, ReductionRoute::Multiplier)?;
        let base_m = self.multiplier.assemble_dtn(q1)?.entries() - self.multiplier.assemble_dtn(q2)?.entries();
        let base_k = self.kernel.assemble_dtn(q1)?.entries() - self.kernel.assemble_dtn(q2)?.entries();
        let baseline = base_m - base_k;
        let diff: Vec<f64> =
            q1.restrict(self.geometry.omega()).iter().zip(q2.restrict(self.geometry.omega())).map(|(a, b)| a - b).collect();
        let norm = spectral_norm(&cond);
        // a = 1 on W, so a f = f there
        let pair = |m: &DMatrix<f64>, f1: &DVector<f64>, f2: &DVector<f64>| f2.dot(&(m * f1));
        let trials = data
            .iter()
            .map(|(f1, f2)| {
                if f1.len() != cond.ncols() || f2.len() != cond.ncols() {
                    return Err(Error::DimensionMismatch { expected: cond.ncols(), got: f1.len().min(f2.len()) });
                }
                let u1 = &c1.solutions * f1;
                let u2 = &c2.solutions * f2;
                let interior = hn * diff.iter().zip(u1.iter().zip(u2.iter())).map(|(d, (a, b))| d * a * b).sum::<f64>();
                Ok(ChainTrial {
                    conductivity: pair(&cond, f1, f2),
                    interior,
                    schroedinger_kernel: pair(&kernel, f1, f2),
                    schroedinger_multiplier: pair(&multiplier, f1, f2),
                    baseline_gap: pair(&baseline, f1, f2),
                    scale: (norm * f1.norm() * f2.norm()).max(f64::MIN_POSITIVE),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let max_mismatch = trials.iter().map(ChainTrial::chain_mismatch).fold(0.0, f64::max);
        let max_raw = trials.iter().map(ChainTrial::raw_multiplier_mismatch).fold(0.0, f64::max);
        Ok(ReductionReport {
            trials,
            max_mismatch,
            max_raw_multiplier_mismatch: max_raw,
            threshold: REDUCTION_THRESHOLD,
            passed: max_mismatch <= REDUCTION_THRESHOLD,
        })
    }
}

pub fn verify_reduction_identity(
    geometry: &ProblemGeometry,
    spec: &ConductivitySpec,
    q1: &GridField,
    q2: &GridField,
    data: &[(DVector<f64>, DVector<f64>)],
) -> Result<ReductionReport> {
    ReductionLab::new(geometry, spec)?.verify(q1, q2, data)
}

/// Bound `C(g)` with `||g v||_{W^{delta,p}} <= C(g) ||v||_{W^{delta,p}}` on a region:
/// `C(g) = max|g| + Lip(g) S^{1/p}` with `S = sup_y sum_x |x - y|^{p(1-delta)-n} h^n`.
pub fn multiplier_bound(g: &GridField, params: &FractionalSobolevParams) -> f64 {
    let lat = g.lattice();
    let nodes = params.region.nodes();
    let vals = g.values();
    let n = lat.dim() as f64;
    let expo = params.p * (1.0 - params.delta) - n;
    let hn = lat.cell_volume();
    let mut sup = 0.0f64;
    let mut lip = 0.0f64;
    let mut s_max = 0.0f64;
    for &y in nodes {
        sup = sup.max(vals[y].abs());
        let mut s = 0.0;
        for &x in nodes {
            if x != y {
                let d = lat.distance(x, y);
                lip = lip.max((vals[x] - vals[y]).abs() / d);
                s += d.powf(expo) * hn;
            }
        }
        s_max = s_max.max(s);
    }
    sup + lip * s_max.powf(1.0 / params.p)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEquivalenceReport {
    /// `||q1 - q2|| / ||Q1 - Q2||` in `W^{delta,p}(Omega)`.
    pub potential_ratios: Vec<f64>,
    /// `[1 / C(1/gamma), C(gamma)]`.
    pub potential_band: [f64; 2],
    /// DtN difference norm ratios, conductivity over Schroedinger, kernel route.
    pub dtn_ratios_kernel: Vec<f64>,
    /// Same with the multiplier route.
    pub dtn_ratios_multiplier: Vec<f64>,
}

impl NormEquivalenceReport {
    pub fn potential_within_band(&self) -> bool {
        self.potential_ratios
            .iter()
            .all(|r| *r >= self.potential_band[0] * (1.0 - 1e-12) && *r <= self.potential_band[1] * (1.0 + 1e-12))
    }
}

fn ratio_band(v: &[f64]) -> [f64; 2] {
    [v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(0.0, f64::max)]
}

impl NormEquivalenceReport {
    pub fn dtn_band_kernel(&self) -> [f64; 2] {
        ratio_band(&self.dtn_ratios_kernel)
    }

    pub fn dtn_band_multiplier(&self) -> [f64; 2] {
        ratio_band(&self.dtn_ratios_multiplier)
    }
}

pub fn norm_equivalences(
    lab: &ReductionLab,
    pairs: &[(GridField, GridField)],
    delta: f64,
    p: f64,
) -> Result<NormEquivalenceReport> {
    let params = FractionalSobolevParams::new(delta, p, lab.geometry.omega().clone())?;
    let gamma = &lab.spec.gamma;
    let inv = gamma.map(|g| 1.0 / g);
    let potential_band = [1.0 / multiplier_bound(&inv, &params), multiplier_bound(gamma, &params)];
    let mut report = NormEquivalenceReport {
        potential_ratios: Vec::new(),
        potential_band,
        dtn_ratios_kernel: Vec::new(),
        dtn_ratios_multiplier: Vec::new(),
    };
    for (q1, q2) in pairs {
        let v = q1.sub(q2)?.masked(lab.geometry.omega());
        let scaled = v.zip_with(gamma, |v, g| v / g)?;
        report.potential_ratios.push(gagliardo_norm(&v, &params)? / gagliardo_norm(&scaled, &params)?);
        let cond = lab.conductivity.dtn(q1)?.sub(&lab.conductivity.dtn(q2)?)?;
        let cond_norm = cond.op_norm()?;
        for (route, out) in [
            (ReductionRoute::Kernel, &mut report.dtn_ratios_kernel),
            (ReductionRoute::Multiplier, &mut report.dtn_ratios_multiplier),
        ] {
            let d = lab.reduced_difference(q1, q2, route)?;
            out.push(cond_norm / cond.with_entries(d, "reduced".into()).op_norm()?);
        }
    }
    Ok(report)
}
