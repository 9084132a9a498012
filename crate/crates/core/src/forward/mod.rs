//! Exterior-value fractional Schroedinger problem and its Dirichlet-to-Neumann map.
//!
//! For data `f` supported in `W` the solution is `u = f + u_Omega` with
//! `R_Omega((-Delta)^s + q) u = 0`. With the translation-invariant kernel
//! `K` of the chosen realization, this is the dense system
//! `(K_OO + diag q) u_O = -K_OW f`, and the DtN form matrix is
//! `h^n (K_WW - K_WO (K_OO + diag q)^{-1} K_OW)`.

mod aq;
mod dtn;

pub use aq::{check_aq, AqCertificate, DominationReport, DEFAULT_KAPPA};
pub use dtn::{DtnMatrix, DtnRecord};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractional::{KernelOp, MultiplierOp};
use crate::lattice::{
    build_gram, convolution_kernel, op_norm_between, GeometryFile, GridField, LatticeSpec, RegionLabel, RegionMask,
    SobolevGram,
};
use crate::linalg::GuardedLu;
use crate::provenance::{hash_f64s, hash_json};

/// Lattice, the three regions and the fractional order.
#[derive(Debug, Clone)]
pub struct ProblemGeometry {
    lattice: LatticeSpec,
    omega: RegionMask,
    omega_prime: RegionMask,
    w: RegionMask,
    s: f64,
    hash: String,
}

#[derive(Serialize)]
struct GeometryKey<'a> {
    lattice: &'a LatticeSpec,
    omega: &'a [usize],
    omega_prime: &'a [usize],
    w: &'a [usize],
    s: f64,
}

impl ProblemGeometry {
    pub fn new(omega: RegionMask, omega_prime: RegionMask, w: RegionMask, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidArgument(format!("s must lie in (0, 1), got {s}")));
        }
        let lattice = omega.lattice().clone();
        lattice.check_same(omega_prime.lattice())?;
        lattice.check_same(w.lattice())?;
        if !omega_prime.is_subset_of(&omega) {
            return Err(Error::InvalidRegion("Omega' must be contained in Omega".into()));
        }
        if !omega.is_disjoint(&w) {
            return Err(Error::InvalidRegion("Omega and W must be disjoint".into()));
        }
        let hash = hash_json(&GeometryKey {
            lattice: &lattice,
            omega: omega.nodes(),
            omega_prime: omega_prime.nodes(),
            w: w.nodes(),
            s,
        });
        Ok(Self {
            lattice,
            omega: omega.with_label(RegionLabel::Omega),
            omega_prime: omega_prime.with_label(RegionLabel::OmegaPrime),
            w: w.with_label(RegionLabel::W),
            s,
            hash,
        })
    }

    pub fn from_file(file: &GeometryFile, s: f64) -> Result<Self> {
        Self::new(
            file.region(&RegionLabel::Omega)?,
            file.region(&RegionLabel::OmegaPrime)?,
            file.region(&RegionLabel::W)?,
            s,
        )
    }

    /// Reference configuration on `48^2` nodes.
    pub fn reference(s: f64) -> Result<Self> {
        Self::from_file(&GeometryFile::reference(), s)
    }

    pub fn reference_with(pts_per_side: usize, s: f64) -> Result<Self> {
        Self::from_file(&GeometryFile::reference_with(pts_per_side), s)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn omega(&self) -> &RegionMask {
        &self.omega
    }

    pub fn omega_prime(&self) -> &RegionMask {
        &self.omega_prime
    }

    pub fn w(&self) -> &RegionMask {
        &self.w
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// SHA-256 of the lattice, node sets and order.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Critical integrability exponent `n / (2s)`.
    pub fn critical_p(&self) -> f64 {
        self.lattice.dim() as f64 / (2.0 * self.s)
    }
}

/// Which discretization of `(-Delta)^s` drives the forward problem.
#[derive(Debug, Clone)]
pub enum Realization {
    Multiplier,
    Kernel { corrected: bool },
    /// Any other nonnegative even symbol, e.g. an extension trace symbol.
    Symbol { name: String, symbol: Arc<Vec<f64>> },
    /// Dense blocks supplied directly, without a translation-invariant symbol.
    Precomputed { name: String },
}

impl Realization {
    pub fn name(&self) -> String {
        match self {
            Realization::Multiplier => "multiplier".into(),
            Realization::Kernel { corrected: true } => "kernel".into(),
            Realization::Kernel { corrected: false } => "kernel_raw".into(),
            Realization::Symbol { name, .. } | Realization::Precomputed { name } => name.clone(),
        }
    }

    pub fn symbol(&self, lattice: &LatticeSpec, s: f64) -> Result<Vec<f64>> {
        Ok(match self {
            Realization::Multiplier => MultiplierOp::homogeneous(lattice, s).symbol().to_vec(),
            Realization::Kernel { corrected: true } => KernelOp::new(lattice, s)?.symbol().to_vec(),
            Realization::Kernel { corrected: false } => KernelOp::raw(lattice, s)?.symbol().to_vec(),
            Realization::Symbol { symbol, .. } => {
                if symbol.len() != lattice.num_nodes() {
                    return Err(Error::DimensionMismatch { expected: lattice.num_nodes(), got: symbol.len() });
                }
                symbol.as_ref().clone()
            }
            Realization::Precomputed { name } => {
                return Err(Error::InvalidArgument(format!("realization '{name}' has no symbol")));
            }
        })
    }
}

/// `R_Omega((-Delta)^s + q)` as a dense `|Omega| x |Omega|` matrix.
#[derive(Debug, Clone)]
pub struct RestrictedOperator {
    pub matrix: DMatrix<f64>,
    pub q_omega: Vec<f64>,
}

impl RestrictedOperator {
    /// `||M - M^T||_F / ||M||_F`.
    pub fn asymmetry(&self) -> f64 {
        crate::linalg::asymmetry(&self.matrix)
    }
}

/// Solutions for every W node indicator and the DtN map built from them.
#[derive(Debug, Clone)]
pub struct DtnAssembly {
    pub dtn: DtnMatrix,
    /// Column `j` is `u_Omega` for data `e_{w_j}`.
    pub solutions: DMatrix<f64>,
}

/// Comparison operator `f -> u_qbar|_{Omega'}` with its two metrics.
#[derive(Debug, Clone)]
pub struct ComparisonOperator {
    pub matrix: DMatrix<f64>,
    pub row_gram: Arc<SobolevGram>,
    pub col_gram: Arc<SobolevGram>,
}

impl ComparisonOperator {
    /// Singular values from `H~^s(W)` to `H^s(Omega')`, nonincreasing.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        op_norm_between(&self.matrix, &self.row_gram, &self.col_gram)
    }

    /// Euclidean column norms (raw nodal values).
    pub fn column_norms(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.norm()).collect()
    }

    /// `||A f||_{H^s(Omega')}`.
    pub fn image_norm(&self, f: &DVector<f64>) -> f64 {
        self.row_gram.norm_of(&(&self.matrix * f))
    }
}

/// Dense forward model on a fixed geometry and realization.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    geometry: Arc<ProblemGeometry>,
    realization: Realization,
    k_oo: DMatrix<f64>,
    k_ow: DMatrix<f64>,
    k_ww: DMatrix<f64>,
    gram_w: Arc<SobolevGram>,
}

fn block(lat: &LatticeSpec, kernel: &[f64], rows: &RegionMask, cols: &RegionMask) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| kernel[lat.offset_index(rows.nodes()[i], cols.nodes()[j])])
}

impl ForwardModel {
    pub fn new(geometry: &ProblemGeometry, realization: Realization) -> Result<Self> {
        let gram_w = Arc::new(build_gram(geometry.w(), geometry.s())?);
        Self::with_gram(geometry, realization, gram_w)
    }

    /// Reuses an existing `H~^s(W)` Gram matrix.
    pub fn with_gram(geometry: &ProblemGeometry, realization: Realization, gram_w: Arc<SobolevGram>) -> Result<Self> {
        let lat = geometry.lattice();
        let symbol = realization.symbol(lat, geometry.s())?;
        let kernel = convolution_kernel(lat, &symbol);
        let mut k_oo = block(lat, &kernel, geometry.omega(), geometry.omega());
        k_oo = (&k_oo + k_oo.transpose()) * 0.5;
        let k_ow = block(lat, &kernel, geometry.omega(), geometry.w());
        let mut k_ww = block(lat, &kernel, geometry.w(), geometry.w());
        k_ww = (&k_ww + k_ww.transpose()) * 0.5;
        Ok(Self { geometry: Arc::new(geometry.clone()), realization, k_oo, k_ow, k_ww, gram_w })
    }

    /// Model from operator blocks `K_OO`, `K_OW`, `K_WW` (symmetric parts are enforced).
    pub fn from_blocks(
        geometry: &ProblemGeometry,
        name: String,
        k_oo: DMatrix<f64>,
        k_ow: DMatrix<f64>,
        k_ww: DMatrix<f64>,
        gram_w: Arc<SobolevGram>,
    ) -> Result<Self> {
        let (o, w) = (geometry.omega().len(), geometry.w().len());
        for (m, r, c) in [(&k_oo, o, o), (&k_ow, o, w), (&k_ww, w, w)] {
            if m.nrows() != r || m.ncols() != c {
                return Err(Error::DimensionMismatch { expected: r * c, got: m.nrows() * m.ncols() });
            }
        }
        let k_oo = (&k_oo + k_oo.transpose()) * 0.5;
        let k_ww = (&k_ww + k_ww.transpose()) * 0.5;
        Ok(Self {
            geometry: Arc::new(geometry.clone()),
            realization: Realization::Precomputed { name },
            k_oo,
            k_ow,
            k_ww,
            gram_w,
        })
    }

    pub fn geometry(&self) -> &ProblemGeometry {
        &self.geometry
    }

    pub fn realization(&self) -> &Realization {
        &self.realization
    }

    pub fn gram_w(&self) -> &Arc<SobolevGram> {
        &self.gram_w
    }

    /// `K_{Omega Omega}` without the potential.
    pub fn interior_block(&self) -> &DMatrix<f64> {
        &self.k_oo
    }

    /// `K_{Omega W}`.
    pub fn coupling_block(&self) -> &DMatrix<f64> {
        &self.k_ow
    }

    fn q_on_omega(&self, q: &GridField) -> Result<Vec<f64>> {
        self.geometry.lattice().check_same(q.lattice())?;
        Ok(q.restrict(self.geometry.omega()))
    }

    pub fn restricted(&self, q: &GridField) -> Result<RestrictedOperator> {
        let q_omega = self.q_on_omega(q)?;
        let mut matrix = self.k_oo.clone();
        for (i, v) in q_omega.iter().enumerate() {
            matrix[(i, i)] += v;
        }
        Ok(RestrictedOperator { matrix, q_omega })
    }

    fn factor(&self, q: &GridField) -> Result<(GuardedLu, Vec<f64>)> {
        let r = self.restricted(q)?;
        Ok((GuardedLu::new(r.matrix)?, r.q_omega))
    }

    /// `U = -(K_OO + Q)^{-1} K_OW`: interior values for each W indicator.
    pub fn solutions(&self, q: &GridField) -> Result<DMatrix<f64>> {
        let (lu, _) = self.factor(q)?;
        Ok(-lu.solve(&self.k_ow)?)
    }

    /// Solution of the exterior-value problem for data `f` supported in `W`.
    pub fn solve_exterior(&self, q: &GridField, f: &GridField) -> Result<GridField> {
        let lat = self.geometry.lattice();
        lat.check_same(f.lattice())?;
        if let Some(i) = (0..lat.num_nodes()).find(|&i| f.values()[i] != 0.0 && !self.geometry.w().contains(i)) {
            return Err(Error::InvalidArgument(format!("exterior data must be supported in W (node {i})")));
        }
        let (lu, _) = self.factor(q)?;
        let fw = DVector::from_vec(f.restrict(self.geometry.w()));
        let rhs = -(&self.k_ow * &fw);
        let u_o = lu.solve_vec(&rhs)?;
        let residual = (lu.matrix() * &u_o - &rhs).norm();
        let scale = (&self.k_ow * &fw).norm().max(fw.norm() * f64::MIN_POSITIVE);
        if residual > 1e-9 * scale.max(1e-300) && residual > 0.0 {
            return Err(Error::SolverBreakdown(format!("interior residual {residual:.3e} exceeds tolerance")));
        }
        let mut values = f.values().to_vec();
        for (&node, &v) in self.geometry.omega().nodes().iter().zip(u_o.iter()) {
            values[node] = v;
        }
        GridField::new(lat, values)
    }

    /// DtN form matrix at `q` together with the interior solutions.
    pub fn assemble(&self, q: &GridField) -> Result<DtnAssembly> {
        let q_omega = self.q_on_omega(q)?;
        let solutions = self.solutions(q)?;
        let hn = self.geometry.lattice().cell_volume();
        let mut entries = (&self.k_ww + self.k_ow.transpose() * &solutions) * hn;
        entries = (&entries + entries.transpose()) * 0.5;
        let dtn = DtnMatrix::new(
            self.geometry.clone(),
            entries,
            self.gram_w.clone(),
            hash_f64s(&q_omega),
            self.realization.name(),
        );
        Ok(DtnAssembly { dtn, solutions })
    }

    pub fn assemble_dtn(&self, q: &GridField) -> Result<DtnMatrix> {
        Ok(self.assemble(q)?.dtn)
    }

    /// `Lambda_q - Lambda_qbar`.
    pub fn gamma_diff(&self, q: &GridField, qbar: &GridField) -> Result<DtnMatrix> {
        self.assemble_dtn(q)?.sub(&self.assemble_dtn(qbar)?)
    }

    /// Exact difference form `h^n U2^T diag(q1 - q2) U1` from the two solution sets.
    pub fn difference_from_solutions(
        &self,
        q1: &GridField,
        u1: &DMatrix<f64>,
        q2: &GridField,
        u2: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let d: Vec<f64> = self.q_on_omega(q1)?.iter().zip(self.q_on_omega(q2)?).map(|(a, b)| a - b).collect();
        let hn = self.geometry.lattice().cell_volume();
        let mut scaled = u1.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= d[i] * hn;
        }
        let m = u2.transpose() * scaled;
        Ok((&m + m.transpose()) * 0.5)
    }

    /// Comparison operator at `qbar`, metrized by `H^s(Omega')` and `H~^s(W)`.
    pub fn comparison_operator(&self, qbar: &GridField) -> Result<ComparisonOperator> {
        let u = self.solutions(qbar)?;
        let op = self.geometry.omega_prime();
        let om = self.geometry.omega();
        let rows: Vec<usize> = op.nodes().iter().map(|&n| om.position(n).expect("Omega' inside Omega")).collect();
        let matrix = DMatrix::from_fn(rows.len(), u.ncols(), |i, j| u[(rows[i], j)]);
        let row_gram = Arc::new(build_gram(op, self.geometry.s())?);
        Ok(ComparisonOperator { matrix, row_gram, col_gram: self.gram_w.clone() })
    }

    /// Ratios `||Gamma_qbar(q) f||_{H^{-s}(W)} / ||A f||_{H^s(Omega')}` over all sample pairs.
    pub fn domination_check(
        &self,
        qbar: &GridField,
        samples: &[GridField],
        data: &[DVector<f64>],
    ) -> Result<DominationReport> {
        let cmp = self.comparison_operator(qbar)?;
        let base = self.assemble_dtn(qbar)?;
        let mut ratios = Vec::with_capacity(samples.len() * data.len());
        let mut violations = 0;
        for q in samples {
            let leaks = self.geometry.omega().nodes().iter().any(|&i| {
                !self.geometry.omega_prime().contains(i) && q.values()[i] != qbar.values()[i]
            });
            if leaks {
                return Err(Error::InvalidArgument("q - qbar must be supported in Omega'".into()));
            }
            let diff = self.assemble_dtn(q)?.sub(&base)?;
            for f in data {
                let num = diff.dual_norm_of(f)?;
                let den = cmp.image_norm(f);
                if den <= 1e-300 {
                    if num > 0.0 {
                        violations += 1;
                    }
                    continue;
                }
                ratios.push(num / den);
            }
        }
        Ok(DominationReport::from_ratios(ratios, violations))
    }
}
