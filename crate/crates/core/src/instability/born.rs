use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::extension::mask_dirichlet_laplacian;
use crate::forward::{DtnMatrix, ForwardModel, ProblemGeometry};
use crate::lattice::{gagliardo_norm, lp_norm, FractionalSobolevParams, GridField, RegionMask, SobolevGram};
use crate::linalg::{spectral_norm, sym_eigen};

/// Lowest Dirichlet-Laplacian modes of a region, orthonormal in discrete `L^2`.
#[derive(Debug, Clone)]
pub struct PerturbationBasis {
    region: RegionMask,
    vectors: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

pub fn perturbation_basis(region: &RegionMask, count: usize) -> Result<PerturbationBasis> {
    if count == 0 {
        return Err(Error::InvalidArgument("basis needs at least one direction".into()));
    }
    if count > region.len() {
        return Err(Error::InsufficientSize(format!("{count} directions requested on {} nodes", region.len())));
    }
    let (vals, vecs) = sym_eigen(&mask_dirichlet_laplacian(region));
    let scale = region.lattice().cell_volume().sqrt().recip();
    let mut vectors = DMatrix::zeros(region.len(), count);
    for j in 0..count {
        let mut col = vecs.column(j) * scale;
        let peak = col.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if peak < 0.0 {
            col = -col;
        }
        vectors.set_column(j, &col);
    }
    Ok(PerturbationBasis { region: region.clone(), vectors, eigenvalues: vals[..count].to_vec() })
}

impl PerturbationBasis {
    pub fn region(&self) -> &RegionMask {
        &self.region
    }

    /// Nodal values on the region, one column per direction.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `sum_j coeffs[j] d_j` as a lattice field; missing coefficients count as zero.
    pub fn field(&self, coeffs: &[f64]) -> GridField {
        let k = coeffs.len().min(self.len());
        let vals: Vec<f64> = (0..self.region.len())
            .map(|i| (0..k).map(|j| coeffs[j] * self.vectors[(i, j)]).sum())
            .collect();
        GridField::from_region_values(&self.region, &vals).expect("basis lives on its region")
    }
}

/// Linearized DtN map `d -> h^n U^T diag(d) U` at a background potential.
///
/// Forms are also kept in the whitened W metric, where the operator norm of a
/// form is its spectral norm; `matrix` stacks the whitened forms of the basis
/// directions as symmetric vectors (Frobenius-isometric).
#[derive(Debug, Clone)]
pub struct BornOperator {
    model: ForwardModel,
    qbar: GridField,
    base: DtnMatrix,
    basis: PerturbationBasis,
    /// Interior solutions at `qbar`, `Omega x W`.
    solutions: DMatrix<f64>,
    /// `U L^{-T}` on the basis region.
    whitened: DMatrix<f64>,
    rows: Vec<usize>,
    matrix: DMatrix<f64>,
    r: DMatrix<f64>,
}

/// One admissible direction: the least singular vector of the Born matrix
/// restricted to the first `prefix` basis directions.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub prefix: usize,
    pub coeffs: Vec<f64>,
    /// Normalized to unit `L^p(Omega)` norm.
    pub direction: GridField,
    /// `W^{delta,p}(Omega)` norm of the unit direction.
    pub sobolev_ratio: f64,
    /// Operator norm of the linearized DtN change per unit `L^p` norm.
    pub unit_gap: f64,
}

fn sym_vec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        out.push(m[(j, j)]);
        for i in 0..j {
            out.push(std::f64::consts::SQRT_2 * m[(i, j)]);
        }
    }
    out
}

/// Born operator of `model` at `qbar` with the lowest `basis_size` modes of Omega'.
pub fn build_born(model: &ForwardModel, qbar: &GridField, basis_size: usize) -> Result<BornOperator> {
    let geom = model.geometry();
    let basis = perturbation_basis(geom.omega_prime(), basis_size)?;
    let assembly = model.assemble(qbar)?;
    let solutions = assembly.solutions;
    let rows: Vec<usize> =
        geom.omega_prime().nodes().iter().map(|&x| geom.omega().position(x).expect("Omega' inside Omega")).collect();
    let restricted = DMatrix::from_fn(rows.len(), solutions.ncols(), |i, j| solutions[(rows[i], j)]);
    let whitened = model.gram_w().whiten_left(&restricted.transpose()).transpose();
    let hn = geom.lattice().cell_volume();
    let nw = solutions.ncols();
    let mut matrix = DMatrix::zeros(nw * (nw + 1) / 2, basis.len());
    for j in 0..basis.len() {
        let form = weighted_form(&whitened, basis.vectors().column(j).as_slice(), hn);
        matrix.set_column(j, &nalgebra::DVector::from_vec(sym_vec(&form)));
    }
    let r = matrix.clone().qr().r();
    Ok(BornOperator { model: model.clone(), qbar: qbar.clone(), base: assembly.dtn, basis, solutions, whitened, rows, matrix, r })
}

/// `h^n V^T diag(d) V`.
fn weighted_form(v: &DMatrix<f64>, d: &[f64], hn: f64) -> DMatrix<f64> {
    let mut scaled = v.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= d[i] * hn;
    }
    let m = v.transpose() * scaled;
    (&m + m.transpose()) * 0.5
}

impl BornOperator {
    pub fn geometry(&self) -> &ProblemGeometry {
        self.model.geometry()
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn qbar(&self) -> &GridField {
        &self.qbar
    }

    /// DtN map at `qbar`.
    pub fn base(&self) -> &DtnMatrix {
        &self.base
    }

    pub fn basis(&self) -> &PerturbationBasis {
        &self.basis
    }

    pub fn gram(&self) -> &Arc<SobolevGram> {
        self.model.gram_w()
    }

    /// Interior solutions at `qbar` for every W node indicator.
    pub fn solutions(&self) -> &DMatrix<f64> {
        &self.solutions
    }

    /// Stacked whitened forms of the basis directions.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn region_values(&self, d: &GridField) -> Result<Vec<f64>> {
        let geom = self.geometry();
        geom.lattice().check_same(d.lattice())?;
        if let Some(i) = (0..d.values().len()).find(|&i| d.values()[i] != 0.0 && !geom.omega_prime().contains(i)) {
            return Err(Error::InvalidArgument(format!("perturbation must be supported in Omega' (node {i})")));
        }
        Ok(d.restrict(geom.omega_prime()))
    }

    /// `[<(D Lambda)(d) e_i, e_j>]` on the W node indicators.
    pub fn form(&self, d: &GridField) -> Result<DMatrix<f64>> {
        let vals = self.region_values(d)?;
        let u = DMatrix::from_fn(self.rows.len(), self.solutions.ncols(), |i, j| self.solutions[(self.rows[i], j)]);
        Ok(weighted_form(&u, &vals, self.geometry().lattice().cell_volume()))
    }

    /// The same form in the whitened W metric.
    pub fn whitened_form(&self, d: &GridField) -> Result<DMatrix<f64>> {
        let vals = self.region_values(d)?;
        Ok(weighted_form(&self.whitened, &vals, self.geometry().lattice().cell_volume()))
    }

    /// `||(D Lambda)(d)||` from `H~^s(W)` to `H^{-s}(W)`.
    pub fn linear_gap(&self, d: &GridField) -> Result<f64> {
        Ok(spectral_norm(&self.whitened_form(d)?))
    }

    /// Singular values of the stacked Born matrix, nonincreasing.
    pub fn singular_values(&self) -> Vec<f64> {
        crate::linalg::singular_values(&self.r)
    }

    /// Least singular vector on every prefix of the basis, normalized in `L^p(Omega)`.
    pub fn candidates(&self, delta: f64, p: f64) -> Result<Vec<Candidate>> {
        let geom = self.geometry();
        let params = FractionalSobolevParams::new(delta, p, geom.omega().clone())?;
        let mut out = Vec::with_capacity(self.basis.len());
        for m in 1..=self.basis.len() {
            let block = self.r.view((0, 0), (m, m)).into_owned();
            let svd = block.svd(false, true);
            let v_t = svd.v_t.ok_or_else(|| Error::Singular("SVD without right vectors".into()))?;
            let j = (0..m).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).unwrap();
            let mut coeffs: Vec<f64> = v_t.row(j).iter().cloned().collect();
            // fix the sign so the last coefficient is positive
            if coeffs[m - 1] < 0.0 {
                coeffs.iter_mut().for_each(|c| *c = -*c);
            }
            let field = self.basis.field(&coeffs);
            let norm = lp_norm(&field, p, geom.omega())?;
            if !(norm > 0.0) {
                continue;
            }
            let direction = field.scale(1.0 / norm);
            let sobolev_ratio = gagliardo_norm(&direction, &params)?;
            let unit_gap = self.linear_gap(&direction)?;
            out.push(Candidate { prefix: m, coeffs, direction, sobolev_ratio, unit_gap });
        }
        Ok(out)
    }
}
