//! Gram matrices of node indicators in H^s and the dual / operator norms they induce.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{convolution_kernel, RegionMask};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, spectral_norm, sym_eigen};

/// Condition number above which `build_gram` logs a warning.
pub const GRAM_CONDITION_CAP: f64 = 1e12;

/// Discrete H^s Gram matrix of the indicator basis on a region.
#[derive(Debug, Clone)]
pub struct SobolevGram {
    s: f64,
    node_basis: RegionMask,
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    condition: f64,
}

impl SobolevGram {
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn node_basis(&self) -> &RegionMask {
        &self.node_basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Lower Cholesky factor `L` with `G = L L^T`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `L^{-1} B` for a block of column vectors.
    pub fn whiten_left(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let l = self.chol.l();
        l.solve_lower_triangular(b).expect("Cholesky factor is nonsingular")
    }

    /// `L^{-1} D L^{-T}`, whose singular values are those of `G^{-1/2} D G^{-1/2}`.
    pub fn whiten_form(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let left = self.whiten_left(d);
        self.whiten_left(&left.transpose()).transpose()
    }

    /// `||f||` in the Gram metric, `(f^T G f)^{1/2}`.
    pub fn norm_of(&self, f: &DVector<f64>) -> f64 {
        f.dot(&(&self.matrix * f)).max(0.0).sqrt()
    }
}

/// `G_xy = h^n g(x - y)`, `g` the kernel of the multiplier `(1 + |xi|^2)^s`.
pub fn build_gram(region: &RegionMask, s: f64) -> Result<SobolevGram> {
    if region.is_empty() {
        return Err(Error::InvalidRegion("empty region".into()));
    }
    let lat = region.lattice();
    let symbol: Vec<f64> = lat.frequency_sq().iter().map(|&x| (1.0 + x).powf(s)).collect();
    let kernel = convolution_kernel(lat, &symbol);
    let nodes = region.nodes();
    let k = nodes.len();
    let hn = lat.cell_volume();
    let mut matrix = DMatrix::zeros(k, k);
    for (i, &x) in nodes.iter().enumerate() {
        for (j, &y) in nodes.iter().enumerate().skip(i) {
            let v = hn * 0.5 * (kernel[lat.offset_index(x, y)] + kernel[lat.offset_index(y, x)]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    let (vals, _) = sym_eigen(&matrix);
    let lo = vals[0];
    let hi = *vals.last().unwrap();
    if !(lo > 0.0) {
        return Err(Error::Singular(format!("Gram matrix not positive definite (min eigenvalue {lo:.3e})")));
    }
    let condition = hi / lo;
    if condition > GRAM_CONDITION_CAP {
        warn!("H^{s} Gram on '{}' is ill-conditioned: cond = {condition:.3e}", region.label());
    }
    let chol = Cholesky::new(matrix.clone())
        .ok_or_else(|| Error::Singular("Cholesky factorization of Gram failed".into()))?;
    Ok(SobolevGram { s, node_basis: region.clone(), matrix, chol, condition })
}

/// `(v^T G^{-1} v)^{1/2}`: the dual norm of the functional `f -> sum v_x f_x`.
pub fn dual_norm(v: &[f64], gram: &SobolevGram) -> Result<f64> {
    if v.len() != gram.dim() {
        return Err(Error::DimensionMismatch { expected: gram.dim(), got: v.len() });
    }
    let b = DMatrix::from_column_slice(v.len(), 1, v);
    Ok(gram.whiten_left(&b).norm())
}

/// Largest singular value of `G^{-1/2} D G^{-1/2}`.
pub fn op_norm(d: &DMatrix<f64>, gram: &SobolevGram) -> Result<f64> {
    if d.nrows() != gram.dim() || d.ncols() != gram.dim() {
        return Err(Error::DimensionMismatch { expected: gram.dim(), got: d.nrows() });
    }
    Ok(spectral_norm(&gram.whiten_form(d)))
}

/// Singular values of a map `A` from the column space (metric `col`) to the
/// row space (metric `row`): those of `L_row^T A L_col^{-T}`.
pub fn op_norm_between(a: &DMatrix<f64>, row: &SobolevGram, col: &SobolevGram) -> Result<Vec<f64>> {
    if a.nrows() != row.dim() || a.ncols() != col.dim() {
        return Err(Error::DimensionMismatch { expected: row.dim(), got: a.nrows() });
    }
    let right = col.whiten_left(&a.transpose()).transpose();
    Ok(singular_values(&(row.factor().transpose() * right)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{hs_norm_fourier, GridField, LatticeSpec, RegionLabel};

    fn region(lat: &LatticeSpec, nodes: Vec<usize>) -> RegionMask {
        RegionMask::from_nodes(lat, nodes, RegionLabel::W).unwrap()
    }

    #[test]
    fn s_zero_gives_scaled_identity() {
        let lat = LatticeSpec::new(2, 1.0, 8).unwrap();
        let g = build_gram(&region(&lat, vec![0, 5, 9, 40]), 0.0).unwrap();
        let hn = lat.cell_volume();
        assert!((g.matrix() - DMatrix::identity(4, 4) * hn).norm() < 1e-15);
    }

    #[test]
    fn single_node_equals_indicator_norm() {
        let lat = LatticeSpec::new(2, 1.0, 8).unwrap();
        let g = build_gram(&region(&lat, vec![13]), 0.7).unwrap();
        let e = GridField::indicator(&lat, 13);
        let n = hs_norm_fourier(&e, 0.7);
        assert!((g.matrix()[(0, 0)] - n * n).abs() < 1e-12 * n * n);
    }

    #[test]
    fn polarization_matches_fourier_norms() {
        let lat = LatticeSpec::new(2, 1.0, 8).unwrap();
        let g = build_gram(&region(&lat, vec![10, 21]), 0.5).unwrap();
        let plus = GridField::indicator(&lat, 10).add(&GridField::indicator(&lat, 21)).unwrap();
        let minus = GridField::indicator(&lat, 10).sub(&GridField::indicator(&lat, 21)).unwrap();
        let off = 0.25 * (hs_norm_fourier(&plus, 0.5).powi(2) - hs_norm_fourier(&minus, 0.5).powi(2));
        assert!((g.matrix()[(0, 1)] - off).abs() < 1e-12);
    }

    #[test]
    fn dual_and_op_norm_identities() {
        let lat = LatticeSpec::new(2, 1.0, 8).unwrap();
        let g = build_gram(&region(&lat, vec![3, 10, 21, 30]), 0.5).unwrap();
        let w = DVector::from_vec(vec![0.3, -1.0, 0.5, 2.0]);
        let v = g.matrix() * &w;
        let expected = w.dot(&v).sqrt();
        assert!((dual_norm(v.as_slice(), &g).unwrap() - expected).abs() < 1e-12 * expected);
        assert!((op_norm(g.matrix(), &g).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(op_norm(&DMatrix::zeros(4, 4), &g).unwrap(), 0.0);
    }
}
