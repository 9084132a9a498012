use nalgebra::DMatrix;

use super::{fractional_constant, KernelOp, OperatorDescriptor};
use crate::error::{Error, Result};
use crate::lattice::{apply_symbol, fft_forward, GridField, LatticeSpec, RegionMask};

/// Two-point conductivity form
/// `B(u, v) = (c/2) sum_{x != y} a(x) a(y) (u(y) - u(x)) (v(y) - v(x)) k(x - y) h^{2n}
///          + sum_{Omega} q u v h^n`, with `a = gamma^{1/2}`.
#[derive(Debug, Clone)]
pub struct ConductivityForm {
    lattice: LatticeSpec,
    s: f64,
    gamma: GridField,
    sqrt_gamma: Vec<f64>,
    q: GridField,
    omega: Option<RegionMask>,
    c_ns: f64,
    weights: Vec<f64>,
    weights_hat: Vec<f64>,
    /// `sum_{y != x} w(x - y) a(y)`
    smoothed_a: Vec<f64>,
}

impl ConductivityForm {
    /// Form built on the corrected kernel's pair weights.
    ///
    /// `omega`, when given, restricts the potential term and is checked to
    /// contain every node where `gamma != 1`.
    pub fn new(gamma: &GridField, q: &GridField, s: f64, omega: Option<&RegionMask>) -> Result<Self> {
        Self::with_kernel(gamma, q, &KernelOp::new(gamma.lattice(), s)?, omega)
    }

    /// Form built on the pair weights of `kernel`.
    pub fn with_kernel(gamma: &GridField, q: &GridField, kernel: &KernelOp, omega: Option<&RegionMask>) -> Result<Self> {
        let lattice = gamma.lattice().clone();
        let s = kernel.s();
        lattice.check_same(kernel.lattice())?;
        lattice.check_same(q.lattice())?;
        let lower = gamma.values().iter().cloned().fold(f64::INFINITY, f64::min);
        if !(lower > 0.0) {
            return Err(Error::InvalidArgument(format!("conductivity must be positive (min {lower:.3e})")));
        }
        if let Some(om) = omega {
            lattice.check_same(om.lattice())?;
            if let Some(i) = (0..lattice.num_nodes()).find(|&i| !om.contains(i) && (gamma.values()[i] - 1.0).abs() > 1e-14)
            {
                return Err(Error::InvalidArgument(format!("conductivity differs from 1 at node {i} outside Omega")));
            }
        }
        let weights = kernel.pair_weights().to_vec();
        let weights_hat: Vec<f64> = fft_forward(&lattice, &weights).iter().map(|c| c.re).collect();
        let sqrt_gamma: Vec<f64> = gamma.values().iter().map(|g| g.sqrt()).collect();
        let smoothed_a = apply_symbol(&lattice, &sqrt_gamma, &weights_hat);
        Ok(Self {
            c_ns: fractional_constant(lattice.dim(), s),
            lattice,
            s,
            gamma: gamma.clone(),
            sqrt_gamma,
            q: q.clone(),
            omega: omega.cloned(),
            weights,
            weights_hat,
            smoothed_a,
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn gamma(&self) -> &GridField {
        &self.gamma
    }

    pub fn q(&self) -> &GridField {
        &self.q
    }

    fn potential_at(&self, x: usize) -> f64 {
        match &self.omega {
            Some(om) if !om.contains(x) => 0.0,
            _ => self.q.values()[x],
        }
    }

    /// The field `A u` with `B(u, v) = sum_x v(x) (A u)(x)`.
    pub fn apply(&self, u: &GridField) -> Result<Vec<f64>> {
        self.lattice.check_same(u.lattice())?;
        let hn = self.lattice.cell_volume();
        let au: Vec<f64> = u.values().iter().zip(&self.sqrt_gamma).map(|(u, a)| u * a).collect();
        let conv = apply_symbol(&self.lattice, &au, &self.weights_hat);
        Ok((0..self.lattice.num_nodes())
            .map(|x| {
                let a = self.sqrt_gamma[x];
                let ux = u.values()[x];
                self.c_ns * hn * hn * a * (ux * self.smoothed_a[x] - conv[x]) + hn * self.potential_at(x) * ux
            })
            .collect())
    }

    /// Form matrix `B(e_col, e_row)` between two node sets.
    pub fn matrix(&self, rows: &RegionMask, cols: &RegionMask) -> DMatrix<f64> {
        let lat = &self.lattice;
        let hn = lat.cell_volume();
        let scale = self.c_ns * hn * hn;
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let x = rows.nodes()[i];
            let y = cols.nodes()[j];
            if x == y {
                scale * self.sqrt_gamma[x] * self.smoothed_a[x] + hn * self.potential_at(x)
            } else {
                -scale * self.sqrt_gamma[x] * self.sqrt_gamma[y] * self.weights[lat.offset_index(x, y)]
            }
        })
    }

    pub fn descriptor(&self) -> OperatorDescriptor {
        let g = self.gamma.values();
        OperatorDescriptor::Conductivity {
            lattice: self.lattice.clone(),
            s: self.s,
            gamma_min: g.iter().cloned().fold(f64::INFINITY, f64::min),
            gamma_max: g.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// `B_{gamma,q}(u, v)`.
pub fn conductivity_bilinear(u: &GridField, v: &GridField, form: &ConductivityForm) -> Result<f64> {
    form.lattice.check_same(v.lattice())?;
    let au = form.apply(u)?;
    Ok(au.iter().zip(v.values()).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(lat: &LatticeSpec) -> GridField {
        GridField::from_fn(lat, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 0.25 {
                1.0 + 0.5 * (1.0 - 1.0 / (1.0 - 4.0 * r2)).exp()
            } else {
                1.0
            }
        })
    }

    #[test]
    fn direct_pair_sum_oracle() {
        let lat = LatticeSpec::new(2, 2.0, 8).unwrap();
        let gamma = bump(&lat).map(|a| a * a);
        let q = GridField::from_fn(&lat, |x| x[0] + 0.5);
        let form = ConductivityForm::with_kernel(&gamma, &q, &KernelOp::raw(&lat, 0.4).unwrap(), None).unwrap();
        let u = GridField::from_fn(&lat, |x| (x[0] + 2.0 * x[1]).sin());
        let v = GridField::from_fn(&lat, |x| (x[0] * x[1]).cos());
        let c = fractional_constant(2, 0.4);
        let hn = lat.cell_volume();
        let a: Vec<f64> = gamma.values().iter().map(|g| g.sqrt()).collect();
        let mut expected = 0.0;
        for x in 0..64 {
            for y in 0..64 {
                if x != y {
                    let w = lat.distance(x, y).powf(-2.8);
                    expected += 0.5 * c * a[x] * a[y] * (u.values()[y] - u.values()[x]) * (v.values()[y] - v.values()[x]) * w * hn * hn;
                }
            }
            expected += q.values()[x] * u.values()[x] * v.values()[x] * hn;
        }
        let got = conductivity_bilinear(&u, &v, &form).unwrap();
        assert!((got - expected).abs() < 1e-11 * expected.abs(), "{got} vs {expected}");
        let swapped = conductivity_bilinear(&v, &u, &form).unwrap();
        assert!((got - swapped).abs() < 1e-12 * got.abs());
    }

    #[test]
    fn unit_conductivity_matches_kernel_energy() {
        let lat = LatticeSpec::new(2, 4.0, 32).unwrap();
        let one = GridField::constant(&lat, 1.0);
        let zero = GridField::zeros(&lat);
        let u = GridField::from_fn(&lat, |x| (-(x[0] * x[0] + x[1] * x[1])).exp() * (1.0 + x[0]));
        for op in [KernelOp::raw(&lat, 0.5).unwrap(), KernelOp::new(&lat, 0.5).unwrap()] {
            let form = ConductivityForm::with_kernel(&one, &zero, &op, None).unwrap();
            let b = conductivity_bilinear(&u, &u, &form).unwrap();
            let e = op.apply(&u).unwrap().dot(&u).unwrap();
            assert!((b - e).abs() < 1e-8 * e.abs(), "{b} vs {e}");
            assert!(conductivity_bilinear(&one, &one, &form).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn matrix_agrees_with_apply() {
        let lat = LatticeSpec::new(2, 2.0, 8).unwrap();
        let gamma = bump(&lat);
        let q = GridField::constant(&lat, 0.3);
        let all = RegionMask::from_nodes(&lat, (0..64).collect(), crate::lattice::RegionLabel::Omega).unwrap();
        let form = ConductivityForm::new(&gamma, &q, 0.6, Some(&all)).unwrap();
        let m = form.matrix(&all, &all);
        let u = GridField::from_fn(&lat, |x| x[0] - x[1] * x[1]);
        let au = form.apply(&u).unwrap();
        let mu = &m * nalgebra::DVector::from_column_slice(u.values());
        for i in 0..64 {
            assert!((au[i] - mu[i]).abs() < 1e-12 * (1.0 + au[i].abs()));
        }
    }
}
