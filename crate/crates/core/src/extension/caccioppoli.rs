use serde::{Deserialize, Serialize};

use super::solver::{ExtensionField, ExtensionSolver};
use crate::error::{Error, Result};
use crate::lattice::RegionMask;

/// Weighted energy on `B_{r1}` against weighted mass on `B_{r2}`, both centred on the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliReport {
    pub center: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs (r2 - r1)^2 / rhs`.
    pub constant: f64,
}

impl CaccioppoliReport {
    pub fn passes(&self, c_max: f64) -> bool {
        self.constant.is_finite() && self.constant <= c_max
    }
}

/// Evaluates both sides of the Caccioppoli inequality for an extension solved on
/// `omega x (0, Z)`. Vertical differences are attributed to element midpoints,
/// lateral differences to edge midpoints on each level.
pub fn caccioppoli_verify(
    field: &ExtensionField,
    solver: &ExtensionSolver,
    omega: &RegionMask,
    center: &[f64],
    r1: f64,
    r2: f64,
) -> Result<CaccioppoliReport> {
    let grid = solver.grid();
    let lat = grid.lattice();
    lat.check_same(&field.lattice)?;
    lat.check_same(omega.lattice())?;
    if center.len() != lat.dim() {
        return Err(Error::DimensionMismatch { expected: lat.dim(), got: center.len() });
    }
    if !(r1 > 0.0 && r1 < r2) {
        return Err(Error::GeometryViolation(format!("radii must satisfy 0 < r1 < r2, got {r1}, {r2}")));
    }
    let lateral_room = omega.distance_to_complement(center);
    if r2 >= lateral_room || r2 >= grid.height() {
        return Err(Error::GeometryViolation(format!(
            "r2 = {r2} reaches the side ({lateral_room:.4}) or top ({:.4}) of the cylinder",
            grid.height()
        )));
    }
    let n = lat.dim();
    let m = lat.pts_per_side();
    let h = lat.spacing();
    let hn = lat.cell_volume();
    let z = grid.heights();
    let st = grid.stiffness();
    let ms = grid.mass();
    let levels = field.levels();
    let np = lat.num_nodes();
    let u = |j: usize, x: usize| if j < levels { field.values[j * np + x] } else { 0.0 };
    let lateral_sq = |x: &[f64]| x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>();

    let (mut lhs, mut rhs) = (0.0, 0.0);
    for x in 0..np {
        let cx = lat.coord(x);
        let d2 = lateral_sq(&cx);
        if d2 >= r2 * r2 {
            continue;
        }
        let idx = lat.multi_index(x);
        for j in 0..levels {
            if d2 + z[j] * z[j] < r2 * r2 {
                rhs += ms[j] * hn * u(j, x).powi(2);
            }
            let zm = 0.5 * (z[j] + z[j + 1]);
            if d2 + zm * zm < r1 * r1 {
                lhs += st[j] * hn * (u(j + 1, x) - u(j, x)).powi(2);
            }
            for d in 0..n {
                let mut nb = idx.clone();
                nb[d] = (nb[d] + 1) % m;
                let mut mid = cx.clone();
                mid[d] += 0.5 * h;
                if lateral_sq(&mid) + z[j] * z[j] < r1 * r1 {
                    let diff = (u(j, lat.flat_index(&nb)) - u(j, x)) / h;
                    lhs += ms[j] * hn * diff * diff;
                }
            }
        }
    }
    let constant = if rhs > 0.0 { lhs * (r2 - r1).powi(2) / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(CaccioppoliReport { center: center.to_vec(), r1, r2, lhs, rhs, constant })
}
