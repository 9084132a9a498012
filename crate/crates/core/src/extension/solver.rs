use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::CylinderGrid;
use crate::error::{Error, Result};
use crate::forward::{ForwardModel, ProblemGeometry, Realization};
use crate::lattice::{apply_symbol, build_gram, convolution_kernel, fft_forward, fft_inverse, GridField, LatticeSpec, RegionLabel, RegionMask};

/// Tail fraction above which a warning is logged.
pub const TAIL_WARNING: f64 = 1e-6;

/// Dual cell of the lattice where the metric differs from the identity.
#[derive(Debug, Clone)]
struct Corner {
    nodes: Vec<usize>,
    excess: Vec<f64>,
}

/// Finite-difference solver for the weighted extension on a [`CylinderGrid`].
///
/// The lateral operator is the spectral Laplacian plus a corner-gradient
/// correction `sum_c grad_c u . (a_c - I) grad_c u`; since the corner gradient
/// never exceeds the spectral one this stays positive for any admissible metric,
/// and it is exact when the metric is the identity.
#[derive(Debug, Clone)]
pub struct ExtensionSolver {
    grid: Arc<CylinderGrid>,
    kappa: f64,
    rho: Vec<f64>,
    corners: Vec<Corner>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

/// Extension values on levels `0..K` (level-major); the top level is zero.
#[derive(Debug, Clone)]
pub struct ExtensionField {
    pub lattice: LatticeSpec,
    pub heights: Vec<f64>,
    pub values: Vec<f64>,
    pub iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    lattice: LatticeSpec,
    heights: Vec<f64>,
    levels: usize,
}

impl ExtensionField {
    pub fn level(&self, j: usize) -> &[f64] {
        let n = self.lattice.num_nodes();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn levels(&self) -> usize {
        self.values.len() / self.lattice.num_nodes()
    }

    pub fn trace(&self) -> GridField {
        GridField::new(&self.lattice, self.level(0).to_vec()).expect("finite trace")
    }

    /// `EXT1`, header length (u32 LE), JSON header, then level-major f64 LE values.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&FieldHeader {
            lattice: self.lattice.clone(),
            heights: self.heights.clone(),
            levels: self.levels(),
        })?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(b"EXT1")?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 8 || &bytes[..4] != b"EXT1" {
            return Err(Error::Config("not an extension field file".into()));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header: FieldHeader = serde_json::from_slice(
            bytes.get(8..8 + hlen).ok_or_else(|| Error::Config("truncated extension header".into()))?,
        )?;
        let body = &bytes[8 + hlen..];
        if body.len() != header.levels * header.lattice.num_nodes() * 8 {
            return Err(Error::Config("extension body length does not match header".into()));
        }
        let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { lattice: header.lattice, heights: header.heights, values, iterations: 0 })
    }
}

fn corner_nodes(lat: &LatticeSpec, base: usize) -> Vec<usize> {
    let n = lat.dim();
    let m = lat.pts_per_side();
    let idx = lat.multi_index(base);
    (0..1usize << n)
        .map(|b| {
            let shifted: Vec<usize> = (0..n).map(|i| (idx[i] + ((b >> i) & 1)) % m).collect();
            lat.flat_index(&shifted)
        })
        .collect()
}

impl ExtensionSolver {
    pub fn new(grid: CylinderGrid) -> Result<Self> {
        let lat = grid.lattice().clone();
        let n = lat.dim();
        let kappa = Self::calibrated_constant(&grid);
        let rho = lat.frequency_sq();
        let metric = grid.metric();
        let mut corners = Vec::new();
        if !metric.is_identity() {
            let scale = 1.0 / (1usize << n) as f64;
            for base in 0..lat.num_nodes() {
                let nodes = corner_nodes(&lat, base);
                let mut excess = vec![0.0; n * n];
                for &v in &nodes {
                    for (e, a) in excess.iter_mut().zip(metric.at(v)) {
                        *e += scale * a;
                    }
                }
                for i in 0..n {
                    excess[i * n + i] -= 1.0;
                }
                if excess.iter().any(|v| v.abs() > 1e-15) {
                    corners.push(Corner { nodes, excess });
                }
            }
        }
        Ok(Self { grid: Arc::new(grid), kappa, rho, corners, tolerance: 1e-11, max_iterations: 400 })
    }

    /// Normalizing constant from the single-mode problem at `|xi| = 1` on the
    /// grid's own vertical discretization, so that `kappa * E(|xi|^2) ~ |xi|^{2s}`.
    pub fn calibrated_constant(grid: &CylinderGrid) -> f64 {
        1.0 / grid.mode_symbol(1.0)
    }

    pub fn grid(&self) -> &CylinderGrid {
        &self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Per-mode symbol `kappa E(|xi|^2)` of the trace operator for the identity metric.
    pub fn trace_symbol(&self) -> Vec<f64> {
        self.rho.iter().map(|&r| self.kappa * self.grid.mode_symbol(r)).collect()
    }

    fn lateral_apply(&self, u: &[f64]) -> Vec<f64> {
        let lat = self.grid.lattice();
        let mut out = apply_symbol(lat, u, &self.rho);
        if self.corners.is_empty() {
            return out;
        }
        let n = lat.dim();
        let h = lat.spacing();
        let half = 1usize << (n - 1);
        let w = 1.0 / (half as f64 * h);
        let mut g = vec![0.0; n];
        let mut v = vec![0.0; n];
        for c in &self.corners {
            for (i, gi) in g.iter_mut().enumerate() {
                *gi = 0.0;
                for b in 0..c.nodes.len() {
                    if (b >> i) & 1 == 0 {
                        *gi += c.nodes_value(u, b | (1 << i)) - c.nodes_value(u, b);
                    }
                }
                *gi *= w;
            }
            for i in 0..n {
                v[i] = (0..n).map(|j| c.excess[i * n + j] * g[j]).sum();
            }
            for (i, vi) in v.iter().enumerate() {
                for b in 0..c.nodes.len() {
                    if (b >> i) & 1 == 0 {
                        out[c.nodes[b | (1 << i)]] += vi * w;
                        out[c.nodes[b]] -= vi * w;
                    }
                }
            }
        }
        out
    }

    /// Nodal operator on levels `0..K` (without `kappa`); `u` is level-major.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let np = self.grid.lattice().num_nodes();
        let k = self.grid.levels();
        assert_eq!(u.len(), k * np);
        let st = self.grid.stiffness();
        let ms = self.grid.mass();
        let mut out: Vec<f64> = vec![0.0; k * np];
        out.par_chunks_mut(np).enumerate().for_each(|(j, o)| {
            let lat_part = self.lateral_apply(&u[j * np..(j + 1) * np]);
            for x in 0..np {
                let uj = u[j * np + x];
                let mut r = ms[j] * lat_part[x] + st[j] * uj;
                if j + 1 < k {
                    r -= st[j] * u[(j + 1) * np + x];
                }
                if j > 0 {
                    r += st[j - 1] * (uj - u[(j - 1) * np + x]);
                }
                o[x] = r;
            }
        });
        out
    }

    /// Exact inverse of the identity-metric operator on levels `1..K` (level 0 held at zero).
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let lat = self.grid.lattice();
        let np = lat.num_nodes();
        let k = self.grid.levels();
        let levels = k - 1;
        let spectra: Vec<Vec<Complex64>> = r.par_chunks(np).map(|lvl| fft_forward(lat, lvl)).collect();
        let mut solved = vec![vec![Complex64::new(0.0, 0.0); np]; levels];
        let columns: Vec<Vec<Complex64>> = (0..np)
            .into_par_iter()
            .map(|mode| {
                let (diag, off) = self.grid.mode_tridiagonal(self.rho[mode], 1);
                let rhs: Vec<Complex64> = spectra.iter().map(|s| s[mode]).collect();
                thomas(&diag, &off, &rhs)
            })
            .collect();
        for (mode, col) in columns.into_iter().enumerate() {
            for (j, v) in col.into_iter().enumerate() {
                solved[j][mode] = v;
            }
        }
        solved.into_par_iter().flat_map_iter(|s| fft_inverse(lat, s).into_iter().map(|c| c.re)).collect()
    }

    /// Values on levels `1..K` for the given trace, by preconditioned CG.
    fn solve_interior(&self, trace: &[f64]) -> Result<(Vec<f64>, usize)> {
        let np = self.grid.lattice().num_nodes();
        let k = self.grid.levels();
        let st0 = self.grid.stiffness()[0];
        let mut b = vec![0.0; (k - 1) * np];
        for x in 0..np {
            b[x] = st0 * trace[x];
        }
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok((b, 0));
        }
        let apply_rr = |v: &[f64]| -> Vec<f64> {
            let mut full = vec![0.0; k * np];
            full[np..].copy_from_slice(v);
            self.apply(&full)[np..].to_vec()
        };
        let mut x = self.precondition(&b);
        if self.corners.is_empty() {
            return Ok((x, 1));
        }
        let ax = apply_rr(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for it in 1..=self.max_iterations {
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rn <= self.tolerance * bnorm {
                return Ok((x, it));
            }
            let ap = apply_rr(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::SolverBreakdown(format!("non-positive curvature {pap:.3e} at iteration {it}")));
            }
            let alpha = rz / pap;
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = self.precondition(&r);
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::SolverBreakdown(format!("CG did not reach {:.1e} in {} iterations", self.tolerance, self.max_iterations)))
    }

    /// Weighted extension of a trace with zero top data.
    pub fn extend(&self, trace: &GridField) -> Result<ExtensionField> {
        self.grid.lattice().check_same(trace.lattice())?;
        let tail = self.grid.tail_estimate();
        if tail > TAIL_WARNING {
            warn!("extension height leaves a tail fraction {tail:.2e} above Z/2");
        }
        let (interior, iterations) = self.solve_interior(trace.values())?;
        let mut values = trace.values().to_vec();
        values.extend(interior);
        Ok(ExtensionField { lattice: self.grid.lattice().clone(), heights: self.grid.heights().to_vec(), values, iterations })
    }

    /// `kappa` times the level-0 residual: the discrete weighted Neumann trace.
    pub fn neumann(&self, field: &ExtensionField) -> Vec<f64> {
        let np = self.grid.lattice().num_nodes();
        let mut r = self.apply(&field.values);
        r.truncate(np);
        r.iter_mut().for_each(|v| *v *= self.kappa);
        r
    }

    /// `kappa h^n <A u, u>`.
    pub fn energy(&self, field: &ExtensionField) -> f64 {
        let hn = self.grid.lattice().cell_volume();
        let au = self.apply(&field.values);
        self.kappa * hn * au.iter().zip(&field.values).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Trace operator restricted to `rows x cols`.
    pub fn trace_operator_block(&self, rows: &RegionMask, cols: &RegionMask) -> Result<DMatrix<f64>> {
        let lat = self.grid.lattice();
        if self.corners.is_empty() {
            let kernel = convolution_kernel(lat, &self.trace_symbol());
            return Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
                kernel[lat.offset_index(rows.nodes()[i], cols.nodes()[j])]
            }));
        }
        let columns: Vec<Vec<f64>> = cols
            .nodes()
            .par_iter()
            .map(|&c| -> Result<Vec<f64>> {
                let field = self.extend(&GridField::indicator(lat, c))?;
                let nm = self.neumann(&field);
                Ok(rows.nodes().iter().map(|&r| nm[r]).collect())
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| columns[j][i]))
    }

    /// Forward model whose operator is this extension's trace operator.
    pub fn forward_model(&self, geometry: &ProblemGeometry) -> Result<ForwardModel> {
        geometry.lattice().check_same(self.grid.lattice())?;
        if self.corners.is_empty() {
            let realization =
                Realization::Symbol { name: "extension".into(), symbol: Arc::new(self.trace_symbol()) };
            return ForwardModel::new(geometry, realization);
        }
        let both = geometry.omega().union(geometry.w(), RegionLabel::Custom("omega+w".into()))?;
        let full = self.trace_operator_block(&both, &both)?;
        let pick = |rows: &RegionMask, cols: &RegionMask| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
                full[(both.position(rows.nodes()[i]).unwrap(), both.position(cols.nodes()[j]).unwrap())]
            })
        };
        let gram = Arc::new(build_gram(geometry.w(), geometry.s())?);
        ForwardModel::from_blocks(
            geometry,
            "extension_metric".into(),
            pick(geometry.omega(), geometry.omega()),
            pick(geometry.omega(), geometry.w()),
            pick(geometry.w(), geometry.w()),
            gram,
        )
    }
}

impl Corner {
    #[inline]
    fn nodes_value(&self, u: &[f64], b: usize) -> f64 {
        u[self.nodes[b]]
    }
}

fn thomas(diag: &[f64], off: &[f64], rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let mut denom = diag[0];
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    d
}

/// Extension solution for exterior data `f` and potential `q`.
#[derive(Debug, Clone)]
pub struct ExtensionSolution {
    pub field: ExtensionField,
    pub trace: GridField,
    pub neumann: GridField,
}

/// Cached extension forward problem on a fixed geometry.
#[derive(Debug, Clone)]
pub struct ExtensionProblem {
    solver: ExtensionSolver,
    model: ForwardModel,
}

impl ExtensionProblem {
    pub fn new(solver: ExtensionSolver, geometry: &ProblemGeometry) -> Result<Self> {
        let model = solver.forward_model(geometry)?;
        Ok(Self { solver, model })
    }

    pub fn solver(&self) -> &ExtensionSolver {
        &self.solver
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    /// Trace from the dense exterior problem, then the extension of that trace.
    pub fn solve(&self, f: &GridField, q: &GridField) -> Result<ExtensionSolution> {
        let trace = self.model.solve_exterior(q, f)?;
        let field = self.solver.extend(&trace)?;
        let neumann = GridField::new(self.solver.grid().lattice(), self.solver.neumann(&field))?;
        Ok(ExtensionSolution { field, trace, neumann })
    }

    /// `kappa h^n <A u, u> + h^n sum_Omega q u^2`, the functional minimized by [`solve`](Self::solve).
    pub fn total_energy(&self, field: &ExtensionField, q: &GridField) -> f64 {
        let hn = self.solver.grid().lattice().cell_volume();
        let level0 = field.level(0);
        let pot: f64 = self.model.geometry().omega().nodes().iter().map(|&x| q.values()[x] * level0[x].powi(2)).sum();
        self.solver.energy(field) + hn * pot
    }
}

pub fn solve_extension_fd(problem: &ExtensionProblem, f: &GridField, q: &GridField) -> Result<ExtensionSolution> {
    problem.solve(f, q)
}
