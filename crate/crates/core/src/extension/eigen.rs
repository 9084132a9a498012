use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bessel::BesselOrder;
use crate::entropy::{fit_decay_at, DecayFit, DecayModel};
use crate::error::{Error, Result};
use crate::lattice::RegionMask;
use crate::linalg::sym_eigen;

/// Lateral cross-section of the cylinder.
#[derive(Debug, Clone)]
pub enum LateralDomain {
    /// `[0, side_1] x ... x [0, side_n]` with exact sine eigenfunctions.
    Rectangle { sides: Vec<f64> },
    /// Discrete Dirichlet Laplacian on the nodes of a mask (dense eigensolve).
    Mask { region: RegionMask },
}

impl LateralDomain {
    pub fn unit_square() -> Self {
        LateralDomain::Rectangle { sides: vec![1.0, 1.0] }
    }

    pub fn dim(&self) -> usize {
        match self {
            LateralDomain::Rectangle { sides } => sides.len(),
            LateralDomain::Mask { region } => region.lattice().dim(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            LateralDomain::Rectangle { sides } => sides.iter().product(),
            LateralDomain::Mask { region } => region.len() as f64 * region.lattice().cell_volume(),
        }
    }
}

/// One separated eigenpair `lambda = mu_l + j_m^2 / R^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// Sine indices (rectangle) or the single eigen index (mask), 1-based.
    pub lateral: Vec<usize>,
    /// 1-based rank of `mu` in the lateral spectrum.
    pub lateral_rank: usize,
    pub m: usize,
    pub mu: f64,
    pub j: f64,
    pub gamma: f64,
    pub lambda: f64,
}

/// Ordered eigenpairs of `-div(z^{1-2s} grad)` on `domain x (0, R)`
/// with Dirichlet data on the sides and top.
#[derive(Debug, Clone)]
pub struct CylinderEigenSystem {
    domain: LateralDomain,
    s: f64,
    height: f64,
    pairs: Vec<EigenPair>,
}

struct LateralMode {
    index: Vec<usize>,
    mu: f64,
}

fn rectangle_modes(sides: &[f64], bound: f64) -> Vec<LateralMode> {
    let pi2 = std::f64::consts::PI.powi(2);
    let mut out = Vec::new();
    let mut idx = vec![1usize; sides.len()];
    fn rec(d: usize, acc: f64, sides: &[f64], bound: f64, pi2: f64, idx: &mut Vec<usize>, out: &mut Vec<LateralMode>) {
        if d == sides.len() {
            out.push(LateralMode { index: idx.clone(), mu: acc });
            return;
        }
        let rest: f64 = sides[d + 1..].iter().map(|l| pi2 / (l * l)).sum();
        let mut p = 1;
        loop {
            let v = acc + pi2 * (p * p) as f64 / (sides[d] * sides[d]);
            if v + rest > bound {
                break;
            }
            idx[d] = p;
            rec(d + 1, v, sides, bound, pi2, idx, out);
            p += 1;
        }
    }
    rec(0, 0.0, sides, bound, pi2, &mut idx, &mut out);
    out.sort_by(|a, b| a.mu.total_cmp(&b.mu).then_with(|| a.index.cmp(&b.index)));
    out
}

/// Five-point (2n+1-point) Dirichlet Laplacian restricted to the mask nodes.
pub fn mask_dirichlet_laplacian(region: &RegionMask) -> DMatrix<f64> {
    let lat = region.lattice();
    let n = lat.dim();
    let m = lat.pts_per_side();
    let h2 = lat.spacing().powi(2);
    let mut a = DMatrix::zeros(region.len(), region.len());
    for (i, &node) in region.nodes().iter().enumerate() {
        a[(i, i)] = 2.0 * n as f64 / h2;
        let idx = lat.multi_index(node);
        for d in 0..n {
            for step in [1, m - 1] {
                let mut nb = idx.clone();
                nb[d] = (nb[d] + step) % m;
                if let Some(j) = region.position(lat.flat_index(&nb)) {
                    a[(i, j)] = -1.0 / h2;
                }
            }
        }
    }
    a
}

impl CylinderEigenSystem {
    pub fn build(domain: LateralDomain, s: f64, height: f64, count: usize) -> Result<Self> {
        if !(height > 0.0) {
            return Err(Error::InvalidArgument(format!("cylinder height must be positive, got {height}")));
        }
        if count == 0 {
            return Err(Error::InvalidArgument("eigenpair count must be at least 1".into()));
        }
        let order = BesselOrder::for_extension(s)?;
        let upper = BesselOrder::new(1.0 - s)?;
        let mask_spectrum = match &domain {
            LateralDomain::Mask { region } => {
                if region.is_empty() {
                    return Err(Error::InvalidRegion("empty lateral mask".into()));
                }
                Some(sym_eigen(&mask_dirichlet_laplacian(region)).0)
            }
            LateralDomain::Rectangle { sides } => {
                if sides.is_empty() || sides.iter().any(|l| !(*l > 0.0)) {
                    return Err(Error::InvalidArgument("rectangle sides must be positive".into()));
                }
                None
            }
        };
        let n = domain.dim() as f64;
        // Weyl estimate of the cutoff, then grow until enough pairs are enclosed
        let ball = std::f64::consts::PI.powf(n / 2.0) / statrs::function::gamma::gamma(n / 2.0 + 1.0);
        let density = domain.volume() * ball / (2.0 * std::f64::consts::PI).powf(n) * height / std::f64::consts::PI;
        let mut bound = (1.5 * count as f64 / density).powf(2.0 / (n + 1.0));
        let mut zeros = order.zeros(8)?;
        loop {
            let zmax = height * bound.sqrt();
            while *zeros.last().unwrap() < zmax {
                let more = order.zeros(zeros.len() * 2)?;
                zeros = more;
            }
            let lateral: Vec<LateralMode> = match (&domain, &mask_spectrum) {
                (LateralDomain::Rectangle { sides }, _) => rectangle_modes(sides, bound),
                (_, Some(spec)) => spec
                    .iter()
                        .enumerate()
                        .filter(|(_, &mu)| mu <= bound)
                    .map(|(i, &mu)| LateralMode { index: vec![i + 1], mu })
                    .collect(),
                _ => unreachable!(),
            };
            let m_used: Vec<(usize, f64)> = zeros
                .iter()
                .enumerate()
                .filter(|(_, &j)| j * j / (height * height) <= bound)
                .map(|(i, &j)| (i + 1, j))
                .collect();
            let mut pairs: Vec<EigenPair> = m_used
                .par_iter()
                .map(|&(m, j)| -> Result<Vec<EigenPair>> {
                    let vert = j * j / (height * height);
                    let jn1 = upper.j(j)?;
                    let gamma = std::f64::consts::SQRT_2 / (height * jn1.abs());
                    Ok(lateral
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| l.mu + vert <= bound)
                        .map(|(rank, l)| EigenPair {
                            lateral: l.index.clone(),
                            lateral_rank: rank + 1,
                            m,
                            mu: l.mu,
                            j,
                            gamma,
                            lambda: l.mu + vert,
                        })
                        .collect())
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            if pairs.len() >= count {
                pairs.sort_by(|a, b| {
                    a.lambda.total_cmp(&b.lambda).then_with(|| a.lateral_rank.cmp(&b.lateral_rank)).then(a.m.cmp(&b.m))
                });
                pairs.truncate(count);
                if let Some(spec) = &mask_spectrum {
                    let ceiling = spec.last().unwrap() + zeros[0].powi(2) / (height * height);
                    if pairs[count - 1].lambda > ceiling {
                        return Err(Error::InsufficientSize(format!(
                            "{count} pairs exhaust the {} discrete lateral modes",
                            spec.len()
                        )));
                    }
                }
                return Ok(Self { domain, s, height, pairs });
            }
            bound *= 1.4;
        }
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn domain(&self) -> &LateralDomain {
        &self.domain
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    /// `#{k : lambda_k <= level}`.
    pub fn weyl_count(&self, level: f64) -> Result<usize> {
        let top = self.pairs.last().map(|p| p.lambda).unwrap_or(0.0);
        if top < level {
            return Err(Error::InsufficientSize(format!("largest stored eigenvalue {top:.4e} is below {level:.4e}")));
        }
        Ok(self.pairs.partition_point(|p| p.lambda <= level))
    }

    /// Constants `(c1, c2)` with `c1 (l^{2/n} + m^2) <= lambda_{l,m} <= c2 (l^{2/n} + m^2)`
    /// over the stored pairs, `l` being the lateral rank.
    pub fn index_equivalence(&self) -> (f64, f64) {
        let n = self.domain.dim() as f64;
        self.pairs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            let idx = (p.lateral_rank as f64).powf(2.0 / n) + (p.m * p.m) as f64;
            let r = p.lambda / idx;
            (lo.min(r), hi.max(r))
        })
    }

    /// Bounds on `weyl_count(N) / N^{(n+1)/2}` obtained from the index-count bounds
    /// `[(1/3)(3/4)^{n/2}, 1]` transported through [`index_equivalence`](Self::index_equivalence).
    pub fn weyl_bounds(&self) -> (f64, f64) {
        let n = self.domain.dim() as f64;
        let (c1, c2) = self.index_equivalence();
        let e = (n + 1.0) / 2.0;
        ((0.75f64).powf(n / 2.0) / 3.0 * c2.powf(-e), c1.powf(-e))
    }

    /// Vertical profile `gamma_m z^s J_{-s}(j_m z / R)` of pair `k`.
    pub fn vertical_profile(&self, k: usize, z: f64) -> Result<f64> {
        let p = &self.pairs[k];
        if z <= 0.0 {
            let lead = (p.j / (2.0 * self.height)).powf(-self.s) / statrs::function::gamma::gamma(1.0 - self.s);
            return Ok(p.gamma * lead);
        }
        let order = BesselOrder::for_extension(self.s)?;
        Ok(p.gamma * z.powf(self.s) * order.j(p.j * z / self.height)?)
    }

    /// Normalized sine eigenfunction of pair `k` (rectangle mode only).
    pub fn lateral_value(&self, k: usize, x: &[f64]) -> Result<f64> {
        match &self.domain {
            LateralDomain::Rectangle { sides } => Ok(sides
                .iter()
                .zip(&self.pairs[k].lateral)
                .zip(x)
                .map(|((l, &p), &xi)| (2.0 / l).sqrt() * (p as f64 * std::f64::consts::PI * xi / l).sin())
                .product()),
            LateralDomain::Mask { .. } => {
                Err(Error::InvalidArgument("pointwise lateral values are only available for rectangles".into()))
            }
        }
    }

    /// CSV with columns `k, l1, .., ln, m, mu, j, gamma, lambda`.
    pub fn write_csv(&self, path: &Path, header: Option<&str>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        if let Some(h) = header {
            writeln!(out, "{h}")?;
        }
        let n = self.domain.dim();
        let lcols: Vec<String> = (1..=n).map(|i| format!("l{i}")).collect();
        writeln!(out, "k,{},m,mu,j,gamma,lambda", lcols.join(","))?;
        for (k, p) in self.pairs.iter().enumerate() {
            let mut l: Vec<String> = p.lateral.iter().map(|v| v.to_string()).collect();
            l.resize(n, "0".into());
            writeln!(
                out,
                "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                k + 1,
                l.join(","),
                p.m,
                p.mu,
                p.j,
                p.gamma,
                p.lambda
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn build_eigensystem(domain: LateralDomain, s: f64, height: f64, count: usize) -> Result<CylinderEigenSystem> {
    CylinderEigenSystem::build(domain, s, height, count)
}

pub fn weyl_count(system: &CylinderEigenSystem, level: f64) -> Result<usize> {
    system.weyl_count(level)
}

/// Singular values `(1 + lambda_k)^{-1/2}` of the embedding into the weighted `L^2`
/// together with a power-law fit over `fit_range` (1-based, inclusive).
#[derive(Debug, Clone)]
pub struct EmbeddingSpectrum {
    pub sigma: Vec<f64>,
    pub normalization: String,
    pub fit: DecayFit,
}

impl EmbeddingSpectrum {
    /// Fitted `sigma_k ~ k^{exponent}` (negative).
    pub fn exponent(&self) -> f64 {
        -self.fit.exponent
    }
}

pub fn embedding_singular_values(
    system: &CylinderEigenSystem,
    count: usize,
    fit_range: (usize, usize),
) -> Result<EmbeddingSpectrum> {
    if count > system.len() {
        return Err(Error::InsufficientSize(format!("{count} singular values requested from {} pairs", system.len())));
    }
    let sigma: Vec<f64> = system.pairs[..count].iter().map(|p| (1.0 + p.lambda).powf(-0.5)).collect();
    let (lo, hi) = (fit_range.0.max(1), fit_range.1.min(count));
    let xs: Vec<f64> = (lo..=hi).map(|k| k as f64).collect();
    let ys = sigma[lo - 1..hi].to_vec();
    let fit = fit_decay_at(&xs, &ys, DecayModel::Power, 8)?;
    Ok(EmbeddingSpectrum { sigma, normalization: "inhomogeneous: (1 + lambda_k)^(-1/2)".into(), fit })
}

/// Least-squares slope of `log lambda_k` against `log k` over `range` (1-based, inclusive).
pub fn weyl_slope(system: &CylinderEigenSystem, range: (usize, usize)) -> Result<f64> {
    let (lo, hi) = (range.0.max(1), range.1.min(system.len()));
    if hi < lo + 2 {
        return Err(Error::InsufficientSize("need at least three eigenvalues for a slope".into()));
    }
    let xs: Vec<f64> = (lo..=hi).map(|k| (k as f64).ln()).collect();
    let ys: Vec<f64> = system.pairs[lo - 1..hi].iter().map(|p| p.lambda.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
