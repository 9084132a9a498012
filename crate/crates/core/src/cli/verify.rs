use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use super::output::{csv_header, ensure_dir, scan_hashes, write_json};
use super::{CommandError, Outcome};
use crate::entropy::{diag_entropy_numbers, exponent_convert, fit_decay, ConvertDirection, DecayModel, DiagonalSeqOp};
use crate::extension::{caccioppoli_verify, CylinderGrid, ExtensionProblem, ExtensionSolver};
use crate::forward::ProblemGeometry;
use crate::fractional::{frac_laplacian_fourier, heat_transform, HeatTransformOp, MultiplierOp};
use crate::lattice::GridField;
use crate::liouville::{ConductivitySpec, GammaPreset, ReductionLab};

/// One row of the pass/fail matrix.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value.is_finite() && value <= threshold }
    }
}

/// `||(-Delta)^s T g - g|| / ||g||` for a band-limited mean-zero `g`.
pub fn heat_roundtrip_error(geometry: &ProblemGeometry, symbol_scale: f64, seed: u64) -> crate::Result<f64> {
    let lat = geometry.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..6)
        .map(|_| {
            let k: Vec<f64> = (0..lat.dim()).map(|_| rng.gen_range(-4i32..=4) as f64).collect();
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .filter(|(k, _, _)| k.iter().any(|v| *v != 0.0))
        .collect();
    let two_pi_l = std::f64::consts::TAU / lat.box_len();
    let g = GridField::from_fn(lat, |x| {
        modes.iter().map(|(k, a, ph)| a * (two_pi_l * k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + ph).cos()).sum()
    });
    let u = heat_transform(&g, &HeatTransformOp::new(lat, geometry.s())?)?;
    let back = frac_laplacian_fourier(&u, &MultiplierOp::homogeneous(lat, geometry.s()).scaled(symbol_scale))?;
    let num: f64 = back.sub(&g)?.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let den: f64 = g.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(num / den)
}

fn random_on_omega(geometry: &ProblemGeometry, rng: &mut ChaCha8Rng) -> crate::Result<GridField> {
    let mut v = vec![0.0; geometry.lattice().num_nodes()];
    for &i in geometry.omega().nodes() {
        v[i] = rng.gen_range(0.0..1.0);
    }
    GridField::new(geometry.lattice(), v)
}

/// Exact kernel-route mismatch and the baseline-corrected chain mismatch.
pub fn reduction_mismatches(geometry: &ProblemGeometry, trials: usize, seed: u64) -> crate::Result<(f64, f64)> {
    let preset = GammaPreset::Bump { center: vec![0.0; geometry.lattice().dim()], radius: 0.6, amplitude: 2f64.sqrt() - 1.0 };
    let spec = ConductivitySpec::from_preset(&preset, geometry.lattice(), geometry.omega())?;
    let lab = ReductionLab::new(geometry, &spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = geometry.w().len();
    let (mut exact, mut chain) = (0.0f64, 0.0f64);
    for _ in 0..trials.max(1) {
        let q1 = random_on_omega(geometry, &mut rng)?;
        let q2 = random_on_omega(geometry, &mut rng)?;
        let data: Vec<(DVector<f64>, DVector<f64>)> = (0..3)
            .map(|_| {
                (DVector::from_fn(w, |_, _| rng.gen_range(-1.0..1.0)), DVector::from_fn(w, |_, _| rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let report = lab.verify(&q1, &q2, &data)?;
        for t in &report.trials {
            exact = exact.max(t.interior_mismatch()).max(t.kernel_mismatch());
        }
        chain = chain.max(report.max_mismatch);
    }
    Ok((exact, chain))
}

/// Largest Caccioppoli constant over solved extensions with random W data.
pub fn caccioppoli_constants(geometry: &ProblemGeometry, qbar: &GridField, count: usize, seed: u64) -> crate::Result<Vec<f64>> {
    let solver = ExtensionSolver::new(CylinderGrid::standard(geometry.lattice(), geometry.s())?)?;
    let problem = ExtensionProblem::new(solver, geometry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = vec![0.0; geometry.lattice().dim()];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let vals: Vec<f64> = (0..geometry.w().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = GridField::from_region_values(geometry.w(), &vals)?;
        let sol = problem.solve(&f, qbar)?;
        let rep = caccioppoli_verify(&sol.field, problem.solver(), geometry.omega(), &center, 0.2, 0.4)?;
        out.push(rep.constant);
    }
    Ok(out)
}

/// Worst relative error of the entropy exponent against the converted weight exponent.
pub fn entropy_consistency() -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for mu in [1.0 / 3.0, 0.5, 1.0] {
        let len = (700f64.powf(1.0 / mu) as usize).min(20000);
        let op = DiagonalSeqOp::from_fn(len, |j| (-(j as f64).powf(mu)).exp())?;
        let e = diag_entropy_numbers(&op, len.min(2000))?;
        let fs = fit_decay(op.sigmas(), DecayModel::StretchedExp)?;
        let fe = fit_decay(&e.lower, DecayModel::StretchedExp)?;
        let predicted = exponent_convert(fs.exponent, ConvertDirection::Forward)?;
        worst = worst.max((fe.exponent / predicted - 1.0).abs());
    }
    Ok(worst)
}

pub fn run_checks(cfg: &RunConfig, geometry: &ProblemGeometry) -> crate::Result<Vec<CheckResult>> {
    let tol = &cfg.tolerances;
    let qbar = cfg.qbar.field(geometry)?;
    let heat = heat_roundtrip_error(geometry, cfg.inject.symbol_scale, cfg.seeds.data)?;
    let (exact, chain) = reduction_mismatches(geometry, cfg.verify.trials, cfg.seeds.data)?;
    let constants = caccioppoli_constants(geometry, &qbar, cfg.verify.extensions, cfg.seeds.data)?;
    let worst = constants.iter().cloned().fold(0.0f64, |m, c| if c.is_finite() { m.max(c) } else { f64::INFINITY });
    Ok(vec![
        CheckResult::at_most("heat_roundtrip", heat, tol.scaled(tol.heat_roundtrip)),
        CheckResult::at_most("reduction_identity", exact, tol.scaled(tol.reduction_identity)),
        CheckResult::at_most("liouville_chain", chain, tol.scaled(tol.liouville_chain)),
        CheckResult::at_most("caccioppoli", worst, tol.scaled(tol.caccioppoli_max)),
        CheckResult::at_most("entropy_consistency", entropy_consistency()?, tol.scaled(tol.entropy_exponent)),
    ])
}

#[derive(Serialize)]
struct VerifyManifest<'a> {
    config: &'a RunConfig,
    geometry_hash: &'a str,
    inputs: Vec<String>,
    checks: &'a [CheckResult],
    all_passed: bool,
}

/// Invariant battery with a pass/fail matrix; refuses output directories holding other runs.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let hash = cfg.hash();
    let (files, hashes) = scan_hashes(&cfg.out_dir)?;
    if hashes.iter().any(|h| *h != hash) {
        return Err(CommandError::Usage(format!(
            "{} holds artifacts from {} config hashes; refusing mixed inputs",
            cfg.out_dir.display(),
            hashes.len() + usize::from(!hashes.contains(&hash))
        )));
    }
    ensure_dir(&cfg.out_dir)?;
    let geometry = cfg.geometry()?;
    let checks = run_checks(cfg, &geometry)?;
    let all_passed = checks.iter().all(|c| c.passed);
    let path = cfg.out_dir.join("verify.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(crate::Error::from)?);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{}", csv_header(&hash))?;
        writeln!(out, "check,value,threshold,passed")?;
        for c in &checks {
            writeln!(out, "{},{:e},{:e},{}", c.name, c.value, c.threshold, c.passed)?;
        }
        out.flush()
    };
    write().map_err(crate::Error::from)?;
    let inputs = files.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
    let manifest = VerifyManifest { config: cfg, geometry_hash: geometry.hash(), inputs, checks: &checks, all_passed };
    write_json(&cfg.out_dir.join("verify.json"), &hash, &manifest)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(Outcome::pass(format!("{} checks passed", checks.len())))
    } else {
        Ok(Outcome::fail(format!("failed: {}", failed.join(", "))))
    }
}
