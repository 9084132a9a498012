use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use super::output::{csv_header, ensure_dir, write_json};
use super::{CommandError, Outcome};
use crate::entropy::DecayFit;
use crate::extension::{build_eigensystem, embedding_singular_values, weyl_slope, LateralDomain};
use crate::forward::{check_aq, AqCertificate, DominationReport, DtnRecord, ForwardModel, ProblemGeometry, Realization, DEFAULT_KAPPA};
use crate::instability::{run_sweep, SweepResult};
use crate::lattice::GridField;

#[derive(Serialize)]
struct SpectrumReport {
    count: usize,
    s: f64,
    height: f64,
    sides: Vec<f64>,
    fit_range: [usize; 2],
    weyl_slope: f64,
    weyl_target: f64,
    weyl_bounds: (f64, f64),
    embedding_exponent: f64,
    embedding_target: f64,
    embedding_fit: DecayFit,
    normalization: String,
}

/// Cylinder eigensystem CSV and the Weyl / embedding fits.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let sp = &cfg.spectrum;
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let system = build_eigensystem(LateralDomain::Rectangle { sides: sp.sides.clone() }, cfg.s, sp.height, sp.count)?;
    let hi = sp.fit_range[1].min(sp.count);
    let lo = sp.fit_range[0].min(hi.saturating_sub(9)).max(1);
    let slope = weyl_slope(&system, (lo, hi))?;
    let emb = embedding_singular_values(&system, sp.count, (lo, hi))?;
    let hash = cfg.hash();
    system.write_csv(&dir.join("eigensystem.csv"), Some(&csv_header(&hash)))?;
    let n = sp.sides.len() as f64;
    let report = SpectrumReport {
        count: sp.count,
        s: cfg.s,
        height: sp.height,
        sides: sp.sides.clone(),
        fit_range: [lo, hi],
        weyl_slope: slope,
        weyl_target: 2.0 / (n + 1.0),
        weyl_bounds: system.weyl_bounds(),
        embedding_exponent: emb.exponent(),
        embedding_target: -1.0 / (n + 1.0),
        embedding_fit: emb.fit.clone(),
        normalization: emb.normalization.clone(),
    };
    write_json(&dir.join("spectrum_fit.json"), &hash, &report)?;
    Ok(Outcome::pass(format!("weyl slope {slope:.4}, embedding exponent {:.4}", emb.exponent())))
}

#[derive(Debug, Clone, Serialize)]
pub struct ForwardReport {
    pub geometry_hash: String,
    pub realization: String,
    pub qbar_hash: String,
    /// `||Gamma_qbar(qbar)||`, zero by construction.
    pub gamma_at_background: f64,
    pub aq: AqCertificate,
    pub domination: DominationReport,
    /// Relative gap between the kernel and multiplier DtN forms on smooth W data.
    pub realization_gap: f64,
}

/// `<Lambda f, f>` for the smooth bump filling the bounding box of W.
fn smooth_energy(model: &ForwardModel, qbar: &GridField) -> crate::Result<f64> {
    let geom = model.geometry();
    let lat = geom.lattice();
    let (lo, hi) = geom.w().index_bounds();
    let lo: Vec<f64> = lo.iter().map(|&i| lat.axis_coord(i)).collect();
    let hi: Vec<f64> = hi.iter().map(|&i| lat.axis_coord(i)).collect();
    let f = GridField::from_fn(lat, |x| {
        let r2: f64 = (0..x.len())
            .map(|k| {
                let c = 0.5 * (lo[k] + hi[k]);
                let half = 0.5 * (hi[k] - lo[k]) + lat.spacing();
                ((x[k] - c) / half).powi(2)
            })
            .sum();
        if r2 < 1.0 {
            (1.0 - r2).powi(3)
        } else {
            0.0
        }
    })
    .masked(geom.w());
    let fw = DVector::from_vec(f.restrict(geom.w()));
    let dtn = model.assemble_dtn(qbar)?;
    Ok(fw.dot(&(dtn.entries() * &fw)))
}

/// Realization gap of the smooth-data DtN energy; it shrinks under refinement.
pub fn realization_gap(geometry: &ProblemGeometry, qbar: &GridField) -> crate::Result<f64> {
    let reference = smooth_energy(&ForwardModel::new(geometry, Realization::Multiplier)?, qbar)?;
    let kernel = smooth_energy(&ForwardModel::new(geometry, Realization::Kernel { corrected: true })?, qbar)?;
    Ok((kernel - reference).abs() / reference.abs())
}

pub fn forward_report(cfg: &RunConfig, geometry: &ProblemGeometry) -> crate::Result<(ForwardReport, DtnRecord)> {
    let qbar = cfg.qbar.field(geometry)?;
    let model = ForwardModel::new(geometry, Realization::Multiplier)?;
    let base = model.assemble_dtn(&qbar)?;
    let gamma_at_background = model.gamma_diff(&qbar, &qbar)?.op_norm()?;
    let aq = check_aq(&model, &qbar, cfg.sweep.r0, DEFAULT_KAPPA)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.data);
    let fw = &cfg.forward;
    let samples: Vec<GridField> = (0..fw.samples)
        .map(|_| {
            let mut v = qbar.values().to_vec();
            for &i in geometry.omega_prime().nodes() {
                v[i] += rng.gen_range(-fw.amplitude..fw.amplitude);
            }
            GridField::new(geometry.lattice(), v)
        })
        .collect::<crate::Result<_>>()?;
    let data: Vec<DVector<f64>> =
        (0..fw.data).map(|_| DVector::from_fn(geometry.w().len(), |_, _| rng.gen_range(-1.0..1.0))).collect();
    let domination = model.domination_check(&qbar, &samples, &data)?;
    let report = ForwardReport {
        geometry_hash: geometry.hash().to_string(),
        realization: model.realization().name(),
        qbar_hash: crate::provenance::hash_f64s(qbar.values()),
        gamma_at_background,
        aq,
        domination,
        realization_gap: realization_gap(geometry, &qbar)?,
    };
    Ok((report, base.record()))
}

/// DtN at the background, the domination ratios and the Aq certificate.
pub fn cmd_forward(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    ensure_dir(&cfg.out_dir)?;
    let geometry = cfg.geometry()?;
    let (report, record) = forward_report(cfg, &geometry)?;
    let hash = cfg.hash();
    write_json(&cfg.out_dir.join("dtn.json"), &hash, &record)?;
    write_json(&cfg.out_dir.join("forward_report.json"), &hash, &report)?;
    let summary = format!(
        "max domination ratio {:.4e}, realization gap {:.3e}",
        report.domination.max_ratio, report.realization_gap
    );
    if report.domination.passed() && report.gamma_at_background == 0.0 {
        Ok(Outcome::pass(summary))
    } else {
        Ok(Outcome::fail(summary))
    }
}

#[derive(Serialize)]
struct InstabilityManifest<'a> {
    config: &'a RunConfig,
    geometry_hash: &'a str,
    strictly_decreasing: bool,
    stretched_preferred: bool,
    fit_slope: Option<f64>,
    target_exponent: f64,
    sweep: &'a SweepResult,
    csv: &'a str,
}

/// Full epsilon sweep: CSV rows plus a JSON manifest with the fits.
pub fn cmd_instability(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    ensure_dir(&cfg.out_dir)?;
    let geometry = cfg.geometry()?;
    let qbar = cfg.qbar.field(&geometry)?;
    let result = run_sweep(&geometry, &qbar, &cfg.sweep_config())?;
    let hash = cfg.hash();
    result.write_csv(&cfg.out_dir.join("instability.csv"), &csv_header(&hash))?;
    let manifest = InstabilityManifest {
        config: cfg,
        geometry_hash: geometry.hash(),
        strictly_decreasing: result.strictly_decreasing(),
        stretched_preferred: result.stretched_preferred(),
        fit_slope: result.fit_slope,
        target_exponent: result.target_exponent,
        sweep: &result,
        csv: "instability.csv",
    };
    write_json(&cfg.out_dir.join("instability_manifest.json"), &hash, &manifest)?;
    let summary = format!(
        "{} rows, slope {}, target {:.4}, stretched preferred: {}",
        result.rows.len(),
        result.fit_slope.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
        result.target_exponent,
        result.stretched_preferred()
    );
    match &result.aborted {
        Some(e) => Ok(Outcome::fail(format!("{summary}; aborted: {e}"))),
        None if !result.strictly_decreasing() => Ok(Outcome::fail(format!("{summary}; gaps not strictly decreasing"))),
        None => Ok(Outcome::pass(summary)),
    }
}
