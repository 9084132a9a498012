//! Acceptance battery. Each test prints one `PASS`/`FAIL` line to stderr
//! (written directly so it survives output capture) before asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use calderon_lab::cli::{cmd_instability, heat_roundtrip_error, RunConfig};
use calderon_lab::entropy::{
    compression_sweep, diag_entropy_numbers, dyadic_range, fit_decay, DecayModel, DiagonalSeqOp,
};
use calderon_lab::extension::{
    build_eigensystem, caccioppoli_verify, embedding_singular_values, weyl_slope, BesselOrder, CylinderGrid,
    ExtensionProblem, ExtensionSolver, LateralDomain,
};
use calderon_lab::forward::{ForwardModel, ProblemGeometry, Realization};
use calderon_lab::fractional::{conductivity_bilinear, ConductivityForm, KernelOp, MultiplierOp};
use calderon_lab::instability::{run_sweep, SweepConfig, Variant};
use calderon_lab::lattice::{GridField, LatticeSpec};
use calderon_lab::liouville::{ConductivitySpec, GammaPreset, ReductionLab};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, title: &str, passed: bool, detail: String) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[criterion {id:>2}] {verdict} {title}: {detail}");
}

fn within_budget(start: Instant, secs: u64) -> bool {
    start.elapsed() <= Duration::from_secs(secs)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn l2(u: &GridField) -> f64 {
    u.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn criterion_01_weyl_law() {
    const BAND: (f64, f64) = (0.60, 0.73);
    let t = Instant::now();
    let system = build_eigensystem(LateralDomain::unit_square(), 0.5, 1.0, 2000).unwrap();
    let slope = weyl_slope(&system, (1, 2000)).unwrap();
    let ok = slope >= BAND.0 && slope <= BAND.1 && within_budget(t, 30);
    report(1, "Weyl slope", ok, format!("slope {slope:.4} in {BAND:?}, {:.2?}", t.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_02_embedding_singular_values() {
    const TARGET: f64 = -1.0 / 3.0;
    const REL_TOL: f64 = 0.10;
    let t = Instant::now();
    let system = build_eigensystem(LateralDomain::unit_square(), 0.5, 1.0, 2000).unwrap();
    let exponent = embedding_singular_values(&system, 2000, (100, 2000)).unwrap().exponent();
    let ok = rel(exponent, TARGET) <= REL_TOL && within_budget(t, 10);
    report(2, "embedding power", ok, format!("exponent {exponent:.4} vs {TARGET:.4}, {:.2?}", t.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_03_bessel_zeros() {
    const HALF_TOL: f64 = 1e-9;
    const RESIDUAL_TOL: f64 = 1e-10;
    const MCMAHON_TOL: f64 = 0.01;
    let t = Instant::now();
    let half = BesselOrder::for_extension(0.5).unwrap().zeros(50).unwrap();
    let half_err = half
        .iter()
        .enumerate()
        .map(|(m, z)| (z - (m as f64 + 0.5) * std::f64::consts::PI).abs())
        .fold(0.0, f64::max);
    let mut residual = 0.0f64;
    let mut mcmahon = 0.0f64;
    for s in [0.25, 0.75] {
        let order = BesselOrder::for_extension(s).unwrap();
        let zeros = order.zeros(50).unwrap();
        for z in &zeros {
            residual = residual.max(order.j(*z).unwrap().abs());
        }
        mcmahon = mcmahon.max((zeros[49] / order.mcmahon(50) - 1.0).abs());
    }
    let ok = half_err <= HALF_TOL && residual <= RESIDUAL_TOL && mcmahon <= MCMAHON_TOL && within_budget(t, 5);
    report(
        3,
        "Bessel zeros",
        ok,
        format!("half-order err {half_err:.1e}, |J| {residual:.1e}, McMahon {mcmahon:.1e}, {:.2?}", t.elapsed()),
    );
    assert!(ok);
}

#[test]
fn criterion_04_operator_cross_checks() {
    const KERNEL_TOL: f64 = 0.02;
    const HEAT_TOL: f64 = 1e-6;
    const FORM_TOL: f64 = 1e-8;
    let t = Instant::now();
    let lat = LatticeSpec::new(2, 4.0, 64).unwrap();
    let mut kernel_gap = 0.0f64;
    for width in [2.0, 4.0] {
        let u = GridField::from_fn(&lat, |x| (-width * (x[0] * x[0] + x[1] * x[1])).exp());
        let a = KernelOp::new(&lat, 0.5).unwrap().apply(&u).unwrap();
        let b = MultiplierOp::homogeneous(&lat, 0.5).apply(&u).unwrap();
        kernel_gap = kernel_gap.max(l2(&a.sub(&b).unwrap()) / l2(&b));
    }

    let geometry = ProblemGeometry::reference(0.5).unwrap();
    let heat = (0..3).map(|seed| heat_roundtrip_error(&geometry, 1.0, seed).unwrap()).fold(0.0, f64::max);

    let one = GridField::constant(&lat, 1.0);
    let zero = GridField::zeros(&lat);
    let op = KernelOp::new(&lat, 0.5).unwrap();
    let form = ConductivityForm::with_kernel(&one, &zero, &op, None).unwrap();
    let u = GridField::from_fn(&lat, |x| (-(x[0] * x[0] + x[1] * x[1])).exp() * (1.0 + x[0] - 0.5 * x[1]));
    let energy = op.apply(&u).unwrap().dot(&u).unwrap();
    let form_gap = rel(conductivity_bilinear(&u, &u, &form).unwrap(), energy);

    let ok = kernel_gap <= KERNEL_TOL && heat <= HEAT_TOL && form_gap <= FORM_TOL && within_budget(t, 60);
    report(
        4,
        "operator cross-checks",
        ok,
        format!("kernel/multiplier {kernel_gap:.2e}, heat {heat:.1e}, unit form {form_gap:.1e}, {:.2?}", t.elapsed()),
    );
    assert!(ok);
}

fn random_on_omega(geometry: &ProblemGeometry, rng: &mut ChaCha8Rng) -> GridField {
    let mut v = vec![0.0; geometry.lattice().num_nodes()];
    for &i in geometry.omega().nodes() {
        v[i] = rng.gen_range(0.0..1.0);
    }
    GridField::new(geometry.lattice(), v).unwrap()
}

fn random_data(geometry: &ProblemGeometry, rng: &mut ChaCha8Rng, count: usize) -> Vec<(DVector<f64>, DVector<f64>)> {
    let w = geometry.w().len();
    (0..count)
        .map(|_| (DVector::from_fn(w, |_, _| rng.gen_range(-1.0..1.0)), DVector::from_fn(w, |_, _| rng.gen_range(-1.0..1.0))))
        .collect()
}

#[test]
fn criterion_05_reduction_chain() {
    const CHAIN_TOL: f64 = 0.02;
    const UNIT_TOL: f64 = 1e-8;
    const TRIALS: usize = 20;
    let t = Instant::now();
    let geometry = ProblemGeometry::reference(0.5).unwrap();
    let preset = GammaPreset::Bump { center: vec![0.0, 0.0], radius: 0.6, amplitude: 2f64.sqrt() - 1.0 };
    let spec = ConductivitySpec::from_preset(&preset, geometry.lattice(), geometry.omega()).unwrap();
    let lab = ReductionLab::new(&geometry, &spec).unwrap();
    let unit = ReductionLab::new(&geometry, &ConductivitySpec::identity(geometry.lattice())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut chain, mut unit_gap) = (0.0f64, 0.0f64);
    for _ in 0..TRIALS {
        let q1 = random_on_omega(&geometry, &mut rng);
        let q2 = random_on_omega(&geometry, &mut rng);
        let data = random_data(&geometry, &mut rng, 1);
        chain = chain.max(lab.verify(&q1, &q2, &data).unwrap().max_mismatch);
        let r = unit.verify(&q1, &q2, &data).unwrap();
        for trial in &r.trials {
            unit_gap = unit_gap.max(trial.interior_mismatch()).max(trial.kernel_mismatch());
        }
        unit_gap = unit_gap.max(r.max_mismatch);
    }
    let ok = chain <= CHAIN_TOL && unit_gap <= UNIT_TOL && within_budget(t, 300);
    report(
        5,
        "reduction chain",
        ok,
        format!("{TRIALS} trials, chain {chain:.2e}, unit conductivity {unit_gap:.1e}, {:.2?}", t.elapsed()),
    );
    assert!(ok);
}

#[test]
fn criterion_06_comparison_compression() {
    const RESIDUAL_MAX: f64 = 0.3;
    const ADVANTAGE: f64 = 2.0;
    let t = Instant::now();
    let geometry = ProblemGeometry::reference(0.5).unwrap();
    let model = ForwardModel::new(&geometry, Realization::Multiplier).unwrap();
    let sv = model.comparison_operator(&GridField::zeros(geometry.lattice())).unwrap().singular_values().unwrap();
    let fixed = fit_decay(&sv, DecayModel::FixedExponent { mu: 0.5 }).unwrap();
    let stretched = fit_decay(&sv, DecayModel::StretchedExp).unwrap();
    let power = fit_decay(&sv, DecayModel::Power).unwrap();
    let rate = fixed.rate.unwrap_or(0.0);
    let advantage = power.residual / stretched.residual;
    let ok = rate > 0.0 && fixed.residual < RESIDUAL_MAX && advantage >= ADVANTAGE && within_budget(t, 120);
    report(
        6,
        "comparison operator decay",
        ok,
        format!(
            "{} values, rate {rate:.3}, residual {:.3}, power/stretched residual {advantage:.2}, {:.2?}",
            sv.len(),
            fixed.residual,
            t.elapsed()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_iterated_compression() {
    const SPREAD_MAX: f64 = 0.25;
    const MU_TOL: f64 = 0.15;
    let t = Instant::now();
    let sweep = compression_sweep(1.0, 20.0, 2, &dyadic_range(8, 16)).unwrap();
    let mu = sweep.fit.exponent;
    let ok = sweep.ratio_spread < SPREAD_MAX && rel(mu, 0.25) <= MU_TOL && within_budget(t, 10);
    report(
        7,
        "iterated compression",
        ok,
        format!("ratio spread {:.3}, fitted exponent {mu:.4}, {:.2?}", sweep.ratio_spread, t.elapsed()),
    );
    assert!(ok);
}

#[test]
fn criterion_08_instability_sweep() {
    let t = Instant::now();
    let geometry = ProblemGeometry::reference(0.5).unwrap();
    let config = SweepConfig::reference(Variant::Schrodinger);
    let result = run_sweep(&geometry, &GridField::zeros(geometry.lattice()), &config).unwrap();
    let decreasing = result.aborted.is_none() && result.strictly_decreasing();
    let preferred = result.stretched_preferred();
    let ok = result.rows.len() == 6 && decreasing && preferred && within_budget(t, 1200);
    report(
        8,
        "instability sweep",
        ok,
        format!(
            "{} rows, decreasing {decreasing}, stretched preferred {preferred}, slope {}, target {:.4}, {:.2?}",
            result.rows.len(),
            result.fit_slope.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
            result.target_exponent,
            t.elapsed()
        ),
    );
    assert!(ok);
}

fn caccioppoli_battery(pts: usize) -> Vec<f64> {
    let geometry = ProblemGeometry::reference_with(pts, 0.5).unwrap();
    let solver = ExtensionSolver::new(CylinderGrid::new(geometry.lattice(), 0.5, 16.0, 64).unwrap()).unwrap();
    let problem = ExtensionProblem::new(solver, &geometry).unwrap();
    let zero = GridField::zeros(geometry.lattice());
    (0..10)
        .map(|k| {
            let (a, b) = (1.0 + 0.3 * k as f64, 0.7 * k as f64);
            let f = GridField::from_fn(geometry.lattice(), |x| {
                let u = (x[0] - 1.25) / 0.25;
                let v = x[1] / 0.75;
                if u.abs() < 1.0 && v.abs() < 1.0 {
                    (1.0 - u * u).powi(2) * (1.0 - v * v).powi(2) * (a * x[1] + b).cos()
                } else {
                    0.0
                }
            })
            .masked(geometry.w());
            let sol = problem.solve(&f, &zero).unwrap();
            caccioppoli_verify(&sol.field, problem.solver(), geometry.omega(), &[0.0, 0.0], 0.2, 0.4).unwrap().constant
        })
        .collect()
}

#[test]
fn criterion_09_caccioppoli_battery() {
    const DRIFT_MAX: f64 = 0.20;
    let t = Instant::now();
    let coarse = caccioppoli_battery(48);
    let fine = caccioppoli_battery(96);
    let finite = coarse.iter().chain(&fine).all(|c| c.is_finite() && *c > 0.0);
    let drift = coarse.iter().zip(&fine).map(|(a, b)| rel(*b, *a)).fold(0.0, f64::max);
    let largest = fine.iter().cloned().fold(0.0, f64::max);
    let ok = finite && drift <= DRIFT_MAX && within_budget(t, 300);
    report(
        9,
        "Caccioppoli battery",
        ok,
        format!("10 extensions, 48 -> 96 drift {drift:.3}, largest {largest:.4}, {:.2?}", t.elapsed()),
    );
    assert!(ok);
}

#[test]
fn criterion_10_entropy_calculus() {
    const REL_TOL: f64 = 0.15;
    let t = Instant::now();
    let mut worst = 0.0f64;
    for mu in [1.0 / 3.0, 0.5, 1.0] {
        let len = (700f64.powf(1.0 / mu) as usize).min(20000);
        let op = DiagonalSeqOp::from_fn(len, |j| (-(j as f64).powf(mu)).exp()).unwrap();
        let e = diag_entropy_numbers(&op, len.min(2000)).unwrap();
        let fitted = fit_decay(&e.lower, DecayModel::StretchedExp).unwrap().exponent;
        worst = worst.max(rel(fitted, mu / (1.0 + mu)));
    }
    let ok = worst <= REL_TOL && within_budget(t, 10);
    report(10, "entropy calculus", ok, format!("worst relative exponent error {worst:.3}, {:.2?}", t.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let cfg = RunConfig { out_dir: dir.path().join(name), ..RunConfig::default() };
        cmd_instability(&cfg).unwrap();
        std::fs::read(cfg.out_dir.join("instability.csv")).unwrap()
    };
    let (a, b) = (run("first"), run("second"));
    let ok = !a.is_empty() && a == b;
    report(11, "determinism", ok, format!("{} CSV bytes, identical {}", a.len(), a == b));
    assert!(ok);
}
