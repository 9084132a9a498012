use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::forward::{ForwardModel, ProblemGeometry, Realization};
use crate::lattice::{lp_norm, GridField};
use crate::linalg::{spectral_norm, GuardedLu};
use crate::liouville::GammaPreset;

fn small() -> ProblemGeometry {
    ProblemGeometry::reference_with(24, 0.5).unwrap()
}

fn born_at(geom: &ProblemGeometry, basis: usize) -> BornOperator {
    let model = ForwardModel::new(geom, Realization::Kernel { corrected: true }).unwrap();
    build_born(&model, &GridField::zeros(geom.lattice()), basis).unwrap()
}

fn small_config(variant: Variant) -> SweepConfig {
    SweepConfig { basis_size: 20, ..SweepConfig::reference(variant) }
}

#[test]
fn basis_is_orthonormal_and_supported_in_omega_prime() {
    let g = small();
    let b = perturbation_basis(g.omega_prime(), 10).unwrap();
    let hn = g.lattice().cell_volume();
    let gram = b.vectors().transpose() * b.vectors() * hn;
    assert!((gram - DMatrix::identity(10, 10)).amax() < 1e-10);
    assert!(b.eigenvalues().windows(2).all(|w| w[0] <= w[1] + 1e-12));
    let f = b.field(&[0.3, -1.0, 2.0]);
    for i in 0..g.lattice().num_nodes() {
        if !g.omega_prime().contains(i) {
            assert_eq!(f.values()[i], 0.0);
        }
    }
    assert!(matches!(perturbation_basis(g.omega_prime(), 0), Err(Error::InvalidArgument(_))));
    assert!(matches!(perturbation_basis(g.omega_prime(), 37), Err(Error::InsufficientSize(_))));
}

#[test]
fn zero_direction_gives_zero_form_and_forms_are_symmetric() {
    let g = small();
    let born = born_at(&g, 12);
    let zero = born.form(&GridField::zeros(g.lattice())).unwrap();
    assert_eq!(zero.amax(), 0.0);
    for j in 0..4 {
        let mut c = vec![0.0; j + 1];
        c[j] = 1.0;
        let f = born.form(&born.basis().field(&c)).unwrap();
        assert!((&f - f.transpose()).amax() <= 1e-14 * f.amax());
    }
    let outside = GridField::indicator(g.lattice(), g.w().nodes()[0]);
    assert!(born.form(&outside).is_err());
}

#[test]
fn born_form_matches_finite_differences_to_second_order() {
    let g = small();
    let born = born_at(&g, 6);
    let model = born.model().clone();
    let d = born.basis().field(&[1.0, 0.5, -0.3, 0.2]);
    let lin = born.form(&d).unwrap();
    let base = born.base().entries().clone();
    let err = |t: f64| {
        let q = d.scale(t);
        let moved = model.assemble_dtn(&q).unwrap().entries().clone();
        (moved - &base - &lin * t).norm()
    };
    for t in [1e-2, 1e-3] {
        let ratio = err(t) / err(0.5 * t);
        assert!((3.0..=5.0).contains(&ratio), "t = {t}: ratio {ratio}");
    }
}

#[test]
fn stacked_matrix_is_frobenius_isometric() {
    let g = small();
    let born = born_at(&g, 8);
    for j in 0..8 {
        let mut c = vec![0.0; 8];
        c[j] = 1.0;
        let w = born.whitened_form(&born.basis().field(&c)).unwrap();
        let col = born.matrix().column(j).norm();
        assert!((w.norm() - col).abs() <= 1e-12 * col);
    }
    let sv = born.singular_values();
    assert!(sv.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn candidate_gap_is_bounded_by_prefix_singular_value() {
    let g = small();
    let born = born_at(&g, 10);
    // critical p = 2, so the unit direction has unit coefficient vector
    let cands = born.candidates(0.5, 2.0).unwrap();
    assert_eq!(cands.len(), 10);
    let nw = g.w().len() as f64;
    for c in &cands {
        let m = c.prefix;
        let block = born.matrix().columns(0, m).into_owned();
        let sigma = *crate::linalg::singular_values(&block).last().unwrap();
        assert!(c.unit_gap <= sigma * (1.0 + 1e-8), "prefix {m}");
        assert!(sigma <= nw.sqrt() * c.unit_gap * (1.0 + 1e-8), "prefix {m}");
        let norm = lp_norm(&c.direction, 2.0, g.omega()).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(*c.coeffs.last().unwrap() >= 0.0);
    }
}

#[test]
fn gap_approaches_linear_prediction() {
    let g = small();
    let born = born_at(&g, 8);
    let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| {
            let pair = construct_pair(&born, eps, 0.5, 2.0, 1e6).unwrap();
            (pair.gap / pair.gap_linear - 1.0).abs()
        })
        .collect();
    assert!(errs[2] < 1e-3, "{errs:?}");
    assert!(errs[1] <= errs[0] && errs[2] <= errs[1].max(1e-6), "{errs:?}");
}

#[test]
fn constructed_pair_beats_random_pairs() {
    let g = small();
    let born = born_at(&g, 20);
    let eps = 1e-2;
    let pair = construct_pair(&born, eps, 0.5, 2.0, 1.0).unwrap();
    let model = born.model();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut wins = 0;
    for _ in 0..50 {
        let c: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = born.basis().field(&c);
        let d = d.scale(1.0 / lp_norm(&d, 2.0, g.omega()).unwrap());
        let q1 = d.scale(-0.5 * eps);
        let q2 = d.scale(0.5 * eps);
        let u1 = model.solutions(&q1).unwrap();
        let u2 = model.solutions(&q2).unwrap();
        let e = model.difference_from_solutions(&q1, &u1, &q2, &u2).unwrap();
        let gap = born.base().with_entries(e, "random".into()).op_norm().unwrap();
        if pair.gap <= gap {
            wins += 1;
        }
    }
    assert!(wins >= 48, "{wins} of 50");
}

#[test]
fn pair_support_and_membership_are_verified() {
    let g = small();
    let born = born_at(&g, 12);
    let qbar = GridField::zeros(g.lattice());
    let budget = BudgetParams::new(0.5, 2.0, 1.0).unwrap();
    let pair = construct_pair(&born, 0.05, 0.5, 2.0, 1.0).unwrap();
    let diff = pair.q2.sub(&pair.q1).unwrap();
    for i in 0..g.lattice().num_nodes() {
        if !g.omega_prime().contains(i) {
            assert_eq!(diff.values()[i], 0.0);
        }
    }
    assert!((pair.eps - 0.05).abs() < 1e-12);
    assert!(pair.sobolev_budget.iter().all(|b| *b <= 1.0));
    assert_eq!(pair.metadata.geometry_hash, g.hash());

    let mut moved = pair.clone();
    let mut v = moved.q2.values().to_vec();
    v[g.w().nodes()[0]] = 1e-3;
    moved.q2 = GridField::new(g.lattice(), v).unwrap();
    assert!(matches!(
        verify_membership(moved, &qbar, g.omega(), g.omega_prime(), &budget),
        Err(Error::GeometryViolation(_))
    ));
    let tight = BudgetParams::new(0.5, 2.0, 0.5 * pair.sobolev_budget[0]).unwrap();
    assert!(matches!(
        verify_membership(pair, &qbar, g.omega(), g.omega_prime(), &tight),
        Err(Error::BudgetInfeasible(_))
    ));
}

#[test]
fn too_large_eps_is_infeasible() {
    let g = small();
    let born = born_at(&g, 12);
    let cands = born.candidates(0.5, 2.0).unwrap();
    let budget = BudgetParams::new(0.5, 2.0, 1.0).unwrap();
    let top = largest_feasible(&cands, &budget).unwrap();
    assert!(construct_pair_from(&born, &cands, top * 0.999, &budget).is_ok());
    assert!(matches!(construct_pair_from(&born, &cands, top * 1.01, &budget), Err(Error::BudgetInfeasible(_))));
    assert!(BudgetParams::new(1.0, 2.0, 1.0).is_err());
    assert!(construct_pair(&born, -1.0, 0.5, 2.0, 1.0).is_err());
}

#[test]
fn single_measurement_is_bounded_and_homogeneous() {
    let g = small();
    let born = born_at(&g, 12);
    let pair = construct_pair(&born, 0.05, 0.5, 2.0, 1.0).unwrap();
    assert_eq!(single_measurement(&pair, &GridField::zeros(g.lattice())).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let vals: Vec<f64> = (0..g.w().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = GridField::from_region_values(g.w(), &vals).unwrap();
        let a = single_measurement(&pair, &f).unwrap();
        let b = single_measurement(&pair, &f.scale(-3.0)).unwrap();
        assert!((b - 3.0 * a).abs() <= 1e-10 * b);
        let fw = DVector::from_vec(vals);
        assert!(a <= pair.gap * pair.difference.gram().norm_of(&fw) * (1.0 + 1e-9));
    }
    let with = pair.with_single_measurement(&GridField::zeros(g.lattice())).unwrap();
    assert_eq!(with.single_meas_gap, Some(0.0));
}

#[test]
fn nonlinear_gap_within_linear_plus_remainder() {
    let g = small();
    let born = born_at(&g, 12);
    let model = born.model();
    let hn = g.lattice().cell_volume();
    let inv = GuardedLu::new(model.interior_block().clone())
        .unwrap()
        .solve(&DMatrix::identity(g.omega().len(), g.omega().len()))
        .unwrap();
    let b_norm = spectral_norm(&inv);
    let whitened = model.gram_w().whiten_left(&born.solutions().transpose()).transpose();
    let v_norm = spectral_norm(&whitened);
    for eps in [1e-2, 5e-3, 1e-3] {
        let pair = construct_pair(&born, eps, 0.5, 2.0, 1.0).unwrap();
        let d = pair.q1.sub(&pair.q2).unwrap().max_abs();
        let r = b_norm * 0.5 * d;
        assert!(r < 1.0);
        let x = r / (1.0 - r);
        let remainder = hn * v_norm * v_norm * d * (2.0 * x + x * x);
        assert!(pair.gap <= 1.5 * pair.gap_linear + remainder, "eps = {eps}");
    }
}

#[test]
fn target_exponents() {
    assert!((target_exponent(&Variant::Schrodinger, 0.5, 2, true) - 0.8).abs() < 1e-15);
    assert!((target_exponent(&Variant::Schrodinger, 0.5, 2, false) - 1.0 / 2.25).abs() < 1e-15);
    let c = Variant::Conductivity { gamma: GammaPreset::Constant };
    assert!((target_exponent(&c, 0.5, 2, true) - 1.0 / 2.25).abs() < 1e-15);
}

#[test]
fn fit_prefers_stretched_law_on_stretched_data() {
    let row = |eps: f64, gap: f64| SweepRow {
        eps,
        gap,
        gap_linear: gap,
        single_meas_gap: 0.0,
        budget: 0.0,
        prefix: 1,
        q1_hash: String::new(),
        q2_hash: String::new(),
    };
    let stretched: Vec<SweepRow> = (0..6).map(|i| 0.5f64.powi(i)).map(|e| row(e, (-2.0 * e.powf(-0.8)).exp())).collect();
    let (a, b, slope) = sweep::fit_rows(&stretched);
    assert!(2.0 * a.unwrap().residual <= b.unwrap().residual);
    assert!((slope.unwrap() - 0.8).abs() < 1e-9);
    let power: Vec<SweepRow> = (0..6).map(|i| 0.5f64.powi(i)).map(|e| row(e, 0.1 * e.powi(3))).collect();
    let (a, b, _) = sweep::fit_rows(&power);
    assert!(2.0 * a.unwrap().residual > b.unwrap().residual);
}

#[test]
fn schrodinger_sweep_decreases_and_is_deterministic() {
    let g = small();
    let qbar = GridField::zeros(g.lattice());
    let cfg = small_config(Variant::Schrodinger);
    let a = run_sweep(&g, &qbar, &cfg).unwrap();
    assert!(a.aborted.is_none());
    assert_eq!(a.rows.len(), 6);
    assert!(a.rows.windows(2).all(|w| w[1].eps < w[0].eps));
    assert!(a.strictly_decreasing());
    assert!(a.rows.iter().all(|r| r.budget <= 1.0 + 1e-9 && r.single_meas_gap >= 0.0));
    let b = run_sweep(&g, &qbar, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    a.write_csv(&pa, "# run").unwrap();
    b.write_csv(&pb, "# run").unwrap();
    let text = std::fs::read_to_string(&pa).unwrap();
    assert_eq!(text, std::fs::read_to_string(&pb).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# run"));
    assert_eq!(
        lines.next(),
        Some("variant,n,s,delta,p,eps,gap,gap_linear,fit_slope,target_exponent,seed,geometry_hash")
    );
    assert_eq!(lines.count(), 6);
}

#[test]
fn unit_conductivity_reproduces_schrodinger_rows() {
    let g = small();
    let qbar = GridField::zeros(g.lattice());
    let s = run_sweep(&g, &qbar, &small_config(Variant::Schrodinger)).unwrap();
    let c = run_sweep(&g, &qbar, &small_config(Variant::Conductivity { gamma: GammaPreset::Constant })).unwrap();
    assert_eq!(c.variant, "conductivity");
    assert_eq!(s.rows.len(), c.rows.len());
    for (a, b) in s.rows.iter().zip(&c.rows) {
        assert!((a.eps - b.eps).abs() <= 1e-12 * a.eps);
        assert!((a.gap - b.gap).abs() <= 1e-6 * a.gap + 1e-16, "{} vs {}", a.gap, b.gap);
    }
}

#[test]
fn variable_metric_sweep_completes() {
    let g = small();
    let qbar = GridField::zeros(g.lattice());
    let cfg = SweepConfig { points: 4, ..small_config(Variant::VariableA { diag: vec![2.0, 1.0] }) };
    let r = run_sweep(&g, &qbar, &cfg).unwrap();
    assert!(r.aborted.is_none());
    assert_eq!(r.rows.len(), 4);
    assert!(r.strictly_decreasing());
    assert_eq!(r.variant, "variable-a");
    let bad = SweepConfig { variant: Variant::VariableA { diag: vec![1.0] }, ..cfg };
    assert!(run_sweep(&g, &qbar, &bad).is_err());
}

#[test]
fn infeasible_start_aborts_with_empty_rows() {
    let g = small();
    let qbar = GridField::zeros(g.lattice());
    let cfg = SweepConfig { eps0: Some(1e3), points: 2, ..small_config(Variant::Schrodinger) };
    let r = run_sweep(&g, &qbar, &cfg).unwrap();
    assert!(r.rows.is_empty());
    assert!(r.aborted.unwrap().contains("r0"));
}

#[test]
fn sweep_config_rejects_unknown_fields() {
    let cfg = SweepConfig::reference(Variant::VariableA { diag: vec![2.0, 1.0] });
    let text = serde_json::to_string(&cfg).unwrap();
    let back: SweepConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let extra = text.replacen('{', "{\"bogus\":1,", 1);
    assert!(serde_json::from_str::<SweepConfig>(&extra).is_err());
}
