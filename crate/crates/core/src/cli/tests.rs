use std::path::Path;

use super::*;
use crate::instability::Variant;
use crate::liouville::GammaPreset;

fn small(dir: &Path) -> RunConfig {
    RunConfig {
        pts_per_side: 24,
        out_dir: dir.to_path_buf(),
        sweep: SweepGrid { basis_size: 20, ..SweepGrid::default() },
        ..RunConfig::default()
    }
}

fn write_config(dir: &Path, cfg: &RunConfig) -> std::path::PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.canonical()).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().skip(2).map(String::from).collect()
}

#[test]
fn config_round_trips_byte_identical() {
    let mut cfg = RunConfig::default();
    cfg.variant = Variant::Conductivity { gamma: GammaPreset::Bump { center: vec![0.0, 0.0], radius: 0.6, amplitude: 0.4142 } };
    cfg.qbar = QbarPreset::Bump { amplitude: 0.3, radius: 0.4 };
    cfg.p = Some(2.5);
    cfg.sweep.eps0 = Some(0.1);
    cfg.tolerances.scale = 1.0 / 3.0;
    let text = cfg.canonical();
    let back = RunConfig::parse(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.canonical(), text);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn config_rejects_unknown_keys_and_empty_input() {
    assert!(matches!(RunConfig::parse(""), Err(crate::Error::Config(_))));
    assert!(matches!(RunConfig::parse("{\"sweeep\": {}}"), Err(crate::Error::Config(_))));
    assert!(matches!(RunConfig::parse("{\"sweep\": {\"pts\": 3}}"), Err(crate::Error::Config(_))));
    assert!(matches!(RunConfig::parse("{\"s\": 1.5}"), Err(crate::Error::Config(_))));
    let partial = RunConfig::parse("{\"s\": 0.25}").unwrap();
    assert_eq!(partial.s, 0.25);
    assert_eq!(partial.sweep, SweepGrid::default());
}

#[test]
fn qbar_presets_live_on_omega() {
    let cfg = small(Path::new("."));
    let g = cfg.geometry().unwrap();
    let c = QbarPreset::Constant { value: 0.7 }.field(&g).unwrap();
    for i in 0..g.lattice().num_nodes() {
        let expect = if g.omega().contains(i) { 0.7 } else { 0.0 };
        assert_eq!(c.values()[i], expect);
    }
    assert!(QbarPreset::Bump { amplitude: 1.0, radius: 0.4 }.field(&g).is_ok());
    assert!(QbarPreset::Bump { amplitude: 1.0, radius: 3.0 }.field(&g).is_err());
}

#[test]
fn spectrum_writes_requested_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.spectrum.count = 10;
    cfg.spectrum.fit_range = [1, 10];
    let o = cmd_spectrum(&cfg).unwrap();
    assert!(o.passed);
    let csv = dir.path().join("eigensystem.csv");
    assert_eq!(csv_rows(&csv).len(), 10);
    assert_eq!(artifact_hash(&csv).unwrap(), Some(cfg.hash()));
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum_fit.json")).unwrap()).unwrap();
    assert!(fit["embedding_exponent"].as_f64().unwrap() < 0.0);
    assert_eq!(fit["version"].as_str(), Some(VERSION));
    let first = std::fs::read(&csv).unwrap();
    cmd_spectrum(&cfg).unwrap();
    assert_eq!(std::fs::read(&csv).unwrap(), first);
}

#[test]
fn forward_report_at_background_has_zero_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let o = cmd_forward(&cfg).unwrap();
    assert!(o.passed, "{}", o.summary);
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("forward_report.json")).unwrap()).unwrap();
    assert_eq!(rep["gamma_at_background"].as_f64(), Some(0.0));
    assert_eq!(rep["domination"]["violations"].as_u64(), Some(0));
    assert_eq!(rep["config_hash"].as_str(), Some(cfg.hash().as_str()));
}

#[test]
fn realization_gap_shrinks_under_refinement() {
    let coarse = small(Path::new("."));
    let fine = RunConfig { pts_per_side: 48, ..coarse.clone() };
    let gaps: Vec<f64> = [coarse, fine]
        .iter()
        .map(|c| {
            let g = c.geometry().unwrap();
            realization_gap(&g, &c.qbar.field(&g).unwrap()).unwrap()
        })
        .collect();
    assert!(gaps[1] <= 0.5 * gaps[0], "{gaps:?}");
}

#[test]
fn unit_conductivity_instability_matches_schrodinger() {
    let dir = tempfile::tempdir().unwrap();
    let a = small(&dir.path().join("s"));
    let b = RunConfig { variant: Variant::Conductivity { gamma: GammaPreset::Constant }, out_dir: dir.path().join("c"), ..a.clone() };
    assert!(cmd_instability(&a).unwrap().passed);
    assert!(cmd_instability(&b).unwrap().passed);
    let ra = csv_rows(&a.out_dir.join("instability.csv"));
    let rb = csv_rows(&b.out_dir.join("instability.csv"));
    assert_eq!(ra.len(), 6);
    for (x, y) in ra.iter().zip(&rb) {
        let fx: Vec<&str> = x.split(',').collect();
        let fy: Vec<&str> = y.split(',').collect();
        assert_eq!(fy[0], "conductivity");
        let (gx, gy): (f64, f64) = (fx[6].parse().unwrap(), fy[6].parse().unwrap());
        assert!((gx - gy).abs() <= 1e-6 * gx + 1e-16);
        assert_eq!(fx[5], fy[5]);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.out_dir.join("instability_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["strictly_decreasing"].as_bool(), Some(true));
    assert!(manifest["fit_slope"].as_f64().is_some());
}

#[test]
fn verify_passes_and_detects_injected_symbol_fault() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { out_dir: dir.path().join("ok"), ..RunConfig::default() };
    let o = cmd_verify(&cfg).unwrap();
    assert!(o.passed, "{}", o.summary);
    let rows = csv_rows(&cfg.out_dir.join("verify.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.ends_with(",true")));

    let bad = RunConfig { out_dir: dir.path().join("bad"), inject: Inject { symbol_scale: 1.1 }, ..RunConfig::default() };
    let checks = run_checks(&bad, &bad.geometry().unwrap()).unwrap();
    for c in &checks {
        assert_eq!(c.passed, c.name != "heat_roundtrip", "{}", c.name);
    }
    assert!((checks[0].value - 0.1).abs() < 1e-6);
}

#[test]
fn verify_refuses_mixed_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.spectrum.count = 10;
    cfg.spectrum.fit_range = [1, 10];
    cmd_spectrum(&cfg).unwrap();
    let other = RunConfig { seeds: Seeds { sweep: 1, data: 1 }, ..cfg.clone() };
    assert!(matches!(cmd_verify(&other), Err(CommandError::Usage(_))));
    let (files, hashes) = scan_hashes(dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    assert_eq!(hashes.len(), 1);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    assert_eq!(run(["calderon-lab"]), EXIT_USAGE);
    assert_eq!(run(["calderon-lab", "bogus"]), EXIT_USAGE);
    assert_eq!(run(["calderon-lab", "--help"]), EXIT_PASS);
    std::fs::write(dir.path().join("empty.json"), "").unwrap();
    assert_eq!(run(["calderon-lab", "verify", "--config", &path("empty.json")]), EXIT_USAGE);
    assert_eq!(run(["calderon-lab", "verify", "--threads", "0"]), EXIT_USAGE);
    assert_eq!(run(["calderon-lab", "verify", "--tol-scale=-1"]), EXIT_USAGE);

    let mut cfg = small(&dir.path().join("spec"));
    cfg.spectrum.count = 10;
    cfg.spectrum.fit_range = [1, 10];
    let file = write_config(dir.path(), &cfg);
    assert_eq!(run(["calderon-lab", "spectrum", "--config", file.to_str().unwrap()]), EXIT_PASS);

    let inject = RunConfig { inject: Inject { symbol_scale: 1.1 }, out_dir: dir.path().join("inj"), ..RunConfig::default() };
    std::fs::write(dir.path().join("inj.json"), inject.canonical()).unwrap();
    assert_eq!(run(["calderon-lab", "verify", "--config", &path("inj.json"), "--threads", "1"]), EXIT_CHECK_FAILED);

    let broken = RunConfig { geometry: Some(dir.path().join("missing.json")), out_dir: dir.path().join("x"), ..RunConfig::default() };
    std::fs::write(dir.path().join("broken.json"), broken.canonical()).unwrap();
    assert_eq!(run(["calderon-lab", "forward", "--config", &path("broken.json")]), EXIT_INTERNAL);
}

#[test]
fn overrides_enter_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_config(dir.path(), &small(dir.path()));
    let cli = Cli::try_parse_from(["calderon-lab", "instability", "--config", file.to_str().unwrap(), "--seed", "9", "--tol-scale", "2"])
        .unwrap();
    let cfg = cli.effective_config().unwrap();
    assert_eq!(cfg.seeds, Seeds { sweep: 9, data: 9 });
    assert_eq!(cfg.tolerances.scale, 2.0);
    assert_ne!(cfg.hash(), small(dir.path()).hash());
    assert_eq!(cli.command, Command::Instability);
    let moved = RunConfig { out_dir: dir.path().join("elsewhere"), ..small(dir.path()) };
    assert_eq!(moved.hash(), small(dir.path()).hash());
}
