use std::fs;
use std::path::Path;

use tresca_flow::harness::checkpoint::{decode, load_checkpoint, save_checkpoint, VERSION_HISTORY, VERSION_PLAIN};
use tresca_flow::harness::config::RunConfig;
use tresca_flow::harness::output::RunManifest;
use tresca_flow::harness::{parse_config, resume, run_config, verify_manifest};

fn config(extra: &str) -> RunConfig {
    parse_config(&format!(
        "L = 2\nh.mean = 1\nh.cos[1] = 0.1\nNq = 16\nNs = 8\nU0 = 1\nalpha = 0.5\nk = 0.05\ndelta = 0.5\nnu = 0.1\n\
         dt = 0.005\nsnapshot_dt = 0.05\ndt_sample = 0.05\nl = 0.5\ninit.kind = random\ninit.amplitude = 2\nseed = 4\n{extra}"
    ))
    .unwrap()
}

fn files_without_manifest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let m = verify_manifest(dir).unwrap();
    m.files
        .iter()
        .map(|f| (f.path.clone(), fs::read(dir.join(&f.path)).unwrap()))
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn restart_matches_a_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let straight = run_config(&config("T_end = 1\n"), None, &mut []).unwrap();
    let first = run_config(&config("T_end = 0.5\n"), Some(&tmp.path().join("a")), &mut []).unwrap();
    let cp = load_checkpoint(&tmp.path().join("a/final.tcf")).unwrap();
    assert!(cp.history.is_some());
    let second = resume(&config("T_end = 1\n"), &cp, None, &mut []).unwrap();
    let (s, r) = (&straight.summary.final_state, &second.summary.final_state);
    assert!(max_diff(&s.v1, &r.v1) <= 1e-12);
    assert!(max_diff(&s.v2, &r.v2) <= 1e-12);
    assert!((s.t - r.t).abs() <= 1e-12);
    assert_eq!(first.summary.steps + second.summary.steps, straight.summary.steps);
}

#[test]
fn plain_checkpoint_restarts_with_a_cold_step() {
    let tmp = tempfile::tempdir().unwrap();
    let first = run_config(&config("T_end = 0.5\n"), None, &mut []).unwrap();
    let path = tmp.path().join("plain.tcf");
    save_checkpoint(&path, &first.checkpoint, VERSION_PLAIN).unwrap();
    let cp = load_checkpoint(&path).unwrap();
    assert!(cp.history.is_none());
    assert_eq!(cp.state, first.checkpoint.state);
    let straight = run_config(&config("T_end = 1\n"), None, &mut []).unwrap();
    let second = resume(&config("T_end = 1\n"), &cp, None, &mut []).unwrap();
    let d = max_diff(&straight.summary.final_state.v1, &second.summary.final_state.v1);
    assert!(d > 0.0 && d < 1e-3, "{d}");
}

#[test]
fn outputs_are_deterministic_apart_from_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("T_end = 0.3\n");
    run_config(&cfg, Some(&tmp.path().join("a")), &mut []).unwrap();
    run_config(&cfg, Some(&tmp.path().join("b")), &mut []).unwrap();
    assert_eq!(
        files_without_manifest(&tmp.path().join("a")),
        files_without_manifest(&tmp.path().join("b"))
    );
    let read = |d: &str| -> RunManifest {
        serde_json::from_slice(&fs::read(tmp.path().join(d).join("manifest.json")).unwrap()).unwrap()
    };
    let (mut a, mut b) = (read("a"), read("b"));
    a.timing = b.timing;
    a.wall_seconds = b.wall_seconds;
    assert_eq!(a, b);
    b.files.clear();
    assert_eq!(b.config, cfg.to_text());
}

#[test]
fn zero_length_run_lists_only_the_initial_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("T_end = 0\ncheckpoint_final = false\n");
    let out = run_config(&cfg, Some(tmp.path()), &mut []).unwrap();
    let names: Vec<String> = out.manifest.unwrap().files.into_iter().map(|f| f.path).collect();
    assert_eq!(names, vec!["energy.csv".to_string(), "traces/trace_000000.csv".to_string()]);
    let energy = fs::read_to_string(tmp.path().join("energy.csv")).unwrap();
    assert_eq!(energy.lines().count(), 2);
    assert!(energy.starts_with(
        "t,h_norm_sq,v_norm_sq,l4_norm,j_value,energy_residual,slip_max,stress_max,comp_residual\n"
    ));
    verify_manifest(tmp.path()).unwrap();
}

#[test]
fn manifest_catches_every_kind_of_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_config(&config("T_end = 0.2\n"), Some(dir), &mut []).unwrap();
    verify_manifest(dir).unwrap();

    let cp = dir.join("final.tcf");
    let original = fs::read(&cp).unwrap();
    for pos in [0, original.len() / 2, original.len() - 1] {
        let mut bad = original.clone();
        bad[pos] = bad[pos].wrapping_add(1);
        fs::write(&cp, &bad).unwrap();
        assert_eq!(verify_manifest(dir).unwrap_err().category(), "manifest");
    }
    fs::write(&cp, &original).unwrap();

    fs::write(dir.join("stray.txt"), b"x").unwrap();
    assert!(verify_manifest(dir).unwrap_err().to_string().contains("stray.txt"));
    fs::remove_file(dir.join("stray.txt")).unwrap();

    fs::remove_file(dir.join("traces/trace_000001.csv")).unwrap();
    assert!(verify_manifest(dir).unwrap_err().to_string().contains("missing"));
}

#[test]
fn checkpoint_from_another_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let coarse = config("T_end = 0.1\n");
    run_config(&coarse, Some(tmp.path()), &mut []).unwrap();
    let cp = load_checkpoint(&tmp.path().join("final.tcf")).unwrap();
    let fine = parse_config(&coarse.to_text().replace("Nq = 16", "Nq = 32").replace("T_end = 0.1", "T_end = 0.2")).unwrap();
    assert_eq!(fine.geometry.nq, 32);
    let err = resume(&fine, &cp, None, &mut []).unwrap_err();
    assert_eq!(err.category(), "checkpoint");
    assert!(err.to_string().contains("dimension mismatch"));

    let bytes = fs::read(tmp.path().join("final.tcf")).unwrap();
    assert_eq!(decode(&bytes).unwrap().history.is_some(), true);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION_HISTORY);
    assert_eq!(decode(&bytes[..bytes.len() - 3]).unwrap_err().category(), "checkpoint");
}
