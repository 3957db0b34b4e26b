use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use blockscope::io;
use blockscope::session::{simulate, BandSpec};
use blockscope::*;

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn g_session(offsets: &[f64]) -> SessionConfig {
    SessionConfig {
        seed: 11,
        offsets_m: offsets.to_vec(),
        bands: vec![BandSpec::Named(BandId::G)],
        ..Default::default()
    }
}

#[test]
fn default_grid_layout_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let session = g_session(&[0.0, 0.03, 0.06, 0.12, 0.25, 0.50]);
    let summary = run_experiment(&session, dir.path()).unwrap();
    let files = tree(dir.path());

    let summary_csv = String::from_utf8(files["G/summary.csv"].clone()).unwrap();
    let rows: Vec<&str> = summary_csv.lines().collect();
    assert_eq!(rows[0], "y_cm,mean_db,std_db");
    assert_eq!(rows.len(), 7);
    assert!(rows[1].starts_with("0,") && rows[6].starts_with("50,"));

    // one baseline plus six offsets
    let sweeps = files.keys().filter(|k| k.starts_with("G/sweeps/")).count();
    assert_eq!(sweeps, 7);
    let pdp = String::from_utf8(files["G/pdp/y_12cm.csv"].clone()).unwrap();
    assert!(pdp.lines().any(|l| l == "path_length_cm,power_db"));
    for name in [
        "models.json",
        "classification.csv",
        "localization.csv",
        "features/baseline.csv",
    ] {
        assert!(files.contains_key(&format!("G/{name}")), "{name}");
    }

    let band = &summary.bands[0];
    assert!(band.baseline_components >= 6);
    let full = &band.offsets[0];
    assert!(full.stats.mean_db > 10.0);
    assert_eq!(full.estimate.regime, Regime::LosBlocking);
    assert_eq!(full.classified_index, Some(0));
    let far = &band.offsets[3];
    assert_eq!(far.estimate.regime, Regime::ScatterPath);
    assert!((far.estimate.y_m.unwrap() - 0.12).abs() < 0.03);

    // files written by the run read back through the public readers
    let s = io::read_sweep(&dir.path().join("G/sweeps/y_12cm.txt")).unwrap();
    assert_eq!(s.band(), &BandConfig::g_band());
    let a = io::read_attenuation(&dir.path().join("G/attenuation/y_0cm.csv")).unwrap();
    assert_eq!(a.len(), 1001);
    io::read_models(&dir.path().join("G/models.json")).unwrap();
    io::read_features(&dir.path().join("G/features/y_25cm.csv")).unwrap();
}

#[test]
fn empty_offsets_write_baseline_only() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&g_session(&[]), dir.path()).unwrap();
    assert!(summary.bands[0].offsets.is_empty());
    let files = tree(dir.path());
    assert_eq!(files["G/summary.csv"], b"y_cm,mean_db,std_db\n");
    assert!(files.contains_key("G/sweeps/baseline.txt"));
    assert!(!files.contains_key("G/models.json"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let session = g_session(&[0.0, 0.12, 0.5]);
    run_experiment(&session, a.path()).unwrap();
    run_experiment(&session, b.path()).unwrap();
    assert_eq!(tree(a.path()), tree(b.path()));

    let c = tempfile::tempdir().unwrap();
    run_experiment(
        &SessionConfig {
            seed: 12,
            ..session
        },
        c.path(),
    )
    .unwrap();
    assert_ne!(
        tree(a.path())["G/sweeps/baseline.txt"],
        tree(c.path())["G/sweeps/baseline.txt"]
    );
}

#[test]
fn simulate_matches_run_sweeps() {
    let session = g_session(&[0.0, 0.25]);
    let sims = simulate(&session).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&session, dir.path()).unwrap();
    let run_base = io::read_sweep(&dir.path().join("G/sweeps/baseline.txt")).unwrap();
    assert_eq!(sims[0].baseline, run_base);
    let run_25 = io::read_sweep(&dir.path().join("G/sweeps/y_25cm.txt")).unwrap();
    assert_eq!(sims[0].offsets[1].1, run_25);
}
