use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mdsc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdsc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn result_value(out: &Path, key: &str) -> String {
    let text = fs::read_to_string(out.join("result.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .to_string()
}

#[test]
fn rate_of_unshortened_ensemble_is_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["rate"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(result_value(dir.path(), "design_rate"), "0.5");
}

#[test]
fn rate_matches_brute_force_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["rate", "--domain", "hyperplane:width=4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    // Exact count for (3,6), L=101, w=4, four shortened sections.
    assert_eq!(result_value(dir.path(), "design_rate"), "0.48653451192");
    assert_eq!(result_value(dir.path(), "closed_form.matching"), "sign-corrected");
}

#[test]
fn hypercube_rate_reports_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["rate", "--dim", "2", "--bigL", "16", "--w", "2", "--domain", "hypercube:z=4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(result_value(dir.path(), "bound_holds"), "true");
}

#[test]
fn degree_two_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["rate", "--dl", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bit node degree dl >= 3"));
}

#[test]
fn evolve_exit_codes_follow_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["evolve", "--eps", "0"], &dir.path().join("zero"));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(result_value(&dir.path().join("zero"), "verdict"), "Decoded");

    let o = mdsc(&["evolve", "--eps", "0.45", "--max-iters", "3"], &dir.path().join("short"));
    assert_eq!(o.status.code(), Some(3));

    let o = mdsc(&["evolve", "--eps", "0.45"], &dir.path().join("stall"));
    assert_eq!(o.status.code(), Some(2), "uncoupled-like run above threshold stalls");
}

#[test]
fn malformed_bursts_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["evolve", "--bursts", "3,x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = mdsc(&["evolve", "--dim", "2", "--w", "2", "--bursts", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_figure_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["reproduce", "fig9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn uncoupled_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["threshold", "--uncoupled"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let eps: f64 = result_value(dir.path(), "eps_star").parse().unwrap();
    assert!((eps - 0.4294).abs() < 1e-3, "{eps}");
}

#[test]
fn stall_figure_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let o = mdsc(&["reproduce", "fig1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    assert!(dir.path().join("manifest.txt").exists());
    assert!(dir.path().join("trace.csv").exists());
    assert!(dir.path().join("snap_ℓ0.csv").exists());

    // The same ensemble without the bursts decodes.
    let clean = dir.path().join("clean");
    let manifest = dir.path().join("manifest.txt");
    let o = mdsc(&["evolve", "--config", manifest.to_str().unwrap(), "--bursts", ""], &clean);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.txt");
    fs::write(&cfg, "# short chain\nL = 20\nw = 3\ndomain.kind = hypercube\ndomain.z = 2\neps = 0.3\n").unwrap();
    let out = dir.path().join("o");
    let o = mdsc(
        &["evolve", "--config", cfg.to_str().unwrap(), "--w", "2", "--domain", "hyperplane:width=2"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("L = 20\n"));
    assert!(manifest.contains("w = 2\n"));
    assert!(manifest.contains("domain.kind = hyperplane\n"));
    assert!(!manifest.contains("domain.z"), "{manifest}");
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let o = mdsc(
        &[
            "evolve", "--dim", "2", "--bigL", "24", "--w", "2", "--domain", "hypercube:z=6",
            "--eps", "0.4", "--random-bursts", "3", "--min-separation", "4", "--seed", "7",
            "--snapshots", "0,5,20",
        ],
        &first,
    );
    assert_eq!(o.status.code(), Some(0));
    let second = dir.path().join("b");
    let manifest = first.join("manifest.txt");
    mdsc(&["evolve", "--config", manifest.to_str().unwrap()], &second);
    for file in ["trace.csv", "snap_ℓ5.csv", "snap_ℓ20.pgm", "result.txt", "manifest.txt"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }

    let s1 = dir.path().join("s1");
    let o = mdsc(
        &["sweep", "--dims", "1", "--values", "2,3", "--burst-counts", "0,1", "--max-len", "64", "--jobs", "2"],
        &s1,
    );
    assert_eq!(o.status.code(), Some(0));
    let s2 = dir.path().join("s2");
    let manifest = s1.join("manifest.txt");
    mdsc(&["sweep", "--config", manifest.to_str().unwrap(), "--jobs", "1"], &s2);
    let csv = fs::read_to_string(s1.join("sweep.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(s2.join("sweep.csv")).unwrap());
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("D,w_or_z,bursts,L_used,eps_star,lo,hi,evaluations,seed"));
}
