use std::path::Path;
use std::process::Command;

fn molcrl(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_molcrl")).args(args).current_dir(dir).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn ok(args: &[&str], dir: &Path) -> String {
    let (code, out, err) = molcrl(args, dir);
    assert_eq!(code, 0, "{args:?}\n{err}");
    out
}

const SPEC: &str = "mw: 120.0\nfg 1 benzene_ring true\nfg 4 ether false\nfg 10 alkene true\nfg 18 methyl true\n";

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let corpus = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus.smi")).unwrap();
    let head: String = corpus.lines().take(301).map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.path().join("in.smi"), head + "CCN\nCCCl\nC((\n").unwrap();
    std::fs::write(dir.path().join("spec.txt"), SPEC).unwrap();
    let d = dir.path();
    ok(&["ingest", "--input", "in.smi", "--out-dir", "ing"], d);
    ok(
        &[
            "train-prior", "--corpus", "ing/corpus.smi", "--vocab", "ing/vocab.txt", "--out-dir", "pr", "--epochs", "2",
            "--hidden", "16", "--embed", "8", "--validity-samples", "10", "--seed", "3",
        ],
        d,
    );
    dir
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = setup();
    let d = dir.path();
    let vocab = std::fs::read_to_string(d.join("ing/vocab.txt")).unwrap();
    assert_eq!(vocab.lines().next(), Some("<pad>"));
    assert!(d.join("pr/prior.ckpt").exists() && d.join("pr/epochs.csv").exists());
    ok(&["difficulty", "--prior", "pr/prior.ckpt", "--spec", "spec.txt", "--out-dir", "diff", "-n", "50"], d);
    let plot = std::fs::read_to_string(d.join("diff/difficulty.csv")).unwrap();
    assert_eq!(plot.lines().count(), 5);
    ok(
        &[
            "finetune", "--prior", "pr/prior.ckpt", "--spec", "spec.txt", "--out-dir", "ft", "--method", "cf", "--bins",
            "2", "--budget", "2", "--batch-size", "8", "--difficulty-samples", "20",
        ],
        d,
    );
    for f in ["agent.ckpt", "phase-1.ckpt", "phase-2.ckpt", "phase_log.csv", "plan.txt", "manifest.json"] {
        assert!(d.join("ft").join(f).exists(), "{f}");
    }
    ok(&["evaluate", "--agent", "ft/agent.ckpt", "--spec", "spec.txt", "--out", "ev/r.txt", "-n", "16"], d);
    let report = std::fs::read_to_string(d.join("ev/r.txt")).unwrap();
    assert!(report.contains("[top]") && !report.contains("target:"));
    ok(&["evaluate", "--agent", "ft/agent.ckpt", "--spec", "spec.txt", "--out", "ev/t.txt", "-n", "16", "--target", "Cc1ccccc1C=C"], d);
    assert!(std::fs::read_to_string(d.join("ev/t.txt")).unwrap().contains("identified:"));
}

#[test]
fn prospective_ingest_refilters_clean() {
    let dir = setup();
    let d = dir.path();
    let out = ok(&["ingest", "--input", "in.smi", "--out-dir", "pro", "--prospective"], d);
    assert!(out.contains("filtered 2"), "{out}");
    let kept = std::fs::read_to_string(d.join("pro/corpus.smi")).unwrap();
    assert!(!kept.contains('N') && !kept.contains("Cl"));
}

#[test]
fn errors_map_to_exit_codes_without_partial_outputs() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(molcrl(&["ingest", "--input", "missing.smi", "--out-dir", "x1"], d).0, 2);
    assert!(!d.join("x1").exists());
    assert_eq!(molcrl(&["finetune", "--prior", "pr/prior.ckpt", "--spec", "nope.txt", "--out-dir", "x2"], d).0, 2);
    assert!(!d.join("x2").exists());
    let bad_method = molcrl(&["finetune", "--prior", "pr/prior.ckpt", "--spec", "spec.txt", "--out-dir", "x3", "--method", "zz"], d);
    assert_eq!(bad_method.0, 1);
    assert!(!d.join("x3").exists());
    assert_eq!(molcrl(&["evaluate", "--agent", "pr/prior.ckpt", "--spec", "spec.txt", "--out", "x4/r.txt", "--target", "C1CC"], d).0, 2);
    assert!(!d.join("x4").exists());
    assert_eq!(molcrl(&["evaluate", "--bogus"], d).0, 1);
    assert_eq!(molcrl(&["--help"], d).0, 0);
    std::fs::write(d.join("empty.smi"), "C((\n").unwrap();
    let (code, _, err) = molcrl(&["ingest", "--input", "empty.smi", "--out-dir", "x5"], d);
    assert_eq!(code, 2);
    assert!(err.contains("no usable molecules"));
}

#[test]
fn manifests_replay_byte_identically_with_any_worker_count() {
    let dir = setup();
    let d = dir.path();
    let args = [
        "finetune", "--prior", "pr/prior.ckpt", "--spec", "spec.txt", "--out-dir", "a", "--method", "crf", "--bins", "2",
        "--budget", "2", "--batch-size", "8", "--difficulty-samples", "20", "--refine", "--weak-samples", "16",
    ];
    ok(&args, d);
    ok(&["finetune", "--config", "a/manifest.json", "--out-dir", "b", "--workers", "1"], d);
    for f in ["agent.ckpt", "phase_log.csv", "plan.txt", "phase-1.ckpt"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    ok(&["train-prior", "--config", "pr/manifest.json", "--out-dir", "pr2", "--workers", "2"], d);
    assert_eq!(std::fs::read(d.join("pr/prior.ckpt")).unwrap(), std::fs::read(d.join("pr2/prior.ckpt")).unwrap());
    ok(&["evaluate", "--agent", "a/agent.ckpt", "--spec", "spec.txt", "--out", "e1.txt", "-n", "32", "--seed", "5"], d);
    ok(&["evaluate", "--config", "e1.txt.manifest.json", "--out", "e2.txt", "--workers", "3"], d);
    assert_eq!(std::fs::read(d.join("e1.txt")).unwrap(), std::fs::read(d.join("e2.txt")).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"samples": 10, "top": 2, "seed": 9}"#).unwrap();
    ok(&["evaluate", "--agent", "pr/prior.ckpt", "--spec", "spec.txt", "--out", "r.txt", "--config", "cfg.json", "-k", "3"], d);
    let text = std::fs::read_to_string(d.join("r.txt")).unwrap();
    assert!(text.contains("samples: 10") && text.contains("seed: 9") && text.contains("mean top-3"));
}

#[test]
fn refine_without_weak_constraints_is_a_notice() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("easy.txt"), "mw: 120.0\nfg 11 alkyne false\nfg 17 epoxide false\n").unwrap();
    let out = ok(
        &[
            "finetune", "--prior", "pr/prior.ckpt", "--spec", "easy.txt", "--out-dir", "r", "--budget", "1",
            "--batch-size", "8", "--refine", "--weak-samples", "64", "--xi", "0",
        ],
        d,
    );
    assert!(out.contains("no weakly learned constraints"), "{out}");
}
