use std::path::Path;
use std::process::Command;

use physbound::io::ReportFile;
use tempfile::TempDir;

fn physbound(args: &[&str]) -> (String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_physbound"))
        .args(args)
        .env_remove("PHYSBOUND_SOLVER_CFG")
        .output()
        .expect("binary runs");
    (String::from_utf8(out.stdout).unwrap(), out.status.code().unwrap())
}

fn report(text: &str) -> ReportFile {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name).display().to_string();
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", &path]);
    let (_, code) = physbound(&full);
    assert_eq!(code, 0);
    path
}

#[test]
fn certify_multi_scenario_instance() {
    let dir = TempDir::new().unwrap();
    let f = gen(dir.path(), "ms.json", &["multi-scenario-diag", "--m", "4", "--d", "2", "--seed", "7"]);
    let (out, code) = physbound(&["certify", &f]);
    assert_eq!(code, 0, "{out}");
    let r = report(&out);
    assert!(r.gap.unwrap() >= -1e-6);
    assert!(r.weak_duality.unwrap().pass);
    assert_eq!(r.projector_method, Some(physbound::projectors::ProjectorMethod::MultiScenario));
    assert_eq!(r.input_digest, physbound::io::digest(&std::fs::read(&f).unwrap()));
}

#[test]
fn truncated_file_fails_validation() {
    let dir = TempDir::new().unwrap();
    let f = gen(dir.path(), "p.json", &["rank-one-loads", "--m", "5", "--d", "3"]);
    let text = std::fs::read_to_string(&f).unwrap();
    std::fs::write(&f, &text[..text.len() / 3]).unwrap();
    let (out, code) = physbound(&["validate", &f]);
    assert_eq!(code, 1);
    assert!(report(&out).error.unwrap().contains("line"));
    let (_, code) = physbound(&["validate", "/nonexistent.json"]);
    assert_eq!(code, 1);
}

#[test]
fn boolean_bound_dominates_interval_bound() {
    let dir = TempDir::new().unwrap();
    for seed in 0..3 {
        let f = gen(dir.path(), "h.json", &["helmholtz1d", "--m", "6", "--d", "2", "--seed", &seed.to_string()]);
        let (bo, c1) = physbound(&["bound", &f, "--mode", "boolean"]);
        let (io, c2) = physbound(&["bound", &f, "--mode", "interval"]);
        assert_eq!((c1, c2), (0, 0), "{bo}\n{io}");
        let (b, i) = (report(&bo).d_star.unwrap(), report(&io).d_star.unwrap());
        assert!(b >= i - 1e-6, "seed {seed}: boolean {b} < interval {i}");
    }
}

#[test]
fn certify_is_deterministic_apart_from_timings() {
    let dir = TempDir::new().unwrap();
    let f = gen(dir.path(), "r.json", &["rank-one-loads", "--m", "5", "--d", "3", "--domain", "boolean"]);
    let (a, _) = physbound(&["certify", &f]);
    let (b, _) = physbound(&["certify", &f]);
    assert_eq!(report(&a).without_timings(), report(&b).without_timings());
}

#[test]
fn gen_is_byte_identical_for_equal_seeds() {
    let dir = TempDir::new().unwrap();
    let args = ["helmholtz1d", "--m", "8", "--d", "3", "--seed", "5", "--hexfloat"];
    let a = gen(dir.path(), "a.json", &args);
    let b = gen(dir.path(), "b.json", &args);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn certify_directory_reports_every_file() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "1.json", &["rank-one-loads", "--m", "4", "--d", "2", "--domain", "boolean"]);
    gen(dir.path(), "2.json", &["multi-scenario-diag", "--m", "4", "--d", "2", "--domain", "boolean"]);
    std::fs::write(dir.path().join("3.json"), "{").unwrap();
    let (out, code) = physbound(&["certify", &dir.path().display().to_string()]);
    let reports: Vec<ReportFile> = serde_json::from_str(&out).unwrap();
    assert_eq!(reports.len(), 3);
    assert_eq!(reports.iter().map(|r| r.exit_code).collect::<Vec<_>>(), vec![0, 0, 1]);
    assert_eq!(code, 1);
}

#[test]
fn qr_projectors_on_coupled_terms_are_rejected() {
    let dir = TempDir::new().unwrap();
    let f = gen(dir.path(), "r.json", &["rank-one-loads", "--m", "5", "--d", "3", "--seed", "2"]);
    let (out, code) = physbound(&["project", &f, "--projectors", "qr"]);
    assert_eq!(code, 1);
    assert_eq!(report(&out).projectors_verified, Some(false));
    let (out, code) = physbound(&["project", &f, "--projectors", "inverse"]);
    assert_eq!(code, 0);
    assert!(report(&out).residuals.unwrap().max() <= 1e-10);
}

#[test]
fn solver_config_from_environment_and_exit_code_two() {
    let dir = TempDir::new().unwrap();
    let f = gen(dir.path(), "h.json", &["helmholtz1d", "--m", "6", "--d", "2"]);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"max_iter": 1}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_physbound"))
        .args(["bound", &f])
        .env("PHYSBOUND_SOLVER_CFG", &cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let r = report(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r.solver_status, Some(physbound::dual::BoundStatus::MaxIter));

    std::fs::write(&cfg, "not json").unwrap();
    let (_, code) = physbound(&["bound", &f, "--solver-cfg", &cfg.display().to_string()]);
    assert_eq!(code, 1);
}

#[test]
fn heuristic_reports_a_valid_bound() {
    let dir = TempDir::new().unwrap();
    let f = gen(dir.path(), "m.json", &["multi-scenario-diag", "--m", "4", "--d", "2", "--seed", "7"]);
    let (hout, code) = physbound(&["heuristic", &f, "--iters", "300", "--seed", "3", "--init-scale", "0.1"]);
    assert_eq!(code, 0, "{hout}");
    let (bout, _) = physbound(&["bound", &f]);
    let h = report(&hout).heuristic.unwrap();
    assert!(h.dual_bound <= report(&bout).d_star.unwrap() + 1e-6);
    let (_, code) = physbound(&["heuristic", &f, "--iters", "300", "--step-primal", "50", "--step-dual", "50"]);
    assert_eq!(code, 2);
}
