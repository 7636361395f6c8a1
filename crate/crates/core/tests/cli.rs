use std::process::{Command, Output};

use hamlearn::sparse::SparseHamiltonian;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamlearn")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn gen_is_reproducible_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for path in [&a, &b] {
        let out = run(&["gen", "--n", "3", "--m", "4", "--seed", "17", "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let h = SparseHamiltonian::parse_text(&text).unwrap();
    assert_eq!((h.n(), h.supp()), (3, 4));
    let out = run(&["gen", "--n", "3", "--m", "4", "--seed", "17", "--out", a.to_str().unwrap()]);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains(&format!("linf={}", h.norms().linf)));
}

#[test]
fn learn_from_file_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("h.txt");
    std::fs::write(&input, SparseHamiltonian::from_strs(&[("Z", 0.5)]).unwrap().to_text()).unwrap();
    let report = dir.path().join("r.json");
    let out = run(&[
        "learn",
        "--in",
        input.to_str().unwrap(),
        "--m",
        "1",
        "--T",
        "1",
        "--rho",
        "16384",
        "--seed",
        "3",
        "--epsilon",
        "0.015625",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json["final_error"].as_f64().unwrap() <= 0.015625);
    assert_eq!(json["ledger"]["t_min"].as_f64(), Some(1.0));
}

#[test]
fn usage_errors_exit_two() {
    let missing = run(&["learn", "--in", "/nonexistent/h.txt", "--m", "1", "--seed", "1", "--epsilon", "0.1"]);
    assert_eq!(code(&missing), 2);
    let single = run(&["sweep", "--n", "1", "--m", "1", "--seed", "1", "--epsilons", "0.1"]);
    assert_eq!(code(&single), 2);
    let unknown = run(&["verify", "--check", "no_such_check", "--trials", "1"]);
    assert_eq!(code(&unknown), 2);
    let bad_eps = run(&["learn", "--n", "1", "--m", "1", "--seed", "1", "--epsilon", "1.5"]);
    assert_eq!(code(&bad_eps), 2);
    let bad_m = run(&["gen", "--n", "1", "--m", "4", "--seed", "1"]);
    assert_eq!(code(&bad_m), 2);
}

#[test]
fn verify_detects_tampering() {
    let honest = run(&["verify", "--check", "duhamel", "--trials", "30"]);
    assert_eq!(code(&honest), 0);
    let tampered = run(&["verify", "--check", "duhamel", "--trials", "30", "--bound-scale", "0.5"]);
    assert_eq!(code(&tampered), 1);
    let table = String::from_utf8(tampered.stdout).unwrap();
    assert!(table.contains("duhamel") && table.contains("false"));
}

#[test]
fn sequential_flag_matches_parallel_output() {
    let args = ["verify", "--trials", "20", "--json"];
    let par = run(&args);
    let seq = run(&[&args[..], &["--sequential"]].concat());
    assert_eq!(par.stdout, seq.stdout);
}
