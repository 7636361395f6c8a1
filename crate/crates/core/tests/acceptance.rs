//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hamlearn::control::{integer_evol_learn, IntegerEvolParams, LearnSettings, MockIntegerAccess};
use hamlearn::dense;
use hamlearn::learner::{
    self, main_learn, regime_params, sparse_ham_learn, sql_learn, BranchPolicy, DirectEvolution, Regime,
};
use hamlearn::oracle::EvolutionOracle;
use hamlearn::par::Execution;
use hamlearn::pauli::PauliLabel;
use hamlearn::rng::{derive_seed, rng_from_seed};
use hamlearn::sparse::{random_sparse_hamiltonian, PauliExpansion};
use hamlearn::tomography::{self, StateMode, TomographyConfig};
use hamlearn::verifier::{self, CheckSpec};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Random `(n, m)` with `n ≤ max_n` and `m ≤ min(max_m, 4^n − 1)`.
fn shape(rng: &mut impl Rng, max_n: usize, max_m: usize) -> (usize, usize) {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m.min(4usize.pow(n as u32) - 1));
    (n, m)
}

fn fraction_check(label: &str, hits: usize, trials: usize, need: f64) -> Outcome {
    let rate = hits as f64 / trials as f64;
    let line = format!("{label}: {hits}/{trials} = {rate:.3} (need ≥ {need})");
    if rate >= need {
        Ok(line)
    } else {
        Err(line)
    }
}

fn long_time_rewriting() -> Outcome {
    let mut rng = rng_from_seed(1);
    let mut worst: f64 = 0.0;
    for i in 0..200u64 {
        let (n, m) = shape(&mut rng, 3, 3);
        let h = random_sparse_hamiltonian(n, m, derive_seed(1, "h", i), 1.0).map_err(|e| e.to_string())?;
        let h_j = random_sparse_hamiltonian(n, m, derive_seed(1, "hj", i), 1.0).map_err(|e| e.to_string())?;
        let big_t = if i % 2 == 0 { 0.05 } else { 1.0 };
        let tau = rng.random_range(1e-3..1.0);
        worst = worst.max(verifier::long_time_deviation(&h, &h_j, big_t, tau).map_err(|e| e.to_string())?);
    }
    let line = format!("max Frobenius deviation {worst:.3e} over 200 instances (need ≤ 1e-10)");
    if worst <= 1e-10 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn inequality_suite() -> Outcome {
    let template = CheckSpec { slack: 1e-9, ..CheckSpec::new("duhamel").with_trials(200) };
    let reports = verifier::run_all(&template, Execution::Parallel).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    let line = format!("{} checks × 200 trials, failed: {failed:?}", reports.len());
    if failed.is_empty() {
        Ok(line)
    } else {
        Err(line)
    }
}

fn span_bound() -> Outcome {
    let mut rng = rng_from_seed(3);
    let (mut evaluated, mut skipped, mut worst_mass, mut oversize) = (0, 0, 0.0f64, 0);
    for i in 0..200u64 {
        let (n, m) = shape(&mut rng, 3, 3);
        let h = random_sparse_hamiltonian(n, m, derive_seed(3, "h", i), 1.0).map_err(|e| e.to_string())?;
        let h_j = random_sparse_hamiltonian(n, m, derive_seed(3, "hj", i), 1.0).map_err(|e| e.to_string())?;
        let t = [0.05, 0.5, 1.0][i as usize % 3];
        match verifier::span_outcome(&h, &h_j, t, m).map_err(|e| e.to_string())? {
            None => skipped += 1,
            Some(out) => {
                evaluated += 1;
                worst_mass = worst_mass.max(out.off_span_mass);
                if out.span_size > out.bound {
                    oversize += 1;
                }
            }
        }
    }
    let line = format!(
        "{evaluated} evaluated, {skipped} skipped, max off-span mass {worst_mass:.3e}, {oversize} spans above 4^m"
    );
    if evaluated > 0 && worst_mass <= 1e-10 && oversize == 0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn sparse_ham_end_to_end() -> Outcome {
    let mut rng = rng_from_seed(4);
    let eps = 0.05;
    let mut hits = 0;
    for i in 0..100u64 {
        let (n, m) = shape(&mut rng, 3, 3);
        let a = random_sparse_hamiltonian(n, m, derive_seed(4, "a", i), 1.0).map_err(|e| e.to_string())?;
        let a = a.scale(eps * rng.random_range(0.5..1.0) / a.linf());
        let mut access = DirectEvolution::new(&a).map_err(|e| e.to_string())?;
        let out =
            sparse_ham_learn(&mut access, m, m, eps, 0.05, i, &LearnSettings::default()).map_err(|e| e.to_string())?;
        if out.estimate.linf_distance(&a) <= eps / 8.0 {
            hits += 1;
        }
    }
    fraction_check("ℓ∞ ≤ ε/8", hits, 100, 0.95)
}

fn integer_evol_mock() -> Outcome {
    let mut rng = rng_from_seed(5);
    let params = IntegerEvolParams { s: 0, c_f: 1.0, c_inf: 1.0, c: 1.0, rho: 1.0 };
    let eps = 0.01;
    let mut hits = 0;
    for i in 0..100u64 {
        let (n, m) = shape(&mut rng, 2, 2);
        let w = random_sparse_hamiltonian(n, m, derive_seed(5, "w", i), 1.0).map_err(|e| e.to_string())?;
        let op = dense::operator_norm(&dense::to_dense_hamiltonian(&w).map_err(|e| e.to_string())?);
        let w = w.scale(0.8 * eps / w.frobenius().max(op));
        let mut access = MockIntegerAccess::new(&w, rng.random_range(-3.0..3.0)).map_err(|e| e.to_string())?;
        let p = IntegerEvolParams { s: m, ..params };
        let out =
            integer_evol_learn(&mut access, &p, eps, 0.05, i, &LearnSettings::default()).map_err(|e| e.to_string())?;
        if out.t != 10 || (out.delta_t - 0.01).abs() > 1e-15 {
            return Err(format!("trial {i}: t = {}, δ_t = {} (expected 10 and 0.01)", out.t, out.delta_t));
        }
        if out.w.sub(&w).frobenius() <= p.c * eps {
            hits += 1;
        }
    }
    fraction_check("t = 10, δ_t = 0.01, ‖W − W̃‖_F ≤ cε", hits, 100, 0.95)
}

fn sql_end_to_end() -> Outcome {
    let eps = 0.1;
    let s = regime_params(2, 2, 1.0, None, Regime::LogSparse, 1.0).map_err(|e| e.to_string())?.effective_s();
    let mut rng = rng_from_seed(6);
    let mut hits = 0;
    for i in 0..100u64 {
        let a = random_sparse_hamiltonian(2, 2, derive_seed(6, "a", i), 1.0).map_err(|e| e.to_string())?;
        let d = random_sparse_hamiltonian(2, 2, derive_seed(6, "d", i), 1.0).map_err(|e| e.to_string())?;
        let a0 = a.sub(&d.scale(eps * rng.random_range(0.2..1.0) / d.linf()));
        let mut oracle = EvolutionOracle::new(a.clone(), 1.0).map_err(|e| e.to_string())?;
        let out =
            sql_learn(&mut oracle, &a0, 2, s, eps, 0.05, i, &LearnSettings::default()).map_err(|e| e.to_string())?;
        if a.sub(&a0).linf_distance(&out.delta_h) <= eps / 4.0 && oracle.ledger().t_min >= 1.0 {
            hits += 1;
        }
    }
    fraction_check("ℓ∞ ≤ ε/4", hits, 100, 0.95)
}

fn main_loop() -> Outcome {
    let eps = 2f64.powi(-6);
    let rho = 16384.0;
    let mut lines = Vec::new();
    let mut ok = true;
    for (n, m) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        for seed in 0..2u64 {
            let start = Instant::now();
            let h = random_sparse_hamiltonian(n, m, derive_seed(7, "h", seed * 10 + (n * 4 + m) as u64), 1.0)
                .map_err(|e| e.to_string())?;
            let params = regime_params(m, n, 1.0, None, Regime::LogSparse, rho).map_err(|e| e.to_string())?;
            let mut oracle = EvolutionOracle::new(h.clone(), 1.0).map_err(|e| e.to_string())?;
            let (_, mut report) =
                main_learn(&mut oracle, m, eps, &params, 0.05, seed, &LearnSettings::default(), BranchPolicy::Auto)
                    .map_err(|e| e.to_string())?;
            learner::attach_true_errors(&mut report, &h);
            let err = report.final_error.unwrap_or(f64::INFINITY);
            let pass = err <= eps && report.halving_holds() && report.ledger.t_min_reported() == Some(1.0);
            ok &= pass;
            lines.push(format!("n={n} m={m} err={err:.2e} {:.1}s", start.elapsed().as_secs_f64()));
        }
    }
    let line = format!("ρ = {rho}, {}", lines.join("; "));
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn run_bin(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hamlearn")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

const SWEEP_EPS: &str = "0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125";

fn sweep_slope(dir: &Path, tag: &str, extra: &[&str]) -> Result<f64, String> {
    let summary = dir.join(format!("{tag}.json"));
    let csv = dir.join(format!("{tag}.csv"));
    let mut args = vec!["sweep", "--n", "2", "--m", "2", "--seed", "8", "--epsilons", SWEEP_EPS];
    args.extend_from_slice(extra);
    let (csv_s, summary_s) = (csv.to_str().unwrap().to_owned(), summary.to_str().unwrap().to_owned());
    args.extend_from_slice(&["--out", &csv_s, "--summary", &summary_s]);
    run_bin(&args)?;
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let key = if tag == "heisenberg" { "slope_heisenberg" } else { "slope_sql" };
    json[key].as_f64().ok_or_else(|| format!("{tag}: no {key} in summary (mixed-branch runs?)"))
}

fn scaling_slopes() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let heis = sweep_slope(dir.path(), "heisenberg", &["--T", "0.05", "--rho", "1024"])?;
    let sql = sweep_slope(dir.path(), "sql", &["--T", "1", "--branch", "sql"])?;
    let line = format!("Heisenberg slope {heis:.3} (need [0.8, 1.3]), SQL slope {sql:.3} (need [1.7, 2.3])");
    if (0.8..=1.3).contains(&heis) && (1.7..=2.3).contains(&sql) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn aligned(truth: &PauliExpansion, n: usize) -> PauliExpansion {
    let b0 = truth.get(&PauliLabel::identity(n));
    truth.scale(b0.conj() / b0.norm())
}

fn sampled_tomography() -> Outcome {
    let cfg = TomographyConfig::default();
    let (eps, delta, trials, s) = (0.1, 0.1, 200u64, 2);
    let (mut fail_linf, mut fail_l2) = (0, 0);
    for i in 0..trials {
        let a = random_sparse_hamiltonian(2, 2, derive_seed(9, "a", i), 1.0).map_err(|e| e.to_string())?;
        let a = a.scale(0.03 / a.linf());
        let u = dense::expm_i_sparse(&a, 1.0).map_err(|e| e.to_string())?;
        let truth = aligned(&tomography::choi_amplitudes(&u).map_err(|e| e.to_string())?, 2);
        let state =
            tomography::choi_access(&u, StateMode::Sampled, derive_seed(9, "state", i)).map_err(|e| e.to_string())?;
        let linf = tomography::sparse_tomo_linf(&state, s, eps, delta, derive_seed(9, "linf", i), &cfg)
            .map_err(|e| e.to_string())?;
        if linf.coefficients.sub(&truth).norms().linf > eps {
            fail_linf += 1;
        }
        let l2 = tomography::sparse_tomo_l2(&state, s, eps, delta, derive_seed(9, "l2", i), &cfg)
            .map_err(|e| e.to_string())?;
        if l2.coefficients.sub(&truth).norms().l2 > eps {
            fail_l2 += 1;
        }
    }
    let limit = delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    let (r_inf, r_2) = (fail_linf as f64 / trials as f64, fail_l2 as f64 / trials as f64);
    let line = format!("failure rates ℓ∞ {r_inf:.3}, ℓ2 {r_2:.3} over {trials} trials (need ≤ {limit:.4})");
    if r_inf <= limit && r_2 <= limit {
        Ok(line)
    } else {
        Err(line)
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let invocations: Vec<Vec<String>> = vec![
        ["learn", "--n", "2", "--m", "2", "--rho", "16384", "--seed", "10", "--epsilon", "0.03125"]
            .map(String::from)
            .to_vec(),
        [
            "sweep",
            "--n",
            "1",
            "--m",
            "1",
            "--T",
            "0.05",
            "--rho",
            "1024",
            "--seed",
            "10",
            "--epsilons",
            "0.25,0.125,0.0625,0.03125",
        ]
        .map(String::from)
        .to_vec(),
        ["verify", "--trials", "50", "--seed", "10", "--json"].map(String::from).to_vec(),
    ];
    let mut compared = 0;
    for (k, base) in invocations.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let file = p(&format!("out_{k}_{rep}"));
            let mut args: Vec<&str> = base.iter().map(String::as_str).collect();
            args.extend_from_slice(&["--out", &file]);
            let stdout = run_bin(&args)?;
            outputs.push((stdout, std::fs::read(&file).map_err(|e| e.to_string())?));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{} output differs between repeated runs", base[0]));
        }
        compared += 1;
    }
    Ok(format!("{compared} subcommands (learn, sweep, verify) byte-identical across repeats"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("long_time_rewriting", long_time_rewriting),
        ("inequality_suite", inequality_suite),
        ("span_bound", span_bound),
        ("sparse_ham_end_to_end", sparse_ham_end_to_end),
        ("integer_evol_mock", integer_evol_mock),
        ("sql_end_to_end", sql_end_to_end),
        ("main_loop", main_loop),
        ("scaling_slopes", scaling_slopes),
        ("sampled_tomography", sampled_tomography),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{:>2}] {name}: {detail} ({:.2}s)", i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
