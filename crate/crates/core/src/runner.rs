//! Batch front-end: instance generation, learning runs, ε sweeps and verification.
//!
//! Exit codes: 0 success, 1 run or check failure, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::control::LearnSettings;
use crate::error::Error;
use crate::learner::{self, Branch, BranchPolicy, LearnReport, Regime, RegimeParams};
use crate::oracle::EvolutionOracle;
use crate::par::Execution;
use crate::rng::derive_seed;
use crate::sparse::{random_sparse_hamiltonian, SparseHamiltonian};
use crate::tomography::StateMode;
use crate::verifier::{self, CheckReport, CheckSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hamlearn", version, about = "Hamiltonian learning under a minimum evolution time")]
pub struct Cli {
    /// Run independent work items on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random sparse Hamiltonian in the text format.
    Gen(GenArgs),
    /// Learn a hidden Hamiltonian and emit a JSON report.
    Learn(LearnArgs),
    /// Learn at several accuracies and fit the total-time scaling.
    Sweep(SweepArgs),
    /// Run the inequality checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub seed: u64,
    /// Upper bound on the operator norm.
    #[arg(long, default_value_t = 1.0)]
    pub norm_cap: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Problem and learner settings shared by `learn` and `sweep`.
#[derive(Debug, Args, Clone)]
pub struct ProblemArgs {
    /// Qubit count for a generated instance.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sparsity promise.
    #[arg(long)]
    pub m: usize,
    /// Minimum evolution time.
    #[arg(long = "T", default_value_t = 1.0)]
    pub min_time: f64,
    /// BCH order for the poly regime.
    #[arg(long = "K")]
    pub k_order: Option<usize>,
    #[arg(long, default_value = "log")]
    pub regime: Regime,
    /// Constant relaxation factor (≥ 1).
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long)]
    pub seed: u64,
    /// exact | noisy:<sigma> | sampled
    #[arg(long, default_value = "exact")]
    pub mode: StateMode,
    /// auto | sql
    #[arg(long, default_value = "auto")]
    pub branch: BranchPolicy,
    /// Hamiltonian text file; a random instance is generated when absent.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated accuracies, at least four.
    #[arg(long, value_delimiter = ',', required = true)]
    pub epsilons: Vec<f64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Slope summary destination.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// A single check; all checks when absent.
    #[arg(long)]
    pub check: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub slack: f64,
    /// Multiplier on every bound; values below 1 tamper with the inequalities.
    #[arg(long, default_value_t = 1.0)]
    pub bound_scale: f64,
    /// JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of the table.
    #[arg(long)]
    pub json: bool,
}

/// Exit code and captured console output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Self { code: EXIT_USAGE, stdout: String::new(), stderr: format!("error: {msg}\n") }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Regime(_) | Error::Parse { .. } | Error::UnknownCheck(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// Validated learning configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub hidden: SparseHamiltonian,
    pub params: RegimeParams,
    pub delta: f64,
    pub seed: u64,
    pub settings: LearnSettings,
    pub policy: BranchPolicy,
}

impl RunConfig {
    fn from_problem(p: &ProblemArgs) -> Run<Self> {
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return Err(Failure::Usage(format!("--delta must lie in (0,1), got {}", p.delta)));
        }
        let hidden = match &p.input {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
                let h = SparseHamiltonian::parse_text(&text)?;
                if let Some(n) = p.n {
                    if n != h.n() {
                        return Err(Failure::Usage(format!("--n {n} disagrees with the {}-qubit input", h.n())));
                    }
                }
                h
            }
            None => {
                let n = p.n.ok_or_else(|| Failure::Usage("either --in or --n is required".into()))?;
                check_instance_shape(n, p.m)?;
                random_sparse_hamiltonian(n, p.m, derive_seed(p.seed, "instance", 0), 1.0)?
            }
        };
        let params = learner::regime_params(p.m, hidden.n(), p.min_time, p.k_order, p.regime, p.rho)?;
        Ok(Self {
            hidden,
            params,
            delta: p.delta,
            seed: p.seed,
            settings: LearnSettings { mode: p.mode, ..LearnSettings::default() },
            policy: p.branch,
        })
    }

    /// Runs the main loop on a fresh oracle and fills in true errors.
    pub fn learn(&self, eps: f64, seed: u64) -> crate::Result<LearnReport> {
        let mut oracle = EvolutionOracle::new(self.hidden.clone(), self.params.min_time)?;
        let (_, mut report) = learner::main_learn(
            &mut oracle,
            self.params.m,
            eps,
            &self.params,
            self.delta,
            seed,
            &self.settings,
            self.policy,
        )?;
        learner::attach_true_errors(&mut report, &self.hidden);
        Ok(report)
    }
}

fn check_instance_shape(n: usize, m: usize) -> Run<()> {
    if n == 0 || n > crate::dense::DEFAULT_DENSE_CAP {
        return Err(Failure::Usage(format!("--n must lie in 1..={}", crate::dense::DEFAULT_DENSE_CAP)));
    }
    if m == 0 || (m as u128) > (1u128 << (2 * n)) - 1 {
        return Err(Failure::Usage(format!("--m must lie in 1..={} for n = {n}", (1u128 << (2 * n)) - 1)));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Run<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("accuracy must lie in (0,1), got {eps}")))
    }
}

fn write_file(path: &Path, contents: &str) -> Run<()> {
    fs::write(path, contents).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Outcome {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Sweep(a) => cmd_sweep(a, exec),
        Command::Verify(a) => cmd_verify(a, exec),
    };
    match result {
        Ok(o) => o,
        Err(Failure::Usage(msg)) => Outcome::usage(msg),
        Err(Failure::Runtime(msg)) => {
            Outcome { code: EXIT_FAILURE, stdout: String::new(), stderr: format!("error: {msg}\n") }
        }
    }
}

/// Parses `args` (including the program name) and executes them.
pub fn run_from_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            }
        }
    }
}

fn cmd_gen(a: &GenArgs) -> Run<Outcome> {
    check_instance_shape(a.n, a.m)?;
    if !(a.norm_cap > 0.0 && a.norm_cap.is_finite()) {
        return Err(Failure::Usage(format!("--norm-cap must be positive, got {}", a.norm_cap)));
    }
    let h = random_sparse_hamiltonian(a.n, a.m, a.seed, a.norm_cap)?;
    let text = h.to_text();
    let norms = h.norms();
    let summary = format!("supp_P={} l1={} l2={} linf={}\n", h.supp(), norms.l1, norms.l2, norms.linf);
    match &a.out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(Outcome { code: EXIT_OK, stdout: summary, stderr: String::new() })
        }
        None => Ok(Outcome { code: EXIT_OK, stdout: text, stderr: summary }),
    }
}

fn cmd_learn(a: &LearnArgs) -> Run<Outcome> {
    check_eps(a.epsilon)?;
    let cfg = RunConfig::from_problem(&a.problem)?;
    let report = cfg.learn(a.epsilon, cfg.seed)?;
    let json = report.to_json() + "\n";
    let ok = report.final_error.is_some_and(|e| e <= a.epsilon)
        && report.ledger.t_min_reported() == Some(cfg.params.min_time);
    let mut stderr = String::new();
    for w in &cfg.params.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let _ = writeln!(
        stderr,
        "final_error={} t_tot={} t_min={:?} queries={}",
        report.final_error.unwrap_or(f64::NAN),
        report.ledger.t_tot,
        report.ledger.t_min_reported(),
        report.ledger.queries
    );
    let stdout = match &a.out {
        Some(path) => {
            write_file(path, &json)?;
            String::new()
        }
        None => json,
    };
    Ok(Outcome { code: if ok { EXIT_OK } else { EXIT_FAILURE }, stdout, stderr })
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub t_tot: f64,
    pub t_min: Option<f64>,
    pub queries: u64,
    pub final_error: f64,
    pub heisenberg_iterations: usize,
    pub sql_iterations: usize,
}

/// Least-squares slopes of `ln t_tot` against `ln(1/ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub schema: u32,
    pub points: usize,
    pub slope_all: Option<f64>,
    /// Points whose runs used only the Heisenberg branch.
    pub slope_heisenberg: Option<f64>,
    /// Points whose runs used only the SQL branch.
    pub slope_sql: Option<f64>,
    pub rho: f64,
    pub min_time: f64,
}

/// Least-squares slope of `y` against `x`; `None` below two distinct points.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Runs every accuracy on its own oracle; rows come back in input order.
pub fn sweep(cfg: &RunConfig, epsilons: &[f64], exec: Execution) -> crate::Result<(Vec<SweepRow>, SweepSummary)> {
    let reports = exec.map(epsilons.len(), |i| cfg.learn(epsilons[i], derive_seed(cfg.seed, "sweep", i as u64)));
    let mut rows = Vec::with_capacity(epsilons.len());
    for (eps, report) in epsilons.iter().zip(reports) {
        let report = report?;
        let heis = report.iterations.iter().filter(|it| it.branch == Branch::Heisenberg).count();
        rows.push(SweepRow {
            epsilon: *eps,
            t_tot: report.ledger.t_tot,
            t_min: report.ledger.t_min_reported(),
            queries: report.ledger.queries,
            final_error: report.final_error.unwrap_or(f64::NAN),
            heisenberg_iterations: heis,
            sql_iterations: report.iterations.len() - heis,
        });
    }
    let pts = |keep: &dyn Fn(&SweepRow) -> bool| -> Vec<(f64, f64)> {
        rows.iter().filter(|r| keep(r)).map(|r| ((1.0 / r.epsilon).ln(), r.t_tot.ln())).collect()
    };
    let summary = SweepSummary {
        schema: learner::SCHEMA_VERSION,
        points: rows.len(),
        slope_all: fit_slope(&pts(&|_| true)),
        slope_heisenberg: fit_slope(&pts(&|r| r.sql_iterations == 0)),
        slope_sql: fit_slope(&pts(&|r| r.heisenberg_iterations == 0)),
        rho: cfg.params.rho,
        min_time: cfg.params.min_time,
    };
    Ok((rows, summary))
}

/// CSV rendering with header `epsilon,t_tot,t_min,queries,final_error,heisenberg,sql`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("epsilon,t_tot,t_min,queries,final_error,heisenberg,sql\n");
    for r in rows {
        let t_min = r.t_min.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.epsilon, r.t_tot, t_min, r.queries, r.final_error, r.heisenberg_iterations, r.sql_iterations
        );
    }
    out
}

fn cmd_sweep(a: &SweepArgs, exec: Execution) -> Run<Outcome> {
    if a.epsilons.len() < 4 {
        return Err(Failure::Usage(format!("--epsilons needs at least 4 values, got {}", a.epsilons.len())));
    }
    for &e in &a.epsilons {
        check_eps(e)?;
    }
    let cfg = RunConfig::from_problem(&a.problem)?;
    let (rows, summary) = sweep(&cfg, &a.epsilons, exec)?;
    let csv = sweep_csv(&rows);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    let mut stdout = String::new();
    let mut stderr = String::new();
    match &a.out {
        Some(path) => write_file(path, &csv)?,
        None => stdout.push_str(&csv),
    }
    match &a.summary {
        Some(path) => write_file(path, &json)?,
        None if a.out.is_some() => stdout.push_str(&json),
        None => stderr.push_str(&json),
    }
    Ok(Outcome { code: EXIT_OK, stdout, stderr })
}

/// Fixed-width table of check reports.
pub fn verify_table(reports: &[CheckReport]) -> String {
    let mut out = format!("{:<16} {:>7} {:>8} {:>14} {}\n", "check", "trials", "skipped", "max_violation", "pass");
    for r in reports {
        let _ = writeln!(out, "{:<16} {:>7} {:>8} {:>14.6e} {}", r.name, r.trials, r.skipped, r.max_violation, r.pass);
    }
    out
}

fn cmd_verify(a: &VerifyArgs, exec: Execution) -> Run<Outcome> {
    let template = CheckSpec {
        trials: a.trials,
        seed: a.seed,
        slack: a.slack,
        bound_scale: a.bound_scale,
        ..CheckSpec::new(a.check.as_deref().unwrap_or("duhamel"))
    };
    let reports = match &a.check {
        Some(_) => vec![verifier::run_check(&template, exec)?],
        None => verifier::run_all(&template, exec)?,
    };
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    if let Some(path) = &a.out {
        write_file(path, &json)?;
    }
    let stdout = if a.json { json } else { verify_table(&reports) };
    let all_pass = reports.iter().all(|r| r.pass);
    Ok(Outcome { code: if all_pass { EXIT_OK } else { EXIT_FAILURE }, stdout, stderr: String::new() })
}
