//! Coefficient extraction, the standard-quantum-limit fallback, and the halving main loop.

use std::fmt;

use serde::Serialize;

use crate::control::{self, CorrectionAccess, IntegerEvolParams, LearnSettings};
use crate::dense::{self, DenseOperator, Spectrum};
use crate::error::{Error, Result};
use crate::oracle::{EvolutionOracle, QueryLedger};
use crate::rng::derive_seed;
use crate::sparse::SparseHamiltonian;
use crate::tomography::{self, TomographyNorm};
use crate::truncation::truncate_sparse_bounded;

/// Report format version.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest BCH order `K` the poly-regime main loop will execute.
pub const POLY_MAX_K: usize = 3;
/// Largest sparsity the poly-regime main loop will execute.
pub const POLY_MAX_M: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LogSparse,
    PolySparse,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::LogSparse => "log",
            Regime::PolySparse => "poly",
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" | "log_sparse" => Ok(Regime::LogSparse),
            "poly" | "poly_sparse" => Ok(Regime::PolySparse),
            other => Err(Error::InvalidArgument(format!("unknown regime '{other}' (expected log|poly)"))),
        }
    }
}

/// Per-regime learner constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeParams {
    pub regime: Regime,
    pub n: usize,
    pub m: usize,
    pub min_time: f64,
    /// BCH truncation order, poly regime only.
    pub k_order: Option<usize>,
    /// Sparsity promise for the correction generator.
    pub s: u128,
    pub c_f: f64,
    pub c_inf: f64,
    /// `ρ · c`.
    pub c: f64,
    /// `c / (10 c_F c_∞)` with the relaxed `c`.
    pub eta_sw: f64,
    pub rho: f64,
    pub warnings: Vec<String>,
}

impl RegimeParams {
    /// The same parameters at `ρ = 1`.
    pub fn literal(&self) -> RegimeParams {
        let c = self.c / self.rho;
        RegimeParams { c, eta_sw: c / (10.0 * self.c_f * self.c_inf), rho: 1.0, ..self.clone() }
    }

    /// Sparsity usable on `n` qubits: `min(s, 4^n − 1)`.
    pub fn effective_s(&self) -> usize {
        let cap = (1u128 << (2 * self.n)) - 1;
        self.s.min(cap) as usize
    }
}

/// Constants for regime `regime`; `k_order` is the poly-regime `K`.
pub fn regime_params(
    m: usize,
    n: usize,
    min_time: f64,
    k_order: Option<usize>,
    regime: Regime,
    rho: f64,
) -> Result<RegimeParams> {
    if n == 0 || n > crate::pauli::MAX_QUBITS {
        return Err(Error::Regime(format!("qubit count {n} out of range")));
    }
    if m == 0 || (m as u128) > (1u128 << (2 * n)) - 1 {
        return Err(Error::Regime(format!("sparsity m = {m} impossible on {n} qubits")));
    }
    if !(min_time > 0.0 && min_time.is_finite()) {
        return Err(Error::Regime(format!("minimum time must be positive, got {min_time}")));
    }
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(Error::Regime(format!("relaxation ρ must be ≥ 1, got {rho}")));
    }
    let mf = m as f64;
    let c = rho / (256.0 * mf.sqrt());
    let mut warnings = Vec::new();
    let (s, c_f, c_inf, k_order) = match regime {
        Regime::LogSparse => {
            let s = if 2 * m >= 128 { u128::MAX } else { 1u128 << (2 * m) };
            let tpi = 2.0 * std::f64::consts::PI * min_time;
            (s, tpi * mf.sqrt(), tpi * mf, None)
        }
        Regime::PolySparse => {
            let big_k = k_order.ok_or_else(|| Error::Regime("poly regime requires K".into()))?;
            if big_k < 2 {
                return Err(Error::Regime(format!("poly regime requires K ≥ 2, got {big_k}")));
            }
            let k = (big_k - 1) as u32;
            let s = (k as u128).saturating_mul((2 * m as u128).saturating_pow(k));
            let t_star = mf.powf(-1.0 / big_k as f64) / (16.0 * std::f64::consts::E);
            if min_time > 1.0 / (8.0 * std::f64::consts::E) {
                warnings.push(format!(
                    "T = {min_time} exceeds 1/(8e); BCH convergence 4TeC ≤ 1/2 fails (reference T = {t_star:.6})"
                ));
            }
            (s, 2.0 * mf.sqrt(), 2.0 * mf, Some(big_k))
        }
    };
    Ok(RegimeParams {
        regime,
        n,
        m,
        min_time,
        k_order,
        s,
        c_f,
        c_inf,
        c,
        eta_sw: c / (10.0 * c_f * c_inf),
        rho,
        warnings,
    })
}

/// Source of `e^{-iAt}`-like unitaries for coefficient extraction.
pub trait ResidualAccess {
    fn n(&self) -> usize;

    /// A unitary approximating `e^{-iAt}`, for `copies` uses.
    fn unitary(&mut self, t: f64, copies: u64) -> Result<DenseOperator>;
}

/// Exact `e^{-iAt}` for a known `A`.
pub struct DirectEvolution {
    n: usize,
    spectrum: Spectrum,
    /// Copies requested so far.
    pub copies: u64,
}

impl DirectEvolution {
    pub fn new(a: &SparseHamiltonian) -> Result<Self> {
        Ok(Self { n: a.n(), spectrum: Spectrum::new(&dense::to_dense_hamiltonian(a)?)?, copies: 0 })
    }
}

impl ResidualAccess for DirectEvolution {
    fn n(&self) -> usize {
        self.n
    }

    fn unitary(&mut self, t: f64, copies: u64) -> Result<DenseOperator> {
        self.copies += copies;
        Ok(self.spectrum.expm_i(t))
    }
}

/// Residual `H − H_j` emulated from long-time queries and a learned correction.
pub struct EmulatedResidual<'a> {
    pub oracle: &'a mut EvolutionOracle,
    pub h_j: SparseHamiltonian,
    pub w_tilde: SparseHamiltonian,
    pub n_steps: u64,
}

impl ResidualAccess for EmulatedResidual<'_> {
    fn n(&self) -> usize {
        self.oracle.n()
    }

    fn unitary(&mut self, t: f64, copies: u64) -> Result<DenseOperator> {
        control::residual_unitary(self.oracle, &self.h_j, &self.w_tilde, t, self.n_steps, copies)
    }
}

/// Output of [`sparse_ham_learn`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamOutput {
    pub estimate: SparseHamiltonian,
    /// `1/(32mε)`.
    pub t: f64,
    /// `m t² ε²`.
    pub accuracy: f64,
    pub samples: u64,
}

/// `1/(32mε)`.
pub fn sparse_ham_time(m: usize, eps: f64) -> f64 {
    1.0 / (32.0 * m as f64 * eps)
}

/// ℓ∞ learning of an `m`-sparse `A` with `‖A‖_ℓ∞ ≤ ε` to accuracy `ε/8`.
///
/// `s` bounds the support kept by the tomography; pass `m` for the plain
/// algorithm.
#[allow(clippy::too_many_arguments)]
pub fn sparse_ham_learn<R: ResidualAccess + ?Sized>(
    access: &mut R,
    m: usize,
    s: usize,
    eps: f64,
    delta: f64,
    seed: u64,
    settings: &LearnSettings,
) -> Result<SparseHamOutput> {
    if m == 0 || !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("need m ≥ 1 and ε > 0, got m={m}, ε={eps}")));
    }
    let t = sparse_ham_time(m, eps);
    let accuracy = m as f64 * t * t * eps * eps;
    let cfg = &settings.tomography;
    let copies = tomography::tomography_samples(TomographyNorm::Linf, s, accuracy, delta, cfg);
    let u = access.unitary(t, copies)?;
    let state = tomography::choi_access(&u, settings.mode, derive_seed(seed, "state", 0))?;
    let res = tomography::sparse_tomo_linf(&state, s, accuracy, delta, seed, cfg)?;
    let estimate = control::extract_generator(&res.coefficients, t);
    Ok(SparseHamOutput { estimate, t, accuracy, samples: res.samples })
}

/// Output of [`sql_learn`].
#[derive(Debug, Clone, PartialEq)]
pub struct SqlOutput {
    pub delta_h: SparseHamiltonian,
    /// `1/(16√m)`.
    pub t: f64,
    /// `√m ε t²`.
    pub delta_t: f64,
    pub samples: u64,
}

/// `1/(16√m)`.
pub fn sql_time(m: usize) -> f64 {
    1.0 / (16.0 * (m as f64).sqrt())
}

/// Learns `Δ ≈ A − A_0` to ℓ∞ accuracy `ε/4` from queries at `T` and `T + t`.
#[allow(clippy::too_many_arguments)]
pub fn sql_learn(
    oracle: &mut EvolutionOracle,
    a0: &SparseHamiltonian,
    m: usize,
    s: usize,
    eps: f64,
    delta: f64,
    seed: u64,
    settings: &LearnSettings,
) -> Result<SqlOutput> {
    if m == 0 || !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("need m ≥ 1 and ε > 0, got m={m}, ε={eps}")));
    }
    let n = oracle.n();
    let big_t = oracle.min_time();
    let t = sql_time(m);
    let delta_t = (m as f64).sqrt() * eps * t * t;
    let accuracy = delta_t / 2.0;
    let cfg = &settings.tomography;
    let copies = tomography::tomography_samples(TomographyNorm::L2, s, accuracy, delta / 2.0, cfg);

    let mut learn_at = |tau: f64, tag: &str| -> Result<DenseOperator> {
        let u = oracle.query_evolution_copies(tau, copies)?.mul(&dense::expm_i_sparse(a0, -tau)?);
        let state = tomography::choi_access(&u, settings.mode, derive_seed(seed, tag, 1))?;
        let res = tomography::sparse_tomo_raw(
            &state,
            TomographyNorm::L2,
            s,
            accuracy,
            delta / 2.0,
            derive_seed(seed, tag, 0),
            cfg,
        )?;
        dense::to_dense(&res.coefficients)
    };
    let u_t = learn_at(big_t, "sql_T")?;
    let u_tt = learn_at(big_t + t, "sql_T_plus_t")?;

    let frame = dense::expm_i_sparse(a0, -big_t)?;
    let combined = frame.mul(&u_t.adjoint()).mul(&u_tt).mul(&frame.adjoint());
    let alpha = dense::pauli_decompose(&combined);
    let a0_coef = alpha.get(&crate::pauli::PauliLabel::identity(n));
    let delta_h = control::extract_generator(&alpha.scale(a0_coef.conj()), t);
    Ok(SqlOutput { delta_h, t, delta_t, samples: 2 * copies })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Heisenberg,
    Sql,
}

/// Which branch the main loop may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// Heisenberg when `η_j ≤ η_sw`, SQL otherwise.
    #[default]
    Auto,
    SqlOnly,
}

impl std::str::FromStr for BranchPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(BranchPolicy::Auto),
            "sql" | "sql_only" => Ok(BranchPolicy::SqlOnly),
            other => Err(Error::InvalidArgument(format!("unknown branch policy '{other}' (expected auto|sql)"))),
        }
    }
}

/// Telemetry of one main-loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub j: usize,
    pub eta: f64,
    pub t_j: f64,
    pub n_j: u64,
    pub branch: Branch,
    /// Integer time used for the correction generator, Heisenberg branch only.
    pub integer_time: Option<u64>,
    /// `‖H − H_{j+1}‖_ℓ∞`, filled by the harness.
    pub true_error: Option<f64>,
    pub t_tot_delta: f64,
    pub queries_delta: u64,
    /// `H_{j+1}`.
    pub estimate: SparseHamiltonian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSets {
    pub literal: RegimeParams,
    pub relaxed: RegimeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub branch_policy: BranchPolicy,
    pub learn: LearnSettings,
}

/// Full record of a main-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnReport {
    pub schema: u32,
    pub params: ParamSets,
    pub settings: RunSettings,
    pub iterations: Vec<IterationRecord>,
    pub estimate: SparseHamiltonian,
    pub ledger: QueryLedger,
    /// `‖H − H̃‖_ℓ∞`, filled by the harness.
    pub final_error: Option<f64>,
    /// `supp_P(H̃) ≤ m`.
    pub support_within_m: bool,
}

impl LearnReport {
    /// Every filled `true_error` satisfies `‖H − H_{j+1}‖_ℓ∞ ≤ η_j/2`.
    pub fn halving_holds(&self) -> bool {
        self.iterations.iter().all(|it| it.true_error.is_none_or(|e| e <= it.eta / 2.0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fills true errors from the hidden Hamiltonian; only the harness calls this.
pub fn attach_true_errors(report: &mut LearnReport, h_true: &SparseHamiltonian) {
    for it in &mut report.iterations {
        it.true_error = Some(h_true.linf_distance(&it.estimate));
    }
    report.final_error = Some(h_true.linf_distance(&report.estimate));
}

/// `⌈log₂(1/ε)⌉`.
pub fn iteration_count(eps: f64) -> usize {
    let v = (1.0 / eps).log2();
    let r = v.round();
    if (v - r).abs() < 1e-12 {
        r as usize
    } else {
        v.ceil() as usize
    }
}

/// `⌈1/(2√m η)⌉`.
pub fn trotter_steps(m: usize, eta: f64) -> u64 {
    (1.0 / (2.0 * (m as f64).sqrt() * eta) - 1e-12).ceil().max(1.0) as u64
}

/// Learns the oracle's hidden `m`-sparse Hamiltonian to ℓ∞ accuracy `ε` by halving.
#[allow(clippy::too_many_arguments)]
pub fn main_learn(
    oracle: &mut EvolutionOracle,
    m: usize,
    eps: f64,
    params: &RegimeParams,
    delta: f64,
    seed: u64,
    settings: &LearnSettings,
    policy: BranchPolicy,
) -> Result<(SparseHamiltonian, LearnReport)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("ε must lie in (0,1), got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("δ must lie in (0,1), got {delta}")));
    }
    if params.m != m || params.n != oracle.n() {
        return Err(Error::Regime("parameters do not match the oracle or m".into()));
    }
    if params.regime == Regime::PolySparse && (params.k_order.unwrap_or(0) > POLY_MAX_K || m > POLY_MAX_M) {
        return Err(Error::Regime(format!(
            "poly-regime runs are limited to K ≤ {POLY_MAX_K} and m ≤ {POLY_MAX_M}; parameters are still available"
        )));
    }
    let n = oracle.n();
    let big_j = iteration_count(eps).max(1);
    let delta_obj = delta / (2.0 * big_j as f64);
    let mut run_settings = *settings;
    run_settings.tomography.sample_divisor = params.rho;
    let int_params = IntegerEvolParams {
        s: params.effective_s(),
        c_f: params.c_f,
        c_inf: params.c_inf,
        c: params.c,
        rho: params.rho,
    };
    let s_sql = params.effective_s();
    let s_residual = (2 * m).min(params.effective_s().max(1));

    let mut h_j = SparseHamiltonian::zero(n);
    let mut iterations = Vec::with_capacity(big_j);
    for j in 0..big_j {
        let eta = 2f64.powi(-(j as i32));
        let t_j = sparse_ham_time(m, eta);
        let n_j = trotter_steps(m, eta);
        let before = oracle.ledger();
        let heisenberg = policy == BranchPolicy::Auto && eta <= params.eta_sw;
        let (delta_h, integer_time) = if heisenberg {
            let w = {
                let mut access = CorrectionAccess::new(oracle, h_j.clone());
                control::integer_evol_learn(
                    &mut access,
                    &int_params,
                    eta,
                    delta_obj,
                    derive_seed(seed, "w", j as u64),
                    &run_settings,
                )?
            };
            let mut residual = EmulatedResidual { oracle, h_j: h_j.clone(), w_tilde: w.w.clone(), n_steps: n_j };
            let out = sparse_ham_learn(
                &mut residual,
                m,
                s_residual,
                eta,
                delta_obj,
                derive_seed(seed, "dh", j as u64),
                &run_settings,
            )?;
            (out.estimate, Some(w.t))
        } else {
            let out =
                sql_learn(oracle, &h_j, m, s_sql, eta, delta_obj, derive_seed(seed, "sql", j as u64), &run_settings)?;
            (out.delta_h, None)
        };
        h_j = truncate_sparse_bounded(&h_j.add(&delta_h), m, 1.0)?;
        let (t_tot_delta, queries_delta) = oracle.ledger().delta(&before);
        iterations.push(IterationRecord {
            j,
            eta,
            t_j,
            n_j,
            branch: if heisenberg { Branch::Heisenberg } else { Branch::Sql },
            integer_time,
            true_error: None,
            t_tot_delta,
            queries_delta,
            estimate: h_j.clone(),
        });
    }
    let report = LearnReport {
        schema: SCHEMA_VERSION,
        params: ParamSets { literal: params.literal(), relaxed: params.clone() },
        settings: RunSettings {
            m,
            epsilon: eps,
            delta,
            seed,
            iterations: big_j,
            branch_policy: policy,
            learn: run_settings,
        },
        iterations,
        support_within_m: h_j.supp() <= m,
        estimate: h_j.clone(),
        ledger: oracle.ledger(),
        final_error: None,
    };
    Ok((h_j, report))
}
