//! Long-time emulation of short Trotter steps.
//!
//! A short step `e^{-iHτ} e^{iH_jτ}` equals `e^{-iH(T+τ)} C_j e^{iH_j(T+τ)}` with
//! `C_j = e^{iHT} e^{-iH_jT}`, so only durations `≥ T` of the unknown dynamics
//! are needed once the correction `C_j = e^{iW_j}` (up to phase) is known. The
//! generator `W_j` is learned from integer powers `(C_j†)^q = e^{-iW_j q}`.

use std::collections::HashMap;
use std::f64::consts::E;

use num_complex::Complex64;
use serde::Serialize;

use crate::dense::{self, DenseOperator, Spectrum, TracelessLog};
use crate::error::{Error, Result};
use crate::oracle::EvolutionOracle;
use crate::sparse::{PauliExpansion, SparseHamiltonian};
use crate::tomography::{self, StateMode, TomographyConfig, TomographyNorm};

/// Largest BCH degree supported.
pub const R_MAX: usize = 6;

/// `C_r = 2^{2r−1} r^r / r!`.
pub fn bch_constant(r: usize) -> f64 {
    let r_f = r as f64;
    let fact: f64 = (1..=r).map(|k| k as f64).product();
    2f64.powi(2 * r as i32 - 1) * r_f.powi(r as i32) / fact
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// All sequences `(r_1,s_1),…,(r_n,s_n)` with `r_i + s_i ≥ 1` summing to `total`.
fn compositions(total: usize) -> Vec<Vec<(usize, usize)>> {
    if total == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=total {
        for rx in 0..=first {
            for tail in compositions(total - first) {
                let mut seq = vec![(rx, first - rx)];
                seq.extend(tail);
                out.push(seq);
            }
        }
    }
    out
}

/// Degree-`r` Dynkin term `BCH_r(X, Y)` of `log(e^X e^Y)`.
pub fn bch_term(x: &PauliExpansion, y: &PauliExpansion, r: usize) -> Result<PauliExpansion> {
    if r == 0 || r > R_MAX {
        return Err(Error::InvalidArgument(format!("BCH degree {r} outside 1..={R_MAX}")));
    }
    if x.n() != y.n() {
        return Err(Error::Dimension(format!("{} vs {} qubits", x.n(), y.n())));
    }
    // Words are bit strings (1 = Y), read from the most significant of `len` bits.
    let mut memo: HashMap<(u32, usize), PauliExpansion> = HashMap::new();
    let mut acc = PauliExpansion::zero(x.n());
    for seq in compositions(r) {
        let n_blocks = seq.len();
        let mut word = 0u32;
        let mut denom = r as f64;
        for &(rx, sy) in &seq {
            word <<= rx;
            word = (word << sy) | ((1 << sy) - 1);
            denom *= factorial(rx) * factorial(sy);
        }
        let value = left_normed(word, r, x, y, &mut memo);
        if value.supp() == 0 {
            continue;
        }
        let sign = if n_blocks % 2 == 1 { 1.0 } else { -1.0 };
        acc = acc.add(&value.scale(Complex64::new(sign / (n_blocks as f64 * denom), 0.0)));
    }
    Ok(acc)
}

/// `[Z_1, [Z_2, … [Z_{len−1}, Z_len]]]` for the word's letters.
fn left_normed(
    word: u32,
    len: usize,
    x: &PauliExpansion,
    y: &PauliExpansion,
    memo: &mut HashMap<(u32, usize), PauliExpansion>,
) -> PauliExpansion {
    if let Some(v) = memo.get(&(word, len)) {
        return v.clone();
    }
    let letter = |bit: u32| if bit == 1 { y } else { x };
    let head = (word >> (len - 1)) & 1;
    let value = if len == 1 {
        letter(head).clone()
    } else {
        let tail_word = word & ((1 << (len - 1)) - 1);
        let inner = left_normed(tail_word, len - 1, x, y, memo);
        letter(head).commutator(&inner)
    };
    memo.insert((word, len), value.clone());
    value
}

/// Truncated BCH generator with its certified tail bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BchTruncation {
    /// `W^{(k)} = i Σ_{r≤k} BCH_r(−iHT, iH_jT)`.
    pub generator: SparseHamiltonian,
    pub degree: usize,
    /// `Σ_{r>k} (4TeC)^r ‖H − H_j‖_F`.
    pub tail_bound: f64,
    /// `C = max(1, ‖H‖_∞, ‖H_j‖_∞)`.
    pub c: f64,
}

/// `max(1, ‖H‖_∞, ‖H_j‖_∞)`.
pub fn norm_constant(h: &SparseHamiltonian, h_j: &SparseHamiltonian) -> Result<f64> {
    let nh = dense::operator_norm(&dense::to_dense_hamiltonian(h)?);
    let nj = dense::operator_norm(&dense::to_dense_hamiltonian(h_j)?);
    Ok(1f64.max(nh).max(nj))
}

/// BCH truncation of the generator `W` with `e^{-iW} = e^{-iHT} e^{iH_jT}`.
pub fn bch_truncated_generator(
    h: &SparseHamiltonian,
    h_j: &SparseHamiltonian,
    t: f64,
    k: usize,
) -> Result<BchTruncation> {
    if k == 0 || k > R_MAX {
        return Err(Error::InvalidArgument(format!("truncation degree {k} outside 1..={R_MAX}")));
    }
    let c = norm_constant(h, h_j)?;
    let q = 4.0 * t * E * c;
    if !(q < 1.0) {
        return Err(Error::Regime(format!("4TeC = {q} must be below 1")));
    }
    let x = h.times_complex(Complex64::new(0.0, -t));
    let y = h_j.times_complex(Complex64::new(0.0, t));
    let mut sum = PauliExpansion::zero(h.n());
    for r in 1..=k {
        sum = sum.add(&bch_term(&x, &y, r)?);
    }
    let generator = SparseHamiltonian::from_expansion_real(&sum.scale(Complex64::new(0.0, 1.0)));
    let tail_bound = q.powi(k as i32 + 1) / (1.0 - q) * h.sub(h_j).frobenius();
    Ok(BchTruncation { generator, degree: k, tail_bound, c })
}

/// Dense generator `W` with `e^{-iW} ∝ e^{-iHT} e^{iH_jT}`, the BCH target.
pub fn bch_generator_dense(h: &SparseHamiltonian, h_j: &SparseHamiltonian, t: f64) -> Result<TracelessLog> {
    let u = dense::expm_i_sparse(h, t)?.mul(&dense::expm_i_sparse(h_j, -t)?);
    dense::traceless_log(&u)
}

/// Correction unitary `C_j = e^{iHT} e^{-iH_jT}`.
pub fn correction_unitary(h: &SparseHamiltonian, h_j: &SparseHamiltonian, t: f64) -> Result<DenseOperator> {
    Ok(dense::expm_i_sparse(h, -t)?.mul(&dense::expm_i_sparse(h_j, t)?))
}

/// Dense `W_j` with `e^{-iW_j} ∝ C_j†`, equivalently `e^{iW_j} ∝ C_j`.
pub fn correction_generator(h: &SparseHamiltonian, h_j: &SparseHamiltonian, t: f64) -> Result<TracelessLog> {
    dense::traceless_log(&correction_unitary(h, h_j, t)?.adjoint())
}

/// Access to `e^{-iWq}` (up to global phase) for positive integers `q`.
pub trait IntegerEvolution {
    fn n(&self) -> usize;

    /// `e^{-iWq}` for `copies` uses.
    fn power(&mut self, q: u64, copies: u64) -> Result<DenseOperator>;
}

/// Integer access to `W_j` through `(C_j†)^q`, each unit costing one `T` query.
pub struct CorrectionAccess<'a> {
    oracle: &'a mut EvolutionOracle,
    h_j: SparseHamiltonian,
}

impl<'a> CorrectionAccess<'a> {
    pub fn new(oracle: &'a mut EvolutionOracle, h_j: SparseHamiltonian) -> Self {
        Self { oracle, h_j }
    }
}

impl IntegerEvolution for CorrectionAccess<'_> {
    fn n(&self) -> usize {
        self.oracle.n()
    }

    fn power(&mut self, q: u64, copies: u64) -> Result<DenseOperator> {
        self.oracle.correction_adjoint_power_copies(&self.h_j, q, copies)
    }
}

/// Integer access to a known `W`, multiplied by the phase `e^{iφq}`.
pub struct MockIntegerAccess {
    spectrum: Spectrum,
    phase: f64,
    /// Total `q · copies` requested so far.
    pub units: u64,
}

impl MockIntegerAccess {
    pub fn new(w: &SparseHamiltonian, phase: f64) -> Result<Self> {
        Ok(Self { spectrum: Spectrum::new(&dense::to_dense_hamiltonian(w)?)?, phase, units: 0 })
    }
}

impl IntegerEvolution for MockIntegerAccess {
    fn n(&self) -> usize {
        self.spectrum.expm_i(0.0).n()
    }

    fn power(&mut self, q: u64, copies: u64) -> Result<DenseOperator> {
        if q < 1 {
            return Err(Error::InvalidArgument("power q must be at least 1".into()));
        }
        self.units += q * copies;
        let phase = Complex64::from_polar(1.0, self.phase * q as f64);
        Ok(self.spectrum.expm_i(q as f64).scale(phase))
    }
}

/// Settings shared by the tomography-based learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LearnSettings {
    pub mode: StateMode,
    pub tomography: TomographyConfig,
}

impl Default for LearnSettings {
    fn default() -> Self {
        Self { mode: StateMode::Exact, tomography: TomographyConfig::default() }
    }
}

/// Constants of the integer-time learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegerEvolParams {
    pub s: usize,
    pub c_f: f64,
    pub c_inf: f64,
    /// Possibly relaxed accuracy constant `ρ·c`.
    pub c: f64,
    /// Relaxation factor; `c/ρ` is the unrelaxed accuracy constant.
    pub rho: f64,
}

/// Output of [`integer_evol_learn`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerEvolOutput {
    pub w: SparseHamiltonian,
    /// Integer evolution time `⌊c/(10 c_F c_∞ ε)⌋`.
    pub t: u64,
    /// First-order remainder level `c_F c_∞ t² ε²`.
    pub delta_t: f64,
    /// Accuracy requested from the tomography.
    pub accuracy: f64,
    pub samples: u64,
}

/// `⌊c/(10 c_F c_∞ ε)⌋`.
pub fn integer_time(c: f64, c_f: f64, c_inf: f64, eps: f64) -> u64 {
    let v = c / (10.0 * c_f * c_inf * eps);
    // Guard against ratios that should be exact integers landing just below.
    let rounded = v.round();
    if (v - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as u64
    } else {
        v.floor() as u64
    }
}

/// Learns `W` to normalized-Frobenius accuracy `c·ε` from `e^{-iWt}` at integer `t`.
///
/// The tomography accuracy is `min(δ_t, (c/ρ)·ε·t/2)`, which equals `δ_t`
/// without relaxation.
pub fn integer_evol_learn<A: IntegerEvolution + ?Sized>(
    access: &mut A,
    params: &IntegerEvolParams,
    eps: f64,
    delta: f64,
    seed: u64,
    settings: &LearnSettings,
) -> Result<IntegerEvolOutput> {
    let t = integer_time(params.c, params.c_f, params.c_inf, eps);
    if t == 0 {
        return Err(Error::Regime(format!("ε = {eps} is above the switch threshold; integer time would be 0")));
    }
    let tf = t as f64;
    let delta_t = params.c_f * params.c_inf * tf * tf * eps * eps;
    let accuracy = delta_t.min(params.c / params.rho * eps * tf / 2.0);
    let cfg = &settings.tomography;
    let copies = tomography::tomography_samples(TomographyNorm::L2, params.s, accuracy, delta, cfg);
    let u = access.power(t, copies)?;
    let state = tomography::choi_access(&u, settings.mode, crate::rng::derive_seed(seed, "state", 0))?;
    let res = tomography::sparse_tomo_l2(&state, params.s, accuracy, delta, seed, cfg)?;
    let w = extract_generator(&res.coefficients, tf);
    Ok(IntegerEvolOutput { w, t, delta_t, accuracy, samples: res.samples })
}

/// `α̃_x = −Im(β̃_x)/t` over non-identity labels.
pub fn extract_generator(beta: &PauliExpansion, t: f64) -> SparseHamiltonian {
    SparseHamiltonian::from_expansion_real(&beta.scale(Complex64::new(0.0, 1.0 / t)))
}

/// `(e^{-iHτ} e^{iW̃} e^{iH_jτ})^N` with `τ = T + t/N`, built from `N·copies` oracle queries.
pub fn residual_unitary(
    oracle: &mut EvolutionOracle,
    h_j: &SparseHamiltonian,
    w_tilde: &SparseHamiltonian,
    t: f64,
    n_steps: u64,
    copies: u64,
) -> Result<DenseOperator> {
    if n_steps < 1 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need N ≥ 1 and t > 0, got N={n_steps}, t={t}")));
    }
    let tau = oracle.min_time() + t / n_steps as f64;
    let steps = n_steps.checked_mul(copies).ok_or_else(|| Error::InvalidArgument("query count overflow".into()))?;
    let u = oracle.query_evolution_copies(tau, steps)?;
    let correction = dense::expm_i_sparse(w_tilde, -1.0)?;
    let known = dense::expm_i_sparse(h_j, -tau)?;
    Ok(u.mul(&correction).mul(&known).pow(n_steps))
}
