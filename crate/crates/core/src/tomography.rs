//! Bell-basis amplitude encoding and sparse pure-state tomography.
//!
//! Applying `U` to half of a maximally entangled state and decoding in the
//! Bell basis yields a state whose amplitude at `|x⟩` is the Pauli
//! coefficient `U_x = tr(P_x† U)/2^n`. The routines here learn those
//! amplitudes either exactly (optionally with additive noise) or from
//! simulated measurement shots.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::Serialize;

use crate::dense::{self, DenseOperator};
use crate::error::{Error, Result};
use crate::pauli::PauliLabel;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sparse::PauliExpansion;

/// How a tomography routine sees its input state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateMode {
    /// Amplitudes are read out directly.
    Exact,
    /// Amplitudes receive complex Gaussian noise of scale `sigma`, then are renormalized.
    Noisy { sigma: f64 },
    /// Every estimate comes from simulated measurement shots.
    Sampled,
}

impl StateMode {
    pub fn is_sampled(self) -> bool {
        matches!(self, StateMode::Sampled)
    }
}

impl std::str::FromStr for StateMode {
    type Err = Error;

    /// Parses `exact`, `sampled`, or `noisy:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(StateMode::Exact),
            "sampled" => Ok(StateMode::Sampled),
            _ => {
                let sigma = s
                    .strip_prefix("noisy:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| *v >= 0.0 && v.is_finite())
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!("unknown mode '{s}' (exact|noisy:<sigma>|sampled)"))
                    })?;
                Ok(StateMode::Noisy { sigma })
            }
        }
    }
}

/// Sample-count constants for the tomography routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TomographyConfig {
    /// Heavy-hitters constant `C_hh`.
    pub c_hh: f64,
    /// Restricted-tomography constant `C_tomo`.
    pub c_tomo: f64,
    /// Every stage's sample count is divided by this factor (≥ 1).
    pub sample_divisor: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self { c_hh: 16.0, c_tomo: 8.0, sample_divisor: 1.0 }
    }
}

/// Copies of an amplitude-encoded state.
#[derive(Debug, Clone)]
pub struct StateAccess {
    n: usize,
    amplitudes: BTreeMap<PauliLabel, Complex64>,
    mode: StateMode,
}

impl StateAccess {
    /// Wraps amplitudes that already sum to unit probability.
    pub fn new(beta: &PauliExpansion, mode: StateMode, seed: u64) -> Result<Self> {
        let total: f64 = beta.iter().map(|(_, c)| c.norm_sqr()).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("amplitudes have total probability {total}")));
        }
        let mut amplitudes: BTreeMap<PauliLabel, Complex64> = beta.iter().map(|(l, c)| (*l, *c)).collect();
        if let StateMode::Noisy { sigma } = mode {
            if !(sigma >= 0.0) {
                return Err(Error::InvalidArgument("noise scale must be non-negative".into()));
            }
            if sigma > 0.0 {
                amplitudes = add_noise(beta.n(), &amplitudes, sigma, seed)?;
            }
        }
        Ok(Self { n: beta.n(), amplitudes, mode })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> StateMode {
        self.mode
    }

    /// The amplitude at `x` as held by the access (noisy in noisy mode).
    pub fn amplitude(&self, x: &PauliLabel) -> Complex64 {
        self.amplitudes.get(x).copied().unwrap_or_default()
    }

    pub fn amplitudes(&self) -> PauliExpansion {
        PauliExpansion::from_map(self.n, self.amplitudes.clone())
    }

    /// Computational-basis outcome counts of `shots` measurements.
    pub fn sample_counts(&self, shots: u64, rng: &mut ChaCha8Rng) -> BTreeMap<PauliLabel, u64> {
        let probs: Vec<(PauliLabel, f64)> = self.amplitudes.iter().map(|(l, c)| (*l, c.norm_sqr())).collect();
        let mut counts = BTreeMap::new();
        for (label, k) in probs.iter().map(|(l, _)| *l).zip(multinomial(shots, probs.iter().map(|(_, p)| *p), rng)) {
            if k > 0 {
                counts.insert(label, k);
            }
        }
        counts
    }
}

fn add_noise(
    n: usize,
    amplitudes: &BTreeMap<PauliLabel, Complex64>,
    sigma: f64,
    seed: u64,
) -> Result<BTreeMap<PauliLabel, Complex64>> {
    if n > dense::DEFAULT_DENSE_CAP {
        return Err(Error::DenseCap { n, cap: dense::DEFAULT_DENSE_CAP });
    }
    let mut rng = rng_from_seed(derive_seed(seed, "noise", 0));
    let mut noisy = BTreeMap::new();
    for idx in 0..1u64 << (2 * n) {
        let label = PauliLabel::from_index(n, idx);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let c = amplitudes.get(&label).copied().unwrap_or_default() + Complex64::new(re, im) * sigma;
        noisy.insert(label, c);
    }
    let norm = noisy.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok(noisy.into_iter().map(|(l, c)| (l, c / norm)).collect())
}

/// Multinomial counts by sequential binomial draws.
fn multinomial(shots: u64, probs: impl Iterator<Item = f64>, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let probs: Vec<f64> = probs.collect();
    let mut remaining_mass: f64 = probs.iter().sum();
    let mut remaining = shots;
    let mut out = Vec::with_capacity(probs.len());
    for p in probs {
        let k = if remaining == 0 || remaining_mass <= 0.0 { 0 } else { binomial(remaining, p / remaining_mass, rng) };
        out.push(k);
        remaining -= k;
        remaining_mass -= p;
    }
    out
}

fn binomial(trials: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    let p = p.clamp(0.0, 1.0);
    Binomial::new(trials, p).expect("probability clamped to [0, 1]").sample(rng)
}

/// Pauli coefficients of `U` as amplitudes of its Bell-decoded Choi state.
pub fn choi_amplitudes(u: &DenseOperator) -> Result<PauliExpansion> {
    let dev = u.unitary_deviation();
    if dev > dense::UNITARY_TOL {
        return Err(Error::NotUnitary(dev));
    }
    Ok(dense::pauli_decompose(u))
}

/// [`choi_amplitudes`] wrapped as a [`StateAccess`].
pub fn choi_access(u: &DenseOperator, mode: StateMode, seed: u64) -> Result<StateAccess> {
    let beta = choi_amplitudes(u)?;
    // Renormalize away eigensolver rounding so sampled draws see an exact distribution.
    let total: f64 = beta.iter().map(|(_, c)| c.norm_sqr()).sum();
    StateAccess::new(&beta.scale(Complex64::new(1.0 / total.sqrt(), 0.0)), mode, seed)
}

/// Amplitudes of `V (U ⊗ I)|Φ⟩` by direct state-vector simulation of the
/// decoding circuit, indexed by label index.
///
/// Per qubit pair the circuit applies a CNOT from the system qubit to its
/// ancilla, a Hadamard on the system qubit, and a controlled phase `i` on
/// `|11⟩` so that `Y = iXZ` decodes without a residual phase.
pub fn choi_state_by_circuit(u: &DenseOperator) -> Vec<Complex64> {
    let n = u.n();
    let d = 1usize << n;
    let m = u.matrix();
    // Combined index (system << n) | ancilla.
    let norm = 1.0 / (d as f64).sqrt();
    let mut psi = vec![Complex64::default(); d * d];
    for i in 0..d {
        for j in 0..d {
            psi[(i << n) | j] = m[(i, j)] * norm;
        }
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for q in 0..n {
        let s_bit = 1usize << (q + n);
        let a_bit = 1usize << q;
        // CNOT system -> ancilla.
        let mut next = vec![Complex64::default(); d * d];
        for (idx, amp) in psi.iter().enumerate() {
            let target = if idx & s_bit != 0 { idx ^ a_bit } else { idx };
            next[target] = *amp;
        }
        psi = next;
        // Hadamard on the system qubit.
        for idx in 0..d * d {
            if idx & s_bit == 0 {
                let (x, y) = (psi[idx], psi[idx | s_bit]);
                psi[idx] = (x + y) * h;
                psi[idx | s_bit] = (x - y) * h;
            }
        }
        for (idx, amp) in psi.iter_mut().enumerate() {
            if idx & s_bit != 0 && idx & a_bit != 0 {
                *amp *= Complex64::new(0.0, 1.0);
            }
        }
    }
    // System register holds b, ancilla holds a; the label index is (a << n) | b.
    let mut out = vec![Complex64::default(); d * d];
    for (idx, amp) in psi.into_iter().enumerate() {
        let b = idx >> n;
        let a = idx & (d - 1);
        out[(a << n) | b] = amp;
    }
    out
}

/// Shots used by [`heavy_hitters`] at `threshold` and failure probability `delta`.
pub fn heavy_hitter_samples(threshold: f64, delta: f64, cfg: &TomographyConfig) -> u64 {
    let inv = threshold.powi(-2);
    let raw = cfg.c_hh * inv * ((inv + 1.0) / delta).ln();
    (raw / cfg.sample_divisor).ceil().max(1.0) as u64
}

/// Per-element shot count of [`restricted_tomography`] on a support of size `k`.
pub fn restricted_shots_per_element(k: usize, accuracy: f64, delta: f64, cfg: &TomographyConfig) -> u64 {
    let k = k.max(1) as f64;
    let raw = cfg.c_tomo * k * (4.0 * k / delta).ln() / (accuracy * accuracy);
    (raw / cfg.sample_divisor).ceil().max(1.0) as u64
}

/// Total shots of [`restricted_tomography`] on a support of size `k`:
/// one computational-basis batch plus two interference bases per non-identity element.
pub fn restricted_samples(k: usize, accuracy: f64, delta: f64, cfg: &TomographyConfig) -> u64 {
    let per = restricted_shots_per_element(k, accuracy, delta, cfg);
    per * (2 * k.max(1) as u64 - 1)
}

/// Ranked candidates (identity first) with their selection scores.
fn rank_candidates(n: usize, scored: Vec<(PauliLabel, f64)>) -> Vec<PauliLabel> {
    let id = PauliLabel::identity(n);
    let mut scored: Vec<_> = scored.into_iter().filter(|(l, _)| *l != id).collect();
    scored.sort_by(|(la, sa), (lb, sb)| sb.total_cmp(sa).then(la.cmp(lb)));
    std::iter::once(id).chain(scored.into_iter().map(|(l, _)| l)).collect()
}

/// Labels whose amplitude clears `threshold`, identity first, then by decreasing weight.
///
/// Sampled mode keeps outcomes with empirical probability at least `5θ²/8`,
/// midway between the inclusion level `θ²` and the exclusion level `θ²/4`.
/// Exact modes keep every amplitude of magnitude at least `θ/2`.
pub fn heavy_hitters(
    access: &StateAccess,
    threshold: f64,
    delta: f64,
    seed: u64,
    cfg: &TomographyConfig,
) -> Vec<PauliLabel> {
    let scored: Vec<(PauliLabel, f64)> = if access.mode.is_sampled() {
        let shots = heavy_hitter_samples(threshold, delta, cfg);
        let mut rng = rng_from_seed(seed);
        let counts = access.sample_counts(shots, &mut rng);
        let cutoff = 0.625 * threshold * threshold;
        counts.into_iter().map(|(l, k)| (l, k as f64 / shots as f64)).filter(|(_, f)| *f >= cutoff).collect()
    } else {
        access.amplitudes.iter().map(|(l, c)| (*l, c.norm())).filter(|(_, a)| *a >= threshold / 2.0).collect()
    };
    rank_candidates(access.n, scored)
}

/// `label,count` transcript of computational-basis samples.
pub fn transcript_csv(counts: &BTreeMap<PauliLabel, u64>) -> String {
    let mut out = String::from("label,count\n");
    for (l, k) in counts {
        let _ = writeln!(out, "{l},{k}");
    }
    out
}

/// Amplitudes on `support` up to a global phase.
///
/// Sampled mode estimates `|β_0|` from computational-basis shots and each
/// `β̄_0 β_x` from the interference bases `(|0⟩ ± |x⟩)/√2` and
/// `(|0⟩ ± i|x⟩)/√2`; dividing by the estimated `|β_0|` fixes the phase
/// reference to `β_0`.
pub fn restricted_tomography(
    access: &StateAccess,
    support: &[PauliLabel],
    accuracy: f64,
    delta: f64,
    seed: u64,
    cfg: &TomographyConfig,
) -> Result<PauliExpansion> {
    let id = PauliLabel::identity(access.n);
    if !support.contains(&id) {
        return Err(Error::InvalidArgument("support must contain the identity label".into()));
    }
    if !access.mode.is_sampled() {
        let terms = support.iter().map(|l| (*l, access.amplitude(l)));
        return PauliExpansion::from_terms(access.n, terms);
    }
    let shots = restricted_shots_per_element(support.len(), accuracy, delta, cfg);
    let mut rng = rng_from_seed(seed);
    let b0 = access.amplitude(&id);
    let k0 = binomial(shots, b0.norm_sqr(), &mut rng);
    let r0 = (k0 as f64 / shots as f64).sqrt();
    let mut terms = vec![(id, Complex64::new(r0, 0.0))];
    for x in support.iter().filter(|l| **l != id) {
        let bx = access.amplitude(x);
        let i = Complex64::new(0.0, 1.0);
        let real = interference_difference(shots, (b0 + bx).norm_sqr() / 2.0, (b0 - bx).norm_sqr() / 2.0, &mut rng);
        let imag =
            interference_difference(shots, (b0 - i * bx).norm_sqr() / 2.0, (b0 + i * bx).norm_sqr() / 2.0, &mut rng);
        // p₊ − p₋ = 2 Re(β̄_0 β_x) and p₊ᵢ − p₋ᵢ = 2 Im(β̄_0 β_x).
        let z = Complex64::new(real / 2.0, imag / 2.0);
        let est = if r0 > 0.0 { z / r0 } else { Complex64::default() };
        terms.push((*x, est));
    }
    PauliExpansion::from_terms(access.n, terms)
}

/// Empirical `p₊ − p₋` from a three-outcome measurement.
fn interference_difference(shots: u64, p_plus: f64, p_minus: f64, rng: &mut ChaCha8Rng) -> f64 {
    let counts = multinomial(shots, [p_plus, p_minus, (1.0 - p_plus - p_minus).max(0.0)].into_iter(), rng);
    (counts[0] as f64 - counts[1] as f64) / shots as f64
}

/// Output of the sparse tomography routines.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyResult {
    /// Estimated amplitudes, zero off the support.
    pub coefficients: PauliExpansion,
    /// Recovered support, identity first.
    pub support: Vec<PauliLabel>,
    /// Failure probability budget spent.
    pub delta: f64,
    /// Copies of the state consumed.
    pub samples: u64,
}

/// Which error norm a sparse tomography routine targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TomographyNorm {
    Linf,
    L2,
}

impl TomographyNorm {
    /// Heavy-hitters inclusion threshold for accuracy `eps` at sparsity `s`.
    pub fn threshold(self, s: usize, eps: f64) -> f64 {
        match self {
            TomographyNorm::Linf => 0.75 * eps,
            TomographyNorm::L2 => eps / (2.0 * (s.max(1) as f64).sqrt()),
        }
    }
}

/// Copies consumed by a sparse tomography call, fixed before any measurement.
pub fn tomography_samples(norm: TomographyNorm, s: usize, eps: f64, delta: f64, cfg: &TomographyConfig) -> u64 {
    heavy_hitter_samples(norm.threshold(s, eps), delta / 3.0, cfg)
        + restricted_samples(s + 1, eps / 20.0, delta / 3.0, cfg)
}

/// Heavy hitters, support capped at `s` non-identity labels, then restricted tomography.
/// Returns the phase-ambiguous estimate.
pub fn sparse_tomo_raw(
    access: &StateAccess,
    norm: TomographyNorm,
    s: usize,
    eps: f64,
    delta: f64,
    seed: u64,
    cfg: &TomographyConfig,
) -> Result<TomographyResult> {
    if !(eps > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("need ε > 0 and δ ∈ (0,1), got ε={eps}, δ={delta}")));
    }
    let mut support = heavy_hitters(access, norm.threshold(s, eps), delta / 3.0, derive_seed(seed, "hh", 0), cfg);
    support.truncate(s + 1);
    let coefficients =
        restricted_tomography(access, &support, eps / 20.0, delta / 3.0, derive_seed(seed, "restricted", 0), cfg)?;
    Ok(TomographyResult { coefficients, support, delta, samples: tomography_samples(norm, s, eps, delta, cfg) })
}

fn phase_correct(mut res: TomographyResult) -> TomographyResult {
    let b0 = res.coefficients.get(&PauliLabel::identity(res.coefficients.n()));
    res.coefficients = res.coefficients.scale(b0.conj());
    res
}

/// Sparse tomography with ℓ∞ accuracy `eps`, phase-corrected by `conj(β̂_0)`.
pub fn sparse_tomo_linf(
    access: &StateAccess,
    s: usize,
    eps: f64,
    delta: f64,
    seed: u64,
    cfg: &TomographyConfig,
) -> Result<TomographyResult> {
    sparse_tomo_raw(access, TomographyNorm::Linf, s, eps, delta, seed, cfg).map(phase_correct)
}

/// Sparse tomography with ℓ2 accuracy `eps`, phase-corrected by `conj(β̂_0)`.
pub fn sparse_tomo_l2(
    access: &StateAccess,
    s: usize,
    eps: f64,
    delta: f64,
    seed: u64,
    cfg: &TomographyConfig,
) -> Result<TomographyResult> {
    sparse_tomo_raw(access, TomographyNorm::L2, s, eps, delta, seed, cfg).map(phase_correct)
}
