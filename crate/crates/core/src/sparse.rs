//! Sparse Pauli polynomials with real (Hermitian) and complex coefficients.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::dense;
use crate::error::{Error, Result};
use crate::pauli::{pauli_mul_unchecked, PauliLabel, MAX_QUBITS};
use crate::rng::rng_from_seed;

/// Coefficients below this magnitude are dropped on construction.
pub const ZERO_TOL: f64 = 1e-14;

/// Pauli-coefficient norms of a polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("qubit count {n} outside 1..={MAX_QUBITS}")));
    }
    Ok(())
}

/// Traceless Hermitian operator `Σ_x α_x P_x` with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    n: usize,
    terms: BTreeMap<PauliLabel, f64>,
}

impl SparseHamiltonian {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    /// Builds from `(label, coefficient)` pairs, rejecting identity and repeated labels.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliLabel, f64)>,
    {
        check_n(n)?;
        let mut map = BTreeMap::new();
        for (label, coef) in terms {
            if label.n() != n {
                return Err(Error::Dimension(format!("label {label} on {} qubits, expected {n}", label.n())));
            }
            if label.is_identity() {
                return Err(Error::InvalidArgument("identity term in a traceless Hamiltonian".into()));
            }
            if !coef.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite coefficient for {label}")));
            }
            if map.insert(label, coef).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate label {label}")));
            }
        }
        map.retain(|_, c| c.abs() >= ZERO_TOL);
        Ok(Self { n, terms: map })
    }

    /// Builds from string labels, e.g. `[("XZ", 0.3)]`.
    pub fn from_strs(terms: &[(&str, f64)]) -> Result<Self> {
        let parsed: Vec<(PauliLabel, f64)> =
            terms.iter().map(|(s, c)| Ok((s.parse::<PauliLabel>()?, *c))).collect::<Result<_>>()?;
        let n = parsed.first().map(|(l, _)| l.n()).ok_or_else(|| Error::InvalidArgument("no terms given".into()))?;
        Self::from_terms(n, parsed)
    }

    /// Real parts of a complex expansion; the identity coefficient is discarded.
    pub fn from_expansion_real(p: &PauliExpansion) -> Self {
        let terms =
            p.iter().filter(|(l, c)| !l.is_identity() && c.re.abs() >= ZERO_TOL).map(|(l, c)| (*l, c.re)).collect();
        Self { n: p.n(), terms }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored terms.
    pub fn supp(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, label: &PauliLabel) -> f64 {
        self.terms.get(label).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliLabel, &f64)> {
        self.terms.iter()
    }

    pub fn labels(&self) -> impl Iterator<Item = &PauliLabel> {
        self.terms.keys()
    }

    pub fn norms(&self) -> CoefficientNorms {
        norms(self.terms.values().map(|c| c.abs()))
    }

    pub fn linf(&self) -> f64 {
        self.norms().linf
    }

    pub fn frobenius(&self) -> f64 {
        self.norms().l2
    }

    pub fn scale(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|(l, c)| (*l, c * s)).filter(|(_, c)| c.abs() >= ZERO_TOL).collect();
        Self { n: self.n, terms }
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(self.n, other.n, "qubit count mismatch");
        let mut terms = self.terms.clone();
        for (l, c) in &other.terms {
            *terms.entry(*l).or_insert(0.0) += sign * c;
        }
        terms.retain(|_, c| c.abs() >= ZERO_TOL);
        Self { n: self.n, terms }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    /// `self - other` measured in the coefficient ℓ∞ norm.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.sub(other).linf()
    }

    /// The same operator as a complex expansion.
    pub fn to_expansion(&self) -> PauliExpansion {
        PauliExpansion { n: self.n, terms: self.terms.iter().map(|(l, c)| (*l, Complex64::new(*c, 0.0))).collect() }
    }

    /// `factor · self` as a complex expansion, e.g. `-iT·H`.
    pub fn times_complex(&self, factor: Complex64) -> PauliExpansion {
        self.to_expansion().scale(factor)
    }

    /// Keeps only the given labels.
    pub(crate) fn restrict<'a>(&self, labels: impl IntoIterator<Item = &'a PauliLabel>) -> Self {
        let terms = labels.into_iter().filter_map(|l| self.terms.get(l).map(|c| (*l, *c))).collect();
        Self { n: self.n, terms }
    }

    /// Parses the one-term-per-line text format (`XZI 0.25`, `#` comments).
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut seen = BTreeMap::new();
        let mut n = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let mut parts = line.split_whitespace();
            let (Some(label), Some(coef), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(perr("expected `<pauli-string> <coefficient>`".into()));
            };
            let label: PauliLabel = label.parse().map_err(|e: Error| perr(e.to_string()))?;
            let coef: f64 = coef.parse().map_err(|_| perr(format!("invalid coefficient `{coef}`")))?;
            if !coef.is_finite() {
                return Err(perr("non-finite coefficient".into()));
            }
            match n {
                None => n = Some(label.n()),
                Some(n0) if n0 != label.n() => {
                    return Err(perr(format!("label has {} qubits, expected {n0}", label.n())))
                }
                _ => {}
            }
            if label.is_identity() {
                return Err(perr("identity term not allowed".into()));
            }
            if let Some(prev) = seen.insert(label, line_no) {
                return Err(perr(format!("duplicate label {label} (first on line {prev})")));
            }
            terms.push((label, coef));
        }
        let n = n.ok_or(Error::Parse { line: 0, msg: "no terms".into() })?;
        Self::from_terms(n, terms)
    }

    /// Renders the text format; coefficients use the shortest round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (l, c) in &self.terms {
            let _ = writeln!(out, "{l} {c}");
        }
        out
    }
}

impl Serialize for SparseHamiltonian {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Terms<'a>(&'a BTreeMap<PauliLabel, f64>);
        impl Serialize for Terms<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.0.len()))?;
                for (l, c) in self.0 {
                    map.serialize_entry(&l.to_string(), c)?;
                }
                map.end()
            }
        }
        let mut st = serializer.serialize_struct("SparseHamiltonian", 2)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("terms", &Terms(&self.terms))?;
        st.end()
    }
}

fn norms(mags: impl Iterator<Item = f64>) -> CoefficientNorms {
    let (mut l1, mut sq, mut linf) = (0.0, 0.0, 0.0f64);
    for m in mags {
        l1 += m;
        sq += m * m;
        linf = linf.max(m);
    }
    CoefficientNorms { l1, l2: sq.sqrt(), linf }
}

/// Complex Pauli polynomial `Σ_x c_x P_x` (identity allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct PauliExpansion {
    n: usize,
    terms: BTreeMap<PauliLabel, Complex64>,
}

impl PauliExpansion {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_map(n, [(PauliLabel::identity(n), Complex64::new(1.0, 0.0))].into())
    }

    pub(crate) fn from_map(n: usize, mut terms: BTreeMap<PauliLabel, Complex64>) -> Self {
        terms.retain(|_, c| c.norm() >= ZERO_TOL);
        Self { n, terms }
    }

    /// Builds from pairs, summing repeated labels.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliLabel, Complex64)>,
    {
        check_n(n)?;
        let mut map: BTreeMap<PauliLabel, Complex64> = BTreeMap::new();
        for (l, c) in terms {
            if l.n() != n {
                return Err(Error::Dimension(format!("label {l} on {} qubits, expected {n}", l.n())));
            }
            *map.entry(l).or_default() += c;
        }
        Ok(Self::from_map(n, map))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn supp(&self) -> usize {
        self.terms.len()
    }

    pub fn get(&self, label: &PauliLabel) -> Complex64 {
        self.terms.get(label).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliLabel, &Complex64)> {
        self.terms.iter()
    }

    pub fn norms(&self) -> CoefficientNorms {
        norms(self.terms.values().map(|c| c.norm()))
    }

    /// Normalized Frobenius norm of the operator.
    pub fn frobenius(&self) -> f64 {
        self.norms().l2
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_map(self.n, self.terms.iter().map(|(l, c)| (*l, c * s)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "qubit count mismatch");
        let mut terms = self.terms.clone();
        for (l, c) in &other.terms {
            *terms.entry(*l).or_default() += c;
        }
        Self::from_map(self.n, terms)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "qubit count mismatch");
        let mut terms: BTreeMap<PauliLabel, Complex64> = BTreeMap::new();
        for (x, cx) in &self.terms {
            for (y, cy) in &other.terms {
                let (phase, z) = pauli_mul_unchecked(x, y);
                *terms.entry(z).or_default() += cx * cy * phase.to_complex();
            }
        }
        Self::from_map(self.n, terms)
    }

    /// Commutator `[self, other]`; only anticommuting pairs contribute.
    pub fn commutator(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "qubit count mismatch");
        let mut terms: BTreeMap<PauliLabel, Complex64> = BTreeMap::new();
        for (x, cx) in &self.terms {
            for (y, cy) in &other.terms {
                if x.commutes_with(y) {
                    continue;
                }
                let (phase, z) = pauli_mul_unchecked(x, y);
                *terms.entry(z).or_default() += 2.0 * cx * cy * phase.to_complex();
            }
        }
        Self::from_map(self.n, terms)
    }

    /// `k`-th operator power (`k ≥ 1`).
    pub fn pow(&self, k: u32) -> Self {
        assert!(k >= 1, "power must be positive");
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.mul(self);
        }
        acc
    }
}

/// Random m-sparse traceless Hamiltonian with operator norm at most `norm_cap`.
pub fn random_sparse_hamiltonian(n: usize, m: usize, seed: u64, norm_cap: f64) -> Result<SparseHamiltonian> {
    check_n(n)?;
    if n > 31 {
        return Err(Error::InvalidArgument("random instances need n ≤ 31".into()));
    }
    let labels = (1u64 << (2 * n)) - 1;
    if m == 0 || (m as u64) > labels {
        return Err(Error::InvalidArgument(format!("sparsity {m} outside 1..={labels}")));
    }
    if !(norm_cap > 0.0) {
        return Err(Error::InvalidArgument("norm cap must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let picks = sample(&mut rng, labels as usize, m);
    let mut picks: Vec<u64> = picks.into_iter().map(|i| i as u64 + 1).collect();
    picks.sort_unstable();
    let terms: Vec<(PauliLabel, f64)> = picks
        .into_iter()
        .map(|idx| {
            let c = loop {
                let v: f64 = rng.random_range(-1.0..=1.0);
                if v.abs() >= 1e-3 {
                    break v;
                }
            };
            (PauliLabel::from_index(n, idx), c)
        })
        .collect();
    let h = SparseHamiltonian::from_terms(n, terms)?;
    cap_operator_norm(&h, norm_cap)
}

/// Rescales `h` so that its operator norm does not exceed `cap`.
pub(crate) fn cap_operator_norm(h: &SparseHamiltonian, cap: f64) -> Result<SparseHamiltonian> {
    if h.norms().l1 <= cap {
        return Ok(h.clone());
    }
    let norm = dense::operator_norm(&dense::to_dense_hamiltonian(h)?);
    if norm <= cap {
        return Ok(h.clone());
    }
    let mut scaled = h.scale(cap / norm);
    // Guard against the last ulp landing above the cap.
    while dense::operator_norm(&dense::to_dense_hamiltonian(&scaled)?) > cap {
        scaled = scaled.scale(1.0 - 1e-15);
    }
    Ok(scaled)
}
