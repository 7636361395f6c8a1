//! Symplectic labels for n-qubit Pauli operators.
//!
//! A label `x = (a, b)` denotes `P_x = i^{a·b} X^a Z^b`, so every label is a
//! Hermitian Pauli string (the `(1, 1)` single-qubit label is `Y`). Bit `k` of
//! the masks belongs to the qubit whose basis-index bit is `k`; the leftmost
//! character of a Pauli string is the most significant qubit.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest qubit count a label can hold.
pub const MAX_QUBITS: usize = 32;

/// A power of `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    One,
    I,
    MinusOne,
    MinusI,
}

impl Phase {
    /// The phase `i^k`.
    pub fn from_exponent(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Phase::One,
            1 => Phase::I,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn exponent(self) -> u8 {
        match self {
            Phase::One => 0,
            Phase::I => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::One => Complex64::new(1.0, 0.0),
            Phase::I => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }
}

// Phases multiply by adding exponents of i.
#[allow(clippy::suspicious_arithmetic_impl)]
impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase::from_exponent(i64::from(self.exponent()) + i64::from(rhs.exponent()))
    }
}

/// Symplectic label `(a, b)` of an n-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliLabel {
    n: u8,
    a: u64,
    b: u64,
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliLabel {
    /// Builds a label from X and Z masks; bits above `n` are rejected.
    pub fn new(n: usize, a: u64, b: u64) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("qubit count {n} outside 1..={MAX_QUBITS}")));
        }
        if (a | b) & !mask(n) != 0 {
            return Err(Error::Dimension(format!("mask bits exceed {n} qubits")));
        }
        Ok(Self { n: n as u8, a, b })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, 0, 0).expect("valid qubit count")
    }

    /// Label with index `idx = (a << n) | b`, enumerating all `4^n` labels.
    pub fn from_index(n: usize, idx: u64) -> Self {
        Self::new(n, idx >> n, idx & mask(n)).expect("index in range")
    }

    pub fn index(&self) -> u64 {
        (self.a << self.n) | self.b
    }

    pub fn n(&self) -> usize {
        usize::from(self.n)
    }

    pub fn x_bits(&self) -> u64 {
        self.a
    }

    pub fn z_bits(&self) -> u64 {
        self.b
    }

    pub fn is_identity(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    /// Number of qubits acted on non-trivially.
    pub fn weight(&self) -> u32 {
        (self.a | self.b).count_ones()
    }

    /// `a·b` modulo 4, the exponent of the label's built-in `i` power.
    pub fn y_count(&self) -> u32 {
        (self.a & self.b).count_ones()
    }

    /// Whether `P_x` and `P_y` commute.
    pub fn commutes_with(&self, other: &PauliLabel) -> bool {
        ((self.a & other.b).count_ones() + (self.b & other.a).count_ones()).is_multiple_of(2)
    }

    /// Single-qubit letter at qubit position `k` (0 = leftmost).
    pub fn letter(&self, k: usize) -> char {
        let bit = self.n() - 1 - k;
        match ((self.a >> bit) & 1, (self.b >> bit) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (0, 1) => 'Z',
            _ => 'Y',
        }
    }
}

/// Product `P_x P_y = phase · P_{x⊕y}`.
pub fn pauli_mul(x: &PauliLabel, y: &PauliLabel) -> Result<(Phase, PauliLabel)> {
    if x.n != y.n {
        return Err(Error::Dimension(format!("{} vs {} qubits", x.n, y.n)));
    }
    Ok(pauli_mul_unchecked(x, y))
}

pub(crate) fn pauli_mul_unchecked(x: &PauliLabel, y: &PauliLabel) -> (Phase, PauliLabel) {
    let a = x.a ^ y.a;
    let b = x.b ^ y.b;
    // X^{a1}Z^{b1}X^{a2}Z^{b2} = (-1)^{b1·a2} X^{a}Z^{b}, then re-absorb the i^{a·b} factors.
    let k = i64::from(x.y_count()) + i64::from(y.y_count()) + 2 * i64::from((x.b & y.a).count_ones())
        - i64::from((a & b).count_ones());
    (Phase::from_exponent(k), PauliLabel { n: x.n, a, b })
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.n() {
            write!(f, "{}", self.letter(k))?;
        }
        Ok(())
    }
}

impl FromStr for PauliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        let mut a = 0u64;
        let mut b = 0u64;
        for (k, c) in s.chars().enumerate() {
            let bit = 1u64 << (n - 1 - k);
            match c {
                'I' => {}
                'X' => a |= bit,
                'Z' => b |= bit,
                'Y' => {
                    a |= bit;
                    b |= bit;
                }
                other => return Err(Error::InvalidArgument(format!("invalid Pauli letter `{other}`"))),
            }
        }
        PauliLabel::new(n, a, b)
    }
}
