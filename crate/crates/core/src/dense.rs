//! Dense-matrix kernels on `2^n × 2^n` complex matrices.

use std::f64::consts::PI;

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::PauliLabel;
use crate::sparse::{PauliExpansion, SparseHamiltonian};

/// Default largest qubit count for dense matrices.
pub const DEFAULT_DENSE_CAP: usize = 8;
/// Tolerance on `‖M − M†‖` for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `‖U†U − I‖` for unitary inputs.
pub const UNITARY_TOL: f64 = 1e-10;
/// Eigenphases closer than this to `π` raise the branch warning.
pub const BRANCH_TOL: f64 = 1e-6;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A `2^n × 2^n` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n: usize,
    mat: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn from_matrix(n: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        let dim = 1usize << n;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::Dimension(format!("{}x{} matrix for {n} qubits", mat.nrows(), mat.ncols())));
        }
        Ok(Self { n, mat })
    }

    pub fn identity(n: usize) -> Self {
        let d = 1usize << n;
        Self { n, mat: DMatrix::identity(d, d) }
    }

    pub fn zeros(n: usize) -> Self {
        let d = 1usize << n;
        Self { n, mat: DMatrix::zeros(d, d) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { n: self.n, mat: self.mat.adjoint() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "qubit count mismatch");
        Self { n: self.n, mat: &self.mat * &other.mat }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "qubit count mismatch");
        Self { n: self.n, mat: &self.mat - &other.mat }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { n: self.n, mat: &self.mat * s }
    }

    /// `self^q` by repeated squaring.
    pub fn pow(&self, mut q: u64) -> Self {
        let mut acc = Self::identity(self.n);
        let mut base = self.clone();
        while q > 0 {
            if q & 1 == 1 {
                acc = acc.mul(&base);
            }
            q >>= 1;
            if q > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// Frobenius norm of `M − M†`, an upper bound on its operator norm.
    pub fn hermitian_deviation(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).norm()
    }

    /// Frobenius norm of `U†U − I`.
    pub fn unitary_deviation(&self) -> f64 {
        let d = self.dim();
        (self.mat.adjoint() * &self.mat - DMatrix::<Complex64>::identity(d, d)).norm()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= HERMITIAN_TOL
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary_deviation() <= UNITARY_TOL
    }

    pub(crate) fn hermitian_part(&self) -> Self {
        Self { n: self.n, mat: (&self.mat + self.mat.adjoint()) * Complex64::new(0.5, 0.0) }
    }

    fn require_unitary(&self) -> Result<()> {
        let dev = self.unitary_deviation();
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(())
    }

    fn require_hermitian(&self) -> Result<()> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(())
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::DenseCap { n, cap });
    }
    Ok(())
}

/// `i^k` for the label phase convention.
fn ipow(k: u32) -> Complex64 {
    match k % 4 {
        0 => ONE,
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn accumulate(n: usize, terms: impl Iterator<Item = (PauliLabel, Complex64)>, cap: usize) -> Result<DenseOperator> {
    check_cap(n, cap)?;
    let d = 1usize << n;
    let mut mat = DMatrix::<Complex64>::zeros(d, d);
    for (label, c) in terms {
        let a = label.x_bits() as usize;
        let b = label.z_bits() as usize;
        let base = c * ipow(label.y_count());
        for j in 0..d {
            let sign = if (b & j).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            mat[(j ^ a, j)] += base * sign;
        }
    }
    Ok(DenseOperator { n, mat })
}

/// Dense matrix of a Pauli label.
pub fn pauli_matrix(label: &PauliLabel) -> DenseOperator {
    accumulate(label.n(), std::iter::once((*label, ONE)), usize::MAX).expect("no cap")
}

/// Dense form of a complex Pauli polynomial (default cap).
pub fn to_dense(p: &PauliExpansion) -> Result<DenseOperator> {
    to_dense_with_cap(p, DEFAULT_DENSE_CAP)
}

pub fn to_dense_with_cap(p: &PauliExpansion, cap: usize) -> Result<DenseOperator> {
    accumulate(p.n(), p.iter().map(|(l, c)| (*l, *c)), cap)
}

/// Dense form of a real Pauli polynomial (default cap).
pub fn to_dense_hamiltonian(h: &SparseHamiltonian) -> Result<DenseOperator> {
    accumulate(h.n(), h.iter().map(|(l, c)| (*l, Complex64::new(*c, 0.0))), DEFAULT_DENSE_CAP)
}

/// In-place Walsh–Hadamard transform (unnormalized).
fn walsh_hadamard(v: &mut [Complex64]) {
    let mut h = 1;
    while h < v.len() {
        for i in (0..v.len()).step_by(2 * h) {
            for j in i..i + h {
                let (x, y) = (v[j], v[j + h]);
                v[j] = x + y;
                v[j + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// Coefficients `tr(P_x† M) / 2^n` for all labels.
pub fn pauli_decompose(m: &DenseOperator) -> PauliExpansion {
    let n = m.n;
    let d = m.dim();
    let inv = 1.0 / d as f64;
    let mut terms = std::collections::BTreeMap::new();
    let mut v = vec![ZERO; d];
    for a in 0..d {
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = m.mat[(j ^ a, j)];
        }
        walsh_hadamard(&mut v);
        for (b, &s) in v.iter().enumerate() {
            let label = PauliLabel::new(n, a as u64, b as u64).expect("in range");
            // conj(i^{a·b}) = i^{-a·b}
            let c = s * ipow(4 - label.y_count() % 4) * inv;
            terms.insert(label, c);
        }
    }
    PauliExpansion::from_map(n, terms)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    n: usize,
    values: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn new(h: &DenseOperator) -> Result<Self> {
        h.require_hermitian()?;
        let eig = h.hermitian_part().mat.symmetric_eigen();
        Ok(Self { n: h.n, values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `f(H)` for a scalar function applied to the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> Complex64) -> DenseOperator {
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let fk = f(lam);
            scaled.column_mut(k).scale_mut_complex(fk);
        }
        DenseOperator { n: self.n, mat: scaled * self.vectors.adjoint() }
    }

    /// `e^{-iHt}`.
    pub fn expm_i(&self, t: f64) -> DenseOperator {
        self.apply(|lam| Complex64::from_polar(1.0, -lam * t))
    }

    pub fn operator_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, s: Complex64);
}

impl<S> ScaleComplex for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_complex(&mut self, s: Complex64) {
        for x in self.iter_mut() {
            *x *= s;
        }
    }
}

/// `e^{-iHt}` for Hermitian `H`.
pub fn expm_i(h: &DenseOperator, t: f64) -> Result<DenseOperator> {
    Ok(Spectrum::new(h)?.expm_i(t))
}

/// `e^{-iHt}` for a sparse Hamiltonian.
pub fn expm_i_sparse(h: &SparseHamiltonian, t: f64) -> Result<DenseOperator> {
    expm_i(&to_dense_hamiltonian(h)?, t)
}

/// Phase-invariant distance `min_φ ‖U − e^{iφ}V‖_F` (normalized Frobenius).
pub fn unitary_distance(u: &DenseOperator, v: &DenseOperator) -> Result<f64> {
    if u.n != v.n {
        return Err(Error::Dimension(format!("{} vs {} qubits", u.n, v.n)));
    }
    u.require_unitary()?;
    v.require_unitary()?;
    let overlap = (u.mat.adjoint() * &v.mat).trace().norm() / u.dim() as f64;
    Ok((2.0 - 2.0 * overlap).max(0.0).sqrt())
}

/// Output of [`traceless_log`].
#[derive(Debug, Clone)]
pub struct TracelessLog {
    /// Traceless Hermitian `W` with `e^{-iW} = e^{iφ} U`.
    pub w: DenseOperator,
    /// Mean eigenphase `φ`.
    pub phi: f64,
    /// Some eigenphase lies within [`BRANCH_TOL`] of `π`.
    pub branch_warning: bool,
}

/// Traceless Hermitian logarithm of a unitary, eigenphases taken in `(−π, π]`.
pub fn traceless_log(u: &DenseOperator) -> Result<TracelessLog> {
    u.require_unitary()?;
    let d = u.dim();
    let schur = Schur::try_new(u.mat.clone(), 1e-15, 100_000)
        .or_else(|| Schur::try_new(u.mat.clone(), 1e-13, 1_000_000))
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let mut thetas = Vec::with_capacity(d);
    let mut branch_warning = false;
    for k in 0..d {
        let mut theta = -t[(k, k)].arg();
        if theta <= -PI {
            theta = PI;
        }
        if PI - theta.abs() < BRANCH_TOL {
            branch_warning = true;
        }
        thetas.push(theta);
    }
    let phi = thetas.iter().sum::<f64>() / d as f64;
    let mut scaled = q.clone();
    for (k, theta) in thetas.iter().enumerate() {
        scaled.column_mut(k).scale_mut_complex(Complex64::new(theta - phi, 0.0));
    }
    let w = DenseOperator { n: u.n, mat: scaled * q.adjoint() }.hermitian_part();
    Ok(TracelessLog { w, phi, branch_warning })
}

/// Spectral norm: largest |eigenvalue| for Hermitian input, largest singular value otherwise.
pub fn operator_norm(m: &DenseOperator) -> f64 {
    if m.hermitian_deviation() <= HERMITIAN_TOL {
        let eig = m.hermitian_part().mat.symmetric_eigen();
        eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    } else {
        m.mat.clone().singular_values().iter().fold(0.0f64, |acc, v| acc.max(*v))
    }
}

/// `sqrt(tr(M†M) / 2^n)`.
pub fn normalized_frobenius(m: &DenseOperator) -> f64 {
    m.mat.norm() / (m.dim() as f64).sqrt()
}
