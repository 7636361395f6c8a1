//! Sparse bounded truncation `T_{k,c}`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense;
use crate::error::Result;
use crate::pauli::PauliLabel;
use crate::sparse::{cap_operator_norm, SparseHamiltonian};

const REFINE_STEPS: usize = 400;

/// Keeps the `k` largest-magnitude terms. If their operator norm exceeds `c`,
/// the coefficients are moved to the nearest (in ℓ∞) point of norm at most `c`
/// found by a subgradient search started from the uniform rescaling.
///
/// Ties in magnitude are broken by label order so the result is deterministic.
pub fn truncate_sparse_bounded(h: &SparseHamiltonian, k: usize, c: f64) -> Result<SparseHamiltonian> {
    assert!(c > 0.0, "norm bound must be positive");
    let kept = top_k(h, k);
    let scaled = cap_operator_norm(&kept, c)?;
    if scaled == kept {
        return Ok(kept);
    }
    refine_bounded(&kept, &scaled, c)
}

/// Minimizes `‖target − y‖_ℓ∞ + 2·max(‖y‖ − c, 0)` over `y` on the target's support.
/// The penalty weight 2 exceeds the ℓ∞ cost of rescaling onto the norm ball,
/// so minimizers are feasible.
fn refine_bounded(target: &SparseHamiltonian, start: &SparseHamiltonian, c: f64) -> Result<SparseHamiltonian> {
    let n = target.n();
    let labels: Vec<PauliLabel> = target.labels().copied().collect();
    let t: Vec<f64> = labels.iter().map(|l| target.get(l)).collect();
    let paulis: Vec<DMatrix<Complex64>> = labels.iter().map(|l| dense::pauli_matrix(l).into_matrix()).collect();
    let dim = 1usize << n;
    let assemble = |y: &[f64]| {
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (p, &v) in paulis.iter().zip(y) {
            m += p * Complex64::new(v, 0.0);
        }
        m
    };
    let linf = |y: &[f64]| t.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut best: Vec<f64> = labels.iter().map(|l| start.get(l)).collect();
    let mut best_dist = linf(&best);
    let step0 = best_dist.max(1e-12);
    let mut y = best.clone();
    for i in 0..REFINE_STEPS {
        let eig = assemble(&y).symmetric_eigen();
        let (idx, lam) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, v)| (i, *v))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("nonempty spectrum");
        let norm = lam.abs();
        let feasible_scale = if norm > c { c / norm } else { 1.0 };
        let candidate: Vec<f64> = y.iter().map(|v| v * feasible_scale).collect();
        let d = linf(&candidate);
        if d < best_dist {
            best_dist = d;
            best = candidate;
        }

        let mut grad = vec![0.0; y.len()];
        let (arg, _) = t
            .iter()
            .zip(&y)
            .enumerate()
            .map(|(i, (a, b))| (i, (b - a).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty support");
        grad[arg] = (y[arg] - t[arg]).signum();
        if norm > c {
            let v = eig.eigenvectors.column(idx);
            for (g, p) in grad.iter_mut().zip(&paulis) {
                let expect = (v.adjoint() * p * v)[(0, 0)].re;
                *g += 2.0 * lam.signum() * expect;
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let step = 0.5 * step0 / ((i + 1) as f64).sqrt();
        for (v, g) in y.iter_mut().zip(&grad) {
            *v -= step * g / gnorm;
        }
    }
    let refined = SparseHamiltonian::from_terms(n, labels.into_iter().zip(best))?;
    cap_operator_norm(&refined, c)
}

/// The `k` largest-magnitude terms of `h`.
pub fn top_k(h: &SparseHamiltonian, k: usize) -> SparseHamiltonian {
    let mut ranked: Vec<_> = h.iter().collect();
    ranked.sort_by(|(la, ca), (lb, cb)| cb.abs().total_cmp(&ca.abs()).then(la.cmp(lb)));
    h.restrict(ranked.into_iter().take(k).map(|(l, _)| l))
}

/// Whether `h` lies in `S_{k,c}`.
pub fn is_feasible(h: &SparseHamiltonian, k: usize, c: f64) -> Result<bool> {
    if h.supp() > k {
        return Ok(false);
    }
    if h.norms().l1 <= c {
        return Ok(true);
    }
    Ok(dense::operator_norm(&dense::to_dense_hamiltonian(h)?) <= c)
}
