//! Black-box access to `e^{-iHt}` for `t ≥ T`, with resource accounting.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::dense::{self, DenseOperator, Spectrum};
use crate::error::{Error, Result};
use crate::sparse::SparseHamiltonian;

/// Resource counters: total evolution time, shortest granted time, query count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryLedger {
    pub t_tot: f64,
    /// `+∞` until the first query.
    pub t_min: f64,
    pub queries: u64,
}

impl Default for QueryLedger {
    fn default() -> Self {
        Self { t_tot: 0.0, t_min: f64::INFINITY, queries: 0 }
    }
}

impl QueryLedger {
    fn record(&mut self, duration: f64, count: u64) {
        self.t_tot += duration * count as f64;
        self.t_min = self.t_min.min(duration);
        self.queries += count;
    }

    /// Counter differences `self − earlier`.
    pub fn delta(&self, earlier: &QueryLedger) -> (f64, u64) {
        (self.t_tot - earlier.t_tot, self.queries - earlier.queries)
    }

    pub fn t_min_reported(&self) -> Option<f64> {
        self.t_min.is_finite().then_some(self.t_min)
    }
}

impl Serialize for QueryLedger {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("QueryLedger", 3)?;
        st.serialize_field("t_tot", &self.t_tot)?;
        st.serialize_field("t_min", &self.t_min_reported())?;
        st.serialize_field("queries", &self.queries)?;
        st.end()
    }
}

/// Holds the hidden Hamiltonian; only unitaries and the ledger leave it.
pub struct EvolutionOracle {
    n: usize,
    spectrum: Spectrum,
    min_time: f64,
    ledger: QueryLedger,
}

impl std::fmt::Debug for EvolutionOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EvolutionOracle")
            .field("n", &self.n)
            .field("min_time", &self.min_time)
            .field("ledger", &self.ledger)
            .finish_non_exhaustive()
    }
}

impl EvolutionOracle {
    /// Wraps `hidden`, which must satisfy `‖H‖_∞ ≤ 1`, behind the minimum time `min_time`.
    pub fn new(hidden: SparseHamiltonian, min_time: f64) -> Result<Self> {
        if !(min_time > 0.0 && min_time.is_finite()) {
            return Err(Error::InvalidArgument(format!("minimum time must be positive, got {min_time}")));
        }
        let spectrum = Spectrum::new(&dense::to_dense_hamiltonian(&hidden)?)?;
        let norm = spectrum.operator_norm();
        if norm > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!("hidden Hamiltonian has operator norm {norm} > 1")));
        }
        Ok(Self { n: hidden.n(), spectrum, min_time, ledger: QueryLedger::default() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn min_time(&self) -> f64 {
        self.min_time
    }

    pub fn ledger(&self) -> QueryLedger {
        self.ledger
    }

    fn grant(&mut self, t: f64, copies: u64) -> Result<()> {
        if !(t >= self.min_time) || !t.is_finite() {
            return Err(Error::MinimumTimeViolation { requested: t, minimum: self.min_time });
        }
        if copies == 0 {
            return Err(Error::InvalidArgument("at least one copy must be requested".into()));
        }
        self.ledger.record(t, copies);
        Ok(())
    }

    /// `e^{-iHt}`; one query of duration `t`.
    pub fn query_evolution(&mut self, t: f64) -> Result<DenseOperator> {
        self.query_evolution_copies(t, 1)
    }

    /// `e^{-iHt}` for `copies` independent uses; each use is charged as a query.
    pub fn query_evolution_copies(&mut self, t: f64, copies: u64) -> Result<DenseOperator> {
        self.grant(t, copies)?;
        Ok(self.spectrum.expm_i(t))
    }

    /// `(e^{iH_jT} e^{-iHT})^q`; `q` queries of duration `T`.
    pub fn correction_adjoint_power(&mut self, h_j: &SparseHamiltonian, q: u64) -> Result<DenseOperator> {
        self.correction_adjoint_power_copies(h_j, q, 1)
    }

    /// As [`Self::correction_adjoint_power`] for `copies` uses, charging `q · copies` queries.
    pub fn correction_adjoint_power_copies(
        &mut self,
        h_j: &SparseHamiltonian,
        q: u64,
        copies: u64,
    ) -> Result<DenseOperator> {
        if q < 1 {
            return Err(Error::InvalidArgument("power q must be at least 1".into()));
        }
        if h_j.n() != self.n {
            return Err(Error::Dimension(format!("estimate on {} qubits, oracle on {}", h_j.n(), self.n)));
        }
        let known = dense::expm_i_sparse(h_j, -self.min_time)?;
        let total = q.checked_mul(copies).ok_or_else(|| Error::InvalidArgument("query count overflow".into()))?;
        self.grant(self.min_time, total)?;
        let step = known.mul(&self.spectrum.expm_i(self.min_time));
        Ok(step.pow(q))
    }
}
