//! Numerical certification of the learning inequalities over seeded random instances.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::control;
use crate::dense::{self, DenseOperator};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::pauli::PauliLabel;
use crate::rng::{derive_seed, rng_from_seed};
use crate::span::f2_span;
use crate::sparse::{random_sparse_hamiltonian, PauliExpansion, SparseHamiltonian};
use crate::tomography;
use crate::truncation::truncate_sparse_bounded;

/// Registered check names.
pub const CHECK_NAMES: [&str; 11] = [
    "duhamel",
    "log_norm",
    "span_4m",
    "bch_degree",
    "bch_tail",
    "trotter",
    "long_time_exact",
    "trunc_stability",
    "power_growth",
    "first_order",
    "norm_relations",
];

/// Instance distribution and tolerances for one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSpec {
    pub name: String,
    /// Inclusive qubit-count range.
    pub n_range: (usize, usize),
    /// Inclusive sparsity range, clipped to `4^n − 1`.
    pub m_range: (usize, usize),
    /// Minimum times sampled uniformly.
    pub times: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub slack: f64,
    /// Multiplies every right-hand side; values below 1 tamper with the bounds.
    pub bound_scale: f64,
}

impl CheckSpec {
    /// Default distribution: `n, m ∈ {1,2,3}`, `T ∈ {0.05, 0.5, 1}`, 200 trials, slack `1e-9`.
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            n_range: (1, 3),
            m_range: (1, 3),
            times: vec![0.05, 0.5, 1.0],
            trials: 200,
            seed: 0,
            slack: 1e-9,
            bound_scale: 1.0,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Worst-case outcome of a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    /// Trials whose hypotheses held.
    pub evaluated: usize,
    pub skipped: usize,
    /// Largest `lhs − rhs`; positive means the inequality failed.
    pub max_violation: f64,
    pub pass: bool,
    pub worst_instance: Option<Value>,
}

struct Inequality {
    what: &'static str,
    lhs: f64,
    rhs: f64,
}

impl Inequality {
    fn new(what: &'static str, lhs: f64, rhs: f64) -> Self {
        Self { what, lhs, rhs }
    }
}

enum Outcome {
    Skipped,
    Evaluated { violation: f64, instance: Value },
}

struct Instance {
    rng: ChaCha8Rng,
    n: usize,
    m: usize,
    t: f64,
}

impl Instance {
    fn new(spec: &CheckSpec, trial: usize) -> Self {
        let mut rng = rng_from_seed(derive_seed(spec.seed, &spec.name, trial as u64));
        let n = rng.random_range(spec.n_range.0..=spec.n_range.1);
        let cap = (1usize << (2 * n)) - 1;
        let lo = spec.m_range.0.min(cap);
        let m = rng.random_range(lo..=spec.m_range.1.min(cap));
        let t = spec.times[rng.random_range(0..spec.times.len())];
        Self { rng, n, m, t }
    }

    fn hamiltonian(&mut self) -> Result<SparseHamiltonian> {
        random_sparse_hamiltonian(self.n, self.m, self.rng.random(), 1.0)
    }
}

/// Runs a registered check.
pub fn run_check(spec: &CheckSpec, exec: Execution) -> Result<CheckReport> {
    let check: fn(&mut Instance) -> CheckOutput = match spec.name.as_str() {
        "duhamel" => duhamel,
        "log_norm" => log_norm,
        "span_4m" => span_4m,
        "bch_degree" => bch_degree,
        "bch_tail" => bch_tail,
        "trotter" => trotter,
        "long_time_exact" => long_time_exact,
        "trunc_stability" => trunc_stability,
        "power_growth" => power_growth,
        "first_order" => first_order,
        "norm_relations" => norm_relations,
        other => return Err(Error::UnknownCheck(other.to_string())),
    };
    if spec.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if spec.n_range.0 == 0 || spec.n_range.0 > spec.n_range.1 || spec.n_range.1 > 6 {
        return Err(Error::InvalidArgument(format!("qubit range {:?} invalid (1..=6)", spec.n_range)));
    }
    if spec.m_range.0 == 0 || spec.m_range.0 > spec.m_range.1 || spec.times.is_empty() {
        return Err(Error::InvalidArgument("sparsity range or time list invalid".into()));
    }
    let outcomes = exec.map(spec.trials, |trial| -> Result<Outcome> {
        let mut inst = Instance::new(spec, trial);
        let Some((ineqs, mut instance)) = check(&mut inst)? else {
            return Ok(Outcome::Skipped);
        };
        let (violation, worst) = ineqs
            .iter()
            .map(|q| {
                let v = q.lhs - spec.bound_scale * q.rhs;
                (if v.is_nan() { f64::INFINITY } else { v }, q)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("every check yields an inequality");
        instance["trial"] = json!(trial);
        instance["n"] = json!(inst.n);
        instance["m"] = json!(inst.m);
        instance["inequality"] = json!(worst.what);
        instance["lhs"] = json!(worst.lhs);
        instance["rhs"] = json!(spec.bound_scale * worst.rhs);
        Ok(Outcome::Evaluated { violation, instance })
    });
    let mut evaluated = 0;
    let mut skipped = 0;
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_instance = None;
    for outcome in outcomes {
        match outcome? {
            Outcome::Skipped => skipped += 1,
            Outcome::Evaluated { violation, instance } => {
                evaluated += 1;
                if violation > max_violation {
                    max_violation = violation;
                    worst_instance = Some(instance);
                }
            }
        }
    }
    Ok(CheckReport {
        name: spec.name.clone(),
        trials: spec.trials,
        evaluated,
        skipped,
        max_violation,
        pass: max_violation <= spec.slack,
        worst_instance,
    })
}

/// Runs every registered check with `template`'s distribution; the name field is replaced.
pub fn run_all(template: &CheckSpec, exec: Execution) -> Result<Vec<CheckReport>> {
    CHECK_NAMES.iter().map(|name| run_check(&CheckSpec { name: name.to_string(), ..template.clone() }, exec)).collect()
}

fn op_norm(h: &SparseHamiltonian) -> Result<f64> {
    Ok(dense::operator_norm(&dense::to_dense_hamiltonian(h)?))
}

fn frob(m: &DenseOperator) -> f64 {
    dense::normalized_frobenius(m)
}

fn hv(h: &SparseHamiltonian) -> Value {
    serde_json::to_value(h).expect("hamiltonian serializes")
}

type CheckOutput = Result<Option<(Vec<Inequality>, Value)>>;

fn duhamel(inst: &mut Instance) -> CheckOutput {
    let x = inst.hamiltonian()?;
    let y = if inst.rng.random_bool(0.1) { x.clone() } else { inst.hamiltonian()? };
    let t = inst.t;
    let v = dense::expm_i_sparse(&x, t)?.mul(&dense::expm_i_sparse(&y, -t)?);
    let gap = v.sub(&DenseOperator::identity(inst.n));
    let delta = dense::to_dense_hamiltonian(&x.sub(&y))?;
    Ok(Some((
        vec![
            Inequality::new("operator", dense::operator_norm(&gap), t * dense::operator_norm(&delta)),
            Inequality::new("frobenius", frob(&gap), t * frob(&delta)),
        ],
        json!({"t": t, "x": hv(&x), "y": hv(&y)}),
    )))
}

fn log_norm(inst: &mut Instance) -> CheckOutput {
    let h = inst.hamiltonian()?;
    let t = inst.t * [1.0, 2.0, 4.0][inst.rng.random_range(0..3)];
    let phase = inst.rng.random_range(-PI..PI);
    let u = dense::expm_i_sparse(&h, t)?.scale(Complex64::from_polar(1.0, phase));
    let log = dense::traceless_log(&u)?;
    let gap = DenseOperator::identity(inst.n).sub(&u);
    Ok(Some((
        vec![
            Inequality::new("operator", dense::operator_norm(&log.w), PI * dense::operator_norm(&gap)),
            Inequality::new("frobenius", frob(&log.w), PI * frob(&gap)),
        ],
        json!({"t": t, "phase": phase, "h": hv(&h)}),
    )))
}

/// Off-span coefficient mass and span size of the correction generator's Pauli support.
pub struct SpanOutcome {
    pub off_span_mass: f64,
    pub span_size: u128,
    pub bound: u128,
    pub generator_norm: f64,
}

/// `None` when `‖W_j‖_∞ ≥ π − 1e-6`, where the span sparsity bound does not apply.
pub fn span_outcome(h: &SparseHamiltonian, h_j: &SparseHamiltonian, t: f64, m: usize) -> Result<Option<SpanOutcome>> {
    let w = control::correction_generator(h, h_j, t)?.w;
    let generator_norm = dense::operator_norm(&w);
    if generator_norm >= PI - dense::BRANCH_TOL {
        return Ok(None);
    }
    let coeffs = dense::pauli_decompose(&w);
    let span = f2_span(h.n(), h.labels().chain(h_j.labels()));
    let off_span_mass =
        coeffs.iter().filter(|(l, _)| !span.contains(l)).fold(0.0, |acc, (_, c)| acc + c.norm_sqr()).sqrt();
    Ok(Some(SpanOutcome { off_span_mass, span_size: span.size(), bound: 1u128 << (2 * m), generator_norm }))
}

fn span_4m(inst: &mut Instance) -> CheckOutput {
    let h = inst.hamiltonian()?;
    let h_j = inst.hamiltonian()?;
    let Some(out) = span_outcome(&h, &h_j, inst.t, inst.m)? else {
        return Ok(None);
    };
    Ok(Some((
        vec![
            Inequality::new("off_span_mass", out.off_span_mass, 0.0),
            Inequality::new("span_size", out.span_size as f64, out.bound as f64),
        ],
        json!({"t": inst.t, "h": hv(&h), "h_j": hv(&h_j), "span_size": out.span_size}),
    )))
}

fn bch_degree(inst: &mut Instance) -> CheckOutput {
    let h = inst.hamiltonian()?;
    let h_j = inst.hamiltonian()?;
    let t = inst.t;
    let x = h.times_complex(Complex64::new(0.0, -t));
    let y = h_j.times_complex(Complex64::new(0.0, t));
    let big_m = t * op_norm(&h)?.max(op_norm(&h_j)?);
    let eps = x.add(&y).frobenius();
    let mut ineqs = Vec::new();
    const NAMES: [&str; 4] = ["r1", "r2", "r3", "r4"];
    for (r, what) in (1..=4).zip(NAMES) {
        let term = control::bch_term(&x, &y, r)?;
        ineqs.push(Inequality::new(what, term.frobenius(), control::bch_constant(r) * big_m.powi(r as i32 - 1) * eps));
    }
    Ok(Some((ineqs, json!({"t": t, "h": hv(&h), "h_j": hv(&h_j)}))))
}

/// `m^{−1/K}/(16eC)`.
pub fn bch_reference_time(m: usize, k_order: usize, c: f64) -> f64 {
    (m as f64).powf(-1.0 / k_order as f64) / (16.0 * E * c)
}

fn bch_tail(inst: &mut Instance) -> CheckOutput {
    let h = inst.hamiltonian()?;
    let h_j = inst.hamiltonian()?;
    let big_k = inst.rng.random_range(2..=4usize);
    let k = big_k - 1;
    let c = control::norm_constant(&h, &h_j)?;
    let t = bch_reference_time(inst.m, big_k, c);
    let trunc = control::bch_truncated_generator(&h, &h_j, t, k)?;
    let w = control::bch_generator_dense(&h, &h_j, t)?.w;
    let gap = frob(&w.sub(&dense::to_dense_hamiltonian(&trunc.generator)?));
    let diff = h.sub(&h_j);
    let m_eff = f2_union_size(&h, &h_j) as f64;
    let q = 4.0 * t * E * c;
    let sparsity_bound = k as f64 * (2.0 * inst.m as f64).powi(k as i32);
    Ok(Some((
        vec![
            Inequality::new("tail", gap, q.powi(k as i32 + 1) * m_eff.sqrt() * diff.linf()),
            Inequality::new("certified_tail", gap, trunc.tail_bound),
            Inequality::new("sparsity", trunc.generator.supp() as f64, sparsity_bound),
        ],
        json!({"t": t, "k": k, "h": hv(&h), "h_j": hv(&h_j)}),
    )))
}

fn f2_union_size(h: &SparseHamiltonian, h_j: &SparseHamiltonian) -> usize {
    let mut labels: Vec<&PauliLabel> = h.labels().chain(h_j.labels()).collect();
    labels.sort();
    labels.dedup();
    labels.len()
}

fn trotter(inst: &mut Instance) -> CheckOutput {
    let h = inst.hamiltonian()?;
    let h_j = if inst.rng.random_bool(0.1) { commuting_partner(&h, &mut inst.rng)? } else { inst.hamiltonian()? };
    let steps = [1u64, 2, 4, 8][inst.rng.random_range(0..4)];
    let t = inst.t;
    let lhs = trotter_error(&h, &h_j, t, steps)?;
    let rhs = t * t / steps as f64 * op_norm(&h)?.min(op_norm(&h_j)?) * h.sub(&h_j).frobenius();
    Ok(Some((
        vec![Inequality::new("frobenius", lhs, rhs)],
        json!({"t": t, "steps": steps, "h": hv(&h), "h_j": hv(&h_j)}),
    )))
}

/// `‖(e^{-iHt/N} e^{iH_jt/N})^N − e^{-i(H−H_j)t}‖_F`.
pub fn trotter_error(h: &SparseHamiltonian, h_j: &SparseHamiltonian, t: f64, steps: u64) -> Result<f64> {
    let dt = t / steps as f64;
    let product = dense::expm_i_sparse(h, dt)?.mul(&dense::expm_i_sparse(h_j, -dt)?).pow(steps);
    Ok(frob(&product.sub(&dense::expm_i_sparse(&h.sub(h_j), t)?)))
}

fn commuting_partner(h: &SparseHamiltonian, rng: &mut ChaCha8Rng) -> Result<SparseHamiltonian> {
    let s = rng.random_range(-1.0..1.0);
    let mut partner = h.scale(s * 0.9);
    if partner.is_zero() {
        partner = h.clone();
    }
    Ok(partner)
}

/// Plain Frobenius deviation of `e^{-iHτ}e^{iH_jτ} = e^{-iH(T+τ)} C_j e^{iH_j(T+τ)}`.
pub fn long_time_deviation(h: &SparseHamiltonian, h_j: &SparseHamiltonian, big_t: f64, tau: f64) -> Result<f64> {
    let short = dense::expm_i_sparse(h, tau)?.mul(&dense::expm_i_sparse(h_j, -tau)?);
    let c_j = control::correction_unitary(h, h_j, big_t)?;
    let long = dense::expm_i_sparse(h, big_t + tau)?.mul(&c_j).mul(&dense::expm_i_sparse(h_j, -(big_t + tau))?);
    Ok(short.sub(&long).matrix().norm())
}

fn long_time_exact(inst: &mut Instance) -> CheckOutput {
    let h = inst.hamiltonian()?;
    let h_j = inst.hamiltonian()?;
    let tau = inst.rng.random_range(1e-3..1.0);
    let lhs = long_time_deviation(&h, &h_j, inst.t, tau)?;
    Ok(Some((
        vec![Inequality::new("identity", lhs, 0.0)],
        json!({"t": inst.t, "tau": tau, "h": hv(&h), "h_j": hv(&h_j)}),
    )))
}

fn trunc_stability(inst: &mut Instance) -> CheckOutput {
    let a = inst.hamiltonian()?;
    let eps = inst.rng.random_range(1e-3..0.3);
    let n = inst.n;
    let mut terms: Vec<(PauliLabel, f64)> =
        a.iter().map(|(l, c)| (*l, *c + inst.rng.random_range(-eps..eps))).collect();
    for _ in 0..2 {
        let label = PauliLabel::from_index(n, inst.rng.random_range(1..(1u64 << (2 * n))));
        if !terms.iter().any(|(l, _)| *l == label) {
            terms.push((label, inst.rng.random_range(-eps..eps)));
        }
    }
    let b = SparseHamiltonian::from_terms(n, terms)?;
    let projected = truncate_sparse_bounded(&b, inst.m, 1.0)?;
    Ok(Some((
        vec![Inequality::new("linf", a.linf_distance(&projected), 2.0 * a.linf_distance(&b))],
        json!({"a": hv(&a), "b": hv(&b)}),
    )))
}

fn power_growth(inst: &mut Instance) -> CheckOutput {
    let a = inst.hamiltonian()?.to_expansion();
    let norm = a.norms().linf;
    let m = inst.m as f64;
    const NAMES: [&str; 3] = ["k1", "k2", "k3"];
    let ineqs = (1..=3u32)
        .zip(NAMES)
        .map(|(k, what)| Inequality::new(what, a.pow(k).norms().linf, m.powi(k as i32 - 1) * norm.powi(k as i32)))
        .collect();
    Ok(Some((ineqs, json!({"a": hv(&SparseHamiltonian::from_expansion_real(&a))}))))
}

fn first_order(inst: &mut Instance) -> CheckOutput {
    let raw = inst.hamiltonian()?;
    let eps = inst.rng.random_range(0.01..0.5);
    let a = raw.scale(eps / raw.linf());
    let m = a.supp() as f64;
    let t = inst.rng.random_range(1e-3..=1.0) / (m * eps);
    let u = dense::expm_i_sparse(&a, t)?;
    let beta = tomography::choi_amplitudes(&u)?;
    let id = PauliLabel::identity(inst.n);
    let first = PauliExpansion::identity(inst.n).sub(&a.times_complex(Complex64::new(0.0, t)));
    let remainder = beta.sub(&first);
    let bound = m * t * t * eps * eps;
    let off = remainder.iter().filter(|(l, _)| **l != id).map(|(_, c)| c.norm()).fold(0.0, f64::max);
    let a_inf = op_norm(&a)?;
    Ok(Some((
        vec![
            Inequality::new("identity", (Complex64::new(1.0, 0.0) - beta.get(&id)).norm(), bound),
            Inequality::new("linf", off, bound),
            Inequality::new("frobenius", remainder.frobenius(), t * t * a.frobenius() * a_inf),
        ],
        json!({"t": t, "eps": eps, "a": hv(&a)}),
    )))
}

fn norm_relations(inst: &mut Instance) -> CheckOutput {
    let h = inst.hamiltonian()?;
    let h_j = inst.hamiltonian()?;
    let m = inst.m as f64;
    let eps = h.sub(&h_j).linf();
    let poly = inst.rng.random_bool(0.5);
    let (t, f_bound, inf_bound, k_order) = if poly {
        let big_k = inst.rng.random_range(2..=3usize);
        let t = bch_reference_time(inst.m, big_k, control::norm_constant(&h, &h_j)?);
        (t, m.sqrt() * eps, m * eps, Some(big_k))
    } else {
        let t = inst.t;
        (t, 2.0 * PI * t * m.sqrt() * eps, 2.0 * PI * t * m * eps, None)
    };
    let w = control::correction_generator(&h, &h_j, t)?.w;
    Ok(Some((
        vec![
            Inequality::new("frobenius", frob(&w), f_bound),
            Inequality::new("operator", dense::operator_norm(&w), inf_bound),
        ],
        json!({"t": t, "regime": if poly { "poly" } else { "log" }, "K": k_order, "h": hv(&h), "h_j": hv(&h_j)}),
    )))
}
