use hamlearn::control::{
    self, integer_evol_learn, residual_unitary, IntegerEvolParams, LearnSettings, MockIntegerAccess,
};
use hamlearn::dense::{self, DenseOperator};
use hamlearn::learner::{
    main_learn, regime_params, sparse_ham_learn, sql_learn, BranchPolicy, DirectEvolution, Regime,
};
use hamlearn::oracle::EvolutionOracle;
use hamlearn::sparse::{random_sparse_hamiltonian, SparseHamiltonian};
use hamlearn::tomography::{self, StateMode, TomographyConfig};
use hamlearn::verifier;

fn frob(a: &DenseOperator) -> f64 {
    dense::normalized_frobenius(a)
}

fn sparse_of(w: &DenseOperator) -> SparseHamiltonian {
    SparseHamiltonian::from_expansion_real(&dense::pauli_decompose(w))
}

#[test]
fn bch_partial_sums_converge_within_tail_bound() {
    for seed in 0..8 {
        let h = random_sparse_hamiltonian(2, 2, 2 * seed, 1.0).unwrap();
        let h_j = random_sparse_hamiltonian(2, 2, 2 * seed + 1, 1.0).unwrap();
        let t = 0.05;
        let exact = control::bch_generator_dense(&h, &h_j, t).unwrap().w;
        let mut last = f64::INFINITY;
        for k in 1..=4 {
            let trunc = control::bch_truncated_generator(&h, &h_j, t, k).unwrap();
            let gap = frob(&exact.sub(&dense::to_dense_hamiltonian(&trunc.generator).unwrap()));
            assert!(gap <= trunc.tail_bound + 1e-12, "seed {seed} k {k}: {gap} > {}", trunc.tail_bound);
            assert!(gap <= last + 1e-14);
            last = gap;
        }
    }
}

#[test]
fn bch_commuting_pair_is_first_order() {
    let h = SparseHamiltonian::from_strs(&[("ZI", 0.6), ("IZ", -0.2)]).unwrap();
    let h_j = SparseHamiltonian::from_strs(&[("ZI", 0.1), ("ZZ", 0.3)]).unwrap();
    let t = 0.05;
    let first = control::bch_truncated_generator(&h, &h_j, t, 1).unwrap().generator;
    assert!(first.linf_distance(&h.sub(&h_j).scale(t)) <= 1e-15);
    let fourth = control::bch_truncated_generator(&h, &h_j, t, 4).unwrap().generator;
    assert!(fourth.linf_distance(&first) <= 1e-15);
}

#[test]
fn residual_without_error_is_identity() {
    let h = random_sparse_hamiltonian(2, 3, 11, 1.0).unwrap();
    let mut oracle = EvolutionOracle::new(h.clone(), 1.0).unwrap();
    let u = residual_unitary(&mut oracle, &h, &SparseHamiltonian::zero(2), 0.3, 4, 5).unwrap();
    assert!(dense::unitary_distance(&u, &DenseOperator::identity(2)).unwrap() <= 1e-7);
    assert_eq!(oracle.ledger().queries, 20);
    assert!(oracle.ledger().t_min >= 1.0);
}

#[test]
fn residual_rewriting_matches_short_time_product() {
    for seed in 0..6 {
        let h = random_sparse_hamiltonian(2, 2, 100 + seed, 1.0).unwrap();
        let h_j = h.add(&random_sparse_hamiltonian(2, 2, 200 + seed, 0.1).unwrap());
        let big_t = 1.0;
        let w_j = sparse_of(&control::correction_generator(&h, &h_j, big_t).unwrap().w);
        let t = 0.4;
        let mut oracle = EvolutionOracle::new(h.clone(), big_t).unwrap();
        let one = residual_unitary(&mut oracle, &h_j, &w_j, t, 1, 1).unwrap();
        let short = dense::expm_i_sparse(&h, t).unwrap().mul(&dense::expm_i_sparse(&h_j, -t).unwrap());
        assert!(dense::unitary_distance(&one, &short).unwrap() <= 1e-7);

        for steps in [2u64, 4, 8] {
            let u = residual_unitary(&mut oracle, &h_j, &w_j, t, steps, 1).unwrap();
            let dt = t / steps as f64;
            let product =
                dense::expm_i_sparse(&h, dt).unwrap().mul(&dense::expm_i_sparse(&h_j, -dt).unwrap()).pow(steps);
            assert!(dense::unitary_distance(&u, &product).unwrap() <= 1e-7);
            let trotter = verifier::trotter_error(&h, &h_j, t, steps).unwrap();
            let nh = dense::operator_norm(&dense::to_dense_hamiltonian(&h).unwrap());
            let nj = dense::operator_norm(&dense::to_dense_hamiltonian(&h_j).unwrap());
            assert!(trotter <= t * t / steps as f64 * nh.min(nj) * h.sub(&h_j).frobenius() + 1e-12);
        }
    }
}

#[test]
fn long_time_identity_holds() {
    for seed in 0..10 {
        let h = random_sparse_hamiltonian(2, 3, seed, 1.0).unwrap();
        let h_j = random_sparse_hamiltonian(2, 3, seed + 50, 1.0).unwrap();
        for big_t in [0.05, 1.0] {
            assert!(verifier::long_time_deviation(&h, &h_j, big_t, 0.37).unwrap() <= 1e-10);
        }
    }
}

#[test]
fn correction_support_stays_in_span() {
    for seed in 0..10 {
        let h = random_sparse_hamiltonian(3, 2, seed, 1.0).unwrap();
        let h_j = random_sparse_hamiltonian(3, 2, seed + 77, 1.0).unwrap();
        let out = verifier::span_outcome(&h, &h_j, 0.5, 2).unwrap().expect("generator away from the branch cut");
        assert!(out.off_span_mass <= 1e-10);
        assert!(out.span_size <= out.bound);
    }
}

#[test]
fn table_norms_poly_and_log() {
    let log = regime_params(3, 2, 1.0, None, Regime::LogSparse, 1.0).unwrap();
    assert_eq!(log.s, 64);
    assert!((log.c_f - 2.0 * std::f64::consts::PI * 3f64.sqrt()).abs() < 1e-12);
    let poly = regime_params(3, 2, 0.01, Some(3), Regime::PolySparse, 1.0).unwrap();
    assert_eq!(poly.s, 2 * 36);
    assert!((poly.c_inf - 6.0).abs() < 1e-15);
    assert!(poly.warnings.is_empty());
}

#[test]
fn mock_integer_learner_recovers_generator() {
    let params = IntegerEvolParams { s: 2, c_f: 1.0, c_inf: 1.0, c: 1.0, rho: 1.0 };
    let eps = 0.01;
    assert_eq!(control::integer_time(1.0, 1.0, 1.0, eps), 10);
    for seed in 0..10 {
        let mut w = random_sparse_hamiltonian(2, 2, seed, 1.0).unwrap();
        w = w.scale(0.9 * eps / w.frobenius());
        let mut access = MockIntegerAccess::new(&w, 0.3).unwrap();
        let out = integer_evol_learn(&mut access, &params, eps, 0.05, seed, &LearnSettings::default()).unwrap();
        assert_eq!(out.t, 10);
        assert!(out.w.sub(&w).frobenius() <= eps, "seed {seed}");
        assert_eq!(access.units, 10 * out.samples);
    }
}

#[test]
fn sparse_ham_learner_exact_and_sampled() {
    let eps = 0.05;
    for (seed, mode) in [(1, StateMode::Exact), (2, StateMode::Exact), (3, StateMode::Sampled)] {
        let mut a = random_sparse_hamiltonian(2, 2, seed, 1.0).unwrap();
        a = a.scale(eps / a.linf());
        let mut access = DirectEvolution::new(&a).unwrap();
        let settings = LearnSettings { mode, tomography: TomographyConfig::default() };
        let out = sparse_ham_learn(&mut access, 2, 2, eps, 0.05, seed, &settings).unwrap();
        assert!(out.estimate.linf_distance(&a) <= eps / 8.0, "seed {seed}: {}", out.estimate.linf_distance(&a));
        assert!(out.estimate.supp() <= 2);
        assert_eq!(access.copies, out.samples);
    }
}

#[test]
fn sql_learner_examples() {
    let h = random_sparse_hamiltonian(2, 2, 9, 1.0).unwrap();
    let mut oracle = EvolutionOracle::new(h.clone(), 1.0).unwrap();
    let out = sql_learn(&mut oracle, &h, 2, 3, 0.1, 0.05, 0, &LearnSettings::default()).unwrap();
    assert!(out.delta_h.linf() <= 0.025);
    assert!(oracle.ledger().t_min >= 1.0);

    for seed in 0..5 {
        let a0 = h.add(&random_sparse_hamiltonian(2, 2, 40 + seed, 1.0).unwrap().scale(0.1));
        let mut oracle = EvolutionOracle::new(h.clone(), 1.0).unwrap();
        let out = sql_learn(&mut oracle, &a0, 2, 4, 0.1, 0.05, seed, &LearnSettings::default()).unwrap();
        assert!(out.delta_h.linf_distance(&h.sub(&a0)) <= 0.025, "seed {seed}");
    }
}

#[test]
fn sampled_tomography_failure_rate() {
    let cfg = TomographyConfig::default();
    let (eps, delta, trials) = (0.1, 0.2, 40);
    let mut failures = 0;
    for seed in 0..trials {
        let w = random_sparse_hamiltonian(2, 2, seed, 1.0).unwrap();
        let u = dense::expm_i_sparse(&w, 0.4).unwrap();
        let truth = tomography::choi_amplitudes(&u).unwrap();
        let access = tomography::choi_access(&u, StateMode::Sampled, seed).unwrap();
        let res = tomography::sparse_tomo_linf(&access, 4, eps, delta, seed, &cfg).unwrap();
        let b0 = truth.get(&hamlearn::pauli::PauliLabel::identity(2));
        let aligned = truth.scale(b0.conj() / b0.norm());
        if res.coefficients.sub(&aligned).norms().linf > eps {
            failures += 1;
        }
    }
    assert!(failures as f64 <= delta * trials as f64);
}

#[test]
fn main_loop_single_qubit_reaches_target() {
    let h = SparseHamiltonian::from_strs(&[("Z", 0.5)]).unwrap();
    let eps = 2f64.powi(-6);
    let params = regime_params(1, 1, 1.0, None, Regime::LogSparse, 16384.0).unwrap();
    let mut oracle = EvolutionOracle::new(h.clone(), 1.0).unwrap();
    let (estimate, mut report) =
        main_learn(&mut oracle, 1, eps, &params, 0.05, 0, &LearnSettings::default(), BranchPolicy::Auto).unwrap();
    hamlearn::learner::attach_true_errors(&mut report, &h);
    assert!(estimate.linf_distance(&h) <= eps);
    assert!(report.halving_holds());
    assert_eq!(report.ledger.t_min_reported(), Some(1.0));
    assert!(report.support_within_m);
}

#[test]
fn main_loop_halves_on_random_instances() {
    let eps = 2f64.powi(-5);
    for seed in 0..4u64 {
        let n = 1 + (seed as usize % 2);
        let m = 1 + (seed as usize / 2);
        let h = random_sparse_hamiltonian(n, m, 500 + seed, 1.0).unwrap();
        let params = regime_params(m, n, 1.0, None, Regime::LogSparse, 16384.0).unwrap();
        let mut oracle = EvolutionOracle::new(h.clone(), 1.0).unwrap();
        let (estimate, mut report) =
            main_learn(&mut oracle, m, eps, &params, 0.05, seed, &LearnSettings::default(), BranchPolicy::Auto)
                .unwrap();
        hamlearn::learner::attach_true_errors(&mut report, &h);
        assert!(report.halving_holds(), "seed {seed}");
        assert!(estimate.linf_distance(&h) <= eps, "seed {seed}");
    }
}

#[test]
fn main_loop_near_zero_hamiltonian() {
    let h = SparseHamiltonian::from_strs(&[("XY", 1e-9)]).unwrap();
    let params = regime_params(1, 2, 1.0, None, Regime::LogSparse, 16384.0).unwrap();
    let mut oracle = EvolutionOracle::new(h.clone(), 1.0).unwrap();
    let (estimate, _) =
        main_learn(&mut oracle, 1, 0.1, &params, 0.05, 0, &LearnSettings::default(), BranchPolicy::Auto).unwrap();
    assert!(estimate.linf_distance(&h) <= 0.1);
}
