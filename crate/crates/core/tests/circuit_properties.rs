use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tlcu_core::engine::{run_evolution, EngineOptions};
use tlcu_core::hamiltonian::{apply_pauli_term, build_dense, parse_hamiltonian};
use tlcu_core::linalg::{random_state, spectral_norm};
use tlcu_core::operators::{apply_reflection, FlagRotation, JointState, LcuCircuit, PrepareUnitary};
use tlcu_core::oracle::{expm_hermitian, trace_distance};
use tlcu_core::taylor::taylor_table;
use tlcu_core::{Complex64, Limits};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Dense matrix of a state map on the joint space, one basis column at a time.
fn columns(m: usize, n: usize, flagged: bool, f: impl Fn(&mut JointState)) -> DMatrix<Complex64> {
    let dim = (if flagged { 2 } else { 1 }) * m << n;
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for x in 0..dim {
        let mut amps = vec![zero(); dim];
        amps[x] = Complex64::new(1.0, 0.0);
        let mut state = JointState::from_amplitudes(m, n, flagged, amps).unwrap();
        f(&mut state);
        for (row, v) in state.amplitudes().iter().enumerate() {
            out[(row, x)] = *v;
        }
    }
    out
}

fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let d = u.nrows();
    spectral_norm(&(u.adjoint() * u - DMatrix::<Complex64>::identity(d, d)))
}

#[test]
fn w_r_and_a_are_unitary() {
    let h = parse_hamiltonian("0.4 XY\n-0.35 ZI\n0.25 YY\n").unwrap();
    let lim = Limits::default();
    for (tau, order) in [(0.3, 2), (0.693, 3), (1.1, 3)] {
        let table = taylor_table(&h, tau, order, &lim).unwrap();
        let prep = PrepareUnitary::for_table(&table);
        let m = table.len();
        let plain = LcuCircuit::new(&table, &prep);
        let flag = FlagRotation::for_normalization(table.s().min(2.0)).unwrap();
        let flagged = LcuCircuit::new(&table, &prep).with_flag(flag);
        for (circuit, has_flag) in [(&plain, false), (&flagged, true)] {
            let w = columns(m, 2, has_flag, |s| circuit.apply_w(s, false).unwrap());
            let r = columns(m, 2, has_flag, apply_reflection);
            let a = columns(m, 2, has_flag, |s| circuit.apply_a(s).unwrap());
            for (name, u) in [("W", &w), ("R", &r), ("A", &a)] {
                let defect = unitarity_defect(u);
                assert!(defect <= 1e-12, "{name} tau={tau} flag={has_flag}: {defect:e}");
            }
            let w_dag = columns(m, 2, has_flag, |s| circuit.apply_w(s, true).unwrap());
            assert!(spectral_norm(&(w.adjoint() - w_dag)) <= 1e-12);
        }
    }
}

#[test]
fn kept_probability_approaches_one() {
    let h = parse_hamiltonian("0.6 XZ\n-0.3 YY\n0.45 ZI\n").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let psi = random_state(&mut rng, 4);
    let options = EngineOptions::default();
    let mut worst_leak = Vec::new();
    for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
        let run = run_evolution(&h, 2.0, eps, &psi, &options).unwrap();
        let worst = run
            .reports
            .iter()
            .map(|r| r.kept_probability)
            .fold(f64::INFINITY, f64::min);
        assert!(1.0 - worst <= 4.0 * eps, "eps={eps}: kept {worst}");
        worst_leak.push(1.0 - worst);
    }
    // the plans change with eps, so only the trend over decades is monotone
    assert!(worst_leak[0] > worst_leak[1] && worst_leak[1] > worst_leak[3]);
    assert!(worst_leak[3] < 1e-8);
}

#[test]
fn dense_hamiltonian_matches_term_sum() {
    let h = parse_hamiltonian("0.4 XYZ\n-0.35 ZIX\n0.25 YYI\n0.1 IIZ\n").unwrap();
    let dense = build_dense(&h, &Limits::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let psi = random_state(&mut rng, 8);
        let mut expected = vec![zero(); 8];
        for term in h.terms() {
            let image = apply_pauli_term(term, &psi).unwrap();
            for (e, v) in expected.iter_mut().zip(image) {
                *e += v * term.weight();
            }
        }
        let got = &dense * nalgebra::DVector::from_column_slice(&psi);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).norm() <= 1e-14);
        }
    }
}

#[test]
fn segment_reports_add_up() {
    let h = parse_hamiltonian("0.9 XX\n0.5 ZY\n-0.4 IZ\n").unwrap();
    let lim = Limits::default();
    let exact = expm_hermitian(&build_dense(&h, &lim).unwrap(), 3.3, &lim).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let psi = random_state(&mut rng, 4);
    let run = run_evolution(&h, 3.3, 1e-5, &psi, &EngineOptions::default()).unwrap();
    let dist = trace_distance(&run.final_state, &exact.apply(&psi)).unwrap();
    assert!(dist <= 1e-5, "{dist:e}");
    let sum: f64 = run.reports.iter().map(|r| r.post_projection_norm_deficit).sum();
    assert_eq!(sum, run.total_trace_distance_bound);
    assert!(run.reports.iter().all(|r| r.within_budget()));
    assert_eq!(run.reports.len(), run.plan.unwrap().segments);
}

fn pauli_string() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!['I', 'X', 'Y', 'Z']), 2)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulated_state_is_within_epsilon(
        terms in prop::collection::vec((-1.0f64..1.0, pauli_string()), 1..4),
        t in 0.05f64..3.0,
        exp in 2i32..9,
        seed in 0u64..1000,
    ) {
        let text: String = terms
            .iter()
            .filter(|(w, _)| w.abs() > 1e-3)
            .map(|(w, p)| format!("{w} {p}\n"))
            .collect();
        prop_assume!(!text.is_empty());
        let h = parse_hamiltonian(&text).unwrap();
        let eps = 10f64.powi(-exp);
        let lim = Limits::default();
        let exact = expm_hermitian(&build_dense(&h, &lim).unwrap(), t, &lim).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_state(&mut rng, h.dim());
        let run = run_evolution(&h, t, eps, &psi, &EngineOptions::default()).unwrap();
        let dist = trace_distance(&run.final_state, &exact.apply(&psi)).unwrap();
        prop_assert!(dist <= eps, "distance {} > {}", dist, eps);
    }
}
