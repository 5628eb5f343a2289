use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{One, Zero};
use proptest::prelude::*;

use zne_core::circuit::Matrix2;
use zne_core::ensemble::{batch_jobs, JobLimits};
use zne_core::insertion::{fold, ReplicationVector};
use zne_core::sim::{exact_expectation, leading_order_expectation, output_distribution, simulate};
use zne_core::{Circuit, DensityMatrix, Gate, MitigationPlan, NoiseModel, Observable, QubitId};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn u3(theta: f64, phi: f64, lambda: f64) -> Matrix2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [
        [c(co, 0.0), -Complex64::from_polar(s, lambda)],
        [Complex64::from_polar(s, phi), Complex64::from_polar(co, phi + lambda)],
    ]
}

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    prop_oneof![
        (0..n, 1..n).prop_map(move |(a, d)| Gate::cnot(a, (a + d) % n)),
        (0..n, 0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64)
            .prop_map(|(q, t, p, l)| Gate::one_qubit(q, u3(t, p, l))),
    ]
}

/// Circuits on 2-3 qubits with at least one CNOT.
fn circuit_strategy(max_gates: usize) -> impl Strategy<Value = Circuit> {
    (2usize..=3)
        .prop_flat_map(move |n| {
            (
                Just(n),
                prop::collection::vec(any::<bool>(), n),
                (0..n, 1..n),
                prop::collection::vec(gate_strategy(n), 0..max_gates),
            )
        })
        .prop_map(|(n, init, (a, d), mut gates)| {
            let bits: String = init.iter().map(|&b| if b { '1' } else { '0' }).collect();
            gates.insert(0, Gate::cnot(a, (a + d) % n));
            Circuit::from_gates(n, &bits, gates).unwrap()
        })
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// `op` acting on qubit `q` of an `n`-qubit register (qubit 0 least significant).
fn embed(op: &DMatrix<Complex64>, q: usize, n: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::identity(1, 1);
    for k in (0..n).rev() {
        let factor = if k == q { op.clone() } else { DMatrix::identity(2, 2) };
        out = kron(&out, &factor);
    }
    out
}

fn paulis() -> [DMatrix<Complex64>; 4] {
    let z = Complex64::zero();
    let o = Complex64::one();
    let i = c(0.0, 1.0);
    [
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// Depolarizing as the Pauli twirl `(1-ε)ρ + ε/16 Σ P ρ P†` over the pair.
fn twirl_reference(rho: &DMatrix<Complex64>, k: usize, l: usize, n: usize, eps: f64) -> DMatrix<Complex64> {
    let ps = paulis();
    let mut acc = DMatrix::zeros(rho.nrows(), rho.ncols());
    for a in &ps {
        for b in &ps {
            let p = embed(a, k, n) * embed(b, l, n);
            acc += &p * rho * p.adjoint();
        }
    }
    rho * c(1.0 - eps, 0.0) + acc * c(eps / 16.0, 0.0)
}

fn damping_reference(rho: &DMatrix<Complex64>, q: usize, n: usize, gamma: f64) -> DMatrix<Complex64> {
    let z = Complex64::zero();
    let k0 = DMatrix::from_row_slice(2, 2, &[Complex64::one(), z, z, c((1.0 - gamma).sqrt(), 0.0)]);
    let k1 = DMatrix::from_row_slice(2, 2, &[z, c(gamma.sqrt(), 0.0), z, z]);
    let (k0, k1) = (embed(&k0, q, n), embed(&k1, q, n));
    &k0 * rho * k0.adjoint() + &k1 * rho * k1.adjoint()
}

/// A random full-rank state `A A† / Tr(A A†)`.
fn random_state_strategy(n: usize) -> impl Strategy<Value = DensityMatrix> {
    let dim = 1 << n;
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim * dim).prop_map(move |v| {
        let a = DMatrix::from_iterator(dim, dim, v.into_iter().map(|(r, i)| c(r, i)));
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::from_matrix(m / tr).unwrap()
    })
}

fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cnot_positions_match_gate_list(circuit in circuit_strategy(12)) {
        let positions = circuit.cnot_positions();
        prop_assert_eq!(positions.len(), circuit.cnot_count());
        prop_assert!(positions.iter().all(|&p| circuit.gates()[p].is_cnot()));
        prop_assert_eq!(
            circuit.gates().iter().filter(|g| g.is_cnot()).count(),
            positions.len()
        );
    }

    #[test]
    fn circuit_json_round_trips(circuit in circuit_strategy(8)) {
        let back = Circuit::from_json(&circuit.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, circuit);
    }

    #[test]
    fn noisy_evolution_stays_physical(
        circuit in circuit_strategy(10),
        eps in 0.0..0.3f64,
        t1 in 5.0..200.0f64,
    ) {
        let nm = NoiseModel::uniform(eps).unwrap()
            .with_damping(zne_core::sim::Damping::uniform(t1, 300.0).unwrap());
        let rho = simulate(&circuit, &nm).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(rho.hermiticity_defect() < 1e-12);
        prop_assert!(rho.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn depolarizing_matches_pauli_twirl(
        rho in random_state_strategy(3),
        pair in (0usize..3, 1usize..3),
        eps in 0.0..=1.0f64,
    ) {
        let (k, l) = (pair.0, (pair.0 + pair.1) % 3);
        let expected = twirl_reference(rho.matrix(), k, l, 3, eps);
        let mut got = rho.clone();
        got.apply_depolarizing((QubitId(k), QubitId(l)), eps).unwrap();
        prop_assert!(max_diff(got.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn amplitude_damping_matches_kraus(
        rho in random_state_strategy(2),
        q in 0usize..2,
        gamma in 0.0..=1.0f64,
    ) {
        let expected = damping_reference(rho.matrix(), q, 2, gamma);
        let mut got = rho.clone();
        got.apply_amplitude_damping(QubitId(q), gamma).unwrap();
        prop_assert!(max_diff(got.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn depolarizing_commutes_with_cnot_on_its_pair(
        rho in random_state_strategy(3),
        eps in 0.0..=1.0f64,
        flip in any::<bool>(),
    ) {
        let gate = if flip { Gate::cnot(2, 0) } else { Gate::cnot(0, 2) };
        let mut a = rho.clone();
        a.apply_gate(&gate).unwrap();
        a.apply_depolarizing((QubitId(0), QubitId(2)), eps).unwrap();
        let mut b = rho;
        b.apply_depolarizing((QubitId(0), QubitId(2)), eps).unwrap();
        b.apply_gate(&gate).unwrap();
        prop_assert!(max_diff(a.matrix(), b.matrix()) < 1e-12);
    }

    #[test]
    fn ground_state_is_a_damping_fixed_point(gamma in 0.0..=1.0f64, q in 0usize..3) {
        let mut rho = DensityMatrix::basis(3, 0).unwrap();
        rho.apply_amplitude_damping(QubitId(q), gamma).unwrap();
        prop_assert_eq!(rho, DensityMatrix::basis(3, 0).unwrap());
    }

    #[test]
    fn chain_matches_closed_form(n in 1usize..40, eps in 0.0..0.2f64, init in 0usize..4) {
        let bits = ["00", "10", "01", "11"][init];
        let circuit = Circuit::cnot_chain(n, bits).unwrap();
        let obs = Observable::ideal_target(&circuit).unwrap();
        let got = exact_expectation(&circuit, &NoiseModel::uniform(eps).unwrap(), &obs).unwrap();
        let keep = (1.0 - eps).powi(n as i32);
        prop_assert!((got - (keep + (1.0 - keep) / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn folding_preserves_the_ideal_output(circuit in circuit_strategy(8), fold_seed in any::<u64>()) {
        let n_c = circuit.cnot_count();
        let r: Vec<u32> = (0..n_c).map(|i| 1 + 2 * ((fold_seed >> (2 * (i % 32))) & 3) as u32).collect();
        let folded = fold(&circuit, &ReplicationVector::new(r.clone()).unwrap()).unwrap();
        prop_assert_eq!(folded.cnot_count() as u64, r.iter().map(|&x| u64::from(x)).sum::<u64>());
        let a = output_distribution(&circuit, &NoiseModel::noiseless()).unwrap();
        let b = output_distribution(&folded, &NoiseModel::noiseless()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn leading_order_error_is_second_order(
        circuit in circuit_strategy(8),
        eps in 0.0..0.02f64,
        bump in 0usize..3,
    ) {
        let n_c = circuit.cnot_count();
        let r: Vec<u32> = (0..n_c).map(|i| if i % 3 == bump { 3 } else { 1 }).collect();
        let folded = fold(&circuit, &ReplicationVector::new(r.clone()).unwrap()).unwrap();
        let nm = NoiseModel::uniform(eps).unwrap();
        let obs = Observable::BitValue;
        let exact = exact_expectation(&folded, &nm, &obs).unwrap();
        let leading = leading_order_expectation(&circuit, &nm, &r, &obs).unwrap();
        let s: f64 = r.iter().map(|&x| eps * f64::from(x)).sum();
        let bound = 1.5 * obs.range(circuit.n_qubits()) * s * s + 1e-12;
        prop_assert!((exact - leading).abs() <= bound, "{} vs {} (bound {})", exact, leading, bound);
    }

    #[test]
    fn plans_cancel_linear_noise(circuit in circuit_strategy(12), order in 1u32..4, pick in any::<u64>()) {
        let n_c = circuit.cnot_count();
        let list: Vec<usize> = (0..n_c).filter(|i| pick >> (i % 64) & 1 == 1).collect();
        let list = if list.is_empty() { vec![0] } else { list };
        let mut plans = vec![
            MitigationPlan::fiim(&circuit, order).unwrap(),
            MitigationPlan::riim(&circuit).unwrap(),
            MitigationPlan::liim_fiim(&circuit, &list).unwrap(),
            MitigationPlan::liim_riim(&circuit, &list).unwrap(),
        ];
        for s in 1..=n_c {
            plans.push(MitigationPlan::siim(&circuit, s).unwrap());
        }
        for plan in &plans {
            prop_assert_eq!(plan.coefficient_sum(), Rational64::one());
            for i in 0..n_c {
                let expected = if plan.method.targets(i) { Rational64::zero() } else { Rational64::one() };
                prop_assert_eq!(plan.linear_weight(i), expected);
            }
        }
    }

    #[test]
    fn batch_jobs_cover_demand_exactly(
        demands in prop::collection::vec(0u64..50_000, 0..200),
        max_shots in 1u64..10_000,
        max_circuits in 1usize..300,
    ) {
        let limits = JobLimits::new(max_shots, max_circuits).unwrap();
        let demands: Vec<(usize, u64)> = demands.into_iter().enumerate().collect();
        let jobs = batch_jobs(&demands, limits);
        let mut covered = vec![0u64; demands.len()];
        for job in &jobs {
            prop_assert!(!job.submissions.is_empty());
            prop_assert!(job.submissions.len() <= max_circuits);
            for s in &job.submissions {
                prop_assert!(s.shots >= 1 && s.shots <= max_shots);
                covered[s.circuit] += s.shots;
            }
        }
        for (c, shots) in &demands {
            prop_assert_eq!(covered[*c], *shots);
        }
    }
}
