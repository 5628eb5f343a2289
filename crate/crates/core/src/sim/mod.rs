//! Exact density-matrix simulation of noisy CNOT circuits.
//!
//! Each CNOT is applied ideally, followed by two-qubit depolarizing noise on
//! its pair and, when the model carries damping, amplitude damping on every
//! qubit for the CNOT's duration. One-qubit gates are ideal and take no time.

mod density;
mod noise;

use serde::{Deserialize, Serialize};

pub use density::{DensityMatrix, HERMITIAN_TOLERANCE, MAX_QUBITS, PSD_TOLERANCE, TRACE_TOLERANCE};
pub use noise::{damping_gamma, Damping, NoiseModel};

use crate::circuit::{bitstring_to_index, index_to_bitstring, Circuit, Gate, QubitId};
use crate::error::{Error, Result};

/// Measured quantity, evaluated on the final computational-basis readout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// The outcome read as an integer, qubit 0 least significant.
    BitValue,
    /// Probability of one specific bitstring (written in qubit order).
    TargetProbability(String),
}

impl Observable {
    /// Value of the observable for every basis index of an `n_qubits` register.
    pub fn outcome_values(&self, n_qubits: usize) -> Result<Vec<f64>> {
        let dim = 1usize << n_qubits;
        match self {
            Observable::BitValue => Ok((0..dim).map(|i| i as f64).collect()),
            Observable::TargetProbability(bits) => {
                let target = bitstring_to_index(bits, n_qubits)?;
                Ok((0..dim).map(|i| if i == target { 1.0 } else { 0.0 }).collect())
            }
        }
    }

    /// Largest minus smallest outcome value.
    pub fn range(&self, n_qubits: usize) -> f64 {
        match self {
            Observable::BitValue => ((1usize << n_qubits) - 1) as f64,
            Observable::TargetProbability(_) => 1.0,
        }
    }

    /// Target-probability observable for the circuit's noiseless output.
    pub fn ideal_target(circuit: &Circuit) -> Result<Self> {
        Ok(Observable::TargetProbability(ideal_bitstring(circuit)?))
    }
}

/// Most likely outcome of the noiseless circuit.
pub fn ideal_bitstring(circuit: &Circuit) -> Result<String> {
    let probs = simulate(circuit, &NoiseModel::noiseless())?.probabilities()?;
    let best = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(index_to_bitstring(best, circuit.n_qubits()))
}

/// One noisy CNOT: ideal gate, depolarizing on the pair, then damping on
/// every qubit.
fn apply_noisy_gate(rho: &mut DensityMatrix, gate: &Gate, nm: &NoiseModel) -> Result<()> {
    rho.apply_gate(gate)?;
    if let Gate::Cnot { control, target } = *gate {
        rho.apply_depolarizing((control, target), nm.epsilon(control, target)?)?;
        if let Some(damping) = nm.damping() {
            for q in 0..rho.n_qubits() {
                rho.apply_amplitude_damping(QubitId(q), damping.gamma(QubitId(q))?)?;
            }
        }
    }
    Ok(())
}

/// Evolves the circuit's initial basis state through its gates under `nm`.
pub fn simulate(circuit: &Circuit, nm: &NoiseModel) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::basis(circuit.n_qubits(), circuit.initial_index())?;
    for gate in circuit.gates() {
        apply_noisy_gate(&mut rho, gate, nm)?;
    }
    rho.check_integrity()?;
    Ok(rho)
}

/// Measurement distribution of the simulated circuit.
pub fn output_distribution(circuit: &Circuit, nm: &NoiseModel) -> Result<Vec<f64>> {
    simulate(circuit, nm)?.probabilities()
}

/// `Σ_b p_b · obs(b)` over the diagonal of `rho`.
pub fn expectation(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    let values = obs.outcome_values(rho.n_qubits())?;
    let diag = rho.matrix().diagonal();
    Ok(values.iter().zip(diag.iter()).map(|(v, p)| v * p.re).sum())
}

pub fn exact_expectation(circuit: &Circuit, nm: &NoiseModel, obs: &Observable) -> Result<f64> {
    expectation(&simulate(circuit, nm)?, obs)
}

fn noiseless_with_mixed_pair(circuit: &Circuit, mixed_gate: Option<usize>) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::basis(circuit.n_qubits(), circuit.initial_index())?;
    for (i, gate) in circuit.gates().iter().enumerate() {
        rho.apply_gate(gate)?;
        if Some(i) == mixed_gate {
            if let Gate::Cnot { control, target } = *gate {
                rho.apply_depolarizing((control, target), 1.0)?;
            }
        }
    }
    Ok(rho)
}

/// First-order depolarizing prediction for the circuit with its `i`-th CNOT
/// replicated `replication[i]` times:
///
/// `(1 - Σ ε_i r_i) E_ex + Σ ε_i r_i E[ρ_i]`
///
/// where `ρ_i` is the noiseless circuit with the `i`-th CNOT's pair replaced
/// by the maximally mixed state. Damping is not part of the expansion.
pub fn leading_order_expectation(
    circuit: &Circuit,
    nm: &NoiseModel,
    replication: &[u32],
    obs: &Observable,
) -> Result<f64> {
    let positions = circuit.cnot_positions();
    if replication.len() != positions.len() {
        return Err(Error::InvalidReplication(format!(
            "{} entries for {} CNOTs",
            replication.len(),
            positions.len()
        )));
    }
    if let Some(bad) = replication.iter().find(|&&r| r == 0 || r % 2 == 0) {
        return Err(Error::InvalidReplication(format!(
            "entry {bad} is not an odd positive integer"
        )));
    }
    let exact = expectation(&noiseless_with_mixed_pair(circuit, None)?, obs)?;
    let mut weight_total = 0.0;
    let mut correction = 0.0;
    for (&pos, &r) in positions.iter().zip(replication) {
        let Gate::Cnot { control, target } = circuit.gates()[pos] else {
            unreachable!("cnot_positions only returns CNOTs");
        };
        let weight = nm.epsilon(control, target)? * f64::from(r);
        if weight == 0.0 {
            continue;
        }
        let mixed = expectation(&noiseless_with_mixed_pair(circuit, Some(pos))?, obs)?;
        weight_total += weight;
        correction += weight * mixed;
    }
    Ok((1.0 - weight_total) * exact + correction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_ideal_probability(n: i32, eps: f64) -> f64 {
        let keep = (1.0 - eps).powi(n);
        keep + (1.0 - keep) / 4.0
    }

    #[test]
    fn single_noisy_cnot_bit_value() {
        let c = Circuit::cnot_chain(1, "11").unwrap();
        let nm = NoiseModel::uniform(0.01).unwrap();
        let v = exact_expectation(&c, &nm, &Observable::BitValue).unwrap();
        assert!((v - 1.005).abs() < 1e-14, "{v}");
    }

    #[test]
    fn noiseless_four_cnot_circuit_gives_three() {
        let c = Circuit::cnot_chain(4, "10").unwrap();
        let v = exact_expectation(&c, &NoiseModel::noiseless(), &Observable::BitValue).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(ideal_bitstring(&c).unwrap(), "11");
    }

    #[test]
    fn two_cnot_chain_closed_form() {
        let c = Circuit::cnot_chain(2, "11").unwrap();
        let obs = Observable::ideal_target(&c).unwrap();
        let v = exact_expectation(&c, &NoiseModel::uniform(0.01).unwrap(), &obs).unwrap();
        assert!((v - 0.985075).abs() < 1e-12);

        let probs = output_distribution(&c, &NoiseModel::uniform(0.02).unwrap()).unwrap();
        let ideal = bitstring_to_index(&ideal_bitstring(&c).unwrap(), 2).unwrap();
        let p_ideal = chain_ideal_probability(2, 0.02);
        let p_other = (1.0 - p_ideal) / 3.0;
        for (i, p) in probs.iter().enumerate() {
            let expected = if i == ideal { p_ideal } else { p_other };
            assert!((p - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn expectation_examples() {
        let rho = DensityMatrix::basis(2, 3).unwrap();
        assert_eq!(expectation(&rho, &Observable::BitValue).unwrap(), 3.0);
        let t = Observable::TargetProbability("11".into());
        assert_eq!(expectation(&rho, &t).unwrap(), 1.0);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert_eq!(expectation(&mixed, &Observable::BitValue).unwrap(), 1.5);
        let wrong = Observable::TargetProbability("1".into());
        assert!(expectation(&rho, &wrong).is_err());
    }

    #[test]
    fn damping_only_curve_is_below_one() {
        let c = Circuit::cnot_chain(10, "11").unwrap();
        let obs = Observable::ideal_target(&c).unwrap();
        let nm = NoiseModel::noiseless().with_damping(Damping::uniform(50.0, 200.0).unwrap());
        let v = exact_expectation(&c, &nm, &obs).unwrap();
        assert!(v < 1.0 && v > 0.9);
    }

    #[test]
    fn leading_order_for_two_cnot_chain() {
        let c = Circuit::cnot_chain(2, "00").unwrap();
        let obs = Observable::ideal_target(&c).unwrap();
        let eps = 0.003;
        let nm = NoiseModel::uniform(eps).unwrap();
        let v = leading_order_expectation(&c, &nm, &[1, 1], &obs).unwrap();
        assert!((v - (1.0 - 1.5 * eps)).abs() < 1e-14);
        let zero = leading_order_expectation(&c, &NoiseModel::noiseless(), &[3, 1], &obs).unwrap();
        assert_eq!(zero, 1.0);
    }

    #[test]
    fn leading_order_rejects_bad_replication() {
        let c = Circuit::cnot_chain(2, "00").unwrap();
        let nm = NoiseModel::uniform(0.01).unwrap();
        let obs = Observable::BitValue;
        assert!(leading_order_expectation(&c, &nm, &[1], &obs).is_err());
        assert!(leading_order_expectation(&c, &nm, &[1, 2], &obs).is_err());
        assert!(leading_order_expectation(&c, &nm, &[0, 1], &obs).is_err());
    }

    #[test]
    fn missing_pair_rate_is_an_error() {
        let c = Circuit::cnot_chain(2, "00").unwrap();
        let nm = NoiseModel::default();
        assert!(simulate(&c, &nm).is_err());
    }
}
