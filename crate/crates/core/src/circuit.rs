//! Gate-level circuit representation.
//!
//! Only CNOT and generic one-qubit unitaries are modelled. Every circuit
//! starts from a computational basis state and ends in a full measurement
//! of the register.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `U U† = I` for one-qubit gates.
pub const UNITARY_TOLERANCE: f64 = 1e-12;

/// Row-major 2×2 complex matrix.
pub type Matrix2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QubitId(pub usize);

impl QubitId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

impl From<usize> for QubitId {
    fn from(value: usize) -> Self {
        QubitId(value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Cnot { control: QubitId, target: QubitId },
    OneQubit { qubit: QubitId, matrix: Matrix2 },
}

impl Gate {
    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot {
            control: QubitId(control),
            target: QubitId(target),
        }
    }

    pub fn one_qubit(qubit: usize, matrix: Matrix2) -> Self {
        Gate::OneQubit {
            qubit: QubitId(qubit),
            matrix,
        }
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    pub fn qubits(&self) -> Vec<QubitId> {
        match *self {
            Gate::Cnot { control, target } => vec![control, target],
            Gate::OneQubit { qubit, .. } => vec![qubit],
        }
    }

    /// Checks the gate against a register of `n_qubits`.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q.0 >= n_qubits {
                return Err(Error::InvalidGate(format!(
                    "{q} out of range for a {n_qubits}-qubit circuit"
                )));
            }
        }
        match self {
            Gate::Cnot { control, target } if control == target => Err(Error::InvalidGate(
                format!("CNOT control and target are both {control}"),
            )),
            Gate::OneQubit { matrix, .. } => check_unitary(matrix),
            _ => Ok(()),
        }
    }
}

fn check_unitary(m: &Matrix2) -> Result<()> {
    for i in 0..2 {
        for j in 0..2 {
            let entry: Complex64 = (0..2).map(|k| m[i][k] * m[j][k].conj()).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            let dev = (entry - Complex64::new(expected, 0.0)).norm();
            if !(dev <= UNITARY_TOLERANCE) {
                return Err(Error::InvalidGate(format!(
                    "one-qubit matrix is not unitary (|UU† - I| entry ({i},{j}) = {dev:e})"
                )));
            }
        }
    }
    Ok(())
}

/// Parses a bitstring written in qubit order (character `q` is qubit `q`)
/// into its basis index, qubit 0 being the least-significant bit.
pub fn bitstring_to_index(bits: &str, n_qubits: usize) -> Result<usize> {
    if bits.len() != n_qubits {
        return Err(Error::InvalidCircuit(format!(
            "bitstring `{bits}` has length {}, expected {n_qubits}",
            bits.len()
        )));
    }
    bits.chars().enumerate().try_fold(0usize, |acc, (q, ch)| match ch {
        '0' => Ok(acc),
        '1' => Ok(acc | (1 << q)),
        other => Err(Error::InvalidCircuit(format!(
            "bitstring `{bits}` contains `{other}`"
        ))),
    })
}

/// Inverse of [`bitstring_to_index`].
pub fn index_to_bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// An ordered gate list over `n_qubits` qubits with a basis-state input.
///
/// Construction validates every gate, so a `Circuit` value always satisfies
/// its invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::CircuitFile", into = "wire::CircuitFile")]
pub struct Circuit {
    n_qubits: usize,
    initial_state: String,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, initial_state: &str) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidCircuit("a circuit needs at least one qubit".into()));
        }
        bitstring_to_index(initial_state, n_qubits)?;
        Ok(Circuit {
            n_qubits,
            initial_state: initial_state.to_owned(),
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n_qubits: usize, initial_state: &str, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits, initial_state)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Builder form of [`Circuit::push`].
    pub fn with_gate(mut self, gate: Gate) -> Result<Self> {
        self.push(gate)?;
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn initial_state(&self) -> &str {
        &self.initial_state
    }

    pub fn initial_index(&self) -> usize {
        bitstring_to_index(&self.initial_state, self.n_qubits)
            .expect("initial state validated at construction")
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Gate indices of every CNOT, in execution order.
    pub fn cnot_positions(&self) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.is_cnot().then_some(i))
            .collect()
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cnot()).count()
    }

    /// Two-qubit chain alternating `CNOT(0,1)`, `CNOT(1,0)`, ...
    ///
    /// Two gates give the simple test circuit used for the chain studies;
    /// four gates with input `"10"` give the 4-CNOT circuit whose noiseless
    /// output is `|11⟩` (integer value 3).
    pub fn cnot_chain(n_cnots: usize, initial_state: &str) -> Result<Self> {
        if n_cnots == 0 {
            return Err(Error::InvalidCircuit("a CNOT chain needs at least one gate".into()));
        }
        let gates = (0..n_cnots)
            .map(|i| if i % 2 == 0 { Gate::cnot(0, 1) } else { Gate::cnot(1, 0) })
            .collect();
        Circuit::from_gates(2, initial_state, gates)
    }

    /// Three-qubit chain alternating CNOTs on pairs (0,1) and (1,2).
    pub fn pair_alternating_chain(n_cnots: usize, initial_state: &str) -> Result<Self> {
        if n_cnots == 0 {
            return Err(Error::InvalidCircuit("a CNOT chain needs at least one gate".into()));
        }
        let gates = (0..n_cnots)
            .map(|i| if i % 2 == 0 { Gate::cnot(0, 1) } else { Gate::cnot(1, 2) })
            .collect();
        Circuit::from_gates(3, initial_state, gates)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// On-disk JSON form of a circuit.
mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub struct CircuitFile {
        pub n_qubits: usize,
        pub initial_state: String,
        pub gates: Vec<GateRecord>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "type", rename_all = "lowercase")]
    pub enum GateRecord {
        Cnot { control: usize, target: usize },
        U1q { qubit: usize, matrix: [[[f64; 2]; 2]; 2] },
    }

    impl TryFrom<CircuitFile> for Circuit {
        type Error = Error;

        fn try_from(file: CircuitFile) -> Result<Self> {
            let gates = file
                .gates
                .into_iter()
                .map(|g| match g {
                    GateRecord::Cnot { control, target } => Gate::cnot(control, target),
                    GateRecord::U1q { qubit, matrix } => Gate::one_qubit(
                        qubit,
                        matrix.map(|row| row.map(|[re, im]| Complex64::new(re, im))),
                    ),
                })
                .collect();
            Circuit::from_gates(file.n_qubits, &file.initial_state, gates)
        }
    }

    impl From<Circuit> for CircuitFile {
        fn from(c: Circuit) -> Self {
            let gates = c
                .gates
                .into_iter()
                .map(|g| match g {
                    Gate::Cnot { control, target } => GateRecord::Cnot {
                        control: control.0,
                        target: target.0,
                    },
                    Gate::OneQubit { qubit, matrix } => GateRecord::U1q {
                        qubit: qubit.0,
                        matrix: matrix.map(|row| row.map(|z| [z.re, z.im])),
                    },
                })
                .collect();
            CircuitFile {
                n_qubits: c.n_qubits,
                initial_state: c.initial_state,
                gates,
            }
        }
    }
}
