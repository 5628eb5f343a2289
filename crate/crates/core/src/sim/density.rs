use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::circuit::{Gate, Matrix2, QubitId};
use crate::error::{Error, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 10;

pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Dense `2^n × 2^n` density matrix. Basis index `i` has qubit `q` in state
/// `(i >> q) & 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// `|index⟩⟨index|` on `n_qubits` qubits.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidCircuit(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(index, index)] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix { n_qubits, rho })
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        let rho = DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
        Ok(DensityMatrix { n_qubits, rho })
    }

    /// Wraps an explicit matrix after checking trace and Hermiticity.
    pub fn from_matrix(rho: DMatrix<Complex64>) -> Result<Self> {
        let dim = rho.nrows();
        if dim != rho.ncols() || !dim.is_power_of_two() || dim < 2 {
            return Err(Error::Integrity(format!(
                "density matrix must be square with power-of-two dimension, got {}×{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_register(n_qubits)?;
        let dm = DensityMatrix { n_qubits, rho };
        dm.check_integrity()?;
        Ok(dm)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Largest `|ρ_ij - conj(ρ_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Trace and Hermiticity checks; positivity too in debug builds.
    pub fn check_integrity(&self) -> Result<()> {
        let tr = self.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOLERANCE && tr.im.abs() <= TRACE_TOLERANCE) {
            return Err(Error::Integrity(format!("trace is {tr}, expected 1")));
        }
        let herm = self.hermiticity_defect();
        if !(herm <= HERMITIAN_TOLERANCE) {
            return Err(Error::Integrity(format!("hermiticity defect {herm:e}")));
        }
        if cfg!(debug_assertions) {
            let min = self.min_eigenvalue();
            if !(min >= -PSD_TOLERANCE) {
                return Err(Error::Integrity(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(())
    }

    fn check_qubit(&self, q: QubitId) -> Result<usize> {
        if q.0 >= self.n_qubits {
            return Err(Error::InvalidGate(format!(
                "{q} out of range for a {}-qubit state",
                self.n_qubits
            )));
        }
        Ok(q.0)
    }

    /// `ρ → U ρ U†` for one ideal gate.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match *gate {
            Gate::Cnot { control, target } => {
                self.apply_cnot(control.0, target.0);
                Ok(())
            }
            Gate::OneQubit { qubit, ref matrix } => {
                self.apply_one_qubit(qubit.0, matrix);
                Ok(())
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let dim = self.dim();
        let flip = |i: usize| if i >> control & 1 == 1 { i ^ (1 << target) } else { i };
        let old = std::mem::replace(&mut self.rho, DMatrix::zeros(dim, dim));
        for j in 0..dim {
            let pj = flip(j);
            for i in 0..dim {
                self.rho[(i, j)] = old[(flip(i), pj)];
            }
        }
    }

    fn apply_one_qubit(&mut self, q: usize, u: &Matrix2) {
        let dim = self.dim();
        let bit = 1usize << q;
        // U ρ
        for j in 0..dim {
            for i in (0..dim).filter(|i| i & bit == 0) {
                let a = self.rho[(i, j)];
                let b = self.rho[(i | bit, j)];
                self.rho[(i, j)] = u[0][0] * a + u[0][1] * b;
                self.rho[(i | bit, j)] = u[1][0] * a + u[1][1] * b;
            }
        }
        // (U ρ) U†
        for j in (0..dim).filter(|j| j & bit == 0) {
            for i in 0..dim {
                let a = self.rho[(i, j)];
                let b = self.rho[(i, j | bit)];
                self.rho[(i, j)] = a * u[0][0].conj() + b * u[0][1].conj();
                self.rho[(i, j | bit)] = a * u[1][0].conj() + b * u[1][1].conj();
            }
        }
    }

    /// Two-qubit depolarizing channel on `(k, l)`:
    /// `ρ → (1-ε) ρ + ε Tr_kl(ρ) ⊗ I_kl / 4`.
    pub fn apply_depolarizing(&mut self, pair: (QubitId, QubitId), epsilon: f64) -> Result<()> {
        check_probability("depolarizing epsilon", epsilon)?;
        let k = self.check_qubit(pair.0)?;
        let l = self.check_qubit(pair.1)?;
        if k == l {
            return Err(Error::InvalidNoise(format!(
                "depolarizing pair needs two distinct qubits, got ({k}, {l})"
            )));
        }
        if epsilon == 0.0 {
            return Ok(());
        }
        let dim = self.dim();
        let mask = (1usize << k) | (1usize << l);
        let patterns = [0, 1 << k, 1 << l, mask];
        let keep = Complex64::new(1.0 - epsilon, 0.0);
        let mix = Complex64::new(epsilon / 4.0, 0.0);
        let old = self.rho.clone();
        for j in 0..dim {
            let j_rest = j & !mask;
            for i in 0..dim {
                let mut value = keep * old[(i, j)];
                if i & mask == j & mask {
                    let i_rest = i & !mask;
                    let reduced: Complex64 = patterns
                        .iter()
                        .map(|&p| old[(i_rest | p, j_rest | p)])
                        .sum();
                    value += mix * reduced;
                }
                self.rho[(i, j)] = value;
            }
        }
        Ok(())
    }

    /// Single-qubit amplitude damping with Kraus operators
    /// `K0 = diag(1, √(1-γ))`, `K1 = √γ |0⟩⟨1|`.
    pub fn apply_amplitude_damping(&mut self, q: QubitId, gamma: f64) -> Result<()> {
        check_probability("damping gamma", gamma)?;
        let q = self.check_qubit(q)?;
        if gamma == 0.0 {
            return Ok(());
        }
        let dim = self.dim();
        let bit = 1usize << q;
        let shrink = (1.0 - gamma).sqrt();
        for j in (0..dim).filter(|j| j & bit == 0) {
            for i in (0..dim).filter(|i| i & bit == 0) {
                let (i1, j1) = (i | bit, j | bit);
                let r11 = self.rho[(i1, j1)];
                self.rho[(i, j)] += r11 * gamma;
                self.rho[(i, j1)] *= shrink;
                self.rho[(i1, j)] *= shrink;
                self.rho[(i1, j1)] = r11 * (1.0 - gamma);
            }
        }
        Ok(())
    }

    /// Measurement distribution over basis indices.
    ///
    /// Diagonal entries within `1e-10` outside `[0, 1]` are clamped; the
    /// vector is then renormalised. Larger deviations, or a diagonal sum off
    /// by more than `1e-8`, are integrity failures.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let mut probs = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let p = self.rho[(i, i)].re;
            if !(-PSD_TOLERANCE..=1.0 + PSD_TOLERANCE).contains(&p) {
                return Err(Error::Integrity(format!("diagonal entry {i} is {p}")));
            }
            probs.push(p.clamp(0.0, 1.0));
        }
        let total: f64 = probs.iter().sum();
        if !((total - 1.0).abs() <= 1e-8) {
            return Err(Error::Integrity(format!("diagonal sums to {total}")));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(probs)
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::InvalidCircuit(format!(
            "register of {n_qubits} qubits outside the supported 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

pub(crate) fn check_probability(what: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidNoise(format!("{what} = {value} is outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(i: usize) -> QubitId {
        QubitId(i)
    }

    #[test]
    fn cnot_truth_table() {
        // q0 = 1, q1 = 1 → control q0 flips q1 → index 1
        let mut rho = DensityMatrix::basis(2, 3).unwrap();
        rho.apply_gate(&Gate::cnot(0, 1)).unwrap();
        assert_eq!(rho, DensityMatrix::basis(2, 1).unwrap());
        // control 0 leaves the target alone
        let mut rho = DensityMatrix::basis(2, 2).unwrap();
        rho.apply_gate(&Gate::cnot(0, 1)).unwrap();
        assert_eq!(rho, DensityMatrix::basis(2, 2).unwrap());
    }

    #[test]
    fn double_cnot_is_identity() {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut start = DensityMatrix::basis(2, 0).unwrap();
        start.apply_gate(&Gate::one_qubit(0, [[h, h], [h, -h]])).unwrap();
        let mut twice = start.clone();
        twice.apply_gate(&Gate::cnot(0, 1)).unwrap();
        twice.apply_gate(&Gate::cnot(0, 1)).unwrap();
        assert!((twice.matrix() - start.matrix()).camax() <= 1e-12);
    }

    #[test]
    fn depolarizing_extremes() {
        let mut rho = DensityMatrix::basis(2, 2).unwrap();
        let before = rho.clone();
        rho.apply_depolarizing((q(0), q(1)), 0.0).unwrap();
        assert_eq!(rho, before);
        rho.apply_depolarizing((q(1), q(0)), 1.0).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((rho.matrix() - mixed.matrix()).camax() <= 1e-15);
    }

    #[test]
    fn depolarizing_rejects_bad_input() {
        let mut rho = DensityMatrix::basis(2, 0).unwrap();
        assert!(rho.apply_depolarizing((q(0), q(1)), 1.5).is_err());
        assert!(rho.apply_depolarizing((q(0), q(1)), -0.1).is_err());
        assert!(rho.apply_depolarizing((q(0), q(0)), 0.1).is_err());
        assert!(rho.apply_depolarizing((q(0), q(2)), 0.1).is_err());
    }

    #[test]
    fn damping_relaxes_excited_state() {
        let mut rho = DensityMatrix::basis(1, 1).unwrap();
        rho.apply_amplitude_damping(q(0), 0.25).unwrap();
        let p = rho.probabilities().unwrap();
        assert!((p[1] - 0.75).abs() < 1e-15);
        assert!((p[0] - 0.25).abs() < 1e-15);

        let mut ground = DensityMatrix::basis(1, 0).unwrap();
        ground.apply_amplitude_damping(q(0), 0.7).unwrap();
        assert_eq!(ground, DensityMatrix::basis(1, 0).unwrap());

        assert!(rho.apply_amplitude_damping(q(0), 1.2).is_err());
    }

    #[test]
    fn probabilities_of_basis_and_mixed_states() {
        let rho = DensityMatrix::basis(2, 1).unwrap();
        assert_eq!(rho.probabilities().unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert_eq!(mixed.probabilities().unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn integrity_failures_are_reported() {
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 0)] = Complex64::new(0.9, 0.0);
        let err = DensityMatrix::from_matrix(m).unwrap_err();
        assert!(err.is_integrity());

        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::from_matrix(m).unwrap_err().is_integrity());
    }

    #[test]
    fn register_cap() {
        assert!(DensityMatrix::basis(MAX_QUBITS + 1, 0).is_err());
        assert!(DensityMatrix::basis(0, 0).is_err());
    }
}
