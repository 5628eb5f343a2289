//! Identity-insertion mitigation plans.
//!
//! Folding replaces a CNOT by `r = 2n + 1` copies of itself: the noiseless
//! action is unchanged but the gate's noise exposure is multiplied by `r`.
//! A [`MitigationPlan`] is a list of folded circuits with rational weights
//! chosen so that the weighted sum of their expectations cancels the noise to
//! first order (or higher, for Richardson FIIM).
//!
//! Lists and sets are given as CNOT ordinals (0 is the first CNOT of the
//! circuit), not as gate indices.

use std::collections::BTreeSet;
use std::ops::Deref;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};

/// Per-CNOT copy counts; every entry is odd and at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct ReplicationVector(Vec<u32>);

impl ReplicationVector {
    pub fn new(r: Vec<u32>) -> Result<Self> {
        if let Some(bad) = r.iter().find(|&&x| x % 2 == 0) {
            return Err(Error::InvalidReplication(format!(
                "replication {bad} is not an odd positive integer"
            )));
        }
        Ok(ReplicationVector(r))
    }

    pub fn uniform(n_cnots: usize, r: u32) -> Result<Self> {
        ReplicationVector::new(vec![r; n_cnots])
    }

    /// All ones except `r` at the listed CNOT ordinals.
    pub fn with_folded(n_cnots: usize, folded: impl IntoIterator<Item = usize>, r: u32) -> Result<Self> {
        let mut v = vec![1; n_cnots];
        for i in folded {
            v[i] = r;
        }
        ReplicationVector::new(v)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&r| u64::from(r)).sum()
    }

    pub fn is_nominal(&self) -> bool {
        self.0.iter().all(|&r| r == 1)
    }
}

impl Deref for ReplicationVector {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl TryFrom<Vec<u32>> for ReplicationVector {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        ReplicationVector::new(v)
    }
}

impl From<ReplicationVector> for Vec<u32> {
    fn from(r: ReplicationVector) -> Self {
        r.0
    }
}

/// Replaces the `i`-th CNOT by `r[i]` consecutive copies.
pub fn fold(circuit: &Circuit, r: &ReplicationVector) -> Result<Circuit> {
    let n_c = circuit.cnot_count();
    if r.len() != n_c {
        return Err(Error::InvalidReplication(format!(
            "{} entries for a circuit with {n_c} CNOTs",
            r.len()
        )));
    }
    let mut gates = Vec::with_capacity(circuit.gates().len() + (r.total() as usize).saturating_sub(n_c));
    let mut ordinal = 0;
    for gate in circuit.gates() {
        if let Gate::Cnot { .. } = gate {
            gates.extend(std::iter::repeat_n(gate.clone(), r[ordinal] as usize));
            ordinal += 1;
        } else {
            gates.push(gate.clone());
        }
    }
    Circuit::from_gates(circuit.n_qubits(), circuit.initial_state(), gates)
}

/// Replaces every CNOT by `k` consecutive copies.
pub fn deepen(circuit: &Circuit, k: u32) -> Result<Circuit> {
    fold(circuit, &ReplicationVector::uniform(circuit.cnot_count(), k)?)
}

/// Weights `c` solving `Σ c_i = 1` and `Σ c_i r_i^m = 0` for
/// `m = 1 .. len-1`, i.e. polynomial extrapolation of the samples at
/// replication `r_i` to `r = 0`. Solved exactly by Gaussian elimination on
/// the Vandermonde system.
pub fn richardson_coefficients(r_values: &[u32]) -> Result<Vec<Rational64>> {
    let n = r_values.len();
    if n == 0 {
        return Err(Error::InvalidPlan("at least one replication value is needed".into()));
    }
    if r_values.iter().collect::<BTreeSet<_>>().len() != n {
        return Err(Error::Singular(format!("duplicate replication values in {r_values:?}")));
    }
    // augmented matrix [V | e_0], row m holds r_i^m
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|m| {
            let mut row: Vec<BigRational> = r_values
                .iter()
                .map(|&r| BigRational::from_integer(BigInt::from(r).pow(m as u32)))
                .collect();
            row.push(if m == 0 { BigRational::one() } else { BigRational::zero() });
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&row| !a[row][col].is_zero())
            .ok_or_else(|| Error::Singular(format!("Vandermonde system for {r_values:?}")))?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for entry in a[col].iter_mut() {
            *entry *= &inv;
        }
        for row in 0..n {
            if row != col && !a[row][col].is_zero() {
                let factor = a[row][col].clone();
                for k in col..=n {
                    let delta = &factor * &a[col][k];
                    a[row][k] -= delta;
                }
            }
        }
    }
    a.iter()
        .map(|row| {
            let c = &row[n];
            match (c.numer().to_i64(), c.denom().to_i64()) {
                (Some(num), Some(den)) => Ok(Rational64::new(num, den)),
                _ => Err(Error::InvalidPlan(format!(
                    "coefficient {c} does not fit 64-bit rationals"
                ))),
            }
        })
        .collect()
}

/// How a plan was constructed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanMethod {
    /// The nominal circuit alone, coefficient 1.
    Unmitigated,
    /// Uniform folding with Richardson weights over `r = 1, 3, …, 2k+1`.
    Fiim { order: u32 },
    /// One auxiliary per CNOT, each tripling that single gate.
    Riim,
    /// One auxiliary tripling every listed CNOT.
    LiimFiim { list: Vec<usize> },
    /// One auxiliary per listed CNOT.
    LiimRiim { list: Vec<usize> },
    /// One auxiliary per contiguous set of CNOTs.
    Siim { partition: Vec<Vec<usize>> },
}

impl PlanMethod {
    /// Number of separately folded groups, the `n_s` of the shot-allocation
    /// rules. Methods with a single auxiliary count as one set.
    pub fn n_sets(&self, n_cnots: usize) -> usize {
        match self {
            PlanMethod::Unmitigated | PlanMethod::Fiim { .. } | PlanMethod::LiimFiim { .. } => 1,
            PlanMethod::Riim => n_cnots,
            PlanMethod::LiimRiim { list } => list.len(),
            PlanMethod::Siim { partition } => partition.len(),
        }
    }

    /// Whether the method cancels the linear noise term of CNOT `i`.
    pub fn targets(&self, i: usize) -> bool {
        match self {
            PlanMethod::Unmitigated => false,
            PlanMethod::Fiim { .. } | PlanMethod::Riim | PlanMethod::Siim { .. } => true,
            PlanMethod::LiimFiim { list } | PlanMethod::LiimRiim { list } => list.contains(&i),
        }
    }

    pub fn name(&self) -> String {
        match self {
            PlanMethod::Unmitigated => "none".into(),
            PlanMethod::Fiim { order } => format!("fiim{order}"),
            PlanMethod::Riim => "riim".into(),
            PlanMethod::LiimFiim { .. } => "liim-fiim".into(),
            PlanMethod::LiimRiim { .. } => "liim-riim".into(),
            PlanMethod::Siim { partition } => format!("siim{}", partition.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub label: String,
    #[serde(with = "rational_json")]
    pub coefficient: Rational64,
    pub replication: ReplicationVector,
    pub circuit: Circuit,
}

impl PlanEntry {
    fn new(base: &Circuit, label: String, coefficient: Rational64, replication: ReplicationVector) -> Result<Self> {
        let circuit = fold(base, &replication)?;
        Ok(PlanEntry {
            label,
            coefficient,
            replication,
            circuit,
        })
    }

    /// Same coefficient, replication and circuit, ignoring the label.
    pub fn same_term(&self, other: &PlanEntry) -> bool {
        self.coefficient == other.coefficient
            && self.replication == other.replication
            && self.circuit == other.circuit
    }

    pub fn coefficient_f64(&self) -> f64 {
        *self.coefficient.numer() as f64 / *self.coefficient.denom() as f64
    }
}

/// Weighted set of folded circuits whose combination estimates the
/// zero-noise expectation of `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationPlan {
    pub method: PlanMethod,
    pub base: Circuit,
    pub entries: Vec<PlanEntry>,
}

fn require_cnots(c: &Circuit) -> Result<usize> {
    match c.cnot_count() {
        0 => Err(Error::InvalidPlan("the circuit has no CNOT gates to fold".into())),
        n => Ok(n),
    }
}

fn check_list(c: &Circuit, list: &[usize]) -> Result<Vec<usize>> {
    let n_c = require_cnots(c)?;
    let set: BTreeSet<usize> = list.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::InvalidPlan("the CNOT list is empty".into()));
    }
    if let Some(&bad) = set.iter().find(|&&i| i >= n_c) {
        return Err(Error::InvalidPlan(format!(
            "CNOT ordinal {bad} out of range for {n_c} CNOTs"
        )));
    }
    Ok(set.into_iter().collect())
}

fn half() -> Rational64 {
    Rational64::new(1, 2)
}

impl MitigationPlan {
    pub fn unmitigated(c: &Circuit) -> Result<Self> {
        let nominal = ReplicationVector::uniform(c.cnot_count(), 1)?;
        Ok(MitigationPlan {
            method: PlanMethod::Unmitigated,
            base: c.clone(),
            entries: vec![PlanEntry::new(c, "nominal".into(), Rational64::one(), nominal)?],
        })
    }

    /// Richardson FIIM of the given order: replications `1, 3, …, 2k+1`.
    pub fn fiim(c: &Circuit, order: u32) -> Result<Self> {
        let n_c = require_cnots(c)?;
        if order == 0 {
            return Err(Error::InvalidPlan("FIIM order must be at least 1".into()));
        }
        let rs: Vec<u32> = (0..=order).map(|n| 2 * n + 1).collect();
        let coefficients = richardson_coefficients(&rs)?;
        let entries = rs
            .iter()
            .zip(coefficients)
            .map(|(&r, coeff)| {
                let label = if r == 1 { "nominal".to_string() } else { format!("fiim r={r}") };
                PlanEntry::new(c, label, coeff, ReplicationVector::uniform(n_c, r)?)
            })
            .collect::<Result<_>>()?;
        Ok(MitigationPlan {
            method: PlanMethod::Fiim { order },
            base: c.clone(),
            entries,
        })
    }

    /// `(2 + n)/2` times the nominal circuit minus half of each circuit in
    /// which one group of CNOTs is tripled.
    fn grouped(c: &Circuit, method: PlanMethod, groups: Vec<(String, Vec<usize>)>) -> Result<Self> {
        let n_c = require_cnots(c)?;
        let nominal_coeff = Rational64::from_integer(2 + groups.len() as i64) * half();
        let mut entries = vec![PlanEntry::new(
            c,
            "nominal".into(),
            nominal_coeff,
            ReplicationVector::uniform(n_c, 1)?,
        )?];
        for (label, group) in groups {
            let r = ReplicationVector::with_folded(n_c, group, 3)?;
            entries.push(PlanEntry::new(c, label, -half(), r)?);
        }
        Ok(MitigationPlan {
            method,
            base: c.clone(),
            entries,
        })
    }

    pub fn riim(c: &Circuit) -> Result<Self> {
        let n_c = require_cnots(c)?;
        let groups = (0..n_c).map(|i| (format!("riim cnot {i}"), vec![i])).collect();
        Self::grouped(c, PlanMethod::Riim, groups)
    }

    pub fn liim_fiim(c: &Circuit, list: &[usize]) -> Result<Self> {
        let list = check_list(c, list)?;
        let n_c = c.cnot_count();
        let entries = vec![
            PlanEntry::new(c, "nominal".into(), Rational64::new(3, 2), ReplicationVector::uniform(n_c, 1)?)?,
            PlanEntry::new(
                c,
                "liim-fiim list".into(),
                -half(),
                ReplicationVector::with_folded(n_c, list.iter().copied(), 3)?,
            )?,
        ];
        Ok(MitigationPlan {
            method: PlanMethod::LiimFiim { list },
            base: c.clone(),
            entries,
        })
    }

    pub fn liim_riim(c: &Circuit, list: &[usize]) -> Result<Self> {
        let list = check_list(c, list)?;
        let groups = list.iter().map(|&i| (format!("liim-riim cnot {i}"), vec![i])).collect();
        Self::grouped(c, PlanMethod::LiimRiim { list }, groups)
    }

    /// Contiguous sets of sizes differing by at most one; larger sets first.
    pub fn siim(c: &Circuit, n_sets: usize) -> Result<Self> {
        let n_c = require_cnots(c)?;
        if n_sets == 0 || n_sets > n_c {
            return Err(Error::InvalidPlan(format!(
                "SIIM needs 1..={n_c} sets, got {n_sets}"
            )));
        }
        let partition = contiguous_partition(n_c, n_sets);
        let groups = partition
            .iter()
            .enumerate()
            .map(|(s, set)| {
                let label = format!("siim set {s} (cnots {}-{})", set[0], set[set.len() - 1]);
                (label, set.clone())
            })
            .collect();
        Self::grouped(c, PlanMethod::Siim { partition }, groups)
    }

    pub fn n_cnots(&self) -> usize {
        self.base.cnot_count()
    }

    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.entries.iter().map(PlanEntry::coefficient_f64).collect()
    }

    /// `Σ_p c_p`.
    pub fn coefficient_sum(&self) -> Rational64 {
        self.entries.iter().map(|e| e.coefficient).sum()
    }

    /// `Σ_p c_p r_i^(p)`: the net linear noise weight left on CNOT `i`.
    pub fn linear_weight(&self, i: usize) -> Rational64 {
        self.entries
            .iter()
            .map(|e| e.coefficient * Rational64::from_integer(i64::from(e.replication[i])))
            .sum()
    }

    pub fn same_terms(&self, other: &MitigationPlan) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a.same_term(b))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Splits `0..n` into `sets` contiguous runs whose sizes differ by at most one.
pub fn contiguous_partition(n: usize, sets: usize) -> Vec<Vec<usize>> {
    let (base, extra) = (n / sets, n % sets);
    let mut start = 0;
    (0..sets)
        .map(|s| {
            let len = base + usize::from(s < extra);
            let run = (start..start + len).collect();
            start += len;
            run
        })
        .collect()
}

mod rational_json {
    use num_rational::Rational64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Fraction {
        num: i64,
        den: i64,
    }

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        Fraction {
            num: *r.numer(),
            den: *r.denom(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let f = Fraction::deserialize(d)?;
        if f.den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Rational64::new(f.num, f.den))
    }
}
