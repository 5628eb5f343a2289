//! Shot sampling, per-circuit estimates and their weighted combination.
//!
//! Sampling draws each shot from the exact output distribution of the
//! simulator by inverse-CDF lookup. Every plan entry has its own RNG stream
//! derived from `(seed, entry index)`, so a run is reproducible regardless of
//! evaluation order, and runs that share a seed use common random numbers.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::circuit::{bitstring_to_index, index_to_bitstring, Circuit};
use crate::error::{Error, Result};
use crate::insertion::MitigationPlan;
use crate::rng::{derive_seed, keyed_rng};
use crate::sim::{output_distribution, NoiseModel, Observable};

/// The standard per-circuit shot budget.
pub const DEFAULT_SHOTS: u64 = 8192;

/// Measurement counts keyed by bitstring (qubit order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotResult {
    pub shots: u64,
    pub seed: u64,
    pub counts: BTreeMap<String, u64>,
}

/// An observable value with the variance of the estimator that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub variance: f64,
    pub shots_used: u64,
}

impl Estimate {
    /// A noise-free (infinite-shot) value.
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            variance: 0.0,
            shots_used: 0,
        }
    }

    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl Serialize for Estimate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Export {
            value: f64,
            std_error: f64,
            shots_used: u64,
        }
        Export {
            value: self.value,
            std_error: self.std_error(),
            shots_used: self.shots_used,
        }
        .serialize(s)
    }
}

/// Shots for the nominal circuit and for each auxiliary circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotBudget {
    pub nominal: u64,
    pub per_auxiliary: u64,
}

impl ShotBudget {
    pub fn new(nominal: u64, per_auxiliary: u64) -> Result<Self> {
        if nominal == 0 || per_auxiliary == 0 {
            return Err(Error::InvalidEstimate(format!(
                "shot budgets must be at least 1, got {nominal}/{per_auxiliary}"
            )));
        }
        Ok(ShotBudget {
            nominal,
            per_auxiliary,
        })
    }

    pub fn uniform(shots: u64) -> Result<Self> {
        ShotBudget::new(shots, shots)
    }

    /// Expands the budget to one shot count per plan entry.
    pub fn per_entry(&self, plan: &MitigationPlan) -> Vec<u64> {
        plan.entries
            .iter()
            .map(|e| if e.replication.is_nominal() { self.nominal } else { self.per_auxiliary })
            .collect()
    }
}

/// Rule for scaling a baseline budget to methods with several folded sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationMode {
    /// Matches the combined variance of FIIM-1 using the `(2 + n_s)/2`
    /// nominal weight: nominal × `((2 + n_s)/3)²`, auxiliaries × `n_s`.
    #[default]
    SelfConsistent,
    /// Fixed tabulated rule: nominal × `(1 + 2 n_s)²/9`, auxiliaries × `n_s`.
    Tabulated,
}

fn scale_ceil(shots: u64, num: u64, den: u64) -> u64 {
    (u128::from(shots) * u128::from(num)).div_ceil(u128::from(den)) as u64
}

/// Budget for a method with `n_sets` folded groups, relative to the FIIM-1
/// baseline `base`.
pub fn allocate_shots(n_sets: usize, base: ShotBudget, mode: AllocationMode) -> Result<ShotBudget> {
    if n_sets == 0 {
        return Err(Error::InvalidEstimate("method has zero folded sets".into()));
    }
    ShotBudget::new(base.nominal, base.per_auxiliary)?;
    let n = n_sets as u64;
    let nominal = match mode {
        AllocationMode::SelfConsistent => scale_ceil(base.nominal, (2 + n) * (2 + n), 9),
        AllocationMode::Tabulated => scale_ceil(base.nominal, (1 + 2 * n) * (1 + 2 * n), 9),
    };
    ShotBudget::new(nominal, base.per_auxiliary * n)
}

/// [`allocate_shots`] with `n_s` taken from the plan's method.
pub fn allocate_for_plan(plan: &MitigationPlan, base: ShotBudget, mode: AllocationMode) -> Result<ShotBudget> {
    allocate_shots(plan.method.n_sets(plan.n_cnots()), base, mode)
}

/// Draws `shots` outcomes from `probs` (indexed by basis state).
pub fn sample_distribution<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.random();
        let idx = cdf.partition_point(|&c| c <= u).min(last);
        counts[idx] += 1;
    }
    counts
}

fn counts_to_result(counts: &[u64], n_qubits: usize, shots: u64, seed: u64) -> ShotResult {
    let counts = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (index_to_bitstring(i, n_qubits), c))
        .collect();
    ShotResult { shots, seed, counts }
}

/// Simulates `circuit` under `nm` and samples `shots` full-register readouts.
pub fn sample(circuit: &Circuit, nm: &NoiseModel, shots: u64, seed: u64) -> Result<ShotResult> {
    if shots == 0 {
        return Err(Error::InvalidEstimate("shots must be at least 1".into()));
    }
    let probs = output_distribution(circuit, nm)?;
    let counts = sample_distribution(&probs, shots, &mut keyed_rng(seed, 0));
    Ok(counts_to_result(&counts, circuit.n_qubits(), shots, seed))
}

/// Mean and unbiased variance of the sample mean for counts over values.
fn mean_and_variance(weighted: impl Iterator<Item = (f64, u64)> + Clone, shots: u64) -> (f64, f64) {
    let n = shots as f64;
    let mean = weighted.clone().map(|(v, c)| v * c as f64).sum::<f64>() / n;
    if shots < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = weighted.map(|(v, c)| c as f64 * (v - mean).powi(2)).sum();
    (mean, ss / (n - 1.0) / n)
}

/// Sample mean of the observable and the variance of that mean
/// (`s² / shots` with the `n - 1` sample variance).
pub fn estimate_observable(sr: &ShotResult, obs: &Observable) -> Result<Estimate> {
    let total: u64 = sr.counts.values().sum();
    if sr.shots == 0 || total == 0 {
        return Err(Error::InvalidEstimate("no shots recorded".into()));
    }
    if total != sr.shots {
        return Err(Error::InvalidEstimate(format!(
            "counts sum to {total} but shots = {}",
            sr.shots
        )));
    }
    let n_qubits = sr.counts.keys().next().map(String::len).unwrap_or(0);
    let values = obs.outcome_values(n_qubits)?;
    let weighted = sr
        .counts
        .iter()
        .map(|(bits, &c)| Ok((values[bitstring_to_index(bits, n_qubits)?], c)))
        .collect::<Result<Vec<_>>>()?;
    let (value, variance) = mean_and_variance(weighted.iter().copied(), sr.shots);
    Ok(Estimate {
        value,
        variance,
        shots_used: sr.shots,
    })
}

/// `Σ c_p v_p` with variance `Σ c_p² var_p`.
pub fn combine(plan: &MitigationPlan, estimates: &[Estimate]) -> Result<Estimate> {
    if estimates.len() != plan.entries.len() {
        return Err(Error::InvalidEstimate(format!(
            "{} estimates for {} plan entries",
            estimates.len(),
            plan.entries.len()
        )));
    }
    Ok(combine_weighted(&plan.coefficients_f64(), estimates))
}

pub(crate) fn combine_weighted(coefficients: &[f64], estimates: &[Estimate]) -> Estimate {
    coefficients.iter().zip(estimates).fold(
        Estimate {
            value: 0.0,
            variance: 0.0,
            shots_used: 0,
        },
        |acc, (c, e)| Estimate {
            value: acc.value + c * e.value,
            variance: acc.variance + c * c * e.variance,
            shots_used: acc.shots_used + e.shots_used,
        },
    )
}

/// A plan with every entry simulated once, ready for repeated sampling.
#[derive(Debug, Clone)]
pub struct PreparedPlan {
    coefficients: Vec<f64>,
    distributions: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl PreparedPlan {
    pub fn new(plan: &MitigationPlan, nm: &NoiseModel, obs: &Observable) -> Result<Self> {
        PreparedPlan::per_entry(plan, &vec![nm; plan.entries.len()], obs)
    }

    /// Entry `p` is simulated under `models[p]`.
    pub fn per_entry(plan: &MitigationPlan, models: &[&NoiseModel], obs: &Observable) -> Result<Self> {
        if models.len() != plan.entries.len() {
            return Err(Error::InvalidEstimate(format!(
                "{} noise models for {} plan entries",
                models.len(),
                plan.entries.len()
            )));
        }
        let values = obs.outcome_values(plan.base.n_qubits())?;
        let distributions = plan
            .entries
            .iter()
            .zip(models)
            .map(|(e, nm)| output_distribution(&e.circuit, nm))
            .collect::<Result<_>>()?;
        Ok(PreparedPlan {
            coefficients: plan.coefficients_f64(),
            distributions,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Exact expectation of each entry.
    pub fn entry_values(&self) -> Vec<f64> {
        self.distributions
            .iter()
            .map(|p| p.iter().zip(&self.values).map(|(p, v)| p * v).sum())
            .collect()
    }

    /// Single-shot variance of the observable for each entry.
    pub fn entry_variances(&self) -> Vec<f64> {
        self.distributions
            .iter()
            .zip(self.entry_values())
            .map(|(p, mean)| p.iter().zip(&self.values).map(|(p, v)| p * (v - mean).powi(2)).sum())
            .collect()
    }

    /// Infinite-shot combined value.
    pub fn exact(&self) -> Estimate {
        let values: Vec<Estimate> = self.entry_values().into_iter().map(Estimate::exact).collect();
        combine_weighted(&self.coefficients, &values)
    }

    /// `Σ c_p² Var_p / shots_p` for a per-entry budget.
    pub fn predicted_variance(&self, budget: &[u64]) -> f64 {
        self.coefficients
            .iter()
            .zip(self.entry_variances())
            .zip(budget)
            .map(|((c, v), &n)| c * c * v / n as f64)
            .sum()
    }

    fn check_budget(&self, budget: &[u64]) -> Result<()> {
        if budget.len() != self.len() {
            return Err(Error::InvalidEstimate(format!(
                "budget has {} entries for a plan of {}",
                budget.len(),
                self.len()
            )));
        }
        if budget.contains(&0) {
            return Err(Error::InvalidEstimate("every entry needs at least one shot".into()));
        }
        Ok(())
    }

    /// Per-entry estimates from one seeded sampling pass.
    pub fn sample_entries(&self, budget: &[u64], seed: u64) -> Result<Vec<Estimate>> {
        self.check_budget(budget)?;
        Ok(self
            .distributions
            .iter()
            .zip(budget)
            .enumerate()
            .map(|(p, (probs, &shots))| {
                let mut rng = keyed_rng(derive_seed(seed, p as u64), 0);
                let counts = sample_distribution(probs, shots, &mut rng);
                let weighted = counts.iter().zip(&self.values).filter(|(c, _)| **c > 0).map(|(&c, &v)| (v, c));
                let (value, variance) = mean_and_variance(weighted, shots);
                Estimate {
                    value,
                    variance,
                    shots_used: shots,
                }
            })
            .collect())
    }

    pub fn run(&self, budget: &[u64], seed: u64) -> Result<Estimate> {
        let entries = self.sample_entries(budget, seed)?;
        Ok(combine_weighted(&self.coefficients, &entries))
    }
}

/// Samples every entry of the plan with its own keyed stream, estimates and
/// combines.
pub fn run_plan(
    plan: &MitigationPlan,
    nm: &NoiseModel,
    budget: &[u64],
    seed: u64,
    obs: &Observable,
) -> Result<Estimate> {
    PreparedPlan::new(plan, nm, obs)?.run(budget, seed)
}

/// Infinite-shot combined value of the plan.
pub fn exact_plan(plan: &MitigationPlan, nm: &NoiseModel, obs: &Observable) -> Result<Estimate> {
    Ok(PreparedPlan::new(plan, nm, obs)?.exact())
}

/// The per-entry estimates [`run_plan`] would produce, as full shot records.
pub fn sample_plan(plan: &MitigationPlan, nm: &NoiseModel, budget: &[u64], seed: u64) -> Result<Vec<ShotResult>> {
    if budget.len() != plan.entries.len() {
        return Err(Error::InvalidEstimate(format!(
            "budget has {} entries for a plan of {}",
            budget.len(),
            plan.entries.len()
        )));
    }
    plan.entries
        .iter()
        .zip(budget)
        .enumerate()
        .map(|(p, (e, &shots))| sample(&e.circuit, nm, shots, derive_seed(seed, p as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_cnot_chain() -> Circuit {
        Circuit::cnot_chain(4, "10").unwrap()
    }

    #[test]
    fn noiseless_sampling_is_deterministic() {
        let sr = sample(&four_cnot_chain(), &NoiseModel::noiseless(), DEFAULT_SHOTS, 3).unwrap();
        assert_eq!(sr.counts.len(), 1);
        assert_eq!(sr.counts["11"], DEFAULT_SHOTS);
        let est = estimate_observable(&sr, &Observable::BitValue).unwrap();
        assert_eq!(est.value, 3.0);
        assert_eq!(est.variance, 0.0);
    }

    #[test]
    fn same_seed_same_counts() {
        let nm = NoiseModel::uniform(0.05).unwrap();
        let a = sample(&four_cnot_chain(), &nm, 1000, 11).unwrap();
        let b = sample(&four_cnot_chain(), &nm, 1000, 11).unwrap();
        let c = sample(&four_cnot_chain(), &nm, 1000, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.counts.values().sum::<u64>(), 1000);
        assert!(sample(&four_cnot_chain(), &nm, 0, 1).is_err());
    }

    #[test]
    fn two_point_estimate() {
        let sr = ShotResult {
            shots: 2,
            seed: 0,
            counts: [("00".to_string(), 1), ("11".to_string(), 1)].into(),
        };
        let est = estimate_observable(&sr, &Observable::BitValue).unwrap();
        assert_eq!(est.value, 1.5);
        assert_eq!(est.variance, 2.25);
    }

    #[test]
    fn target_probability_is_frequency() {
        let sr = ShotResult {
            shots: 10,
            seed: 0,
            counts: [("11".to_string(), 7), ("01".to_string(), 3)].into(),
        };
        let est = estimate_observable(&sr, &Observable::TargetProbability("11".into())).unwrap();
        assert!((est.value - 0.7).abs() < 1e-15);
    }

    #[test]
    fn estimate_rejects_empty_or_inconsistent_counts() {
        let empty = ShotResult {
            shots: 0,
            seed: 0,
            counts: BTreeMap::new(),
        };
        assert!(estimate_observable(&empty, &Observable::BitValue).is_err());
        let bad = ShotResult {
            shots: 5,
            seed: 0,
            counts: [("0".to_string(), 4)].into(),
        };
        assert!(estimate_observable(&bad, &Observable::BitValue).is_err());
    }

    #[test]
    fn combine_fiim_weights() {
        let plan = MitigationPlan::fiim(&four_cnot_chain(), 1).unwrap();
        let est = combine(
            &plan,
            &[
                Estimate { value: 2.0, variance: 0.4, shots_used: 10 },
                Estimate { value: 1.0, variance: 0.8, shots_used: 20 },
            ],
        )
        .unwrap();
        assert_eq!(est.value, 1.5 * 2.0 - 0.5 * 1.0);
        assert!((est.variance - (2.25 * 0.4 + 0.25 * 0.8)).abs() < 1e-15);
        assert_eq!(est.shots_used, 30);
        assert!(combine(&plan, &[Estimate::exact(1.0)]).is_err());
    }

    #[test]
    fn combine_constant_values() {
        let plan = MitigationPlan::riim(&four_cnot_chain()).unwrap();
        let ests = vec![Estimate::exact(0.75); plan.entries.len()];
        assert!((combine(&plan, &ests).unwrap().value - 0.75).abs() < 1e-15);
        let ests: Vec<_> = (0..5)
            .map(|_| Estimate { value: 0.0, variance: 1.0, shots_used: 1 })
            .collect();
        // 3² · 1 + 4 · (1/2)² · 1
        assert_eq!(combine(&plan, &ests).unwrap().variance, 10.0);
    }

    #[test]
    fn allocation_rules() {
        let base = ShotBudget::uniform(8192).unwrap();
        for mode in [AllocationMode::SelfConsistent, AllocationMode::Tabulated] {
            assert_eq!(allocate_shots(1, base, mode).unwrap(), base);
        }
        let table = allocate_shots(4, base, AllocationMode::Tabulated).unwrap();
        assert_eq!(table, ShotBudget { nominal: 73728, per_auxiliary: 32768 });
        let fitted = allocate_shots(4, base, AllocationMode::SelfConsistent).unwrap();
        assert_eq!(fitted, ShotBudget { nominal: 32768, per_auxiliary: 32768 });
        // rounds up
        let odd = allocate_shots(2, ShotBudget::uniform(10).unwrap(), AllocationMode::SelfConsistent).unwrap();
        assert_eq!(odd.nominal, 18);
        assert!(allocate_shots(0, base, AllocationMode::SelfConsistent).is_err());
        assert!(ShotBudget::new(0, 1).is_err());

        let plan = MitigationPlan::riim(&four_cnot_chain()).unwrap();
        let b = allocate_for_plan(&plan, base, AllocationMode::SelfConsistent).unwrap();
        assert_eq!(b.per_entry(&plan), vec![32768, 32768, 32768, 32768, 32768]);
    }

    #[test]
    fn run_plan_is_reproducible() {
        let plan = MitigationPlan::fiim(&Circuit::cnot_chain(2, "00").unwrap(), 1).unwrap();
        let nm = NoiseModel::uniform(0.01).unwrap();
        let obs = Observable::BitValue;
        let a = run_plan(&plan, &nm, &[1000, 1000], 5, &obs).unwrap();
        let b = run_plan(&plan, &nm, &[1000, 1000], 5, &obs).unwrap();
        assert_eq!(a, b);
        assert!(run_plan(&plan, &nm, &[1000], 5, &obs).is_err());
    }

    #[test]
    fn run_plan_matches_sample_plan() {
        let plan = MitigationPlan::riim(&four_cnot_chain()).unwrap();
        let nm = NoiseModel::uniform(0.03).unwrap();
        let budget = vec![700; plan.entries.len()];
        let runs = sample_plan(&plan, &nm, &budget, 9).unwrap();
        let ests: Vec<_> = runs
            .iter()
            .map(|sr| estimate_observable(sr, &Observable::BitValue).unwrap())
            .collect();
        let via_records = combine(&plan, &ests).unwrap();
        let direct = run_plan(&plan, &nm, &budget, 9, &Observable::BitValue).unwrap();
        assert!((via_records.value - direct.value).abs() < 1e-12);
        assert!((via_records.variance - direct.variance).abs() < 1e-12);
    }

    #[test]
    fn noiseless_plan_run_is_exact() {
        let plan = MitigationPlan::fiim(&four_cnot_chain(), 2).unwrap();
        let est = run_plan(&plan, &NoiseModel::noiseless(), &[64, 64, 64], 1, &Observable::BitValue).unwrap();
        assert!((est.value - 3.0).abs() < 1e-12);
        assert_eq!(est.variance, 0.0);
    }

    #[test]
    fn estimate_export_shape() {
        let e = Estimate { value: 1.0, variance: 0.25, shots_used: 4 };
        let v = serde_json::to_value(e).unwrap();
        assert_eq!(v, serde_json::json!({"value": 1.0, "std_error": 0.5, "shots_used": 4}));
        let sr = ShotResult { shots: 1, seed: 2, counts: [("1".to_string(), 1)].into() };
        let v = serde_json::to_value(&sr).unwrap();
        assert_eq!(v, serde_json::json!({"shots": 1, "seed": 2, "counts": {"1": 1}}));
    }
}
