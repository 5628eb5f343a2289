use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Estimate, PreparedPlan};
use crate::insertion::MitigationPlan;
use crate::rng::derive_seed;
use crate::sim::{NoiseModel, Observable};

/// Infinite-shot evaluation or seeded sampling with a per-entry budget.
#[derive(Debug, Clone, PartialEq)]
pub enum Execution {
    Exact,
    Sampled { budget: Vec<u64>, seed: u64 },
}

/// Which device runs each plan entry in a sharded run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Entry `p` runs on device `p mod n_devices`.
    #[default]
    RoundRobin,
    /// Entry `p` runs on device `map[p]`.
    Explicit(Vec<usize>),
}

impl Assignment {
    /// Device index of every entry.
    pub fn devices(&self, n_entries: usize, n_devices: usize) -> Result<Vec<usize>> {
        if n_devices == 0 {
            return Err(Error::InvalidEnsemble("no devices".into()));
        }
        match self {
            Assignment::RoundRobin => Ok((0..n_entries).map(|p| p % n_devices).collect()),
            Assignment::Explicit(map) => {
                if map.len() != n_entries {
                    return Err(Error::InvalidEnsemble(format!(
                        "assignment covers {} entries, plan has {n_entries}",
                        map.len()
                    )));
                }
                if let Some(&d) = map.iter().find(|&&d| d >= n_devices) {
                    return Err(Error::InvalidEnsemble(format!(
                        "device {d} out of range for {n_devices} devices"
                    )));
                }
                Ok(map.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParallelStrategy {
    /// The whole plan on every device; mitigated results averaged.
    Replicated,
    /// Plan entries spread over devices, combined once.
    Sharded(Assignment),
}

/// Seed of device `d` in a replicated run.
pub fn device_seed(seed: u64, device: usize) -> u64 {
    derive_seed(seed, device as u64)
}

fn check_devices(models: &[NoiseModel]) -> Result<()> {
    if models.is_empty() {
        return Err(Error::InvalidEnsemble("an ensemble needs at least one device".into()));
    }
    Ok(())
}

/// Mitigated estimate of each device running the full plan.
pub fn replicated_per_device(
    plan: &MitigationPlan,
    models: &[NoiseModel],
    execution: &Execution,
    obs: &Observable,
) -> Result<Vec<Estimate>> {
    check_devices(models)?;
    models
        .par_iter()
        .enumerate()
        .map(|(d, nm)| {
            let prepared = PreparedPlan::new(plan, nm, obs)?;
            match execution {
                Execution::Exact => Ok(prepared.exact()),
                Execution::Sampled { budget, seed } => prepared.run(budget, device_seed(*seed, d)),
            }
        })
        .collect()
}

/// Unweighted mean of the per-device mitigated estimates, with variance
/// `mean(var_d) / n_devices`.
pub fn run_replicated(
    plan: &MitigationPlan,
    models: &[NoiseModel],
    execution: &Execution,
    obs: &Observable,
) -> Result<Estimate> {
    let per_device = replicated_per_device(plan, models, execution, obs)?;
    Ok(mean_estimate(&per_device))
}

/// Mean of independent estimates; the variance of that mean.
pub fn mean_estimate(estimates: &[Estimate]) -> Estimate {
    let n = estimates.len() as f64;
    Estimate {
        value: estimates.iter().map(|e| e.value).sum::<f64>() / n,
        variance: estimates.iter().map(|e| e.variance).sum::<f64>() / (n * n),
        shots_used: estimates.iter().map(|e| e.shots_used).sum(),
    }
}

/// Each plan entry runs on its assigned device; entry `p` samples with the
/// same stream as in a single-device run, so identical devices reproduce it.
pub fn run_sharded(
    plan: &MitigationPlan,
    models: &[NoiseModel],
    assignment: &Assignment,
    execution: &Execution,
    obs: &Observable,
) -> Result<Estimate> {
    check_devices(models)?;
    let devices = assignment.devices(plan.entries.len(), models.len())?;
    let per_entry: Vec<&NoiseModel> = devices.iter().map(|&d| &models[d]).collect();
    let prepared = PreparedPlan::per_entry(plan, &per_entry, obs)?;
    match execution {
        Execution::Exact => Ok(prepared.exact()),
        Execution::Sampled { budget, seed } => prepared.run(budget, *seed),
    }
}

pub fn run_strategy(
    plan: &MitigationPlan,
    models: &[NoiseModel],
    strategy: &ParallelStrategy,
    execution: &Execution,
    obs: &Observable,
) -> Result<Estimate> {
    match strategy {
        ParallelStrategy::Replicated => run_replicated(plan, models, execution, obs),
        ParallelStrategy::Sharded(a) => run_sharded(plan, models, a, execution, obs),
    }
}

/// `|ensemble - single_rate|`.
pub fn additional_error(ensemble: &Estimate, single_rate: &Estimate) -> f64 {
    (ensemble.value - single_rate.value).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::estimator::run_plan;

    fn four_cnot_riim() -> MitigationPlan {
        MitigationPlan::riim(&Circuit::cnot_chain(4, "10").unwrap()).unwrap()
    }

    #[test]
    fn round_robin_reuses_devices() {
        assert_eq!(Assignment::RoundRobin.devices(5, 2).unwrap(), vec![0, 1, 0, 1, 0]);
        assert_eq!(Assignment::RoundRobin.devices(31, 14).unwrap()[14], 0);
        assert!(Assignment::Explicit(vec![0, 1]).devices(3, 2).is_err());
        assert!(Assignment::Explicit(vec![0, 2]).devices(2, 2).is_err());
        assert!(Assignment::RoundRobin.devices(2, 0).is_err());
    }

    #[test]
    fn single_device_replicated_is_run_plan() {
        let plan = four_cnot_riim();
        let nm = NoiseModel::uniform(0.02).unwrap();
        let budget = vec![500; plan.entries.len()];
        let exec = Execution::Sampled { budget: budget.clone(), seed: 4 };
        let rep = run_replicated(&plan, std::slice::from_ref(&nm), &exec, &Observable::BitValue).unwrap();
        let direct = run_plan(&plan, &nm, &budget, device_seed(4, 0), &Observable::BitValue).unwrap();
        assert_eq!(rep, direct);
    }

    #[test]
    fn identical_devices_shard_like_one_device() {
        let plan = four_cnot_riim();
        let nm = NoiseModel::uniform(0.02).unwrap();
        let budget = vec![300; plan.entries.len()];
        let exec = Execution::Sampled { budget: budget.clone(), seed: 8 };
        let models = vec![nm.clone(); 3];
        let sharded = run_sharded(&plan, &models, &Assignment::RoundRobin, &exec, &Observable::BitValue).unwrap();
        let direct = run_plan(&plan, &nm, &budget, 8, &Observable::BitValue).unwrap();
        assert_eq!(sharded, direct);
    }

    #[test]
    fn replicated_mean_is_arithmetic_mean() {
        let plan = four_cnot_riim();
        let models: Vec<_> = [0.01, 0.02, 0.04].iter().map(|&e| NoiseModel::uniform(e).unwrap()).collect();
        let exec = Execution::Sampled { budget: vec![200; plan.entries.len()], seed: 2 };
        let per = replicated_per_device(&plan, &models, &exec, &Observable::BitValue).unwrap();
        let mean = run_replicated(&plan, &models, &exec, &Observable::BitValue).unwrap();
        let expected = per.iter().map(|e| e.value).sum::<f64>() / 3.0;
        assert_eq!(mean.value, expected);
        let var = per.iter().map(|e| e.variance).sum::<f64>() / 9.0;
        assert_eq!(mean.variance, var);
        assert_eq!(mean.shots_used, 3 * 5 * 200);
    }

    #[test]
    fn exact_noiseless_ensemble_gives_three() {
        let plan = four_cnot_riim();
        let models = vec![NoiseModel::noiseless(); 2];
        for strategy in [ParallelStrategy::Replicated, ParallelStrategy::Sharded(Assignment::RoundRobin)] {
            let est = run_strategy(&plan, &models, &strategy, &Execution::Exact, &Observable::BitValue).unwrap();
            assert!((est.value - 3.0).abs() < 1e-12);
        }
        assert!(run_replicated(&plan, &[], &Execution::Exact, &Observable::BitValue).is_err());
    }

    #[test]
    fn additional_error_of_identical_estimates() {
        let e = Estimate::exact(0.4);
        assert_eq!(additional_error(&e, &e), 0.0);
        assert!((additional_error(&Estimate::exact(0.5), &e) - 0.1).abs() < 1e-15);
    }
}
