use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-device submission limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobLimits {
    pub max_shots_per_circuit: u64,
    pub max_circuits_per_job: usize,
}

impl JobLimits {
    pub fn new(max_shots_per_circuit: u64, max_circuits_per_job: usize) -> Result<Self> {
        if max_shots_per_circuit == 0 || max_circuits_per_job == 0 {
            return Err(Error::InvalidEnsemble(format!(
                "job limits must be at least 1, got {max_shots_per_circuit}/{max_circuits_per_job}"
            )));
        }
        Ok(JobLimits {
            max_shots_per_circuit,
            max_circuits_per_job,
        })
    }
}

/// One circuit run for a number of shots within a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub circuit: usize,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Job {
    pub submissions: Vec<Submission>,
}

/// Splits each `(circuit, shots)` demand into submissions of at most
/// `max_shots_per_circuit` and packs them, in order, into jobs of at most
/// `max_circuits_per_job` submissions. Zero-shot demands produce nothing.
pub fn batch_jobs(demands: &[(usize, u64)], limits: JobLimits) -> Vec<Job> {
    let submissions = demands.iter().flat_map(|&(circuit, shots)| {
        let full = shots / limits.max_shots_per_circuit;
        let rest = shots % limits.max_shots_per_circuit;
        std::iter::repeat_n(limits.max_shots_per_circuit, full as usize)
            .chain((rest > 0).then_some(rest))
            .map(move |shots| Submission { circuit, shots })
    });
    let submissions: Vec<Submission> = submissions.collect();
    submissions
        .chunks(limits.max_circuits_per_job)
        .map(|c| Job {
            submissions: c.to_vec(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_circuit_single_job() {
        let jobs = batch_jobs(&[(0, 8192)], JobLimits::new(8192, 900).unwrap());
        assert_eq!(jobs.len(), 1);
        assert_eq!(jobs[0].submissions, vec![Submission { circuit: 0, shots: 8192 }]);
    }

    #[test]
    fn oversized_demand_is_split() {
        let jobs = batch_jobs(&[(3, 20000)], JobLimits::new(8192, 900).unwrap());
        let shots: Vec<u64> = jobs[0].submissions.iter().map(|s| s.shots).collect();
        assert_eq!(shots, vec![8192, 8192, 3616]);
    }

    #[test]
    fn circuit_limit_packs_jobs() {
        let demands: Vec<_> = (0..150).map(|c| (c, 1000)).collect();
        let jobs = batch_jobs(&demands, JobLimits::new(8192, 75).unwrap());
        assert_eq!(jobs.len(), 2);
        assert!(jobs.iter().all(|j| j.submissions.len() == 75));
    }

    #[test]
    fn limits_are_validated() {
        assert!(JobLimits::new(0, 1).is_err());
        assert!(JobLimits::new(1, 0).is_err());
        assert!(batch_jobs(&[(0, 0)], JobLimits::new(1, 1).unwrap()).is_empty());
    }
}
