use std::collections::BTreeMap;

use crate::circuit::QubitId;
use crate::error::{Error, Result};

use super::density::check_probability;

/// T1 relaxation applied to every qubit for the duration of each CNOT.
#[derive(Debug, Clone, PartialEq)]
pub struct Damping {
    t1_us: T1,
    cnot_duration_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum T1 {
    Uniform(f64),
    PerQubit(Vec<f64>),
}

impl Damping {
    /// The same T1 on every qubit.
    pub fn uniform(t1_us: f64, cnot_duration_ns: f64) -> Result<Self> {
        check_t1(t1_us)?;
        check_duration(cnot_duration_ns)?;
        Ok(Damping {
            t1_us: T1::Uniform(t1_us),
            cnot_duration_ns,
        })
    }

    pub fn per_qubit(t1_us: Vec<f64>, cnot_duration_ns: f64) -> Result<Self> {
        t1_us.iter().try_for_each(|&t| check_t1(t))?;
        check_duration(cnot_duration_ns)?;
        Ok(Damping {
            t1_us: T1::PerQubit(t1_us),
            cnot_duration_ns,
        })
    }

    pub fn cnot_duration_ns(&self) -> f64 {
        self.cnot_duration_ns
    }

    pub fn t1_us(&self, q: QubitId) -> Result<f64> {
        match &self.t1_us {
            T1::Uniform(t) => Ok(*t),
            T1::PerQubit(ts) => ts.get(q.0).copied().ok_or_else(|| {
                Error::InvalidNoise(format!("no T1 configured for {q}"))
            }),
        }
    }

    /// `γ = 1 - exp(-T_cnot / T1)` for qubit `q`.
    pub fn gamma(&self, q: QubitId) -> Result<f64> {
        Ok(damping_gamma(self.t1_us(q)?, self.cnot_duration_ns))
    }
}

/// Damping constant for a gate of `duration_ns` on a qubit with `t1_us`.
pub fn damping_gamma(t1_us: f64, duration_ns: f64) -> f64 {
    -(-(duration_ns * 1e-3) / t1_us).exp_m1()
}

fn check_t1(t1_us: f64) -> Result<()> {
    if !(t1_us > 0.0 && t1_us.is_finite()) {
        return Err(Error::InvalidNoise(format!("T1 must be positive, got {t1_us}")));
    }
    Ok(())
}

fn check_duration(ns: f64) -> Result<()> {
    if !(ns >= 0.0 && ns.is_finite()) {
        return Err(Error::InvalidNoise(format!(
            "CNOT duration must be non-negative, got {ns}"
        )));
    }
    Ok(())
}

/// Per-pair two-qubit depolarizing rates plus optional amplitude damping.
///
/// Pairs are unordered: `(j, k)` and `(k, j)` share one rate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseModel {
    depolarizing: BTreeMap<(usize, usize), f64>,
    default_epsilon: Option<f64>,
    damping: Option<Damping>,
}

fn pair_key(a: QubitId, b: QubitId) -> (usize, usize) {
    (a.0.min(b.0), a.0.max(b.0))
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            default_epsilon: Some(0.0),
            ..Default::default()
        }
    }

    /// One depolarizing rate for every pair.
    pub fn uniform(epsilon: f64) -> Result<Self> {
        NoiseModel::default().with_default_epsilon(epsilon)
    }

    pub fn with_default_epsilon(mut self, epsilon: f64) -> Result<Self> {
        check_probability("depolarizing epsilon", epsilon)?;
        self.default_epsilon = Some(epsilon);
        Ok(self)
    }

    pub fn with_pair(mut self, a: usize, b: usize, epsilon: f64) -> Result<Self> {
        check_probability("depolarizing epsilon", epsilon)?;
        if a == b {
            return Err(Error::InvalidNoise(format!("pair ({a}, {b}) is not a pair")));
        }
        self.depolarizing.insert(pair_key(QubitId(a), QubitId(b)), epsilon);
        Ok(self)
    }

    pub fn with_damping(mut self, damping: Damping) -> Self {
        self.damping = Some(damping);
        self
    }

    pub fn without_damping(mut self) -> Self {
        self.damping = None;
        self
    }

    pub fn damping(&self) -> Option<&Damping> {
        self.damping.as_ref()
    }

    pub fn default_epsilon(&self) -> Option<f64> {
        self.default_epsilon
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.depolarizing.iter().map(|(&k, &v)| (k, v))
    }

    /// Depolarizing rate for a CNOT on `(a, b)`.
    pub fn epsilon(&self, a: QubitId, b: QubitId) -> Result<f64> {
        self.depolarizing
            .get(&pair_key(a, b))
            .copied()
            .or(self.default_epsilon)
            .ok_or_else(|| {
                Error::InvalidNoise(format!(
                    "no depolarizing rate for pair ({}, {}) and no default",
                    a.0, b.0
                ))
            })
    }
}
