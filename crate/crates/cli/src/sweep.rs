//! Parameter sweeps driven by a JSON spec, written as CSV plus a sidecar
//! JSON copy of the spec.
//!
//! Spec schema (version 1):
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "circuit": {"chain": {"layout": "alternating", "n_cnots": [2, 4], "initial_state": "11"}},
//!   "deepen": [1, 3, 5],
//!   "methods": ["none", "fiim1", "riim"],
//!   "noise": [
//!     {"uniform": {"epsilon": 0.001, "damping": {"t1_us": 50, "cnot_ns": 200}}},
//!     {"normal": {"mu": 0.1, "sigma": 0.01, "n_devices": 1000, "seed": 3}},
//!     {"devices": {"source": "bundled", "include_damping": false}}
//!   ],
//!   "strategy": "replicated",
//!   "exact": false,
//!   "shots": {"nominal": 8192, "aux": 8192, "allocation": "self_consistent"},
//!   "seed": 1,
//!   "observable": "ideal_target",
//!   "output": "sweep.csv"
//! }
//! ```
//!
//! `circuit` may instead be `{"file": "circuit.json"}`; relative paths are
//! resolved against the spec's directory. `deepen` is optional. `shots` is
//! required unless `exact` is true. Shot seeds depend on the circuit, depth
//! and method but not on the noise point, so rows that differ only in noise
//! share random numbers.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use zne_core::ensemble::{run_strategy, sample_normal_profiles, Assignment, Execution, ParallelStrategy};
use zne_core::estimator::{allocate_for_plan, AllocationMode};
use zne_core::insertion::deepen;
use zne_core::rng::derive_seed;
use zne_core::sim::{exact_expectation, Damping};
use zne_core::{Circuit, NoiseModel, ShotBudget};

use crate::common::{load_circuit, load_dataset, CliError, CliResult, Context, ObservableSpec};
use crate::method::{ChainLayout, MethodSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema_version: u32,
    pub circuit: CircuitSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deepen: Option<Vec<u32>>,
    pub methods: Vec<MethodSpec>,
    pub noise: Vec<NoisePoint>,
    #[serde(default)]
    pub strategy: StrategyKind,
    #[serde(default)]
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<ShotSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub observable: ObservableSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitSource {
    File(PathBuf),
    Chain {
        #[serde(default)]
        layout: ChainLayout,
        n_cnots: Vec<usize>,
        initial_state: String,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSpec {
    pub t1_us: f64,
    pub cnot_ns: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoisePoint {
    /// One device with the same rate on every pair.
    Uniform {
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        damping: Option<DampingSpec>,
    },
    /// `n_devices` rates drawn from `N(mu, sigma²)`.
    Normal {
        mu: f64,
        sigma: f64,
        n_devices: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Profiles from a device file; `"bundled"` follows `ZNE_LAB_DATA`.
    Devices {
        #[serde(default = "bundled")]
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        names: Option<Vec<String>>,
        #[serde(default)]
        include_damping: bool,
    },
}

fn bundled() -> String {
    "bundled".into()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[default]
    Replicated,
    Sharded,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotSpec {
    pub nominal: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<u64>,
    #[serde(default)]
    pub allocation: AllocationMode,
}

/// One CSV line; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub method: String,
    pub n_cnot: usize,
    pub epsilon_mean: f64,
    pub epsilon_std: f64,
    pub n_devices: usize,
    pub strategy: String,
    pub shots_nominal: Option<u64>,
    pub shots_aux: Option<u64>,
    pub estimate: f64,
    pub std_error: f64,
    pub exact_value: f64,
}

struct Devices {
    models: Vec<NoiseModel>,
    epsilon_mean: f64,
    epsilon_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl SweepSpec {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let spec: SweepSpec = serde_json::from_str(text).map_err(|e| CliError::input(format!("sweep spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, msg: &str| Err(CliError::input(msg).at(field));
        if self.schema_version != SCHEMA_VERSION {
            return bad(
                "schema_version",
                &format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required");
        }
        if self.noise.is_empty() {
            return bad("noise", "at least one noise point is required");
        }
        if let CircuitSource::Chain { n_cnots, .. } = &self.circuit {
            if n_cnots.is_empty() {
                return bad("circuit.chain.n_cnots", "at least one chain length is required");
            }
        }
        if matches!(&self.deepen, Some(d) if d.is_empty()) {
            return bad("deepen", "list is empty");
        }
        if !self.exact && self.shots.is_none() {
            return bad("shots", "required unless exact is true");
        }
        Ok(())
    }

    fn circuits(&self, base_dir: &Path) -> CliResult<Vec<Circuit>> {
        let bases = match &self.circuit {
            CircuitSource::File(p) => vec![load_circuit(&resolve(base_dir, p)).at("circuit.file")?],
            CircuitSource::Chain {
                layout,
                n_cnots,
                initial_state,
            } => n_cnots
                .iter()
                .map(|&n| layout.build(n, initial_state).at("circuit.chain"))
                .collect::<CliResult<_>>()?,
        };
        match &self.deepen {
            None => Ok(bases),
            Some(ks) => {
                let mut out = Vec::new();
                for c in &bases {
                    for &k in ks {
                        out.push(deepen(c, k).at("deepen")?);
                    }
                }
                Ok(out)
            }
        }
    }

    fn devices(&self, point: &NoisePoint, index: usize, base_dir: &Path) -> CliResult<Devices> {
        let field = format!("noise[{index}]");
        match point {
            NoisePoint::Uniform { epsilon, damping } => {
                let mut nm = NoiseModel::uniform(*epsilon).at(&field)?;
                if let Some(d) = damping {
                    nm = nm.with_damping(Damping::uniform(d.t1_us, d.cnot_ns).at(&field)?);
                }
                Ok(Devices {
                    models: vec![nm],
                    epsilon_mean: *epsilon,
                    epsilon_std: 0.0,
                })
            }
            NoisePoint::Normal {
                mu,
                sigma,
                n_devices,
                seed,
            } => {
                let ensemble = sample_normal_profiles(*n_devices, *mu, *sigma, *seed).at(&field)?;
                Ok(Devices {
                    models: ensemble.noise_models(false, None).at(&field)?,
                    epsilon_mean: *mu,
                    epsilon_std: *sigma,
                })
            }
            NoisePoint::Devices {
                source,
                names,
                include_damping,
            } => {
                let path = (source != "bundled").then(|| resolve(base_dir, Path::new(source)));
                let dataset = load_dataset(path.as_deref()).at(&field)?;
                let mut profiles: Vec<_> = dataset.active().cloned().collect();
                if let Some(names) = names {
                    for n in names {
                        if !profiles.iter().any(|p| &p.name == n) {
                            return Err(CliError::input(format!("no active device named `{n}`")).at(&field));
                        }
                    }
                    profiles.retain(|p| names.contains(&p.name));
                }
                if profiles.is_empty() {
                    return Err(CliError::input("no active devices").at(&field));
                }
                let per_device: Vec<f64> = profiles
                    .iter()
                    .map(|p| p.cx.iter().map(|c| c.error).sum::<f64>() / p.cx.len().max(1) as f64)
                    .collect();
                let (epsilon_mean, epsilon_std) = mean_std(&per_device);
                let models = profiles
                    .iter()
                    .map(|p| zne_core::ensemble::noise_model_of(p, *include_damping, None))
                    .collect::<Result<_, _>>()
                    .at(&field)?;
                Ok(Devices {
                    models,
                    epsilon_mean,
                    epsilon_std,
                })
            }
        }
    }

    /// Every row in circuit, noise point, method order.
    pub fn run(&self, base_dir: &Path) -> CliResult<Vec<Row>> {
        let circuits = self.circuits(base_dir)?;
        let devices = self
            .noise
            .iter()
            .enumerate()
            .map(|(i, p)| self.devices(p, i, base_dir))
            .collect::<CliResult<Vec<_>>>()?;
        let mut jobs = Vec::new();
        for (ci, circuit) in circuits.iter().enumerate() {
            let obs = self.observable.resolve(circuit).at("observable")?;
            let exact_value = exact_expectation(circuit, &NoiseModel::noiseless(), &obs)?;
            for dev in &devices {
                for (mi, method) in self.methods.iter().enumerate() {
                    let plan = method.build(circuit).at(&format!("methods[{mi}]"))?;
                    let seed = derive_seed(self.seed, (ci * self.methods.len() + mi) as u64);
                    jobs.push((circuit, obs.clone(), exact_value, dev, method, plan, seed));
                }
            }
        }
        jobs.par_iter()
            .map(|(circuit, obs, exact_value, dev, method, plan, seed)| {
                let single = dev.models.len() == 1;
                let strategy = match self.strategy {
                    StrategyKind::Sharded if !single => ParallelStrategy::Sharded(Assignment::RoundRobin),
                    _ => ParallelStrategy::Replicated,
                };
                let (execution, budget) = match (self.exact, self.shots) {
                    (false, Some(s)) => {
                        let base = ShotBudget::new(s.nominal, s.aux.unwrap_or(s.nominal)).at("shots")?;
                        let budget = allocate_for_plan(plan, base, s.allocation)?;
                        let exec = Execution::Sampled {
                            budget: budget.per_entry(plan),
                            seed: *seed,
                        };
                        (exec, Some(budget))
                    }
                    _ => (Execution::Exact, None),
                };
                let est = run_strategy(plan, &dev.models, &strategy, &execution, obs)?;
                let unmitigated = plan.entries.len() == 1;
                Ok(Row {
                    method: method.to_string(),
                    n_cnot: circuit.cnot_count(),
                    epsilon_mean: dev.epsilon_mean,
                    epsilon_std: dev.epsilon_std,
                    n_devices: dev.models.len(),
                    strategy: match (single, &strategy) {
                        (true, _) => "single".into(),
                        (false, ParallelStrategy::Replicated) => "replicated".into(),
                        (false, ParallelStrategy::Sharded(_)) => "sharded".into(),
                    },
                    shots_nominal: budget.map(|b| b.nominal),
                    shots_aux: budget.filter(|_| !unmitigated).map(|b| b.per_auxiliary),
                    estimate: est.value,
                    std_error: est.std_error(),
                    exact_value: *exact_value,
                })
            })
            .collect()
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    csv: String,
    rows: usize,
    spec: &'a SweepSpec,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_csv(rows: &[Row], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep(spec_path: &Path, output: Option<&Path>) -> CliResult<()> {
    let text =
        std::fs::read_to_string(spec_path).map_err(|e| CliError::input(format!("{}: {e}", spec_path.display())))?;
    let spec = SweepSpec::from_json(&text)?;
    let base_dir = spec_path.parent().unwrap_or(Path::new("."));
    let out = match (output, &spec.output) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => resolve(base_dir, p),
        (None, None) => return Err(CliError::input("no output path: pass --output or set `output`")),
    };
    let rows = spec.run(base_dir)?;
    write_csv(&rows, &out)?;
    let sidecar = Sidecar {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        csv: out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        rows: rows.len(),
        spec: &spec,
    };
    std::fs::write(sidecar_path(&out), serde_json::to_string_pretty(&sidecar)?)?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_specs_validate() {
        for text in [
            include_str!("../specs/chain_damping.json"),
            include_str!("../specs/pair_selection.json"),
            include_str!("../specs/normal_ensemble.json"),
            include_str!("../specs/device_depth.json"),
        ] {
            let spec = SweepSpec::from_json(text).unwrap();
            assert!(spec.circuits(Path::new(".")).is_ok());
        }
    }

    #[test]
    fn spec_validation_names_fields() {
        let err = SweepSpec::from_json(r#"{"schema_version": 2, "circuit": {"file": "x"}, "methods": ["none"], "noise": [{"uniform": {"epsilon": 0}}], "exact": true}"#).unwrap_err();
        assert!(err.message.starts_with("schema_version"), "{}", err.message);
        let err = SweepSpec::from_json(r#"{"schema_version": 1, "circuit": {"file": "x"}, "methods": ["none"], "noise": [{"uniform": {"epsilon": 0}}]}"#).unwrap_err();
        assert!(err.message.starts_with("shots"), "{}", err.message);
        let err = SweepSpec::from_json(r#"{"schema_version": 1, "circuit": {"file": "x"}, "methods": ["bogus"], "noise": [], "exact": true}"#).unwrap_err();
        assert!(err.message.contains("bogus"), "{}", err.message);
        let err = SweepSpec::from_json(r#"{"schema_version": 1, "circuit": {"file": "x"}, "methods": ["none"], "noise": [], "exact": true, "extra": 1}"#).unwrap_err();
        assert!(err.message.contains("extra"), "{}", err.message);
    }

    #[test]
    fn exact_chain_sweep_rows() {
        let spec = SweepSpec::from_json(
            r#"{"schema_version": 1,
                "circuit": {"chain": {"n_cnots": [2, 4], "initial_state": "11"}},
                "methods": ["none", "fiim1"],
                "noise": [{"uniform": {"epsilon": 0.01}}],
                "exact": true}"#,
        )
        .unwrap();
        let rows = spec.run(Path::new(".")).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].method, "none");
        assert_eq!(rows[0].n_cnot, 2);
        assert_eq!(rows[0].strategy, "single");
        assert!((rows[0].estimate - 0.985075).abs() < 1e-12);
        assert_eq!(rows[0].shots_nominal, None);
        assert!(rows.iter().all(|r| r.exact_value == 1.0));
    }
}
