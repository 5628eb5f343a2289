use std::path::PathBuf;

use serde::Serialize;
use zne_core::ensemble::{convert_bracketed_table, noise_model_of, DeviceProfile};
use zne_core::estimator::{allocate_for_plan, exact_plan, run_plan, AllocationMode, DEFAULT_SHOTS};
use zne_core::sim::{exact_expectation, Damping};
use zne_core::{Estimate, NoiseModel, ShotBudget};

use crate::common::{load_dataset, print_stdout, write_output, CircuitArgs, CliError, CliResult, Context, MethodArgs, ObservableSpec};

#[derive(Debug, clap::Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn plan(args: &PlanArgs) -> CliResult<()> {
    let circuit = args.circuit.load()?;
    let plan = args.method.spec()?.build(&circuit).at("--method")?;
    write_output(args.output.as_deref(), &plan.to_json()?)
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Uniform depolarizing rate for every CNOT pair.
    #[arg(long, default_value_t = 0.0, conflicts_with = "device")]
    pub epsilon: f64,
    /// Use a device profile from the dataset instead of --epsilon.
    #[arg(long, value_name = "NAME")]
    pub device: Option<String>,
    /// Device dataset path (overrides ZNE_LAB_DATA and the bundled data).
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Add amplitude damping after every CNOT.
    #[arg(long)]
    pub damping: bool,
    /// T1 for --damping with --epsilon.
    #[arg(long, default_value_t = 50.0)]
    pub t1_us: f64,
    /// CNOT duration for --damping with --epsilon.
    #[arg(long, default_value_t = 200.0)]
    pub cnot_ns: f64,
    /// Baseline shots for the nominal circuit.
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    pub shots: u64,
    /// Baseline shots per auxiliary circuit (default: --shots).
    #[arg(long)]
    pub aux_shots: Option<u64>,
    /// Scaling of the baseline budget for multi-set methods.
    #[arg(long, value_enum, default_value_t = Allocation::SelfConsistent)]
    pub allocation: Allocation,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// bit_value, ideal_target or target:<bits>.
    #[arg(long, default_value = "bit_value")]
    pub observable: ObservableSpec,
    /// Report infinite-shot expectations instead of sampling.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Allocation {
    SelfConsistent,
    Tabulated,
}

impl From<Allocation> for AllocationMode {
    fn from(a: Allocation) -> Self {
        match a {
            Allocation::SelfConsistent => AllocationMode::SelfConsistent,
            Allocation::Tabulated => AllocationMode::Tabulated,
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum NoiseSummary {
    Epsilon { epsilon: f64, damping: bool },
    Device { name: String, damping: bool },
}

#[derive(Serialize)]
struct RunReport {
    method: String,
    n_cnot: usize,
    observable: String,
    noise: NoiseSummary,
    seed: u64,
    exact: bool,
    shots: Option<ShotBudget>,
    reference_value: f64,
    unmitigated: Estimate,
    mitigated: Estimate,
}

fn run_noise(args: &RunArgs) -> CliResult<(NoiseModel, NoiseSummary)> {
    if let Some(name) = &args.device {
        let dataset = load_dataset(args.data.as_deref())?;
        let ensemble = dataset.ensemble().at("--data")?;
        let profile: &DeviceProfile = ensemble
            .get(name)
            .ok_or_else(|| CliError::input(format!("no active device named `{name}`")).at("--device"))?;
        let nm = noise_model_of(profile, args.damping, None).at("--device")?;
        return Ok((
            nm,
            NoiseSummary::Device {
                name: name.clone(),
                damping: args.damping,
            },
        ));
    }
    let mut nm = NoiseModel::uniform(args.epsilon).at("--epsilon")?;
    if args.damping {
        nm = nm.with_damping(Damping::uniform(args.t1_us, args.cnot_ns).at("--t1-us/--cnot-ns")?);
    }
    Ok((
        nm,
        NoiseSummary::Epsilon {
            epsilon: args.epsilon,
            damping: args.damping,
        },
    ))
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let circuit = args.circuit.load()?;
    let method = args.method.spec()?;
    let plan = method.build(&circuit).at("--method")?;
    let unmitigated = zne_core::MitigationPlan::unmitigated(&circuit)?;
    let obs = args.observable.resolve(&circuit).at("--observable")?;
    let (nm, noise) = run_noise(args)?;
    let reference_value = exact_expectation(&circuit, &NoiseModel::noiseless(), &obs)?;

    let (shots, raw, mitigated) = if args.exact {
        (None, exact_plan(&unmitigated, &nm, &obs)?, exact_plan(&plan, &nm, &obs)?)
    } else {
        let base = ShotBudget::new(args.shots, args.aux_shots.unwrap_or(args.shots)).at("--shots/--aux-shots")?;
        let budget = allocate_for_plan(&plan, base, args.allocation.into())?;
        let raw = run_plan(&unmitigated, &nm, &[base.nominal], args.seed, &obs)?;
        let mitigated = run_plan(&plan, &nm, &budget.per_entry(&plan), args.seed, &obs)?;
        (Some(budget), raw, mitigated)
    };
    let report = RunReport {
        method: method.to_string(),
        n_cnot: circuit.cnot_count(),
        observable: args.observable.to_string(),
        noise,
        seed: args.seed,
        exact: args.exact,
        shots,
        reference_value,
        unmitigated: raw,
        mitigated,
    };
    write_output(args.output.as_deref(), &serde_json::to_string_pretty(&report)?)
}

#[derive(Debug, clap::Subcommand)]
pub enum DevicesCommand {
    /// Print name, mean CNOT error and CNOT length of every system.
    List {
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
    },
    /// Convert bracketed-notation calibration tables to device JSON.
    Convert {
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

pub fn devices(cmd: &DevicesCommand) -> CliResult<()> {
    match cmd {
        DevicesCommand::List { data } => {
            let dataset = load_dataset(data.as_deref())?;
            if dataset.active().next().is_none() {
                return Err(CliError::input("the device dataset has no active systems"));
            }
            let mut out = String::from("name\tmean_cx_error\tcx_length_ns\n");
            for s in &dataset.systems {
                match s {
                    zne_core::ensemble::SystemEntry::Active(p) => {
                        let mean = p.cx.iter().map(|c| c.error).sum::<f64>() / p.cx.len().max(1) as f64;
                        let lengths: Vec<String> = p
                            .cx
                            .iter()
                            .map(|c| c.length_ns.map_or("-".into(), |l| l.to_string()))
                            .collect();
                        out.push_str(&format!("{}\t{mean:e}\t{}\n", p.name, lengths.join(",")));
                    }
                    zne_core::ensemble::SystemEntry::Retired { name, .. } => {
                        out.push_str(&format!("{name}\tretired\t-\n"));
                    }
                }
            }
            print_stdout(&out)
        }
        DevicesCommand::Convert { input, output } => {
            let text = std::fs::read_to_string(input).map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
            let dataset = convert_bracketed_table(&text)?;
            write_output(output.as_deref(), &dataset.to_json()?)
        }
    }
}
